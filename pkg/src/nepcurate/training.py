"""Separable natural evolution strategy training of the surrogate network.

The loss is a weighted sum of the energy, force, and virial RMSEs plus an L2
penalty on the parameter vector:

    L = lambda_e * RMSE_e + lambda_f * RMSE_f + lambda_v * RMSE_v
        + lambda_reg * mean(theta^2)

Energy and virial RMSEs are per atom; the force RMSE runs over all Cartesian
components.  Frame geometry enters only through descriptors and their
distance derivatives, so both are precomputed once and every candidate
evaluation is a handful of dense matrix operations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .descriptor import DescriptorSpec, pair_environment
from .surrogate import SurrogateModel

__all__ = ["LossWeights", "TrainingError", "train", "evaluate_loss"]

INIT_SIGMA = 0.1  # stddev of the parameter initialization and initial search


class TrainingError(ValueError):
    pass


@dataclass
class LossWeights:
    lambda_e: float = 1.0
    lambda_f: float = 1.0
    lambda_v: float = 0.1
    lambda_reg: float = 0.0

    def __post_init__(self):
        for name in ("lambda_e", "lambda_f", "lambda_v", "lambda_reg"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.lambda_e + self.lambda_f + self.lambda_v <= 0:
            raise ValueError("at least one of lambda_e/lambda_f/lambda_v must be positive")


class _DesignTables:
    """Geometry-dependent quantities of a training set, computed once."""

    def __init__(self, dataset, spec: DescriptorSpec, weights: LossWeights):
        frames = list(dataset)
        if not frames:
            raise TrainingError("training dataset is empty")
        for idx, frame in enumerate(frames):
            if frame.ref_energy is None:
                raise TrainingError(f"frame {idx} has no reference energy")

        self.spec = spec
        self.n_frames = len(frames)
        self.natoms = np.array([f.n_atoms for f in frames], dtype=int)
        self.starts = np.concatenate([[0], np.cumsum(self.natoms)[:-1]])
        total = int(self.natoms.sum())

        self.q = np.zeros((total, spec.n_des))
        self.ref_e_per_atom = np.array(
            [f.ref_energy / f.n_atoms for f in frames], dtype=float
        )

        need_forces = weights.lambda_f > 0
        need_virial = weights.lambda_v > 0
        pair_i, pair_j, pair_frame = [], [], []
        pair_col, pair_dg, pair_unit, pair_dist = [], [], [], []
        self.force_ref = np.zeros((total, 3))
        self.force_mask = np.zeros(total, dtype=bool)
        self.virial_ref = np.zeros((self.n_frames, 6))
        self.virial_mask = np.zeros(self.n_frames, dtype=bool)

        for idx, frame in enumerate(frames):
            env = pair_environment(frame, spec)
            base = self.starts[idx]
            for n in range(spec.n_rad):
                np.add.at(self.q, (base + env.i, env.col + n), env.g[:, n])
            if (need_forces or need_virial) and env.i.size:
                pair_i.append(base + env.i)
                pair_j.append(base + env.j)
                pair_frame.append(np.full(env.i.size, idx))
                pair_col.append(env.col)
                pair_dg.append(env.dg)
                pair_unit.append(env.unit)
                pair_dist.append(env.dist)
            if need_forces and frame.ref_forces is not None:
                self.force_ref[base : base + frame.n_atoms] = frame.ref_forces
                self.force_mask[base : base + frame.n_atoms] = True
            if need_virial and frame.ref_virial is not None:
                self.virial_ref[idx] = frame.ref_virial
                self.virial_mask[idx] = True

        # directed pair (i -> j) tables; j enters forces via the mirrored pair
        self.pair_i = np.concatenate(pair_i) if pair_i else np.empty(0, int)
        self.pair_j = np.concatenate(pair_j) if pair_j else np.empty(0, int)
        self.pair_frame = np.concatenate(pair_frame) if pair_frame else np.empty(0, int)
        self.pair_col = np.concatenate(pair_col) if pair_col else np.empty(0, int)
        self.pair_dg = np.concatenate(pair_dg) if pair_dg else np.empty((0, spec.n_rad))
        self.pair_unit = np.concatenate(pair_unit) if pair_unit else np.empty((0, 3))
        self.pair_dist = np.concatenate(pair_dist) if pair_dist else np.empty(0)
        self.use_forces = need_forces and self.force_mask.any()
        self.use_virial = need_virial and self.virial_mask.any()


def _candidate_loss(vec, tables: _DesignTables, n_neu: int, weights: LossWeights):
    spec = tables.spec
    k = n_neu * spec.n_des
    w0 = vec[:k].reshape(n_neu, spec.n_des)
    b0 = vec[k : k + n_neu]
    w1 = vec[k + n_neu : k + 2 * n_neu]
    b1 = vec[-1]

    hidden = np.tanh(tables.q @ w0.T - b0)
    site = hidden @ w1 - b1
    frame_e = np.add.reduceat(site, tables.starts)
    de = (frame_e - tables.ref_e_per_atom * tables.natoms) / tables.natoms
    loss = weights.lambda_e * math.sqrt(float(np.mean(de * de)))

    if tables.use_forces or tables.use_virial:
        du_dq = ((1.0 - hidden**2) * w1) @ w0
        c = np.zeros(tables.pair_i.size)
        for n in range(spec.n_rad):
            c += du_dq[tables.pair_i, tables.pair_col + n] * tables.pair_dg[:, n]
        if tables.use_forces:
            forces = np.zeros_like(tables.force_ref)
            pair_force = c[:, None] * tables.pair_unit
            np.add.at(forces, tables.pair_i, pair_force)
            np.add.at(forces, tables.pair_j, -pair_force)
            df = (forces - tables.force_ref)[tables.force_mask]
            loss += weights.lambda_f * math.sqrt(float(np.mean(df * df)))
        if tables.use_virial:
            w = -(c * tables.pair_dist)[:, None] * tables.pair_unit
            per_frame = np.zeros((tables.n_frames, 6))
            comp_a = (0, 1, 2, 1, 0, 0)
            comp_b = (0, 1, 2, 2, 2, 1)
            for v, (a, b) in enumerate(zip(comp_a, comp_b)):
                np.add.at(per_frame[:, v], tables.pair_frame, w[:, a] * tables.pair_unit[:, b])
            dv = (per_frame - tables.virial_ref)[tables.virial_mask]
            dv = dv / tables.natoms[tables.virial_mask, None]
            loss += weights.lambda_v * math.sqrt(float(np.mean(dv * dv)))

    if weights.lambda_reg > 0:
        loss += weights.lambda_reg * float(np.mean(vec * vec))
    return loss


def evaluate_loss(model: SurrogateModel, dataset, weights: LossWeights) -> float:
    """Loss of one model on a dataset (same definition the trainer minimizes)."""
    tables = _DesignTables(dataset, model.spec, weights)
    return _candidate_loss(model.to_vector(), tables, model.n_neu, weights)


def snes_population(dim: int) -> int:
    """Population size: 4 + 3 * floor(ln dim), rounded up to even."""
    lam = 4 + 3 * int(math.floor(math.log(dim)))
    return lam + (lam % 2)


def _snes_utilities(lam: int) -> np.ndarray:
    ranks = np.arange(1, lam + 1)
    raw = np.maximum(0.0, math.log(lam / 2.0 + 1.0) - np.log(ranks))
    return raw / raw.sum() - 1.0 / lam


def train(
    dataset,
    spec: DescriptorSpec,
    n_neu: int,
    weights: LossWeights,
    generations: int,
    seed: int = 0,
    init: SurrogateModel | None = None,
    callback=None,
) -> SurrogateModel:
    """Fit the network by SNES; returns the best parameters seen.

    With ``generations == 0`` the freshly initialized (or ``init``) model is
    returned unchanged.  Runs are deterministic for a given seed.  ``callback``
    (if given) receives ``(generation, best_loss)`` once per generation.
    """
    if n_neu < 1:
        raise TrainingError(f"n_neu must be >= 1, got {n_neu}")
    if generations < 0:
        raise TrainingError(f"generations must be >= 0, got {generations}")
    tables = _DesignTables(dataset, spec, weights)

    dim = n_neu * spec.n_des + 2 * n_neu + 1
    rng = np.random.default_rng(seed)
    if init is not None:
        if init.spec != spec or init.n_neu != n_neu:
            raise TrainingError("init model architecture does not match the request")
        mu = init.to_vector()
    else:
        mu = rng.normal(0.0, INIT_SIGMA, size=dim)
    sigma = np.full(dim, INIT_SIGMA)

    if generations == 0:
        return SurrogateModel.from_vector(spec, n_neu, mu)

    lam = snes_population(dim)
    utilities = _snes_utilities(lam)
    eta_mu = 1.0
    eta_sigma = (3.0 + math.log(dim)) / (5.0 * math.sqrt(dim))

    best_vec = mu.copy()
    best_loss = _candidate_loss(mu, tables, n_neu, weights)
    for gen in range(generations):
        z = rng.standard_normal((lam, dim))
        candidates = mu + sigma * z
        losses = np.array([
            _candidate_loss(candidates[k], tables, n_neu, weights) for k in range(lam)
        ])
        order = np.argsort(losses, kind="stable")
        if losses[order[0]] < best_loss:
            best_loss = float(losses[order[0]])
            best_vec = candidates[order[0]].copy()
        z_sorted = z[order]
        mu = mu + eta_mu * sigma * (utilities @ z_sorted)
        sigma = sigma * np.exp(0.5 * eta_sigma * (utilities @ (z_sorted**2 - 1.0)))
        if callback is not None:
            callback(gen, best_loss)
    return SurrogateModel.from_vector(spec, n_neu, best_vec)
