"""Single-hidden-layer site-energy network: prediction and persistence.

The site energy of atom i with descriptor q is

    U_i = sum_mu w1[mu] * tanh( sum_nu w0[mu, nu] * q[nu] - b0[mu] ) - b1

and the frame energy is the sum of site energies.  Forces and the virial are
evaluated analytically through the descriptor's distance derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .descriptor import DescriptorSpec, PairEnvironment, assemble_descriptors, pair_environment

__all__ = [
    "SurrogateModel",
    "ModelFormatError",
    "site_energy",
    "site_energies",
    "predict",
    "rmse",
]

MODEL_HEADER = "nepcurate-model v1"


class ModelFormatError(ValueError):
    pass


@dataclass
class SurrogateModel:
    spec: DescriptorSpec
    w0: np.ndarray
    b0: np.ndarray
    w1: np.ndarray
    b1: float

    def __post_init__(self):
        self.w0 = np.asarray(self.w0, dtype=float)
        self.b0 = np.asarray(self.b0, dtype=float).reshape(-1)
        self.w1 = np.asarray(self.w1, dtype=float).reshape(-1)
        self.b1 = float(self.b1)
        n_neu = self.b0.shape[0]
        if self.w0.shape != (n_neu, self.spec.n_des):
            raise ValueError(
                f"w0 shape {self.w0.shape} inconsistent with "
                f"(n_neu={n_neu}, n_des={self.spec.n_des})"
            )
        if self.w1.shape != (n_neu,):
            raise ValueError(f"w1 shape {self.w1.shape} != ({n_neu},)")
        for name, arr in (("w0", self.w0), ("b0", self.b0), ("w1", self.w1)):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")
        if not np.isfinite(self.b1):
            raise ValueError("b1 is not finite")

    @property
    def n_neu(self) -> int:
        return self.b0.shape[0]

    @property
    def n_parameters(self) -> int:
        return self.w0.size + self.b0.size + self.w1.size + 1

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.w0.reshape(-1), self.b0, self.w1, [self.b1]])

    @classmethod
    def from_vector(cls, spec: DescriptorSpec, n_neu: int, vec) -> "SurrogateModel":
        vec = np.asarray(vec, dtype=float).reshape(-1)
        expect = n_neu * spec.n_des + 2 * n_neu + 1
        if vec.size != expect:
            raise ValueError(f"parameter vector has {vec.size} entries, expected {expect}")
        k = n_neu * spec.n_des
        return cls(
            spec=spec,
            w0=vec[:k].reshape(n_neu, spec.n_des),
            b0=vec[k : k + n_neu],
            w1=vec[k + n_neu : k + 2 * n_neu],
            b1=float(vec[-1]),
        )

    def save(self, path) -> None:
        """Plain-text persistence; 17 significant digits keep load exact."""
        f = lambda x: f"{float(x):.17g}"
        lines = [
            MODEL_HEADER,
            "elements " + " ".join(self.spec.elements),
            f"r_cut {f(self.spec.r_cut)}",
            f"n_rad {self.spec.n_rad}",
            f"n_neu {self.n_neu}",
            "w0",
        ]
        lines += [" ".join(f(x) for x in row) for row in self.w0]
        lines.append("b0")
        lines.append(" ".join(f(x) for x in self.b0))
        lines.append("w1")
        lines.append(" ".join(f(x) for x in self.w1))
        lines.append("b1")
        lines.append(f(self.b1))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "SurrogateModel":
        lines = [ln for ln in Path(path).read_text().splitlines()]
        if not lines or lines[0].strip() != MODEL_HEADER:
            raise ModelFormatError(f"{path}: missing '{MODEL_HEADER}' header")
        fields = {}
        pos = 1
        try:
            while pos < len(lines):
                key = lines[pos].split()[0] if lines[pos].split() else ""
                if key == "elements":
                    fields["elements"] = tuple(lines[pos].split()[1:])
                    pos += 1
                elif key in ("r_cut", "n_rad", "n_neu"):
                    fields[key] = lines[pos].split()[1]
                    pos += 1
                elif key == "w0":
                    n_neu = int(fields["n_neu"])
                    rows = [np.array(lines[pos + 1 + k].split(), dtype=float)
                            for k in range(n_neu)]
                    fields["w0"] = np.array(rows)
                    pos += 1 + n_neu
                elif key in ("b0", "w1"):
                    fields[key] = np.array(lines[pos + 1].split(), dtype=float)
                    pos += 2
                elif key == "b1":
                    fields["b1"] = float(lines[pos + 1])
                    pos += 2
                elif key == "":
                    pos += 1
                else:
                    raise ModelFormatError(f"{path}: unknown section {key!r}")
            spec = DescriptorSpec(
                r_cut=float(fields["r_cut"]),
                n_rad=int(fields["n_rad"]),
                elements=fields["elements"],
            )
            return cls(spec=spec, w0=fields["w0"], b0=fields["b0"],
                       w1=fields["w1"], b1=fields["b1"])
        except (KeyError, IndexError, ValueError) as exc:
            if isinstance(exc, ModelFormatError):
                raise
            raise ModelFormatError(f"{path}: truncated or malformed model file") from exc


def site_energies(q_matrix, model: SurrogateModel) -> np.ndarray:
    """Site energies for descriptor rows, shape (N,)."""
    q_matrix = np.atleast_2d(np.asarray(q_matrix, dtype=float))
    if q_matrix.shape[1] != model.spec.n_des:
        raise ValueError(
            f"descriptor length {q_matrix.shape[1]} != n_des {model.spec.n_des}"
        )
    hidden = np.tanh(q_matrix @ model.w0.T - model.b0)
    return hidden @ model.w1 - model.b1


def site_energy(q, model: SurrogateModel) -> float:
    """Site energy of a single descriptor vector."""
    return float(site_energies(np.asarray(q, dtype=float).reshape(1, -1), model)[0])


def _network_terms(q_matrix, model):
    """tanh activations and dU/dq rows for a descriptor matrix."""
    hidden = np.tanh(q_matrix @ model.w0.T - model.b0)
    energies = hidden @ model.w1 - model.b1
    # dU_i/dq_nu = sum_mu w1[mu] (1 - tanh^2) w0[mu, nu]
    du_dq = ((1.0 - hidden**2) * model.w1) @ model.w0
    return energies, du_dq


def forces_from_pairs(env: PairEnvironment, du_dq, n_rad: int):
    """Forces and Voigt virial from directed pair contributions.

    For each directed pair p = (i -> j) the derivative of U_i with respect to
    the pair distance is ``c_p = sum_n du_dq[i, col + n] * dg[p, n]``.
    """
    n_atoms = env.n_atoms
    forces = np.zeros((n_atoms, 3))
    virial = np.zeros((3, 3))
    if env.i.size:
        c = np.zeros(env.i.size)
        for n in range(n_rad):
            c += du_dq[env.i, env.col + n] * env.dg[:, n]
        pair_force = c[:, None] * env.unit
        np.add.at(forces, env.i, pair_force)
        np.add.at(forces, env.j, -pair_force)
        weighted = (c * env.dist)[:, None] * env.unit
        virial = -(weighted.T @ env.unit)
    voigt = np.array([virial[0, 0], virial[1, 1], virial[2, 2],
                      virial[1, 2], virial[0, 2], virial[0, 1]])
    return forces, voigt


def predict(frame, model: SurrogateModel):
    """Energy (eV), forces (N x 3, eV/A), and Voigt virial (6, eV) of a frame."""
    env = pair_environment(frame, model.spec)
    q = assemble_descriptors(env, model.spec)
    energies, du_dq = _network_terms(q, model)
    forces, voigt = forces_from_pairs(env, du_dq, model.spec.n_rad)
    return float(energies.sum()), forces, voigt


def rmse(series) -> float:
    """Root-mean-square of (pred - ref) over all scalar components."""
    if len(series) == 0:
        raise ValueError("cannot compute the RMSE of an empty parity series")
    diff = series.pred - series.ref
    return float(np.sqrt(np.mean(diff * diff)))


def dataset_parity(dataset, model: SurrogateModel, coverage_errors=None) -> dict:
    """Predicted-vs-reference series per property kind, NEP-output style.

    Energy and virial rows are per atom (so their RMSE reads as eV/atom);
    force rows are one per atom.  Frames lacking a reference for a kind are
    skipped for that kind, tracked through ``frame_index``.  When
    ``coverage_errors`` is a list, frames whose species the model does not
    cover are skipped and reported there as (frame index, message) instead of
    raising.
    """
    from .descriptor import SpeciesCoverageError
    from .frames import ParitySeries  # local import to avoid a cycle at import time

    rows = {kind: ([], [], []) for kind in ("energy", "force", "virial")}
    for idx, frame in enumerate(dataset):
        try:
            energy, forces, virial = predict(frame, model)
        except SpeciesCoverageError as exc:
            if coverage_errors is None:
                raise
            coverage_errors.append((idx, str(exc)))
            continue
        n = frame.n_atoms
        if frame.ref_energy is not None and n > 0:
            pred_rows, ref_rows, indices = rows["energy"]
            pred_rows.append([energy / n])
            ref_rows.append([frame.ref_energy / n])
            indices.append(idx)
        if frame.ref_forces is not None:
            pred_rows, ref_rows, indices = rows["force"]
            pred_rows.extend(forces.tolist())
            ref_rows.extend(frame.ref_forces.tolist())
            indices.extend([idx] * n)
        if frame.ref_virial is not None and n > 0:
            pred_rows, ref_rows, indices = rows["virial"]
            pred_rows.append((virial / n).tolist())
            ref_rows.append((frame.ref_virial / n).tolist())
            indices.append(idx)

    out = {}
    for kind, (pred_rows, ref_rows, indices) in rows.items():
        if pred_rows:
            k = {"energy": 1, "force": 3, "virial": 6}[kind]
            out[kind] = ParitySeries(
                kind=kind,
                pred=np.array(pred_rows, dtype=float).reshape(-1, k),
                ref=np.array(ref_rows, dtype=float).reshape(-1, k),
                frame_index=np.array(indices, dtype=int),
            )
    return out
