"""Perturbed-structure generation: random cell strain plus atomic rattling.

A perturbation applies a symmetric strain with components drawn uniformly
from [-c, +c] (fractional coordinates ride along with the cell), then
displaces every atom by an independent uniform vector inside the ball of
radius d, so |dr| <= d is a hard bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import Dataset, Frame
from .geometry import RadiiTable, is_physical

__all__ = ["PerturbSpec", "PerturbError", "perturb_structure", "generate_set"]

FILTER_RETRY_LIMIT = 100


class PerturbError(RuntimeError):
    pass


@dataclass
class PerturbSpec:
    n: int = 5000
    cell_amplitude: float = 0.04
    disp_amplitude: float = 0.3
    filter: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.cell_amplitude < 0 or self.disp_amplitude < 0:
            raise ValueError("perturbation amplitudes must be non-negative")


def _symmetric_strain(rng, amplitude) -> np.ndarray:
    xx, yy, zz, yz, xz, xy = rng.uniform(-amplitude, amplitude, size=6)
    return np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])


def _ball_displacement(rng, radius) -> np.ndarray:
    # rejection from the cube keeps the density uniform in the ball
    while True:
        v = rng.uniform(-1.0, 1.0, size=3)
        if v @ v <= 1.0:
            return v * radius


def _perturb_once(base: Frame, spec: PerturbSpec, rng, label: str) -> Frame:
    frame = base.copy()
    if frame.cell.any():
        strain = _symmetric_strain(rng, spec.cell_amplitude)
        mapping = np.eye(3) + strain
        frame.cell = frame.cell @ mapping
        frame.positions = frame.positions @ mapping
    if spec.disp_amplitude > 0:
        for k in range(frame.n_atoms):
            frame.positions[k] += _ball_displacement(rng, spec.disp_amplitude)
    frame.ref_energy = None
    frame.ref_forces = None
    frame.ref_virial = None
    frame.info = dict(frame.info)
    frame.info["config_type"] = f"perturb_{label}"
    return frame


def perturb_structure(
    base: Frame,
    spec: PerturbSpec,
    radii: RadiiTable | None = None,
    rng=None,
    label: str | None = None,
) -> Frame:
    """One perturbed copy of ``base``; with ``spec.filter`` the result is
    guaranteed physical (up to FILTER_RETRY_LIMIT redraws).
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if label is None:
        label = str(base.info.get("config_type", "structure"))
    if spec.filter and radii is None:
        radii = RadiiTable.builtin()
    attempts = FILTER_RETRY_LIMIT if spec.filter else 1
    for _ in range(attempts):
        candidate = _perturb_once(base, spec, rng, label)
        if not spec.filter or is_physical(candidate, radii):
            return candidate
    raise PerturbError(
        f"no physical structure found for base {label!r} in "
        f"{FILTER_RETRY_LIMIT} attempts; lower the amplitudes or the coeff"
    )


def generate_set(
    bases,
    spec: PerturbSpec,
    radii: RadiiTable | None = None,
    labels=None,
) -> Dataset:
    """``spec.n`` perturbed frames, round-robin over the base structures.

    Every output frame draws from its own (seed, index)-derived generator,
    so regeneration is deterministic and parallel-safe.
    """
    bases = list(bases)
    if not bases:
        raise ValueError("no base structures given")
    if labels is None:
        labels = [str(b.info.get("config_type", f"base{k}")) for k, b in enumerate(bases)]
    if spec.filter and radii is None:
        radii = RadiiTable.builtin()
    frames = []
    for index in range(spec.n):
        which = index % len(bases)
        rng = np.random.default_rng([spec.seed, index])
        try:
            frames.append(perturb_structure(
                bases[which], spec, radii, rng=rng, label=labels[which]
            ))
        except PerturbError as exc:
            raise PerturbError(f"output {index} (base {labels[which]!r}): {exc}") from exc
    return Dataset(frames)
