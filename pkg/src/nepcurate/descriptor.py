"""Per-atom radial environment descriptors with analytic distance derivatives.

The descriptor of atom i is species-pair resolved: for every element s in the
spec and radial index n, component ``q[s * n_rad + n]`` sums
``T_n(2 r / r_cut - 1) * f_c(r)`` over neighbors j of species s within r_cut,
with Chebyshev polynomials T_n and the smooth cutoff
``f_c(r) = (1 + cos(pi r / r_cut)) / 2``.  Both the value and its first
derivative vanish at r_cut, so forces stay continuous as neighbors cross the
cutoff sphere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry

__all__ = [
    "DescriptorSpec",
    "SpeciesCoverageError",
    "radial_basis",
    "pair_environment",
    "frame_descriptors",
    "atomic_descriptor",
    "structure_descriptor",
    "dataset_descriptors",
]


class SpeciesCoverageError(ValueError):
    def __init__(self, symbol):
        super().__init__(f"species {symbol!r} is not covered by the descriptor spec")
        self.symbol = symbol


@dataclass(frozen=True)
class DescriptorSpec:
    """Radial descriptor hyperparameters: cutoff, basis size, element order."""

    r_cut: float
    n_rad: int
    elements: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(str(e) for e in self.elements))
        if self.r_cut <= 0:
            raise ValueError(f"r_cut must be positive, got {self.r_cut}")
        if self.n_rad < 1:
            raise ValueError(f"n_rad must be >= 1, got {self.n_rad}")
        if len(self.elements) == 0:
            raise ValueError("element list is empty")
        if len(set(self.elements)) != len(self.elements):
            raise ValueError("duplicate elements in spec")

    @property
    def n_des(self) -> int:
        return len(self.elements) * self.n_rad

    def species_index(self, symbol: str) -> int:
        try:
            return self.elements.index(symbol)
        except ValueError:
            raise SpeciesCoverageError(symbol) from None


def radial_basis(dist, spec: DescriptorSpec):
    """Chebyshev-times-cutoff basis values and d/dr derivatives.

    Returns (g, dg) of shape (P, n_rad) for distances ``dist`` of shape (P,).
    """
    r = np.asarray(dist, dtype=float)
    rc = spec.r_cut
    x = 2.0 * r / rc - 1.0
    fc = 0.5 * (1.0 + np.cos(np.pi * r / rc))
    dfc = -(np.pi / (2.0 * rc)) * np.sin(np.pi * r / rc)

    n_rad = spec.n_rad
    t = np.empty((r.size, n_rad))
    dt = np.empty((r.size, n_rad))
    t[:, 0] = 1.0
    dt[:, 0] = 0.0
    if n_rad > 1:
        t[:, 1] = x
        dt[:, 1] = 1.0
    for n in range(2, n_rad):
        t[:, n] = 2.0 * x * t[:, n - 1] - t[:, n - 2]
        dt[:, n] = 2.0 * t[:, n - 1] + 2.0 * x * dt[:, n - 1] - dt[:, n - 2]

    g = t * fc[:, None]
    dg = dt * (2.0 / rc) * fc[:, None] + t * dfc[:, None]
    return g, dg


@dataclass
class PairEnvironment:
    """Directed neighbor pairs of one frame, ready for descriptor assembly.

    ``col`` is the first descriptor column of the species block of atom j,
    i.e. contributions of pair p go to ``q[i[p], col[p]:col[p] + n_rad]``.
    """

    n_atoms: int
    i: np.ndarray
    j: np.ndarray
    col: np.ndarray
    dist: np.ndarray
    unit: np.ndarray
    g: np.ndarray
    dg: np.ndarray


def pair_environment(frame, spec: DescriptorSpec) -> PairEnvironment:
    for symbol in set(frame.species):
        spec.species_index(symbol)
    i_idx, j_idx, _, vec, dist = geometry.pair_table(frame, spec.r_cut)
    block = np.array([spec.species_index(s) for s in frame.species], dtype=int)
    if i_idx.size:
        unit = vec / dist[:, None]
        g, dg = radial_basis(dist, spec)
        col = block[j_idx] * spec.n_rad
    else:
        unit = np.empty((0, 3))
        g = np.empty((0, spec.n_rad))
        dg = np.empty((0, spec.n_rad))
        col = np.empty(0, dtype=int)
    return PairEnvironment(
        n_atoms=frame.n_atoms, i=i_idx, j=j_idx, col=col, dist=dist,
        unit=unit, g=g, dg=dg,
    )


def assemble_descriptors(env: PairEnvironment, spec: DescriptorSpec) -> np.ndarray:
    """Sum pair contributions into the (N, n_des) descriptor matrix."""
    q = np.zeros((env.n_atoms, spec.n_des))
    for n in range(spec.n_rad):
        np.add.at(q, (env.i, env.col + n), env.g[:, n])
    return q


def frame_descriptors(frame, spec: DescriptorSpec) -> np.ndarray:
    """Atomic descriptors of a whole frame, shape (N, n_des)."""
    return assemble_descriptors(pair_environment(frame, spec), spec)


def atomic_descriptor(frame, i: int, spec: DescriptorSpec) -> np.ndarray:
    """Descriptor vector of atom i (an isolated atom gives all zeros)."""
    if not 0 <= i < frame.n_atoms:
        raise IndexError(f"atom index {i} out of range for {frame.n_atoms} atoms")
    return frame_descriptors(frame, spec)[i]


def structure_descriptor(frame, spec: DescriptorSpec) -> np.ndarray:
    """Arithmetic mean of the atomic descriptors (requires a nonempty frame)."""
    if frame.n_atoms == 0:
        raise ValueError("cannot compute a structure descriptor of an empty frame")
    return frame_descriptors(frame, spec).mean(axis=0)


def dataset_descriptors(frames, spec: DescriptorSpec) -> np.ndarray:
    """Structure descriptors for each frame, stacked as (M, n_des)."""
    rows = [structure_descriptor(f, spec) for f in frames]
    return np.array(rows).reshape(len(rows), spec.n_des)
