"""Periodic-cell geometry: minimum-image distances, neighbor enumeration,
and covalent-radius bond screening.

Cell rows are lattice vectors; a Cartesian vector v maps to fractional
coordinates as ``v @ inv(cell)``.  Image-shift search extents are derived
from the cell's perpendicular widths and capped at ``MAX_IMAGE_SHIFT``,
which is exact for desk-scale cells of any skew.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "RadiiTable",
    "BondReport",
    "FlaggedPair",
    "GeometryError",
    "UnknownElementError",
    "MAX_IMAGE_SHIFT",
    "DEFAULT_COEFF",
    "min_image_distance",
    "neighbor_list",
    "pair_table",
    "bond_report",
    "is_physical",
]

MAX_IMAGE_SHIFT = 5
DEFAULT_COEFF = 0.65


class GeometryError(ValueError):
    pass


class UnknownElementError(KeyError):
    def __init__(self, symbol):
        super().__init__(f"element {symbol!r} is not in the radii table")
        self.symbol = symbol


@dataclass
class RadiiTable:
    """Covalent radii (Angstrom) plus the dimensionless screening factor.

    A pair (i, j) at distance d is non-physical when
    ``(radius_i + radius_j) * coeff > d``.
    """

    radius_by_element: dict[str, float]
    coeff: float = DEFAULT_COEFF

    def __post_init__(self):
        self.radius_by_element = {str(k): float(v) for k, v in self.radius_by_element.items()}
        if any(r <= 0 for r in self.radius_by_element.values()):
            raise ValueError("all covalent radii must be positive")
        if not 0 < self.coeff < 1.5:
            raise ValueError(f"coeff must lie in (0, 1.5), got {self.coeff}")

    def radius(self, symbol: str) -> float:
        try:
            return self.radius_by_element[symbol]
        except KeyError:
            raise UnknownElementError(symbol) from None

    def threshold(self, sym_i: str, sym_j: str) -> float:
        return (self.radius(sym_i) + self.radius(sym_j)) * self.coeff

    @classmethod
    def from_file(cls, path, coeff: float = DEFAULT_COEFF) -> "RadiiTable":
        """Load a table of ``Symbol radius`` lines; '#' starts a comment."""
        radii = {}
        for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            toks = body.split()
            if len(toks) != 2:
                raise ValueError(f"{path}, line {line_no}: expected 'Symbol radius'")
            radii[toks[0]] = float(toks[1])
        return cls(radii, coeff=coeff)

    @classmethod
    def builtin(cls, coeff: float = DEFAULT_COEFF) -> "RadiiTable":
        """The embedded Cordero 2008 single-bond radii."""
        ref = resources.files("nepcurate.data").joinpath("covalent_radii.txt")
        with resources.as_file(ref) as path:
            return cls.from_file(path, coeff=coeff)


@dataclass
class FlaggedPair:
    i: int
    j: int
    shift: tuple[int, int, int]
    distance: float
    threshold: float


@dataclass
class BondReport:
    """Minimum interatomic distance and all pairs below their bond threshold."""

    min_distance: float
    min_pair: tuple[int, int, tuple[int, int, int]] | None
    flagged_pairs: list[FlaggedPair] = field(default_factory=list)


def _check_cell(frame):
    if frame.periodic.any() and abs(np.linalg.det(frame.cell)) < 1e-300:
        raise GeometryError("cell is singular but periodic flags are set")


def _perpendicular_widths(cell) -> np.ndarray:
    """Distance between opposite cell faces along each lattice direction."""
    volume = abs(np.linalg.det(cell))
    widths = np.empty(3)
    for k in range(3):
        a, b = cell[(k + 1) % 3], cell[(k + 2) % 3]
        area = np.linalg.norm(np.cross(a, b))
        widths[k] = volume / area if area > 0 else np.inf
    return widths


def _shift_extents(frame, r_search, max_shift=MAX_IMAGE_SHIFT) -> np.ndarray:
    widths = _perpendicular_widths(frame.cell)
    extents = np.zeros(3, dtype=int)
    for k in range(3):
        if frame.periodic[k]:
            extents[k] = min(max_shift, int(math.ceil(r_search / widths[k])))
    return extents


def _shift_vectors(extents) -> np.ndarray:
    ranges = [np.arange(-n, n + 1) for n in extents]
    grid = np.meshgrid(*ranges, indexing="ij")
    return np.stack([g.reshape(-1) for g in grid], axis=1)


def min_image_distance(frame, i: int, j: int) -> float:
    """Shortest distance between atoms i and j over periodic images."""
    return _min_image(frame, i, j)[0]


def _min_image(frame, i, j):
    """Return (distance, integer shift) of the closest image of j seen from i.

    Candidate distances are evaluated as |delta + shift @ cell| directly (no
    pre-wrapped intermediate), so the result is bitwise identical to an
    exhaustive shift search over the same candidates.
    """
    n = frame.n_atoms
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"atom index out of range: ({i}, {j}) with {n} atoms")
    delta = frame.positions[j] - frame.positions[i]
    if not frame.periodic.any():
        return float(np.linalg.norm(delta)), (0, 0, 0)
    _check_cell(frame)
    inv = np.linalg.inv(frame.cell)
    frac = delta @ inv
    wrap = np.where(frame.periodic, np.round(frac), 0.0).astype(int)
    d0 = np.linalg.norm(delta - wrap @ frame.cell)
    extents = _shift_extents(frame, d0)
    shifts = _shift_vectors(extents) - wrap
    cand = delta + shifts @ frame.cell
    dist = np.linalg.norm(cand, axis=1)
    best = int(np.argmin(dist))
    return float(dist[best]), tuple(int(x) for x in shifts[best])


def pair_table(frame, r_cut: float, max_shift: int = MAX_IMAGE_SHIFT):
    """All directed pairs (i -> j, shift) with distance <= r_cut.

    Returns arrays (i, j, shift (P,3), vec (P,3), dist (P,)) where
    ``vec = positions[j] + shift @ cell - positions[i]``.  Both directions of
    every pair are present, so the table is symmetric under (i, j, s) ->
    (j, i, -s).  Periodic self-pairs (i == j, s != 0) are included.
    """
    if r_cut <= 0:
        raise GeometryError(f"r_cut must be positive, got {r_cut}")
    _check_cell(frame)
    n = frame.n_atoms
    if n == 0:
        return (np.empty(0, int), np.empty(0, int), np.empty((0, 3), int),
                np.empty((0, 3)), np.empty(0))
    pos = frame.positions
    extents = _shift_extents(frame, r_cut, max_shift)
    shifts = _shift_vectors(extents)
    offsets = shifts @ frame.cell

    # (i, j, shift) displacement block, masked in one pass
    vec = (pos[None, :, None, :] + offsets[None, None, :, :]
           - pos[:, None, None, :])
    dist = np.sqrt(np.einsum("ijsk,ijsk->ijs", vec, vec))
    mask = dist <= r_cut
    zero_shift = int(np.flatnonzero(~shifts.any(axis=1))[0])
    mask[np.arange(n), np.arange(n), zero_shift] = False

    ii, jj, ss = np.nonzero(mask)
    return (ii, jj, shifts[ss], vec[ii, jj, ss], dist[ii, jj, ss])


def neighbor_list(frame, r_cut: float, max_shift: int = MAX_IMAGE_SHIFT):
    """Per-atom neighbor sets: for each atom a list of (j, shift, distance)."""
    i_idx, j_idx, shifts, _, dists = pair_table(frame, r_cut, max_shift)
    neighbors = [[] for _ in range(frame.n_atoms)]
    for i, j, s, d in zip(i_idx, j_idx, shifts, dists):
        neighbors[int(i)].append((int(j), tuple(int(x) for x in s), float(d)))
    return neighbors


def _shortest_lattice_vector(frame):
    """Length and shift of the shortest nonzero lattice translation."""
    if not frame.periodic.any():
        return math.inf, None
    row_norms = [np.linalg.norm(frame.cell[k]) for k in range(3) if frame.periodic[k]]
    d0 = min(row_norms)
    extents = _shift_extents(frame, d0)
    shifts = _shift_vectors(extents)
    nonzero = shifts[np.any(shifts != 0, axis=1)]
    if nonzero.size == 0:
        return math.inf, None
    vecs = nonzero @ frame.cell
    norms = np.linalg.norm(vecs, axis=1)
    best = int(np.argmin(norms))
    return float(norms[best]), tuple(int(x) for x in nonzero[best])


def _undirected_mask(i_idx, j_idx, shifts):
    """Keep one representative of each unordered pair from a directed table."""
    keep = i_idx < j_idx
    self_pairs = i_idx == j_idx
    if self_pairs.any():
        s = shifts[self_pairs]
        positive = (s[:, 0] > 0) | ((s[:, 0] == 0) & (s[:, 1] > 0)) | (
            (s[:, 0] == 0) & (s[:, 1] == 0) & (s[:, 2] > 0)
        )
        keep = keep.copy()
        keep[np.nonzero(self_pairs)[0]] = positive
    return keep


def bond_report(frame, radii: RadiiTable) -> BondReport:
    """Scan all unordered pairs (including periodic self-images) for bonds
    shorter than ``(R_i + R_j) * coeff`` and report the global minimum.
    """
    for symbol in set(frame.species):
        radii.radius(symbol)

    n = frame.n_atoms
    r_atom = np.array([radii.radius(s) for s in frame.species])

    # global minimum distance over minimum images plus the self-image floor
    min_distance, min_pair = math.inf, None
    for i in range(n):
        for j in range(i + 1, n):
            d, shift = _min_image(frame, i, j)
            if d < min_distance:
                min_distance, min_pair = d, (i, j, shift)
    self_d, self_shift = _shortest_lattice_vector(frame)
    if n > 0 and self_d < min_distance:
        min_distance, min_pair = self_d, (0, 0, self_shift)

    flagged = []
    if n > 0:
        r_search = float(2.0 * r_atom.max() * radii.coeff)
        i_idx, j_idx, shifts, _, dists = pair_table(frame, r_search)
        if i_idx.size:
            keep = _undirected_mask(i_idx, j_idx, shifts)
            thresholds = (r_atom[i_idx] + r_atom[j_idx]) * radii.coeff
            hit = keep & (thresholds > dists)
            order = np.nonzero(hit)[0]
            for p in order:
                flagged.append(FlaggedPair(
                    i=int(i_idx[p]),
                    j=int(j_idx[p]),
                    shift=tuple(int(x) for x in shifts[p]),
                    distance=float(dists[p]),
                    threshold=float(thresholds[p]),
                ))
            flagged.sort(key=lambda f: (f.i, f.j, f.shift))
    return BondReport(min_distance=min_distance, min_pair=min_pair, flagged_pairs=flagged)


def is_physical(frame, radii: RadiiTable) -> bool:
    """True iff no atom pair violates the covalent-radius bond criterion."""
    return not bond_report(frame, radii).flagged_pairs
