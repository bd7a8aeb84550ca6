"""Shared builders for randomized structures and numeric comparisons."""

import numpy as np
import pytest

from nepcurate.frames import Frame


def assert_ulp_close(a, b, ulps=1):
    """Elementwise |a - b| within the given number of ULPs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    assert a.shape == b.shape
    tol = ulps * np.spacing(np.maximum(np.abs(a), np.abs(b)))
    bad = np.abs(a - b) > tol
    assert not bad.any(), f"values differ by more than {ulps} ULP: {a[bad]} vs {b[bad]}"


def random_cell(rng, lo=4.0, hi=9.0, skew=0.3):
    """A random invertible triclinic cell with bounded skew."""
    cell = np.diag(rng.uniform(lo, hi, 3))
    cell[1, 0] = rng.uniform(-skew, skew) * cell[0, 0]
    cell[2, 0] = rng.uniform(-skew, skew) * cell[0, 0]
    cell[2, 1] = rng.uniform(-skew, skew) * cell[1, 1]
    return cell


def random_frame(rng, n_atoms=None, elements=("A", "B"), periodic=True,
                 with_labels=False, skew=0.3):
    """A random triclinic frame with atoms inside the cell."""
    if n_atoms is None:
        n_atoms = int(rng.integers(1, 7))
    species = [elements[int(rng.integers(len(elements)))] for _ in range(n_atoms)]
    if periodic:
        cell = random_cell(rng, skew=skew)
        frac = rng.uniform(0.0, 1.0, (n_atoms, 3))
        positions = frac @ cell
        frame = Frame(species=species, positions=positions, cell=cell,
                      periodic=[True, True, True])
    else:
        frame = Frame(species=species,
                      positions=rng.uniform(-5.0, 5.0, (n_atoms, 3)))
    if with_labels:
        frame.ref_energy = float(rng.normal())
        frame.ref_forces = rng.normal(0, 0.5, (n_atoms, 3))
        frame.ref_virial = rng.normal(0, 0.5, 6)
        frame.info["config_type"] = f"random_{int(rng.integers(0, 5))}"
    return frame


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
