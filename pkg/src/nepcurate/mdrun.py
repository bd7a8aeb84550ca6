"""Velocity-Verlet molecular dynamics with a Langevin (BAOAB) thermostat.

Internal units: Angstrom, femtosecond, amu, and eV.  With friction = 0 the
O-step is the identity and the integrator reduces to plain velocity Verlet
(NVE).  Positions are never wrapped; periodicity is handled downstream by
minimum-image machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import Dataset, Frame
from . import surrogate

__all__ = ["MdParams", "ForceDivergenceError", "run_md", "kinetic_temperature"]

KB_EV = 8.617333262e-5  # Boltzmann constant, eV/K
# (eV/A)/amu expressed in A/fs^2: (e / 1e-10 m) / (1 amu) scaled to A/fs^2
ACC_UNIT = 1.602176634e-19 / 1e-10 / 1.66053906660e-27 * 1e-20
# amu*(A/fs)^2 expressed in eV
KIN_UNIT = 1.0 / ACC_UNIT

ATOMIC_MASS = {
    "H": 1.008, "He": 4.0026, "Li": 6.94, "Be": 9.0122, "B": 10.81,
    "C": 12.011, "N": 14.007, "O": 15.999, "F": 18.998, "Ne": 20.180,
    "Na": 22.990, "Mg": 24.305, "Al": 26.982, "Si": 28.085, "P": 30.974,
    "S": 32.06, "Cl": 35.45, "Ar": 39.948, "K": 39.098, "Ca": 40.078,
    "Sc": 44.956, "Ti": 47.867, "V": 50.942, "Cr": 51.996, "Mn": 54.938,
    "Fe": 55.845, "Co": 58.933, "Ni": 58.693, "Cu": 63.546, "Zn": 65.38,
    "Ga": 69.723, "Ge": 72.630, "As": 74.922, "Se": 78.971, "Br": 79.904,
    "Kr": 83.798, "Rb": 85.468, "Sr": 87.62, "Y": 88.906, "Zr": 91.224,
    "Nb": 92.906, "Mo": 95.95, "Tc": 98.0, "Ru": 101.07, "Rh": 102.91,
    "Pd": 106.42, "Ag": 107.87, "Cd": 112.41, "In": 114.82, "Sn": 118.71,
    "Sb": 121.76, "Te": 127.60, "I": 126.90, "Xe": 131.29, "Cs": 132.91,
    "Ba": 137.33, "La": 138.91, "Ce": 140.12, "Pr": 140.91, "Nd": 144.24,
    "Pm": 145.0, "Sm": 150.36, "Eu": 151.96, "Gd": 157.25, "Tb": 158.93,
    "Dy": 162.50, "Ho": 164.93, "Er": 167.26, "Tm": 168.93, "Yb": 173.05,
    "Lu": 174.97, "Hf": 178.49, "Ta": 180.95, "W": 183.84, "Re": 186.21,
    "Os": 190.23, "Ir": 192.22, "Pt": 195.08, "Au": 196.97, "Hg": 200.59,
    "Tl": 204.38, "Pb": 207.2, "Bi": 208.98, "Po": 209.0, "At": 210.0,
    "Rn": 222.0, "Fr": 223.0, "Ra": 226.0, "Ac": 227.0, "Th": 232.04,
    "Pa": 231.04, "U": 238.03, "Np": 237.0, "Pu": 244.0, "Am": 243.0,
    "Cm": 247.0,
}


class ForceDivergenceError(RuntimeError):
    """The trajectory left the physical regime; carries the offending step."""

    def __init__(self, step, max_force, bound):
        super().__init__(
            f"force divergence at step {step}: |F|max = {max_force:.3g} eV/A "
            f"exceeds the {bound:.3g} eV/A bound (non-physical trajectory)"
        )
        self.step = step


@dataclass
class MdParams:
    timestep: float = 1.0        # fs
    friction: float = 0.01       # 1/fs; 0 disables the thermostat (NVE)
    dump_interval: int = 100     # steps between snapshots
    max_force: float = 50.0      # eV/A divergence bound

    def __post_init__(self):
        if self.timestep <= 0:
            raise ValueError(f"timestep must be positive, got {self.timestep}")
        if self.friction < 0:
            raise ValueError(f"friction must be >= 0, got {self.friction}")
        if self.dump_interval < 1:
            raise ValueError(f"dump_interval must be >= 1, got {self.dump_interval}")


def masses_of(species) -> np.ndarray:
    try:
        return np.array([ATOMIC_MASS[s] for s in species])
    except KeyError as exc:
        raise KeyError(f"no atomic mass for element {exc.args[0]!r}") from None


def kinetic_temperature(velocities, masses) -> float:
    """Instantaneous kinetic temperature (K) from 3N momentum degrees."""
    n = len(masses)
    if n == 0:
        return 0.0
    kinetic = 0.5 * float(np.sum(masses[:, None] * velocities**2)) * KIN_UNIT
    return 2.0 * kinetic / (3.0 * n * KB_EV)


def _force_provider(engine):
    if isinstance(engine, surrogate.SurrogateModel):
        return lambda frame: surrogate.predict(frame, engine)[:2]
    if hasattr(engine, "evaluate"):
        return lambda frame: engine.evaluate(frame)[:2]
    raise TypeError(f"cannot derive forces from engine {type(engine).__name__}")


def run_md(
    frame: Frame,
    engine,
    duration_ps: float,
    temperature: float,
    params: MdParams | None = None,
    seed: int = 0,
) -> Dataset:
    """Integrate a frame for ``duration_ps`` at the target temperature.

    ``engine`` is a SurrogateModel or any calculator exposing
    ``evaluate(frame) -> (energy, forces, ...)``.  Snapshots (including the
    initial frame) are taken every ``params.dump_interval`` steps; a force
    component beyond ``params.max_force`` aborts with the offending step.
    """
    if params is None:
        params = MdParams()
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    forces_of = _force_provider(engine)
    rng = np.random.default_rng(seed)

    state = frame.copy()
    masses = masses_of(state.species)
    n = state.n_atoms
    steps = int(round(duration_ps * 1000.0 / params.timestep))

    # Maxwell-Boltzmann start with the center-of-mass drift removed
    v_std = np.sqrt(KB_EV * temperature * ACC_UNIT / masses)
    velocities = rng.standard_normal((n, 3)) * v_std[:, None]
    if n > 0:
        velocities -= (masses[:, None] * velocities).sum(axis=0) / masses.sum()

    def snapshot(step):
        out = state.copy()
        out.info = dict(out.info)
        out.info["config_type"] = f"md_T{temperature:g}"
        out.info["time_ps"] = step * params.timestep / 1000.0
        out.info["temperature"] = kinetic_temperature(velocities, masses)
        out.atom_arrays["vel"] = velocities.copy()
        return out

    trajectory = [snapshot(0)]
    if steps == 0 or n == 0:
        return Dataset(trajectory)

    dt = params.timestep
    half = 0.5 * dt
    c1 = np.exp(-params.friction * dt) if params.friction > 0 else 1.0
    c2 = np.sqrt(max(0.0, 1.0 - c1 * c1) * KB_EV * temperature * ACC_UNIT / masses)

    _, forces = forces_of(state)
    for step in range(1, steps + 1):
        fmax = float(np.max(np.abs(forces))) if forces.size else 0.0
        if fmax > params.max_force:
            raise ForceDivergenceError(step - 1, fmax, params.max_force)
        accel = forces * (ACC_UNIT / masses[:, None])
        velocities = velocities + half * accel
        state.positions = state.positions + half * velocities
        if params.friction > 0:
            velocities = c1 * velocities + c2[:, None] * rng.standard_normal((n, 3))
        state.positions = state.positions + half * velocities
        _, forces = forces_of(state)
        accel = forces * (ACC_UNIT / masses[:, None])
        velocities = velocities + half * accel
        if step % params.dump_interval == 0:
            trajectory.append(snapshot(step))
    return Dataset(trajectory)
