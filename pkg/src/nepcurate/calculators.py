"""Reference calculators that label frames with energy, forces, and virial.

A desk-scale analytic Lennard-Jones pair potential stands in for expensive
electronic-structure labeling, and an external-command adapter shells out to
anything that reads and writes extended XYZ.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry
from .frames import Dataset, Frame, frames_to_string, read_dataset

__all__ = [
    "LennardJones",
    "ExternalCommand",
    "CalculatorError",
    "LabelReport",
    "label",
]


class CalculatorError(RuntimeError):
    pass


def _pair_key(a: str, b: str) -> str:
    return "-".join(sorted((a, b)))


@dataclass
class LennardJones:
    """Truncated (unshifted) 12-6 pair potential.

    ``epsilon`` and ``sigma`` are either scalars applying to every species
    pair or mappings keyed "A-B" (order-insensitive).
    """

    epsilon: float | dict = 0.01
    sigma: float | dict = 3.4
    cutoff: float = 10.0

    def __post_init__(self):
        if self.cutoff <= 0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")
        for name in ("epsilon", "sigma"):
            value = getattr(self, name)
            values = value.values() if isinstance(value, dict) else [value]
            if any(v <= 0 for v in values):
                raise ValueError(f"{name} values must be positive")

    def _param(self, table, a, b) -> float:
        if isinstance(table, dict):
            key = _pair_key(a, b)
            if key not in table:
                raise CalculatorError(f"no pair parameters for {key!r}")
            return float(table[key])
        return float(table)

    def evaluate(self, frame: Frame):
        """Energy (eV), forces (N x 3), and Voigt virial (6,) of one frame."""
        i_idx, j_idx, shifts, vec, dist = geometry.pair_table(frame, self.cutoff)
        energy = 0.0
        forces = np.zeros((frame.n_atoms, 3))
        virial = np.zeros((3, 3))
        if i_idx.size:
            keep = geometry._undirected_mask(i_idx, j_idx, shifts)
            if isinstance(self.epsilon, dict) or isinstance(self.sigma, dict):
                eps = np.array([
                    self._param(self.epsilon, frame.species[i], frame.species[j])
                    for i, j in zip(i_idx[keep], j_idx[keep])
                ])
                sig = np.array([
                    self._param(self.sigma, frame.species[i], frame.species[j])
                    for i, j in zip(i_idx[keep], j_idx[keep])
                ])
            else:
                eps = float(self.epsilon)
                sig = float(self.sigma)
            r = dist[keep]
            u = vec[keep] / r[:, None]
            sr6 = (sig / r) ** 6
            energy = float(np.sum(4.0 * eps * (sr6 * sr6 - sr6)))
            dphi = 4.0 * eps * (-12.0 * sr6 * sr6 + 6.0 * sr6) / r
            pair_force = dphi[:, None] * u
            np.add.at(forces, i_idx[keep], pair_force)
            np.add.at(forces, j_idx[keep], -pair_force)
            weighted = (dphi * r)[:, None] * u
            virial = -(weighted.T @ u)
        voigt = np.array([virial[0, 0], virial[1, 1], virial[2, 2],
                          virial[1, 2], virial[0, 2], virial[0, 1]])
        return energy, forces, voigt

    def probe(self) -> None:
        """Builtin calculators are always healthy."""


@dataclass
class ExternalCommand:
    """Adapter around ``CMD {in.xyz} {out.xyz}``-style labeling commands.

    The frame is written as a single-frame extended-XYZ file, the placeholders
    are substituted, and the command must exit 0 leaving a parseable labeled
    frame at the output path.
    """

    template: str
    timeout: float = 300.0
    extra_substitutions: dict = field(default_factory=dict)

    IN_TOKEN = "{in.xyz}"
    OUT_TOKEN = "{out.xyz}"

    def __post_init__(self):
        if self.IN_TOKEN not in self.template or self.OUT_TOKEN not in self.template:
            raise ValueError(
                f"command template must contain {self.IN_TOKEN} and {self.OUT_TOKEN}"
            )

    def _argv(self, in_path, out_path):
        argv = []
        for tok in shlex.split(self.template):
            tok = tok.replace(self.IN_TOKEN, str(in_path))
            tok = tok.replace(self.OUT_TOKEN, str(out_path))
            for key, value in self.extra_substitutions.items():
                tok = tok.replace("{" + key + "}", str(value))
            argv.append(tok)
        return argv

    def evaluate(self, frame: Frame):
        with tempfile.TemporaryDirectory(prefix="nepcurate-label-") as tmp:
            in_path = Path(tmp) / "in.xyz"
            out_path = Path(tmp) / "out.xyz"
            in_path.write_text(frames_to_string([frame]))
            argv = self._argv(in_path, out_path)
            try:
                proc = subprocess.run(
                    argv, cwd=tmp, timeout=self.timeout,
                    capture_output=True, text=True,
                )
            except subprocess.TimeoutExpired:
                raise CalculatorError(f"labeling command timed out after {self.timeout}s")
            except OSError as exc:
                raise CalculatorError(f"cannot run labeling command: {exc}")
            if proc.returncode != 0:
                tail = proc.stderr.strip().splitlines()[-1:] or ["(no stderr)"]
                raise CalculatorError(
                    f"labeling command exited {proc.returncode}: {tail[0]}"
                )
            if not out_path.exists():
                raise CalculatorError("labeling command produced no output file")
            try:
                labeled = read_dataset(out_path)
            except ValueError as exc:
                raise CalculatorError(f"unparseable labeling output: {exc}")
            if len(labeled) == 0:
                raise CalculatorError("labeling output holds no frames")
            out = labeled[0]
            if out.ref_energy is None:
                raise CalculatorError("labeling output carries no energy")
            return (out.ref_energy,
                    out.ref_forces if out.ref_forces is not None else None,
                    out.ref_virial if out.ref_virial is not None else None)

    def probe(self) -> None:
        """Cheap health check: a two-atom box must label successfully."""
        probe_frame = Frame(
            species=["H", "H"],
            positions=[[0.0, 0.0, 0.0], [0.0, 0.0, 2.0]],
            cell=np.eye(3) * 20.0,
            periodic=[True, True, True],
        )
        try:
            self.evaluate(probe_frame)
        except CalculatorError as exc:
            raise CalculatorError(f"calculator failed its probe run: {exc}") from exc


@dataclass
class LabelReport:
    labeled: Dataset
    failed: list[tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed


def _label_one(frame: Frame, calc) -> Frame:
    energy, forces, virial = calc.evaluate(frame)
    out = frame.copy()
    out.ref_energy = float(energy)
    out.ref_forces = forces
    out.ref_virial = virial
    return out


def label(frames, calc, workers: int = 1) -> LabelReport:
    """Label every frame; failures are excluded and reported per frame."""
    frames = list(frames)
    results: list[Frame | None] = [None] * len(frames)
    failures: list[tuple[int, str]] = []

    if workers > 1 and len(frames) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {idx: pool.submit(_label_one, frames[idx], calc)
                       for idx in range(len(frames))}
        for idx, fut in futures.items():
            try:
                results[idx] = fut.result()
            except CalculatorError as exc:
                failures.append((idx, str(exc)))
    else:
        for idx, frame in enumerate(frames):
            try:
                results[idx] = _label_one(frame, calc)
            except CalculatorError as exc:
                failures.append((idx, str(exc)))

    labeled = Dataset([f for f in results if f is not None])
    failures.sort()
    return LabelReport(labeled=labeled, failed=failures)
