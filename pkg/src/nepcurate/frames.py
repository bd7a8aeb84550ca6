"""Extended-XYZ dataset I/O and parity (predicted vs. reference) files.

A dataset file is a concatenation of frames.  Each frame starts with an atom
count line, followed by a comment line of ``Key=Value`` tokens (values with
spaces are double-quoted) and one line per atom.  ``Lattice`` holds the nine
cell components (three row vectors), ``Properties`` declares the per-atom
columns as ``name:type:count`` triplets, and ``energy`` / ``virial`` /
``forces`` are recognized case-sensitively into typed fields.  Everything
else on the comment line is preserved verbatim, in order, in ``Frame.info``.

Parity files are whitespace-separated numeric tables holding the predicted
columns first and the reference columns second: 2 columns for energy, 6 for
forces, 12 for virial/stress.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Frame",
    "Dataset",
    "ParitySeries",
    "ExtendedXyzError",
    "ParityFileError",
    "PARITY_COMPONENTS",
    "read_dataset",
    "write_dataset",
    "frames_to_string",
    "read_parity",
    "write_parity",
]

# Voigt component order used for virials throughout: xx, yy, zz, yz, xz, xy.
VOIGT = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))

# Per-row component count k for each parity kind (file rows carry 2k values).
PARITY_COMPONENTS = {"energy": 1, "force": 3, "virial": 6, "stress": 6}


class ExtendedXyzError(ValueError):
    """Malformed extended-XYZ content; message names frame index and line."""

    def __init__(self, message, frame=None, line=None):
        where = []
        if frame is not None:
            where.append(f"frame {frame}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.frame = frame
        self.line = line


class ParityFileError(ValueError):
    pass


def _as_positions(value, n):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n, 3):
        raise ValueError(f"expected ({n}, 3) positions, got {arr.shape}")
    return arr


@dataclass
class Frame:
    """One atomic structure with optional reference labels.

    ``cell`` rows are the lattice vectors a0, b0, c0 in Angstrom; ``positions``
    are Cartesian.  ``ref_virial`` is stored in 6-component Voigt order
    (xx, yy, zz, yz, xz, xy).  ``info`` keeps comment-line keys in file order.
    """

    species: list[str]
    positions: np.ndarray
    cell: np.ndarray = None
    periodic: np.ndarray = None
    ref_energy: float | None = None
    ref_forces: np.ndarray | None = None
    ref_virial: np.ndarray | None = None
    info: dict = field(default_factory=dict)
    atom_arrays: dict = field(default_factory=dict)

    def __post_init__(self):
        self.species = [str(s) for s in self.species]
        n = len(self.species)
        self.positions = _as_positions(self.positions, n)
        if self.cell is None:
            self.cell = np.zeros((3, 3))
        self.cell = np.asarray(self.cell, dtype=float)
        if self.cell.shape != (3, 3):
            raise ValueError(f"cell must be 3x3, got {self.cell.shape}")
        if self.periodic is None:
            self.periodic = np.any(self.cell != 0.0)  # broadcast below
            self.periodic = np.full(3, bool(self.periodic))
        self.periodic = np.asarray(self.periodic, dtype=bool).reshape(3)
        if self.ref_energy is not None:
            self.ref_energy = float(self.ref_energy)
        if self.ref_forces is not None:
            self.ref_forces = _as_positions(self.ref_forces, n)
        if self.ref_virial is not None:
            self.ref_virial = np.asarray(self.ref_virial, dtype=float).reshape(6)
        for key, arr in list(self.atom_arrays.items()):
            arr = np.asarray(arr)
            if arr.shape[0] != n:
                raise ValueError(f"atom array {key!r} has {arr.shape[0]} rows, expected {n}")
            self.atom_arrays[key] = arr
        if self.periodic.any() and abs(np.linalg.det(self.cell)) < 1e-300:
            raise ValueError("cell is singular but a periodic flag is set")

    @property
    def n_atoms(self) -> int:
        return len(self.species)

    @property
    def config_type(self) -> str | None:
        value = self.info.get("config_type")
        return None if value is None else str(value)

    def copy(self) -> "Frame":
        return Frame(
            species=list(self.species),
            positions=self.positions.copy(),
            cell=self.cell.copy(),
            periodic=self.periodic.copy(),
            ref_energy=self.ref_energy,
            ref_forces=None if self.ref_forces is None else self.ref_forces.copy(),
            ref_virial=None if self.ref_virial is None else self.ref_virial.copy(),
            info=dict(self.info),
            atom_arrays={k: v.copy() for k, v in self.atom_arrays.items()},
        )


class Dataset:
    """An ordered collection of frames.

    Frame order is stable: nothing in this package reorders frames except
    explicit deletion.
    """

    def __init__(self, frames=None):
        self.frames: list[Frame] = list(frames) if frames is not None else []

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return Dataset(self.frames[index])
        return self.frames[index]

    def append(self, frame: Frame):
        self.frames.append(frame)

    def extend(self, frames):
        self.frames.extend(frames)

    def copy(self) -> "Dataset":
        return Dataset([f.copy() for f in self.frames])

    def elements(self) -> list[str]:
        """Sorted list of element symbols occurring anywhere in the dataset."""
        seen = set()
        for frame in self.frames:
            seen.update(frame.species)
        return sorted(seen)


@dataclass
class ParitySeries:
    """Paired (predicted, reference) values for one property kind.

    ``pred`` and ``ref`` are (M, k) arrays with k components per row;
    ``frame_index`` optionally maps rows back to dataset frames.
    """

    kind: str
    pred: np.ndarray
    ref: np.ndarray
    frame_index: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in PARITY_COMPONENTS:
            raise ValueError(f"unknown parity kind {self.kind!r}")
        self.pred = np.atleast_2d(np.asarray(self.pred, dtype=float))
        self.ref = np.atleast_2d(np.asarray(self.ref, dtype=float))
        if self.pred.shape != self.ref.shape:
            raise ValueError(
                f"pred shape {self.pred.shape} != ref shape {self.ref.shape}"
            )
        if not (np.isfinite(self.pred).all() and np.isfinite(self.ref).all()):
            raise ValueError("parity rows must be finite")
        if self.frame_index is not None:
            self.frame_index = np.asarray(self.frame_index, dtype=int).reshape(-1)
            if self.frame_index.shape[0] != self.pred.shape[0]:
                raise ValueError("frame_index length does not match row count")

    def __len__(self):
        return self.pred.shape[0]


# ---------------------------------------------------------------------------
# comment-line parsing

def _split_comment(line, frame_idx, line_no):
    """Split a comment line into ordered (key, raw_value, quoted) triples."""
    out = []
    i, n = 0, len(line)
    while i < n:
        while i < n and line[i].isspace():
            i += 1
        if i >= n:
            break
        start = i
        while i < n and line[i] != "=" and not line[i].isspace():
            i += 1
        key = line[start:i]
        if i < n and line[i] == "=":
            i += 1
            if i < n and line[i] == '"':
                i += 1
                vstart = i
                while i < n and line[i] != '"':
                    i += 1
                if i >= n:
                    raise ExtendedXyzError(
                        f"unterminated quote in key {key!r}", frame_idx, line_no
                    )
                out.append((key, line[vstart:i], True))
                i += 1
            else:
                vstart = i
                while i < n and not line[i].isspace():
                    i += 1
                out.append((key, line[vstart:i], False))
        else:
            out.append((key, None, False))
    return out


def _scalar_from_token(tok):
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        pass
    if tok == "T":
        return True
    if tok == "F":
        return False
    return tok


def _value_from_raw(raw, quoted):
    if raw is None:
        return True
    if quoted:
        toks = raw.split()
        if len(toks) > 1:
            converted = [_scalar_from_token(t) for t in toks]
            if all(isinstance(c, bool) for c in converted):
                return np.array(converted, dtype=bool)
            if all(isinstance(c, int) and not isinstance(c, bool) for c in converted):
                return np.array(converted, dtype=int)
            if all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in converted):
                return np.array(converted, dtype=float)
            return raw
        if len(toks) == 0:
            return ""
    return _scalar_from_token(raw)


_PROPERTY_TYPES = {"R": float, "I": int, "S": str, "L": None}  # L handled apart


def _parse_properties(spec, frame_idx, line_no):
    """Parse a Properties declaration into [(name, type_char, ncols), ...]."""
    fields = spec.split(":")
    if len(fields) % 3 != 0:
        raise ExtendedXyzError(
            f"Properties declaration {spec!r} is not name:type:count triplets",
            frame_idx,
            line_no,
        )
    columns = []
    for name, tchar, count in zip(fields[0::3], fields[1::3], fields[2::3]):
        if tchar not in _PROPERTY_TYPES:
            raise ExtendedXyzError(
                f"unknown Properties type {tchar!r} for column {name!r}",
                frame_idx,
                line_no,
            )
        try:
            ncols = int(count)
        except ValueError:
            raise ExtendedXyzError(
                f"non-integer column count {count!r} for column {name!r}",
                frame_idx,
                line_no,
            ) from None
        columns.append((name, tchar, ncols))
    return columns


def _symmetrize_virial(values, frame_idx, line_no):
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 6:
        return values
    if values.size == 9:
        w = values.reshape(3, 3)
        w = 0.5 * (w + w.T)
        return np.array([w[i, j] for i, j in VOIGT])
    raise ExtendedXyzError(
        f"virial must have 6 or 9 components, got {values.size}", frame_idx, line_no
    )


def _parse_frame(lines, pos, frame_idx):
    """Parse one frame starting at ``lines[pos]``; returns (Frame, next_pos)."""
    header_no = pos + 1
    try:
        n_atoms = int(lines[pos].strip())
    except ValueError:
        raise ExtendedXyzError(
            f"malformed atom count {lines[pos].strip()!r}", frame_idx, header_no
        ) from None
    if n_atoms < 0:
        raise ExtendedXyzError(f"negative atom count {n_atoms}", frame_idx, header_no)
    if pos + 1 >= len(lines):
        raise ExtendedXyzError("missing comment line", frame_idx, header_no)
    comment_no = pos + 2
    pairs = _split_comment(lines[pos + 1], frame_idx, comment_no)

    cell = None
    periodic = None
    ref_energy = None
    ref_virial = None
    columns = [("species", "S", 1), ("pos", "R", 3)]
    info = {}
    for key, raw, quoted in pairs:
        value = _value_from_raw(raw, quoted)
        if key == "Lattice":
            arr = np.asarray(value, dtype=float).reshape(-1) if not isinstance(value, str) else None
            if arr is None or arr.size != 9 or not np.isfinite(arr).all():
                raise ExtendedXyzError(
                    f"Lattice must be 9 numbers, got {raw!r}", frame_idx, comment_no
                )
            cell = arr.reshape(3, 3)
        elif key == "Properties":
            if not isinstance(value, str):
                raise ExtendedXyzError("Properties must be a string", frame_idx, comment_no)
            columns = _parse_properties(value, frame_idx, comment_no)
        elif key == "pbc":
            flags = np.asarray(value).reshape(-1)
            if flags.size != 3:
                raise ExtendedXyzError(f"pbc must be 3 flags, got {raw!r}", frame_idx, comment_no)
            periodic = np.array([bool(x) for x in flags])
        elif key == "energy":
            if isinstance(value, str) or isinstance(value, bool):
                raise ExtendedXyzError(f"non-numeric energy {raw!r}", frame_idx, comment_no)
            ref_energy = float(value)
        elif key == "virial":
            ref_virial = _symmetrize_virial(value, frame_idx, comment_no)
        else:
            info[key] = value

    if periodic is None:
        periodic = np.full(3, cell is not None)
    if cell is None:
        cell = np.zeros((3, 3))

    total_cols = sum(c for _, _, c in columns)
    species = []
    rows = []
    for k in range(n_atoms):
        line_index = pos + 2 + k
        if line_index >= len(lines):
            raise ExtendedXyzError(
                f"truncated frame: expected {n_atoms} atom lines, found {k}",
                frame_idx,
                len(lines),
            )
        toks = lines[line_index].split()
        if len(toks) != total_cols:
            raise ExtendedXyzError(
                f"expected {total_cols} columns per atom line, found {len(toks)}",
                frame_idx,
                line_index + 1,
            )
        rows.append(toks)

    # column-wise conversion
    arrays = {}
    offset = 0
    for name, tchar, ncols in columns:
        block = [row[offset : offset + ncols] for row in rows]
        offset += ncols
        if tchar == "S":
            data = np.array(block, dtype=object).reshape(n_atoms, ncols)
        elif tchar == "L":
            data = np.array([[t == "T" or t == "True" for t in row] for row in block], dtype=bool)
        else:
            try:
                data = np.array(block, dtype=_PROPERTY_TYPES[tchar]).reshape(n_atoms, ncols)
            except ValueError:
                raise ExtendedXyzError(
                    f"non-numeric data in column {name!r}", frame_idx, comment_no
                ) from None
        if ncols == 1:
            data = data.reshape(n_atoms)
        arrays[name] = data

    if "species" not in arrays or "pos" not in arrays:
        raise ExtendedXyzError(
            "Properties must declare species and pos columns", frame_idx, comment_no
        )
    species = [str(s) for s in np.atleast_1d(arrays.pop("species"))]
    positions = np.asarray(arrays.pop("pos"), dtype=float).reshape(n_atoms, 3)
    ref_forces = None
    if "forces" in arrays:
        ref_forces = np.asarray(arrays.pop("forces"), dtype=float).reshape(n_atoms, 3)

    frame = Frame(
        species=species,
        positions=positions,
        cell=cell,
        periodic=periodic,
        ref_energy=ref_energy,
        ref_forces=ref_forces,
        ref_virial=ref_virial,
        info=info,
        atom_arrays=arrays,
    )
    return frame, pos + 2 + n_atoms


def read_dataset(path) -> Dataset:
    """Read an extended-XYZ file into a Dataset (empty file -> empty Dataset)."""
    text = Path(path).read_text()
    lines = text.splitlines()
    frames = []
    pos = 0
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        frame, pos = _parse_frame(lines, pos, len(frames))
        frames.append(frame)
    return Dataset(frames)


# ---------------------------------------------------------------------------
# writing

def _fmt_float(x) -> str:
    # shortest representation that parses back to the identical double
    return repr(float(x))


def _fmt_typed_float(x) -> str:
    """Like _fmt_float but never prints an int-looking token, so the value
    reads back as a float."""
    text = _fmt_float(x)
    if text.lstrip("+-").isdigit():
        text += ".0"
    return text


def _fmt_info_value(value):
    if isinstance(value, (bool, np.bool_)):
        return "T" if value else "F", False
    if isinstance(value, (int, np.integer)):
        return str(int(value)), False
    if isinstance(value, (float, np.floating)):
        return _fmt_typed_float(value), False
    if isinstance(value, np.ndarray):
        if value.dtype == bool:
            toks = ["T" if x else "F" for x in value.reshape(-1)]
        elif np.issubdtype(value.dtype, np.integer):
            toks = [str(int(x)) for x in value.reshape(-1)]
        else:
            toks = [_fmt_typed_float(x) for x in value.reshape(-1)]
        return " ".join(toks), True
    text = str(value)
    return text, (" " in text or text == "")


def _comment_line(frame: Frame, columns) -> str:
    parts = []
    if frame.cell.any() or frame.periodic.any():
        cell_toks = " ".join(_fmt_float(x) for x in frame.cell.reshape(-1))
        parts.append(f'Lattice="{cell_toks}"')
    props = ":".join(f"{name}:{tchar}:{ncols}" for name, tchar, ncols in columns)
    parts.append(f"Properties={props}")
    if frame.ref_energy is not None:
        parts.append(f"energy={_fmt_float(frame.ref_energy)}")
    if frame.ref_virial is not None:
        toks = " ".join(_fmt_float(x) for x in frame.ref_virial)
        parts.append(f'virial="{toks}"')
    for key, value in frame.info.items():
        text, quote = _fmt_info_value(value)
        parts.append(f'{key}="{text}"' if quote else f"{key}={text}")
    if (frame.cell.any() or frame.periodic.any()) and not frame.periodic.all():
        flags = " ".join("T" if p else "F" for p in frame.periodic)
        parts.append(f'pbc="{flags}"')
    return " ".join(parts)


def _array_type_char(arr: np.ndarray) -> str:
    if arr.dtype == bool:
        return "L"
    if np.issubdtype(arr.dtype, np.integer):
        return "I"
    if np.issubdtype(arr.dtype, np.floating):
        return "R"
    return "S"


def _frame_lines(frame: Frame) -> list[str]:
    columns = [("species", "S", 1), ("pos", "R", 3)]
    blocks = [np.asarray(frame.species, dtype=object).reshape(-1, 1),
              frame.positions]
    if frame.ref_forces is not None:
        columns.append(("forces", "R", 3))
        blocks.append(frame.ref_forces)
    for name, arr in frame.atom_arrays.items():
        a2 = arr.reshape(frame.n_atoms, -1)
        columns.append((name, _array_type_char(a2), a2.shape[1]))
        blocks.append(a2)

    lines = [str(frame.n_atoms), _comment_line(frame, columns)]
    for k in range(frame.n_atoms):
        toks = []
        for (name, tchar, ncols), block in zip(columns, blocks):
            row = np.atleast_1d(block[k])
            for x in row:
                if tchar == "R":
                    toks.append(_fmt_float(x))
                elif tchar == "I":
                    toks.append(str(int(x)))
                elif tchar == "L":
                    toks.append("T" if x else "F")
                else:
                    toks.append(str(x))
        lines.append(" ".join(toks))
    return lines


def frames_to_string(frames) -> str:
    """Render frames (any iterable of Frame) as extended-XYZ text."""
    out = []
    for frame in frames:
        out.extend(_frame_lines(frame))
    return "\n".join(out) + ("\n" if out else "")


def write_dataset(dataset, path) -> None:
    """Write frames so that ``read_dataset`` reproduces them exactly.

    Floats are printed in their shortest exact decimal form (up to 17
    significant digits), so write-then-read is the identity.
    """
    Path(path).write_text(frames_to_string(dataset))


# ---------------------------------------------------------------------------
# parity files

def read_parity(path, kind, components=None) -> ParitySeries:
    """Read a parity file: predicted columns first, reference columns second.

    ``components`` overrides the per-kind column count k for foreign files.
    """
    k = components if components is not None else PARITY_COMPONENTS[kind]
    pred_rows, ref_rows = [], []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        toks = line.split()
        if len(toks) != 2 * k:
            raise ParityFileError(
                f"{path}, line {line_no}: expected {2 * k} columns, found {len(toks)}"
            )
        try:
            values = [float(t) for t in toks]
        except ValueError:
            raise ParityFileError(
                f"{path}, line {line_no}: non-numeric value"
            ) from None
        pred_rows.append(values[:k])
        ref_rows.append(values[k:])
    pred = np.array(pred_rows, dtype=float).reshape(-1, k)
    ref = np.array(ref_rows, dtype=float).reshape(-1, k)
    return ParitySeries(kind=kind, pred=pred, ref=ref)


def write_parity(series: ParitySeries, path) -> None:
    lines = []
    for p_row, r_row in zip(series.pred, series.ref):
        toks = [_fmt_float(x) for x in p_row] + [_fmt_float(x) for x in r_row]
        lines.append(" ".join(toks))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
