"""Curation sessions over a loaded dataset, plus a JSON-over-HTTP facade.

A session owns one dataset and the per-frame flag arrays shared by every
plot view: ``selected`` (red) and ``search_matched`` (green).  Reads are
concurrent; mutations (tools, delete, undo) serialize on a per-session lock.
Deletions push full snapshots onto an undo journal (depth 50).
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import surrogate
from .descriptor import DescriptorSpec, dataset_descriptors
from .frames import (
    Dataset,
    frames_to_string,
    read_dataset,
    read_parity,
    write_dataset,
    write_parity,
)
from .geometry import RadiiTable, bond_report, pair_table, _undirected_mask
from .sampling import farthest_point_sample, pca_project, rank_errors

__all__ = ["Session", "CurationService", "ServiceError", "serve"]

UNDO_DEPTH = 50
DISPLAY_BOND_FACTOR = 1.15  # display cutoff = factor * (R_i + R_j)
FALLBACK_RADIUS = 1.2
FALLBACK_COLOR = "#FF69B4"

PLOT_KINDS = ("descriptor", "energy", "force", "virial", "stress")
TOOLS = ("fps", "max_error", "nonphysical", "select_ids", "deselect_ids",
         "search_config_type", "invert")


class ServiceError(ValueError):
    pass


def _cpk_colors() -> dict:
    ref = resources.files("nepcurate.data").joinpath("cpk_colors.txt")
    colors = {}
    for line in ref.read_text().splitlines():
        body = line.split("#", 1)[0].strip() if line.lstrip().startswith("#") else line.strip()
        if not body:
            continue
        toks = body.split()
        if len(toks) == 2:
            colors[toks[0]] = toks[1]
    return colors


_CPK = _cpk_colors()


@dataclass
class _Snapshot:
    frames: list
    selected: np.ndarray
    matched: np.ndarray
    parity: dict
    descriptors: np.ndarray | None


class Session:
    def __init__(self, directory, dataset: Dataset, parity: dict,
                 model=None, radii: RadiiTable | None = None,
                 parity_computed: bool = False):
        self.directory = Path(directory)
        self.dataset = dataset
        self.parity = parity
        self.model = model
        self.radii = radii if radii is not None else RadiiTable.builtin()
        self.parity_computed = parity_computed
        self.selected = np.zeros(len(dataset), dtype=bool)
        self.search_matched = np.zeros(len(dataset), dtype=bool)
        self.lock = threading.Lock()
        self.coverage_errors: list = []
        self._journal: list[_Snapshot] = []
        self._descriptors: np.ndarray | None = None
        self._projection = None

    # -- caches ------------------------------------------------------------

    def _descriptor_spec(self) -> DescriptorSpec:
        if self.model is not None:
            return self.model.spec
        elements = self.dataset.elements()
        if not elements:
            raise ServiceError("dataset holds no atoms to describe")
        return DescriptorSpec(r_cut=5.0, n_rad=4, elements=tuple(elements))

    def descriptors(self) -> np.ndarray:
        if self._descriptors is None:
            self._descriptors = dataset_descriptors(self.dataset, self._descriptor_spec())
        return self._descriptors

    def projection(self):
        if self._projection is None:
            self._projection = pca_project(self.descriptors())
        return self._projection

    def _invalidate(self):
        self._descriptors = None
        self._projection = None

    def _series_for(self, kind):
        """Parity series for a plot kind; stress falls back to virial."""
        series = self.parity.get(kind)
        if series is None and kind == "stress":
            series = self.parity.get("virial")
        return series

    # -- plots ---------------------------------------------------------------

    def plot(self, kind: str) -> dict:
        if kind not in PLOT_KINDS:
            raise ServiceError(f"unknown plot kind {kind!r}")
        points = []
        if kind == "descriptor":
            if len(self.dataset) >= 2:
                coords = self.projection().coords
            elif len(self.dataset) == 1:
                coords = np.zeros((1, 2))
            else:
                coords = np.zeros((0, 2))
            for idx in range(len(self.dataset)):
                points.append({
                    "frame": idx,
                    "x": float(coords[idx, 0]),
                    "y": float(coords[idx, 1]),
                    "selected": bool(self.selected[idx]),
                    "matched": bool(self.search_matched[idx]),
                })
        else:
            series = self._series_for(kind)
            if series is None:
                raise ServiceError(f"no {kind} data available in this session")
            for row in range(len(series)):
                idx = int(series.frame_index[row]) if series.frame_index is not None else row
                for comp in range(series.pred.shape[1]):
                    points.append({
                        "frame": idx,
                        "ref": float(series.ref[row, comp]),
                        "pred": float(series.pred[row, comp]),
                        "selected": bool(self.selected[idx]),
                        "matched": bool(self.search_matched[idx]),
                    })
        return {"kind": kind, "points": points}

    # -- tools ---------------------------------------------------------------

    def apply_tool(self, tool: str, params: dict | None = None) -> dict:
        params = dict(params or {})
        if tool not in TOOLS:
            raise ServiceError(f"unknown tool {tool!r}")
        with self.lock:
            handler = getattr(self, f"_tool_{tool}")
            handler(params)
            return self.flag_summary()

    def flag_summary(self) -> dict:
        return {
            "frames": len(self.dataset),
            "selected": [int(i) for i in np.nonzero(self.selected)[0]],
            "matched": [int(i) for i in np.nonzero(self.search_matched)[0]],
        }

    def _tool_fps(self, params):
        if len(self.dataset) == 0:
            return
        max_count = params.get("max_count")
        if max_count is None:
            raise ServiceError("fps needs a max_count parameter")
        max_count = int(max_count)
        if max_count < 0:
            raise ServiceError("max_count must be >= 0")
        min_distance = float(params.get("min_distance", 0.0))
        result = farthest_point_sample(self.descriptors(), max_count, min_distance)
        # inverse selection: mark what FPS did NOT retain, so one delete
        # sparsifies the dataset
        self.selected[result.rejected] = True

    def _tool_max_error(self, params):
        kind = params.get("kind", "energy")
        if kind == "descriptor":
            raise ServiceError("max_error runs on a parity view, not descriptors")
        series = self._series_for(kind)
        if series is None:
            raise ServiceError(f"no {kind} data available in this session")
        n = params.get("n")
        if n is None:
            raise ServiceError("max_error needs an n parameter")
        n = int(n)
        if n < 0:
            raise ServiceError("n must be >= 0")
        errors = np.zeros(len(self.dataset))
        rows = np.abs(series.pred - series.ref).sum(axis=1)
        if series.frame_index is not None:
            np.add.at(errors, series.frame_index, rows)
        else:
            errors[: rows.size] = rows
        self.selected[rank_errors(errors, n)] = True

    def _tool_nonphysical(self, params):
        coeff = params.get("coeff")
        radii = self.radii if coeff is None else RadiiTable(
            self.radii.radius_by_element, coeff=float(coeff))
        for idx, frame in enumerate(self.dataset):
            if bond_report(frame, radii).flagged_pairs:
                self.selected[idx] = True

    def _ids(self, params):
        ids = params.get("ids")
        if ids is None:
            raise ServiceError("missing ids parameter")
        ids = [int(i) for i in ids]
        for i in ids:
            if not 0 <= i < len(self.dataset):
                raise ServiceError(f"frame id {i} out of range")
        return ids

    def _tool_select_ids(self, params):
        self.selected[self._ids(params)] = True

    def _tool_deselect_ids(self, params):
        self.selected[self._ids(params)] = False

    def _tool_search_config_type(self, params):
        pattern = params.get("pattern")
        if not pattern:
            raise ServiceError("search needs a non-empty pattern")
        mode = params.get("mode", "contains")
        if mode not in ("prefix", "suffix", "contains"):
            raise ServiceError(f"unknown search mode {mode!r}")
        matched = np.zeros(len(self.dataset), dtype=bool)
        for idx, frame in enumerate(self.dataset):
            value = frame.config_type or ""
            if mode == "prefix":
                hit = value.startswith(pattern)
            elif mode == "suffix":
                hit = value.endswith(pattern)
            else:
                hit = pattern in value
            matched[idx] = hit
        # a search highlights; it never selects
        self.search_matched = matched

    def _tool_invert(self, params):
        self.selected = ~self.selected

    # -- destructive ops -------------------------------------------------------

    def _snapshot(self) -> _Snapshot:
        return _Snapshot(
            frames=list(self.dataset.frames),
            selected=self.selected.copy(),
            matched=self.search_matched.copy(),
            parity=dict(self.parity),
            descriptors=self._descriptors,
        )

    def delete_selected(self) -> dict:
        with self.lock:
            removed = [int(i) for i in np.nonzero(self.selected)[0]]
            if not removed:
                return {"removed": [], "remaining": len(self.dataset)}
            self._journal.append(self._snapshot())
            if len(self._journal) > UNDO_DEPTH:
                self._journal.pop(0)

            keep = ~self.selected
            keep_idx = np.nonzero(keep)[0]
            remap = {int(old): new for new, old in enumerate(keep_idx)}
            self.dataset = Dataset([self.dataset.frames[i] for i in keep_idx])
            self.selected = np.zeros(len(self.dataset), dtype=bool)
            self.search_matched = self.search_matched[keep_idx]
            new_parity = {}
            for kind, series in self.parity.items():
                if series.frame_index is None:
                    continue
                rows = np.array([i in remap for i in series.frame_index])
                if rows.any():
                    new_index = np.array([remap[int(i)] for i in series.frame_index[rows]])
                    new_parity[kind] = type(series)(
                        kind=series.kind,
                        pred=series.pred[rows],
                        ref=series.ref[rows],
                        frame_index=new_index,
                    )
            self.parity = new_parity
            if self._descriptors is not None:
                self._descriptors = self._descriptors[keep_idx]
            self._projection = None
            return {"removed": removed, "remaining": len(self.dataset)}

    def undo(self) -> dict:
        with self.lock:
            if not self._journal:
                return {"restored": False, "remaining": len(self.dataset)}
            snap = self._journal.pop()
            self.dataset = Dataset(snap.frames)
            self.selected = snap.selected
            self.search_matched = snap.matched
            self.parity = snap.parity
            self._descriptors = snap.descriptors
            self._projection = None
            return {"restored": True, "remaining": len(self.dataset)}

    # -- export -----------------------------------------------------------------

    def export(self, what: str, target, frame: int | None = None) -> Path:
        target = Path(target)
        if what == "dataset":
            write_dataset(self.dataset, target)
        elif what == "descriptors":
            chosen = np.nonzero(self.selected)[0]
            if chosen.size == 0:
                chosen = np.arange(len(self.dataset))
            desc = self.descriptors()
            lines = ["frame," + ",".join(f"d{k}" for k in range(desc.shape[1]))]
            for i in chosen:
                lines.append(f"{int(i)}," + ",".join(f"{x:.10g}" for x in desc[i]))
            target.write_text("\n".join(lines) + "\n")
        elif what == "frame_xyz":
            if frame is None or not 0 <= frame < len(self.dataset):
                raise ServiceError(f"frame index {frame} out of range")
            target.write_text(frames_to_string([self.dataset[frame]]))
        elif what == "projection":
            coords = self.projection().coords
            lines = ["frame,pc1,pc2"]
            for i in range(coords.shape[0]):
                lines.append(f"{i},{coords[i, 0]:.10g},{coords[i, 1]:.10g}")
            target.write_text("\n".join(lines) + "\n")
        else:
            raise ServiceError(f"unknown export target {what!r}")
        return target

    # -- structure view ------------------------------------------------------------

    def structure_view(self, index: int) -> dict:
        if not 0 <= index < len(self.dataset):
            raise ServiceError(f"frame index {index} out of range")
        frame = self.dataset[index]
        # unknown elements map to fallback radius/color instead of erroring
        table = dict(self.radii.radius_by_element)
        for symbol in set(frame.species):
            table.setdefault(symbol, FALLBACK_RADIUS)
        radii = RadiiTable(table, coeff=self.radii.coeff)
        atoms = []
        for symbol, pos in zip(frame.species, frame.positions):
            atoms.append({
                "element": symbol,
                "position": [float(x) for x in pos],
                "radius": radii.radius_by_element[symbol],
                "color": _CPK.get(symbol, FALLBACK_COLOR),
            })
        r_atom = np.array([radii.radius_by_element[s] for s in frame.species])
        bonds = []
        min_distance = None
        if frame.n_atoms > 0:
            report = bond_report(frame, radii)
            min_distance = None if report.min_pair is None else float(report.min_distance)
            display_cut = float(DISPLAY_BOND_FACTOR * 2.0 * r_atom.max())
            i_idx, j_idx, shifts, _, dists = pair_table(frame, display_cut)
            if i_idx.size:
                keep = _undirected_mask(i_idx, j_idx, shifts)
                for p in np.nonzero(keep)[0]:
                    i, j = int(i_idx[p]), int(j_idx[p])
                    pair_cut = DISPLAY_BOND_FACTOR * (r_atom[i] + r_atom[j])
                    if dists[p] > pair_cut:
                        continue
                    threshold = radii.threshold(frame.species[i], frame.species[j])
                    bonds.append({
                        "i": i,
                        "j": j,
                        "shift": [int(x) for x in shifts[p]],
                        "distance": float(dists[p]),
                        "flagged": bool(threshold > dists[p]),
                    })
        return {
            "frame": index,
            "atoms": atoms,
            "bonds": bonds,
            "min_distance": min_distance,
            "cell": frame.cell.tolist(),
            "periodic": [bool(p) for p in frame.periodic],
        }


class CurationService:
    """Registry of sessions keyed by id; the HTTP handler delegates here.

    ``parity_components`` overrides the per-row column count k when loading
    foreign parity files (mapping kind -> k).
    """

    def __init__(self, model_path=None, radii: RadiiTable | None = None,
                 parity_components: dict | None = None):
        self.sessions: dict[str, Session] = {}
        self.default_model = None
        if model_path is not None:
            self.default_model = surrogate.SurrogateModel.load(model_path)
        self.radii = radii
        self.parity_components = dict(parity_components or {})

    def open_session(self, path, model_path=None) -> str:
        directory = Path(path)
        if not directory.is_dir():
            raise ServiceError(f"{directory} is not a directory")
        candidates = sorted(directory.glob("*.xyz"))
        if not candidates:
            raise ServiceError(f"no .xyz file found in {directory}")
        preferred = directory / "train.xyz"
        data_file = preferred if preferred in candidates else candidates[0]
        dataset = read_dataset(data_file)

        model = self.default_model
        if model_path is not None:
            model = surrogate.SurrogateModel.load(model_path)

        stem = data_file.stem
        parity = {}
        computed = False
        for kind in ("energy", "force", "virial", "stress"):
            existing = sorted(directory.glob(f"{kind}_*.out"))
            if existing:
                series = read_parity(existing[0], kind,
                                     components=self.parity_components.get(kind))
                series.frame_index = _default_frame_index(series, kind, dataset)
                parity[kind] = series
        coverage_errors: list = []
        if not parity and model is not None and len(dataset) > 0:
            parity = surrogate.dataset_parity(dataset, model,
                                              coverage_errors=coverage_errors)
            computed = True
            for kind, series in parity.items():
                write_parity(series, directory / f"{kind}_{stem}.out")

        session = Session(directory, dataset, parity, model=model,
                          radii=self.radii, parity_computed=computed)
        session.coverage_errors = coverage_errors
        sid = uuid.uuid4().hex[:12]
        self.sessions[sid] = session
        return sid

    def get(self, sid: str) -> Session:
        try:
            return self.sessions[sid]
        except KeyError:
            raise ServiceError(f"unknown session {sid!r}") from None


def _default_frame_index(series, kind, dataset):
    """Map parity rows of an on-disk file to frames: energy/virial/stress
    rows are per frame, force rows follow the per-atom layout."""
    if kind in ("energy", "virial", "stress"):
        return np.arange(len(series))
    index = []
    for idx, frame in enumerate(dataset):
        index.extend([idx] * frame.n_atoms)
    index = np.array(index[: len(series)], dtype=int)
    if index.size != len(series):
        index = np.concatenate([index, np.full(len(series) - index.size, max(len(dataset) - 1, 0))])
    return index


# ---------------------------------------------------------------------------
# HTTP facade

def _json_bytes(payload) -> bytes:
    return json.dumps(payload).encode()


class _Handler(BaseHTTPRequestHandler):
    service: CurationService = None
    root: Path = None

    def log_message(self, *args):  # quiet test runs
        pass

    def _send(self, status: int, payload) -> None:
        body = _json_bytes(payload)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length))
        except json.JSONDecodeError:
            raise ServiceError("request body is not valid JSON")

    def do_GET(self):
        try:
            url = urlparse(self.path)
            query = {k: v[0] for k, v in parse_qs(url.query).items()}
            parts = [p for p in url.path.split("/") if p]
            if parts[:2] == ["api", "session"] and len(parts) == 2:
                path = query.get("path", str(self.root))
                sid = self.service.open_session(path, query.get("model"))
                session = self.service.get(sid)
                payload = {"session": sid, "frames": len(session.dataset),
                           "kinds": ["descriptor"] + sorted(session.parity)}
                if session.coverage_errors:
                    payload["coverage_errors"] = [
                        {"frame": idx, "error": msg}
                        for idx, msg in session.coverage_errors
                    ]
                self._send(200, payload)
            elif parts[:2] == ["api", "plot"] and len(parts) == 3:
                session = self.service.get(query.get("session", ""))
                self._send(200, session.plot(parts[2]))
            elif parts[:2] == ["api", "structure"] and len(parts) == 3:
                session = self.service.get(query.get("session", ""))
                self._send(200, session.structure_view(int(parts[2])))
            else:
                self._send(404, {"error": f"no such endpoint {url.path}"})
        except ServiceError as exc:
            self._send(400, {"error": str(exc)})
        except Exception as exc:  # pragma: no cover - defensive
            self._send(500, {"error": f"{type(exc).__name__}: {exc}"})

    def do_POST(self):
        try:
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            body = self._body()
            if len(parts) == 2 and parts[0] == "api":
                session = self.service.get(body.get("session", ""))
                verb = parts[1]
                if verb == "tool":
                    result = session.apply_tool(body.get("tool", ""), body.get("params"))
                elif verb == "delete":
                    result = session.delete_selected()
                elif verb == "undo":
                    result = session.undo()
                elif verb == "export":
                    target = session.export(
                        body.get("what", "dataset"),
                        body.get("target", session.directory / "export.out"),
                        frame=body.get("frame"),
                    )
                    result = {"written": str(target)}
                else:
                    self._send(404, {"error": f"no such endpoint {url.path}"})
                    return
                self._send(200, result)
            else:
                self._send(404, {"error": f"no such endpoint {url.path}"})
        except ServiceError as exc:
            self._send(400, {"error": str(exc)})
        except Exception as exc:  # pragma: no cover - defensive
            self._send(500, {"error": f"{type(exc).__name__}: {exc}"})


def serve(directory, port: int = 8080, model_path=None,
          parity_components: dict | None = None):
    """Build a ready-to-run ThreadingHTTPServer bound to localhost."""
    service = CurationService(model_path=model_path,
                              parity_components=parity_components)
    handler = type("BoundHandler", (_Handler,), {
        "service": service,
        "root": Path(directory),
    })
    server = ThreadingHTTPServer(("127.0.0.1", port), handler)
    return server, service
