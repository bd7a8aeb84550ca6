"""Generation-based active-learning loop with resumable on-disk state.

Every stage trains a surrogate on the current training set, samples
trajectories with MD at the configured temperatures, selects new structures
by farthest-point sampling anchored on the training set, labels them with
the reference calculator, and grows the training set.  All stage artifacts
live in ``<work_path>/Generation-<k>/``; a stage is complete once its
``metrics.csv`` exists, which makes a killed run resume at the exact phase
that was interrupted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import surrogate
from .calculators import ExternalCommand, LennardJones, label
from .descriptor import DescriptorSpec, dataset_descriptors
from .frames import Dataset, read_dataset, write_dataset
from .geometry import RadiiTable, is_physical
from .mdrun import MdParams, run_md
from .sampling import farthest_point_sample
from .training import LossWeights, train

__all__ = [
    "JobConfig",
    "GenerationState",
    "WorkflowError",
    "init_workspace",
    "run_loop",
]


class WorkflowError(RuntimeError):
    pass


_JOB_TEMPLATE = """\
# Active-learning job configuration.
# Stage count equals the length of step_times; each stage runs MD for the
# given duration (ps) at every temperature listed for that stage.

work_path: ./cache
current_job: nep          # nep | gpumd | vasp (phase to start from)
seed: 42

train_file: train.xyz     # initial labeled training set
# holdout_file: holdout.xyz   # optional labeled set for per-stage metrics

structures:               # MD starting structures (extended XYZ)
  - structures/base.xyz

step_times: [10, 10]      # ps per stage ("maximum number of iterations")
temperature_every_step:   # K; one list per stage
  - [300]
  - [300, 600]

md:
  timestep: 1.0           # fs
  friction: 0.01          # 1/fs Langevin friction; 0 = NVE
  dump_interval: 100      # steps between snapshots
  max_force: 50.0         # eV/A divergence bound

descriptor:
  r_cut: 5.0
  n_rad: 4

training:
  neurons: 10
  generations: 500
  lambda_e: 1.0
  lambda_f: 1.0
  lambda_v: 0.1
  lambda_reg: 0.0

select:
  max_count: 20
  min_distance: 0.0
  filter: true            # drop non-physical MD frames before selection
  coeff: 0.65             # covalent-radius screening factor

calculator:
  kind: lj                # lj | external
  epsilon: 0.01           # eV
  sigma: 3.4              # A
  cutoff: 9.0             # A
  # kind: external
  # command: "mycalc {in.xyz} {out.xyz}"
  # timeout: 600
"""

_MD_TEMPLATE = """\
# Default MD parameters (NVT, Langevin thermostat), one "key value" per line.
timestep 1.0
friction 0.01
dump_interval 100
max_force 50.0
"""

_ALLOWED_TOP = {
    "work_path", "current_job", "seed", "train_file", "holdout_file",
    "structures", "step_times", "temperature_every_step", "md",
    "descriptor", "training", "select", "calculator",
}
_ALLOWED_NESTED = {
    "md": {"timestep", "friction", "dump_interval", "max_force"},
    "descriptor": {"r_cut", "n_rad"},
    "training": {"neurons", "generations", "lambda_e", "lambda_f",
                 "lambda_v", "lambda_reg"},
    "select": {"max_count", "min_distance", "filter", "coeff"},
    "calculator": {"kind", "epsilon", "sigma", "cutoff", "command", "timeout",
                   "workers"},
}


def _check_keys(mapping, allowed, context):
    unknown = set(mapping) - allowed
    if unknown:
        raise WorkflowError(
            f"unknown {context} key(s): {', '.join(sorted(unknown))}"
        )


@dataclass
class JobConfig:
    """Validated run parameters; see the commented template from init."""

    work_path: Path = Path("./cache")
    current_job: str = "nep"
    seed: int = 42
    train_file: Path = Path("train.xyz")
    holdout_file: Path | None = None
    structures: list[Path] = field(default_factory=list)
    step_times: list[float] = field(default_factory=lambda: [10.0])
    temperature_every_step: list[list[float]] = field(default_factory=lambda: [[300.0]])
    md: MdParams = field(default_factory=MdParams)
    descriptor: dict = field(default_factory=lambda: {"r_cut": 5.0, "n_rad": 4})
    training: dict = field(default_factory=lambda: {
        "neurons": 10, "generations": 500, "lambda_e": 1.0,
        "lambda_f": 1.0, "lambda_v": 0.1, "lambda_reg": 0.0,
    })
    select: dict = field(default_factory=lambda: {
        "max_count": 20, "min_distance": 0.0, "filter": True, "coeff": 0.65,
    })
    calculator: dict = field(default_factory=lambda: {
        "kind": "lj", "epsilon": 0.01, "sigma": 3.4, "cutoff": 9.0,
    })

    def __post_init__(self):
        if isinstance(self.md, dict):
            self.md = MdParams(**self.md)
        if self.current_job not in ("nep", "gpumd", "vasp"):
            raise WorkflowError(
                f"current_job must be nep, gpumd, or vasp, got {self.current_job!r}"
            )
        if len(self.step_times) < 1:
            raise WorkflowError("step_times must list at least one stage")
        if len(self.temperature_every_step) != len(self.step_times):
            raise WorkflowError(
                "temperature_every_step must have one temperature list per stage"
            )
        for temps in self.temperature_every_step:
            if not temps or any(t <= 0 for t in temps):
                raise WorkflowError("stage temperatures must be positive")
        if not self.structures:
            raise WorkflowError("at least one MD starting structure is required")

    @property
    def n_stages(self) -> int:
        return len(self.step_times)

    @classmethod
    def load(cls, path) -> "JobConfig":
        path = Path(path)
        raw = yaml.safe_load(path.read_text())
        if not isinstance(raw, dict):
            raise WorkflowError(f"{path}: config must be a mapping")
        _check_keys(raw, _ALLOWED_TOP, "config")
        for section, allowed in _ALLOWED_NESTED.items():
            if section in raw:
                if not isinstance(raw[section], dict):
                    raise WorkflowError(f"{path}: {section} must be a mapping")
                _check_keys(raw[section], allowed, section)

        base = path.parent
        kwargs = {}
        if "work_path" in raw:
            kwargs["work_path"] = base / raw["work_path"]
        if "current_job" in raw:
            kwargs["current_job"] = str(raw["current_job"])
        if "seed" in raw:
            kwargs["seed"] = int(raw["seed"])
        if "train_file" in raw:
            kwargs["train_file"] = base / raw["train_file"]
        if raw.get("holdout_file"):
            kwargs["holdout_file"] = base / raw["holdout_file"]
        if "structures" in raw:
            kwargs["structures"] = [base / s for s in raw["structures"]]
        if "step_times" in raw:
            kwargs["step_times"] = [float(t) for t in raw["step_times"]]
        if "temperature_every_step" in raw:
            kwargs["temperature_every_step"] = [
                [float(t) for t in stage] for stage in raw["temperature_every_step"]
            ]
        if "md" in raw:
            kwargs["md"] = MdParams(**{k: v for k, v in raw["md"].items()})
        for section in ("descriptor", "training", "select", "calculator"):
            if section in raw:
                merged = dict(getattr(cls, "__dataclass_fields__")[section].default_factory())
                merged.update(raw[section])
                kwargs[section] = merged
        return cls(**kwargs)

    def build_calculator(self):
        cfg = self.calculator
        kind = cfg.get("kind", "lj")
        if kind == "lj":
            return LennardJones(
                epsilon=cfg.get("epsilon", 0.01),
                sigma=cfg.get("sigma", 3.4),
                cutoff=cfg.get("cutoff", 10.0),
            )
        if kind == "external":
            if "command" not in cfg:
                raise WorkflowError("external calculator needs a command template")
            return ExternalCommand(template=cfg["command"],
                                   timeout=float(cfg.get("timeout", 300.0)))
        raise WorkflowError(f"unknown calculator kind {kind!r}")


@dataclass
class GenerationState:
    """Paths of one generation's artifacts plus its recorded metrics."""

    index: int
    directory: Path
    metrics: dict = field(default_factory=dict)

    @property
    def model_file(self) -> Path:
        return self.directory / "model.txt"

    @property
    def trajectory_file(self) -> Path:
        return self.directory / "trajectory.xyz"

    @property
    def selected_file(self) -> Path:
        return self.directory / "selected.xyz"

    @property
    def labeled_file(self) -> Path:
        return self.directory / "labeled.xyz"

    @property
    def train_after_file(self) -> Path:
        return self.directory / "train_after.xyz"

    @property
    def metrics_file(self) -> Path:
        return self.directory / "metrics.csv"

    @property
    def complete(self) -> bool:
        return self.metrics_file.exists()


def init_workspace(target) -> None:
    """Write job.yaml, md.in, and a structures/ placeholder into target.

    Existing files are never overwritten; hitting one aborts before any
    mutation.
    """
    target = Path(target)
    planned = [target / "job.yaml", target / "md.in",
               target / "structures" / "README.txt"]
    for path in planned:
        if path.exists():
            raise WorkflowError(f"refusing to overwrite existing {path}")
    target.mkdir(parents=True, exist_ok=True)
    (target / "structures").mkdir(exist_ok=True)
    (target / "job.yaml").write_text(_JOB_TEMPLATE)
    (target / "md.in").write_text(_MD_TEMPLATE)
    (target / "structures" / "README.txt").write_text(
        "Place MD starting structures here as extended-XYZ files and list\n"
        "them under 'structures:' in job.yaml.\n"
    )


def _stage_seed(config: JobConfig, stage: int, phase: int, extra: int = 0) -> list[int]:
    return [config.seed, stage, phase, extra]


def _write_metrics(path, metrics: dict) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["property", "value"])
        for key, value in metrics.items():
            writer.writerow([key, value])


def _read_metrics(path) -> dict:
    metrics = {}
    with open(path, newline="") as handle:
        for row in csv.reader(handle):
            if len(row) == 2 and row[0] != "property":
                try:
                    metrics[row[0]] = float(row[1])
                except ValueError:
                    metrics[row[0]] = row[1]
    return metrics


def _holdout_metrics(model, holdout: Dataset | None, train_size: int) -> dict:
    metrics = {"train_size": float(train_size)}
    if holdout is not None and len(holdout) > 0:
        parity = surrogate.dataset_parity(holdout, model)
        for kind, series in parity.items():
            metrics[f"rmse_{kind}"] = surrogate.rmse(series)
    return metrics


def run_loop(config: JobConfig) -> list[GenerationState]:
    """Run (or resume) every stage; returns the per-generation states."""
    work = Path(config.work_path)
    work.mkdir(parents=True, exist_ok=True)

    if not Path(config.train_file).exists():
        raise WorkflowError(f"initial training set {config.train_file} not found")
    calculator = config.build_calculator()
    if config.current_job == "vasp":
        # start at the labeling phase: the initial train set lacks labels
        initial = read_dataset(config.train_file)
        unlabeled = [f for f in initial if f.ref_energy is None]
        if unlabeled:
            labeled_initial = work / "train_initial_labeled.xyz"
            if not labeled_initial.exists():
                if hasattr(calculator, "probe"):
                    calculator.probe()
                report = label(initial, calculator)
                if len(report.labeled) == 0:
                    raise WorkflowError(
                        f"initial labeling failed for every frame: {report.failed[:3]}"
                    )
                write_dataset(report.labeled, labeled_initial)
            config.train_file = labeled_initial

    spec_cfg = config.descriptor
    train_cfg = config.training
    select_cfg = config.select
    weights = LossWeights(
        lambda_e=float(train_cfg.get("lambda_e", 1.0)),
        lambda_f=float(train_cfg.get("lambda_f", 1.0)),
        lambda_v=float(train_cfg.get("lambda_v", 0.1)),
        lambda_reg=float(train_cfg.get("lambda_reg", 0.0)),
    )
    holdout = None
    if config.holdout_file is not None:
        holdout = read_dataset(config.holdout_file)
    radii = RadiiTable.builtin(coeff=float(select_cfg.get("coeff", 0.65)))

    structures = []
    for path in config.structures:
        ds = read_dataset(path)
        if len(ds) == 0:
            raise WorkflowError(f"structure file {path} holds no frames")
        structures.append(ds[0])

    states = []
    train_path = Path(config.train_file)
    previous_model = None
    for stage in range(config.n_stages):
        state = GenerationState(stage, work / f"Generation-{stage}")
        state.directory.mkdir(exist_ok=True)
        states.append(state)
        if state.complete:
            train_path = state.train_after_file
            if state.model_file.exists():
                previous_model = surrogate.SurrogateModel.load(state.model_file)
            state.metrics = _read_metrics(state.metrics_file)
            continue

        train_data = read_dataset(train_path)
        spec = DescriptorSpec(
            r_cut=float(spec_cfg.get("r_cut", 5.0)),
            n_rad=int(spec_cfg.get("n_rad", 4)),
            elements=tuple(sorted(set(train_data.elements())
                                  | {s for f in structures for s in f.species})),
        )

        # phase 1: train (skipped for stage 0 when starting at the MD phase)
        if state.model_file.exists():
            model = surrogate.SurrogateModel.load(state.model_file)
        elif stage == 0 and config.current_job == "gpumd":
            pretrained = work / "model.txt"
            if not pretrained.exists():
                raise WorkflowError(
                    "current_job gpumd needs an existing model at "
                    f"{pretrained} to skip the first training phase"
                )
            model = surrogate.SurrogateModel.load(pretrained)
            model.save(state.model_file)
        else:
            init = None
            if (previous_model is not None and previous_model.spec == spec
                    and previous_model.n_neu == int(train_cfg.get("neurons", 10))):
                init = previous_model
            model = train(
                train_data, spec, int(train_cfg.get("neurons", 10)), weights,
                generations=int(train_cfg.get("generations", 500)),
                seed=_stage_seed(config, stage, 0), init=init,
            )
            model.save(state.model_file)
        previous_model = model

        # phase 2: MD sampling at every stage temperature
        if state.trajectory_file.exists():
            trajectory = read_dataset(state.trajectory_file)
        else:
            pool = []
            for s_idx, start in enumerate(structures):
                for t_idx, temperature in enumerate(config.temperature_every_step[stage]):
                    part = run_md(
                        start, model, config.step_times[stage], temperature,
                        params=config.md,
                        seed=_stage_seed(config, stage, 1, s_idx * 1000 + t_idx),
                    )
                    pool.extend(part)
            trajectory = Dataset(pool)
            write_dataset(trajectory, state.trajectory_file)

        # phase 3: select (optional physicality filter, FPS anchored on train)
        if state.selected_file.exists():
            selected = read_dataset(state.selected_file)
        else:
            candidates = list(trajectory)
            if select_cfg.get("filter", True):
                candidates = [f for f in candidates if is_physical(f, radii)]
            selected_frames = []
            if candidates and int(select_cfg.get("max_count", 0)) > 0:
                cand_desc = dataset_descriptors(candidates, spec)
                base_desc = dataset_descriptors(train_data, spec)
                result = farthest_point_sample(
                    cand_desc,
                    max_count=int(select_cfg.get("max_count", 0)),
                    min_distance=float(select_cfg.get("min_distance", 0.0)),
                    base=base_desc,
                )
                selected_frames = [candidates[i] for i in result.selected]
            selected = Dataset(selected_frames)
            write_dataset(selected, state.selected_file)

        # phase 4: label
        if state.labeled_file.exists():
            labeled = read_dataset(state.labeled_file)
        else:
            report = label(selected, calculator,
                           workers=int(config.calculator.get("workers", 1)))
            if len(selected) > 0 and len(report.labeled) == 0:
                raise WorkflowError(
                    f"stage {stage}: labeling failed for all {len(selected)} "
                    f"selected frames; first failures: {report.failed[:3]}"
                )
            labeled = report.labeled
            write_dataset(labeled, state.labeled_file)

        # phase 5: grow the train set, then metrics.csv marks completion
        grown = Dataset(list(train_data) + list(labeled))
        write_dataset(grown, state.train_after_file)
        state.metrics = _holdout_metrics(model, holdout, len(grown))
        _write_metrics(state.metrics_file, state.metrics)
        train_path = state.train_after_file

    return states
