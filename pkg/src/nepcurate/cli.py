"""Command-line entry points.

Verbs: perturb, select, nep, md, label, init, train, serve (with gpumd and
vasp accepted as familiar aliases of md and label).  Every command is
deterministic under --seed, and a command exits 0 only after its artifacts
have been written and re-parsed.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import surrogate
from .calculators import ExternalCommand, LennardJones, label as label_frames
from .descriptor import DescriptorSpec, dataset_descriptors
from .frames import Dataset, read_dataset, write_dataset, write_parity
from .geometry import RadiiTable, is_physical
from .mdrun import MdParams, run_md
from .perturb import PerturbSpec, generate_set
from .sampling import farthest_point_sample, pca_project, write_index_list
from .training import LossWeights, train
from .workflow import JobConfig, init_workspace, run_loop
from .service import serve

RADII_ENV = "NEPCURATE_RADII"
MODEL_ENV = "NEPCURATE_MODEL"


class CliError(RuntimeError):
    pass


def _radii(coeff: float = 0.65) -> RadiiTable:
    path = os.environ.get(RADII_ENV)
    if path:
        return RadiiTable.from_file(path, coeff=coeff)
    return RadiiTable.builtin(coeff=coeff)


def _default_model_path(explicit) -> Path | None:
    if explicit:
        return Path(explicit)
    env = os.environ.get(MODEL_ENV)
    return Path(env) if env else None


def _validated_write(dataset, path) -> None:
    write_dataset(dataset, path)
    reparsed = read_dataset(path)
    if len(reparsed) != len(dataset):
        raise CliError(f"output {path} failed validation after writing")


def _read_hyperparameters(path) -> dict:
    """nep.in-style file: one 'key value' per line, '#' comments."""
    params = {}
    for line in Path(path).read_text().splitlines():
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        toks = body.split()
        if len(toks) < 2:
            raise CliError(f"{path}: malformed line {body!r}")
        params[toks[0]] = toks[1]
    return params


# ---------------------------------------------------------------------------
# verb implementations

def _cmd_perturb(args) -> int:
    bases = read_dataset(args.structure)
    if len(bases) == 0:
        raise CliError(f"{args.structure} holds no frames")
    spec = PerturbSpec(n=args.n, cell_amplitude=args.c, disp_amplitude=args.d,
                       filter=args.f, seed=args.seed)
    radii = _radii(args.coeff)
    stem = Path(args.structure).stem
    labels = [stem if len(bases) == 1 else f"{stem}_{k}" for k in range(len(bases))]
    out = generate_set(list(bases), spec, radii, labels=labels)
    _validated_write(out, args.out)
    print(f"wrote {len(out)} perturbed frames to {args.out}")
    return 0


def _select_spec(dataset, args) -> DescriptorSpec:
    model_path = _default_model_path(args.model)
    if model_path and model_path.exists():
        return surrogate.SurrogateModel.load(model_path).spec
    elements = dataset.elements()
    if not elements:
        raise CliError("dataset holds no atoms")
    return DescriptorSpec(r_cut=args.rcut, n_rad=args.nrad, elements=tuple(elements))


def _cmd_select(args) -> int:
    dataset = read_dataset(args.dataset)
    if len(dataset) == 0:
        raise CliError(f"{args.dataset} holds no frames")
    frames = list(dataset)
    if args.f:
        radii = _radii(args.coeff)
        frames = [f for f in frames if is_physical(f, radii)]
        if not frames:
            raise CliError("every frame was filtered out as non-physical")
    spec = _select_spec(dataset, args)
    points = dataset_descriptors(frames, spec)
    base = None
    if args.base:
        base_frames = read_dataset(args.base)
        base = dataset_descriptors(list(base_frames), spec)
    result = farthest_point_sample(points, max_count=args.max,
                                   min_distance=args.d, base=base)
    chosen = Dataset([frames[i] for i in result.selected])
    _validated_write(chosen, args.out)
    stem = Path(args.out).stem
    write_index_list(result.selected, Path(args.out).with_name(f"{stem}_indices.txt"))
    write_index_list(result.rejected, Path(args.out).with_name(f"{stem}_rejected.txt"))

    # plot data instead of a rendered image: 2D projection with selection flags
    if points.shape[0] >= 2 and points.shape[1] >= 2:
        proj = pca_project(points)
        selected_set = set(result.selected)
        lines = ["frame,pc1,pc2,selected"]
        for i in range(points.shape[0]):
            lines.append(
                f"{i},{proj.coords[i, 0]:.10g},{proj.coords[i, 1]:.10g},"
                f"{int(i in selected_set)}"
            )
        Path(args.projection).write_text("\n".join(lines) + "\n")
    print(f"selected {len(chosen)} of {len(frames)} frames -> {args.out}")
    return 0


def _parity_outputs(dataset, model, stem, directory=Path(".")) -> None:
    parity = surrogate.dataset_parity(dataset, model)
    for kind, series in parity.items():
        out = Path(directory) / f"{kind}_{stem}.out"
        write_parity(series, out)
        print(f"{kind} RMSE ({stem}): {surrogate.rmse(series):.6g}  -> {out}")


def _cmd_nep(args) -> int:
    train_path = Path(args.train)
    if not train_path.exists():
        raise CliError(f"training set {train_path} not found")
    dataset = read_dataset(train_path)
    if len(dataset) == 0:
        raise CliError(f"{train_path} holds no frames")

    hyper = {
        "cutoff": 5.0, "n_max": 4, "neuron": 10, "generation": 500,
        "lambda_e": 1.0, "lambda_f": 1.0, "lambda_v": 0.1, "lambda_reg": 0.0,
    }
    if args.infile:
        for key, value in _read_hyperparameters(args.infile).items():
            if key not in hyper:
                raise CliError(f"{args.infile}: unknown hyperparameter {key!r}")
            hyper[key] = value

    model_path = _default_model_path(args.model) or Path("model.txt")
    if args.pred:
        if not model_path.exists():
            raise CliError(f"prediction mode needs an existing model at {model_path}")
        model = surrogate.SurrogateModel.load(model_path)
        _parity_outputs(dataset, model, train_path.stem)
    else:
        elements = tuple(dataset.elements())  # inferred from the dataset
        spec = DescriptorSpec(r_cut=float(hyper["cutoff"]),
                              n_rad=int(hyper["n_max"]), elements=elements)
        weights = LossWeights(
            lambda_e=float(hyper["lambda_e"]), lambda_f=float(hyper["lambda_f"]),
            lambda_v=float(hyper["lambda_v"]), lambda_reg=float(hyper["lambda_reg"]),
        )
        model = train(dataset, spec, int(hyper["neuron"]), weights,
                      generations=int(hyper["generation"]), seed=args.seed)
        model.save(model_path)
        surrogate.SurrogateModel.load(model_path)  # validate the artifact
        print(f"saved model to {model_path}")
        _parity_outputs(dataset, model, train_path.stem)
    if args.test:
        test_set = read_dataset(args.test)
        _parity_outputs(test_set, model, Path(args.test).stem)
    return 0


def _md_defaults() -> dict:
    defaults = {"timestep": 1.0, "friction": 0.01, "dump_interval": 100,
                "max_force": 50.0}
    md_in = Path("md.in")
    if md_in.exists():
        for key, value in _read_hyperparameters(md_in).items():
            if key in defaults:
                defaults[key] = value
    return defaults


def _cmd_md(args) -> int:
    frames = read_dataset(args.structure)
    if len(frames) == 0:
        raise CliError(f"{args.structure} holds no frames")
    model_path = _default_model_path(args.model)
    if model_path is None or not model_path.exists():
        raise CliError("md needs a trained model (--model or $" + MODEL_ENV + ")")
    model = surrogate.SurrogateModel.load(model_path)
    base = _md_defaults()
    params = MdParams(
        timestep=float(args.timestep if args.timestep else base["timestep"]),
        friction=float(args.friction if args.friction is not None else base["friction"]),
        dump_interval=int(args.dump_interval if args.dump_interval else base["dump_interval"]),
        max_force=float(base["max_force"]),
    )
    trajectory = run_md(frames[0], model, args.time, args.temperature,
                        params=params, seed=args.seed)
    _validated_write(trajectory, args.out)
    print(f"wrote {len(trajectory)} snapshots to {args.out}")
    return 0


def _cmd_label(args) -> int:
    frames = read_dataset(args.structure)
    if len(frames) == 0:
        raise CliError(f"{args.structure} holds no frames")
    if args.calc == "lj":
        calc = LennardJones(epsilon=args.epsilon, sigma=args.sigma,
                            cutoff=args.cutoff)
    else:
        substitutions = {}
        if args.kspacing is not None:
            substitutions["kspacing"] = args.kspacing
        if args.ka is not None:
            substitutions["ka"] = args.ka
        calc = ExternalCommand(template=args.calc,
                               extra_substitutions=substitutions)
        calc.probe()
    report = label_frames(list(frames), calc, workers=args.np)
    if report.failed:
        for idx, reason in report.failed:
            print(f"frame {idx} failed: {reason}", file=sys.stderr)
    if len(report.labeled) == 0:
        raise CliError("labeling failed for every frame")
    _validated_write(report.labeled, args.out)
    print(f"labeled {len(report.labeled)}/{len(frames)} frames -> {args.out}")
    return 0 if report.ok else 1


def _cmd_init(args) -> int:
    init_workspace(args.target)
    print(f"initialized workspace template in {args.target}")
    return 0


def _cmd_train(args) -> int:
    config = JobConfig.load(args.job)
    states = run_loop(config)
    for state in states:
        summary = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                            for k, v in state.metrics.items())
        print(f"Generation-{state.index}: {summary}")
    return 0


def _cmd_serve(args) -> int:
    overrides = {}
    for item in args.parity_k or []:
        if "=" not in item:
            raise CliError(f"--parity-k expects kind=N, got {item!r}")
        kind, _, count = item.partition("=")
        overrides[kind] = int(count)
    server, _ = serve(args.directory, port=args.port,
                      model_path=_default_model_path(args.model),
                      parity_components=overrides)
    host, port = server.server_address
    print(f"serving {args.directory} on http://{host}:{port}/api/session")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# ---------------------------------------------------------------------------
# parser assembly

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nepcurate",
        description="Dataset construction, curation, and active-learning "
                    "iteration for machine-learned interatomic potentials.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("perturb", help="generate strained/rattled structures")
    p.add_argument("structure", help="base structure file (extended XYZ)")
    p.add_argument("-n", type=int, default=5000, help="structures to generate")
    p.add_argument("-c", type=float, default=0.04, help="cell strain bound")
    p.add_argument("-d", type=float, default=0.3, help="displacement bound (A)")
    p.add_argument("-f", action="store_true", help="filter non-physical outputs")
    p.add_argument("--coeff", type=float, default=0.65, help="radius screening factor")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="perturb.xyz")
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("select", help="farthest-point sample a dataset")
    p.add_argument("dataset", help="candidate structures (extended XYZ)")
    p.add_argument("-max", dest="max", type=int, default=100,
                   help="maximum structures to keep")
    p.add_argument("-d", type=float, default=0.0,
                   help="minimum descriptor-space distance")
    p.add_argument("-base", dest="base", default=None,
                   help="anchor set (e.g. train.xyz); candidates must stay far from it")
    p.add_argument("-f", action="store_true", help="drop non-physical frames first")
    p.add_argument("--coeff", type=float, default=0.65)
    p.add_argument("--model", default=None, help="model file providing the descriptor spec")
    p.add_argument("--rcut", type=float, default=5.0)
    p.add_argument("--nrad", type=int, default=4)
    p.add_argument("--out", default="selected.xyz")
    p.add_argument("--projection", default="selected_projection.csv",
                   help="CSV with 2D projection + selection flags (plot data)")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("nep", help="train the surrogate potential or predict with it")
    p.add_argument("-train", dest="train", default="train.xyz",
                   help="training set path")
    p.add_argument("-in", dest="infile", default=None,
                   help="hyperparameter file (cutoff/n_max/neuron/lambda_*/generation)")
    p.add_argument("-pred", action="store_true",
                   help="prediction mode: write parity files with an existing model")
    p.add_argument("--model", default=None, help="model file to write (or read with -pred)")
    p.add_argument("--test", default=None, help="extra dataset to evaluate")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_nep)

    for name in ("md", "gpumd"):
        p = sub.add_parser(name, help="run surrogate molecular dynamics"
                           + (" (alias of md)" if name == "gpumd" else ""))
        p.add_argument("structure")
        p.add_argument("--model", default=None)
        p.add_argument("--time", type=float, default=10.0, help="duration (ps)")
        p.add_argument("--temperature", type=float, default=300.0, help="K")
        p.add_argument("--timestep", type=float, default=None, help="fs")
        p.add_argument("--friction", type=float, default=None, help="1/fs; 0 = NVE")
        p.add_argument("--dump-interval", dest="dump_interval", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="trajectory.xyz")
        p.set_defaults(func=_cmd_md)

    for name in ("label", "vasp"):
        p = sub.add_parser(name, help="attach reference labels to structures"
                           + (" (alias of label)" if name == "vasp" else ""))
        p.add_argument("structure")
        p.add_argument("--calc", default="lj",
                       help="'lj' or an external command template with "
                            "{in.xyz} and {out.xyz} placeholders")
        p.add_argument("--epsilon", type=float, default=0.01)
        p.add_argument("--sigma", type=float, default=3.4)
        p.add_argument("--cutoff", type=float, default=10.0)
        p.add_argument("-np", dest="np", type=int, default=1,
                       help="concurrent labeling workers")
        kgroup = p.add_mutually_exclusive_group()
        kgroup.add_argument("--kspacing", default=None,
                            help="passed through to the external template")
        kgroup.add_argument("--ka", default=None,
                            help="passed through to the external template")
        p.add_argument("--out", default="labeled.xyz")
        p.set_defaults(func=_cmd_label)

    p = sub.add_parser("init", help="write a job.yaml/md.in workspace template")
    p.add_argument("target", nargs="?", default=".")
    p.set_defaults(func=_cmd_init)

    p = sub.add_parser("train", help="run the active-learning loop")
    p.add_argument("job", help="job.yaml configuration")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("serve", help="start the curation HTTP service")
    p.add_argument("directory", nargs="?", default=".")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--model", default=None)
    p.add_argument("--parity-k", dest="parity_k", action="append",
                   metavar="KIND=N",
                   help="column-count override for foreign parity files")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
