"""Workspace init, config validation, and the resumable generation loop."""

import numpy as np
import pytest

import nepcurate.workflow as workflow
from nepcurate.calculators import CalculatorError, LennardJones, label
from nepcurate.frames import Frame, read_dataset, write_dataset
from nepcurate.perturb import PerturbSpec, generate_set
from nepcurate.workflow import (
    GenerationState,
    JobConfig,
    WorkflowError,
    init_workspace,
    run_loop,
)

LJ = dict(epsilon=0.0104, sigma=3.4, cutoff=7.5)


def lattice_frame():
    spots = np.array([(x, y, z) for x in range(4) for y in range(2)
                      for z in range(2)], dtype=float)
    return Frame(species=["Ar"] * 16, positions=spots * 4.2,
                 cell=np.diag([16.8, 8.4, 8.4]), periodic=[True] * 3,
                 info={"config_type": "lattice"})


def prepared_workspace(tmp_path, stages=2, max_count=4, generations=80,
                       current_job="nep"):
    """A ready-to-run job directory with labeled train/holdout sets."""
    base = lattice_frame()
    calc = LennardJones(**LJ)
    train_set = label(list(generate_set(
        [base], PerturbSpec(n=10, cell_amplitude=0.03, disp_amplitude=0.25,
                            filter=True, seed=1))), calc).labeled
    holdout = label(list(generate_set(
        [base], PerturbSpec(n=5, cell_amplitude=0.03, disp_amplitude=0.25,
                            filter=True, seed=77))), calc).labeled
    write_dataset(train_set, tmp_path / "train.xyz")
    write_dataset(holdout, tmp_path / "holdout.xyz")
    (tmp_path / "structures").mkdir(exist_ok=True)
    write_dataset([base], tmp_path / "structures" / "base.xyz")

    config = JobConfig(
        work_path=tmp_path / "cache",
        current_job=current_job,
        seed=5,
        train_file=tmp_path / "train.xyz",
        holdout_file=tmp_path / "holdout.xyz",
        structures=[tmp_path / "structures" / "base.xyz"],
        step_times=[0.3] * stages,
        temperature_every_step=[[200.0 + 100.0 * k] for k in range(stages)],
        md={"timestep": 2.0, "friction": 0.02, "dump_interval": 20,
            "max_force": 50.0},
        descriptor={"r_cut": 5.0, "n_rad": 4},
        training={"neurons": 8, "generations": generations, "lambda_e": 1.0,
                  "lambda_f": 1.0, "lambda_v": 0.1, "lambda_reg": 0.0},
        select={"max_count": max_count, "min_distance": 0.0, "filter": True,
                "coeff": 0.65},
        calculator={"kind": "lj", **LJ},
    )
    return config


def test_init_workspace(tmp_path):
    init_workspace(tmp_path / "ws")
    assert (tmp_path / "ws" / "job.yaml").exists()
    assert (tmp_path / "ws" / "md.in").exists()
    assert (tmp_path / "ws" / "structures").is_dir()


def test_init_workspace_never_overwrites(tmp_path):
    target = tmp_path / "ws"
    init_workspace(target)
    marker = (target / "job.yaml").read_text()
    with pytest.raises(WorkflowError, match="overwrite"):
        init_workspace(target)
    assert (target / "job.yaml").read_text() == marker


def test_template_roundtrips_through_parser(tmp_path):
    init_workspace(tmp_path / "ws")
    config = JobConfig.load(tmp_path / "ws" / "job.yaml")
    assert config.n_stages == 2
    assert config.calculator["kind"] == "lj"


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "job.yaml"
    path.write_text("work_path: ./cache\nstructurs:\n  - a.xyz\n")
    with pytest.raises(WorkflowError, match="structurs"):
        JobConfig.load(path)


def test_config_rejects_nested_typos(tmp_path):
    path = tmp_path / "job.yaml"
    path.write_text(
        "structures: [a.xyz]\nmd:\n  timestep: 1.0\n  fricton: 0.1\n"
    )
    with pytest.raises(WorkflowError, match="fricton"):
        JobConfig.load(path)


def test_config_stage_mismatch(tmp_path):
    path = tmp_path / "job.yaml"
    path.write_text(
        "structures: [a.xyz]\nstep_times: [1, 2]\n"
        "temperature_every_step:\n  - [300]\n"
    )
    with pytest.raises(WorkflowError, match="per stage"):
        JobConfig.load(path)


def test_generation_state_paths(tmp_path):
    state = GenerationState(3, tmp_path / "Generation-3")
    assert state.directory.name == "Generation-3"
    assert state.model_file.name == "model.txt"
    assert not state.complete


def test_degenerate_stage_keeps_train_set(tmp_path):
    config = prepared_workspace(tmp_path, stages=1, max_count=0, generations=30)
    states = run_loop(config)
    assert len(states) == 1
    assert states[0].model_file.exists()
    before = read_dataset(config.train_file)
    after = read_dataset(states[0].train_after_file)
    assert len(after) == len(before)
    assert states[0].metrics["train_size"] == len(before)


def test_loop_grows_train_set_and_records_metrics(tmp_path):
    config = prepared_workspace(tmp_path, stages=2, max_count=3, generations=60)
    states = run_loop(config)
    sizes = [s.metrics["train_size"] for s in states]
    assert sizes[0] > 10  # grew beyond the initial 10
    assert sizes[1] > sizes[0]
    for state in states:
        assert state.complete
        assert "rmse_energy" in state.metrics
        selected = read_dataset(state.selected_file)
        labeled = read_dataset(state.labeled_file)
        assert len(labeled) == len(selected) <= 3
        for frame in labeled:
            assert frame.ref_energy is not None


def test_appended_frames_respect_fps_floor_and_filter(tmp_path):
    """Frames a generation appends sit at least min_distance away from the
    generation's training-set descriptors and pass the physicality screen."""
    from nepcurate.descriptor import DescriptorSpec, dataset_descriptors, structure_descriptor
    from nepcurate.geometry import RadiiTable, is_physical

    config = prepared_workspace(tmp_path, stages=1, max_count=4, generations=40)
    floor = 1e-4
    config.select["min_distance"] = floor
    states = run_loop(config)
    labeled = read_dataset(states[0].labeled_file)
    if len(labeled) == 0:
        pytest.skip("nothing selected at this floor")

    base_frames = read_dataset(config.train_file)
    spec = DescriptorSpec(r_cut=5.0, n_rad=4, elements=("Ar",))
    base = dataset_descriptors(base_frames, spec)
    radii = RadiiTable.builtin()
    for frame in labeled:
        desc = structure_descriptor(frame, spec)
        distance = np.min(np.linalg.norm(base - desc, axis=1))
        assert distance >= floor
        assert is_physical(frame, radii)


def test_loop_is_idempotent_once_complete(tmp_path):
    config = prepared_workspace(tmp_path, stages=1, max_count=2, generations=40)
    first = run_loop(config)
    marker = first[0].train_after_file.read_bytes()
    again = run_loop(config)
    assert again[0].train_after_file.read_bytes() == marker
    assert again[0].metrics == first[0].metrics


def test_resume_after_labeling_kill(tmp_path, monkeypatch):
    """Kill the loop in the labeling phase; the restart skips training and
    MD and produces outputs identical to an uninterrupted twin run."""
    (tmp_path / "killed").mkdir(exist_ok=True)
    config = prepared_workspace(tmp_path / "killed", stages=1, max_count=3,
                                generations=40)

    calls = {"n": 0}
    real_label = workflow.label

    def exploding_label(frames, calc, workers=1):
        calls["n"] += 1
        raise CalculatorError("simulated scheduler kill")

    monkeypatch.setattr(workflow, "label", exploding_label)
    with pytest.raises(CalculatorError):
        run_loop(config)
    monkeypatch.setattr(workflow, "label", real_label)

    gen0 = config.work_path / "Generation-0"
    assert (gen0 / "model.txt").exists()
    assert (gen0 / "trajectory.xyz").exists()
    assert (gen0 / "selected.xyz").exists()
    assert not (gen0 / "labeled.xyz").exists()
    model_before = (gen0 / "model.txt").read_bytes()
    trajectory_before = (gen0 / "trajectory.xyz").read_bytes()

    states = run_loop(config)
    assert states[0].complete
    # training and MD were not redone
    assert (gen0 / "model.txt").read_bytes() == model_before
    assert (gen0 / "trajectory.xyz").read_bytes() == trajectory_before

    # twin run without the kill produces identical artifacts
    (tmp_path / "twin").mkdir(exist_ok=True)
    twin = prepared_workspace(tmp_path / "twin", stages=1, max_count=3,
                              generations=40)
    twin_states = run_loop(twin)
    for name in ("model.txt", "trajectory.xyz", "selected.xyz",
                 "labeled.xyz", "train_after.xyz", "metrics.csv"):
        assert (gen0 / name).read_bytes() == \
            (twin.work_path / "Generation-0" / name).read_bytes()
    assert twin_states[0].metrics == states[0].metrics


def test_missing_train_file_errors(tmp_path):
    config = prepared_workspace(tmp_path, stages=1)
    config.train_file = tmp_path / "nope.xyz"
    with pytest.raises(WorkflowError, match="nope.xyz"):
        run_loop(config)


def test_current_job_vasp_labels_initial_set(tmp_path):
    config = prepared_workspace(tmp_path, stages=1, max_count=0, generations=20,
                                current_job="vasp")
    # strip the labels from the initial train set
    bare = read_dataset(config.train_file)
    for frame in bare:
        frame.ref_energy = None
        frame.ref_forces = None
        frame.ref_virial = None
    write_dataset(bare, config.train_file)
    states = run_loop(config)
    labeled_initial = config.work_path / "train_initial_labeled.xyz"
    assert labeled_initial.exists()
    assert all(f.ref_energy is not None for f in read_dataset(labeled_initial))
    assert states[0].complete


def test_current_job_gpumd_requires_model(tmp_path):
    config = prepared_workspace(tmp_path, stages=1, current_job="gpumd")
    with pytest.raises(WorkflowError, match="model"):
        run_loop(config)
