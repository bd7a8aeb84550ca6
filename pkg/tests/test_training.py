"""Evolution-strategy trainer: recovery, determinism, loss behavior."""

import numpy as np
import pytest

from nepcurate.descriptor import DescriptorSpec
from nepcurate.frames import Dataset
from nepcurate.surrogate import SurrogateModel, predict
from nepcurate.training import (
    LossWeights,
    TrainingError,
    evaluate_loss,
    snes_population,
    train,
)

from conftest import random_frame


def synth_dataset(rng, spec, n_neu, n_frames=20, scale=0.1, with_forces=False):
    """A dataset labeled by a random 'ground truth' model."""
    target = SurrogateModel(
        spec=spec,
        w0=rng.normal(0, scale, (n_neu, spec.n_des)),
        b0=rng.normal(0, scale, n_neu),
        w1=rng.normal(0, scale, n_neu),
        b1=float(rng.normal(0, scale)),
    )
    frames = []
    for _ in range(n_frames):
        frame = random_frame(rng, n_atoms=4, skew=0.1)
        energy, forces, virial = predict(frame, target)
        frame.ref_energy = energy
        if with_forces:
            frame.ref_forces = forces
            frame.ref_virial = virial
        frames.append(frame)
    return Dataset(frames), target


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(lambda_e=-1.0)
    with pytest.raises(ValueError):
        LossWeights(lambda_e=0.0, lambda_f=0.0, lambda_v=0.0)


def test_population_formula():
    # 4 + 3*floor(ln dim), rounded up to even
    assert snes_population(51) == 14
    assert snes_population(3) == 8   # 4 + 3*1 = 7 -> 8
    assert snes_population(160) == 20  # 4 + 3*5 = 19 -> 20


def test_budget_zero_returns_initialization(rng):
    spec = DescriptorSpec(r_cut=4.0, n_rad=2, elements=("A", "B"))
    ds, _ = synth_dataset(rng, spec, n_neu=3, n_frames=5)
    weights = LossWeights(1.0, 0.0, 0.0, 0.0)
    a = train(ds, spec, 3, weights, generations=0, seed=11)
    b = train(ds, spec, 3, weights, generations=0, seed=11)
    assert np.array_equal(a.to_vector(), b.to_vector())
    c = train(ds, spec, 3, weights, generations=0, seed=12)
    assert not np.array_equal(a.to_vector(), c.to_vector())


def test_same_seed_bitwise_identical(rng):
    spec = DescriptorSpec(r_cut=4.0, n_rad=2, elements=("A", "B"))
    ds, _ = synth_dataset(rng, spec, n_neu=3, n_frames=8)
    weights = LossWeights(1.0, 0.0, 0.0, 0.0)
    hist_a, hist_b = [], []
    a = train(ds, spec, 3, weights, generations=40, seed=5,
              callback=lambda g, l: hist_a.append(l))
    b = train(ds, spec, 3, weights, generations=40, seed=5,
              callback=lambda g, l: hist_b.append(l))
    assert hist_a == hist_b
    assert np.array_equal(a.to_vector(), b.to_vector())


def test_best_so_far_non_increasing(rng):
    spec = DescriptorSpec(r_cut=4.0, n_rad=2, elements=("A", "B"))
    ds, _ = synth_dataset(rng, spec, n_neu=3, n_frames=8)
    weights = LossWeights(1.0, 0.0, 0.0, 0.0)
    hist = []
    train(ds, spec, 3, weights, generations=100, seed=2,
          callback=lambda g, l: hist.append(l))
    assert all(hist[k + 1] <= hist[k] for k in range(len(hist) - 1))


def test_recovery_energy_rmse(rng):
    """A model-synthesized dataset is fit back to < 1 meV/atom."""
    spec = DescriptorSpec(r_cut=4.0, n_rad=4, elements=("A", "B"))
    ds, _ = synth_dataset(rng, spec, n_neu=5, n_frames=20)
    weights = LossWeights(1.0, 0.0, 0.0, 0.0)
    model = train(ds, spec, 5, weights, generations=1500, seed=1)
    errors = [(predict(f, model)[0] - f.ref_energy) / f.n_atoms for f in ds]
    assert np.sqrt(np.mean(np.square(errors))) < 1e-3


def test_force_and_virial_terms_reduce(rng):
    spec = DescriptorSpec(r_cut=4.0, n_rad=2, elements=("A", "B"))
    ds, _ = synth_dataset(rng, spec, n_neu=3, n_frames=6, with_forces=True)
    weights = LossWeights(1.0, 1.0, 0.1, 0.0)
    hist = []
    model = train(ds, spec, 3, weights, generations=150, seed=4,
                  callback=lambda g, l: hist.append(l))
    assert hist[-1] < hist[0]
    assert evaluate_loss(model, ds, weights) == pytest.approx(hist[-1], rel=1e-9)


def test_regularization_punishes_large_parameters(rng):
    spec = DescriptorSpec(r_cut=4.0, n_rad=2, elements=("A", "B"))
    ds, _ = synth_dataset(rng, spec, n_neu=3, n_frames=5)
    big = SurrogateModel(spec=spec, w0=np.full((3, 4), 10.0), b0=np.zeros(3),
                         w1=np.zeros(3), b1=0.0)
    plain = LossWeights(1.0, 0.0, 0.0, 0.0)
    reg = LossWeights(1.0, 0.0, 0.0, 1.0)
    assert evaluate_loss(big, ds, reg) > evaluate_loss(big, ds, plain)


def test_empty_dataset_rejected():
    spec = DescriptorSpec(r_cut=4.0, n_rad=2, elements=("A",))
    with pytest.raises(TrainingError):
        train(Dataset([]), spec, 3, LossWeights(), generations=1)


def test_unlabeled_frame_rejected(rng):
    spec = DescriptorSpec(r_cut=4.0, n_rad=2, elements=("A", "B"))
    frame = random_frame(rng, n_atoms=2)
    with pytest.raises(TrainingError, match="frame 0"):
        train(Dataset([frame]), spec, 3, LossWeights(), generations=1)


def test_warm_start_continues(rng):
    spec = DescriptorSpec(r_cut=4.0, n_rad=2, elements=("A", "B"))
    ds, _ = synth_dataset(rng, spec, n_neu=3, n_frames=8)
    weights = LossWeights(1.0, 0.0, 0.0, 0.0)
    first = train(ds, spec, 3, weights, generations=60, seed=9)
    loss_first = evaluate_loss(first, ds, weights)
    resumed = train(ds, spec, 3, weights, generations=60, seed=10, init=first)
    assert evaluate_loss(resumed, ds, weights) <= loss_first + 1e-12
