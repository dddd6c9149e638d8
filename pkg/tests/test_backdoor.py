import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from backdoorlab.backdoor import (
    BackdoorSignalSpec,
    BackdoorTrigger,
    LabelConsistentPoisoner,
    MultiTargetPlan,
    PoisonPlan,
    PoisonRecord,
    apply_test_backdoor,
    generate_signal,
    poison_count,
    poison_multi_target,
    poison_training_set,
    select_without_replacement,
    superimpose,
)
from backdoorlab.data import LabeledDataset
from backdoorlab.errors import ConfigError, DataError, ShapeError

RAMP = BackdoorSignalSpec("ramp", 40)


def _dataset(n=200, classes=4, seed=0, shape=(6, 7, 1)):
    rng = np.random.default_rng(seed)
    return LabeledDataset(rng.integers(0, 256, (n,) + shape, dtype=np.uint8),
                          rng.integers(0, classes, n), classes)


# signals

def test_ramp_endpoints():
    v = generate_signal(RAMP, 28, 28)
    assert v.shape == (28, 28, 1)
    assert v[0, 27, 0] == pytest.approx(40)
    assert v[5, 13, 0] == pytest.approx(20)


def test_triangle_endpoints():
    v = generate_signal(BackdoorSignalSpec("triangle", 40), 28, 28)
    assert v[0, 13, 0] == pytest.approx(20)
    assert v[0, 27, 0] == pytest.approx(0)
    assert v.max() == pytest.approx(v[0, 13, 0])


def test_sinusoid_integer_cycle_zero_and_peak():
    spec = BackdoorSignalSpec("sinusoid", 20, 6)
    v = generate_signal(spec, 32, 32, 3)
    assert v[0, 31, 0] == pytest.approx(0, abs=1e-9)
    j = np.arange(1, 33)
    assert v.max() == pytest.approx(20 * np.sin(2 * np.pi * j * 6 / 32).max())
    assert v.min() < 0


@pytest.mark.parametrize("spec", [RAMP.with_delta(0), BackdoorSignalSpec("triangle", 0),
                                  BackdoorSignalSpec("sinusoid", 0, 3)])
def test_zero_strength_is_zero(spec):
    assert not generate_signal(spec, 5, 9, 3).any()


@pytest.mark.parametrize("kwargs", [dict(kind="square", delta=1), dict(kind="ramp", delta=-1),
                                    dict(kind="sinusoid", delta=1), dict(kind="sinusoid", delta=1, frequency=1.5),
                                    dict(kind="sinusoid", delta=1, frequency=0)])
def test_invalid_signal_specs(kwargs):
    with pytest.raises(ConfigError):
        BackdoorSignalSpec(**kwargs)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["ramp", "triangle", "sinusoid"]), st.floats(0, 100),
       st.integers(1, 12), st.integers(1, 12), st.integers(1, 3), st.integers(1, 5))
def test_signal_is_column_constant(kind, delta, h, w, c, f):
    v = generate_signal(BackdoorSignalSpec(kind, delta, f if kind == "sinusoid" else None), h, w, c)
    assert v.shape == (h, w, c)
    np.testing.assert_array_equal(v, np.broadcast_to(v[:1, :, :1], v.shape))


def test_signal_spec_dict_round_trip():
    for spec in (RAMP, BackdoorSignalSpec("sinusoid", 20, 6)):
        assert BackdoorSignalSpec.from_dict(spec.to_dict()) == spec


# superimpose

def test_clamp_cases():
    assert superimpose(np.array([[[250]]], np.uint8), np.array([[[40.0]]]))[0, 0, 0] == 255
    assert superimpose(np.array([[[10]]], np.uint8), np.array([[[-20.0]]]))[0, 0, 0] == 0
    assert superimpose(np.array([[[10]]], np.uint8), np.array([[[2.5]]]))[0, 0, 0] == 13


def test_superimpose_shape_mismatch():
    with pytest.raises(ShapeError):
        superimpose(np.zeros((4, 4, 1), np.uint8), np.zeros((4, 5, 1)))


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.uint8, (3, 5, 2)))
def test_zero_signal_is_identity(image):
    np.testing.assert_array_equal(superimpose(image, generate_signal(RAMP.with_delta(0), 3, 5, 2)), image)


@settings(max_examples=60, deadline=None)
@given(st.floats(1, 60), st.floats(1, 60))
def test_ramp_monotone_in_strength(d1, d2):
    lo, hi = sorted((d1, d2))
    if hi - lo < 1.0:
        return
    image = np.full((2, 8, 1), 100, np.uint8)
    a = superimpose(image, generate_signal(RAMP.with_delta(lo), 2, 8)).astype(int)
    b = superimpose(image, generate_signal(RAMP.with_delta(hi), 2, 8)).astype(int)
    # the last column carries the full strength, so the gap there is at least hi - lo - 1
    assert (b >= a).all()
    assert (b[:, -1] > a[:, -1]).all()


# poisoning

def test_poison_count_is_floor():
    assert poison_count(0.3, 6000) == 1800
    assert poison_count(0.3, 10) == 3
    assert poison_count(0.3, 9) == 2
    assert poison_count(1.0, 7) == 7
    assert poison_count(0.0, 7) == 0


def test_alpha_03_on_6000_samples():
    labels = np.repeat(np.arange(10), 6000)
    ds = LabeledDataset(np.zeros((labels.size, 2, 2, 1), np.uint8), labels, 10)
    poisoned, record = poison_training_set(ds, PoisonPlan(3, 0.3, RAMP, seed=5))
    idx = record.indices[3]
    assert idx.size == 1800 and np.unique(idx).size == 1800
    assert (ds.labels[idx] == 3).all()
    changed = np.flatnonzero((poisoned.images != ds.images).any(axis=(1, 2, 3)))
    np.testing.assert_array_equal(changed, idx)


def test_alpha_zero_is_unchanged():
    ds = _dataset()
    poisoned, record = poison_training_set(ds, PoisonPlan(1, 0.0, RAMP))
    assert poisoned.images.tobytes() == ds.images.tobytes()
    assert record.indices[1].size == 0


def test_alpha_one_covers_the_class():
    ds = _dataset()
    poisoned, record = poison_training_set(ds, PoisonPlan(2, 1.0, RAMP))
    np.testing.assert_array_equal(record.indices[2], np.flatnonzero(ds.labels == 2))
    expected = superimpose(ds.images[ds.labels == 2], generate_signal(RAMP, 6, 7))
    np.testing.assert_array_equal(poisoned.images[ds.labels == 2], expected)


def test_poisoning_is_deterministic_and_seed_dependent():
    ds = _dataset(400)
    a = poison_training_set(ds, PoisonPlan(0, 0.5, RAMP, seed=3))
    b = poison_training_set(ds, PoisonPlan(0, 0.5, RAMP, seed=3))
    c = poison_training_set(ds, PoisonPlan(0, 0.5, RAMP, seed=4))
    assert a[0].images.tobytes() == b[0].images.tobytes()
    np.testing.assert_array_equal(a[1].indices[0], b[1].indices[0])
    assert not np.array_equal(a[1].indices[0], c[1].indices[0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 3), st.floats(0, 1), st.integers(0, 2**16), st.integers(0, 2**16))
def test_labels_and_locality_preserved(target, alpha, seed, data_seed):
    ds = _dataset(80, seed=data_seed)
    if not (ds.labels == target).any():
        return
    poisoned, record = poison_training_set(ds, PoisonPlan(target, alpha, RAMP, seed))
    assert poisoned.labels.tobytes() == ds.labels.tobytes()
    untouched = np.setdiff1d(np.arange(len(ds)), record.indices[target])
    assert poisoned.images[untouched].tobytes() == ds.images[untouched].tobytes()
    assert record.indices[target].size == poison_count(alpha, int((ds.labels == target).sum()))


def test_empty_target_class():
    ds = LabeledDataset(np.zeros((3, 2, 2, 1), np.uint8), [0, 0, 1], 3)
    with pytest.raises(DataError):
        poison_training_set(ds, PoisonPlan(2, 0.5, RAMP))
    with pytest.raises(ConfigError):
        poison_training_set(ds, PoisonPlan(5, 0.5, RAMP))


def test_plan_validation():
    with pytest.raises(ConfigError):
        PoisonPlan(0, 1.5, RAMP)
    with pytest.raises(ConfigError):
        MultiTargetPlan(((1, RAMP), (1, RAMP)), 0.3)


def test_select_without_replacement():
    rng = np.random.default_rng(0)
    picks = select_without_replacement(np.arange(50, 100), 20, rng)
    assert np.unique(picks).size == 20 and picks.min() >= 50
    with pytest.raises(ValueError):
        select_without_replacement(np.arange(3), 4, rng)


def test_multi_target_is_disjoint_and_per_target():
    ds = _dataset(300)
    tri = BackdoorSignalSpec("triangle", 30)
    poisoned, record = poison_multi_target(ds, MultiTargetPlan(((1, RAMP), (3, tri)), 0.4, seed=2))
    assert set(record.indices) == {1, 3}
    assert not np.intersect1d(record.indices[1], record.indices[3]).size
    assert (ds.labels[record.indices[3]] == 3).all()
    np.testing.assert_array_equal(poisoned.images[record.indices[3]],
                                  superimpose(ds.images[record.indices[3]], generate_signal(tri, 6, 7)))
    # each target uses its own stream, so adding a second target leaves the first selection alone
    _, single = poison_training_set(ds, PoisonPlan(1, 0.4, RAMP, seed=2))
    np.testing.assert_array_equal(single.indices[1], record.indices[1])


def test_record_json_round_trip():
    ds = _dataset()
    _, record = poison_multi_target(ds, MultiTargetPlan(((0, RAMP), (2, BackdoorSignalSpec("sinusoid", 9, 2))), 0.3, 1))
    back = PoisonRecord.from_json(record.to_json())
    assert back.signals == record.signals
    for t in record.indices:
        np.testing.assert_array_equal(back.indices[t], record.indices[t])
    assert back.fraction == record.fraction and back.seed == record.seed


def test_test_backdoor_excludes_target():
    ds = _dataset()
    attacked = apply_test_backdoor(ds, RAMP, exclude=[1])
    keep = ds.labels != 1
    assert attacked.images[~keep].tobytes() == ds.images[~keep].tobytes()
    np.testing.assert_array_equal(attacked.images[keep], superimpose(ds.images[keep], generate_signal(RAMP, 6, 7)))
    assert attacked.labels.tobytes() == ds.labels.tobytes()


# estimators

def test_poisoner_estimator_matches_function():
    ds = _dataset()
    est = LabelConsistentPoisoner(target_class=2, fraction=0.3, delta=40, seed=7)
    X, y = est.fit_resample(ds.images, ds.labels)
    expected, record = poison_training_set(ds, PoisonPlan(2, 0.3, RAMP, 7))
    np.testing.assert_array_equal(X, expected.images)
    np.testing.assert_array_equal(y, ds.labels)
    np.testing.assert_array_equal(est.poison_indices_, record.indices[2])
    assert est.get_params()["fraction"] == 0.3


def test_trigger_transformer():
    ds = _dataset()
    trig = BackdoorTrigger(kind="ramp", delta=40)
    out = trig.fit_transform(ds.images)
    np.testing.assert_array_equal(out, superimpose(ds.images, generate_signal(RAMP, 6, 7)))
