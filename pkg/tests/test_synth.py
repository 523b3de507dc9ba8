import math

import numpy as np
import pytest

from musicid.errors import UsageError
from musicid.evaluation import evaluate_identification, split_matrix
from musicid.features import featurize_dataset, featurize_session
from musicid.forest import ForestParams
from musicid.ingest import SIGNALS, Condition, SignalKind, drop_delta, serialize_session
from musicid.synth import (
    BASE_STD,
    CohortSpec,
    SubjectProfile,
    generate_cohort,
    generate_session,
    make_profile,
    uniform_cohort,
)


def test_zero_separation_shares_baselines():
    spec = uniform_cohort(6, separation=0.0, seed=3)
    means = [make_profile(u, spec).mean for u in range(6)]
    assert all(np.array_equal(means[0], m) for m in means)


def test_profiles_deterministic():
    spec = uniform_cohort(4, seed=9)
    a, b = make_profile(2, spec), make_profile(2, spec)
    assert np.array_equal(a.mean, b.mean)
    assert all(np.array_equal(a.condition_offset[c], b.condition_offset[c]) for c in a.condition_offset)


def test_separation_sets_rms_gap():
    spec = uniform_cohort(300, separation=3.0, seed=1)
    std = np.array([[BASE_STD[s]] * 4 for s in SIGNALS])
    z = np.stack([make_profile(u, spec).mean / std for u in range(300)])
    diffs = (z[:, None] - z[None, :])[np.triu_indices(300, 1)]
    rms = math.sqrt(float((diffs**2).mean()))
    assert rms == pytest.approx(3.0, rel=0.05)


def test_uninformative_signals_stay_at_base():
    spec = uniform_cohort(5, separation=3.0, informative=("Alpha",), seed=0)
    m = np.stack([make_profile(u, spec).mean for u in range(5)])
    alpha = SIGNALS.index(SignalKind.Alpha)
    others = [i for i in range(6) if i != alpha]
    assert np.all(m[:, others] == m[0, others])
    assert not np.all(m[:, alpha] == m[0, alpha])


def test_white_noise_autocorrelation():
    spec = uniform_cohort(2, rho=0.0, seed=4)
    s = generate_session(make_profile(0, spec), "SameSong", 20000, np.random.default_rng(0))
    x = s.values[:, 2, 1]
    x = x - x.mean()
    r1 = float(np.dot(x[1:], x[:-1]) / np.dot(x, x))
    assert abs(r1) < 4 / math.sqrt(20000)


def test_stationary_moments_by_standard_error():
    rho, n = 0.6, 40000
    spec = uniform_cohort(2, rho=rho, seed=6)
    p = make_profile(1, spec)
    s = generate_session(p, "SameSong", n, np.random.default_rng(1))
    se_factor = math.sqrt((1 + rho) / (1 - rho) / n)
    for si in range(6):
        for ci in range(4):
            x = s.values[:, si, ci]
            sigma = p.std[si, ci]
            assert abs(x.mean() - p.mean[si, ci]) < 4 * sigma * se_factor
            assert abs(x.std() / sigma - 1) < 0.05


def test_tiny_std_collapses_frames():
    mean = np.arange(24, dtype=float).reshape(6, 4) / 7
    p = SubjectProfile("u", mean, np.full((6, 4), 1e-12), np.full((6, 4), 0.5), {})
    s = drop_delta(generate_session(p, "SameSong", 300, np.random.default_rng(2)))
    X = featurize_session(s).X.reshape(14, 20, 4)
    mu = np.swapaxes(mean[1:], 0, 1).reshape(20)
    for stat in range(3):
        assert np.allclose(X[:, :, stat], mu[None, :], atol=1e-9, rtol=0)


def test_condition_shift_offsets():
    spec = uniform_cohort(3, condition_shift=2.0, shift_fraction=0.5, seed=1)
    p = make_profile(0, spec)
    off = p.condition_offset[Condition.FavoriteSong]
    assert np.count_nonzero(off) == 12
    assert np.allclose(np.abs(off[off != 0]) / p.std[off != 0], 2.0)
    assert not np.any(p.condition_offset[Condition.SameSong])


def test_paper_shape_frame_counts():
    m = featurize_dataset(generate_cohort(CohortSpec(seed=0)))
    for cond in ("SameSong", "FavoriteSong"):
        train, test = split_matrix(m.where_condition(cond))
        assert (len(train), len(test)) == (682, 186)


def test_two_users_one_session():
    sessions = generate_cohort(uniform_cohort(2, sessions=1, conditions=("SameSong",)))
    assert len(featurize_dataset(sessions)) == 28


def test_byte_identical_cohorts():
    spec = uniform_cohort(3, sessions=2, seed=12)
    a = b"".join(serialize_session(s) for s in generate_cohort(spec))
    b = b"".join(serialize_session(s) for s in generate_cohort(spec))
    assert a == b
    other = b"".join(serialize_session(s) for s in generate_cohort(uniform_cohort(3, sessions=2, seed=13)))
    assert a != other


def test_spec_validation():
    with pytest.raises(UsageError):
        uniform_cohort(1)
    with pytest.raises(UsageError):
        uniform_cohort(3, rho=1.0)
    with pytest.raises(UsageError):
        uniform_cohort(3, samples_per_session=20)
    with pytest.raises(UsageError):
        CohortSpec(n_users=3, sessions_per_user=(1, 1))


def test_separation_trend():
    params = ForestParams(n_trees=15, seed=0)
    levels = (0.0, 1.0, 3.0)
    mean_acc = []
    for sep in levels:
        accs = []
        for seed in range(5):
            spec = uniform_cohort(8, sessions=2, separation=sep, seed=seed, conditions=("SameSong",))
            train, test = split_matrix(featurize_dataset(generate_cohort(spec)))
            accs.append(evaluate_identification(train, test, params).accuracy)
        mean_acc.append(float(np.mean(accs)))
    assert mean_acc[0] <= mean_acc[1] <= mean_acc[2]
    assert mean_acc[2] > 0.9
