import dataclasses
import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from helmetwatch.centrist import FEATURE_DIM
from helmetwatch.classifier import (
    CascadeModel, FeatureError, HikModel, LinearModel, TrainConfig, cascade_batch, cascade_score,
    fit_hik, fit_linear, hik, hik_fast_table, hik_matrix, kkt_residuals,
)
from helmetwatch.classifier.bootstrap import bootstrap_train
from helmetwatch.classifier.hik import dual_objective, smo
from helmetwatch.classifier.modelio import (
    FormatError, ModelValidationError, dumps_model, load_model, loads_model, save_model,
)


# -- oracles -----------------------------------------------------------------

def grid_dual_max(kernel, y, c, equality, steps=21, rounds=40):
    """Maximise the SVM dual by exhaustive grid search over the box, zooming in
    on the best grid point. With ``equality`` the last coordinate is solved
    from ``y'a = 0`` and grid points leaving the box are discarded."""
    n = len(y)
    free = n - 1 if equality else n
    lo, hi = np.zeros(free), np.full(free, float(c))
    best_val, best_a = -np.inf, None
    for _ in range(rounds):
        axes = [np.linspace(lo[i], hi[i], steps) for i in range(free)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, free)
        if equality:
            last = -(pts @ y[:-1]) / y[-1]
            ok = (last >= -1e-15) & (last <= c + 1e-15)
            pts = np.column_stack([pts[ok], np.clip(last[ok], 0, c)])
        ay = pts * y
        vals = pts.sum(axis=1) - 0.5 * np.einsum("ij,jk,ik->i", ay, kernel, ay)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_a = vals[k], pts[k]
        span = (hi - lo) / (steps - 1)
        centre = best_a[:free]
        lo = np.maximum(centre - 2 * span, 0.0)
        hi = np.minimum(centre + 2 * span, c)
    return best_val, best_a


TOY_X = np.array([[3, 1, 0], [2, 2, 1], [0, 1, 3], [1, 0, 2]])
TOY_Y = np.array([1.0, 1.0, -1.0, -1.0])


# -- kernel ------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.int64, 12, elements=st.integers(0, 50)),
       hnp.arrays(np.int64, 12, elements=st.integers(0, 50)))
def test_hik_properties(x, z):
    assert hik(x, x) == x.sum()
    assert hik(x, z) == hik(z, x) >= 0


def test_hik_disjoint_support():
    assert hik([1, 0, 4], [0, 7, 0]) == 0


def test_hik_matrix_matches_pairwise(rng):
    a = rng.integers(0, 20, size=(6, 9))
    b = rng.integers(0, 20, size=(4, 9))
    ref = np.array([[hik(x, z) for z in b] for x in a])
    assert np.array_equal(hik_matrix(a, b), ref)
    ref_sym = np.array([[hik(x, z) for z in a] for x in a])
    assert np.array_equal(hik_matrix(a), ref_sym)


# -- KKT -----------------------------------------------------------------------

def test_kkt_residual_cases():
    alpha = np.array([0.0, 0.5, 1.0, 0.0, 1.0])
    margins = np.array([1.5, 1.2, 0.3, 0.4, 1.7])
    r = kkt_residuals(alpha, margins, c=1.0)
    assert r == pytest.approx([0.0, 0.2, 0.0, 0.6, 0.7])


# -- linear ----------------------------------------------------------------------

def test_linear_toy_signs_and_dual():
    neg = np.array([[0.0, 0.0], [0.0, 1.0]])
    pos = np.array([[3.0, 3.0], [3.0, 4.0]])
    cfg = TrainConfig(c=1.0, kkt_tol=1e-6)
    fit = fit_linear(pos, neg, cfg)
    assert np.all(fit.model.decision(pos) > 0) and np.all(fit.model.decision(neg) < 0)
    assert fit.kkt_residual <= 1e-6
    # same normalised problem solved by grid search
    x = np.concatenate([pos, neg])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    scale = np.sqrt(np.mean((x * x).sum(axis=1)))
    k = (x / scale) @ (x / scale).T + 1.0
    oracle, _ = grid_dual_max(k, y, 1.0, equality=False)
    assert dual_objective(k, y, fit.alpha) == pytest.approx(oracle, abs=1e-6)


def test_linear_hard_margin_limit():
    neg = np.array([[0.0, 0.0], [0.0, 1.0]])
    pos = np.array([[3.0, 3.0], [3.0, 4.0]])
    fit = fit_linear(pos, neg, TrainConfig(c=1e6))
    y = np.array([1, 1, -1, -1])
    margins = y * fit.model.decision(np.concatenate([pos, neg]))
    assert np.maximum(0.0, 1.0 - margins).sum() <= 1e-3


def test_linear_conflicting_duplicates_terminate():
    x = np.array([[1.0, 2.0]])
    fit = fit_linear(x, x.copy(), TrainConfig(c=1.0))
    assert np.all(np.isfinite(fit.model.weights)) and np.isfinite(fit.model.bias)
    assert fit.kkt_residual <= 1e-3


def test_linear_needs_both_classes():
    with pytest.raises(FeatureError):
        fit_linear(np.zeros((0, 3)), np.ones((2, 3)), TrainConfig())


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 20.0))
def test_linear_kkt_certificate(seed, c):
    r = np.random.default_rng(seed)
    pos = r.integers(0, 30, size=(int(r.integers(2, 25)), 16))
    neg = r.integers(0, 30, size=(int(r.integers(2, 25)), 16)) + r.integers(0, 5, size=16)
    assert fit_linear(pos, neg, TrainConfig(c=c)).kkt_residual <= 1e-3


def test_linear_is_deterministic(rng):
    pos = rng.integers(0, 9, size=(20, 8))
    neg = rng.integers(0, 9, size=(20, 8))
    a = fit_linear(pos, neg, TrainConfig())
    b = fit_linear(pos, neg, TrainConfig())
    assert a.model.weights.tobytes() == b.model.weights.tobytes() and a.model.bias == b.model.bias


# -- HIK SVM ---------------------------------------------------------------------

@pytest.mark.parametrize("c", [0.05, 0.3, 2.0])
def test_smo_toy_matches_grid_oracle(c):
    k = hik_matrix(TOY_X)
    alpha, rho, _ = smo(k, TOY_Y, c, tol=1e-10, max_iter=10_000)
    oracle, _ = grid_dual_max(k, TOY_Y, c, equality=True)
    assert dual_objective(k, TOY_Y, alpha) == pytest.approx(oracle, abs=1e-6)
    assert abs(alpha @ TOY_Y) < 1e-12


def test_fit_hik_toy_matches_grid_oracle():
    cfg = TrainConfig(c_hik=1.0, kkt_tol=1e-8)
    fit = fit_hik(TOY_X[:2], TOY_X[2:], cfg)
    k = hik_matrix(TOY_X) / fit.kernel_scale
    oracle, _ = grid_dual_max(k, TOY_Y, 1.0, equality=True)
    assert dual_objective(k, TOY_Y, fit.alpha) == pytest.approx(oracle, abs=1e-6)
    scores = fit.model.decision_direct(TOY_X)
    assert np.all(np.sign(scores) == TOY_Y)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 50.0))
def test_hik_kkt_certificate(seed, c):
    r = np.random.default_rng(seed)
    pos = r.integers(0, 30, size=(int(r.integers(2, 25)), 16))
    neg = r.integers(0, 30, size=(int(r.integers(2, 25)), 16))
    assert fit_hik(pos, neg, TrainConfig(c_hik=c)).kkt_residual <= 1e-3


def test_hik_rejects_negative_features():
    with pytest.raises(FeatureError):
        fit_hik(np.array([[1, -1]]), np.array([[0, 1]]), TrainConfig())


def test_fast_table_single_sv():
    sv = np.array([[3, 0, 5]])
    m = HikModel(sv, np.array([1.0]), bias=0.0)
    t = hik_fast_table(m)
    for d in range(3):
        for v in range(sv[0, d] + 1):
            assert t.values[t.offsets[d] + v] == min(v, sv[0, d])


def test_fast_table_empty_and_non_integer():
    m = HikModel(np.zeros((0, 4), dtype=np.int32), np.zeros(0), bias=1.5)
    t = hik_fast_table(m)
    assert not t.values.any()
    assert t.predict(np.array([[1, 2, 3, 4]]), 1.5)[0] == 1.5
    with pytest.raises(FeatureError):
        hik_fast_table(HikModel(np.array([[0.5, 1.0]]), np.array([1.0]), bias=0.0))


def test_fast_table_matches_direct(rng):
    sv = rng.integers(0, 60, size=(30, FEATURE_DIM)).astype(np.int32)
    m = HikModel(sv, rng.normal(size=30), bias=0.25)
    m.table = hik_fast_table(m)
    feats = rng.integers(0, 90, size=(100, FEATURE_DIM)).astype(np.int32)
    assert np.abs(m.decision(feats) - m.decision_direct(feats)).max() <= 1e-9


# -- cascade -------------------------------------------------------------------

def _toy_cascade(theta1=0.0, theta2=0.0):
    sv = np.array([[2, 0, 1], [0, 3, 1]])
    hik_m = HikModel(sv, np.array([1.0, -1.0]), bias=0.0, threshold=theta2)
    lin = LinearModel(np.array([1.0, 0.0, 0.0]), 0.0, threshold=theta1)
    return CascadeModel(lin, hik_m, window=(108, 36), grid=(9, 4))


def test_cascade_one_hot_and_short_circuit():
    m = _toy_cascade(theta1=1.5)
    r = cascade_score(m, np.array([1, 5, 0]))
    assert r == (False, 1.0, False)
    r = cascade_score(m, np.array([2, 0, 1]))
    assert r.hik_evaluated and r.score == pytest.approx(hik([2, 0, 1], [2, 0, 1]) - hik([2, 0, 1], [0, 3, 1]))


def test_cascade_without_linear_gate_is_hik_sign(rng):
    m = _toy_cascade(theta1=-np.inf)
    for f in rng.integers(0, 5, size=(30, 3)):
        assert cascade_score(m, f).accepted == (m.hik.decision_direct(f)[0] >= 0)


def test_cascade_dimension_mismatch():
    with pytest.raises(FeatureError):
        cascade_score(_toy_cascade(), np.zeros(4))


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 2), st.floats(0, 2))
def test_cascade_threshold_monotonicity(t1, t2, d1, d2):
    feats = np.random.default_rng(4).integers(0, 5, size=(50, 3))
    loose, *_ = cascade_batch(_toy_cascade(t1, t2), feats)
    strict, *_ = cascade_batch(_toy_cascade(t1 + d1, t2 + d2), feats)
    assert np.all(loose | ~strict)


def test_cascade_batch_matches_scalar(rng):
    m = _toy_cascade(theta1=1.0, theta2=-0.5)
    feats = rng.integers(0, 5, size=(40, 3))
    acc, scores, hik_done = cascade_batch(m, feats)
    for i, f in enumerate(feats):
        r = cascade_score(m, f)
        assert (acc[i], scores[i], hik_done[i]) == (r.accepted, pytest.approx(r.score), r.hik_evaluated)


# -- bootstrap -------------------------------------------------------------------

def test_bootstrap_kkt_and_history(small_training):
    assert len(small_training.history) == 2
    for stats in small_training.history:
        assert stats.kkt_residual <= 1e-3
    assert small_training.hik_kkt_residual <= 1e-3


def test_single_round_equals_plain_training(small_corpus):
    pos, neg = small_corpus
    cfg = TrainConfig(rounds=1, negatives_per_round=60, seed=1)
    res = bootstrap_train(pos, neg, cfg)
    plain = fit_linear(pos, res.negatives, cfg).model
    assert res.model.linear.weights.tobytes() == plain.weights.tobytes()
    assert res.model.linear.bias == plain.bias


def test_hard_examples_score_positive(small_corpus, small_training):
    pos, neg = small_corpus
    first = bootstrap_train(pos, neg, TrainConfig(rounds=1, negatives_per_round=60, seed=1))
    added = small_training.negatives[len(first.negatives):]
    assert len(added) == small_training.history[1].added > 0
    assert np.all(first.model.linear.decision(added) >= 0)
    assert np.all(small_training.hard_example_scores[0] >= 0)


def test_bootstrap_is_deterministic(small_corpus, small_training):
    pos, neg = small_corpus
    again = bootstrap_train(pos, neg, TrainConfig(rounds=2, negatives_per_round=60, seed=1))
    assert dumps_model(again.model) == dumps_model(small_training.model)


def test_bootstrap_errors(small_corpus):
    pos, neg = small_corpus
    with pytest.raises(ValueError):
        bootstrap_train(pos[:0], neg, TrainConfig())
    with pytest.raises(ValueError):
        bootstrap_train(pos, [], TrainConfig())
    with pytest.raises(ValueError):
        bootstrap_train(pos, [np.zeros((20, 20), dtype=np.uint8)], TrainConfig())


# -- model files -------------------------------------------------------------------

def test_model_round_trip(tmp_path, small_training, rng):
    model = small_training.model
    path = tmp_path / "m.hwc"
    save_model(model, path)
    back = load_model(path)
    assert dumps_model(back) == path.read_bytes()
    feats = rng.integers(0, 40, size=(100, FEATURE_DIM)).astype(np.int32)
    assert np.array_equal(back.hik.decision(feats), model.hik.decision(feats))
    assert np.array_equal(back.linear.decision(feats), model.linear.decision(feats))


def test_model_truncation_and_corruption(small_training):
    data = dumps_model(small_training.model)
    for cut in (0, 3, 10, 40, len(data) // 2, len(data) - 1):
        with pytest.raises(FormatError):
            loads_model(data[:cut])
    flipped = bytearray(data)
    flipped[100] ^= 1
    with pytest.raises(FormatError):
        loads_model(bytes(flipped))
    with pytest.raises(FormatError):
        loads_model(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        loads_model(data + b"\0")


def _patch_header(data, offset, fmt, value):
    body = bytearray(data[:-4])
    struct.pack_into(fmt, body, offset, value)
    return bytes(body) + struct.pack("<I", zlib.crc32(bytes(body)))


def test_model_validation_errors(small_training):
    data = dumps_model(small_training.model)
    with pytest.raises(FormatError):
        loads_model(_patch_header(data, 4, "<I", 2))
    for offset, field in ((8, "window"), (16, "grid"), (24, "dim")):
        with pytest.raises(ModelValidationError) as err:
            loads_model(_patch_header(data, offset, "<I", 5))
        assert err.value.field == field
    with pytest.raises(ModelValidationError) as err:
        loads_model(_patch_header(data, 44, "<d", float("nan")))
    assert err.value.field == "linear.weights"


def test_float_support_vectors_round_trip(rng):
    sv = rng.random((3, FEATURE_DIM))
    model = CascadeModel(LinearModel(rng.normal(size=FEATURE_DIM), 0.5),
                         HikModel(sv, rng.normal(size=3), bias=-1.0))
    back = loads_model(dumps_model(model))
    assert back.hik.support_vectors.dtype == np.float64 and back.hik.table is None
    assert np.array_equal(back.hik.support_vectors, sv)
    assert dataclasses.replace(back.linear).bias == 0.5
