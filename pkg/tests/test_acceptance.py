"""Acceptance criteria 1-9.

Each test prints one ``PASS`` / ``FAIL`` line (visible with ``pytest -v -s``
or in the terminal summary) and then asserts the criterion.
"""

import hashlib
import io
import time
from fractions import Fraction

import numpy as np
import pytest

from helmetwatch.centrist import census_transform, extract_feature, extract_features, superblock_mass
from helmetwatch.classifier.bootstrap import bootstrap_train
from helmetwatch.classifier.hik import dual_objective, fit_hik, hik_fast_table, hik_matrix, smo
from helmetwatch.classifier.linear import fit_linear
from helmetwatch.classifier.modelio import dumps_model
from helmetwatch.classifier.models import HikModel, TrainConfig
from helmetwatch.detector import Detection, full_frame_plan, nms, plan_features
from helmetwatch.evalharness.metrics import ScoredOutcome, evaluate, match_pairs, pr_curve, roc_auc
from helmetwatch.evalharness.synthetic import (
    default_test_scene, generate_synthetic, negative_images, positive_patches,
)
from helmetwatch.evalharness.tables import detection_writer
from helmetwatch.imagery import otsu_threshold
from helmetwatch.motion import ViBeParams, init_model, segment, update
from helmetwatch.pipeline import HelmetPipeline

from test_classifier import TOY_X, TOY_Y, grid_dual_max
from test_detector import nms_oracle
from test_imagery import brute_otsu
from test_metrics import auc_oracle, match_oracle, pr_oracle, roc_oracle
from test_motion import naive_segment

LINES = []


@pytest.fixture(autouse=True, scope="module")
def _summary():
    yield
    print("\n" + "\n".join(LINES))


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    LINES.append(line)
    print(line)
    assert ok, line


def ct_bits(p):
    c = int(p[1, 1])
    code = 0
    for v in (p[0, 0], p[0, 1], p[0, 2], p[1, 0], p[1, 2], p[2, 0], p[2, 1], p[2, 2]):
        code = (code << 1) | (c >= int(v))
    return code


# -- 1 -------------------------------------------------------------------------

def test_criterion_1_census_transform():
    worked = np.array([[32, 64, 96], [32, 64, 96], [32, 32, 96]], dtype=np.uint8)
    patches = np.random.default_rng(1).integers(0, 256, size=(10_000, 3, 3), dtype=np.uint8)
    t0 = time.perf_counter()
    ct0 = int(census_transform(worked)[1, 1])
    got = [int(census_transform(p)[1, 1]) for p in patches]
    elapsed = time.perf_counter() - t0
    want = [ct_bits(p) for p in patches]
    mismatches = sum(a != b for a, b in zip(got, want))
    ok = ct0 == 214 and mismatches == 0 and elapsed < 1.0
    report(1, ok, f"worked CT={ct0}, {mismatches}/10000 mismatches, {elapsed:.2f}s (< 1s)")


# -- 2 -------------------------------------------------------------------------

def test_criterion_2_feature_shape_and_mass():
    patches = np.random.default_rng(2).integers(0, 256, size=(1000, 108, 36), dtype=np.uint8)
    t0 = time.perf_counter()
    feats = extract_features(list(patches))
    elapsed = time.perf_counter() - t0
    mass = superblock_mass()
    shape_ok = feats.shape == (1000, 6144)
    mass_ok = bool(np.all(feats.reshape(1000, 24, 256).sum(axis=2) == mass[None, :]))
    ok = shape_ok and mass_ok and elapsed < 10.0
    report(2, ok, f"shape {feats.shape}, segment masses fixed: {mass_ok}, {elapsed:.2f}s (< 10s)")


# -- 3 -------------------------------------------------------------------------

def vibe_outputs():
    """Everything criterion 3 observes, plus a digest of it for determinism."""
    digest = hashlib.sha256()
    rng = np.random.default_rng(3)

    # (a) static noise-free sequence
    yy, xx = np.mgrid[0:48, 0:64]
    static = (90 + 4 * ((3 * xx + yy) % 5)).astype(np.uint8)
    model = init_model(static, ViBeParams(seed=11))
    fg_after_first = 0
    for _ in range(100):
        mask = segment(model, static)
        fg_after_first += int(mask.sum())
        update(model, static, mask)
        digest.update(np.packbits(mask).tobytes())
    digest.update(model.samples.tobytes())

    # (b) random model / frame pairs against the naive loop
    mismatched = 0
    for k in range(100):
        p = ViBeParams(n_samples=int(rng.integers(2, 21)), radius=int(rng.integers(1, 60)),
                       min_matches=int(rng.integers(1, 3)), seed=k)
        m = init_model(rng.integers(0, 256, size=(6, 7), dtype=np.uint8), p)
        m.samples = rng.integers(0, 256, size=m.samples.shape, dtype=np.uint8)
        frame = rng.integers(0, 256, size=(6, 7), dtype=np.uint8)
        fast = segment(m, frame)
        mismatched += int(not np.array_equal(fast, naive_segment(m, frame)))
        digest.update(np.packbits(fast).tobytes())

    # (c) own-update rate at beta = 16
    const = np.full((24, 24), 128, dtype=np.uint8)
    model = init_model(const, ViBeParams(subsample=16, seed=12))
    bg = np.zeros(const.shape, dtype=bool)
    own = 0
    for _ in range(10_000):
        own += update(model, const, bg).own
    rate = own / (10_000 * const.size)
    digest.update(repr(own).encode())
    digest.update(model.samples.tobytes())
    return fg_after_first, mismatched, rate, digest.hexdigest()


def test_criterion_3_vibe():
    t0 = time.perf_counter()
    fg, mismatched, rate, _ = vibe_outputs()
    elapsed = time.perf_counter() - t0
    rate_ok = abs(rate - 1 / 16) <= 0.1 / 16
    ok = fg == 0 and mismatched == 0 and rate_ok and elapsed < 30.0
    report(3, ok, f"(a) fg after frame 1 = {fg}, (b) {mismatched}/100 mismatches, "
                  f"(c) rate {rate:.5f} vs {1 / 16:.5f}, {elapsed:.1f}s (< 30s)")


# -- 4 -------------------------------------------------------------------------

def test_criterion_4_otsu():
    rng = np.random.default_rng(4)
    hists = []
    for _ in range(1000):
        kind = rng.integers(0, 3)
        if kind == 0:
            h = rng.integers(0, 1000, size=256)
        elif kind == 1:
            h = np.zeros(256, dtype=np.int64)
            h[rng.integers(0, 256, size=rng.integers(1, 6))] = rng.integers(1, 50)
        else:
            h = np.bincount(np.clip(rng.normal(rng.uniform(30, 220), 25, 400), 0, 255).astype(int),
                            minlength=256)
        hists.append(h)
    t0 = time.perf_counter()
    got = [otsu_threshold(h) for h in hists]
    elapsed = time.perf_counter() - t0
    mismatches = sum(g != brute_otsu(h) for g, h in zip(got, hists))
    report(4, mismatches == 0 and elapsed < 5.0,
           f"{mismatches}/1000 mismatches vs exhaustive split search, {elapsed:.2f}s (< 5s)")


# -- 5 -------------------------------------------------------------------------

def solver_outputs():
    """Training runs of both solvers, toy dual check and fast-table check."""
    digest = hashlib.sha256()
    rng = np.random.default_rng(5)
    residuals = []
    feats = extract_features(positive_patches(60, seed=50))
    negs = extract_features([p for img in negative_images(6, seed=51, height=108, width=216)
                             for p in (img[:, :36], img[:, 90:126], img[:, 180:216])])
    cfg = TrainConfig()
    for k in range(6):
        pos = feats[rng.choice(len(feats), size=30, replace=False)]
        neg = negs[rng.choice(len(negs), size=12, replace=False)]
        lin = fit_linear(pos, neg, cfg)
        hk = fit_hik(pos, neg, cfg)
        residuals += [lin.kkt_residual, hk.kkt_residual]
        digest.update(lin.model.weights.tobytes() + hk.model.alphas.tobytes())
    for k in range(20):
        pos = rng.integers(0, 40, size=(int(rng.integers(3, 40)), 24))
        neg = rng.integers(0, 40, size=(int(rng.integers(3, 40)), 24))
        c = float(rng.uniform(0.1, 50))
        lin = fit_linear(pos, neg, TrainConfig(c=c))
        hk = fit_hik(pos, neg, TrainConfig(c_hik=c))
        residuals += [lin.kkt_residual, hk.kkt_residual]
        digest.update(lin.model.weights.tobytes() + hk.model.alphas.tobytes())

    k = hik_matrix(TOY_X)
    toy_gaps = []
    for c in (0.05, 0.5, 5.0):
        alpha, _, _ = smo(k, TOY_Y, c, tol=1e-10, max_iter=10_000)
        oracle, _ = grid_dual_max(k, TOY_Y, c, equality=True)
        toy_gaps.append(abs(dual_objective(k, TOY_Y, alpha) - oracle))
        digest.update(alpha.tobytes())

    # fast table of a trained model, on CENTRIST features it has not seen
    model = fit_hik(feats[:40], negs, cfg).model
    clutter = negative_images(1, seed=53)[0]
    plan = full_frame_plan(clutter.shape)
    windows = plan_features(clutter, plan, rng.choice(len(plan), size=50, replace=False))
    test = np.concatenate([extract_features(positive_patches(50, seed=52)), windows])
    assert len(test) == 100
    direct = model.decision_direct(test)
    model.table = hik_fast_table(model)
    table_err = float(np.abs(model.decision(test) - direct).max())
    digest.update(model.table.values.tobytes())
    return residuals, toy_gaps, table_err, digest.hexdigest()


def test_criterion_5_solvers():
    t0 = time.perf_counter()
    residuals, gaps, table_err, _ = solver_outputs()
    elapsed = time.perf_counter() - t0
    ok = max(residuals) <= 1e-3 and max(gaps) <= 1e-6 and table_err <= 1e-9 and elapsed < 60.0
    report(5, ok, f"max KKT residual {max(residuals):.2e} over {len(residuals)} runs, "
                  f"toy dual gap {max(gaps):.1e}, table error {table_err:.1e}, {elapsed:.1f}s (< 60s)")


# -- 6 -------------------------------------------------------------------------

def test_criterion_6_nms_matching_curves():
    rng = np.random.default_rng(6)

    def boxes(n):
        return [tuple(int(v) for v in (rng.integers(0, 40), rng.integers(0, 40),
                                       rng.integers(2, 20), rng.integers(2, 30))) for _ in range(n)]

    t0 = time.perf_counter()
    bad = {"nms": 0, "match": 0, "auc": 0, "pr": 0, "roc": 0}
    for _ in range(1000):
        dets = [Detection(*b, score=float(rng.integers(0, 6))) for b in boxes(int(rng.integers(0, 10)))]
        thr = float(rng.choice([0.3, 0.45, 0.6]))
        bad["nms"] += nms(dets, thr) != nms_oracle(dets, thr)
        truth = boxes(int(rng.integers(0, 6)))
        bad["match"] += match_pairs(dets, truth, 0.5) != match_oracle(dets, truth, 0.5)

        n = int(rng.integers(2, 40))
        outs = [ScoredOutcome(float(s), bool(l)) for s, l in
                zip(rng.integers(0, 8, size=n) / 2.0, rng.integers(0, 2, size=n))]
        outs[0] = ScoredOutcome(outs[0].score, True)
        outs[1] = ScoredOutcome(outs[1].score, False)
        roc = roc_auc(outs)
        bad["auc"] += abs(roc.auc - float(auc_oracle(outs))) > 1e-9
        bad["roc"] += roc.points() != roc_oracle(outs)
        bad["pr"] += pr_curve(outs).points() != pr_oracle(outs)
    elapsed = time.perf_counter() - t0
    ok = not any(bad.values()) and elapsed < 30.0
    report(6, ok, f"mismatches over 1000 instances {bad}, {elapsed:.1f}s (< 30s)")


# -- 7, 8 ------------------------------------------------------------------------

def end_to_end():
    t0 = time.perf_counter()
    pos = extract_features(positive_patches(200, seed=1))
    neg = negative_images(50, seed=2)
    result = bootstrap_train(pos, neg, TrainConfig(rounds=3))
    train_s = time.perf_counter() - t0

    frames, truth = generate_synthetic(default_test_scene(seed=7))
    pipe = HelmetPipeline(result.model)
    buf = io.StringIO()
    write = detection_writer(buf, with_verdicts=True)
    rows = []
    t1 = time.perf_counter()
    for fid, frame in enumerate(frames, start=1):
        res = pipe.process(frame, fid)
        for det, v in zip(res.detections, res.verdicts):
            write(fid, det, v)
            rows.append((fid, det, v))
    run_s = time.perf_counter() - t1

    class Row:
        def __init__(self, fid, det, v):
            self.frame_id, self.bbox, self.score, self.ratio = fid, det.bbox, det.score, v.ratio

    report_ = evaluate([Row(*r) for r in rows], truth, 0.5)
    return {
        "model": dumps_model(result.model),
        "csv": buf.getvalue().encode(),
        "report": report_,
        "history": result.history,
        "hik_kkt": result.hik_kkt_residual,
        "train_s": train_s,
        "run_s": run_s,
        "total_s": time.perf_counter() - t0,
        "n_frames": len(frames),
    }


@pytest.fixture(scope="module")
def e2e():
    return end_to_end()


def test_criterion_7_end_to_end(e2e):
    r = e2e["report"]
    kkt = max([h.kkt_residual for h in e2e["history"]] + [e2e["hik_kkt"]])
    helmet_auc = r.helmet_roc.auc if r.helmet_roc else float("nan")
    ok = r.acc_pd >= 0.90 and helmet_auc >= 0.95 and e2e["total_s"] < 300 and kkt <= 1e-3
    report(7, ok, f"Acc_pd {r.acc_pd:.3f} (T={r.t}, F={r.f}; recall {r.recall:.3f}, missed {r.missed}), "
                  f"helmet AUC {helmet_auc:.4f}, KKT {kkt:.1e}, train {e2e['train_s']:.0f}s, "
                  f"total {e2e['total_s']:.0f}s (< 300s)")


def test_criterion_8_throughput(e2e):
    fps = e2e["n_frames"] / e2e["run_s"]
    report(8, fps >= 10.0, f"{fps:.1f} frames/s on 640x480 with the trained model (>= 10)")


# -- 9 -------------------------------------------------------------------------

def test_criterion_9_determinism(e2e):
    v1, v2 = vibe_outputs()[-1], vibe_outputs()[-1]
    s1, s2 = solver_outputs()[-1], solver_outputs()[-1]
    again = end_to_end()
    same = {
        "vibe": v1 == v2,
        "solvers": s1 == s2,
        "model": again["model"] == e2e["model"],
        "detections": again["csv"] == e2e["csv"],
    }
    report(9, all(same.values()), f"byte-identical reruns {same}")
