"""Acceptance criteria P1-P8, one test each.

Each test records a one-line verdict that is printed in the pytest terminal
summary (run with ``pytest tests/test_acceptance.py``).
"""

import glob
import math
import os
import time
import warnings

import numpy as np
import pytest

from conftest import record
from oracles import enumerate_binary
from test_denoiser import end_to_end
from wavegate.cli import run_sweep
from wavegate.dataset import (DESK_SPLIT, REFERENCE_SPLIT, fit_split, load_record,
                              make_corpus, synthetic_windows, window)
from wavegate.denoiser import DenoiserModel, TrainConfig, binary_oracle, relaxed_oracle, train
from wavegate.errors import MaxLevelWarning
from wavegate.metrics import EvalSummary, evaluate, psnr
from wavegate.noise import DEFAULT_SPECS, NoiseSpec
from wavegate.wavelet import subsignal_matrix, wavedec, waverec

ORDERS = range(1, 11)
LEVELS = range(1, 9)
LENGTHS = (256, 777, 1000, 1024)
SEEDS = range(5)
CORPUS_SEED = 2024
BIDMC_ENV = "WAVEGATE_BIDMC_DIR"

# every summary produced here is re-checked under P7
SUMMARIES = []


def _sweep(fn):
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxLevelWarning)
        for order in ORDERS:
            for level in LEVELS:
                for n in LENGTHS:
                    for seed in SEEDS:
                        x = np.random.default_rng(seed).standard_normal(n)
                        worst = max(worst, fn(x, order, level))
    return worst


def test_p1_perfect_reconstruction():
    t0 = time.perf_counter()
    worst = _sweep(lambda x, o, l: np.max(np.abs(waverec(wavedec(x, o, l)) - x)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 30
    record("P1", ok, f"max |err| {worst:.2e} (< 1e-8), {elapsed:.1f} s (< 30 s)")
    assert ok


def test_p2_subsignal_additivity():
    worst = _sweep(
        lambda x, o, l: np.max(np.abs(subsignal_matrix(x, o, l).matrix.sum(axis=1) - x)))
    ok = worst < 1e-8
    record("P2", ok, f"max |sum s_i - y| {worst:.2e} (< 1e-8)")
    assert ok


def test_p3_gradient_check():
    t0 = time.perf_counter()
    worst = max(end_to_end(seed) for seed in range(10))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 10
    record("P3", ok, f"max rel err {worst:.2e} (< 1e-4), {elapsed:.1f} s (< 10 s)")
    assert ok


def test_p4_oracle_dominance():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    gap, mismatches = -math.inf, 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxLevelWarning)
        for _ in range(200):
            level = int(rng.integers(1, 9))
            order = int(rng.integers(1, 11))
            n = int(rng.integers(64, 513))
            y = rng.uniform(0, 1, n)
            x = np.clip(y + rng.normal(0, rng.uniform(0.05, 0.5), n), 0, 1)
            S = subsignal_matrix(y, order, level).matrix
            assert S.shape[1] <= 9
            _, rel = relaxed_oracle(S, x)
            a_bin, v_bin = binary_oracle(S, x)
            a_ref, v_ref = enumerate_binary(S, x)
            gap = max(gap, rel - v_bin)
            if not np.array_equal(a_bin, a_ref) or abs(v_bin - v_ref) > 1e-12 * v_ref:
                mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = gap <= 1e-9 and mismatches == 0 and elapsed < 60
    record("P4", ok, f"max(relaxed - binary) {gap:.2e} (<= 1e-9), "
                     f"{mismatches} enumerator mismatches, {elapsed:.1f} s (< 60 s)")
    assert ok


def _desk_corpus(spec):
    clean = synthetic_windows(sum(DESK_SPLIT.values()), seed=CORPUS_SEED)
    return make_corpus(clean, [spec], DESK_SPLIT, seed=CORPUS_SEED)


@pytest.mark.slow
def test_p5_desk_denoising():
    limits = {"gaussian": 0.7, "salt_pepper": 0.6}
    t0 = time.perf_counter()
    ratios = {}
    for kind, limit in limits.items():
        tr, va, te = _desk_corpus(NoiseSpec(kind))
        cfg = TrainConfig(wavelet="db4", level=5)
        params, _ = train(tr, va, cfg)
        summary = evaluate(DenoiserModel(params, cfg.wavelet, cfg.level), te)
        SUMMARIES.append(summary)
        ratios[kind] = summary.mse_denoised / summary.mse_noisy
    elapsed = time.perf_counter() - t0
    ok = all(ratios[k] <= limits[k] for k in limits) and elapsed < 600
    record("P5", ok, ", ".join(f"{k} ratio {r:.3f} (<= {limits[k]})" for k, r in ratios.items())
           + f", {elapsed:.0f} s (< 600 s)")
    assert ok


@pytest.mark.slow
def test_p6_depth_trend(tmp_path):
    tr, va, te = _desk_corpus(NoiseSpec("salt_pepper"))
    for name, ds in zip(("train", "val", "test"), (tr, va, te)):
        ds.save(tmp_path / f"{name}.npz")
    t0 = time.perf_counter()
    rows = run_sweep("level", ["2", "5", "8"], TrainConfig(wavelet="db4"), tmp_path)
    elapsed = time.perf_counter() - t0
    mse = {int(r["value"]): r["mse_denoised"] for r in rows if r["noise_kind"] == "salt_pepper"}
    ok = mse[8] <= mse[2] and elapsed < 1800
    record("P6", ok, f"MSE L2 {mse[2]:.5f}, L5 {mse[5]:.5f}, L8 {mse[8]:.5f} "
                     f"(L8 <= L2), {elapsed:.0f} s (< 1800 s)")
    assert ok


def test_p7_metric_identities(rng):
    exact = psnr(1.0) == 0.0 and psnr(0.01) == 20.0
    clean = rng.uniform(0, 1, (8, 128))
    noisy = clean + 0.1 * rng.standard_normal((8, 128))
    from wavegate.dataset import WindowedDataset
    from wavegate.network import init_network
    data = WindowedDataset(clean, noisy, [s.kind for s in DEFAULT_SPECS] * 2)
    own = evaluate(DenoiserModel(init_network(128, 4, seed=0), "db2", 3), data)
    summaries = [own, *SUMMARIES]
    failures = 0
    for s in summaries:
        assert isinstance(s, EvalSummary)
        try:
            s.check()
        except AssertionError:
            failures += 1
    ok = exact and failures == 0
    record("P7", ok, f"psnr(1)={psnr(1.0)}, psnr(0.01)={psnr(0.01)}, "
                     f"{len(summaries) - failures}/{len(summaries)} summaries consistent")
    assert ok


P8_BANDS = {"salt_pepper": (40.0, 80.0), "gaussian": (35.0, 70.0)}


@pytest.mark.slow
def test_p8_bidmc_reference():
    if not os.environ.get(BIDMC_ENV):
        reason = f"set {BIDMC_ENV} to a directory of BIDMC *_Signals.csv files"
        record("P8", None, reason)
        pytest.skip(reason)
    files = sorted(glob.glob(os.path.join(os.environ[BIDMC_ENV], "*Signals.csv")))
    assert files, "no BIDMC signal files found"
    signals = []
    for f in files:
        signals.extend(w for w in window(load_record(f, "PLETH")) if np.ptp(w) > 0)
    # non-overlapping 8 s windows may fall short of the reference counts
    split, scaled = fit_split(REFERENCE_SPLIT, len(signals))
    tr, _, te = make_corpus(signals, DEFAULT_SPECS, split, seed=0)
    # no validation windows in the reference split: hold out a tenth of train
    perm = np.random.default_rng(0).permutation(len(tr))
    n_val = len(tr) // 10
    va, tr = tr.subset(perm[:n_val]), tr.subset(perm[n_val:])
    cfg = TrainConfig(wavelet="db10", level=8)
    params, _ = train(tr, va, cfg)
    summary = evaluate(DenoiserModel(params, cfg.wavelet, cfg.level), te)
    parts = []
    for kind, row in sorted(summary.breakdown.items()):
        band = P8_BANDS.get(kind)
        tag = "" if band is None else (" in band" if band[0] <= row.reduction_percent
                                       <= band[1] else " outside band")
        parts.append(f"{kind} {row.reduction_percent:.1f}%{tag}")
    # informative only
    note = f" (split scaled to {split['train']}/{split['test']})" if scaled else ""
    record("P8", True, "reductions: " + ", ".join(parts) + note)
