"""End-to-end acceptance checks, one per criterion, at fixed tolerances.

Each test records one ``criterion N: PASS|FAIL ...`` line, shown in the
pytest terminal summary, before asserting.
"""

import dataclasses
import json
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from oracles import jacobi_eigh
from thermalab import bgs, eth
from thermalab.cli import run as cli_run
from thermalab.config import apply_overrides, load_config
from thermalab.dynamics import Observable, TimeSeries, evolve_trace, make_wavepacket
from thermalab.ensemble import (
    BgsEnsembleSpec,
    PicketFence,
    build_hf,
    iter_realizations,
    overlap_variance,
)
from thermalab.matcore import RngStream, eigh, sample_goe
from thermalab.runner import make_hf, make_observable, make_realization, run_eth, run_evolve, \
    run_spectrum

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def config(name, tmp, **overrides):
    return apply_overrides(load_config(CONFIGS / name), out=str(tmp), jobs=4, **overrides)


# -- 1 -------------------------------------------------------------------------

def test_criterion_01_eigensolver():
    rng = RngStream(2024, 1)
    eigh(sample_goe(rng, 8))  # JIT warm-up, excluded from the timing
    worst_val = worst_rec = 0.0
    elapsed = 0.0
    for dim in (8, 64):
        for k in range(3):
            h = sample_goe(rng.child(10 * dim + k), dim)
            t0 = time.perf_counter()
            es = eigh(h)
            elapsed += time.perf_counter() - t0
            ref, _ = jacobi_eigh(h)
            worst_val = max(worst_val, float(np.max(np.abs(es.values - ref))))
            rec = np.linalg.norm(es.reconstruct() - h) / np.linalg.norm(h)
            worst_rec = max(worst_rec, float(rec))
    ok = worst_val <= 1e-10 and worst_rec <= 1e-9 and elapsed < 1.0
    record(1, ok, f"max|dlambda|={worst_val:.2e} reconstruction={worst_rec:.2e} "
                  f"time={elapsed:.3f}s")
    assert ok


# -- 2 -------------------------------------------------------------------------

def test_criterion_02_goe_regime(tmp_path):
    cfg = config("microscopic.ini", tmp_path / "chaotic")
    t0 = time.perf_counter()
    chaotic = run_spectrum(cfg)
    elapsed = time.perf_counter() - t0
    control = run_spectrum(apply_overrides(cfg, out=str(tmp_path / "integrable"), coupling=0.0))
    ok = chaotic["ks_wigner"] < 0.05 and control["ks_wigner"] >= 0.05 and elapsed < 120
    record(2, ok, f"KS_wigner={chaotic['ks_wigner']:.4f} (lambda=0 control "
                  f"{control['ks_wigner']:.3f}) time={elapsed:.1f}s")
    assert ok


# -- 3 -------------------------------------------------------------------------

def test_criterion_03_overlap_profile():
    hf = build_hf(PicketFence(1.0), 500)
    delta = 50.0
    spec = BgsEnsembleSpec(hf, delta, 250.0, 40, mode="gaussian")
    width = delta / 5
    edges = np.arange(-3 * delta, 3 * delta + width / 2, width)
    sums = np.zeros(edges.size - 1)
    counts = np.zeros(edges.size - 1)
    f_sums = np.zeros(edges.size - 1)
    cols = np.arange(150, 350)
    for r in iter_realizations(spec, 31):
        diff = r.ebar[None, cols] - hf.levels[:, None]
        f = overlap_variance(hf, r.ebar[cols], delta)
        idx = np.digitize(diff, edges) - 1
        ok = (idx >= 0) & (idx < sums.size)
        np.add.at(sums, idx[ok], r.overlap[:, cols][ok] ** 2)
        np.add.at(f_sums, idx[ok], f[ok])
        np.add.at(counts, idx[ok], 1)
    used = counts >= 1e4
    ratio = sums[used] / f_sums[used]
    sum_rule = overlap_variance(hf, hf.levels[cols], delta).sum(axis=0)
    worst = float(np.max(np.abs(ratio - 1)))
    worst_rule = float(np.max(np.abs(sum_rule - 1)))
    ok = used.sum() >= 20 and worst < 0.10 and worst_rule < 0.05
    record(3, ok, f"{int(used.sum())} bins of >=1e4 samples, max|var/F-1|={worst:.3f}, "
                  f"max|sum F-1|={worst_rule:.2e}")
    assert ok


# -- 4 -------------------------------------------------------------------------

def test_criterion_04_rotated_mean():
    hf = build_hf(PicketFence(1.0), 600)
    delta = 30.0
    spec = BgsEnsembleSpec(hf, delta, 300.0, 60, mode="gaussian")
    a = Observable.diagonal_smooth(hf, lambda e: np.cos(e / 50.0))
    rep = bgs.rotated_mean_check(iter_realizations(spec, 41), hf, a, delta, min_realizations=50)
    zd = float(np.max(np.abs(rep["z_diagonal"])))
    zo = float(np.max(np.abs(rep["z_offdiagonal"])))
    record(4, rep["passed"], f"{rep['realizations']} realizations, max|z| diagonal={zd:.2f} "
                             f"off-diagonal={zo:.2f}")
    assert rep["passed"]


# -- 5 -------------------------------------------------------------------------

def _variance_ratios(dim, spacing, a_factory):
    hf = build_hf(PicketFence(spacing), dim)
    spec = BgsEnsembleSpec(hf, 30.0, float(hf.levels[dim // 2]), 100, mode="gaussian")
    return bgs.rotated_variance_check(iter_realizations(spec, 51), hf, a_factory(hf), 30.0,
                                      stride=4)


def test_criterion_05_rotated_variance():
    observables = {
        "identity": lambda hf: Observable.identity(hf.n_levels),
        "smooth": lambda hf: Observable.diagonal_smooth(hf, lambda e: np.cos(e / 50.0)),
    }
    worst = 0.0
    halving = {}
    for name, factory in observables.items():
        small = _variance_ratios(400, 1.0, factory)
        large = _variance_ratios(800, 0.5, factory)
        for rep in (small, large):
            for v in rep["offsets"].values():
                worst = max(worst, abs(v["ratio"] - 1.0))
        halving[name] = small["offsets"][1]["measured"] / large["offsets"][1]["measured"]
    halving_ok = all(abs(h / 2.0 - 1.0) < 0.2 for h in halving.values())
    ok = worst < 0.10 and halving_ok
    record(5, ok, f"max|MC/closed-1|={worst:.3f}, var(N)/var(2N)="
                  + ", ".join(f"{k} {v:.2f}" for k, v in halving.items()))
    assert ok


# -- 6 -------------------------------------------------------------------------

def test_criterion_06_offdiagonal_scaling(tmp_path):
    cfg = config("default.ini", tmp_path)
    cfg = dataclasses.replace(cfg, n_realizations=20)
    fits = []
    for n in (250, 500, 1000):
        hf = make_hf(cfg, n)
        a = make_observable(cfg, hf)
        fits.append(eth.merge_fits([
            eth.fit_eth(a, make_realization(cfg, hf, k), cfg.delta) for k in range(20)]))
    sc = eth.scaling_check(fits, delta=cfg.delta)
    ok = abs(sc["slope"] + 1.0) <= 0.1
    record(6, ok, f"slope={sc['slope']:.3f} over N_levels=250,500,1000 (fixed span)")
    assert ok


# -- 7 -------------------------------------------------------------------------

def test_criterion_07_eth_gaussianity(tmp_path):
    rep = run_eth(config("microscopic.ini", tmp_path))
    ok = (rep["n_samples"] >= 1e5 and rep["ks_gauss"] < 0.05 and abs(rep["kurtosis"]) < 0.1)
    record(7, ok, f"samples={rep['n_samples']} KS={rep['ks_gauss']:.4f} "
                  f"excess kurtosis={rep['kurtosis']:.4f}")
    assert ok


# -- 8 and 9 -------------------------------------------------------------------

@pytest.fixture(scope="module")
def evolve_runs(tmp_path_factory):
    out = {}
    for mode in ("diffusive", "gaussian"):
        base = tmp_path_factory.mktemp(mode)
        cfg = config("default.ini", base)
        cfg = dataclasses.replace(cfg, model=dataclasses.replace(cfg.model, mode=mode))
        t0 = time.perf_counter()
        fit = run_evolve(cfg)
        out[mode] = (fit, time.perf_counter() - t0)
    return out


def test_criterion_08_thermalization(evolve_runs):
    parts = []
    ok = True
    for mode, (fit, elapsed) in evolve_runs.items():
        gap = abs(fit["long_time_value"] - fit["microcanonical_equilibrium"])
        z = gap / fit["long_time_stderr"]
        this = (fit["thermalized"] and fit["rms_residual_over_stderr"] < 3.0 and z < 3.0
                and elapsed < 300)
        ok &= this
        parts.append(f"{mode}: rms/SE={fit['rms_residual_over_stderr']:.2f} "
                     f"|long-time - eq|/SE={z:.2f} time={elapsed:.0f}s")
    record(8, ok, "; ".join(parts))
    assert ok


def test_criterion_09_envelope_exponent(evolve_runs):
    parts = []
    ok = True
    for mode, (fit, _) in evolve_runs.items():
        ok &= fit["stderr_a"] < 0.05 and fit["favored_exponent"] in (0.5, 1.0)
        parts.append(f"{mode}: a={fit['fitted_a']:.3f}+-{fit['stderr_a']:.3f} "
                     f"favored a={fit['favored_exponent']:g}")
    record(9, ok, "; ".join(parts))
    assert ok


# -- 10 ------------------------------------------------------------------------

def test_criterion_10_non_thermalization(tmp_path):
    fit = run_evolve(config("broad_state.ini", tmp_path))
    lt, se = fit["long_time_value"], fit["long_time_stderr"]
    single = fit["microcanonical_equilibrium"]
    multi = fit["multi_interval_equilibrium"]
    hf = make_hf(load_config(CONFIGS / "broad_state.ini"))
    spread = fit["delta_s_hf"]
    intervals = spread * 2 / fit["delta"]
    separation = abs(lt - single) / se
    closeness = abs(lt - multi) / abs(lt - single)
    ok = (not fit["thermalized"] and intervals >= 3 and separation >= 5 and closeness < 0.2)
    record(10, ok, f"long-time={lt:.3f}+-{se:.3f}, single-window={single:.3f} "
                   f"({separation:.0f} SE away), interval sum={multi:.3f} "
                   f"(|LT-sum|/|LT-single|={closeness:.2f}), state covers {intervals:.1f} "
                   f"intervals of {hf.n_levels} levels")
    assert ok


# -- 11 ------------------------------------------------------------------------

def test_criterion_11_self_averaging():
    delta, span = 30.0, 500.0
    t1, t2 = 0.5 / delta, 1.0 / delta
    times = np.array([t1, t2])
    series_by_n = {}
    for n in (250, 500, 1000):
        hf = build_hf(PicketFence(span / (n - 1)), n)
        center = float(hf.levels[n // 2])
        a = Observable.banded_random(hf, 30.0, 1.0, RngStream(77, 0)) + \
            Observable.identity(n) * 2.0
        pi = make_wavepacket(hf, center, 10.0, RngStream(78, 0))
        spec = BgsEnsembleSpec(hf, delta, center, 100, mode="diffusive")
        series_by_n[n] = [
            TimeSeries(times=times, values=evolve_trace(a, pi, r, times).values)
            for r in iter_realizations(spec, 61)]
    rep = bgs.self_averaging_check(series_by_n, t1, t2)
    ok = rep["monotone_decreasing"]
    record(11, ok, "connected correlator "
                   + ", ".join(f"N={n}: {c:.3e}" for n, c in zip(rep["n"], rep["correlator"]))
                   + f" (slope {rep['slope']:.2f})")
    assert ok


# -- 12 ------------------------------------------------------------------------

SMALL = """\
[run]
seed = 11
delta = 20
n_realizations = 6

[hf]
n_levels = 300

[observable]
bandwidth = 20

[state]
width = 6

[time]
n_points = 30

[eth]
sweep_n_levels = 240, 480, 960
"""


def test_criterion_12_determinism(tmp_path):
    cfg = tmp_path / "small.ini"
    cfg.write_text(SMALL)
    dirs = []
    codes = []
    for tag, jobs in (("a", "1"), ("b", "3"), ("c", "3")):
        out = tmp_path / tag
        for cmd in ("spectrum", "evolve", "eth", "report"):
            codes.append(cli_run([cmd, "--config", str(cfg), "--out", str(out), "--jobs", jobs]))
        dirs.append(out)
    if any(codes):
        record(12, False, f"exit codes {codes}")
        pytest.fail("a command failed")
    names = sorted(p.name for p in dirs[0].iterdir() if p.name != "run_config.json")
    mismatched = [name for name in names for d in dirs[1:]
                  if (d / name).read_bytes() != (dirs[0] / name).read_bytes()]
    # run_config.json differs only in jobs and output_dir
    configs = [json.loads((d / "run_config.json").read_text()) for d in dirs]
    for c in configs:
        c.pop("jobs"), c.pop("output_dir")
    same_config = all(c == configs[0] for c in configs)
    ok = not mismatched and same_config and len(names) == 7
    record(12, ok, f"{len(names)} artifacts byte-identical across jobs=1,3,3"
                   + (f"; differing: {sorted(set(mismatched))}" if mismatched else ""))
    assert ok
