"""The four experiment commands, as functions from a config to files on disk.

Realizations are farmed out to a thread pool; results come back in index
order and every reduction runs over that ordered list, so the output bytes
do not depend on the number of workers.
"""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bgs, eth, spectral
from .dynamics import (
    Observable,
    default_times,
    energy_stats,
    equilibrium_value,
    evolve_trace,
    hf_coherent_term,
    hf_energy_stats,
    make_wavepacket,
)
from .ensemble import (
    BgsEnsembleSpec,
    ExponentialGrowth,
    PicketFence,
    build_hf,
    build_microscopic,
    correlation_n,
    coupling_for_width,
    sample_phenomenological,
    sample_phenomenological_eigvals,
    unfold,
)
from .errors import DegenerateCoherent, MissingArtifacts
from .matcore import RngStream, eigh, eigvalsh

__all__ = ["run_spectrum", "run_evolve", "run_eth", "run_report", "resolve_jobs",
           "REPORT_INPUTS"]

# streams reserved for draws shared by every realization
OBSERVABLE_STREAM = 2**64 - 1
STATE_STREAM = 2**64 - 2
REPORT_INPUTS = ("spacing.csv", "evolve.csv", "fit.json", "eth_f2.csv", "eth_report.json")


def resolve_jobs(config):
    if config.jobs is not None:
        return config.jobs
    env = os.environ.get("THERMALAB_JOBS")
    if env:
        return int(env)
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count()


def _ordered_map(fn, indices, jobs):
    indices = list(indices)
    if jobs <= 1 or len(indices) <= 1:
        return [fn(k) for k in indices]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, indices))


# -- model construction -------------------------------------------------------

def make_hf(config, n_levels=None):
    c = config.hf
    n = c.n_levels if n_levels is None else n_levels
    if c.density == "picket-fence":
        # a different level count keeps the energy span and changes the density
        spacing = c.spacing * (c.n_levels - 1) / (n - 1)
        return build_hf(PicketFence(spacing), n, c.e_min)
    rho0 = c.rho0 * (n / c.n_levels)
    return build_hf(ExponentialGrowth(rho0, c.t0), n, c.e_min)


def _midpoint(hf):
    return float(0.5 * (hf.levels[0] + hf.levels[-1]))


def make_observable(config, hf):
    c = config.observable
    if c.kind == "identity":
        return Observable.identity(hf.n_levels)
    if c.kind == "diagonal-smooth":
        center = _midpoint(hf) if c.center is None else c.center
        g = {
            "linear": lambda e: (e - center) / c.scale,
            "quadratic": lambda e: ((e - center) / c.scale) ** 2,
            "cosine": lambda e: np.cos((e - center) / c.scale),
        }[c.function]
        a = Observable.diagonal_smooth(hf, g)
    else:
        a = Observable.banded_random(hf, c.bandwidth, c.strength,
                                     RngStream(config.master_seed, OBSERVABLE_STREAM))
    if c.offset:
        a = a + Observable.identity(hf.n_levels) * c.offset
    return a


def make_state(config, hf):
    center = _midpoint(hf) if config.state.center_e is None else config.state.center_e
    return make_wavepacket(hf, center, config.state.width, RngStream(config.master_seed, STATE_STREAM))


def _coupling(config, hf):
    m = config.model
    if m.coupling is not None:
        return m.coupling
    return coupling_for_width(hf, m.spreading_width)


def _ensemble_spec(config, hf):
    return BgsEnsembleSpec(hf, config.delta, _midpoint(hf), config.n_realizations,
                           mode=config.model.mode)


def make_realization(config, hf, k, spec=None):
    """Eigensystem of realization ``k`` (stream ``k`` of the master seed)."""
    rng = RngStream(config.master_seed, k)
    if config.model.kind == "microscopic":
        return eigh(build_microscopic(hf, _coupling(config, hf), rng))
    return sample_phenomenological(spec or _ensemble_spec(config, hf), rng, index=k)


def realization_eigvals(config, hf, k, spec=None):
    rng = RngStream(config.master_seed, k)
    if config.model.kind == "microscopic":
        return eigvalsh(build_microscopic(hf, _coupling(config, hf), rng))
    return sample_phenomenological_eigvals(spec or _ensemble_spec(config, hf), rng)


# -- output helpers -----------------------------------------------------------

def _fmt(x):
    return "%.17g" % x


def write_csv(path, header, columns):
    rows = zip(*columns)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare(config):
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "run_config.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config.to_json())
    return out


# -- commands -----------------------------------------------------------------

def run_spectrum(config, n_bins=40, s_max=4.0):
    """Pooled unfolded spacing distribution against the Wigner surmise."""
    out = _prepare(config)
    hf = make_hf(config)
    spec = _ensemble_spec(config, hf) if config.model.kind == "phenomenological" else None
    jobs = resolve_jobs(config)

    def one(k):
        return unfold(realization_eigvals(config, hf, k, spec), keep_fraction=0.5)

    unfolded = _ordered_map(one, range(config.n_realizations), jobs)
    hist = spectral.spacing_distribution(unfolded, n_bins=n_bins, s_max=s_max)
    centers = hist.centers
    write_csv(out / "spacing.csv", ["s", "density_empirical", "density_wigner"],
              [centers, hist.density(), spectral.wigner_pdf(centers)])
    lam = _coupling(config, hf) if config.model.kind == "microscopic" else None
    report = {
        "ks_wigner": spectral.ks_distance(hist, "wigner"),
        "ks_poisson": spectral.ks_distance(hist, "poisson"),
        "N": correlation_n(hf, _midpoint(hf), config.delta),
        "delta": config.delta,
        "lambda": lam,
        "model": config.model.kind,
        "mode": config.model.mode if config.model.kind == "phenomenological" else None,
        "n_levels": hf.n_levels,
        "n_realizations": config.n_realizations,
        "n_spacings": int(hist.spacings.size),
    }
    write_json(out / "report.json", report)
    return report


def _shifted_form(config):
    # only the unconstrained Gaussian overlaps follow the unshifted curve
    return not (config.model.kind == "phenomenological" and config.model.mode == "gaussian")


def run_evolve(config):
    """Ensemble-mean Tr(A rho(t)) with the closed-form relaxation curves and the envelope fit."""
    out = _prepare(config)
    hf = make_hf(config)
    a = make_observable(config, hf)
    pi = make_state(config, hf)
    spec = _ensemble_spec(config, hf) if config.model.kind == "phenomenological" else None
    times = default_times(config.delta, config.time_grid.n_points,
                          config.time_grid.t_max_over_invdelta)
    jobs = resolve_jobs(config)

    def one(k):
        r = make_realization(config, hf, k, spec)
        series = evolve_trace(a, pi, r, times, realization_id=k)
        st = energy_stats(pi, r)
        eq = equilibrium_value(a, r, st.mean_e, config.delta)
        return series.values, st.mean_e, st.delta_s, eq, series.imag_residue

    results = _ordered_map(one, range(config.n_realizations), jobs)
    values = np.array([r[0] for r in results])
    mean = values.mean(axis=0)
    count = values.shape[0]
    stderr = values.std(axis=0, ddof=1) / math.sqrt(count) if count > 1 else np.zeros_like(mean)
    delta_s = float(np.mean([r[2] for r in results]))
    mean_e = float(np.mean([r[1] for r in results]))
    micro_eq = float(np.mean([r[3] for r in results]))

    # the eigenbasis spread always contains the overlap width; the criterion
    # is whether the state fits inside one correlation interval of H_HF
    spread_hf = hf_energy_stats(pi, hf).delta_s
    shift = _shifted_form(config)
    dec = bgs.decompose(hf, a, pi, config.delta)
    multi_interval = bgs.interval_equilibrium(dec, config.normalization)
    raw_coherent = hf_coherent_term(a, pi, hf, times)
    thermalized = spread_hf < config.delta
    # a broad state relaxes towards the interval-weighted value instead
    eq_used = micro_eq if thermalized else multi_interval
    pred1 = bgs.predict(dec, raw_coherent, times, 1.0, config.normalization, shift, eq_used)
    pred_half = pred1.with_exponent(0.5)

    fit = {"fitted_a": None, "stderr_a": None, "fit_status": "ok"}
    try:
        a_fit, a_se = bgs.fit_envelope(times, mean, eq_used, pred1.coherent, config.delta,
                                       stderr=stderr if count > 1 else None)
        fit.update(fitted_a=a_fit, stderr_a=a_se)
        fitted_curve = pred1.with_exponent(a_fit).curve
    except DegenerateCoherent as exc:
        fit["fit_status"] = f"degenerate coherent term: {exc}"
        fitted_curve = pred1.curve
    tail = times >= 0.8 * times[-1]
    long_time = float(mean[tail].mean())
    long_time_se = float(values[:, tail].mean(axis=1).std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        z = (mean - fitted_curve) / stderr
    rms_z = float(np.sqrt(np.mean(z[np.isfinite(z)] ** 2))) if np.any(np.isfinite(z)) else None

    favored = None
    if fit["fitted_a"] is not None:
        favored = min((1.0, 0.5), key=lambda v: abs(fit["fitted_a"] - v))
    write_csv(out / "evolve.csv",
              ["t", "mean_trace", "stderr_trace", "bgs_prediction_a1", "bgs_prediction_a_half",
               "coherent_term", "equilibrium"],
              [times, mean, stderr, pred1.curve, pred_half.curve, pred1.coherent,
               np.full(times.shape, eq_used)])
    report = {
        **fit,
        "equilibrium": eq_used,
        "microcanonical_equilibrium": micro_eq,
        "delta": config.delta,
        "delta_s": delta_s,
        "delta_s_over_delta": delta_s / config.delta,
        "delta_s_hf": spread_hf,
        "thermalized": bool(thermalized),
        "mean_energy": mean_e,
        "multi_interval_equilibrium": multi_interval,
        "long_time_value": long_time,
        "long_time_stderr": long_time_se,
        "rms_residual_over_stderr": rms_z,
        "favored_exponent": favored,
        "envelope_form": "shifted" if shift else "unshifted",
        "normalization": config.normalization,
        "n_realizations": count,
        "max_imag_residue": max(r[4] for r in results),
    }
    write_json(out / "fit.json", report)
    return report


def _eth_fits(config, hf, n_realizations, jobs):
    a = make_observable(config, hf)
    spec = _ensemble_spec(config, hf) if config.model.kind == "phenomenological" else None
    e = config.eth

    def one(k):
        r = make_realization(config, hf, k, spec)
        return eth.fit_eth(a, r, config.delta, e_bins=e.e_bins, omega_bins=e.omega_bins,
                           central=e.central, min_count=e.min_count)

    return _ordered_map(one, range(n_realizations), jobs)


def run_eth(config):
    """Binned off-diagonal variance, residual gaussianity and the optional N sweep."""
    out = _prepare(config)
    jobs = resolve_jobs(config)
    hf = make_hf(config)
    fit = eth.merge_fits(_eth_fits(config, hf, config.n_realizations, jobs))
    ec, wc = np.meshgrid(fit.e_centers, fit.omega_centers, indexing="ij")
    write_csv(out / "eth_f2.csv", ["E_bin", "omega_bin", "f2", "count"],
              [ec.ravel(), wc.ravel(), fit.f2.ravel(), fit.counts.ravel().tolist()])
    report = {"n_samples": int(fit.r_samples.size), "n_corr": fit.n_corr, "s_eff": fit.s_eff,
              "invalid_bins": int((~fit.valid).sum())}
    if fit.r_samples.size >= 10_000:
        g = eth.gaussianity_test(fit)
        report.update(kurtosis=g["kurtosis"], ks_gauss=g["ks_distance"])
    else:
        report.update(kurtosis=None, ks_gauss=None)
    times = np.linspace(0.0, 6.0 / config.delta, config.eth.c_of_t_points)
    try:
        report["c_of_t"] = {"t": times, "c": eth.c_of_t(fit, _midpoint(hf), times)}
    except ValueError:
        report["c_of_t"] = None
    sweep = config.eth.sweep_n_levels
    if sweep:
        fits = [eth.merge_fits(_eth_fits(config, make_hf(config, n), config.n_realizations, jobs))
                for n in sweep]
        sc = eth.scaling_check(fits, delta=config.delta)
        report["scaling"] = {"n_levels": list(sweep), **sc}
        report["scaling_slope"] = sc["slope"]
    else:
        report["scaling_slope"] = None
    write_json(out / "eth_report.json", report)
    return report


def run_report(output_dir):
    """Render ``report.svg`` from the artifacts of the other commands."""
    from .svg import render_report

    out = Path(output_dir)
    missing = [name for name in REPORT_INPUTS if not (out / name).is_file()]
    if missing:
        raise MissingArtifacts(missing)
    with open(out / "fit.json", encoding="utf-8") as fh:
        fit = json.load(fh)
    with open(out / "eth_report.json", encoding="utf-8") as fh:
        eth_report = json.load(fh)
    svg = render_report(read_csv(out / "spacing.csv"), read_csv(out / "evolve.csv"), fit,
                        read_csv(out / "eth_f2.csv"), eth_report)
    with open(out / "report.svg", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return out / "report.svg"
