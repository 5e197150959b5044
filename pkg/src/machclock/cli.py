"""Batch command-line front-end.

Each subcommand runs one seeded experiment and writes a fixed set of files
into the output directory: ``series.csv`` (one row per grid point),
``records_<channel>.csv`` for measurement records, ``summary.json`` with
estimates, the parameter echo and invariant checks, and optional
``plot_<name>.svg`` line charts.  Identical configuration and master seed
produce byte-identical outputs.

Configuration is a flat INI file (section ``[experiment]`` for run-level
keys, ``[params]`` for model parameters); the ``--seed``, ``--out-dir``,
``--trajectories`` and ``--set key=value`` flags override file values.
Exit codes: 0 success, 2 configuration error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import curve_fit

from . import __version__, constants
from .clocks import (
    delta_s,
    mu_coefficient,
    radiocarbon_estimate,
    regime_check,
    t_from_s,
)
from .dynamics import evolve, lindblad_rhs, qubit_from_bloch, two_level_closed_form
from .errors import ConfigError, MachClockError, NumericalAbortError, StepSizeError
from .models import (
    OptomechParams,
    adjudicate_semiclassical_constant,
    build_full_optomech,
    build_number_measurement,
    build_optomech_adiabatic,
    classical_birth_death,
    DickeBlock,
    evolve_birth_death,
    initial_block_weights,
    required_block_cutoff,
    two_mode_operators,
)
from .operators import (
    fock_state,
    partial_trace,
    product_state,
    required_cutoff,
    sigma_x,
    sigma_y,
    sigma_z,
    thermal_mode,
    trace_distance,
)
from .trajectories import SeedSpec, ensemble_run, simulate_diffusive, simulate_jump, simulate_z_sde


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    master_seed: int = 20240101
    n_traj: int = 1
    dt: float = 0.0
    t_final: float = 0.0
    output_dir: str = "machclock-out"
    emit_plots: bool = False

    def echo(self) -> dict:
        return {
            "experiment": self.experiment,
            "master_seed": self.master_seed,
            "n_traj": self.n_traj,
            "dt": self.dt,
            "t_final": self.t_final,
            "params": dict(sorted(self.params.items())),
            "version": __version__,
        }


def _convert(key: str, raw: str, template):
    try:
        if isinstance(template, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(template, int):
            return int(raw)
        if isinstance(template, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r}") from exc


def load_config(experiment: str, args) -> ExperimentConfig:
    spec = EXPERIMENTS.get(experiment)
    if spec is None:
        raise ConfigError(f"unknown experiment {experiment!r}")
    run_keys = dict(spec.run_defaults)
    params = dict(spec.param_defaults)

    if args.config:
        parser = configparser.ConfigParser()
        read = parser.read(args.config)
        if not read:
            raise ConfigError(f"config file {args.config!r} not found")
        if parser.has_section("experiment"):
            for key, raw in parser.items("experiment"):
                if key == "name":
                    if raw != experiment:
                        raise ConfigError(
                            f"config is for experiment {raw!r}, requested {experiment!r}"
                        )
                elif key in run_keys:
                    run_keys[key] = _convert(key, raw, run_keys[key])
                else:
                    raise ConfigError(f"unknown [experiment] key {key!r}")
        if parser.has_section("params"):
            for key, raw in parser.items("params"):
                if key not in params:
                    raise ConfigError(f"unknown [params] key {key!r} for {experiment}")
                params[key] = _convert(key, raw, params[key])

    for key, value in args.set or []:
        if key in params:
            params[key] = _convert(key, value, params[key])
        elif key in run_keys:
            run_keys[key] = _convert(key, value, run_keys[key])
        else:
            raise ConfigError(f"unknown key {key!r} for {experiment}")
    if args.seed is not None:
        run_keys["master_seed"] = args.seed
    if args.out_dir is not None:
        run_keys["output_dir"] = args.out_dir
    if args.trajectories is not None:
        run_keys["n_traj"] = args.trajectories
    if args.emit_plots:
        run_keys["emit_plots"] = True

    cfg = ExperimentConfig(experiment=experiment, params=params, **run_keys)
    if cfg.master_seed < 0:
        raise ConfigError("master_seed must be nonnegative")
    if cfg.n_traj < 1:
        raise ConfigError("n_traj must be >= 1")
    spec.validate(cfg)
    return cfg


# ---------------------------------------------------------------------------
# output helpers


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _meta_line(cfg: ExperimentConfig) -> str:
    return "# machclock " + json.dumps(cfg.echo(), sort_keys=True)


def write_series_csv(path: Path, cfg: ExperimentConfig, header: list[str], columns) -> None:
    rows = np.asarray(columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_meta_line(cfg) + "\r\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows.T:
            writer.writerow([_fmt(v) for v in row])


def write_record_csv(path: Path, cfg: ExperimentConfig, times, increments) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_meta_line(cfg) + "\r\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "dy"])
        for t, dy in zip(times, increments):
            writer.writerow([_fmt(t), _fmt(dy)])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def write_summary_json(path: Path, cfg: ExperimentConfig, body: dict) -> None:
    payload = cfg.echo()
    payload.update(_jsonable(body))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


_PALETTE = ("#1965b0", "#dc050c", "#4eb265", "#f7a800", "#882e72", "#777777")


def write_svg_chart(path: Path, cfg: ExperimentConfig, title: str, x, series: dict) -> None:
    """Minimal deterministic SVG line chart (no external plotting state)."""
    width, height, pad = 640, 400, 50
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    y_all = np.concatenate(list(ys.values()))
    x_lo, x_hi = float(x.min()), float(x.max())
    y_lo, y_hi = float(y_all.min()), float(y_all.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(v):
        return pad + (v - x_lo) / (x_hi - x_lo) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y_lo) / (y_hi - y_lo) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f"<!-- {_meta_line(cfg)[2:]} -->",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" '
        'stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{pad}" y="{height - pad + 16}" font-family="sans-serif" '
        f'font-size="10">{x_lo:.4g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 16}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{x_hi:.4g}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{y_lo:.4g}</text>',
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="10">{y_hi:.4g}</text>',
    ]
    for k, (name, y) in enumerate(ys.items()):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        parts.append(f'<polyline fill="none" stroke="{color}" points="{pts}"/>')
        parts.append(
            f'<text x="{width - pad + 2}" y="{pad + 14 * k + 10}" '
            f'font-family="sans-serif" font-size="10" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    path.write_text("\n".join(parts), encoding="utf-8")


# ---------------------------------------------------------------------------
# experiment runners


def _run_two_level(cfg: ExperimentConfig, out: Path) -> dict:
    from .models import build_two_level_thermal

    p = cfg.params
    model = build_two_level_thermal(p["gamma"], p["nbar"])
    x0 = (p["x1_0"], p["x2_0"], p["x3_0"])
    n = int(round(cfg.t_final / cfg.dt))
    times = np.linspace(0.0, n * cfg.dt, n + 1)
    res = evolve(
        model,
        qubit_from_bloch(*x0),
        times,
        observables={"x1": sigma_x(), "x2": sigma_y(), "x3": sigma_z()},
        store_states=False,
    )
    ref = two_level_closed_form(x0, p["gamma"], p["nbar"], times)
    err = max(
        float(np.max(np.abs(res.observables[f"x{i + 1}"] - ref[i]))) for i in range(3)
    )
    write_series_csv(
        out / "series.csv",
        cfg,
        ["t", "x1", "x2", "x3", "x1_ref", "x2_ref", "x3_ref"],
        [times, res.observables["x1"], res.observables["x2"], res.observables["x3"],
         ref[0], ref[1], ref[2]],
    )
    if cfg.emit_plots:
        write_svg_chart(
            out / "plot_relaxation.svg", cfg, "two-level relaxation", times,
            {"x3": res.observables["x3"], "x3_ref": ref[2]},
        )
    return {
        "invariant_checks": {
            "max_abs_error_vs_closed_form": err,
            "max_trace_drift": res.max_trace_drift,
            "max_step_error": res.max_step_error,
        }
    }


def _run_swap_clock(cfg: ExperimentConfig, out: Path) -> dict:
    p = cfg.params
    gamma, strength = p["gamma"], p["strength"]
    z0 = (p["z1_0"], p["z2_0"])

    def one(seed: SeedSpec):
        return simulate_z_sde(z0, gamma, strength, cfg.dt, cfg.t_final, seed)

    ens = ensemble_run(one, cfg.n_traj, cfg.master_seed, keep_trajectories=False)
    sample = one(SeedSpec(cfg.master_seed, 0)).conditional_observables
    times = ens.times
    denom = z0[0] - z0[1]
    s_mean = (ens.mean["z1"] - ens.mean["z2"]) / denom
    s_err = np.sqrt(ens.stderr["z1"] ** 2 + ens.stderr["z2"] ** 2) / abs(denom)
    mu = mu_coefficient(*z0)
    s_theory = 1.0 - 2.0 * gamma * times
    ds_theory = np.array([delta_s(strength, t, mu) for t in times])

    t_end = float(times[-1])
    s_end = float(s_mean[-1])
    est = t_from_s(s_end, gamma, "derived", delta_s_value=float(ds_theory[-1]))
    est_paper = t_from_s(s_end, gamma, "paper", delta_s_value=float(ds_theory[-1]))

    write_series_csv(
        out / "series.csv",
        cfg,
        ["t", "s_mean", "s_stderr", "s_theory", "delta_s_theory",
         "z1_sample", "z2_sample", "zminus_sample"],
        [times, s_mean, s_err, s_theory, ds_theory,
         sample["z1"], sample["z2"], sample["z1"] - sample["z2"]],
    )
    if cfg.emit_plots:
        write_svg_chart(
            out / "plot_monitored_difference.svg", cfg,
            "conditional population difference", times,
            {"z_minus": sample["z1"] - sample["z2"], "mean_drift": denom * s_theory},
        )
    return {
        "estimates": {
            "mu": mu,
            "t_true_end": t_end,
            "t_from_s_derived": {"t_est": est.t_est, "sigma_t": est.sigma_t},
            "t_from_s_paper": {"t_est": est_paper.t_est, "sigma_t": est_paper.sigma_t},
        },
        "invariant_checks": {
            "mean_bias_end": s_end - float(np.exp(-2 * gamma * t_end)),
            "stderr_end": float(s_err[-1]),
        },
    }


def _run_radiocarbon(cfg: ExperimentConfig, out: Path) -> dict:
    p = cfg.params
    gamma = p["gamma"]
    gamma_t = [float(v) for v in str(p["gamma_t"]).split(",")]
    n_runs = p["n_runs"]
    rng = SeedSpec(cfg.master_seed, 0).generator()
    rows_gt, rows_emp, rows_th = [], [], []
    for gt in gamma_t:
        ests = np.array(
            [radiocarbon_estimate(int(rng.poisson(gt)), gamma).t_est for _ in range(n_runs)]
        )
        t_true = gt / gamma
        rows_gt.append(gt)
        rows_emp.append(float(np.std(ests) / t_true))
        rows_th.append(1.0 / np.sqrt(gt))
    slope = float(np.polyfit(np.log(rows_gt), np.log(rows_emp), 1)[0])
    write_series_csv(
        out / "series.csv", cfg,
        ["gamma_t", "relative_error_empirical", "relative_error_theory"],
        [rows_gt, rows_emp, rows_th],
    )
    if cfg.emit_plots:
        write_svg_chart(
            out / "plot_error_law.svg", cfg, "decay-count clock error law",
            np.log10(rows_gt),
            {"log10_empirical": np.log10(rows_emp), "log10_theory": np.log10(rows_th)},
        )
    ratios = [e / t for e, t in zip(rows_emp, rows_th)]
    return {
        "estimates": {"loglog_slope": slope},
        "invariant_checks": {
            "empirical_over_theory": ratios,
            "slope_within_band": bool(abs(slope + 0.5) <= 0.05),
        },
    }


def _run_optomech_jump(cfg: ExperimentConfig, out: Path) -> dict:
    p = cfg.params
    params = OptomechParams(g=p["g"], gamma_m=p["gamma_m"], nbar=p["nbar"])
    c1, c2 = p["cutoff1"], p["cutoff2"]
    model = build_optomech_adiabatic(params, cutoffs=(c1, c2))
    ops = two_mode_operators(c1, c2)
    rho0 = product_state(fock_state(p["n1_0"], c1), fock_state(p["n2_0"], c2))
    obs = {"n1": ops.n1, "n2": ops.n2}

    def one(seed: SeedSpec):
        return simulate_jump(model, rho0, cfg.dt, cfg.t_final, seed, observables=obs)

    ens = ensemble_run(one, cfg.n_traj, cfg.master_seed)
    times = ens.times
    ref = evolve(model, rho0, times, observables=obs, store_states=False)

    diff_mean = ens.mean["n2"] - ens.mean["n1"]
    diff_ref = ref.observables["n2"] - ref.observables["n1"]
    diff_err = np.sqrt(ens.stderr["n1"] ** 2 + ens.stderr["n2"] ** 2)

    # deterministic current identity: mean transfer current vs half the
    # number-difference rate, evaluated on the solver states
    res_states = evolve(model, rho0, times, store_every=max(1, times.size // 20))
    big_g, nbar = params.photon_swap_rate, params.nbar
    identity_residual = 0.0
    for state in res_states.states:
        m = state.matrix
        n1 = np.real(np.trace(ops.n1.matrix @ m))
        n2 = np.real(np.trace(ops.n2.matrix @ m))
        n1n2 = np.real(np.trace((ops.n1 @ ops.n2).matrix @ m))
        current = big_g * (nbar + 1) * (n1n2 + n1) - big_g * nbar * (n1n2 + n2)
        half_rate = 0.5 * np.real(np.trace((ops.n2 - ops.n1).matrix @ lindblad_rhs(model, m)))
        identity_residual = max(identity_residual, abs(current - half_rate))

    net_mean = ens.jump_count_mean["jump0"] - ens.jump_count_mean["jump1"]
    write_series_csv(
        out / "series.csv", cfg,
        ["t", "n1_mean", "n2_mean", "diff_mean", "diff_stderr", "diff_solver",
         "net_transfers_mean"],
        [times, ens.mean["n1"], ens.mean["n2"], diff_mean, diff_err, diff_ref, net_mean],
    )
    if cfg.emit_plots:
        write_svg_chart(
            out / "plot_transfer.svg", cfg, "photon transfer", times,
            {"diff_mean": diff_mean, "diff_solver": diff_ref},
        )
    gap = np.abs(diff_mean - diff_ref)[1:]
    bound = 3 * np.maximum(diff_err[1:], 1e-12)
    return {
        "invariant_checks": {
            "ensemble_matches_solver_3se": bool(np.all(gap <= bound)),
            "max_gap_over_3se": float(np.max(gap / bound)),
            "current_identity_residual": identity_residual,
        }
    }


def _run_dicke_decay(cfg: ExperimentConfig, out: Path) -> dict:
    p = cfg.params
    nbar1, nbar2, nbar_mech, rate = p["nbar1"], p["nbar2"], p["nbar_mech"], p["rate"]
    lam1 = nbar1 / (nbar1 + 1.0)
    lam2 = nbar2 / (nbar2 + 1.0)
    n_max = required_block_cutoff(lam1, lam2)
    weights = initial_block_weights(lam1, lam2, n_max)
    times = np.linspace(0.0, cfg.t_final, p["n_points"])
    jz = np.zeros(times.size)
    for n_tot in range(n_max + 1):
        if weights.pn_total[n_tot] == 0.0:
            continue
        block = DickeBlock(j=n_tot / 2.0, nbar=nbar_mech, rate=rate)
        gen = classical_birth_death(block)
        dist = evolve_birth_death(gen, weights.p_n_given_total[n_tot], times)
        m_values = np.arange(n_tot + 1) - n_tot / 2.0
        jz += weights.pn_total[n_tot] * (dist @ m_values)
    j_ref = 0.5 * (nbar1 + nbar2)
    z = jz / j_ref

    def model_exp(t, a, b, c):
        return a * np.exp(-b * t) + c

    popt, _ = curve_fit(
        model_exp, times, z, p0=(z[0], 2 * rate * nbar_mech, 0.0), maxfev=20000
    )
    fitted_rate = float(popt[1])
    reference = 2.0 * rate * nbar_mech
    adjudication = adjudicate_semiclassical_constant(rate, nbar1, nbar2)

    write_series_csv(
        out / "series.csv", cfg,
        ["t", "z", "z_fit"],
        [times, z, model_exp(times, *popt)],
    )
    if cfg.emit_plots:
        write_svg_chart(
            out / "plot_decay.svg", cfg, "scaled photon-difference decay", times,
            {"z": z, "fit": model_exp(times, *popt)},
        )
    return {
        "estimates": {
            "fitted_decay_rate": fitted_rate,
            "reference_rate_2_rate_nbar": reference,
            "relative_deviation": abs(fitted_rate - reference) / reference,
            "sector_cutoff": n_max,
        },
        "semiclassical_adjudication": adjudication,
        "invariant_checks": {
            "initial_jz_matches_half_difference": float(
                abs(jz[0] - 0.5 * (nbar1 - nbar2))
            ),
        },
    }


def _run_adiabatic_validate(cfg: ExperimentConfig, out: Path) -> dict:
    p = cfg.params
    params = OptomechParams(g=p["g"], gamma_m=p["gamma_m"], nbar=p["nbar"])
    c1, c2 = p["cutoff1"], p["cutoff2"]
    cm = required_cutoff(params.nbar)
    full = build_full_optomech(params, (c1, c2, cm))
    reduced = build_optomech_adiabatic(params, cutoffs=(c1, c2))
    mech = thermal_mode(params.nbar, cm)
    cavities = product_state(fock_state(p["n1_0"], c1), fock_state(p["n2_0"], c2))
    rho0_full = product_state(
        fock_state(p["n1_0"], c1), fock_state(p["n2_0"], c2), mech
    )
    n = int(round(cfg.t_final / cfg.dt))
    times = np.linspace(0.0, n * cfg.dt, n + 1)
    stride = max(1, n // p["n_compare"])
    res_full = evolve(
        full, rho0_full, times, store_every=stride, error_check_every=max(1, n // 40),
        positivity_check_every=max(1, n // 10),
    )
    res_red = evolve(reduced, cavities, times, store_every=stride)
    dist = np.array(
        [
            trace_distance(partial_trace(sf, (0, 1)), sr)
            for sf, sr in zip(res_full.states, res_red.states)
        ]
    )
    write_series_csv(
        out / "series.csv", cfg, ["t", "trace_distance"], [res_full.state_times, dist]
    )
    if cfg.emit_plots:
        write_svg_chart(
            out / "plot_distance.svg", cfg, "reduced-model error",
            res_full.state_times, {"trace_distance": dist},
        )
    return {
        "estimates": {
            "max_trace_distance": float(dist.max()),
            "mechanical_cutoff": cm,
            "transfer_rate": params.photon_swap_rate,
        },
        "invariant_checks": {
            "full_model_trace_drift": res_full.max_trace_drift,
            "full_model_step_error": res_full.max_step_error,
        },
    }


def _run_jz_measure(cfg: ExperimentConfig, out: Path) -> dict:
    p = cfg.params
    params = OptomechParams(g=p["g"], gamma_m=p["gamma_m"], nbar=p["nbar"])
    c1, c2 = p["cutoff1"], p["cutoff2"]
    base = build_optomech_adiabatic(params, cutoffs=(c1, c2))
    lam = p["decoherence_ratio"] * base.max_rate
    model, channel = build_number_measurement(base, lam)
    rho0 = product_state(fock_state(p["n1_0"], c1), fock_state(p["n2_0"], c2))
    dt = cfg.dt if cfg.dt > 0 else 0.999 * constants.DIFFUSIVE_RATE_DT_MAX / (
        model.max_rate + lam
    )
    window = p["ma_window"]
    save_every = max(1, int(round(p["window_time"] / (window * dt))))
    traj = simulate_diffusive(
        model, [channel], rho0, dt, cfg.t_final, SeedSpec(cfg.master_seed, 0),
        save_every=save_every, method="classical",
    )
    rec = traj.records[0]
    current = rec.current()
    kernel = np.ones(window) / window
    smoothed = np.convolve(current, kernel, mode="valid")
    near_integer = np.abs(smoothed - np.round(smoothed)) <= 0.2
    plateau_fraction = float(np.mean(near_integer))

    t_curr = rec.times[window - 1 :]
    write_series_csv(
        out / "series.csv", cfg,
        ["t", "n1_conditional"],
        [traj.times, traj.conditional_observables[channel.label]],
    )
    write_record_csv(out / "records_n1.csv", cfg, rec.times, rec.increments)
    if cfg.emit_plots:
        write_svg_chart(
            out / "plot_readout.svg", cfg, "smoothed number read-out", t_curr,
            {"moving_average": smoothed},
        )
    return {
        "estimates": {
            "plateau_fraction": plateau_fraction,
            "decoherence_rate": lam,
            "integration_dt": dt,
            "record_stride": save_every,
            "ma_window_time": window * save_every * dt,
        },
        "invariant_checks": {
            "record_bins": int(rec.increments.size),
            "conditional_mean_in_range": bool(
                np.all(traj.conditional_observables[channel.label] >= -1e-9)
            ),
        },
    }


def _run_regime_scan(cfg: ExperimentConfig, out: Path) -> dict:
    p = cfg.params
    times = np.linspace(p["t_min"], p["t_max"], p["n_points"])
    report = regime_check(p["strength"], p["gamma"], p["d_value"], times)
    write_series_csv(
        out / "series.csv", cfg,
        ["t", "signal", "noise", "ratio", "d_threshold"],
        [report.times, report.signal, report.noise, report.ratio, report.d_threshold],
    )
    if cfg.emit_plots:
        write_svg_chart(
            out / "plot_regime.svg", cfg, "signal vs noise", report.times,
            {"signal": report.signal, "noise": report.noise},
        )
    return {
        "estimates": {
            "signal_dominates": report.signal_dominates,
            "printed_inequality_holds": report.printed_inequality_holds,
            "reversed_inequality_holds": report.reversed_inequality_holds,
            "consistent_direction": report.consistent_direction,
            "d_threshold_end": float(report.d_threshold[-1]),
        },
        "invariant_checks": {
            "ratio_monotone_increasing": bool(np.all(np.diff(report.ratio) > 0)),
            "threshold_balances_signal_and_noise": float(
                np.max(
                    np.abs(
                        np.sqrt(8 * p["strength"] * report.times) / report.d_threshold
                        - report.signal
                    )
                )
            ),
        },
    }


# ---------------------------------------------------------------------------
# registry and validation


@dataclass
class ExperimentDef:
    runner: object
    run_defaults: dict
    param_defaults: dict
    checks: object = None

    def validate(self, cfg: ExperimentConfig) -> None:
        if self.checks is not None:
            self.checks(cfg)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _check_two_level(cfg):
    p = cfg.params
    _require(p["gamma"] > 0, "gamma must be > 0")
    _require(p["nbar"] >= 0, "nbar must be >= 0")
    _require(cfg.dt > 0 and cfg.t_final > 0, "dt and t_final must be > 0")
    norm = p["x1_0"] ** 2 + p["x2_0"] ** 2 + p["x3_0"] ** 2
    _require(norm <= 1.0 + 1e-12, "initial Bloch vector must satisfy |x| <= 1")
    rate = p["gamma"] * (p["nbar"] + 1)
    _require(
        rate * cfg.dt <= constants.EVOLVE_RATE_DT_MAX,
        f"dt too large: gamma(nbar+1)*dt = {rate * cfg.dt:.3e} > "
        f"{constants.EVOLVE_RATE_DT_MAX:.0e}",
    )


def _check_swap_clock(cfg):
    p = cfg.params
    _require(p["gamma"] > 0 and p["strength"] > 0, "gamma and strength must be > 0")
    _require(abs(p["z1_0"]) <= 1 and abs(p["z2_0"]) <= 1, "z start must lie in [-1, 1]")
    _require(p["z1_0"] != p["z2_0"], "initial populations must differ")
    _require(cfg.dt > 0 and cfg.t_final > 0, "dt and t_final must be > 0")
    _require(
        p["strength"] * cfg.dt <= constants.ZSDE_GAMMA_DT_MAX,
        f"dt too large: strength*dt > {constants.ZSDE_GAMMA_DT_MAX:.0e}",
    )


def _check_radiocarbon(cfg):
    p = cfg.params
    _require(p["gamma"] > 0, "gamma must be > 0")
    _require(p["n_runs"] >= 10, "n_runs must be >= 10")
    values = str(p["gamma_t"]).split(",")
    try:
        parsed = [float(v) for v in values]
    except ValueError:
        raise ConfigError(f"gamma_t must be a comma list of numbers, got {p['gamma_t']!r}")
    _require(all(v > 0 for v in parsed), "gamma_t values must be positive")


def _check_optomech_jump(cfg):
    p = cfg.params
    _require(p["g"] > 0 and p["gamma_m"] > 0, "g and gamma_m must be > 0")
    _require(p["nbar"] >= 0, "nbar must be >= 0")
    _require(p["cutoff1"] >= 2 and p["cutoff2"] >= 2, "cutoffs must be >= 2")
    _require(0 <= p["n1_0"] < p["cutoff1"], "n1_0 outside cutoff")
    _require(0 <= p["n2_0"] < p["cutoff2"], "n2_0 outside cutoff")
    _require(cfg.dt > 0 and cfg.t_final > 0, "dt and t_final must be > 0")


def _check_dicke_decay(cfg):
    p = cfg.params
    _require(p["nbar1"] >= 0 and p["nbar2"] >= 0, "cavity occupations must be >= 0")
    _require(p["nbar1"] + p["nbar2"] > 0, "need a nonvacuum initial state")
    _require(p["nbar_mech"] >= 0 and p["rate"] > 0, "nbar_mech >= 0 and rate > 0")
    _require(p["n_points"] >= 10, "n_points must be >= 10")
    _require(cfg.t_final > 0, "t_final must be > 0")


def _check_adiabatic_validate(cfg):
    p = cfg.params
    _require(p["g"] > 0 and p["gamma_m"] > 0 and p["nbar"] > 0, "rates must be > 0")
    _require(p["cutoff1"] >= 2 and p["cutoff2"] >= 2, "cutoffs must be >= 2")
    _require(0 <= p["n1_0"] < p["cutoff1"], "n1_0 outside cutoff")
    _require(0 <= p["n2_0"] < p["cutoff2"], "n2_0 outside cutoff")
    _require(cfg.dt > 0 and cfg.t_final > 0, "dt and t_final must be > 0")
    rate = p["gamma_m"] * (p["nbar"] + 1)
    _require(
        rate * cfg.dt <= constants.EVOLVE_RATE_DT_MAX,
        f"dt too large: gamma_m*(nbar+1)*dt = {rate * cfg.dt:.3e} > "
        f"{constants.EVOLVE_RATE_DT_MAX:.0e}",
    )
    _require(p["n_compare"] >= 5, "n_compare must be >= 5")


def _check_jz_measure(cfg):
    p = cfg.params
    _require(p["g"] > 0 and p["gamma_m"] > 0 and p["nbar"] >= 0, "invalid rates")
    _require(p["decoherence_ratio"] >= 50, "decoherence_ratio must be >= 50")
    _require(p["cutoff1"] >= 2 and p["cutoff2"] >= 2, "cutoffs must be >= 2")
    _require(0 <= p["n1_0"] < p["cutoff1"], "n1_0 outside cutoff")
    _require(0 <= p["n2_0"] < p["cutoff2"], "n2_0 outside cutoff")
    _require(p["ma_window"] >= 2, "ma_window must be >= 2")
    _require(p["window_time"] > 0, "window_time must be > 0")
    _require(cfg.t_final > 0, "t_final must be > 0")


def _check_regime_scan(cfg):
    p = cfg.params
    _require(p["strength"] > 0 and p["gamma"] > 0 and p["d_value"] > 0,
             "strength, gamma and d_value must be > 0")
    _require(0 < p["t_min"] < p["t_max"], "need 0 < t_min < t_max")
    _require(p["n_points"] >= 2, "n_points must be >= 2")


EXPERIMENTS = {
    "two-level": ExperimentDef(
        _run_two_level,
        {"master_seed": 20240101, "n_traj": 1, "dt": 5e-4, "t_final": 2.0,
         "output_dir": "machclock-out", "emit_plots": False},
        {"gamma": 1.0, "nbar": 1.0, "x1_0": 0.0, "x2_0": 0.0, "x3_0": 0.5},
        _check_two_level,
    ),
    "swap-clock": ExperimentDef(
        _run_swap_clock,
        {"master_seed": 20240101, "n_traj": 500, "dt": 5e-4, "t_final": 0.1,
         "output_dir": "machclock-out", "emit_plots": False},
        {"gamma": 1.0, "strength": 0.01, "z1_0": 0.2, "z2_0": 0.1},
        _check_swap_clock,
    ),
    "radiocarbon": ExperimentDef(
        _run_radiocarbon,
        {"master_seed": 20240101, "n_traj": 1, "dt": 0.0, "t_final": 0.0,
         "output_dir": "machclock-out", "emit_plots": False},
        {"gamma": 1.0, "gamma_t": "10,100,1000", "n_runs": 200},
        _check_radiocarbon,
    ),
    "optomech-jump": ExperimentDef(
        _run_optomech_jump,
        {"master_seed": 20240101, "n_traj": 1000, "dt": 0.01, "t_final": 0.6,
         "output_dir": "machclock-out", "emit_plots": False},
        {"g": 1.0, "gamma_m": 40.0, "nbar": 1.0, "cutoff1": 4, "cutoff2": 4,
         "n1_0": 2, "n2_0": 1},
        _check_optomech_jump,
    ),
    "dicke-decay": ExperimentDef(
        _run_dicke_decay,
        {"master_seed": 20240101, "n_traj": 1, "dt": 0.0, "t_final": 3.0,
         "output_dir": "machclock-out", "emit_plots": False},
        {"nbar1": 6.0, "nbar2": 4.0, "nbar_mech": 200.0, "rate": 0.0025,
         "n_points": 61},
        _check_dicke_decay,
    ),
    "adiabatic-validate": ExperimentDef(
        _run_adiabatic_validate,
        {"master_seed": 20240101, "n_traj": 1, "dt": 2.5e-4, "t_final": 5.0,
         "output_dir": "machclock-out", "emit_plots": False},
        {"g": 1.0, "gamma_m": 20.0, "nbar": 1.0, "cutoff1": 3, "cutoff2": 3,
         "n1_0": 1, "n2_0": 0, "n_compare": 40},
        _check_adiabatic_validate,
    ),
    "jz-measure": ExperimentDef(
        _run_jz_measure,
        {"master_seed": 20240101, "n_traj": 1, "dt": 0.0, "t_final": 40.0,
         "output_dir": "machclock-out", "emit_plots": False},
        {"g": 1.0, "gamma_m": 40.0, "nbar": 1.0, "cutoff1": 3, "cutoff2": 3,
         "n1_0": 1, "n2_0": 0, "decoherence_ratio": 300.0, "ma_window": 50,
         "window_time": 0.375},
        _check_jz_measure,
    ),
    "regime-scan": ExperimentDef(
        _run_regime_scan,
        {"master_seed": 20240101, "n_traj": 1, "dt": 0.0, "t_final": 0.0,
         "output_dir": "machclock-out", "emit_plots": False},
        {"strength": 1e-3, "gamma": 1.0, "d_value": 10.0, "t_min": 0.01,
         "t_max": 0.1, "n_points": 20},
        _check_regime_scan,
    ),
}


def run(cfg: ExperimentConfig) -> int:
    """Execute one experiment and write its artifact files; returns 0."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    body = EXPERIMENTS[cfg.experiment].runner(cfg, out)
    write_summary_json(out / "summary.json", cfg, body)
    return 0


def _parse_set(value: str) -> tuple[str, str]:
    if "=" not in value:
        raise argparse.ArgumentTypeError(f"expected key=value, got {value!r}")
    key, _, raw = value.partition("=")
    return key.strip(), raw.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="machclock",
        description="Seeded thermal-clock simulation experiments with file outputs.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        s = sub.add_parser(name, help=f"run the {name} experiment")
        s.add_argument("--config", help="INI config file")
        s.add_argument("--seed", type=int, help="master seed (overrides config)")
        s.add_argument("--out-dir", help="output directory (overrides config)")
        s.add_argument(
            "--trajectories", type=int, help="number of trajectories (overrides config)"
        )
        s.add_argument("--emit-plots", action="store_true", help="also write SVG charts")
        s.add_argument(
            "--set", action="append", type=_parse_set, metavar="KEY=VALUE",
            help="override any config key (repeatable)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.experiment, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalAbortError, StepSizeError) as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 3
    except MachClockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
