"""Experiment pipeline: simulate, estimate, optimize, L-curve, diagnose.

Every stage failure is tagged with the stage name; the CLI maps error
types to exit codes.  All randomness derives from the config seed, all
file output goes to the run's output directory, and no timing or
timestamp ever enters an output file, so identical config + seed gives
byte-identical bundles.
"""

from __future__ import annotations

import json
import math
import os
from contextlib import contextmanager

import numpy as np

from .. import __version__ as _package_version
from ..baselines import (
    BaselineConfig,
    add_dummy_measurements,
    akf_model,
    akfdm_model,
    dkf_estimate,
    l_curve,
)
from ..calibration import HyperParams, optimize
from ..diagnostics import compute_metrics, detectability_check, transmission_zero_rank
from ..errors import ConfigurationError, GplfmError
from ..filtering import BACKEND, kalman_filter, rts_smoother
from ..kernels import kernel_to_ssm
from ..model import GaussianBelief, assemble_augmented, discretize, extract_estimates
from ..structural import assemble_continuous_ssm
from .config import (
    RunConfig,
    build_model,
    build_sensors,
    kernel_spec_from_config,
    load_config,
)
from .excitation import generate_excitation
from .series import TimeSeries, write_csv, write_long_csv, write_series_csv
from .simulate import sensor_channel_names, simulate_response


@contextmanager
def _stage(name: str):
    """Tag any escaping error with the pipeline stage it occurred in."""
    try:
        yield
    except Exception as err:
        if not hasattr(err, "stage"):
            try:
                err.stage = name
            except AttributeError:
                pass
        if not isinstance(err, GplfmError) and isinstance(
            err, (np.linalg.LinAlgError, FloatingPointError, ArithmeticError)
        ):
            raise
        raise


def _rngs(seed: int) -> dict:
    """Independent generators per randomness consumer, all from one seed."""
    children = np.random.SeedSequence(seed).spawn(3)
    return {
        "excitation": np.random.default_rng(children[0]),
        "noise": np.random.default_rng(children[1]),
        "optimize_seed": int(children[2].generate_state(1)[0] % (2**31)),
    }


def _json_safe(obj):
    """Recursively replace non-finite floats (JSON has no NaN/Inf)."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj


def _write_summary(out_dir, summary: dict) -> str:
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_json_safe(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _base_summary(cfg: RunConfig) -> dict:
    return {
        "package_version": _package_version,
        "backend": BACKEND,
        "schema_version": 1,
        "seed": cfg.seed,
        "config": cfg.raw,
    }


def _generate(cfg: RunConfig, full_sys, sensors, rngs):
    """Excitation (grid includes t=0) plus simulated measurements and truth."""
    dt = cfg.dt
    n_steps = cfg.n_steps
    times_exc = dt * np.arange(n_steps + 1)
    channels = []
    for inp in cfg.inputs:
        channels.append(
            generate_excitation(inp.excitation, times_exc, dt, rngs["excitation"])
        )
    excitation = TimeSeries(
        dt=dt,
        names=[inp.name for inp in cfg.inputs],
        values=np.column_stack(channels),
        t0=0.0,
    )
    noise_std = cfg.noise.get("std")
    measurements, truth = simulate_response(
        full_sys,
        excitation,
        sensors,
        noise_fraction=float(cfg.noise.get("fraction", 0.0)),
        rng=rngs["noise"],
        noise_std=noise_std,
    )
    return excitation, measurements, truth


def _estimator_matrices(cfg: RunConfig, ssm):
    n_s, n_o = ssm.n_s, ssm.n_o
    est = cfg.estimator
    r = np.asarray(est["r"], dtype=float)
    R = np.diag(np.broadcast_to(r, (n_o,)).astype(float)) if r.ndim <= 1 else r
    Q_x = float(est["q_x"]) * np.eye(n_s)
    prior = GaussianBelief(np.zeros(n_s), float(est["p_x0"]) * np.eye(n_s))
    return R, Q_x, prior


def _baseline_config(cfg: RunConfig) -> BaselineConfig:
    est = cfg.estimator
    if "q_f" not in est:
        raise ConfigurationError(f"estimator.q_f is required for {est['method']}")
    return BaselineConfig(
        Q_f=float(est["q_f"]),
        R_dm=est.get("r_dm"),
        dummy_dofs=tuple(est.get("dummy_dofs", ())),
        P_f0=est.get("p_f0"),
    )


def _run_estimator(cfg: RunConfig, ssm, y, rngs):
    """Dispatch the configured estimator; returns (model, result, opt_report)."""
    dt = cfg.dt
    method = cfg.estimator["method"]
    R, Q_x, prior = _estimator_matrices(cfg, ssm)
    opt_report = None

    if method == "gplfm":
        specs, fixed_a2, fixed_l = [], [], []
        for inp in cfg.inputs:
            spec, fa, fl = kernel_spec_from_config(inp.kernel, dt, cfg.duration_s)
            specs.append(spec)
            fixed_a2.append(fa)
            fixed_l.append(fl)
        if not (all(fixed_a2) and all(fixed_l)):
            opt = cfg.optimization
            shared = opt.get("shared")
            if shared is None:
                shared = len({(s.family, s.p) for s in specs}) == 1 and (
                    len(set(fixed_a2)) == 1 and len(set(fixed_l)) == 1
                )
            bounds = None
            if "bounds" in opt:
                bounds = {
                    key: (math.log(lo), math.log(hi))
                    for key, (lo, hi) in opt["bounds"].items()
                }
            report = optimize(
                ssm,
                y,
                dt,
                specs,
                Q_x,
                R,
                prior,
                n_starts=int(opt["n_starts"]),
                bounds=bounds,
                seed=int(opt.get("seed", rngs["optimize_seed"])),
                shared=bool(shared),
                fixed_alpha2=np.asarray(fixed_a2),
                fixed_lengthscale=np.asarray(fixed_l),
                max_iter=int(opt["max_iter"]),
            )
            specs = report.best_params.apply_to(specs)
            opt_report = report.to_dict()
        kernels = [kernel_to_ssm(s) for s in specs]
        model = discretize(assemble_augmented(ssm, kernels, Q_x, R, prior), dt)
        result = kalman_filter(model, y)
        if cfg.estimator["smoother"]:
            result = rts_smoother(model, result)
        return model, result, opt_report

    bl = _baseline_config(cfg)
    if method == "akf":
        model = discretize(akf_model(ssm, bl, Q_x, R, prior), dt)
        result = kalman_filter(model, y)
    elif method == "akfdm":
        model = discretize(akfdm_model(ssm, bl, Q_x, R, prior), dt)
        result = kalman_filter(model, add_dummy_measurements(y, model))
    elif method == "dkf":
        result = dkf_estimate(ssm, y, dt, bl, Q_x, R, prior)
        model = akf_model(ssm, bl, Q_x, R, prior)  # layout carrier for extraction
    else:
        raise ConfigurationError(f"unknown estimator method {method!r}")
    if method in ("akf", "akfdm") and cfg.estimator["smoother"]:
        result = rts_smoother(model, result)
    return model, result, opt_report


def _score(cfg: RunConfig, estimates, truth: TimeSeries, excitation: TimeSeries):
    """MetricSet per channel for every signal group."""
    fs = cfg.rate_hz
    n_phys = estimates.displacement.shape[1]
    force_truth = excitation.values[1:]
    metrics: dict[str, dict] = {}
    groups = (
        ("displacement", estimates.displacement, "disp"),
        ("velocity", estimates.velocity, "vel"),
        ("acceleration", estimates.acceleration, "acc"),
    )
    for group, est, prefix in groups:
        metrics[group] = {}
        for d in range(n_phys):
            name = f"{prefix}_{d + 1}"
            metrics[group][name] = compute_metrics(
                est[:, d], truth.channel(name), fs=fs
            ).to_dict()
    metrics["force"] = {}
    for j, inp in enumerate(cfg.inputs):
        metrics["force"][inp.name] = compute_metrics(
            estimates.force[:, j], force_truth[:, j], fs=fs
        ).to_dict()
    return metrics


def _diagnose_model(model) -> dict:
    det = detectability_check(model)
    rank0 = transmission_zero_rank(model, 0.0)
    return {
        "detectability": {
            "detectable": det.detectable,
            "n_modes_checked": int(det.eigenvalues.size),
            "undetectable_modes": [
                [float(m.real), float(m.imag)] for m in det.undetectable_modes
            ],
        },
        "transmission_zero_s0": {
            "rank": rank0.rank,
            "full_rank": model.ssm.n_s + model.F_star.shape[0],
            "deficiency": rank0.deficiency,
        },
    }


def _write_estimates(out_dir, cfg, estimates, truth, excitation, files):
    times = estimates.times
    n_phys = estimates.displacement.shape[1]
    for group, est, std, prefix in (
        ("displacement", estimates.displacement, estimates.displacement_std, "disp"),
        ("velocity", estimates.velocity, estimates.velocity_std, "vel"),
        ("acceleration", estimates.acceleration, estimates.acceleration_std, "acc"),
    ):
        channels = [f"{prefix}_{d + 1}" for d in range(n_phys)]
        truth_block = np.column_stack([truth.channel(c) for c in channels])
        path = os.path.join(out_dir, f"{group}.csv")
        write_long_csv(path, times, channels, truth_block, est, std)
        files.append(f"{group}.csv")
    path = os.path.join(out_dir, "force.csv")
    write_long_csv(
        path,
        times,
        [inp.name for inp in cfg.inputs],
        excitation.values[1:],
        estimates.force,
        estimates.force_std,
    )
    files.append("force.csv")


def run_estimate(cfg: RunConfig, out_dir: str) -> dict:
    """Full pipeline: simulate, calibrate (if requested), filter, smooth,
    extract, score, and write the results bundle."""
    os.makedirs(out_dir, exist_ok=True)
    rngs = _rngs(cfg.seed)
    summary = _base_summary(cfg)
    files = []

    with _stage("build-model"):
        full_sys, est_sys = build_model(cfg)
        sensors = build_sensors(cfg, full_sys.n)
    with _stage("excitation"):
        excitation, measurements, truth = _generate(cfg, full_sys, sensors, rngs)
    with _stage("assemble"):
        ssm = assemble_continuous_ssm(est_sys, sensors)
    with _stage("estimate"):
        model, result, opt_report = _run_estimator(
            cfg, ssm, measurements.values, rngs
        )
    with _stage("extract"):
        estimates = extract_estimates(model, result)
    with _stage("metrics"):
        metrics = _score(cfg, estimates, truth, excitation)
    diagnostics = None
    if cfg.estimator["method"] != "dkf":
        with _stage("diagnostics"):
            diagnostics = _diagnose_model(model)

    with _stage("write"):
        write_series_csv(os.path.join(out_dir, "excitation.csv"), excitation)
        write_series_csv(os.path.join(out_dir, "measurements.csv"), measurements)
        write_series_csv(os.path.join(out_dir, "truth.csv"), truth)
        files += ["excitation.csv", "measurements.csv", "truth.csv"]
        innov_names = sensor_channel_names(sensors)
        innov_names += [f"dummy_disp_{d + 1}" for d in
                        cfg.estimator.get("dummy_dofs", ())][: max(0, model.n_dummy)]
        write_csv(
            os.path.join(out_dir, "innovations.csv"),
            result.times,
            dict(zip(innov_names, result.innovations.T)),
        )
        files.append("innovations.csv")
        _write_estimates(out_dir, cfg, estimates, truth, excitation, files)
        summary.update(
            {
                "method": cfg.estimator["method"],
                "estimate_kind": estimates.which,
                "nll": result.nll,
                "optimization": opt_report,
                "metrics": metrics,
                "diagnostics": diagnostics,
                "files": sorted(files),
            }
        )
        _write_summary(out_dir, summary)
    return summary


def run_simulate(cfg: RunConfig, out_dir: str) -> dict:
    """Generate excitation, simulate measurements and truth, write them."""
    os.makedirs(out_dir, exist_ok=True)
    rngs = _rngs(cfg.seed)
    summary = _base_summary(cfg)
    with _stage("build-model"):
        full_sys, _ = build_model(cfg)
        sensors = build_sensors(cfg, full_sys.n)
    with _stage("excitation"):
        excitation, measurements, truth = _generate(cfg, full_sys, sensors, rngs)
    with _stage("write"):
        write_series_csv(os.path.join(out_dir, "excitation.csv"), excitation)
        write_series_csv(os.path.join(out_dir, "measurements.csv"), measurements)
        write_series_csv(os.path.join(out_dir, "truth.csv"), truth)
        summary["files"] = ["excitation.csv", "measurements.csv", "truth.csv"]
        _write_summary(out_dir, summary)
    return summary


def run_optimize(cfg: RunConfig, out_dir: str) -> dict:
    """Hyperparameter calibration only; writes the optimization report."""
    os.makedirs(out_dir, exist_ok=True)
    rngs = _rngs(cfg.seed)
    summary = _base_summary(cfg)
    with _stage("build-model"):
        full_sys, est_sys = build_model(cfg)
        sensors = build_sensors(cfg, full_sys.n)
    with _stage("excitation"):
        _, measurements, _ = _generate(cfg, full_sys, sensors, rngs)
    with _stage("assemble"):
        ssm = assemble_continuous_ssm(est_sys, sensors)
    with _stage("optimize"):
        R, Q_x, prior = _estimator_matrices(cfg, ssm)
        specs, fixed_a2, fixed_l = [], [], []
        for inp in cfg.inputs:
            spec, fa, fl = kernel_spec_from_config(inp.kernel, cfg.dt, cfg.duration_s)
            specs.append(spec)
            fixed_a2.append(fa)
            fixed_l.append(fl)
        if all(fixed_a2) and all(fixed_l):
            raise ConfigurationError(
                "optimize verb needs at least one kernel parameter set to 'optimize'"
            )
        opt = cfg.optimization
        bounds = None
        if "bounds" in opt:
            bounds = {
                key: (math.log(lo), math.log(hi))
                for key, (lo, hi) in opt["bounds"].items()
            }
        shared = opt.get("shared")
        if shared is None:
            shared = len({(s.family, s.p) for s in specs}) == 1 and (
                len(set(fixed_a2)) == 1 and len(set(fixed_l)) == 1
            )
        report = optimize(
            ssm, measurements.values, cfg.dt, specs, Q_x, R, prior,
            n_starts=int(opt["n_starts"]),
            bounds=bounds,
            seed=int(opt.get("seed", rngs["optimize_seed"])),
            shared=bool(shared),
            fixed_alpha2=np.asarray(fixed_a2),
            fixed_lengthscale=np.asarray(fixed_l),
            max_iter=int(opt["max_iter"]),
        )
    with _stage("write"):
        summary["optimization"] = report.to_dict()
        summary["files"] = []
        _write_summary(out_dir, summary)
    return summary


def run_lcurve(cfg: RunConfig, out_dir: str, q_f_override=None) -> dict:
    """Baseline Q_f grid sweep with L-curve corner detection."""
    os.makedirs(out_dir, exist_ok=True)
    rngs = _rngs(cfg.seed)
    summary = _base_summary(cfg)
    lc = cfg.lcurve
    method = lc.get("method", cfg.estimator["method"])
    if method == "gplfm":
        raise ConfigurationError("lcurve applies to baseline methods only")
    grid_cfg = lc.get("grid", {"start_decade": 0, "stop_decade": 8})
    if isinstance(grid_cfg, dict):
        start = int(grid_cfg.get("start_decade", 0))
        stop = int(grid_cfg.get("stop_decade", 8))
        points = int(grid_cfg.get("points", stop - start + 1))
        grid = np.logspace(start, stop, points)
    else:
        grid = np.asarray(list(grid_cfg), dtype=float)

    with _stage("build-model"):
        full_sys, est_sys = build_model(cfg)
        sensors = build_sensors(cfg, full_sys.n)
    with _stage("excitation"):
        _, measurements, _ = _generate(cfg, full_sys, sensors, rngs)
    with _stage("assemble"):
        ssm = assemble_continuous_ssm(est_sys, sensors)
    with _stage("lcurve"):
        R, Q_x, prior = _estimator_matrices(cfg, ssm)
        base = BaselineConfig(
            Q_f=1.0,
            R_dm=cfg.estimator.get("r_dm"),
            dummy_dofs=tuple(cfg.estimator.get("dummy_dofs", ())),
        )
        curve = l_curve(
            ssm, measurements.values, cfg.dt, method, grid, Q_x, R, prior, cfg=base
        )
    with _stage("write"):
        write_csv(
            os.path.join(out_dir, "lcurve.csv"),
            curve.q_values,
            {
                "innovation_metric": curve.innovation_metric,
                "curvature": curve.curvature,
            },
        )
        selected = float(q_f_override) if q_f_override is not None else curve.corner_q_f
        summary.update(
            {
                "lcurve": {
                    "method": method,
                    "corner_q_f": curve.corner_q_f,
                    "selected_q_f": selected,
                    "override": q_f_override is not None,
                    "failures": curve.failures,
                },
                "files": ["lcurve.csv"],
            }
        )
        _write_summary(out_dir, summary)
    return summary


def run_diagnose(cfg: RunConfig, out_dir: str) -> dict:
    """Detectability and transmission-zero checks for the configured method."""
    os.makedirs(out_dir, exist_ok=True)
    summary = _base_summary(cfg)
    method = cfg.estimator["method"]
    if method == "dkf":
        raise ConfigurationError("diagnose requires an augmented-model method")
    with _stage("build-model"):
        full_sys, est_sys = build_model(cfg)
        sensors = build_sensors(cfg, full_sys.n)
    with _stage("assemble"):
        ssm = assemble_continuous_ssm(est_sys, sensors)
        R, Q_x, prior = _estimator_matrices(cfg, ssm)
        if method == "gplfm":
            specs = [
                kernel_spec_from_config(inp.kernel, cfg.dt, cfg.duration_s)[0]
                for inp in cfg.inputs
            ]
            kernels = [kernel_to_ssm(s) for s in specs]
            model = assemble_augmented(ssm, kernels, Q_x, R, prior)
        else:
            model = akf_model(ssm, _baseline_config(cfg), Q_x, R, prior)
    with _stage("diagnostics"):
        report = _diagnose_model(model)
    with _stage("write"):
        summary.update({"method": method, "diagnostics": report, "files": []})
        _write_summary(out_dir, summary)
    return summary


def run_experiment(config_path: str, out_dir: str, seed=None) -> dict:
    """Load a config file and run the full estimation pipeline."""
    cfg = load_config(config_path, seed_override=seed)
    return run_estimate(cfg, out_dir)
