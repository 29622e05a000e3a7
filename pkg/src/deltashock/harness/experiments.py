"""Mode dispatch: turn a validated :class:`ExperimentConfig` into a report.

Sweep entries are independent jobs. They run on a thread pool when the
``DELTASHOCK_THREADS`` environment variable asks for more than one
worker; results are always assembled in sweep order, so reports do not
depend on scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
from scipy.integrate import quad

from deltashock.core import (
    RiemannProblem,
    WaveClassification,
    entropy_check,
    evaluate_exact,
    exact_solution,
    shock_position,
)
from deltashock.errors import InvalidConfig, SolverError
from deltashock.fv import (
    compare_with_exact,
    fitted_order,
    front_speeds,
    init_riemann,
    measure_shock,
    restrict,
    run_until,
)
from deltashock.harness.config import ExperimentConfig, ProfileSettings, validate_config
from deltashock.harness.report import ExperimentReport
from deltashock.viscous import (
    limit_flatness_check,
    measure_delta_weight,
    solve_profile,
    strictly_decreasing,
    validate_profile,
)

THREADS_ENV = "DELTASHOCK_THREADS"

SHOCK_COLUMNS = (
    "t",
    "x_shock_measured",
    "x_shock_exact",
    "mass_measured",
    "mass_exact",
    "err_x",
    "err_mass",
    "entropy_ok",
)
FRONT_COLUMNS = (
    "t",
    "x_left_measured",
    "x_left_exact",
    "x_right_measured",
    "x_right_exact",
    "err_left",
    "err_right",
)
FIELD_COLUMNS = ("t", "l1_v", "l1_u", "excluded_cells")
PROFILE_DELTA_COLUMNS = (
    "epsilon",
    "n_cells",
    "singular_point",
    "singular_target",
    "err_singular",
    "weight_measured",
    "weight_exact",
    "err_weight",
    "sup_u_left",
    "sup_u_right",
    "sup_du",
    "sup_dv",
    "monotone_ok",
    "bound_ok",
    "unique_ok",
    "residual",
)
PROFILE_FAN_COLUMNS = (
    "epsilon",
    "n_cells",
    "singular_left",
    "target_left",
    "err_left",
    "singular_right",
    "target_right",
    "err_right",
    "vacuum_ok",
    "sup_u_left",
    "sup_u_right",
    "sup_du",
    "sup_dv",
    "sup_fan_residual",
    "monotone_ok",
    "bound_ok",
    "unique_ok",
    "residual",
)
DX_SHOCK_COLUMNS = (
    "n_cells",
    "dx",
    "x_measured",
    "x_exact",
    "err_x",
    "mass_measured",
    "mass_exact",
    "err_mass",
)
DX_FIELD_COLUMNS = ("n_cells", "dx", "l1_u", "l1_v", "self_diff_u")
ALPHA_COLUMNS = ("alpha", "max_err", "reduction")

# acceptance thresholds reported as flags
WEIGHT_RTOL = 0.05
SHOCK_MASS_RTOL = 0.05
SHOCK_POSITION_ABS = 0.02
MASS_DRIFT_MAX = 1e-12
CLAMP_MAX = 1e-10
FAN_L1_PER_WIDTH = 5e-3
FAN_ORDER_MIN = 0.8
ALPHA_DECADE_FACTOR = 8.0
QUAD_RTOL = 1e-9


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidConfig(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InvalidConfig(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def parallel_map(fn, items):
    """``[fn(x) for x in items]``, on a thread pool when configured."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _metadata(cfg: ExperimentConfig, **extra) -> dict:
    p = cfg.problem
    ex = exact_solution(p)
    meta = {
        "problem": {
            "v_minus": p.v_minus,
            "v_plus": p.v_plus,
            "u_minus": p.u_minus,
            "u_plus": p.u_plus,
            "k": p.k,
            "alpha": p.alpha,
        },
        "classification": ex.classification.value,
        "extrapolated": ex.extrapolated,
        "sigma": ex.sigma,
    }
    if ex.classification is WaveClassification.DELTA_SHOCK:
        meta["w0"] = ex.w0
    meta.update(extra)
    return meta


# ------------------------------------------------------------------ exact


def _integrated_position(speed: float, rate: float, t: float) -> float:
    """``int_0^t speed e^{-rate s} ds`` by adaptive quadrature."""
    if t == 0:
        return 0.0
    value, _ = quad(lambda s: speed * math.exp(-rate * s), 0.0, t, epsabs=0.0, epsrel=1e-13)
    return value


def run_exact(cfg: ExperimentConfig) -> ExperimentReport:
    """Closed forms at the sample times next to an independent quadrature of their ODEs."""
    p = cfg.problem
    ex = exact_solution(p)
    times = cfg.sample_times()
    rate = p.rate
    shock_states = []
    if ex.classification is WaveClassification.DELTA_SHOCK:
        report = ExperimentReport(cfg.mode, SHOCK_COLUMNS)
        checks = entropy_check(p, ex.sigma, times)
        for t, ent in zip(times, checks):
            x_m = _integrated_position(ex.sigma, rate, t)
            w_m = _integrated_position(ex.w0, rate, t)
            x_e = float(ex.position(t))
            w_e = float(ex.weight(t))
            report.rows.append((t, x_m, x_e, w_m, w_e, abs(x_m - x_e), abs(w_m - w_e), ent.ok))
            if t > 0:
                s = evaluate_exact(p, x_e, t)
                shock_states.append({"t": t, "u": s.u, "u_alt": s.u_alt, "delta_weight": s.delta_weight})
        report.flags["entropy_ok"] = all(c.ok for c in checks)
        scale = 1.0 + max(abs(r[2]) + abs(r[4]) for r in report.rows)
        report.flags["quadrature_agrees"] = all(r[5] <= QUAD_RTOL * scale and r[6] <= QUAD_RTOL * scale for r in report.rows)
    else:
        report = ExperimentReport(cfg.mode, FRONT_COLUMNS)
        speeds = front_speeds(p)
        if len(speeds) == 1:
            speeds *= 2
        for t in times:
            xl, xr = (_integrated_position(c, rate, t) for c in speeds)
            el, er = (float(c * (shock_position(p, 1.0, t))) for c in speeds)
            report.rows.append((t, xl, el, xr, er, abs(xl - el), abs(xr - er)))
        scale = 1.0 + max(abs(r[2]) + abs(r[4]) for r in report.rows)
        report.flags["quadrature_agrees"] = all(r[5] <= QUAD_RTOL * scale and r[6] <= QUAD_RTOL * scale for r in report.rows)
    report.metadata = _metadata(cfg, quad_rtol=QUAD_RTOL)
    if shock_states:
        report.metadata["shock_states"] = shock_states
    return report


# ---------------------------------------------------------------- profile


def _profile_row(p: RiemannProblem, settings: ProfileSettings, eps: float):
    cfg = settings.profile_config(eps)
    prof = solve_profile(p, cfg)
    diag = validate_profile(prof, p)
    flat = limit_flatness_check(p, [eps], settings.eta, config=cfg, solve=lambda _c: prof).rows[0]
    ex = exact_solution(p)
    common_tail = (diag.monotone, diag.derivative_bound, bool(diag.uniqueness), prof.residual)
    if ex.classification is WaveClassification.DELTA_SHOCK:
        (root,) = prof.singular_points
        a = settings.window_half_width
        weight = measure_delta_weight(prof, p, (ex.sigma - a, ex.sigma + a))
        return (
            eps,
            prof.config.n_cells,
            root,
            ex.sigma,
            abs(root - ex.sigma),
            weight,
            ex.w0,
            abs(weight - ex.w0),
            flat.sup_u_left,
            flat.sup_u_right,
            flat.sup_du,
            flat.sup_dv,
            *common_tail,
        )
    left, right = prof.singular_points
    tl, tr = p.u_minus**p.k, p.u_plus**p.k
    gap = (prof.xi > left) & (prof.xi < right)
    vacuum = bool(np.all(prof.v_hat[gap] == 0.0))
    return (
        eps,
        prof.config.n_cells,
        left,
        tl,
        abs(left - tl),
        right,
        tr,
        abs(right - tr),
        vacuum,
        flat.sup_u_left,
        flat.sup_u_right,
        flat.sup_du,
        flat.sup_dv,
        flat.sup_fan_residual,
        *common_tail,
    )


def _profile_rows(cfg: ExperimentConfig, epsilons):
    p = cfg.problem
    settings = cfg.profile_cfg or ProfileSettings()
    is_delta = exact_solution(p).classification is WaveClassification.DELTA_SHOCK
    report = ExperimentReport(cfg.mode, PROFILE_DELTA_COLUMNS if is_delta else PROFILE_FAN_COLUMNS)

    def job(eps):
        try:
            return _profile_row(p, settings, eps)
        except SolverError as exc:
            return exc

    for eps, row in zip(epsilons, parallel_map(job, epsilons)):
        if isinstance(row, Exception):
            report.errors.append({"epsilon": eps, "error": f"{type(row).__name__}: {row}"})
        else:
            report.rows.append(row)
    report.metadata = _metadata(
        cfg,
        eta=settings.eta,
        window_half_width=settings.window_half_width,
        newton_tol=settings.newton_tol,
        continuation_steps=settings.continuation_steps,
    )
    if report.rows:
        report.flags["monotone_ok"] = all(report.column("monotone_ok"))
        report.flags["bound_ok"] = all(report.column("bound_ok"))
        report.flags["unique_ok"] = all(report.column("unique_ok"))
        if is_delta:
            last = report.rows[-1]
            report.flags["weight_within_tolerance"] = last[7] <= WEIGHT_RTOL * abs(last[6])
        else:
            report.flags["vacuum_ok"] = all(report.column("vacuum_ok"))
    report.flags["all_solved"] = not report.errors
    return report, is_delta


def run_profile(cfg: ExperimentConfig) -> ExperimentReport:
    epsilons = cfg.sweep if cfg.sweep is not None else (cfg.profile_cfg.epsilon,)
    report, _ = _profile_rows(cfg, epsilons)
    return report


def run_convergence_eps(cfg: ExperimentConfig) -> ExperimentReport:
    """Profiles over the epsilon sweep (largest first) with trend flags."""
    epsilons = sorted(cfg.sweep, reverse=True)
    report, is_delta = _profile_rows(cfg, epsilons)
    trend = ["sup_u_left", "sup_u_right", "sup_du", "sup_dv"]
    trend += ["err_singular", "err_weight"] if is_delta else ["err_left", "err_right", "sup_fan_residual"]
    for name in trend:
        col = report.column(name)
        report.flags[f"{name}_decreasing"] = all(c is not None for c in col) and strictly_decreasing(col)
    return report


# --------------------------------------------------------------- simulate


def _simulate(cfg: ExperimentConfig, n_cells: int, sample_times=()):
    fv = cfg.fv
    grid = fv.grid(n_cells)
    state = init_riemann(grid, cfg.problem, transformed=fv.transformed)
    return grid, run_until(state, fv.t_end, fv.cfl, sample_times)


def _shock_row(cfg, ex, state):
    fv = cfg.fv
    m = measure_shock(state, ex, window_cells=fv.window_cells, window_fraction=fv.window_fraction)
    x_e, w_e = float(ex.position(state.t)), float(ex.weight(state.t))
    return m, x_e, w_e


def run_simulate(cfg: ExperimentConfig) -> ExperimentReport:
    p, fv = cfg.problem, cfg.fv
    ex = exact_solution(p)
    times = sorted(set(cfg.sample_times()) | {fv.t_end})
    times = [t for t in times if 0 < t <= fv.t_end]
    grid, traj = _simulate(cfg, fv.n_cells, times)
    meta = _metadata(
        cfg,
        n_cells=grid.n_cells,
        dx=grid.dx,
        cfl=fv.cfl,
        t_end=fv.t_end,
        transformed=fv.transformed,
        steps=traj.steps,
        max_step_drift=traj.max_step_drift,
        max_clamped_fraction=traj.max_clamped_fraction,
    )
    if ex.classification is WaveClassification.DELTA_SHOCK:
        report = ExperimentReport(cfg.mode, SHOCK_COLUMNS, metadata=meta)
        for sample in traj.samples:
            try:
                m, x_e, w_e = _shock_row(cfg, ex, sample.state)
            except SolverError as exc:
                report.errors.append({"t": sample.t, "error": f"{type(exc).__name__}: {exc}"})
                continue
            ok = entropy_check(p, ex.sigma, [sample.t])[0].ok
            report.rows.append(
                (sample.t, m.position, x_e, m.mass, w_e, abs(m.position - x_e), abs(m.mass - w_e), ok)
            )
        final = report.rows[-1] if report.rows and report.rows[-1][0] == fv.t_end else None
        report.flags["final_measured"] = final is not None
        if final is not None:
            report.flags["mass_within_tolerance"] = final[6] <= SHOCK_MASS_RTOL * final[4]
            report.flags["position_within_tolerance"] = final[5] <= max(2 * grid.dx, SHOCK_POSITION_ABS)
    else:
        report = ExperimentReport(cfg.mode, FIELD_COLUMNS, metadata=meta)
        for sample in traj.samples:
            err = compare_with_exact(sample.state, ex)
            report.rows.append((sample.t, err.l1_v, err.l1_u, err.excluded_cells))
        report.flags["l1_u_within_tolerance"] = report.rows[-1][2] <= FAN_L1_PER_WIDTH * grid.width
    report.flags["mass_conserved"] = traj.max_step_drift <= MASS_DRIFT_MAX
    report.flags["clamp_bounded"] = traj.max_clamped_fraction <= CLAMP_MAX
    return report


def run_convergence_dx(cfg: ExperimentConfig) -> ExperimentReport:
    """Grid-refinement study at ``t_end`` over the doubling cell-count sweep."""
    p, fv = cfg.problem, cfg.fv
    ex = exact_solution(p)
    sizes = [int(n) for n in cfg.sweep]
    runs = parallel_map(lambda n: _simulate(cfg, n), sizes)
    meta = _metadata(cfg, cfl=fv.cfl, t_end=fv.t_end, transformed=fv.transformed)
    if ex.classification is WaveClassification.DELTA_SHOCK:
        report = ExperimentReport(cfg.mode, DX_SHOCK_COLUMNS, metadata=meta)
        for n, (grid, traj) in zip(sizes, runs):
            try:
                m, x_e, w_e = _shock_row(cfg, ex, traj.final)
            except SolverError as exc:
                report.errors.append({"n_cells": n, "error": f"{type(exc).__name__}: {exc}"})
                continue
            report.rows.append(
                (n, grid.dx, m.position, x_e, abs(m.position - x_e), m.mass, w_e, abs(m.mass - w_e))
            )
        if len(report.rows) >= 2:
            ns = report.column("n_cells")
            meta["order_x"] = fitted_order(ns, [max(e, 1e-300) for e in report.column("err_x")])
            meta["order_mass"] = fitted_order(ns, [max(e, 1e-300) for e in report.column("err_mass")])
        report.flags["err_mass_decreasing"] = strictly_decreasing(report.column("err_mass"))
        report.flags["all_measured"] = not report.errors
        return report
    report = ExperimentReport(cfg.mode, DX_FIELD_COLUMNS, metadata=meta)
    prev = None
    diffs = []
    for n, (grid, traj) in zip(sizes, runs):
        err = compare_with_exact(traj.final, ex)
        diff = None
        if prev is not None:
            diff = math.fsum(np.abs(restrict(traj.final.u_bar, 2) - prev)) * grid.dx * 2
            diffs.append(diff)
        report.rows.append((n, grid.dx, err.l1_u, err.l1_v, diff))
        prev = traj.final.u_bar
    meta["order_l1_u"] = fitted_order(sizes, report.column("l1_u"))
    if len(diffs) >= 2:
        meta["order_self_u"] = fitted_order(sizes[:-1], diffs)
        report.flags["self_order_ok"] = meta["order_self_u"] >= FAN_ORDER_MIN
    report.flags["finest_l1_u_ok"] = report.rows[-1][2] <= FAN_L1_PER_WIDTH * fv.grid(sizes[-1]).width
    return report


# ------------------------------------------------------------ limit-alpha


def max_alpha_deviation(p: RiemannProblem, alpha: float, t_end: float, n_times: int = 1001) -> float:
    """``max_t |x(t; alpha) - c t|`` over ``[0, t_end]`` for every front speed ``c``."""
    q = replace(p, alpha=alpha)
    speeds = front_speeds(p)
    t = np.linspace(0.0, t_end, n_times)
    s = shock_position(q, 1.0, t)
    return max(float(np.max(np.abs(c * s - c * t))) for c in speeds)


def run_limit_alpha(cfg: ExperimentConfig) -> ExperimentReport:
    """Deviation of the damped front from the undamped one as alpha decreases."""
    p = cfg.problem
    t_end = max(cfg.times) if cfg.times else 1.0
    alphas = sorted(cfg.sweep, reverse=True)
    report = ExperimentReport(cfg.mode, ALPHA_COLUMNS, metadata=_metadata(cfg, t_end=t_end))
    prev_alpha = prev_err = None
    factors = []
    for alpha in alphas:
        err = max_alpha_deviation(p, alpha, t_end)
        reduction = None
        if prev_err is not None and err > 0:
            reduction = prev_err / err
            decades = math.log10(prev_alpha / alpha)
            factors.append(reduction ** (1.0 / decades) if decades > 0 else math.inf)
        report.rows.append((alpha, err, reduction))
        prev_alpha, prev_err = alpha, err
    report.flags["decade_reduction_ok"] = bool(factors) and all(f >= ALPHA_DECADE_FACTOR for f in factors)
    return report


RUNNERS = {
    "exact": run_exact,
    "profile": run_profile,
    "simulate": run_simulate,
    "convergence-eps": run_convergence_eps,
    "convergence-dx": run_convergence_dx,
    "limit-alpha": run_limit_alpha,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    validate_config(cfg)
    thread_count()
    return RUNNERS[cfg.mode](cfg)
