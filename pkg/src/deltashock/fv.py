"""First-order finite-volume simulation of the damped system.

The u-equation is a scalar balance law that does not see v, so each step
advances u first (local Lax-Friedrichs flux, then the exact decay
``u <- u exp(-alpha dt)``) and then moves v with the updated transport
speed ``u**k``. Outflow boundaries are zero-gradient ghost cells; the
v-flux through them is accumulated so that mass bookkeeping stays exact
when a state flows into the domain.

States may also be evolved in the transformed variables
``(v, u_hat) = (v, u exp(alpha t))``, where the source disappears and the
flux picks up the factor ``exp(-alpha k t)``; :func:`to_physical` maps
such a state back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from deltashock.core import (
    ExactSolution,
    RiemannProblem,
    WaveClassification,
    classify,
    damping_integral,
    exact_fields,
    exact_solution,
    undo_damping_transform,
)
from deltashock.errors import (
    ClassificationError,
    CflViolation,
    InvalidConfig,
    NoConcentration,
)

MIN_CELLS = 100
MAX_CFL = 0.9
# fraction of the domain width that must separate waves from the boundary
BOUNDARY_MARGIN = 0.1
EDGE_EXCLUSION = 3


@dataclass(frozen=True)
class FvGrid:
    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max) and self.x_min < self.x_max):
            raise InvalidConfig(f"need finite x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if int(self.n_cells) != self.n_cells or self.n_cells < MIN_CELLS:
            raise InvalidConfig(f"n_cells must be an integer >= {MIN_CELLS}, got {self.n_cells!r}")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.width / self.n_cells

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    def check_contains(self, p: RiemannProblem, t_end: float) -> None:
        """Raise unless every wave stays ``BOUNDARY_MARGIN * width`` inside the domain."""
        lo = self.x_min + BOUNDARY_MARGIN * self.width
        hi = self.x_max - BOUNDARY_MARGIN * self.width
        for x in wave_fronts(p, t_end):
            if not lo <= x <= hi:
                raise InvalidConfig(
                    f"wave at x={x:.6g} (t={t_end}) is within {BOUNDARY_MARGIN:.0%} of the "
                    f"domain boundary [{self.x_min}, {self.x_max}]"
                )


def front_speeds(p: RiemannProblem) -> list[float]:
    """Similarity speeds of the discontinuity, or of the two fan edges."""
    if classify(p) is WaveClassification.RAREFACTION_FAN:
        return [p.u_minus**p.k, p.u_plus**p.k]
    return [exact_solution(p).sigma]


def wave_fronts(p: RiemannProblem, t: float) -> list[float]:
    """Positions of the discontinuity (or the two fan edges) at time ``t``."""
    s = damping_integral(t, p.rate)
    return [c * s for c in front_speeds(p)]


@dataclass(frozen=True)
class FvState:
    """Cell averages at time ``t``.

    ``transformed`` marks states whose ``u_bar`` holds ``u exp(alpha t)``.
    The ``last_*`` fields describe the step that produced this state;
    ``inflow`` is the net v-mass that has entered through the boundaries.
    """

    t: float
    v_bar: np.ndarray
    u_bar: np.ndarray
    grid: FvGrid
    problem: RiemannProblem
    transformed: bool = False
    inflow: float = 0.0
    last_dt: float = 0.0
    last_clamped_mass: float = 0.0
    last_inflow: float = 0.0

    @property
    def v_mass(self) -> float:
        return math.fsum(self.v_bar) * self.grid.dx


def init_riemann(grid: FvGrid, p: RiemannProblem, *, transformed: bool = False) -> FvState:
    """Split the Riemann data at ``x = 0``; the cell containing 0 gets the length-weighted mean."""
    e = grid.edges
    left_frac = np.clip((0.0 - e[:-1]) / grid.dx, 0.0, 1.0)
    v = left_frac * p.v_minus + (1.0 - left_frac) * p.v_plus
    u = left_frac * p.u_minus + (1.0 - left_frac) * p.u_plus
    return FvState(0.0, v, u, grid, p, transformed=transformed)


def _power(u, k):
    return u**k


def _llf_fluxes(q, flux, speed):
    """Interface fluxes for the padded array ``q`` (one ghost cell per side)."""
    return 0.5 * (flux[1:] + flux[:-1]) - 0.5 * speed * (q[1:] - q[:-1])


def _pad(a):
    return np.concatenate(([a[0]], a, [a[-1]]))


def step(state: FvState, cfl: float, dt_max: float | None = None) -> FvState:
    """Advance one time step of size ``cfl * dx / max|u|^k`` (or ``dt_max`` if smaller)."""
    if not 0.0 < cfl <= MAX_CFL:
        raise InvalidConfig(f"cfl must lie in (0, {MAX_CFL}], got {cfl}")
    p, dx = state.problem, state.grid.dx
    k, alpha = p.k, p.alpha
    # transport coefficient multiplying the flux; 1 in the physical frame
    coef_now = math.exp(-p.rate * state.t) if state.transformed else 1.0
    smax = coef_now * float(np.max(np.abs(state.u_bar))) ** k
    dt = cfl * dx / smax if smax > 0 else math.inf
    if dt_max is not None:
        dt = min(dt, dt_max)
    if not (math.isfinite(dt) and dt > 0):
        raise CflViolation(f"time step {dt!r} at t={state.t}")
    if state.transformed:
        # exact time average of exp(-alpha k t) over the step
        coef = math.exp(-p.rate * state.t) * damping_integral(dt, p.rate) / dt
    else:
        coef = 1.0
    lam = coef * dt / dx

    u = _pad(state.u_bar)
    uk = _power(u, k)
    a = np.maximum(np.abs(uk[1:]), np.abs(uk[:-1]))
    fu = _llf_fluxes(u, uk * u / (k + 1), a)
    u_new = state.u_bar - lam * (fu[1:] - fu[:-1])
    if not state.transformed:
        u_new = u_new * math.exp(-alpha * dt)

    v = _pad(state.v_bar)
    un = _pad(u_new)
    unk = _power(un, k)
    a = np.maximum(np.abs(unk[1:]), np.abs(unk[:-1]))
    fv = _llf_fluxes(v, v * unk, a)
    v_new = state.v_bar - lam * (fv[1:] - fv[:-1])
    inflow = lam * dx * (fv[0] - fv[-1])

    negative = v_new < 0
    clamped = 0.0
    if np.any(negative):
        clamped = -float(np.sum(v_new[negative])) * dx
        v_new[negative] = 0.0
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(v_new))):
        raise CflViolation(f"non-finite state after step to t={state.t + dt}")
    return replace(
        state,
        t=state.t + dt,
        v_bar=v_new,
        u_bar=u_new,
        inflow=state.inflow + inflow,
        last_dt=dt,
        last_clamped_mass=clamped,
        last_inflow=inflow,
    )


def to_physical(state: FvState) -> FvState:
    """Map a transformed-frame state back to ``(v, u)``."""
    if not state.transformed:
        return state
    v, u = undo_damping_transform(state.v_bar, state.u_bar, state.t, state.problem.alpha)
    return replace(state, u_bar=u, v_bar=v, transformed=False)


@dataclass(frozen=True)
class FvSample:
    t: float
    state: FvState = field(repr=False)
    v_mass: float
    steps: int


@dataclass
class Trajectory:
    """Snapshots at the requested sample times plus per-step bookkeeping.

    ``max_step_drift`` is the worst single-step change of the v-mass that
    is not explained by boundary fluxes, relative to the initial mass;
    ``max_clamped_fraction`` is the worst clamped mass per step, relative
    to the mass at that step.
    """

    initial: FvState
    final: FvState
    samples: list[FvSample]
    steps: int = 0
    max_step_drift: float = 0.0
    max_clamped_fraction: float = 0.0


def run_until(state: FvState, t_end: float, cfl: float, sample_times=()) -> Trajectory:
    """Step to ``t_end`` exactly, snapshotting at each sample time inside ``(t, t_end]``.

    ``t_end`` is always recorded when it lies beyond the starting time.
    """
    if not math.isfinite(t_end) or t_end < state.t:
        raise InvalidConfig(f"t_end={t_end} precedes the current time {state.t}")
    targets = sorted({float(s) for s in sample_times if state.t < s < t_end})
    if t_end > state.t:
        targets.append(float(t_end))
    traj = Trajectory(initial=state, final=state, samples=[])
    mass0 = state.v_mass
    mass = mass0
    current = state
    for target in targets:
        while current.t < target:
            nxt = step(current, cfl, dt_max=target - current.t)
            if target - nxt.t <= 1e-12 * max(1.0, target):
                nxt = replace(nxt, t=target)
            new_mass = nxt.v_mass
            if mass0 > 0:
                drift = abs(new_mass - mass - nxt.last_inflow - nxt.last_clamped_mass) / mass0
                traj.max_step_drift = max(traj.max_step_drift, drift)
            if new_mass > 0:
                traj.max_clamped_fraction = max(traj.max_clamped_fraction, nxt.last_clamped_mass / new_mass)
            mass = new_mass
            current = nxt
            traj.steps += 1
        traj.samples.append(FvSample(current.t, current, mass, traj.steps))
    traj.final = current
    return traj


@dataclass(frozen=True)
class ShockMeasurement:
    position: float
    mass: float
    window: tuple[float, float]


def measure_shock(
    state: FvState,
    exact: ExactSolution,
    *,
    iterations: int = 2,
    window_cells: int = 10,
    window_fraction: float = 0.1,
) -> ShockMeasurement:
    """Locate the concentrated v-mass and integrate it.

    The excess ``v_bar - background`` (background ``v-`` left and ``v+``
    right of the current estimate) is integrated over a window of
    half-width ``max(window_cells dx, window_fraction |x(t)|)``; the
    position is its centre of mass, refined ``iterations`` times starting
    from the cell of maximal excess.
    """
    p = exact.problem
    if exact.classification is not WaveClassification.DELTA_SHOCK:
        raise ClassificationError("shock measurement requires delta-shock data")
    state = to_physical(state)
    x, dx = state.grid.centers, state.grid.dx
    v = state.v_bar
    half = max(window_cells * dx, window_fraction * abs(float(exact.position(state.t))))
    # background split at the exact front only for the initial peak search
    pos = float(x[np.argmax(v - np.where(x < exact.position(state.t), p.v_minus, p.v_plus))])
    mass = 0.0
    for _ in range(iterations):
        inside = np.abs(x - pos) <= half
        excess = v[inside] - np.where(x[inside] < pos, p.v_minus, p.v_plus)
        mass = math.fsum(excess) * dx
        if mass <= 0:
            break
        pos = math.fsum(excess * x[inside]) * dx / mass
    floor = 10.0 * dx * max(p.v_minus, p.v_plus)
    if not mass >= floor:
        raise NoConcentration(f"excess mass {mass:.3e} below the detection floor {floor:.3e} at t={state.t}")
    return ShockMeasurement(pos, mass, (pos - half, pos + half))


@dataclass(frozen=True)
class FvErrors:
    l1_v: float
    l1_u: float
    excluded_cells: int


def compare_with_exact(state: FvState, exact: ExactSolution | None = None) -> FvErrors:
    """L1 errors of ``v`` and ``u`` against the exact solution at cell centres.

    ``EDGE_EXCLUSION`` cells on each side of every discontinuity or fan
    edge are left out. Delta-shock data is rejected (the Dirac part has no
    pointwise value).
    """
    state = to_physical(state)
    p = state.problem
    exact = exact_solution(p) if exact is None else exact
    if exact.classification is WaveClassification.DELTA_SHOCK:
        raise ClassificationError("pointwise comparison is not meaningful for a delta shock")
    x, dx = state.grid.centers, state.grid.dx
    if state.t == 0:
        v_ex = np.where(x < 0, p.v_minus, p.v_plus)
        u_ex = np.where(x < 0, p.u_minus, p.u_plus)
        fronts = [0.0]
    else:
        v_ex, u_ex = exact_fields(p, x, state.t)
        fronts = wave_fronts(p, state.t)
    keep = np.ones(x.size, dtype=bool)
    if p.v_minus != p.v_plus or p.u_minus != p.u_plus:
        for f in fronts:
            keep &= np.abs(x - f) > EDGE_EXCLUSION * dx
    l1_v = math.fsum(np.abs(state.v_bar - v_ex)[keep]) * dx
    l1_u = math.fsum(np.abs(state.u_bar - u_ex)[keep]) * dx
    return FvErrors(l1_v, l1_u, int(x.size - np.count_nonzero(keep)))


def restrict(values: np.ndarray, factor: int) -> np.ndarray:
    """Average groups of ``factor`` adjacent cells onto the coarser grid."""
    values = np.asarray(values)
    if values.size % factor:
        raise InvalidConfig(f"{values.size} cells cannot be coarsened by {factor}")
    return values.reshape(-1, factor).mean(axis=1)


def fitted_order(sizes, errors) -> float:
    """Least-squares slope of ``log error`` against ``log dx`` (``dx ~ 1/n``)."""
    h = np.log(1.0 / np.asarray(sizes, dtype=float))
    e = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(h, e, 1)[0])
