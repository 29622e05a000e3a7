r"""Self-similar viscous regularization.

The u-profile solves the two-point problem

.. math::

    \varepsilon \hat u'' = -\xi \hat u' + \hat u^k \hat u', \qquad
    \hat u(\pm R) = u_\pm,

reached by continuation in a homotopy parameter ``mu`` that scales both
the flux and the boundary data (``mu = 0`` has the trivial solution
``u = 0``). Each continuation stage is a damped Newton iteration on a
second-order central-difference discretization with a conservative flux
difference.

The density profile follows from the explicit quadratures on either side
of the singular point(s) where ``u^k = xi``. Writing ``g = u^k - xi`` the
integrand ``(u^k)'/g`` equals ``(log|g|)' + 1/g``, so

.. math::

    \hat v_1(\xi) = v_- \frac{g(-R)}{g(\xi)} \exp\Big(-\int_{-R}^{\xi} \frac{ds}{g}\Big),

and symmetrically for ``v_2``; this avoids differentiating the discrete
u-profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from deltashock.core import (
    RiemannProblem,
    WaveClassification,
    classify,
    kth_root,
    shock_speed_sigma,
)
from deltashock.errors import (
    ClassificationError,
    InvalidConfig,
    NonConvergence,
    NoRoot,
    QuadratureFailure,
    WindowExcludesSingularity,
)

MIN_CELLS = 64
MAX_CELLS = 4_000_000
# grid spacing must resolve the viscous layer: n_cells >= CELLS_PER_LAYER * R / eps
CELLS_PER_LAYER = 40
EPSILON_FLOOR = 1e-4
REFINE = 4


def default_radius(p: RiemannProblem) -> float:
    return 2.0 * (max(abs(p.u_minus), abs(p.u_plus)) ** p.k + 1.0)


def min_cells(radius: float, epsilon: float) -> int:
    n = max(MIN_CELLS, math.ceil(CELLS_PER_LAYER * radius / epsilon - 1e-9))
    return n + (n % 2)


@dataclass(frozen=True)
class ProfileConfig:
    """Discretization and solver settings for one viscous profile.

    ``domain_radius`` and ``n_cells`` may be left as ``None`` and are then
    filled in by :meth:`resolve` from the problem data and ``epsilon``.
    ``newton_tol`` bounds the scaled residual, i.e. the discrete equation
    divided by its diffusion coefficient ``2 eps / h**2`` (units of u).
    """

    epsilon: float
    domain_radius: float | None = None
    n_cells: int | None = None
    continuation_steps: int = 20
    newton_tol: float = 1e-10
    newton_max_iter: int = 50

    def resolve(self, p: RiemannProblem) -> ProfileConfig:
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidConfig(f"epsilon must be > 0, got {self.epsilon!r}")
        radius = default_radius(p) if self.domain_radius is None else float(self.domain_radius)
        n = min_cells(radius, self.epsilon) if self.n_cells is None else int(self.n_cells)
        cfg = replace(self, domain_radius=radius, n_cells=n)
        cfg.validate(p)
        return cfg

    def validate(self, p: RiemannProblem) -> None:
        eps, radius, n = self.epsilon, self.domain_radius, self.n_cells
        if radius is None or n is None:
            raise InvalidConfig("domain_radius and n_cells must be resolved first")
        if not (eps > 0 and math.isfinite(eps)):
            raise InvalidConfig(f"epsilon must be > 0, got {eps!r}")
        reach = max(abs(p.u_minus), abs(p.u_plus)) ** p.k + 1.0
        if not radius > reach:
            raise InvalidConfig(
                f"domain_radius R={radius} must exceed max(|u-|,|u+|)^k + 1 = {reach}"
            )
        if n < MIN_CELLS:
            raise InvalidConfig(f"n_cells must be >= {MIN_CELLS}, got {n}")
        if n < CELLS_PER_LAYER * radius / eps - 1e-9:
            raise InvalidConfig(
                f"epsilon={eps} is below the resolution floor: requires "
                f"n_cells >= {CELLS_PER_LAYER}*R/eps = {CELLS_PER_LAYER * radius / eps:.0f}, got {n}"
            )
        if n > MAX_CELLS:
            raise InvalidConfig(
                f"n_cells={n} exceeds the cap {MAX_CELLS}; epsilon={eps} is too small "
                f"for this domain (floor {EPSILON_FLOOR} at default radius)"
            )
        if self.continuation_steps < 1:
            raise InvalidConfig("continuation_steps must be >= 1")
        if not self.newton_tol > 0:
            raise InvalidConfig("newton_tol must be > 0")
        if self.newton_max_iter < 1:
            raise InvalidConfig("newton_max_iter must be >= 1")


@dataclass(frozen=True)
class SimilarityProfile:
    problem: RiemannProblem
    config: ProfileConfig
    xi: np.ndarray
    u_hat: np.ndarray
    v_hat: np.ndarray | None = None
    # True where v_hat came from quadrature; False where it was capped
    # next to a singular point or set to vacuum.
    v_mask: np.ndarray | None = None
    singular_points: tuple[float, ...] = ()
    residual: float = 0.0
    newton_iterations: int = 0
    continuation_path: tuple[float, ...] = field(default=(), repr=False)

    @property
    def epsilon(self) -> float:
        return self.config.epsilon

    @property
    def h(self) -> float:
        return float(self.xi[1] - self.xi[0])

    def g(self, xi=None):
        """``u_hat**k - xi`` on the grid, or at arbitrary points via spline."""
        k = self.problem.k
        if xi is None:
            return self.u_hat**k - self.xi
        return self.spline()(xi) ** k - np.asarray(xi, dtype=float)

    def spline(self) -> CubicSpline:
        return CubicSpline(self.xi, self.u_hat)


def _freeze(*arrays):
    for a in arrays:
        if a is not None:
            a.setflags(write=False)


class _Discretization:
    def __init__(self, p: RiemannProblem, cfg: ProfileConfig):
        self.k = p.k
        self.eps = cfg.epsilon
        self.xi = np.linspace(-cfg.domain_radius, cfg.domain_radius, cfg.n_cells + 1)
        self.h = self.xi[1] - self.xi[0]
        self.bc = (p.u_minus, p.u_plus)
        # rows are divided by the diffusion coefficient 2 eps / h**2
        self.scale = self.h**2 / (2.0 * self.eps)

    def residual(self, u, mu):
        k, h, eps, xi = self.k, self.h, self.eps, self.xi
        flux = mu * u ** (k + 1) / (k + 1)
        r = np.empty_like(u)
        r[1:-1] = (
            eps * (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
            + xi[1:-1] * (u[2:] - u[:-2]) / (2.0 * h)
            - (flux[2:] - flux[:-2]) / (2.0 * h)
        ) * self.scale
        r[0] = u[0] - mu * self.bc[0]
        r[-1] = u[-1] - mu * self.bc[1]
        return r

    def jacobian(self, u, mu):
        k, h, eps, xi, s = self.k, self.h, self.eps, self.xi, self.scale
        speed = mu * u**k
        ab = np.zeros((3, u.size))
        ab[1, 0] = ab[1, -1] = 1.0
        ab[1, 1:-1] = -2.0 * eps / h**2 * s
        ab[0, 2:] = (eps / h**2 + xi[1:-1] / (2.0 * h) - speed[2:] / (2.0 * h)) * s
        ab[2, :-2] = (eps / h**2 - xi[1:-1] / (2.0 * h) + speed[:-2] / (2.0 * h)) * s
        return ab

    def newton(self, u, mu, tol, max_iter):
        """Damped Newton; returns (u, residual norm, iterations) or raises."""
        r = self.residual(u, mu)
        rnorm = np.max(np.abs(r))
        for it in range(1, max_iter + 1):
            du = solve_banded((1, 1), self.jacobian(u, mu), -r)
            if not np.all(np.isfinite(du)):
                raise NonConvergence(f"singular Newton system at mu={mu:.6g}")
            lam = 1.0
            while True:
                trial = u + lam * du
                r_trial = self.residual(trial, mu)
                tnorm = np.max(np.abs(r_trial))
                if np.isfinite(tnorm) and (tnorm <= (1.0 - 1e-4 * lam) * rnorm or tnorm <= tol):
                    break
                lam *= 0.5
                if lam < 1e-6:
                    raise NonConvergence(f"line search stalled at mu={mu:.6g}, residual {rnorm:.3e}")
            u, r, rnorm = trial, r_trial, tnorm
            if rnorm <= tol and lam * np.max(np.abs(du)) <= tol:
                return u, rnorm, it
        raise NonConvergence(
            f"Newton did not converge at mu={mu:.6g} in {max_iter} iterations (residual {rnorm:.3e})"
        )


def _predict(disc, u_prev, mu_prev, mu_next):
    # inviscid self-similar scaling: the profile at mu looks like the one at 1
    # with amplitude mu; speeds are mu * (mu u)**k, so positions scale as mu**(k+1)
    if mu_prev <= 0:
        return u_prev.copy()
    stretch = (mu_prev / mu_next) ** (disc.k + 1)
    guess = (mu_next / mu_prev) * np.interp(disc.xi * stretch, disc.xi, u_prev)
    guess[0] = mu_next * disc.bc[0]
    guess[-1] = mu_next * disc.bc[1]
    return guess


def _continuation(disc, cfg, mu_path, u0, mu0):
    u, mu_done = u0, mu0
    targets = list(mu_path)
    visited = []
    iterations = 0
    rnorm = float("inf")
    while targets:
        mu = targets[0]
        final = mu == targets[-1] and len(targets) == 1
        tol = cfg.newton_tol if final else 100.0 * cfg.newton_tol
        try:
            u, rnorm, its = disc.newton(_predict(disc, u, mu_done, mu), mu, tol, cfg.newton_max_iter)
        except NonConvergence:
            if mu - mu_done < 1e-6:
                raise
            targets.insert(0, 0.5 * (mu + mu_done))
            continue
        iterations += its
        visited.append(mu)
        mu_done = mu
        targets.pop(0)
    return u, rnorm, iterations, tuple(visited)


def solve_u_profile(
    p: RiemannProblem,
    cfg: ProfileConfig,
    *,
    mu_path=None,
    initial_guess=None,
) -> SimilarityProfile:
    """Solve the viscous u-profile on ``[-R, R]``.

    By default the homotopy runs over ``continuation_steps`` equal steps of
    ``mu`` from the trivial solution at ``mu = 0``; steps are bisected when
    Newton fails. ``mu_path``/``initial_guess`` select alternative routes
    (used by the uniqueness check). Equal states give the constant profile.
    """
    cfg = cfg.resolve(p)
    disc = _Discretization(p, cfg)
    if p.u_minus == p.u_plus:
        u = np.full_like(disc.xi, p.u_minus)
        _freeze(u)
        return SimilarityProfile(p, cfg, disc.xi, u)
    if mu_path is None:
        mu_path = uniform_path(cfg.continuation_steps)
    mu_path = [float(m) for m in mu_path]
    if not mu_path or mu_path[-1] != 1.0 or any(b <= a for a, b in zip(mu_path, mu_path[1:])):
        raise InvalidConfig("continuation path must increase strictly and end at mu = 1")
    if initial_guess is None:
        u0, mu0 = np.zeros_like(disc.xi), 0.0
    else:
        u0 = np.array(initial_guess, dtype=float)
        if u0.shape != disc.xi.shape:
            raise InvalidConfig("initial guess does not match the grid")
        # the guess is used as-is for the first stage
        mu0 = mu_path[0]
    u, rnorm, its, visited = _continuation(disc, cfg, mu_path, u0, mu0)
    _freeze(u)
    return SimilarityProfile(
        p, cfg, disc.xi, u, residual=float(rnorm), newton_iterations=its, continuation_path=visited
    )


def _bisect_root(fun, a, b, target):
    fa = fun(a)
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = fun(m)
        if abs(fm) <= target or b - a <= 4 * np.finfo(float).eps * max(1.0, abs(m)):
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def singular_roots(profile: SimilarityProfile) -> list[float]:
    """All sign changes of ``g = u_hat**k - xi``, refined on the linear interpolant."""
    xi, u, k = profile.xi, profile.u_hat, profile.problem.k
    g = u**k - xi
    target = 1e-12 * (1.0 + xi[-1])
    roots = []
    for i in range(g.size - 1):
        if g[i] == 0.0:
            roots.append(float(xi[i]))
            continue
        if g[i] * g[i + 1] < 0:
            a, b, ua, ub = xi[i], xi[i + 1], u[i], u[i + 1]

            def fun(s, a=a, b=b, ua=ua, ub=ub):
                w = (s - a) / (b - a)
                return ((1 - w) * ua + w * ub) ** k - s

            roots.append(float(_bisect_root(fun, a, b, target)))
    if g[-1] == 0.0:
        roots.append(float(xi[-1]))
    return roots


def find_singular_points(profile: SimilarityProfile) -> list[float]:
    """Singular points of the density equation (roots of ``u_hat**k = xi``).

    One point for delta-shock and contact data; ``[min, max]`` of all roots
    for fan data (equal entries when there is a single crossing).
    """
    roots = singular_roots(profile)
    if not roots:
        raise NoRoot("u_hat**k - xi has no sign change on the grid")
    cls = classify(profile.problem)
    if cls is WaveClassification.RAREFACTION_FAN:
        return [min(roots), max(roots)]
    if len(roots) != 1:
        raise NoRoot(f"expected a single singular point, found {len(roots)}")
    return roots


def _cumulative_inverse_g(profile, stop, spline, from_left):
    """Trapezoid integral of ``1/g`` from the outer boundary to each node up to ``stop``.

    The two cells nearest ``stop`` are subdivided ``REFINE`` times using a
    spline of the u-profile.
    """
    xi = profile.xi
    k = profile.problem.k
    if from_left:
        idx = np.arange(0, stop + 1)
    else:
        idx = np.arange(xi.size - 1, stop - 1, -1)
    s = xi[idx]
    g = profile.u_hat[idx] ** k - s
    with np.errstate(divide="ignore"):
        inv = 1.0 / g
    seg = 0.5 * (inv[1:] + inv[:-1]) * np.diff(s)
    for j in range(max(0, seg.size - 2), seg.size):
        sub = np.linspace(s[j], s[j + 1], REFINE + 1)
        sub_inv = 1.0 / (spline(sub) ** k - sub)
        seg[j] = np.sum(0.5 * (sub_inv[1:] + sub_inv[:-1]) * np.diff(sub))
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    return idx, g, cum


def compute_v_profile(profile: SimilarityProfile, p: RiemannProblem | None = None) -> SimilarityProfile:
    """Fill ``v_hat`` from the explicit quadratures.

    Nodes within one cell of a singular point are not integrated; they
    carry the value of the nearest integrated node (``v_mask`` is False
    there). Fan data gets ``v_hat = 0`` between the outermost singular
    points.
    """
    p = profile.problem if p is None else p
    points = find_singular_points(profile)
    xi, h = profile.xi, profile.h
    spline = profile.spline()
    left_end, right_end = points[0], points[-1]
    left_stop = int(np.searchsorted(xi, left_end - h, side="left")) - 1
    right_stop = int(np.searchsorted(xi, right_end + h, side="right"))
    if left_stop < 1 or right_stop > xi.size - 2:
        raise QuadratureFailure("singular point too close to the domain boundary")

    log_v = np.full(xi.size, -np.inf)
    idx, g, cum = _cumulative_inverse_g(profile, left_stop, spline, from_left=True)
    log_v[idx] = math.log(p.v_minus) + np.log(g[0]) - np.log(g) - cum
    idx_r, g_r, cum_r = _cumulative_inverse_g(profile, right_stop, spline, from_left=False)
    # cum_r integrates from R downward, so it equals -int_xi^R ds/g
    log_v[idx_r] = math.log(p.v_plus) + np.log(g_r[0] / g_r) - cum_r
    mask = np.zeros(xi.size, dtype=bool)
    mask[idx] = True
    mask[idx_r] = True
    if not np.all(np.isfinite(log_v[mask])) and np.any(np.isnan(log_v[mask])):
        raise QuadratureFailure("non-finite density away from the singular points")
    v = np.exp(log_v)
    if not np.all(np.isfinite(v[mask])):
        raise QuadratureFailure("density overflow away from the singular points")
    gap = ~mask
    cls = classify(p)
    if cls is WaveClassification.RAREFACTION_FAN:
        v[gap] = 0.0
        v[(xi >= left_end) & (xi <= right_end)] = 0.0
    else:
        v[gap & (xi < left_end)] = v[left_stop]
        v[gap & (xi >= left_end)] = v[right_stop]
    _freeze(v, mask)
    return replace(profile, v_hat=v, v_mask=mask, singular_points=tuple(points))


def solve_profile(p: RiemannProblem, cfg: ProfileConfig, **kw) -> SimilarityProfile:
    """u-profile, singular points and density in one call."""
    return compute_v_profile(solve_u_profile(p, cfg, **kw), p)


def _v_at(profile, x):
    # log-linear interpolation between integrated nodes
    xi, v, mask = profile.xi, profile.v_hat, profile.v_mask
    i = int(np.clip(np.searchsorted(xi, x) - 1, 0, xi.size - 2))
    if not (mask[i] and mask[i + 1]):
        raise WindowExcludesSingularity(f"window edge {x} lies within one cell of a singular point")
    w = (x - xi[i]) / (xi[i + 1] - xi[i])
    return math.exp((1 - w) * math.log(v[i]) + w * math.log(v[i + 1]))


def measure_delta_weight(profile: SimilarityProfile, p: RiemannProblem | None, window) -> float:
    """Excess density mass ``int (v_hat - step)`` over ``window`` around the singular point.

    The integral of ``v_hat`` itself is evaluated without touching the
    singularity: from ``(g v)' = -v`` the one-sided masses are
    ``g(xi1) v(xi1)`` and ``-g(xi2) v(xi2)``. The step jumps from ``v-`` to
    ``v+`` at the profile's own singular point.
    """
    p = profile.problem if p is None else p
    if classify(p) is not WaveClassification.DELTA_SHOCK:
        raise ClassificationError("delta weight is only defined for u- > u+")
    if profile.v_hat is None:
        profile = compute_v_profile(profile, p)
    (root,) = profile.singular_points
    lo, hi = (float(w) for w in window)
    if not lo < root < hi:
        raise WindowExcludesSingularity(f"window [{lo}, {hi}] does not contain xi_sigma={root}")
    if lo < profile.xi[0] or hi > profile.xi[-1]:
        raise WindowExcludesSingularity("window extends beyond the computational domain")
    g_lo, g_hi = profile.g(np.array([lo, hi]))
    left_mass = g_lo * _v_at(profile, lo)
    right_mass = -g_hi * _v_at(profile, hi)
    step = p.v_minus * (root - lo) + p.v_plus * (hi - root)
    return float(left_mass + right_mass - step)


@dataclass
class ProfileDiagnostics:
    monotone: bool
    monotone_violations: list[int]
    derivative_bound: bool
    derivative_bound_ratio: float
    derivative_violations: list[int]
    uniqueness: bool | None = None
    uniqueness_max_diff: float | None = None
    uniqueness_paths: int = 0

    @property
    def passed(self) -> bool:
        checks = [self.monotone, self.derivative_bound]
        if self.uniqueness is not None:
            checks.append(self.uniqueness)
        return all(checks)


def check_monotone(profile: SimilarityProfile) -> list[int]:
    """Node indices ``i`` where ``u[i] -> u[i+1]`` is not strictly monotone.

    Outside the tails every step must have the sign of ``u+ - u-``. Where
    both nodes already equal a boundary state to round-off (the Gaussian
    tails in floating point) steps below that round-off level are accepted.
    """
    p = profile.problem
    if p.u_minus == p.u_plus:
        return []
    u = profile.u_hat
    steps = np.diff(u) * np.sign(p.u_plus - p.u_minus)
    tol = 64 * np.finfo(float).eps * max(abs(p.u_minus), abs(p.u_plus), 1.0)
    saturated = (np.abs(u - p.u_minus) <= tol) | (np.abs(u - p.u_plus) <= tol)
    flat_ok = saturated[:-1] & saturated[1:]
    bad = np.where(flat_ok, steps < -tol, steps <= 0)
    return [int(i) for i in np.nonzero(bad)[0]]


def derivative_bound(profile: SimilarityProfile):
    """Log of the Gaussian envelope ``|u'(0)| exp((2 M |xi| - xi^2) / (2 eps))``.

    ``M`` is ``max(|u-|, |u+|)**k``, an upper bound of ``|u_hat|**k``; with
    ``u- >= |u+|`` it is ``u-**k``. Returns ``(derivative, log_bound, floor)``
    where ``floor`` is the round-off level of the central differences.

    When ``|u'(0)|`` itself is below ``floor`` (the wave sits many layer
    widths away from 0) its logarithm is carried over from the nearest
    resolvable node ``z`` through ``log|u'(0)| = log|u'(z)| - int_0^z g / eps``.
    """
    p = profile.problem
    xi, eps = profile.xi, profile.epsilon
    du = np.gradient(profile.u_hat, xi, edge_order=2)
    floor = 1e3 * np.finfo(float).eps * max(abs(p.u_minus), abs(p.u_plus), 1.0) / profile.h
    m = max(abs(p.u_minus), abs(p.u_plus)) ** p.k
    i0 = int(np.argmin(np.abs(xi)))
    resolvable = np.nonzero(np.abs(du) > 100.0 * floor)[0]
    if abs(du[i0]) > 100.0 * floor or resolvable.size == 0:
        log_du0 = math.log(abs(du[i0])) if du[i0] != 0 else -math.inf
    else:
        j = int(resolvable[np.argmin(np.abs(resolvable - i0))])
        lo, hi = sorted((i0, j))
        g = profile.g()[lo : hi + 1]
        integral = np.trapezoid(g, xi[lo : hi + 1]) * (1.0 if j > i0 else -1.0)
        log_du0 = math.log(abs(du[j])) - integral / eps
    log_bound = log_du0 + (2.0 * m * np.abs(xi - xi[i0]) - (xi - xi[i0]) ** 2) / (2.0 * eps)
    return du, log_bound, floor


def uniform_path(steps):
    return tuple(j / steps for j in range(1, steps + 1))


def quadratic_path(steps):
    n = steps + 7
    return tuple(((j + 1) / n) ** 2 for j in range(n))


def _limit_guess(p, xi, eps):
    k = p.k
    cls = classify(p)
    if cls is WaveClassification.DELTA_SHOCK:
        sigma = shock_speed_sigma(p.u_minus, p.u_plus, k)
        width = 4.0 * eps / max(p.u_minus**k - p.u_plus**k, 1e-12)
        w = 0.5 * (1.0 + np.tanh((xi - sigma) / width))
        return (1 - w) * p.u_minus + w * p.u_plus
    lo, hi = p.u_minus**k, p.u_plus**k
    return kth_root(np.clip(xi, lo, hi), k)


def validate_profile(
    profile: SimilarityProfile,
    p: RiemannProblem | None = None,
    *,
    check_uniqueness: bool = True,
    bound_rtol: float = 0.05,
) -> ProfileDiagnostics:
    """Monotonicity, derivative envelope and (optionally) path independence.

    The derivative check compares central differences with the envelope
    and allows ``bound_rtol`` relative slack for their O(h^2) error;
    derivatives below round-off level are skipped. The uniqueness check re-solves
    along a quadratic mu-path and by a direct Newton solve from the
    inviscid limit, and compares with the given profile.
    """
    p = profile.problem if p is None else p
    cfg = profile.config
    violations = check_monotone(profile)
    du, log_bound, floor = derivative_bound(profile)
    relevant = np.abs(du) > floor
    with np.errstate(divide="ignore"):
        log_ratio = np.log(np.abs(du)) - log_bound
    bad = [int(i) for i in np.nonzero(relevant & (log_ratio > math.log1p(bound_rtol)))[0]]
    diag = ProfileDiagnostics(
        monotone=not violations,
        monotone_violations=violations,
        derivative_bound=not bad,
        derivative_bound_ratio=float(np.exp(np.max(log_ratio[relevant]))) if np.any(relevant) else 0.0,
        derivative_violations=bad,
    )
    if check_uniqueness and p.u_minus != p.u_plus:
        if profile.continuation_path == uniform_path(cfg.continuation_steps):
            uniform = profile.u_hat
        else:
            uniform = solve_u_profile(p, cfg).u_hat
        quadratic = solve_u_profile(p, cfg, mu_path=quadratic_path(cfg.continuation_steps)).u_hat
        guess = _limit_guess(p, profile.xi, cfg.epsilon)
        direct = solve_u_profile(p, cfg, mu_path=[1.0], initial_guess=guess).u_hat
        runs = [uniform, quadratic, direct]
        diff = max(float(np.max(np.abs(a - b))) for a in runs for b in runs)
        diff = max(diff, float(np.max(np.abs(profile.u_hat - uniform))))
        diag.uniqueness_max_diff = diff
        diag.uniqueness = diff <= 100.0 * cfg.newton_tol
        diag.uniqueness_paths = len(runs)
    return diag


def strictly_decreasing(values, floor=1e-13) -> bool:
    """True when each entry is below its predecessor (entries under ``floor`` count as equal)."""
    vals = [float(v) for v in values]
    return all(b < a or (a <= floor and b <= floor) for a, b in zip(vals, vals[1:]))


@dataclass
class FlatnessRow:
    epsilon: float
    singular_points: tuple[float, ...]
    sup_u_left: float | None
    sup_u_right: float | None
    sup_du: float | None
    sup_dv: float | None
    sup_fan_residual: float | None = None


@dataclass
class FlatnessReport:
    problem: RiemannProblem
    eta: float
    rows: list[FlatnessRow]
    empty_regions: list[str]
    profiles: list[SimilarityProfile] = field(default_factory=list, repr=False)

    COLUMNS = ("sup_u_left", "sup_u_right", "sup_du", "sup_dv", "sup_fan_residual")

    def column(self, name):
        return [getattr(r, name) for r in self.rows]

    def decreasing(self) -> dict[str, bool]:
        out = {}
        for name in self.COLUMNS:
            col = self.column(name)
            if any(c is None for c in col):
                continue
            out[name] = strictly_decreasing(col)
        return out

    @property
    def passed(self) -> bool:
        flags = self.decreasing()
        return bool(flags) and all(flags.values()) and not self.empty_regions


def _sup(values, region):
    if not np.any(region):
        return None
    return float(np.max(np.abs(values[region])))


def limit_flatness_check(
    p: RiemannProblem,
    eps_sweep,
    eta: float,
    *,
    config: ProfileConfig | None = None,
    solve=None,
) -> FlatnessReport:
    """Measure how fast the viscous profiles approach the inviscid limit.

    Regions are taken relative to the limit wave positions: ``sigma`` for
    delta shocks, ``u-^k`` and ``u+^k`` for fans. ``config`` supplies the
    non-epsilon settings (leave its ``n_cells`` unset to let each epsilon
    pick its own resolution); ``solve`` may replace :func:`solve_profile`
    (e.g. to run the sweep in parallel).
    """
    if not eta > 0:
        raise InvalidConfig("eta must be > 0")
    eps_sweep = [float(e) for e in eps_sweep]
    if not eps_sweep:
        raise InvalidConfig("epsilon sweep is empty")
    base = config or ProfileConfig(epsilon=eps_sweep[0])
    k = p.k
    cls = classify(p)
    if cls is WaveClassification.CONTACT:
        raise ClassificationError("flatness check requires u- != u+")
    if cls is WaveClassification.DELTA_SHOCK:
        left_edge = right_edge = shock_speed_sigma(p.u_minus, p.u_plus, k)
    else:
        left_edge, right_edge = p.u_minus**k, p.u_plus**k
    configs = [replace(base, epsilon=e) for e in eps_sweep]
    run = solve or (lambda c: solve_profile(p, c))
    profiles = [run(c) for c in configs]
    rows, empty = [], set()
    for eps, prof in zip(eps_sweep, profiles):
        xi = prof.xi
        left = xi <= left_edge - eta
        right = xi >= right_edge + eta
        if not np.any(left):
            empty.add("left")
        if not np.any(right):
            empty.add("right")
        du = np.gradient(prof.u_hat, xi, edge_order=2)
        side = left | right
        dv = np.where(left, prof.v_hat - p.v_minus, prof.v_hat - p.v_plus)
        row = FlatnessRow(
            epsilon=eps,
            singular_points=prof.singular_points,
            sup_u_left=_sup(prof.u_hat - p.u_minus, left),
            sup_u_right=_sup(prof.u_hat - p.u_plus, right),
            sup_du=_sup(du, side),
            sup_dv=_sup(dv, side & prof.v_mask),
        )
        if cls is WaveClassification.RAREFACTION_FAN:
            middle = (xi >= left_edge + eta) & (xi <= right_edge - eta)
            if not np.any(middle):
                empty.add("middle")
            row.sup_fan_residual = _sup(prof.u_hat**k - xi, middle)
        rows.append(row)
    return FlatnessReport(p, float(eta), rows, sorted(empty), profiles)
