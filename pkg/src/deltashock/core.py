r"""Exact Riemann solutions of the damped triangular system

.. math::

    u_t + \frac{1}{k+1}(u^{k+1})_x = -\alpha u, \qquad v_t + (v u^k)_x = 0,

with two-state initial data split at :math:`x = 0`.

Everything downstream (viscous profiles, finite-volume runs, the harness)
is built on :class:`RiemannProblem` and the closed forms in this module.
All functions are pure.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from numbers import Integral, Real

import numpy as np

from deltashock.errors import ClassificationError, InvalidProblem

# Below this |alpha*k*t| the damping integral switches to its Taylor series.
SERIES_THRESHOLD = 1e-5


class WaveClassification(enum.Enum):
    DELTA_SHOCK = "delta_shock"
    RAREFACTION_FAN = "rarefaction_fan"
    CONTACT = "contact"


@dataclass(frozen=True)
class RiemannProblem:
    """Riemann data ``(v-, v+, u-, u+)`` plus exponent ``k`` and damping ``alpha``.

    ``alpha = 0`` is allowed and gives the undamped (homogeneous) system.
    For even ``k`` both velocities must be nonnegative so that the fan
    inverse ``xi**(1/k)`` stays real.
    """

    v_minus: float
    v_plus: float
    u_minus: float
    u_plus: float
    k: int = 1
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("v_minus", "v_plus", "u_minus", "u_plus", "alpha"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, Real):
                raise InvalidProblem(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise InvalidProblem(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        k = self.k
        if isinstance(k, bool):
            raise InvalidProblem("k must be a positive integer")
        if isinstance(k, Real) and not isinstance(k, Integral):
            if not float(k).is_integer():
                raise InvalidProblem(f"k must be a positive integer, got {k!r}")
            k = int(k)
        if not isinstance(k, Integral) or k < 1:
            raise InvalidProblem(f"k must be a positive integer, got {k!r}")
        object.__setattr__(self, "k", int(k))
        if self.v_minus <= 0 or self.v_plus <= 0:
            raise InvalidProblem("densities must be positive (v- > 0 and v+ > 0)")
        if self.alpha < 0:
            raise InvalidProblem("damping rate alpha must be >= 0")
        if self.k % 2 == 0 and (self.u_minus < 0 or self.u_plus < 0):
            raise InvalidProblem("even k requires nonnegative states (u- >= 0 and u+ >= 0)")

    @property
    def rate(self) -> float:
        """Decay rate ``alpha * k`` of the characteristic speeds."""
        return self.alpha * self.k

    def classification(self) -> WaveClassification:
        return classify(self)


@dataclass(frozen=True)
class ExactSolution:
    problem: RiemannProblem
    classification: WaveClassification
    sigma: float
    w0: float
    # True when the solution is not covered by the source theory (contact case).
    extrapolated: bool = False

    def position(self, t):
        return shock_position(self.problem, self.sigma, t)

    def weight(self, t):
        return delta_weight_at(self.problem, self.w0, t)

    def evaluate(self, x, t) -> StateSample:
        return evaluate_exact(self.problem, x, t)


@dataclass(frozen=True)
class StateSample:
    """Pointwise value of a (possibly measure-valued) solution.

    ``u`` on the singular support is the value whose k-th power equals
    sigma; ``u_alt`` carries the other reading ``sigma * exp(-alpha t)``.
    Both agree when ``k == 1``.
    """

    v_regular: float
    u: float
    on_singular_support: bool = False
    delta_weight: float = 0.0
    u_alt: float | None = field(default=None)


def classify(p: RiemannProblem) -> WaveClassification:
    if p.u_minus > p.u_plus:
        return WaveClassification.DELTA_SHOCK
    if p.u_minus < p.u_plus:
        return WaveClassification.RAREFACTION_FAN
    return WaveClassification.CONTACT


def shock_speed_sigma(u_minus: float, u_plus: float, k: int) -> float:
    """Rankine-Hugoniot speed (in the similarity variable) of the u-jump.

    ``(1/(k+1)) * sum_j u-^(k-j) u+^j``; reduces to ``c**k`` when both
    states equal ``c``.
    """
    total = math.fsum(u_minus ** (k - j) * u_plus**j for j in range(k + 1))
    return total / (k + 1)


def delta_weight_w0(p: RiemannProblem, sigma: float | None = None) -> float:
    """Growth rate ``w0 = -sigma [v] + [v u^k]`` of the Dirac weight.

    Jumps are taken as left minus right. Only defined for delta-shock data.
    """
    if classify(p) is not WaveClassification.DELTA_SHOCK:
        raise ClassificationError("delta weight requires u- > u+ (delta-shock data)")
    if sigma is None:
        sigma = shock_speed_sigma(p.u_minus, p.u_plus, p.k)
    k = p.k
    return math.fsum(
        (
            -sigma * p.v_minus,
            sigma * p.v_plus,
            p.v_minus * p.u_minus**k,
            -p.v_plus * p.u_plus**k,
        )
    )


def damping_integral(t, rate):
    """``S(t) = (1 - exp(-rate t)) / rate``, with ``S = t`` at ``rate = 0``.

    Accepts scalars or arrays for ``t``. Uses the Taylor series when
    ``|rate t| < SERIES_THRESHOLD`` so the undamped limit is reached
    without cancellation.
    """
    t_arr = np.asarray(t, dtype=float)
    if rate == 0.0:
        out = t_arr.copy()
    else:
        z = rate * t_arr
        small = np.abs(z) < SERIES_THRESHOLD
        with np.errstate(divide="ignore", invalid="ignore"):
            exact = -np.expm1(-z) / rate
        series = t_arr * (1.0 - z / 2.0 + z * z / 6.0 - z**3 / 24.0)
        out = np.where(small, series, exact)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _require_time(t, strict):
    t_arr = np.asarray(t, dtype=float)
    bad = t_arr <= 0 if strict else t_arr < 0
    if np.any(bad) or not np.all(np.isfinite(t_arr)):
        raise InvalidProblem(f"time must be {'> 0' if strict else '>= 0'}, got {t!r}")


def shock_position(p: RiemannProblem, sigma: float, t):
    """Discontinuity location ``x(t) = sigma * S(t)``."""
    _require_time(t, strict=False)
    return sigma * damping_integral(t, p.rate)


def delta_weight_at(p: RiemannProblem, w0: float, t):
    """Dirac weight ``w(t) = w0 * S(t)``; tends to ``w0/(alpha k)`` as t grows."""
    _require_time(t, strict=False)
    return w0 * damping_integral(t, p.rate)


def similarity_xi(x, t, alpha: float, k: int):
    """Similarity coordinate ``alpha k x / (1 - exp(-alpha k t))``; ``x/t`` at alpha = 0."""
    _require_time(t, strict=True)
    xi = np.asarray(x, dtype=float) / damping_integral(t, alpha * k)
    return float(xi) if np.ndim(xi) == 0 else xi


def undo_damping_transform(v_hat, u_hat, t, alpha: float):
    """Map a solution of the transformed system back: ``(v, u) = (v_hat, u_hat e^{-alpha t})``."""
    _require_time(t, strict=False)
    u = np.asarray(u_hat, dtype=float) * np.exp(-alpha * np.asarray(t, dtype=float))
    return v_hat, (float(u) if np.ndim(u) == 0 else u)


def kth_root(x, k: int):
    """Real k-th root; negative arguments are allowed for odd k."""
    x = np.asarray(x, dtype=float)
    if k % 2:
        out = np.sign(x) * np.abs(x) ** (1.0 / k)
    else:
        out = x ** (1.0 / k)
    return float(out) if out.ndim == 0 else out


def exact_solution(p: RiemannProblem) -> ExactSolution:
    cls = classify(p)
    sigma = shock_speed_sigma(p.u_minus, p.u_plus, p.k)
    w0 = delta_weight_w0(p, sigma) if cls is WaveClassification.DELTA_SHOCK else 0.0
    return ExactSolution(
        problem=p,
        classification=cls,
        sigma=sigma,
        w0=w0,
        extrapolated=cls is WaveClassification.CONTACT,
    )


def exact_fields(p: RiemannProblem, x, t):
    """Regular parts ``(v, u)`` of the exact solution sampled on an array ``x``.

    The Dirac part of a delta shock is not represented; at the shock point
    itself the mean of the two adjacent densities is returned.
    """
    _require_time(t, strict=True)
    x = np.asarray(x, dtype=float)
    k = p.k
    decay = math.exp(-p.alpha * t)
    s = damping_integral(t, p.rate)
    v = np.empty_like(x)
    u = np.empty_like(x)
    cls = classify(p)
    if cls is WaveClassification.RAREFACTION_FAN:
        xi = x / s
        left = xi < p.u_minus**k
        right = xi > p.u_plus**k
        fan = ~(left | right)
        v[left], u[left] = p.v_minus, p.u_minus * decay
        v[right], u[right] = p.v_plus, p.u_plus * decay
        v[fan] = 0.0
        u[fan] = kth_root(xi[fan], k) * decay
        return v, u
    front = shock_speed_sigma(p.u_minus, p.u_plus, k) * s
    left = x < front
    right = x > front
    v[left], u[left] = p.v_minus, p.u_minus * decay
    v[right], u[right] = p.v_plus, p.u_plus * decay
    on = ~(left | right)
    v[on] = 0.5 * (p.v_minus + p.v_plus)
    if cls is WaveClassification.CONTACT:
        u[on] = p.u_minus * decay
    else:
        u[on] = kth_root(shock_speed_sigma(p.u_minus, p.u_plus, k), k) * decay
    return v, u


def evaluate_exact(p: RiemannProblem, x: float, t: float) -> StateSample:
    """Exact solution at a single point ``(x, t)``, ``t > 0``.

    For a delta shock the point ``x == x(t)`` reports the Dirac weight
    ``w(t)``. The contact case (``u- == u+``) is a v-discontinuity moving
    with speed ``u^k`` and carries no Dirac mass.
    """
    _require_time(t, strict=True)
    x = float(x)
    cls = classify(p)
    v, u = exact_fields(p, np.array([x]), t)
    if cls is WaveClassification.DELTA_SHOCK:
        sol = exact_solution(p)
        if x == sol.position(t):
            decay = math.exp(-p.alpha * t)
            return StateSample(
                v_regular=float(v[0]),
                u=float(u[0]),
                on_singular_support=True,
                delta_weight=float(sol.weight(t)),
                u_alt=sol.sigma * decay,
            )
    return StateSample(v_regular=float(v[0]), u=float(u[0]))


@dataclass(frozen=True)
class EntropySample:
    t: float
    lower: float
    speed: float
    upper: float
    margin_lower: float
    margin_upper: float
    ok: bool


def characteristic_speed(u_state: float, k: int, alpha: float, t):
    """Speed ``(u e^{-alpha t})^k`` of the single characteristic family."""
    return u_state**k * np.exp(-alpha * k * np.asarray(t, dtype=float))


def entropy_check(p: RiemannProblem, sigma: float, t_samples) -> list[EntropySample]:
    """Lax admissibility of the delta shock: characteristics enter from both sides.

    Compares ``dx/dt = sigma e^{-alpha k t}`` with the characteristic speeds
    ``u+^k e^{-alpha k t}`` and ``u-^k e^{-alpha k t}`` of the two adjacent
    states. For ``k = 1`` this is the familiar
    ``u+ e^{-alpha t} < dx/dt < u- e^{-alpha t}``.
    """
    if classify(p) is not WaveClassification.DELTA_SHOCK:
        raise ClassificationError("entropy check applies to delta-shock data only")
    k = p.k
    # the decay factor is common to all three speeds, so admissibility is
    # decided on the undamped values; this stays exact when the factor underflows
    ok = p.u_plus**k < sigma < p.u_minus**k
    out = []
    for t in t_samples:
        t = float(t)
        _require_time(t, strict=False)
        speed = sigma * math.exp(-p.rate * t)
        lower = float(characteristic_speed(p.u_plus, k, p.alpha, t))
        upper = float(characteristic_speed(p.u_minus, k, p.alpha, t))
        out.append(
            EntropySample(
                t=t,
                lower=lower,
                speed=speed,
                upper=upper,
                margin_lower=speed - lower,
                margin_upper=upper - speed,
                ok=ok,
            )
        )
    return out
