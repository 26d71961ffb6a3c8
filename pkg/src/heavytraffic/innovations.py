"""Centered heavy-tailed innovations and their Levy measure.

Two families are provided, both with exact power tails calibrated so that
``t**alpha * P(|X| > t) -> 1`` and ``P(X > t) / P(|X| > t) -> p``:

* :class:`TwoSidedPareto` -- ``X = sign * M - shift`` with ``M`` Pareto of
  index ``alpha`` on ``[1, inf)``, ``sign = +1`` with probability ``p``.
  Every quantity is closed-form.
* :class:`ExactStable` -- a zero-mean alpha-stable law with skewness
  ``p - q``, sampled by the Chambers-Mallows-Stuck transform.  Its CDF and
  quantiles are numerical and meant for validation, not hot loops.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .exceptions import DomainError, ValidationError

__all__ = [
    "TailTriple",
    "InnovationModel",
    "TwoSidedPareto",
    "ExactStable",
    "LevyMeasure",
    "make_innovation",
    "validate_tail_domination",
]


@dataclass(frozen=True)
class TailTriple:
    """Tail index ``alpha`` in (1, 2) and balance ``p + q = 1`` with ``p > 0``."""

    alpha: float
    p: float
    q: float = None

    def __post_init__(self):
        alpha, p = float(self.alpha), float(self.p)
        q = 1.0 - p if self.q is None else float(self.q)
        if not 1.0 < alpha < 2.0:
            raise DomainError(f"alpha must lie in (1, 2), got {alpha!r}")
        if not 0.0 < p <= 1.0:
            raise DomainError(f"p must lie in (0, 1], got {p!r}")
        if not 0.0 <= q < 1.0 or abs(p + q - 1.0) > 1e-12:
            raise DomainError(f"tail balance requires p + q = 1, got p={p}, q={q}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)


def _bisect_decreasing(f, target, lo, hi, rtol=1e-12, maxiter=400):
    """Smallest ``z`` in ``[lo, hi]`` with ``f(z) <= target`` for nonincreasing ``f``."""
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if f(mid) <= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rtol * hi:
            break
    return hi


class InnovationModel:
    """Interface shared by the innovation families."""

    kind = None

    def __init__(self, tail):
        self.tail = tail

    @property
    def alpha(self):
        return self.tail.alpha

    @property
    def p(self):
        return self.tail.p

    @property
    def q(self):
        return self.tail.q

    def params(self):
        return {"kind": self.kind, "alpha": self.alpha, "p": self.p}

    def __repr__(self):
        return f"{type(self).__name__}(alpha={self.alpha}, p={self.p})"

    def sample(self, rng, size):
        raise NotImplementedError

    def abs_sf(self, z):
        raise NotImplementedError

    def levy_measure(self):
        return LevyMeasure(self.tail)

    def abs_quantile(self, t):
        """``F_*^<-(1 - 1/t)``, the ``1 - 1/t`` quantile of ``|X|``.

        Solved by bisection on the exact survival function of ``|X|`` to a
        relative tolerance of ``1e-12``.  ``t = 1`` returns the essential
        infimum of ``|X|``.
        """
        t = float(t)
        if not t >= 1.0:
            raise DomainError(f"level t must be >= 1, got {t!r}")
        hi = self._abs_upper_bracket(t)
        if t == 1.0:
            return self.abs_infimum(hi)
        return _bisect_decreasing(self.abs_sf, 1.0 / t, 0.0, hi)

    def abs_infimum(self, hi=1.0):
        """Essential infimum of ``|X|``, ``sup{z: P(|X| > z) = 1}``."""
        while self.abs_sf(hi) >= 1.0:
            hi *= 2.0
        return _bisect_decreasing(lambda z: float(self.abs_sf(z) >= 1.0), 0.5, 0.0, hi)

    def _abs_upper_bracket(self, t):
        hi = max(1.0, t ** (1.0 / self.alpha))
        while self.abs_sf(hi) > 1.0 / t:
            hi *= 2.0
        return hi


class TwoSidedPareto(InnovationModel):
    """Centered two-sided Pareto innovations.

    ``X = sign * M - shift`` where ``P(M > m) = m**(-alpha)`` for ``m >= 1``
    and ``shift = (p - q) * alpha / (alpha - 1)`` makes the mean exactly 0.
    The CDF is flat at level ``q`` on ``[-1 - shift, 1 - shift)``.
    """

    kind = "two-sided-pareto"

    def __init__(self, alpha, p):
        super().__init__(TailTriple(alpha, p))
        a = self.alpha
        self.shift = (self.p - self.q) * a / (a - 1.0)

    def abs_infimum(self, hi=1.0):
        # branch +M - shift covers [1 - shift, inf), branch -M - shift covers (-inf, -1 - shift]
        s = self.shift
        lows = []
        if self.p > 0:
            lows.append(max(1.0 - s, 0.0))
        if self.q > 0:
            lows.append(max(1.0 + s, 0.0))
        return min(lows)

    def cdf(self, x):
        y = np.asarray(x, dtype=float) + self.shift
        with np.errstate(divide="ignore", invalid="ignore"):
            upper = 1.0 - self.p * np.abs(y) ** (-self.alpha)
            lower = self.q * np.abs(y) ** (-self.alpha)
        out = np.where(y >= 1.0, upper, np.where(y < -1.0, lower, self.q))
        return out if out.ndim else float(out)

    def sf(self, x):
        """``P(X > x)``, accurate in the far upper tail."""
        y = np.asarray(x, dtype=float) + self.shift
        with np.errstate(divide="ignore", invalid="ignore"):
            upper = self.p * np.abs(y) ** (-self.alpha)
            lower = 1.0 - self.q * np.abs(y) ** (-self.alpha)
        out = np.where(y >= 1.0, upper, np.where(y < -1.0, lower, self.p))
        return out if out.ndim else float(out)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0.0) | (u >= 1.0)):
            raise DomainError("quantile level must lie in (0, 1)")
        p, q, a = self.p, self.q, self.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            low = -(u / q) ** (-1.0 / a) if q > 0 else np.full_like(u, -np.inf)
            high = ((1.0 - u) / p) ** (-1.0 / a)
        out = np.where(u < q, low, high) - self.shift
        return out if out.ndim else float(out)

    def upper_tail(self, t):
        return self.sf(t)

    def lower_tail(self, t):
        """``P(-X > t)``."""
        return self.cdf(-np.asarray(t, dtype=float))

    def abs_sf(self, z):
        z = float(z)
        s, a = self.shift, self.alpha

        def gbar(m):
            return 1.0 if m <= 1.0 else m ** (-a)

        pos = gbar(s + z) + (1.0 - gbar(s - z))
        neg = gbar(z - s) + (1.0 - gbar(-s - z))
        return min(1.0, self.p * pos + self.q * neg)

    def sample(self, rng, size):
        """Draw ``size`` innovations by inverse transform of one uniform each.

        The sign is ``+1`` when ``U < p``; the remaining uniform mass is
        rescaled to (0, 1] and mapped to ``M = V**(-1/alpha)``.  Using one
        uniform per draw makes a path of length ``n`` a prefix of any longer
        path drawn from the same stream.
        """
        u = rng.random(size)
        p, q = self.p, self.q
        up = u < p
        v = np.where(up, 1.0 - u / p, 1.0 - (u - p) / q if q > 0 else 1.0)
        m = v ** (-1.0 / self.alpha)
        return np.where(up, m, -m) - self.shift


class ExactStable(InnovationModel):
    """Zero-mean alpha-stable innovations with skewness ``beta = p - q``.

    The scale is ``C_alpha**(-1/alpha)`` with
    ``C_alpha = (1 - alpha) / (Gamma(2 - alpha) cos(pi alpha / 2))`` so that
    ``t**alpha * P(|X| > t) -> 1``.
    """

    kind = "exact-stable"

    def __init__(self, alpha, p):
        super().__init__(TailTriple(alpha, p))
        a = self.alpha
        self.beta = self.p - self.q
        c_alpha = (1.0 - a) / (special.gamma(2.0 - a) * math.cos(math.pi * a / 2.0))
        self.scale = c_alpha ** (-1.0 / a)
        self.shift = 0.0
        self._dist = None
        self._switch = None

    @property
    def dist(self):
        if self._dist is None:
            if stats.levy_stable.parameterization != "S1":
                raise RuntimeError("scipy levy_stable must use the S1 parameterization")
            self._dist = stats.levy_stable(self.alpha, self.beta, loc=0.0, scale=self.scale)
        return self._dist

    def sample(self, rng, size):
        """Chambers-Mallows-Stuck draws, ``2 * size`` uniforms consumed."""
        a, b = self.alpha, self.beta
        v = rng.uniform(-math.pi / 2.0, math.pi / 2.0, size)
        w = rng.exponential(1.0, size)
        tan_pa = math.tan(math.pi * a / 2.0)
        shift_b = math.atan(b * tan_pa) / a
        s = (1.0 + b * b * tan_pa * tan_pa) ** (1.0 / (2.0 * a))
        arg = a * (v + shift_b)
        x = (s * np.sin(arg) / np.cos(v) ** (1.0 / a)
             * (np.cos(v - arg) / w) ** ((1.0 - a) / a))
        return self.scale * x

    def _series_coefficients(self, side, terms=None):
        # Zolotarev's C-form: lambda and theta from (alpha, beta, scale)
        a = self.alpha
        b = self.beta if side == "upper" else -self.beta
        tan_pa = math.tan(math.pi * a / 2.0)
        theta = 2.0 * math.atan(b * tan_pa) / (math.pi * a)
        lam = self.scale ** a * math.sqrt(1.0 + b * b * tan_pa * tan_pa)
        return [(-1.0) ** (n + 1) / math.factorial(n) * special.gamma(n * a)
                * math.sin(math.pi * n * a * (1.0 + theta) / 2.0) * lam ** n / math.pi
                for n in range(1, (terms or SERIES_TERMS) + 1)]

    @property
    def tail_switch(self):
        """Level beyond which the tail series replaces numerical integration.

        The first omitted term (bounded by its magnitude without the sine
        factor) must be below ``1e-13`` of the leading one; never below
        ``20 * scale``.
        """
        if self._switch is None:
            a, n = self.alpha, SERIES_TERMS + 1
            cut = 20.0 * self.scale
            tan_pa = math.tan(math.pi * a / 2.0)
            for side in ("upper", "lower"):
                c1 = self._series_coefficients(side, 1)[0]
                if c1 <= 0.0:
                    continue
                b = self.beta if side == "upper" else -self.beta
                lam = self.scale ** a * math.sqrt(1.0 + b * b * tan_pa * tan_pa)
                bound = special.gamma(n * a) / math.factorial(n) * lam ** n / math.pi
                cut = max(cut, (bound / c1 * 1e13) ** (1.0 / ((n - 1) * a)))
            self._switch = cut
        return self._switch

    def _tail_series(self, x, side):
        """Asymptotic expansion of ``P(X > x)`` (``side='upper'``) or ``P(X < -x)``."""
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for n, c in enumerate(self._series_coefficients(side), start=1):
            total += c * x ** (-n * self.alpha)
        return np.maximum(total, 0.0)

    def _branches(self, x, upper):
        x = np.asarray(x, dtype=float)
        cut = self.tail_switch
        hi, lo = x >= cut, x <= -cut
        mid = ~(hi | lo)
        out = np.empty_like(x)
        if np.any(mid):
            out[mid] = self.dist.sf(x[mid]) if upper else self.dist.cdf(x[mid])
        up = self._tail_series(x[hi], "upper")
        down = self._tail_series(-x[lo], "lower")
        out[hi] = up if upper else 1.0 - up
        out[lo] = 1.0 - down if upper else down
        return out if out.ndim else float(out)

    def cdf(self, x):
        return self._branches(x, upper=False)

    def sf(self, x):
        return self._branches(x, upper=True)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0.0) | (u >= 1.0)):
            raise DomainError("quantile level must lie in (0, 1)")
        out = np.array([self._quantile1(float(v)) for v in u.ravel()]).reshape(u.shape)
        return out if out.ndim else float(out)

    def _quantile1(self, u):
        lo, hi = -1.0, 1.0
        while self.cdf(lo) > u:
            lo *= 2.0
        while self.cdf(hi) < u:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) >= u:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-13 * max(1.0, abs(hi)):
                break
        return hi

    def abs_sf(self, z):
        z = float(z)
        if z <= 0.0:
            return 1.0
        return float(self.sf(z) + self.cdf(-z))

    def upper_tail(self, t):
        return self.sf(t)

    def lower_tail(self, t):
        """Upper bound on ``P(-X > t)``.

        For ``beta = 1`` this is the Chernoff bound from the Laplace transform
        ``E exp(-l X) = exp(scale**alpha l**alpha / |cos(pi alpha / 2)|)``;
        otherwise the leading power tail ``q t**(-alpha)``.
        """
        t = np.asarray(t, dtype=float)
        a = self.alpha
        if self.q > 0:
            return self.q * t ** (-a)
        k = self.scale ** a / abs(math.cos(math.pi * a / 2.0))
        lam = (t / (a * k)) ** (1.0 / (a - 1.0))
        return np.exp(-lam * t * (a - 1.0) / a)


SERIES_TERMS = 8


def make_innovation(kind, alpha, p):
    """Build an innovation model from its config name."""
    if kind == TwoSidedPareto.kind:
        return TwoSidedPareto(alpha, p)
    if kind == ExactStable.kind:
        return ExactStable(alpha, p)
    raise ValidationError(f"unknown innovation kind {kind!r}")


def validate_tail_domination(model, c=1.0, grid=None):
    """Check ``P(-X > t) <= c P(X > t log t) log t`` on a probe grid.

    The condition only matters when ``q`` vanishes; for ``q > 0`` the check
    is skipped and ``None`` is returned.
    """
    if model.q > 0:
        return None
    if grid is None:
        grid = 10.0 ** np.arange(2, 9)
    t = np.asarray(grid, dtype=float)
    lhs = np.asarray(model.lower_tail(t), dtype=float)
    rhs = c * np.asarray(model.upper_tail(t * np.log(t)), dtype=float) * np.log(t)
    return bool(np.all(lhs <= rhs))


class LevyMeasure:
    """Levy measure with density ``p a x**(-a-1)`` on (0, inf) and
    ``q a (-x)**(-a-1)`` on (-inf, 0)."""

    def __init__(self, tail):
        self.tail = tail

    @property
    def alpha(self):
        return self.tail.alpha

    @property
    def p(self):
        return self.tail.p

    @property
    def q(self):
        return self.tail.q

    def density(self, x):
        x = np.asarray(x, dtype=float)
        a = self.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(x > 0, self.p * a * np.abs(x) ** (-a - 1.0),
                           np.where(x < 0, self.q * a * np.abs(x) ** (-a - 1.0), 0.0))
        return out if out.ndim else float(out)

    def tail_mass(self, x, side="upper"):
        """``nu((x, inf))`` for ``side='upper'``, ``nu((-inf, -x))`` for ``'lower'``."""
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("tail level must be positive")
        if side == "upper":
            w = self.p
        elif side == "lower":
            w = self.q
        else:
            raise DomainError(f"side must be 'upper' or 'lower', got {side!r}")
        out = w * x ** (-self.alpha)
        return out if out.ndim else float(out)

    def sample_marks(self, rng, n, eps):
        """``n`` marks from ``nu`` restricted to ``{|x| > eps}``, normalized."""
        u = rng.random(n)
        v = 1.0 - rng.random(n)
        mag = eps * v ** (-1.0 / self.alpha)
        return np.where(u < self.p, mag, -mag)


def levy_tail(measure, x, side="upper"):
    return measure.tail_mass(x, side)
