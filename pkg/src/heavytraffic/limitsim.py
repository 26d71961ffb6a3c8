"""Sampling the Poisson limit functional.

The limit of the scaled drifted supremum is

    V = sup_{i >= 1, j >= 0} (g_j x_i - t_i**gamma)

over a Poisson process ``(t_i, x_i)`` with intensity ``dt x nu(dx)``.  The
supremum over ``j`` reduces to ``h(x) = g_sup x`` for ``x >= 0`` and
``h(x) = g_neg x`` for ``x < 0``, and ``V >= 0`` almost surely, so only
points with ``h(x) > t**gamma`` matter.  Marks are truncated at ``|x| > eps``
and times at ``t <= T``; :class:`TruncationPolicy` bounds both errors.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from . import streams
from .coeffs import envelope as coeff_envelope
from .exceptions import DomainError, RegimeError
from .scaling import BOUNDARY, BOUNDARY_MESSAGE, DIVERGENT, DIVERGENT_MESSAGE, regime
from .stats import SampleSet

__all__ = [
    "PoissonPoint",
    "PointSet",
    "TruncationPolicy",
    "default_policy",
    "sample_points",
    "sample_relevant_points",
    "mark_transform",
    "limit_functional",
    "block_max_tail",
    "block_tail_sum",
    "horizon_for_tolerance",
    "sample_block_maxima",
    "limit_cdf",
    "iter_limit",
    "mc_limit",
]


class PoissonPoint(NamedTuple):
    t: float
    x: float


@dataclass
class PointSet:
    """Poisson points stored column-wise."""

    t: np.ndarray
    x: np.ndarray

    def __len__(self):
        return self.t.size

    def __iter__(self):
        return (PoissonPoint(float(t), float(x)) for t, x in zip(self.t, self.x))

    def restrict(self, T=None, eps=None):
        keep = np.ones(self.t.size, dtype=bool)
        if T is not None:
            keep &= self.t <= T
        if eps is not None:
            keep &= np.abs(self.x) > eps
        return PointSet(self.t[keep], self.x[keep])


@dataclass(frozen=True)
class TruncationPolicy:
    """Time window ``[0, T]``, mark threshold ``eps`` and the target error ``tol``."""

    T: float
    eps: float
    tol: float

    def __post_init__(self):
        if not (self.T > 0 and self.eps > 0 and self.tol > 0):
            raise DomainError("T, eps and tol must all be positive")


def _check_heavy_traffic(alpha, gamma):
    reg = regime(alpha, gamma)
    if reg == DIVERGENT:
        raise RegimeError(DIVERGENT_MESSAGE)
    if reg == BOUNDARY:
        raise RegimeError(BOUNDARY_MESSAGE)


def default_policy(alpha, gamma, p, env, tol=None, x_ref=1.0, T=None):
    """Policy meeting ``tol`` split evenly between marks and time.

    ``eps = tol / (2 max(g_sup, |g_neg|))`` caps the small-mark error and
    ``T`` is the horizon whose block-maximum tail series beyond ``T`` is
    at most ``tol / 2`` at level ``x_ref``.
    """
    tol = 1e-3 * env.g_sup if tol is None else float(tol)
    eps = tol / (2.0 * env.scale)
    if T is None:
        T = horizon_for_tolerance(alpha, gamma, p, env.scale, x_ref, tol / 2.0)
    return TruncationPolicy(T=float(T), eps=eps, tol=tol)


def sample_points(measure, policy, rng):
    """Poisson points on ``[0, T] x {|x| > eps}``.

    The count is Poisson with mean ``T eps**(-alpha)``, times are uniform and
    marks follow ``nu`` restricted to ``|x| > eps``.
    """
    mean = policy.T * policy.eps ** (-measure.alpha)
    n = int(rng.poisson(mean))
    t = rng.uniform(0.0, policy.T, n)
    x = measure.sample_marks(rng, n, policy.eps)
    return PointSet(t, x)


def _side_mass(weight, c, alpha, gamma, eps, T):
    """Mass of ``{t <= T, |x| > max(eps, t**gamma / c)}`` and its split point."""
    t_eps = (c * eps) ** (1.0 / gamma)
    flat = weight * eps ** (-alpha)
    if T <= t_eps:
        return flat * T, flat * T, t_eps
    e = alpha * gamma - 1.0
    curved = weight * c ** alpha * (t_eps ** (-e) - T ** (-e)) / e
    return flat * t_eps + curved, flat * t_eps, t_eps


def _sample_side(rng, weight, c, alpha, gamma, eps, T):
    total, m1, t_eps = _side_mass(weight, c, alpha, gamma, eps, T)
    n = int(rng.poisson(total))
    u = rng.random(n) * total
    flat = weight * eps ** (-alpha)
    e = alpha * gamma - 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        curved = (t_eps ** (-e) - (u - m1) * e / (weight * c ** alpha)) ** (-1.0 / e)
    t = np.where(u < m1, u / flat, curved)
    floor = np.maximum(eps, t ** gamma / c)
    v = 1.0 - rng.random(n)
    return t, floor * v ** (-1.0 / alpha)


def sample_relevant_points(measure, env, gamma, policy, rng):
    """Poisson points that can lift the functional above its 0 floor.

    Samples the restriction of the point process to
    ``{t <= T, |x| > eps, h(x) > t**gamma}`` exactly: the time marginal is
    drawn by inverting its integrated intensity and the mark given the time
    is Pareto above ``max(eps, t**gamma / c)``.  Every discarded point has
    ``h(x) - t**gamma <= 0`` or ``|x| <= eps``, so the truncated functional
    is unchanged while the expected count stays finite even for ``T = inf``.
    """
    alpha = measure.alpha
    _check_heavy_traffic(alpha, gamma)
    ts, xs = [], []
    if measure.p > 0:
        t, m = _sample_side(rng, measure.p, env.g_sup, alpha, gamma, policy.eps, policy.T)
        ts.append(t)
        xs.append(m)
    if measure.q > 0 and env.g_neg < 0:
        t, m = _sample_side(rng, measure.q, -env.g_neg, alpha, gamma, policy.eps, policy.T)
        ts.append(t)
        xs.append(-m)
    if not ts:
        return PointSet(np.empty(0), np.empty(0))
    return PointSet(np.concatenate(ts), np.concatenate(xs))


def mark_transform(env, x):
    """``h(x) = sup_j g_j x``: ``g_sup x`` for ``x >= 0``, ``g_neg x`` otherwise."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, env.g_sup * x, env.g_neg * x)
    return out if out.ndim else float(out)


def limit_functional(points, env, gamma):
    """``max(0, max_i h(x_i) - t_i**gamma)`` over a point set."""
    if len(points) == 0:
        return 0.0
    x = points.x
    if env.g_neg == 0.0:
        # negative marks give h = 0 < t**gamma contributions, never above the floor
        mask = x > 0
        if not mask.any():
            return 0.0
        vals = env.g_sup * x[mask] - points.t[mask] ** gamma
    else:
        vals = mark_transform(env, x) - points.t ** gamma
    return max(0.0, float(np.max(vals)))


def block_max_tail(x, k, alpha, p, c=1.0, gamma=None):
    """``P(M_k > x) = 1 - exp(-p ((x + k**gamma) / c)**(-alpha))``.

    ``M_k`` is the largest ``c x_i - k**gamma`` over points with
    ``t_i`` in ``[k, k+1)``.
    """
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(x <= 0) or c <= 0 or p <= 0:
        raise DomainError("block_max_tail needs x > 0, c > 0 and p > 0")
    if np.any(k < 0):
        raise DomainError("block index must be nonnegative")
    if gamma is None:
        if np.any(k > 0):
            raise DomainError("gamma is required for blocks k > 0")
        shift = 0.0
    else:
        shift = k ** gamma
    out = -np.expm1(-p * ((x + shift) / c) ** (-alpha))
    return out if out.ndim else float(out)


_DIRECT_TERMS = 1 << 16


def _term(s, alpha, gamma, p, c, x):
    return -np.expm1(-p * ((x + np.asarray(s, dtype=float) ** gamma) / c) ** (-alpha))


def _tail_from(m, alpha, gamma, p, c, x):
    """``sum_{k >= m} term(k)`` by Euler-Maclaurin; accurate for ``m >= 2**16``."""
    m = float(m)
    e = alpha * gamma - 1.0

    def integrand(v):
        s = m * math.exp(v)
        return float(_term(s, alpha, gamma, p, c, x)) * s

    # substitute s = m e^v; beyond v_max the term is p c^alpha s^(-alpha gamma) to
    # relative order s^(-gamma)
    v_max = min(40.0 / e, 600.0 / gamma - math.log(m))
    integral, _ = integrate.quad(integrand, 0.0, v_max, epsabs=0.0, epsrel=1e-13, limit=400)
    integral += p * c ** alpha * math.exp(-e * (math.log(m) + v_max)) / e
    u = p * ((x + m ** gamma) / c) ** (-alpha)
    f = -math.expm1(-u)
    du = -alpha * u * gamma * m ** (gamma - 1.0) / (x + m ** gamma)
    df = math.exp(-u) * du
    return integral + 0.5 * f - df / 12.0


def block_tail_sum(x, alpha, gamma, p, c, start, stop=None):
    """``sum_{start <= k < stop} P(M_k > x)``; ``stop=None`` means infinity."""
    def upto(m):
        # sum_{0 <= k < m}
        if m <= _DIRECT_TERMS:
            return float(np.sum(_term(np.arange(int(m)), alpha, gamma, p, c, x)))
        head = float(np.sum(_term(np.arange(_DIRECT_TERMS), alpha, gamma, p, c, x)))
        return head + _tail_from(_DIRECT_TERMS, alpha, gamma, p, c, x) - _tail_from(m, alpha, gamma, p, c, x)

    if stop is None:
        if start >= _DIRECT_TERMS:
            return _tail_from(start, alpha, gamma, p, c, x)
        head = float(np.sum(_term(np.arange(int(start), _DIRECT_TERMS), alpha, gamma, p, c, x)))
        return head + _tail_from(_DIRECT_TERMS, alpha, gamma, p, c, x)
    return upto(stop) - upto(start)


def horizon_for_tolerance(alpha, gamma, p, c, x_ref, tol):
    """Smallest integer ``T >= 1`` with ``sum_{k >= T} P(M_k > x_ref) <= tol``.

    The first ``2**16`` terms are summed directly; beyond, the remainder is
    evaluated by Euler-Maclaurin around the integral of the term, whose
    decay is ``p c**alpha k**(-alpha gamma)``.
    """
    if alpha * gamma <= 1.0:
        raise RegimeError("the block-maximum series diverges unless alpha*gamma > 1")
    if not tol > 0:
        raise DomainError("tol must be positive")
    terms = _term(np.arange(_DIRECT_TERMS), alpha, gamma, p, c, x_ref)
    rest = _tail_from(_DIRECT_TERMS, alpha, gamma, p, c, x_ref)
    # tails[T] = sum_{k >= T} for T < 2**16
    tails = np.cumsum(terms[::-1])[::-1] + rest
    if rest <= tol:
        ok = np.flatnonzero(tails <= tol)
        return max(1, int(ok[0]))
    lo, hi = _DIRECT_TERMS, 2 * _DIRECT_TERMS
    while _tail_from(hi, alpha, gamma, p, c, x_ref) > tol:
        lo, hi = hi, 2 * hi
    while hi - lo > max(1, int(lo * 1e-12)):
        mid = (lo + hi) // 2
        if _tail_from(mid, alpha, gamma, p, c, x_ref) <= tol:
            hi = mid
        else:
            lo = mid
    return int(hi)


def sample_block_maxima(measure, k, gamma, c, eps, n_blocks, rng):
    """``n_blocks`` independent draws of ``M_k = max c x_i - k**gamma``.

    Points on ``[k, k+1) x {|x| > eps}`` are drawn as in
    :func:`sample_points`; only positive marks count.  A block without a
    positive mark above ``eps`` reports ``c eps - k**gamma``, which leaves
    ``P(M_k <= x)`` exact for every ``x >= c eps - k**gamma``.
    """
    counts = rng.poisson(eps ** (-measure.alpha), n_blocks)
    marks = measure.sample_marks(rng, int(counts.sum()), eps)
    marks = np.maximum(marks, eps)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    best = np.full(n_blocks, eps)
    nz = counts > 0
    if marks.size:
        best[nz] = np.maximum.reduceat(marks, starts[nz])
    return c * best - float(k) ** gamma


def limit_cdf(x, alpha, gamma, p, c=1.0):
    """Exact ``P(V <= x)`` when negative marks cannot matter (``g_neg = 0``).

    ``V <= x`` means no point in ``{c x_i - t_i**gamma > x}``, whose mass is
    ``p c**alpha x**(1/gamma - alpha) B(1/gamma, alpha - 1/gamma) / gamma``.
    """
    x = np.asarray(x, dtype=float)
    b = special.beta(1.0 / gamma, alpha - 1.0 / gamma) / gamma
    with np.errstate(divide="ignore"):
        mass = p * c ** alpha * b * x ** (1.0 / gamma - alpha)
    out = np.where(x > 0, np.exp(-mass), 0.0)
    return out if out.ndim else float(out)


def iter_limit(ctx, policy, replicates, seed, env=None):
    """Yield ``(r, value, point_count)`` in replicate order.

    Replicate ``r`` uses stream ``(seed, LIMIT, r)``.
    """
    alpha, gamma = ctx.alpha, ctx.gamma
    _check_heavy_traffic(alpha, gamma)
    env = coeff_envelope(ctx.coeff) if env is None else env
    measure = ctx.innov.levy_measure()
    for r in range(int(replicates)):
        rng = streams.stream(seed, streams.LIMIT, r)
        pts = sample_relevant_points(measure, env, gamma, policy, rng)
        yield r, limit_functional(pts, env, gamma), len(pts)


def mc_limit(ctx, policy, replicates, seed, env=None):
    """Replicates of the truncated limit functional.

    Replicate ``r`` uses stream ``(seed, LIMIT, r)``.  ``meta`` records the
    realized ``T``, ``eps`` and the mean number of relevant points.
    """
    out = list(iter_limit(ctx, policy, replicates, seed, env))
    values = np.array([v for _, v, _ in out])
    counts = np.array([n for _, _, n in out], dtype=np.int64)
    params = dict(ctx.params(), kind="limit")
    meta = {"T": policy.T, "eps": policy.eps, "tol": policy.tol,
            "mean_points": float(counts.mean())}
    return SampleSet(values, label="limit", seed=seed, params=params, aux=counts, meta=meta)
