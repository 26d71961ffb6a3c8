"""Moving-average coefficients of fractional and FARIMA filters.

A filter is described by the power series ``g(x) = sum_i g_i x**i``.  Four
families are supported:

``fractional``
    ``(1 - x)**(-gamma)``, with ``g_0 = 1`` and ``g_i = g_{i-1} (i-1+gamma) / i``.
``farima``
    ``(1 - x)**(-gamma) * num(x) / den(x)`` for real polynomials given by their
    ascending coefficients.  ``den`` must not vanish on the closed unit disk.
``example``
    ``g_0 = 1`` and ``g_i = i**(gamma-1)`` for ``i >= 1``.
``explicit``
    A user supplied finite list; ``gamma`` is carried as metadata only.

Coefficients are generated by forward recursion and cached.  Partial sums
``g_[0,t) = sum_{0 <= i < t} g_i`` come from cumulative sums of the cache up
to ``cache_limit`` and from exact or asymptotically exact closed forms beyond
it, so that scale computations at ``t ~ 1e17`` stay cheap.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal, special

from .exceptions import DomainError, HorizonError, ValidationError

__all__ = [
    "CoefficientModel",
    "CoefficientEnvelope",
    "fractional_coeffs",
    "farima_coeffs",
    "partial_sum",
    "envelope",
]

KINDS = ("fractional", "farima", "example", "explicit")
ROOT_TOL = 1e-9


def _check_gamma(gamma):
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    return gamma


def fractional_coeffs(gamma, n):
    """First ``n`` coefficients of ``(1 - x)**(-gamma)``.

    Parameters
    ----------
    gamma : float
        Fractional integration order, ``0 < gamma < 1``.
    n : int
        Number of coefficients, ``n >= 1``.

    Returns
    -------
    ndarray
        ``g_0, ..., g_{n-1}``; positive and strictly decreasing.
    """
    gamma = _check_gamma(gamma)
    n = int(n)
    if n < 1:
        raise DomainError("n must be at least 1")
    return _fractional_block(gamma, 0, n, 1.0)


def _fractional_block(gamma, start, stop, prev):
    # prev is g_{start-1}; ignored when start == 0
    i = np.arange(max(start, 1), stop, dtype=float)
    ratios = (i - 1.0 + gamma) / i
    tail = prev * np.cumprod(ratios)
    if start == 0:
        return np.concatenate(([1.0], tail))
    return tail


def _example_block(gamma, start, stop):
    i = np.arange(start, stop, dtype=float)
    out = np.empty_like(i)
    pos = i > 0
    out[pos] = i[pos] ** (gamma - 1.0)
    out[~pos] = 1.0
    return out


def _trim(poly):
    poly = np.atleast_1d(np.asarray(poly, dtype=float))
    if poly.ndim != 1 or poly.size == 0:
        raise ValidationError("polynomial coefficients must be a nonempty 1-d sequence")
    nz = np.flatnonzero(poly)
    if nz.size == 0:
        raise ValidationError("polynomial is identically zero")
    return poly[: nz[-1] + 1]


@dataclass(frozen=True)
class CoefficientEnvelope:
    """Global extremes of a coefficient sequence.

    ``g_sup`` is ``max_j g_j`` attained at ``j_sup``; ``g_neg`` is
    ``min(0, inf_j g_j)`` attained at ``j_neg`` (``None`` when every
    coefficient is nonnegative).
    """

    g_sup: float
    j_sup: int
    g_neg: float
    j_neg: int | None

    @property
    def scale(self):
        """Largest coefficient magnitude, ``max(g_sup, |g_neg|)``."""
        return max(self.g_sup, -self.g_neg)


class CoefficientModel:
    """Coefficient generator with cached values and prefix sums.

    Use the constructors :meth:`fractional`, :meth:`farima`, :meth:`example`
    and :meth:`explicit` rather than calling ``__init__`` directly.

    The cache only grows through :meth:`extend` (called implicitly by the
    accessors).  Call ``extend`` before sharing a model across threads; after
    that every read is side-effect free.
    """

    def __init__(self, kind, gamma, numerator=(1.0,), denominator=(1.0,),
                 values=None, cache_limit=2**22):
        if kind not in KINDS:
            raise ValidationError(f"unknown coefficient kind {kind!r}; expected one of {KINDS}")
        self.kind = kind
        self.gamma = _check_gamma(gamma)
        self.numerator = _trim(numerator)
        self.denominator = _trim(denominator)
        self.cache_limit = int(cache_limit)
        self._values = None
        if kind == "farima":
            self._validate_rational()
            self._series = self._rational_series()
        elif kind == "explicit":
            if values is None:
                raise ValidationError("explicit kind requires a list of values")
            vals = np.asarray(values, dtype=float)
            if vals.ndim != 1 or vals.size == 0 or not np.all(np.isfinite(vals)):
                raise ValidationError("explicit values must be a nonempty finite 1-d sequence")
            self._values = vals
        self._cache = np.empty(0)
        self._prefix = np.zeros(1)
        if kind == "explicit":
            self._cache = self._values.copy()
            self._prefix = np.concatenate(([0.0], np.cumsum(self._cache)))

    # -- constructors -----------------------------------------------------

    @classmethod
    def fractional(cls, gamma, **kw):
        return cls("fractional", gamma, **kw)

    @classmethod
    def farima(cls, gamma, numerator, denominator, **kw):
        return cls("farima", gamma, numerator=numerator, denominator=denominator, **kw)

    @classmethod
    def example(cls, gamma, **kw):
        return cls("example", gamma, **kw)

    @classmethod
    def explicit(cls, values, gamma, **kw):
        return cls("explicit", gamma, values=values, **kw)

    def __repr__(self):
        extra = ""
        if self.kind == "farima":
            extra = f", numerator={self.numerator.tolist()}, denominator={self.denominator.tolist()}"
        elif self.kind == "explicit":
            extra = f", n_values={self._values.size}"
        return f"CoefficientModel(kind={self.kind!r}, gamma={self.gamma}{extra})"

    # -- validation -------------------------------------------------------

    def _validate_rational(self):
        den = self.denominator
        if den[0] == 0.0:
            raise ValidationError("denominator vanishes at 0")
        if den.size > 1:
            roots = np.roots(den[::-1])
            bad = roots[np.abs(roots) <= 1.0 + ROOT_TOL]
            if bad.size:
                raise ValidationError(
                    f"denominator has roots in the closed unit disk: {np.round(bad, 12).tolist()}"
                )
        if self.numerator.sum() == 0.0:
            raise ValidationError("rational factor vanishes at x = 1")

    def _rational_series(self, max_len=1 << 16):
        # power series of num/den, long enough that the tail is negligible
        length = 256
        while True:
            imp = np.zeros(length)
            imp[0] = 1.0
            r = signal.lfilter(self.numerator, self.denominator, imp)
            tail = np.abs(r[length // 2:]).max()
            if tail <= 1e-18 * max(1.0, np.abs(r).max()) or length >= max_len:
                return r
            length *= 2

    # -- coefficient access -------------------------------------------------

    def __len__(self):
        return self._cache.size

    @property
    def max_index(self):
        """Number of available coefficients (``inf`` unless explicit)."""
        return self._values.size if self.kind == "explicit" else math.inf

    def extend(self, n):
        """Grow the cache so at least ``n`` coefficients are stored."""
        n = int(n)
        if n <= self._cache.size:
            return
        if self.kind == "explicit":
            raise DomainError(
                f"explicit model holds {self._values.size} coefficients, {n} requested"
            )
        target = max(n, 2 * self._cache.size, 64)
        m = self._cache.size
        if self.kind == "fractional":
            prev = self._cache[-1] if m else 1.0
            new = _fractional_block(self.gamma, m, target, prev)
        elif self.kind == "example":
            new = _example_block(self.gamma, m, target)
        else:
            frac = fractional_coeffs(self.gamma, target)
            full = signal.lfilter(self.numerator, self.denominator, frac)
            new = full[m:]
        self._cache = np.concatenate((self._cache, new))
        start = self._prefix[-1]
        self._prefix = np.concatenate((self._prefix, start + np.cumsum(new)))

    def coefficients(self, n):
        """Return ``g_0, ..., g_{n-1}`` as a read-only array."""
        n = int(n)
        if n < 0:
            raise DomainError("n must be nonnegative")
        self.extend(n)
        out = self._cache[:n]
        out.flags.writeable = False
        return out

    def partial_sums(self, n):
        """Return ``g_[0,m)`` for ``m = 1, ..., n`` as a read-only array."""
        n = int(n)
        self.extend(n)
        out = self._prefix[1:n + 1]
        out.flags.writeable = False
        return out

    def coefficient(self, i):
        """Single coefficient ``g_i``; closed forms beyond the cache."""
        if i < self._cache.size:
            return float(self._cache[int(i)])
        if i < self.cache_limit or self.kind == "explicit":
            self.extend(int(i) + 1)
            return float(self._cache[int(i)])
        i = float(i)
        if self.kind == "fractional":
            return float(_rising(i + 1.0, self.gamma - 1.0) / special.gamma(self.gamma))
        if self.kind == "example":
            return i ** (self.gamma - 1.0)
        r = self._series
        k = np.arange(r.size, dtype=float)
        frac = _rising(i - k + 1.0, self.gamma - 1.0) / special.gamma(self.gamma)
        return float(np.dot(r, frac))

    def partial_sum(self, t):
        """``g_[0,t) = sum_{0 <= i < t} g_i`` for real ``t >= 0``."""
        if t < 0:
            raise DomainError("t must be nonnegative")
        n = math.ceil(t) if t < 2.0**53 else float(t)
        if n < self._prefix.size:
            return float(self._prefix[int(n)])
        if n <= self.cache_limit or self.kind == "explicit":
            self.extend(int(n))
            return float(self._prefix[int(n)])
        return self._partial_sum_far(float(n))

    def _partial_sum_far(self, n):
        g = self.gamma
        if self.kind == "fractional":
            # exact: g_[0,n) = Gamma(n+gamma) / (Gamma(n) Gamma(1+gamma))
            return float(_rising(n, g) / special.gamma(1.0 + g))
        if self.kind == "example":
            self.extend(self.cache_limit)
            a = float(self._prefix.size - 1)
            return float(self._prefix[-1] + _power_sum(g - 1.0, a, n))
        # farima: partial sums are the coefficients of g(x)/(1-x)
        r = self._series
        k = np.arange(r.size, dtype=float)
        c = _rising(n - k, g) / special.gamma(1.0 + g)
        return float(np.dot(r, c))


def _rising(x, d):
    """``Gamma(x + d) / Gamma(x)`` for ``x > 0``, ``|d| < 1``.

    scipy's ``poch`` loses about ten digits around ``x ~ 1e4``; for
    ``x >= 30`` the difference of Stirling series is used instead, with
    ``log1p`` keeping the leading term exact.
    """
    x = np.asarray(x, dtype=float)
    big = x >= 30.0
    out = np.empty_like(x)
    out[~big] = special.poch(x[~big], d)
    xb = x[big]
    y = xb + d
    log_ratio = ((xb - 0.5) * np.log1p(d / xb) + d * np.log(y) - d
                 + (1.0 / y - 1.0 / xb) / 12.0
                 - (y ** -3.0 - xb ** -3.0) / 360.0
                 + (y ** -5.0 - xb ** -5.0) / 1260.0)
    out[big] = np.exp(log_ratio)
    return out if out.ndim else float(out)


def _power_sum(s, a, b):
    """``sum_{a <= i < b} i**s`` by Euler-Maclaurin, for large ``a``."""
    if s == -1.0:
        integral = math.log(b / a)
    else:
        integral = (b ** (s + 1.0) - a ** (s + 1.0)) / (s + 1.0)
    f = lambda x: x ** s
    d1 = lambda x: s * x ** (s - 1.0)
    d3 = lambda x: s * (s - 1.0) * (s - 2.0) * x ** (s - 3.0)
    d5 = lambda x: s * (s - 1.0) * (s - 2.0) * (s - 3.0) * (s - 4.0) * x ** (s - 5.0)
    return (integral - 0.5 * (f(b) - f(a))
            + (d1(b) - d1(a)) / 12.0
            - (d3(b) - d3(a)) / 720.0
            + (d5(b) - d5(a)) / 30240.0)


def farima_coeffs(model, n):
    """First ``n`` coefficients of a FARIMA model's transfer function."""
    if model.kind != "farima":
        raise ValidationError(f"expected a farima model, got kind {model.kind!r}")
    return np.array(model.coefficients(n))


def partial_sum(model, t):
    """Functional alias of :meth:`CoefficientModel.partial_sum`."""
    return model.partial_sum(t)


def envelope(model, probe_horizon=4096, run_length=64):
    """Certified global supremum and negative infimum of the coefficients.

    The probe inspects ``g_0, ..., g_{H-1}``.  Beyond the probe the tail is
    certified when the last ``run_length`` coefficients keep one sign and
    strictly decrease in magnitude; a positive tail then cannot beat the
    supremum found so far and a negative tail cannot undercut the infimum.
    Explicit models are inspected in full.

    Raises
    ------
    HorizonError
        If the probe does not exhibit a certifiable monotone tail.
    """
    if model.kind == "explicit":
        g = np.asarray(model.coefficients(len(model)))
    else:
        h = int(probe_horizon)
        if h < run_length + 1:
            raise HorizonError(f"probe horizon {h} shorter than the run length {run_length}")
        g = np.asarray(model.coefficients(h))
        tail = g[-run_length:]
        same_sign = np.all(tail > 0) or np.all(tail < 0)
        mag = np.abs(tail)
        if not (same_sign and np.all(np.diff(mag) < 0)):
            raise HorizonError(
                f"horizon too small: |g_i| not monotone over the last {run_length} "
                f"of {h} coefficients"
            )
    j_sup = int(np.argmax(g))
    g_sup = float(g[j_sup])
    if g_sup <= 0:
        raise ValidationError("coefficient supremum must be positive")
    j_min = int(np.argmin(g))
    if g[j_min] < 0:
        return CoefficientEnvelope(g_sup, j_sup, float(g[j_min]), j_min)
    return CoefficientEnvelope(g_sup, j_sup, 0.0, None)
