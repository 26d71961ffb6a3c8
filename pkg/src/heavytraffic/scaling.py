"""Heavy-traffic scaling: ``k(t)``, its inverse and the normalizing scale.

``k(t) = g_[0,t) / F_*^<-(1 - 1/t)`` compares the growth of the coefficient
partial sums with the ``1 - 1/t`` quantile of ``|X|``.  When
``alpha * gamma > 1`` it is regularly varying of positive index
``gamma - 1/alpha``; inverting it at ``1/a`` gives the time scale of the
drifted supremum and ``F_*^<-(1 - 1/k^<-(1/a))`` its space scale.
"""

import math
from fractions import Fraction

import numpy as np

from .exceptions import BracketError, DomainError, RegimeError

__all__ = [
    "ScalingContext",
    "regime",
    "DIVERGENT",
    "HEAVY_TRAFFIC",
    "BOUNDARY",
    "example_k",
    "example_k_inverse",
    "example_ht_scale",
]

DIVERGENT = "divergent"
HEAVY_TRAFFIC = "heavy-traffic"
BOUNDARY = "boundary"

DIVERGENT_MESSAGE = (
    "alpha*gamma < 1: the drifted supremum is infinite in probability for every "
    "drift a > 0, so no heavy-traffic limit exists"
)
BOUNDARY_MESSAGE = "alpha*gamma = 1 is an unresolved boundary case and is refused"

T_FLOOR = 8.0
# above this, unit jumps of g_[0,ceil t) are below float resolution of k
T_CONTINUOUS = 2.0**52
K_RTOL = 1e-6
MAX_ITER = 200


def regime(alpha, gamma):
    """Classify ``alpha * gamma`` against 1 using exact rational arithmetic.

    Each parameter is read as the decimal number of its shortest ``repr``,
    so ``regime(1.25, 0.8)`` is the boundary even though the binary
    product of the two doubles exceeds 1.
    """
    prod = Fraction(repr(float(alpha))) * Fraction(repr(float(gamma)))
    if prod > 1:
        return HEAVY_TRAFFIC
    if prod < 1:
        return DIVERGENT
    return BOUNDARY


class ScalingContext:
    """Deterministic scale functions for one (coefficients, innovations) pair.

    In the heavy-traffic regime a geometric grid ``t_j = 8 * ratio**j`` of
    ``k`` values is built at construction.  The suffix of the grid on which
    ``k`` increases is the certified region; :meth:`k_inverse` only answers
    for ``y`` inside it.

    Parameters
    ----------
    coeff : CoefficientModel
    innov : InnovationModel
    grid_ratio : float
        Ratio between consecutive grid points.
    k_max : float
        The grid stops once ``k`` exceeds this value.
    t_max : float
        Hard cap on the grid.
    """

    def __init__(self, coeff, innov, grid_ratio=2.0**0.25, k_max=1e12, t_max=1e250):
        self.coeff = coeff
        self.innov = innov
        self.regime = regime(innov.alpha, coeff.gamma)
        self.grid_t = np.empty(0)
        self.grid_k = np.empty(0)
        self._j0 = None
        if self.regime == HEAVY_TRAFFIC:
            self._build_grid(grid_ratio, k_max, min(t_max, coeff.max_index))

    @property
    def alpha(self):
        return self.innov.alpha

    @property
    def gamma(self):
        return self.coeff.gamma

    @property
    def index(self):
        """Regular-variation index ``gamma - 1/alpha`` of ``k``."""
        return self.gamma - 1.0 / self.alpha

    def params(self):
        return {"alpha": self.alpha, "gamma": self.gamma, "p": self.innov.p}

    def _build_grid(self, ratio, k_max, t_max):
        ts, ks = [], []
        t = T_FLOOR
        while t <= t_max:
            ts.append(t)
            ks.append(self.k(t))
            if ks[-1] > k_max:
                break
            t *= ratio
        self.grid_t = np.array(ts)
        self.grid_k = np.array(ks)
        inc = np.diff(self.grid_k) > 0
        bad = np.flatnonzero(~inc)
        j0 = 0 if bad.size == 0 else int(bad[-1]) + 1
        if j0 >= len(ts) - 1:
            raise BracketError("k is not increasing on any suffix of the scale grid")
        self._j0 = j0

    @property
    def certified_range(self):
        """``(y_min, y_max)`` accepted by :meth:`k_inverse`."""
        self._require_heavy_traffic()
        return float(self.grid_k[self._j0]), float(self.grid_k[-1])

    def _require_heavy_traffic(self):
        if self.regime == DIVERGENT:
            raise RegimeError(DIVERGENT_MESSAGE)
        if self.regime == BOUNDARY:
            raise RegimeError(BOUNDARY_MESSAGE)

    def k(self, t):
        """``g_[0, ceil t) / F_*^<-(1 - 1/t)`` for ``t >= 1``."""
        t = float(t)
        if not t >= 1.0:
            raise DomainError(f"k is defined for t >= 1, got {t!r}")
        q = self.innov.abs_quantile(t)
        num = self.coeff.partial_sum(t)
        return math.inf if q == 0.0 else num / q

    def k_inverse(self, y):
        """Largest ``t`` with ``k(t) = y``, to relative tolerance ``1e-6`` in ``k``.

        Below ``2**52`` the search runs over integers first: the integer
        sequence ``k(n)`` is increasing on the certified region and on each
        cell ``(n - 1, n]`` ``k`` is continuous and decreasing, so the root is
        recovered in closed form from the survival function of ``|X|``.
        Above ``2**52`` unit jumps are invisible in double precision and a
        plain bisection in ``log t`` is used.
        """
        self._require_heavy_traffic()
        y = float(y)
        if not y > 0:
            raise DomainError("k_inverse needs y > 0")
        y_min, y_max = self.certified_range
        if not y_min <= y <= y_max:
            raise BracketError(
                f"y = {y:g} outside the certified increasing range [{y_min:g}, {y_max:g}] of k"
            )
        gk = self.grid_k[self._j0:]
        gt = self.grid_t[self._j0:]
        j = int(np.searchsorted(gk, y, side="right")) - 1
        j = min(max(j, 0), gk.size - 2)
        t_lo, t_hi = float(gt[j]), float(gt[j + 1])
        if t_hi < T_CONTINUOUS:
            t = self._invert_integer(y, t_lo, t_hi)
        else:
            t = self._invert_continuous(y, t_lo, t_hi)
        err = abs(self.k(t) - y)
        if err > K_RTOL * y:
            raise BracketError(f"k_inverse({y:g}) failed: |k(t) - y| / y = {err / y:.3g}")
        return t

    def _invert_integer(self, y, t_lo, t_hi):
        lo = max(math.floor(t_lo), math.ceil(T_FLOOR))
        hi = math.ceil(t_hi)
        while self.k(lo) > y:
            if lo <= T_FLOOR:
                raise BracketError(f"y = {y:g} below the certified region of k")
            lo = max(math.ceil(T_FLOOR), lo // 2)
        while self.k(hi) <= y:
            hi *= 2
        # k(lo) <= y < k(hi) on integers
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.k(mid) <= y:
                lo = mid
            else:
                hi = mid
        n = lo
        # root lies in a cell (m-1, m] with m <= n; there k = g_[0,m) / F_*^<-(1-1/t)
        for m in range(n, max(n - 64, 1), -1):
            level = self.coeff.partial_sum(m) / y
            t = 1.0 / self.innov.abs_sf(level)
            if t > m - 1 and t <= m + 1e-9 * m:
                return min(t, float(m))
        raise BracketError(f"no root of k(t) = {y:g} found in the cells below t = {n}")

    def _invert_continuous(self, y, t_lo, t_hi):
        lo, hi = math.log(t_lo), math.log(t_hi)
        for _ in range(MAX_ITER):
            mid = 0.5 * (lo + hi)
            km = self.k(math.exp(mid))
            if abs(km - y) <= 1e-3 * K_RTOL * y:
                return math.exp(mid)
            if km <= y:
                lo = mid
            else:
                hi = mid
        raise BracketError(f"bisection for k_inverse({y:g}) did not converge")

    def ht_scale(self, a):
        """``F_*^<-(1 - 1/k^<-(1/a))``, the space scale at drift ``a``."""
        a = float(a)
        if not a > 0:
            raise DomainError("drift a must be positive")
        t = self.k_inverse(1.0 / a)
        if t < 2.0:
            raise DomainError(f"drift a = {a:g} too large: k^<-(1/a) = {t:g} < 2")
        return self.innov.abs_quantile(t)

    def horizon(self, a, horizon_multiplier):
        """Path length ``ceil(T_h * k^<-(1/a))``."""
        return int(math.ceil(horizon_multiplier * self.k_inverse(1.0 / a)))

    def table(self, ts):
        """Rows ``(t, g_[0,t), F_*^<-(1 - 1/t), k(t))`` for plotting."""
        rows = []
        for t in ts:
            g = self.coeff.partial_sum(t)
            q = self.innov.abs_quantile(t)
            rows.append((float(t), g, q, g / q if q > 0 else math.inf))
        return rows


# closed forms for g_i = i**(gamma-1) and P(|X| > t) ~ c t**(-alpha)

def example_k(t, alpha, gamma, c=1.0):
    return t ** (gamma - 1.0 / alpha) / (gamma * c ** (1.0 / alpha))


def example_k_inverse(a, alpha, gamma, c=1.0):
    return (gamma * c ** (1.0 / alpha) / a) ** (alpha / (alpha * gamma - 1.0))


def example_ht_scale(a, alpha, gamma, c=1.0):
    return (gamma * c ** gamma / a) ** (1.0 / (alpha * gamma - 1.0))
