"""Pre-limit simulation of the drifted supremum.

For innovations ``X_1, ..., X_N`` the filtered path is
``S_n = sum_{0 <= i < n} g_i X_{n-i}`` (``X_i = 0`` for ``i <= 0``) and the
statistic is ``max_{0 <= n <= N} (S_n - a g_[0,n))`` with ``S_0 = 0``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from . import streams
from .exceptions import DomainError, RegimeError
from .scaling import BOUNDARY, BOUNDARY_MESSAGE, DIVERGENT, DIVERGENT_MESSAGE
from .stats import SampleSet

__all__ = [
    "PathConfig",
    "iter_indexed",
    "iter_prelimit",
    "prelimit_plan",
    "CoefficientFilter",
    "filter_path",
    "drifted_sup",
    "mc_prelimit",
    "divergence_probe",
    "DivergenceResult",
    "throughput",
]

FFT_THRESHOLD = 4096


def filter_path(coeffs, innovations, fft_threshold=FFT_THRESHOLD, block_size=None):
    """Causal filter ``S_n = sum_{0 <= i < n} g_i X_{n-i}, n = 1..N``.

    Direct ``O(N^2)`` accumulation below ``fft_threshold``; above it a
    zero-padded real FFT, or overlap-add over input blocks of
    ``block_size`` when given.
    """
    g = np.asarray(coeffs, dtype=float)
    x = np.asarray(innovations, dtype=float)
    if g.shape != x.shape or g.ndim != 1:
        raise DomainError(f"coefficients {g.shape} and innovations {x.shape} must be equal-length 1-d")
    n = x.size
    if n == 0:
        raise DomainError("empty path")
    if n < fft_threshold:
        return np.convolve(g, x)[:n]
    if block_size is None or block_size >= n:
        return CoefficientFilter(g).apply(x)
    out = np.zeros(n)
    for start in range(0, n, block_size):
        seg = x[start:start + block_size]
        m = n - start
        size = sfft.next_fast_len(seg.size + m - 1, real=True)
        y = sfft.irfft(sfft.rfft(seg, size) * sfft.rfft(g[:m], size), size)
        out[start:] += y[:m]
    return out


class CoefficientFilter:
    """FFT filter with the coefficient spectrum computed once.

    Reused across replicates of the same path length; :meth:`apply` is
    read-only and safe to call from several threads.
    """

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.n = self.coeffs.size
        self.size = sfft.next_fast_len(2 * self.n - 1, real=True)
        self._spectrum = sfft.rfft(self.coeffs, self.size)

    def apply(self, x):
        if x.size != self.n:
            raise DomainError(f"expected {self.n} innovations, got {x.size}")
        return sfft.irfft(sfft.rfft(x, self.size) * self._spectrum, self.size)[:self.n]


def drifted_sup(path, partial_sums, a):
    """``max_{0 <= n <= N} (S_n - a g_[0,n))`` and the first maximizing ``n``.

    ``path[n-1]`` is ``S_n`` and ``partial_sums[n-1]`` is ``g_[0,n)``.  The
    ``n = 0`` term is 0, so the value is never negative.
    """
    s = np.asarray(path, dtype=float)
    ps = np.asarray(partial_sums, dtype=float)
    if s.shape != ps.shape:
        raise DomainError("path and partial sums must have the same length")
    if s.size == 0:
        return 0.0, 0
    d = s - a * ps
    j = int(np.argmax(d))
    if d[j] > 0.0:
        return float(d[j]), j + 1
    return 0.0, 0


@dataclass(frozen=True)
class PathConfig:
    """Monte Carlo settings for the pre-limit statistic.

    ``horizon`` fixes ``N`` explicitly; otherwise
    ``N = ceil(horizon_multiplier * k^<-(1/a))``.
    """

    a: float
    horizon_multiplier: float = 8.0
    replicates: int = 1
    seed: int = 0
    fft_threshold: int = FFT_THRESHOLD
    horizon: int | None = None
    threads: int = 1

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError("drift a must be positive")
        if not self.horizon_multiplier > 0:
            raise DomainError("horizon multiplier must be positive")
        if self.replicates < 1:
            raise DomainError("need at least one replicate")
        if self.horizon is not None and self.horizon < 1:
            raise DomainError("horizon must be at least 1")


def iter_indexed(fn, count, threads=1, start=0):
    """Yield ``fn(r)`` for ``r = start .. start+count-1`` in index order.

    Work is submitted in small batches so that an interrupted consumer
    leaves at most one batch unfinished.
    """
    stop = start + count
    if threads <= 1:
        for r in range(start, stop):
            yield fn(r)
        return
    batch = 4 * threads
    pool = ThreadPoolExecutor(max_workers=threads)
    try:
        for lo in range(start, stop, batch):
            futures = [pool.submit(fn, r) for r in range(lo, min(lo + batch, stop))]
            for f in futures:
                yield f.result()
    finally:
        pool.shutdown(wait=True, cancel_futures=True)


def _run_indexed(fn, count, threads):
    return list(iter_indexed(fn, count, threads))


def _path_kernel(ctx, n, fft_threshold):
    g = np.asarray(ctx.coeff.coefficients(n))
    ps = np.asarray(ctx.coeff.partial_sums(n))
    filt = CoefficientFilter(g) if n >= fft_threshold else None

    def path(x):
        return filt.apply(x) if filt is not None else np.convolve(g, x)[:n]

    return ps, path


def _require_heavy_traffic(ctx):
    if ctx.regime == DIVERGENT:
        raise RegimeError(DIVERGENT_MESSAGE)
    if ctx.regime == BOUNDARY:
        raise RegimeError(BOUNDARY_MESSAGE)


def prelimit_plan(ctx, config):
    """``(scale, N)`` for a heavy-traffic run."""
    _require_heavy_traffic(ctx)
    scale = ctx.ht_scale(config.a)
    n = config.horizon or ctx.horizon(config.a, config.horizon_multiplier)
    return scale, n


def iter_prelimit(ctx, config, n=None):
    """Yield ``(r, drifted_sup, argmax)`` in replicate order.

    Values are unscaled.  Replicate ``r`` draws its innovations from stream
    ``(seed, PRELIMIT, r)``, so the output does not depend on
    ``config.threads``.  In the divergent or boundary regime an explicit
    ``config.horizon`` is required and no scale is computed.
    """
    if config.horizon is None:
        _require_heavy_traffic(ctx)
        n = ctx.horizon(config.a, config.horizon_multiplier) if n is None else n
    else:
        n = config.horizon
    a = config.a
    ps, path = _path_kernel(ctx, n, config.fft_threshold)
    innov = ctx.innov

    def one(r):
        rng = streams.stream(config.seed, streams.PRELIMIT, r)
        v, j = drifted_sup(path(innov.sample(rng, n)), ps, a)
        return r, v, j

    yield from iter_indexed(one, config.replicates, config.threads)


def mc_prelimit(ctx, config):
    """Replicates of ``drifted_sup / ht_scale(a)`` in the heavy-traffic regime.

    Replicate ``r`` draws its innovations from stream
    ``(seed, PRELIMIT, r)``; results are ordered by ``r`` and do not depend
    on ``config.threads``.
    """
    scale, n = prelimit_plan(ctx, config)
    a = config.a
    out = list(iter_prelimit(ctx, config, n))
    values = np.array([v for _, v, _ in out]) / scale
    argmax = np.array([j for _, _, j in out], dtype=np.int64)
    params = dict(ctx.params(), a=a, horizon=n, kind="prelimit")
    return SampleSet(values, label=f"prelimit a={a:g}", seed=config.seed, params=params,
                     aux=argmax, meta={"scale": scale, "horizon": n})


@dataclass
class DivergenceResult:
    horizons: list
    medians: list
    samples: np.ndarray

    def strictly_increasing(self):
        return all(b > a for a, b in zip(self.medians, self.medians[1:]))


def divergence_probe(ctx, a, horizons, replicates, seed, threads=1, fft_threshold=FFT_THRESHOLD):
    """Median of the unscaled ``max_{n <= N} (S_n - a g_[0,n))`` per horizon ``N``.

    One path of the largest horizon is drawn per replicate (stream
    ``(seed, DIVERGENCE, r)``) and the running maximum is read off at each
    horizon, so the horizons are nested along a common path.
    """
    if not a > 0:
        raise DomainError("drift a must be positive")
    hs = sorted(int(h) for h in horizons)
    if not hs or hs[0] < 1:
        raise DomainError("horizons must be positive")
    n = hs[-1]
    ps, path = _path_kernel(ctx, n, fft_threshold)
    innov = ctx.innov
    idx = np.array(hs) - 1

    def one(r):
        rng = streams.stream(seed, streams.DIVERGENCE, r)
        d = path(innov.sample(rng, n)) - a * ps
        run = np.maximum(np.maximum.accumulate(d), 0.0)
        return run[idx]

    samples = np.array(_run_indexed(one, int(replicates), threads))
    medians = [float(np.median(samples[:, j])) for j in range(len(hs))]
    return DivergenceResult(hs, medians, samples)


def throughput(n=2**20, repeats=3, seed=0):
    """Filtered points per second of the FFT path at length ``n``.

    The coefficient spectrum is built once, as in the Monte Carlo drivers.
    """
    import time

    rng = streams.stream(seed, streams.MISC, 0)
    filt = CoefficientFilter(rng.random(n))
    x = rng.standard_normal(n)
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        filt.apply(x)
        best = min(best, time.perf_counter() - t0)
    return n / best
