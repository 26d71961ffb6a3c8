"""Acceptance checks at desk scale.

Each ``criterion_N`` returns a :class:`CriterionResult`; :func:`run` runs a
selection and :func:`format_result` renders the one-line PASS/FAIL verdict.
Tolerances are fixed here and never relaxed at run time.
"""

import contextlib
import io
import math
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from . import streams
from .coeffs import CoefficientModel, envelope, fractional_coeffs
from .innovations import TwoSidedPareto
from .limitsim import default_policy, mc_limit, sample_block_maxima
from .pathsim import CoefficientFilter, PathConfig, divergence_probe, mc_prelimit, throughput
from .scaling import ScalingContext, example_ht_scale, example_k, example_k_inverse
from .stats import growth_exponent, is_nonincreasing, ks_distance

__all__ = ["CriterionResult", "CRITERIA", "QUICK", "run", "format_result", "ladder_projection"]

SEED = 20240611

# convergence ladder
LADDER = (0.08, 0.04, 0.02, 0.01)
LADDER_ALPHA, LADDER_GAMMA, LADDER_P = 1.5, 0.9, 1.0
LADDER_R = 2000
LADDER_LIMIT_R = 10_000
LADDER_TH = 8.0
KS_FINAL = 0.06
SLOPE_RTOL = 0.15
WALL_BUDGET = 20 * 60.0
# bytes per path point held at once: coefficients, partial sums, innovations,
# filtered path, drift-corrected path and the padded FFT work arrays
BYTES_PER_POINT = 8 * 9


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0


def format_result(res):
    verdict = "PASS" if res.passed else "FAIL"
    return f"{verdict} criterion {res.number} ({res.title}): {res.detail} [{res.seconds:.1f}s]"


def _timed(number, title):
    def wrap(fn):
        def inner(*args, **kw):
            t0 = time.perf_counter()
            passed, detail = fn(*args, **kw)
            return CriterionResult(number, title, bool(passed), detail, time.perf_counter() - t0)
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


@_timed(1, "block-maximum law")
def criterion_1(n_blocks=100_000, eps=0.1, seed=SEED):
    """Empirical tail of ``M_0`` against ``1 - exp(-x**-1.8)``."""
    t0 = time.perf_counter()
    alpha = 1.8
    measure = TwoSidedPareto(alpha, 1.0).levy_measure()
    rng = streams.stream(seed, streams.BLOCKS, 0)
    m = sample_block_maxima(measure, 0, 0.7, 1.0, eps, n_blocks, rng)
    notes, ok = [], True
    for x in (0.5, 1.0, 2.0, 4.0):
        target = 1.0 - math.exp(-x ** -alpha)
        emp = float(np.mean(m > x))
        se = math.sqrt(target * (1.0 - target) / n_blocks)
        z = (emp - target) / se
        ok &= abs(z) <= 3.0
        notes.append(f"x={x:g} z={z:+.2f}")
    ks = float(sps.kstest(m, lambda v: np.exp(-np.maximum(v, 1e-300) ** -alpha)).statistic)
    elapsed = time.perf_counter() - t0
    ok = ok and ks < 0.01 and elapsed < 30.0
    return ok, f"{', '.join(notes)}; KS={ks:.4f} (<0.01); {elapsed:.1f}s (<30s)"


def _ladder_context():
    return ScalingContext(CoefficientModel.fractional(LADDER_GAMMA),
                          TwoSidedPareto(LADDER_ALPHA, LADDER_P))


def _available_memory():
    try:
        return os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return math.inf


def ladder_projection(ladder=LADDER, replicates=LADDER_R, horizon_multiplier=LADDER_TH):
    """Cost of the convergence ladder before running it.

    Returns a dict with the horizons, the total number of innovations, the
    projected wall time from the measured filter throughput (a lower bound:
    sampling and the drift correction are ignored) and the peak memory of one
    path.
    """
    ctx = _ladder_context()
    horizons = [ctx.horizon(a, horizon_multiplier) for a in ladder]
    work = replicates * sum(horizons)
    rate = throughput(2**20, repeats=3)
    cores = os.cpu_count() or 1
    return {
        "horizons": horizons,
        "work": work,
        "seconds": work / (rate * cores),
        "peak_bytes": BYTES_PER_POINT * max(horizons),
        "available_bytes": _available_memory(),
        "rate": rate,
        "cores": cores,
    }


def _feasible(proj):
    return proj["peak_bytes"] <= proj["available_bytes"] and proj["seconds"] <= WALL_BUDGET


def _infeasible_detail(proj):
    return (f"not run: ladder horizons N={[f'{h:.3g}' for h in proj['horizons']]} need "
            f"{proj['work']:.3g} innovations, projected >= {proj['seconds'] / 3600:.3g} h on "
            f"{proj['cores']} core(s) at {proj['rate']:.3g} pts/s (budget {WALL_BUDGET / 60:.0f} min), "
            f"peak {proj['peak_bytes'] / 2**30:.3g} GiB per path vs "
            f"{proj['available_bytes'] / 2**30:.3g} GiB available")


_LADDER_CACHE = {}


def _ladder_run(seed=SEED, threads=None):
    key = (seed, threads)
    if key not in _LADDER_CACHE:
        ctx = _ladder_context()
        threads = threads or os.cpu_count() or 1
        pre = {a: mc_prelimit(ctx, PathConfig(a, LADDER_TH, LADDER_R, seed, threads=threads))
               for a in LADDER}
        env = envelope(ctx.coeff)
        policy = default_policy(LADDER_ALPHA, LADDER_GAMMA, LADDER_P, env)
        lim = mc_limit(ctx, policy, LADDER_LIMIT_R, seed, env)
        _LADDER_CACHE[key] = (pre, lim)
    return _LADDER_CACHE[key]


@_timed(2, "limit-vs-prelimit convergence")
def criterion_2(force=False, seed=SEED):
    """KS distance to the limit nonincreasing along the ladder, below 0.06 at the end."""
    proj = ladder_projection()
    if not (force or _feasible(proj)):
        return False, _infeasible_detail(proj)
    pre, lim = _ladder_run(seed)
    ks = [ks_distance(pre[a], lim) for a in LADDER]
    ok = is_nonincreasing(ks) and ks[-1] < KS_FINAL
    return ok, "KS " + ", ".join(f"a={a:g}:{d:.4f}" for a, d in zip(LADDER, ks)) + f" (final <{KS_FINAL})"


@_timed(3, "example growth rate")
def criterion_3(force=False, seed=SEED):
    """Slope of log median sup on log(1/a) within 15% of ``1/(alpha gamma - 1)``."""
    target = 1.0 / (LADDER_ALPHA * LADDER_GAMMA - 1.0)
    proj = ladder_projection()
    if not (force or _feasible(proj)):
        return False, _infeasible_detail(proj)
    pre, _ = _ladder_run(seed)
    pairs = [(a, float(np.median(s.values)) * s.meta["scale"]) for a, s in pre.items()]
    slope, se = growth_exponent(pairs)
    ok = abs(slope / target - 1.0) <= SLOPE_RTOL
    return ok, f"slope {slope:.3f} +- {se:.3f} vs {target:.3f} (within {SLOPE_RTOL:.0%})"


@_timed(4, "divergent regime")
def criterion_4(replicates=500, seed=SEED, threads=None):
    """Median unscaled supremum grows with the horizon when ``alpha gamma < 1``."""
    t0 = time.perf_counter()
    ctx = ScalingContext(CoefficientModel.fractional(0.5), TwoSidedPareto(1.3, 1.0))
    res = divergence_probe(ctx, 0.1, [10**3, 10**4, 10**5, 10**6], replicates, seed,
                           threads=threads or os.cpu_count() or 1)
    ratio = res.medians[-1] / res.medians[0] if res.medians[0] > 0 else math.inf
    elapsed = time.perf_counter() - t0
    ok = res.strictly_increasing() and ratio > 2.0 and elapsed < 600.0
    meds = ", ".join(f"{m:.4g}" for m in res.medians)
    return ok, f"medians [{meds}], final/first {ratio:.3g} (>2); {elapsed:.1f}s (<600s)"


@_timed(5, "Karamata equivalent")
def criterion_5(n=10**6):
    """``g_[0,n) gamma / (n g_n)`` within 2% of 1 from the coefficient recurrence."""
    t0 = time.perf_counter()
    worst, notes = 0.0, []
    for gamma in (0.3, 0.6, 0.9):
        g = fractional_coeffs(gamma, n + 1)
        ratio = float(math.fsum(g[:n])) * gamma / (n * g[n])
        worst = max(worst, abs(ratio - 1.0))
        notes.append(f"gamma={gamma:g}:{ratio - 1.0:+.2e}")
    elapsed = time.perf_counter() - t0
    return worst < 0.02 and elapsed < 1.0, f"{', '.join(notes)} (<0.02); {elapsed:.2f}s (<1s)"


@_timed(6, "scaling inversion")
def criterion_6():
    """Round trip of ``k_inverse`` and the example model's closed forms."""
    alpha, gamma = LADDER_ALPHA, LADDER_GAMMA
    ctx = _ladder_context()
    trips = [ctx.k(ctx.k_inverse(y)) / y - 1.0 for y in (10.0, 100.0, 1e4)]
    ok = all(abs(d) <= 1e-6 for d in trips)
    ex = ScalingContext(CoefficientModel.example(gamma), TwoSidedPareto(alpha, 1.0))
    a = 1e-4
    lam = ex.k_inverse(1.0 / a)
    ratios = {
        "k": ex.k(lam) / example_k(lam, alpha, gamma),
        "k_inverse": lam / example_k_inverse(a, alpha, gamma),
        "ht_scale": ex.ht_scale(a) / example_ht_scale(a, alpha, gamma),
    }
    ok = ok and all(abs(r - 1.0) <= 0.02 for r in ratios.values())
    return ok, ("round trip " + ", ".join(f"{d:+.1e}" for d in trips) + " (<=1e-6); example "
                + ", ".join(f"{k}={r:.4f}" for k, r in ratios.items()) + " (within 2%)")


@_timed(7, "convolution oracle")
def criterion_7(cases=100, seed=SEED, min_rate=1e7):
    """FFT filter against direct convolution; throughput reported as advisory."""
    worst = 0.0
    for i in range(cases):
        rng = streams.stream(seed, streams.MISC, i)
        n = int(rng.integers(1, 2049))
        gamma = float(rng.uniform(0.05, 0.95))
        innov = TwoSidedPareto(float(rng.uniform(1.05, 1.95)), float(rng.uniform(0.05, 1.0)))
        g = fractional_coeffs(gamma, n)
        x = innov.sample(rng, n)
        direct = np.convolve(g, x)[:n]
        fast = CoefficientFilter(g).apply(x)
        worst = max(worst, float(np.max(np.abs(fast - direct)) / np.max(np.abs(direct))))
    rate = throughput(2**20)
    gate = "ok" if rate >= min_rate else "ADVISORY: below"
    return worst <= 1e-8, f"max rel err {worst:.2e} (<=1e-8); throughput {rate:.3g} pts/s ({gate} {min_rate:.0e})"


def _determinism_runs(workdir):
    model = ["--alpha", "1.5", "--gamma", "0.9", "--p", "1"]
    base = [*model, "--seed", "11"]
    sp = os.path.join(workdir, "path.jsonl")
    sl = os.path.join(workdir, "limit.jsonl")
    return [
        ("coeff-dump", ["coeff-dump", "--gamma", "0.7", "--n", "500"]),
        ("scaling-table", ["scaling-table", *model, "--points", "9"]),
        ("simulate-path", ["simulate-path", *base, "--a", "0.25", "--replicates", "12"], sp),
        ("simulate-path-csv", ["simulate-path", *base, "--a", "0.25", "--replicates", "12",
                               "--format", "csv"]),
        ("simulate-limit", ["simulate-limit", *base, "--replicates", "40"], sl),
        ("compare", ["compare", sp, sl, "--n-boot", "50"]),
        ("rate-check", ["rate-check", *base, "--a-ladder", "0.25,0.2,0.16", "--replicates", "4"]),
    ]


@_timed(8, "determinism")
def criterion_8():
    """Byte-identical machine output for one and three worker threads."""
    from . import cli

    bad = []
    with tempfile.TemporaryDirectory() as tmp:
        for name, argv, *keep in _determinism_runs(tmp):
            blobs = []
            for threads in ("1", "3"):
                out = os.path.join(tmp, f"{name}-{threads}.out")
                try:
                    with contextlib.redirect_stdout(io.StringIO()):
                        code = cli.main(["-q", *argv, "--out", out], environ={"HTR_THREADS": threads})
                except SystemExit as exc:
                    code = exc.code
                if code != 0:
                    bad.append(f"{name} exit {code}")
                    break
                with open(out, "rb") as fh:
                    blobs.append(fh.read())
            if len(blobs) == 2 and blobs[0] != blobs[1]:
                bad.append(f"{name} differs")
            if keep and blobs:
                with open(keep[0], "wb") as fh:
                    fh.write(blobs[0])
        n = len(_determinism_runs(tmp))
    if bad:
        return False, "; ".join(bad)
    return True, f"{n} subcommand runs byte-identical at 1 and 3 threads"


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
            5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8}
QUICK = (1, 5, 6, 7, 8)


def run(numbers=None):
    """Run the selected criteria in order and return their results."""
    numbers = sorted(CRITERIA) if numbers is None else sorted(numbers)
    return [CRITERIA[n]() for n in numbers]
