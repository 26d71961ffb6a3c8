"""Sample sets and the comparisons used to check the heavy-traffic limit."""

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .exceptions import DomainError

__all__ = [
    "SampleSet",
    "digest_of",
    "ks_distance",
    "ks_noise_floor",
    "quantiles",
    "QuantileEstimate",
    "growth_exponent",
    "compare_report",
    "CompareReport",
    "is_nonincreasing",
]

REPORT_PROBS = (0.1, 0.25, 0.5, 0.75, 0.9, 0.99)
MATCH_KEYS = ("alpha", "gamma", "p")


def digest_of(obj):
    """SHA-256 of the canonical JSON encoding of ``obj`` (sorted keys)."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class SampleSet:
    """I.i.d. scalar replicates with provenance.

    ``params`` must hold at least ``alpha``, ``gamma`` and ``p``;
    ``aux`` carries one auxiliary integer per replicate (e.g. the argmax
    index of a path) and ``meta`` free-form run information.
    """

    values: np.ndarray
    label: str = ""
    seed: int | None = None
    params: dict = field(default_factory=dict)
    digest: str = ""
    aux: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size == 0:
            raise DomainError("a sample set needs a nonempty 1-d array of values")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("sample values must be finite")
        if self.aux is not None:
            self.aux = np.asarray(self.aux)
        if not self.digest:
            self.digest = digest_of({"params": self.params, "seed": self.seed, "label": self.label})

    def __len__(self):
        return self.values.size

    def to_jsonl(self, fh):
        """Write one ``{"r", "value", "aux"}`` object per line."""
        for r, v in enumerate(self.values):
            aux = None if self.aux is None else int(self.aux[r])
            fh.write(json.dumps({"r": r, "value": float(v), "aux": aux}) + "\n")

    def to_csv(self, fh):
        fh.write("r,value,aux\n")
        for r, v in enumerate(self.values):
            aux = "" if self.aux is None else str(int(self.aux[r]))
            fh.write(f"{r},{float(v)!r},{aux}\n")

    def header(self):
        return {"label": self.label, "seed": self.seed, "params": self.params,
                "digest": self.digest, "meta": self.meta}


def _values(s):
    return s.values if isinstance(s, SampleSet) else np.asarray(s, dtype=float)


def ks_distance(a, b):
    """Two-sample Kolmogorov-Smirnov distance ``sup_x |F_a(x) - F_b(x)|``.

    Both empirical CDFs are evaluated at every point of the merged sorted
    sample, which is exact for step functions.
    """
    x, y = np.sort(_values(a)), np.sort(_values(b))
    if x.size == 0 or y.size == 0:
        raise DomainError("ks_distance needs two nonempty samples")
    grid = np.concatenate((x, y))
    fa = np.searchsorted(x, grid, side="right") / x.size
    fb = np.searchsorted(y, grid, side="right") / y.size
    return float(np.max(np.abs(fa - fb)))


def ks_noise_floor(n, m, level=1.36):
    """``level * sqrt((n + m) / (n m))``; 1.36 is the 95% asymptotic quantile."""
    return level * math.sqrt((n + m) / (n * m))


@dataclass(frozen=True)
class QuantileEstimate:
    prob: float
    value: float
    lo: float
    hi: float


def quantiles(sample, probs, n_boot=1000, seed=0, level=0.95):
    """Lower order-statistic quantiles with percentile bootstrap intervals.

    The point estimate at probability ``u`` is ``x_(floor((n-1) u))`` of the
    sorted sample (numpy's ``'lower'`` method).  Bootstrap resamples are
    drawn from the ``BOOTSTRAP`` stream of ``seed``.
    """
    x = _values(sample)
    probs = np.atleast_1d(np.asarray(probs, dtype=float))
    if np.any((probs <= 0) | (probs >= 1)):
        raise DomainError("probabilities must lie in (0, 1)")
    est = np.quantile(x, probs, method="lower")
    rng = streams.stream(seed, streams.BOOTSTRAP, 0)
    boots = np.empty((n_boot, probs.size))
    for b in range(n_boot):
        idx = rng.integers(0, x.size, x.size)
        boots[b] = np.quantile(x[idx], probs, method="lower")
    alpha = (1.0 - level) / 2.0
    lo = np.quantile(boots, alpha, axis=0, method="lower")
    hi = np.quantile(boots, 1.0 - alpha, axis=0, method="higher")
    # the percentile interval need not cover the estimate on tiny samples
    lo, hi = np.minimum(lo, est), np.maximum(hi, est)
    return [QuantileEstimate(float(u), float(e), float(l), float(h))
            for u, e, l, h in zip(probs, est, lo, hi)]


def growth_exponent(pairs):
    """Least-squares slope of ``log(statistic)`` on ``log(1/a)``.

    Parameters
    ----------
    pairs : sequence of (a, statistic)
        At least three distinct positive drifts; input order is irrelevant.

    Returns
    -------
    slope, stderr : float
    """
    pairs = sorted(((float(a), float(s)) for a, s in pairs), reverse=True)
    if len(pairs) < 3:
        raise DomainError("growth_exponent needs at least three (a, statistic) pairs")
    a = np.array([p[0] for p in pairs])
    s = np.array([p[1] for p in pairs])
    if np.any(a <= 0) or np.any(np.diff(a) >= 0):
        raise DomainError("drifts must be positive and distinct")
    if np.any(s <= 0):
        raise DomainError("statistics must be positive to take logarithms")
    x, y = np.log(1.0 / a), np.log(s)
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    slope = float(np.dot(xc, y - y.mean()) / sxx)
    resid = y - y.mean() - slope * xc
    dof = x.size - 2
    stderr = math.sqrt(float(np.dot(resid, resid)) / dof / sxx) if dof > 0 else 0.0
    return slope, stderr


def is_nonincreasing(seq):
    return all(b <= a for a, b in zip(seq, seq[1:]))


@dataclass
class CompareReport:
    ks: float
    threshold: float
    noise_floor: float
    quantiles_a: list
    quantiles_b: list
    label_a: str
    label_b: str

    @property
    def passed(self):
        return self.ks < self.threshold

    def table(self):
        lines = [
            f"KS distance {self.ks:.5f}  threshold {self.threshold:.5f}  "
            f"95% noise floor {self.noise_floor:.5f}  -> {'PASS' if self.passed else 'FAIL'}",
            f"{'prob':>6} {self.label_a[:24]:>34} {self.label_b[:24]:>34}",
        ]
        for qa, qb in zip(self.quantiles_a, self.quantiles_b):
            lines.append(
                f"{qa.prob:>6.2f} {qa.value:>12.5g} [{qa.lo:>9.4g},{qa.hi:>9.4g}] "
                f"{qb.value:>12.5g} [{qb.lo:>9.4g},{qb.hi:>9.4g}]"
            )
        return "\n".join(lines)

    def csv(self):
        rows = ["prob,value_a,lo_a,hi_a,value_b,lo_b,hi_b"]
        for qa, qb in zip(self.quantiles_a, self.quantiles_b):
            rows.append(",".join(repr(v) for v in (qa.prob, qa.value, qa.lo, qa.hi,
                                                    qb.value, qb.lo, qb.hi)))
        rows.append(f"ks,{self.ks!r},threshold,{self.threshold!r},passed,{int(self.passed)}")
        return "\n".join(rows) + "\n"


def compare_report(prelimit, limit, ks_threshold, probs=REPORT_PROBS, n_boot=1000, seed=0):
    """KS distance and quantile table of a prelimit sample against a limit sample.

    Raises
    ------
    DomainError
        If the two sample sets disagree on ``alpha``, ``gamma`` or ``p``.
    """
    for key in MATCH_KEYS:
        va, vb = prelimit.params.get(key), limit.params.get(key)
        if va is None or vb is None or va != vb:
            raise DomainError(
                f"sample sets come from different configurations: {key} = {va!r} vs {vb!r}"
            )
    return CompareReport(
        ks=ks_distance(prelimit, limit),
        threshold=float(ks_threshold),
        noise_floor=ks_noise_floor(len(prelimit), len(limit)),
        quantiles_a=quantiles(prelimit, probs, n_boot=n_boot, seed=seed),
        quantiles_b=quantiles(limit, probs, n_boot=n_boot, seed=seed + 1),
        label_a=prelimit.label or "prelimit",
        label_b=limit.label or "limit",
    )
