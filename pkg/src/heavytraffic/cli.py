"""Command line interface: ``htr <subcommand> [options]``.

Exit codes: 0 success, 1 I/O or configuration error, 2 regime refusal,
3 acceptance failure.  Machine output goes to ``--out`` (or stdout), logs
to stderr.  ``HTR_THREADS`` overrides ``--threads``.
"""

import argparse
import contextlib
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__, streams
from .coeffs import CoefficientModel, envelope
from .config import load_config
from .exceptions import ConfigError, HeavyTrafficError, RegimeError
from .innovations import make_innovation
from .limitsim import default_policy, iter_limit
from .pathsim import PathConfig, iter_prelimit, prelimit_plan
from .scaling import BOUNDARY, BOUNDARY_MESSAGE, DIVERGENT, DIVERGENT_MESSAGE, ScalingContext, regime
from .stats import SampleSet, compare_report, growth_exponent

log = logging.getLogger("heavytraffic")

EXIT_OK, EXIT_IO, EXIT_REGIME, EXIT_ACCEPTANCE = 0, 1, 2, 3
EXIT_INTERRUPTED = 130
# refuse ladders beyond this many innovations unless --max-work is raised
DEFAULT_MAX_WORK = 2e10


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--config", help="YAML run configuration")
    g.add_argument("--kind", choices=("fractional", "farima", "example"), help="coefficient kind")
    g.add_argument("--gamma", type=float)
    g.add_argument("--numerator", type=_floats, help="farima numerator, comma-separated")
    g.add_argument("--denominator", type=_floats, help="farima denominator, comma-separated")
    g.add_argument("--innovation", choices=("two-sided-pareto", "exact-stable"))
    g.add_argument("--alpha", type=float)
    g.add_argument("--p", type=float, help="upper tail fraction")


def _run_flags(p, output=True):
    g = p.add_argument_group("run")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    if output:
        g.add_argument("--out", help="output file (default stdout)")
        g.add_argument("--format", choices=("jsonl", "csv"))


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; exit 2 is reserved for regime refusals
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="htr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("coeff-dump", help="CSV of i, g_i and the running partial sum")
    _model_flags(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out")

    p = sub.add_parser("scaling-table", help="CSV of t, g_[0,t), F_*^<-(1-1/t), k(t)")
    _model_flags(p)
    p.add_argument("--t-min", type=float, default=8.0)
    p.add_argument("--t-max", type=float, default=1e8)
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--out")

    p = sub.add_parser("simulate-path", help="replicates of the scaled drifted supremum")
    _model_flags(p)
    _run_flags(p)
    p.add_argument("--a", type=float, help="drift")
    p.add_argument("--horizon-mult", type=float)
    p.add_argument("--horizon", type=int, help="explicit path length N (required when alpha*gamma <= 1)")
    p.add_argument("--replicates", type=int)

    p = sub.add_parser("simulate-limit", help="replicates of the Poisson limit functional")
    _model_flags(p)
    _run_flags(p)
    p.add_argument("--replicates", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--T-override", dest="T_override", type=float)

    p = sub.add_parser("compare", help="KS distance and quantile table of two sample files")
    p.add_argument("prelimit")
    p.add_argument("limit")
    p.add_argument("--ks-threshold", type=float, default=0.06)
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    p.add_argument("--out", help="machine CSV (the table goes to stdout)")
    p.add_argument("--strict", action="store_true", help="exit 3 when KS exceeds the threshold")

    p = sub.add_parser("rate-check", help="growth exponent of the median supremum over an a-ladder")
    _model_flags(p)
    _run_flags(p, output=False)
    p.add_argument("--a-ladder", type=_floats)
    p.add_argument("--horizon-mult", type=float)
    p.add_argument("--replicates", type=int)
    p.add_argument("--max-work", type=float, default=DEFAULT_MAX_WORK,
                   help="largest total number of innovations to simulate")
    p.add_argument("--out")

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--quick", action="store_true", help="skip the long Monte Carlo criteria")
    p.add_argument("--only", type=lambda s: [int(v) for v in s.split(",")],
                   help="comma-separated criterion numbers")
    return parser


# -- helpers ----------------------------------------------------------------

def _config(args, environ):
    cfg = load_config(getattr(args, "config", None))
    cfg = cfg.override("model", kind=args.kind, gamma=args.gamma,
                       numerator=args.numerator, denominator=args.denominator)
    cfg = cfg.override("innovation", kind=args.innovation, alpha=args.alpha, p=args.p)
    exp = {}
    for flag, key in (("a", "a"), ("horizon_mult", "horizon_multiplier"), ("replicates", "replicates"),
                      ("eps", "eps"), ("tol", "tol"), ("T_override", "T_override"),
                      ("seed", "seed"), ("threads", "threads"), ("a_ladder", "a_ladder")):
        exp[key] = getattr(args, flag, None)
    env_threads = environ.get("HTR_THREADS")
    if env_threads:
        try:
            exp["threads"] = int(env_threads)
        except ValueError:
            raise ConfigError(f"HTR_THREADS must be an integer, got {env_threads!r}") from None
    cfg = cfg.override("experiment", **exp)
    cfg = cfg.override("output", path=getattr(args, "out", None), format=getattr(args, "format", None))
    return cfg


def _seed(cfg):
    if cfg.experiment.seed is None:
        seed = streams.fresh_seed()
        log.warning("no seed given; using seed %d", seed)
        cfg = cfg.override("experiment", seed=seed)
    return cfg


def _coeff_model(cfg):
    m = cfg.model
    if m.kind == "farima":
        return CoefficientModel.farima(m.gamma, m.numerator, m.denominator)
    return CoefficientModel(m.kind, m.gamma)


def _context(cfg):
    innov = make_innovation(cfg.innovation.kind, cfg.innovation.alpha, cfg.innovation.p)
    return ScalingContext(_coeff_model(cfg), innov)


def _refuse(alpha, gamma):
    reg = regime(alpha, gamma)
    if reg == DIVERGENT:
        raise RegimeError(DIVERGENT_MESSAGE)
    if reg == BOUNDARY:
        raise RegimeError(BOUNDARY_MESSAGE)


@contextlib.contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def _num(v):
    return repr(float(v))


def _write_samples(fh, fmt, header, rows):
    """Stream replicate rows; returns how many were written.

    JSON-lines output starts with one ``{"header": ...}`` line. An interrupt
    stops the loop after the last complete row, which is flushed.
    """
    count = 0
    if fmt == "jsonl":
        fh.write(json.dumps({"header": header}, sort_keys=True) + "\n")
    else:
        fh.write("r,value,aux\n")
    try:
        for r, value, aux in rows:
            if fmt == "jsonl":
                fh.write(json.dumps({"r": r, "value": float(value), "aux": aux}) + "\n")
            else:
                fh.write(f"{r},{_num(value)},{'' if aux is None else aux}\n")
            count += 1
    finally:
        fh.flush()
    return count


def read_samples(path):
    """Read a JSON-lines sample file written by ``simulate-path`` or ``simulate-limit``."""
    header, values, aux = {}, [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{lineno}: not JSON ({exc.msg})") from None
            if "header" in obj:
                header = obj["header"]
                continue
            try:
                values.append(float(obj["value"]))
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"{path}:{lineno}: replicate line without a numeric value") from None
            aux.append(obj.get("aux"))
    if not values:
        raise ConfigError(f"{path}: no replicate lines")
    params = header.get("params", {})
    scale = header.get("meta", {}).get("scale")
    return SampleSet(np.array(values), label=header.get("label", os.path.basename(path)),
                     seed=header.get("seed"), params=params, digest=header.get("digest", ""),
                     meta={"scale": scale})


# -- subcommands ------------------------------------------------------------

def cmd_coeff_dump(args, cfg):
    model = _coeff_model(cfg)
    if args.n < 1:
        raise ConfigError("--n must be at least 1")
    g = model.coefficients(args.n)
    ps = model.partial_sums(args.n)
    with _sink(cfg.output.path) as fh:
        fh.write("i,g_i,partial_sum\n")
        for i in range(args.n):
            fh.write(f"{i},{_num(g[i])},{_num(ps[i])}\n")
    return EXIT_OK


def cmd_scaling_table(args, cfg):
    _refuse(cfg.innovation.alpha, cfg.model.gamma)
    if not (1.0 <= args.t_min < args.t_max) or args.points < 2:
        raise ConfigError("need 1 <= --t-min < --t-max and --points >= 2")
    ctx = _context(cfg)
    ts = np.geomspace(args.t_min, args.t_max, args.points)
    with _sink(cfg.output.path) as fh:
        fh.write("t,g_partial,abs_quantile,k\n")
        for row in ctx.table(ts):
            fh.write(",".join(_num(v) for v in row) + "\n")
    return EXIT_OK


def _header(cfg, kind, params, meta):
    return {"kind": kind, "label": kind, "seed": cfg.experiment.seed, "params": params,
            "digest": cfg.digest(), "meta": meta}


def cmd_simulate_path(args, cfg):
    cfg = _seed(cfg)
    e = cfg.experiment
    if e.a is None:
        raise ConfigError("simulate-path needs a drift: --a or experiment.a")
    ctx = _context(cfg)
    horizon = getattr(args, "horizon", None)
    pc = PathConfig(e.a, e.horizon_multiplier, e.replicates, e.seed, horizon=horizon, threads=e.threads)
    params = dict(ctx.params(), a=e.a)
    if ctx.regime == "heavy-traffic" and horizon is None:
        scale, n = prelimit_plan(ctx, pc)
    elif horizon is not None:
        scale, n = (ctx.ht_scale(e.a) if ctx.regime == "heavy-traffic" else None), horizon
    else:
        _refuse(ctx.alpha, ctx.gamma)
    log.info("simulate-path: a=%g N=%d replicates=%d threads=%d", e.a, n, e.replicates, e.threads)
    params["horizon"] = n
    header = _header(cfg, "prelimit", params, {"scale": scale, "horizon": n, "scaled": scale is not None})
    div = 1.0 if scale is None else scale
    rows = ((r, v / div, j) for r, v, j in iter_prelimit(ctx, pc, n))
    return _emit(cfg, header, rows)


def _emit(cfg, header, rows):
    with _sink(cfg.output.path) as fh:
        try:
            n = _write_samples(fh, cfg.output.format, header, rows)
        except KeyboardInterrupt:
            log.warning("interrupted; partial output flushed")
            return EXIT_INTERRUPTED
    log.info("wrote %d replicates", n)
    return EXIT_OK


def cmd_simulate_limit(args, cfg):
    _refuse(cfg.innovation.alpha, cfg.model.gamma)
    cfg = _seed(cfg)
    e = cfg.experiment
    ctx = _context(cfg)
    env = envelope(ctx.coeff)
    policy = default_policy(ctx.alpha, ctx.gamma, ctx.innov.p, env, tol=e.tol, T=e.T_override)
    if e.eps is not None:
        policy = type(policy)(T=policy.T, eps=e.eps, tol=policy.tol)
    reps = e.limit_replicates or e.replicates
    log.info("simulate-limit: T=%.6g eps=%.3g replicates=%d", policy.T, policy.eps, reps)
    counts = []

    def rows():
        for r, v, n in iter_limit(ctx, policy, reps, e.seed, env):
            counts.append(n)
            yield r, v, n

    header = _header(cfg, "limit", ctx.params(), {"T": policy.T, "eps": policy.eps, "tol": policy.tol,
                                                  "g_sup": env.g_sup, "g_neg": env.g_neg})
    code = _emit(cfg, header, rows())
    if counts:
        log.info("realized T=%.6g eps=%.3g mean relevant points %.2f", policy.T, policy.eps,
                 float(np.mean(counts)))
    return code


def cmd_compare(args, cfg=None):
    pre, lim = read_samples(args.prelimit), read_samples(args.limit)
    rep = compare_report(pre, lim, args.ks_threshold, n_boot=args.n_boot, seed=args.seed)
    print(rep.table())
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(rep.csv())
    if args.strict and not rep.passed:
        return EXIT_ACCEPTANCE
    return EXIT_OK


def cmd_rate_check(args, cfg):
    cfg = _seed(cfg)
    e = cfg.experiment
    ladder = e.a_ladder or ([e.a] if e.a else None)
    if not ladder or len(ladder) < 3:
        raise ConfigError("rate-check needs an a-ladder of at least three drifts (--a-ladder)")
    ctx = _context(cfg)
    _refuse(ctx.alpha, ctx.gamma)
    plans = []
    for a in ladder:
        pc = PathConfig(a, e.horizon_multiplier, e.replicates, e.seed, threads=e.threads)
        plans.append((a, pc, *prelimit_plan(ctx, pc)))
    work = e.replicates * sum(n for *_, n in plans)
    if work > args.max_work:
        raise ConfigError(f"ladder needs {work:.3g} innovations, above --max-work {args.max_work:.3g}")
    rows, pairs = [], []
    for a, pc, scale, n in plans:
        log.info("rate-check: a=%g N=%d", a, n)
        sups = np.array([v for _, v, _ in iter_prelimit(ctx, pc, n)])
        med = float(np.median(sups))
        rows.append((a, n, scale, med / scale, med))
        pairs.append((a, med))
    target = 1.0 / (ctx.alpha * ctx.gamma - 1.0)
    try:
        slope, se = growth_exponent(pairs)
    except HeavyTrafficError as exc:
        log.warning("no growth exponent: %s", exc)
        slope, se = math.nan, math.nan
    with _sink(cfg.output.path) as fh:
        fh.write("a,horizon,scale,median_scaled,median_sup\n")
        for a, n, scale, ms, m in rows:
            fh.write(f"{_num(a)},{n},{_num(scale)},{_num(ms)},{_num(m)}\n")
    log.warning("growth exponent %.4f +- %.4f, 1/(alpha*gamma-1) = %.4f", slope, se, target)
    return EXIT_OK


def cmd_verify(args, cfg=None):
    from . import acceptance

    numbers = args.only or (acceptance.QUICK if args.quick else sorted(acceptance.CRITERIA))
    ok = True
    for n in numbers:
        if n not in acceptance.CRITERIA:
            raise ConfigError(f"no acceptance criterion {n}")
        res = acceptance.CRITERIA[n]()
        print(acceptance.format_result(res), flush=True)
        ok &= res.passed
    return EXIT_OK if ok else EXIT_ACCEPTANCE


COMMANDS = {
    "coeff-dump": cmd_coeff_dump,
    "scaling-table": cmd_scaling_table,
    "simulate-path": cmd_simulate_path,
    "simulate-limit": cmd_simulate_limit,
    "compare": cmd_compare,
    "rate-check": cmd_rate_check,
    "verify": cmd_verify,
}


def _setup_logging(args):
    level = logging.ERROR if args.quiet else (logging.DEBUG if args.verbose > 1 else
                                              logging.INFO if args.verbose else logging.WARNING)
    # rebind on every call so in-process callers that swap sys.stderr see the logs
    for h in list(log.handlers):
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("htr: %(message)s"))
    log.addHandler(handler)
    log.setLevel(level)
    log.propagate = False


def main(argv=None, environ=None):
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args)
    environ = os.environ if environ is None else environ
    try:
        cfg = None
        if args.command not in ("compare", "verify"):
            cfg = _config(args, environ)
        return COMMANDS[args.command](args, cfg)
    except RegimeError as exc:
        log.error("%s", exc)
        return EXIT_REGIME
    except (HeavyTrafficError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except KeyboardInterrupt:
        log.warning("interrupted")
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
