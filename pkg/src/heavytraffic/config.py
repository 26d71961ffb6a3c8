"""Run configuration: a YAML file with four fixed sections.

::

    model:
      kind: fractional          # fractional | farima | example
      gamma: 0.9
      numerator: [1.0]          # farima only, coefficients in B
      denominator: [1.0]
    innovation:
      kind: two-sided-pareto    # two-sided-pareto | exact-stable
      alpha: 1.5
      p: 1.0                    # or skew = p - q
    experiment:
      a: 0.08
      a_ladder: [0.25, 0.16, 0.08]
      horizon_multiplier: 8
      replicates: 100
      eps: null                 # null -> default truncation policy
      tol: null
      T_override: null
      seed: null                # null -> generated and reported
      threads: 1
    output:
      path: null                # null -> stdout
      format: jsonl             # jsonl | csv

Every key is optional; unknown keys are rejected with an error naming them.
"""

import copy
from dataclasses import asdict, dataclass, field, fields

import yaml

from .exceptions import ConfigError
from .stats import digest_of

__all__ = [
    "RunConfig",
    "ModelSection",
    "InnovationSection",
    "ExperimentSection",
    "OutputSection",
    "parse_config",
    "load_config",
    "dump_config",
]

FORMATS = ("jsonl", "csv")


def _number(name, v, positive=False, integer=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    if integer:
        if isinstance(v, float):
            if not v.is_integer():
                raise ConfigError(f"{name} must be an integer, got {v!r}")
            v = int(v)
    else:
        v = float(v)
    if positive and not v > 0:
        raise ConfigError(f"{name} must be positive, got {v!r}")
    return v


def _numbers(name, seq, allow_none=False):
    if seq is None and allow_none:
        return None
    if not isinstance(seq, (list, tuple)) or not seq:
        raise ConfigError(f"{name} must be a nonempty list of numbers")
    return [_number(f"{name}[{i}]", v) for i, v in enumerate(seq)]


@dataclass
class ModelSection:
    kind: str = "fractional"
    gamma: float = 0.9
    numerator: list = field(default_factory=lambda: [1.0])
    denominator: list = field(default_factory=lambda: [1.0])

    def check(self):
        if self.kind not in ("fractional", "farima", "example"):
            raise ConfigError(f"model.kind must be fractional, farima or example, got {self.kind!r}")
        self.gamma = _number("model.gamma", self.gamma)
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"model.gamma must lie in (0, 1), got {self.gamma!r}")
        self.numerator = _numbers("model.numerator", self.numerator)
        self.denominator = _numbers("model.denominator", self.denominator)


@dataclass
class InnovationSection:
    kind: str = "two-sided-pareto"
    alpha: float = 1.5
    p: float | None = None
    skew: float | None = None

    def check(self):
        if self.kind not in ("two-sided-pareto", "exact-stable"):
            raise ConfigError(
                f"innovation.kind must be two-sided-pareto or exact-stable, got {self.kind!r}")
        self.alpha = _number("innovation.alpha", self.alpha)
        if not 1.0 < self.alpha < 2.0:
            raise ConfigError(f"innovation.alpha must lie in (1, 2), got {self.alpha!r}")
        self.p = _number("innovation.p", self.p, allow_none=True)
        self.skew = _number("innovation.skew", self.skew, allow_none=True)
        if self.skew is not None:
            if not -1.0 <= self.skew <= 1.0:
                raise ConfigError(f"innovation.skew must lie in [-1, 1], got {self.skew!r}")
            from_skew = (1.0 + self.skew) / 2.0
            if self.p is not None and abs(self.p - from_skew) > 1e-12:
                raise ConfigError("innovation.p and innovation.skew disagree (skew = 2p - 1)")
            self.p = from_skew
            self.skew = None
        if self.p is None:
            self.p = 1.0
        if not 0.0 < self.p <= 1.0:
            raise ConfigError(f"innovation.p must lie in (0, 1], got {self.p!r}")


@dataclass
class ExperimentSection:
    a: float | None = None
    a_ladder: list | None = None
    horizon_multiplier: float = 8.0
    replicates: int = 100
    limit_replicates: int | None = None
    eps: float | None = None
    tol: float | None = None
    T_override: float | None = None
    seed: int | None = None
    threads: int = 1

    def check(self):
        self.a = _number("experiment.a", self.a, positive=True, allow_none=True)
        if self.a_ladder is not None:
            self.a_ladder = _numbers("experiment.a_ladder", self.a_ladder)
            if any(v <= 0 for v in self.a_ladder):
                raise ConfigError("experiment.a_ladder entries must be positive")
        self.horizon_multiplier = _number("experiment.horizon_multiplier",
                                          self.horizon_multiplier, positive=True)
        self.replicates = _number("experiment.replicates", self.replicates,
                                  positive=True, integer=True)
        self.limit_replicates = _number("experiment.limit_replicates", self.limit_replicates,
                                        positive=True, integer=True, allow_none=True)
        for name in ("eps", "tol", "T_override"):
            setattr(self, name, _number(f"experiment.{name}", getattr(self, name),
                                        positive=True, allow_none=True))
        self.seed = _number("experiment.seed", self.seed, integer=True, allow_none=True)
        if self.seed is not None and self.seed < 0:
            raise ConfigError("experiment.seed must be nonnegative")
        self.threads = _number("experiment.threads", self.threads, positive=True, integer=True)


@dataclass
class OutputSection:
    path: str | None = None
    format: str = "jsonl"

    def check(self):
        if self.path is not None and not isinstance(self.path, str):
            raise ConfigError("output.path must be a string")
        if self.format not in FORMATS:
            raise ConfigError(f"output.format must be one of {FORMATS}, got {self.format!r}")


SECTIONS = {
    "model": ModelSection,
    "innovation": InnovationSection,
    "experiment": ExperimentSection,
    "output": OutputSection,
}

# keys that change how a run executes or where it writes, not what it computes
NON_SEMANTIC = {"experiment": ("threads",), "output": ("path", "format")}


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    innovation: InnovationSection = field(default_factory=InnovationSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    output: OutputSection = field(default_factory=OutputSection)

    def __post_init__(self):
        for name in SECTIONS:
            getattr(self, name).check()

    @classmethod
    def from_dict(cls, data):
        """Build from nested mappings, rejecting any key outside the schema."""
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("a run config must be a mapping of sections")
        unknown = sorted(set(data) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(map(str, unknown))}")
        sections = {}
        for name, kind in SECTIONS.items():
            body = data.get(name) or {}
            if not isinstance(body, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            allowed = {f.name for f in fields(kind)}
            bad = sorted(set(body) - allowed)
            if bad:
                raise ConfigError(f"unknown key(s) in section {name!r}: "
                                  + ", ".join(f"{name}.{k}" for k in map(str, bad)))
            sections[name] = kind(**copy.deepcopy(body))
        return cls(**sections)

    def to_dict(self):
        return {name: asdict(getattr(self, name)) for name in SECTIONS}

    def semantic_dict(self):
        d = self.to_dict()
        for name, keys in NON_SEMANTIC.items():
            for k in keys:
                d[name].pop(k)
        return d

    def digest(self):
        """SHA-256 of everything that affects the numbers produced.

        Thread count and output location are excluded, so the digest (and
        every output that embeds it) is the same for any degree of
        parallelism.
        """
        return digest_of(self.semantic_dict())

    def override(self, section, **values):
        """Copy with the non-``None`` ``values`` replacing keys of ``section``."""
        d = self.to_dict()
        for k, v in values.items():
            if v is not None:
                if k not in d[section]:
                    raise ConfigError(f"unknown key {section}.{k}")
                d[section][k] = v
        if section == "innovation" and values.get("p") is not None:
            d["innovation"]["skew"] = None
        return RunConfig.from_dict(d)


def parse_config(text):
    """Parse YAML text into a :class:`RunConfig`."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    return RunConfig.from_dict(data)


def load_config(path):
    """Read and parse a config file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(config):
    return yaml.safe_dump(config.to_dict(), sort_keys=True, default_flow_style=False)
