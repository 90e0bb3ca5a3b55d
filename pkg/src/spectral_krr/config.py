"""Experiment configurations: defaults, JSON loading, flag overrides, validation."""

from dataclasses import asdict, dataclass, field, fields
import json
from pathlib import Path

from .filters import KINDS as FILTER_KINDS

METHODS = ("krr", "kpcr", "landweber")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


def _positive(name, value):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
        raise ConfigError(name, f"must be positive, got {value!r}")


def _positive_int(name, value):
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(name, f"must be a positive integer, got {value!r}")


def _nonneg(name, value):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
        raise ConfigError(name, f"must be non-negative, got {value!r}")


def _methods(name, value):
    if not value:
        raise ConfigError(name, "must list at least one method")
    for m in value:
        if m not in METHODS:
            raise ConfigError(name, f"unknown method {m!r}; expected one of {METHODS}")


def _grid(prefix, lo, hi, count):
    _positive(f"{prefix}_min", lo)
    _positive(f"{prefix}_max", hi)
    _positive_int(f"{prefix}_count", count)
    if hi < lo:
        raise ConfigError(f"{prefix}_max", "must be >= the minimum")


@dataclass
class CommonConfig:
    seed: int = 0
    out: str = "results"
    threads: int | None = None

    def validate_common(self):
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        if self.threads is not None:
            _positive_int("threads", self.threads)


@dataclass
class ReproduceSimConfig(CommonConfig):
    domain_size: int = 2**13
    n: int = 2**13
    n_validation: int | None = None
    exponent: float = 0.5
    noise_var: float = 0.25
    lambda_min: float = 1e-5
    lambda_max: float = 0.02
    lambda_count: int = 2**10
    methods: list = field(default_factory=lambda: ["krr", "kpcr"])
    replicates: int = 5
    solver: str = "auto"

    def validate(self):
        self.validate_common()
        _positive_int("domain_size", self.domain_size)
        _positive_int("n", self.n)
        if self.n_validation is not None:
            _positive_int("n_validation", self.n_validation)
        _nonneg("exponent", self.exponent)
        _nonneg("noise_var", self.noise_var)
        _grid("lambda", self.lambda_min, self.lambda_max, self.lambda_count)
        _methods("methods", self.methods)
        _positive_int("replicates", self.replicates)
        if self.solver not in ("auto", "dense", "grouped"):
            raise ConfigError("solver", "must be auto, dense or grouped")


@dataclass
class RatesConfig(CommonConfig):
    mode: str = "polynomial"
    domain_size: int = 4096
    exponent: float = 2.0
    noise_var: float = 0.25
    ladder: list = field(default_factory=lambda: [256, 512, 1024, 2048, 4096])
    replicates: int = 20
    zeta: float = 0.0
    scale: float = 1.0
    support: int | None = None
    r: float = 0.5
    methods: list = field(default_factory=lambda: ["krr", "kpcr"])
    lambda_mode: str = "oracle"
    ridge_scales: list = field(default_factory=lambda: [2.0**k for k in range(-6, 3)])
    lambda_min: float = 1e-5
    lambda_max: float = 0.2
    lambda_count: int = 256

    def validate(self):
        self.validate_common()
        if self.mode not in ("polynomial", "finite-rank"):
            raise ConfigError("mode", "must be 'polynomial' or 'finite-rank'")
        _positive_int("domain_size", self.domain_size)
        _positive("exponent", self.exponent)
        if self.exponent <= 1:
            raise ConfigError("exponent", "polynomial decay needs exponent > 1 (nu > 1/2)")
        _nonneg("noise_var", self.noise_var)
        if not isinstance(self.ladder, list) or len(self.ladder) < 3:
            raise ConfigError("ladder", "need ≥ 3 ladder points")
        for v in self.ladder:
            _positive_int("ladder", v)
        _positive_int("replicates", self.replicates)
        _nonneg("zeta", self.zeta)
        _positive("scale", self.scale)
        if self.support is not None:
            _positive_int("support", self.support)
            if self.support > self.domain_size:
                raise ConfigError("support", "cannot exceed domain_size")
        if not 0 < self.r < 1:
            raise ConfigError("r", "must lie in (0, 1)")
        _methods("methods", self.methods)
        if self.lambda_mode not in ("oracle", "validation"):
            raise ConfigError("lambda_mode", "must be 'oracle' or 'validation'")
        if not self.ridge_scales:
            raise ConfigError("ridge_scales", "must be non-empty")
        for v in self.ridge_scales:
            _positive("ridge_scales", v)
        _grid("lambda", self.lambda_min, self.lambda_max, self.lambda_count)


@dataclass
class BoundsConfig(CommonConfig):
    domain_sizes: list = field(default_factory=lambda: [64, 256])
    exponents: list = field(default_factory=lambda: [1.0, 2.0])
    noise_vars: list = field(default_factory=lambda: [0.01, 0.25])
    lambdas: list = field(default_factory=lambda: [0.011, 0.05, 0.3])
    n: int = 512
    support: int = 5
    methods: list = field(default_factory=lambda: ["krr", "kpcr"])
    replicates: int = 200
    zeta: float = 0.0
    delta: float = 0.0

    def validate(self):
        self.validate_common()
        for name in ("domain_sizes", "exponents", "noise_vars", "lambdas"):
            if not getattr(self, name):
                raise ConfigError(name, "must be non-empty")
        for v in self.domain_sizes:
            _positive_int("domain_sizes", v)
        for v in self.exponents:
            _nonneg("exponents", v)
        for v in self.noise_vars:
            _nonneg("noise_vars", v)
        for v in self.lambdas:
            _positive("lambdas", v)
        _positive_int("n", self.n)
        _positive_int("support", self.support)
        _methods("methods", self.methods)
        _positive_int("replicates", self.replicates)
        _nonneg("zeta", self.zeta)
        if not 0 <= self.delta <= 1:
            raise ConfigError("delta", "must lie in [0, 1]")


def _default_concentration_cases():
    return [
        {"domain_size": 16, "exponent": 1.0, "n": 200, "lambda": 0.05, "delta": 0.0, "r": None},
        {"domain_size": 64, "exponent": 2.0, "n": 500, "lambda": 0.02, "delta": 0.0, "r": None},
        {"domain_size": 4, "exponent": 0.0, "n": 1000, "lambda": 0.1, "delta": 0.0, "r": None},
        {"domain_size": 32, "exponent": 1.0, "n": 2000, "lambda": 0.01, "delta": 0.5, "r": None},
    ]


@dataclass
class ConcentrationConfig(CommonConfig):
    cases: list = field(default_factory=_default_concentration_cases)
    replicates: int = 2000

    def validate(self):
        self.validate_common()
        _positive_int("replicates", self.replicates)
        if not self.cases:
            raise ConfigError("cases", "must be non-empty")
        for i, case in enumerate(self.cases):
            p = f"cases[{i}]"
            for key in ("domain_size", "exponent", "n", "lambda"):
                if key not in case:
                    raise ConfigError(f"{p}.{key}", "missing")
            _positive_int(f"{p}.domain_size", case["domain_size"])
            _nonneg(f"{p}.exponent", case["exponent"])
            _positive_int(f"{p}.n", case["n"])
            _positive(f"{p}.lambda", case["lambda"])
            delta = case.get("delta", 0.0)
            if not 0 <= delta < 1:
                raise ConfigError(f"{p}.delta", "must lie in [0, 1)")
            if case.get("r") is not None:
                _positive(f"{p}.r", case["r"])


@dataclass
class FitPrecomputedConfig(CommonConfig):
    kernel: str | None = None
    labels: str | None = None
    splits: str | None = None
    lambda_min: float = 1e-5
    lambda_max: float = 0.4
    lambda_count: int = 2**10
    methods: list = field(default_factory=lambda: ["krr", "kpcr"])

    def validate(self):
        self.validate_common()
        for name in ("kernel", "labels", "splits"):
            if not getattr(self, name):
                raise ConfigError(name, "path is required")
        _grid("lambda", self.lambda_min, self.lambda_max, self.lambda_count)
        _methods("methods", self.methods)


@dataclass
class FiltersVerifyConfig(CommonConfig):
    kappa_sq: float = 1.0
    grid_size: int = 1000
    lambda_min: float = 1e-4
    t_min: float = 1e-6
    xis: list = field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
    landweber_slack: float = 1.0
    kinds: list = field(default_factory=lambda: list(FILTER_KINDS))

    def validate(self):
        self.validate_common()
        _positive("kappa_sq", self.kappa_sq)
        _positive_int("grid_size", self.grid_size)
        _positive("lambda_min", self.lambda_min)
        _positive("t_min", self.t_min)
        if self.lambda_min > self.kappa_sq:
            raise ConfigError("lambda_min", "must not exceed kappa_sq")
        if self.t_min > self.kappa_sq:
            raise ConfigError("t_min", "must not exceed kappa_sq")
        if not self.xis:
            raise ConfigError("xis", "must be non-empty")
        for v in self.xis:
            _nonneg("xis", v)
        if not isinstance(self.landweber_slack, (int, float)) or self.landweber_slack < 1:
            raise ConfigError("landweber_slack", "must be >= 1")
        if not self.kinds:
            raise ConfigError("kinds", "must be non-empty")
        for k in self.kinds:
            if k not in FILTER_KINDS:
                raise ConfigError("kinds", f"unknown filter kind {k!r}")


def load_json(path):
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON ({exc.msg})") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return data


def resolve(cls, file_values, overrides):
    """Defaults, then file values, then non-None overrides; validated."""
    names = {f.name for f in fields(cls)}
    merged = {}
    for source in (file_values, overrides):
        for key, value in source.items():
            key = key.replace("-", "_")
            if key not in names:
                if source is file_values:
                    raise ConfigError(key, "unknown configuration key")
                continue
            if value is not None:
                merged[key] = value
    cfg = cls(**merged)
    cfg.validate()
    return cfg


def echo(cfg):
    """Single-line JSON of the resolved configuration."""
    return json.dumps(asdict(cfg), sort_keys=True, separators=(",", ":"))
