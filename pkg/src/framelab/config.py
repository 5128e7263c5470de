"""Run configuration: defaults, TOML file loading, and validation.

Precedence is defaults < config file < explicit overrides (CLI flags).
Validation errors always name the offending section.key.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .grid import SHAPE_KINDS

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version-dependent import
    import tomli as tomllib

_DOMAIN_PARAM_KEYS = ("a", "b", "x0", "x1", "y0", "y1", "radius", "cx", "cy",
                      "r_inner", "r_outer", "rx", "ry")


@dataclass
class RunConfig:
    domain_kind: str = "interval"
    domain_params: dict = field(default_factory=dict)
    h: float = 1.0 / 256
    operator: dict = field(default_factory=lambda: {"kind": "identity"})
    solver_m: int | str = "auto"
    solver_tol: float = 1e-8
    dense_threshold: int = 4096
    eta: float = 0.5
    delta: float = 0.5
    a0: float | str = "calibrate"
    max_level: int | None = None
    alphas: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    qs: list = field(default_factory=lambda: [1.0, 2.0, math.inf])
    seed: int = 1234
    trials: int = 100
    besov_functions: int = 20
    out_dir: str = "framelab-out"

    def validate(self) -> "RunConfig":
        if self.domain_kind not in SHAPE_KINDS:
            raise ConfigurationError(
                f"domain.kind: unknown kind {self.domain_kind!r}, expected one of {SHAPE_KINDS}"
            )
        if not self.h > 0:
            raise ConfigurationError(f"domain.h: must be > 0, got {self.h}")
        if self.solver_m != "auto" and (not isinstance(self.solver_m, int) or self.solver_m < 1):
            raise ConfigurationError(f"solver.m: must be 'auto' or a positive integer, got {self.solver_m!r}")
        if not self.solver_tol > 0:
            raise ConfigurationError(f"solver.tol: must be > 0, got {self.solver_tol}")
        if self.dense_threshold < 0:
            raise ConfigurationError(f"solver.dense_threshold: must be >= 0, got {self.dense_threshold}")
        if not self.eta > 0:
            raise ConfigurationError(f"solver.eta: must be > 0, got {self.eta}")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError(f"frame.delta: must be in (0, 1), got {self.delta}")
        if self.a0 != "calibrate" and (not isinstance(self.a0, (int, float)) or self.a0 <= 0):
            raise ConfigurationError(f"frame.a0: must be 'calibrate' or a positive number, got {self.a0!r}")
        if self.max_level is not None and self.max_level < 0:
            raise ConfigurationError(f"frame.max_level: must be >= 0, got {self.max_level}")
        for a in self.alphas:
            if not a > 0:
                raise ConfigurationError(f"besov.alphas: entries must be > 0, got {a}")
        for q in self.qs:
            if not (q >= 1 or math.isinf(q)):
                raise ConfigurationError(f"besov.qs: entries must be in [1, inf], got {q}")
        if self.trials < 1:
            raise ConfigurationError(f"test.trials: must be >= 1, got {self.trials}")
        if self.besov_functions < 1:
            raise ConfigurationError(f"test.besov_functions: must be >= 1, got {self.besov_functions}")
        return self

    def to_echo(self) -> dict:
        """JSON-ready echo of the effective configuration."""
        return {
            "domain": {"kind": self.domain_kind, "h": self.h, **self.domain_params},
            "operator": dict(self.operator),
            "solver": {
                "m": self.solver_m,
                "tol": self.solver_tol,
                "dense_threshold": self.dense_threshold,
                "eta": self.eta,
            },
            "frame": {
                "delta": self.delta,
                "a0": self.a0,
                **({"max_level": self.max_level} if self.max_level is not None else {}),
            },
            "besov": {"alphas": list(self.alphas), "qs": [q_repr(q) for q in self.qs]},
            "test": {
                "seed": self.seed,
                "trials": self.trials,
                "besov_functions": self.besov_functions,
            },
            "output": {"dir": self.out_dir},
        }


def q_repr(q):
    return "inf" if isinstance(q, float) and math.isinf(q) else q


def _parse_q(value, where: str) -> float:
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity"):
            return math.inf
        raise ConfigurationError(f"{where}: expected a number or 'inf', got {value!r}")
    return float(value)


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a RunConfig from nested section dicts."""
    cfg = RunConfig()
    known = {"domain", "operator", "solver", "frame", "besov", "test", "output"}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown config section(s): {sorted(unknown)}")

    dom = dict(data.get("domain", {}))
    if "kind" in dom:
        cfg.domain_kind = dom.pop("kind")
    if "h" in dom:
        cfg.h = float(dom.pop("h"))
    bad = set(dom) - set(_DOMAIN_PARAM_KEYS)
    if bad:
        raise ConfigurationError(f"domain.{sorted(bad)[0]}: unknown domain parameter")
    cfg.domain_params = {k: float(v) for k, v in dom.items()}

    if "operator" in data:
        cfg.operator = dict(data["operator"])

    sol = data.get("solver", {})
    if "m" in sol:
        cfg.solver_m = sol["m"] if sol["m"] == "auto" else int(sol["m"])
    if "tol" in sol:
        cfg.solver_tol = float(sol["tol"])
    if "dense_threshold" in sol:
        cfg.dense_threshold = int(sol["dense_threshold"])
    if "eta" in sol:
        cfg.eta = float(sol["eta"])

    fr = data.get("frame", {})
    if "delta" in fr:
        cfg.delta = float(fr["delta"])
    if "a0" in fr:
        cfg.a0 = fr["a0"] if fr["a0"] == "calibrate" else float(fr["a0"])
    if "max_level" in fr:
        cfg.max_level = int(fr["max_level"])

    bs = data.get("besov", {})
    if "alphas" in bs:
        cfg.alphas = [float(a) for a in bs["alphas"]]
    if "qs" in bs:
        cfg.qs = [_parse_q(q, "besov.qs") for q in bs["qs"]]

    ts = data.get("test", {})
    if "seed" in ts:
        cfg.seed = int(ts["seed"])
    if "trials" in ts:
        cfg.trials = int(ts["trials"])
    if "besov_functions" in ts:
        cfg.besov_functions = int(ts["besov_functions"])

    out = data.get("output", {})
    if "dir" in out:
        cfg.out_dir = str(out["dir"])

    return cfg.validate()


def config_from_file(path) -> RunConfig:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return config_from_dict(data)


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Apply flat 'section.key' -> value overrides on top of a config."""
    nested: dict = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if "." not in key:
            raise ConfigurationError(f"override {key!r} must look like section.key")
        section, name = key.split(".", 1)
        nested.setdefault(section, {})[name] = value
    merged = cfg.to_echo()
    # echo uses flattened domain params and stringified q; rebuild from it
    for section, kv in nested.items():
        merged.setdefault(section, {}).update(kv)
    if "qs" in merged.get("besov", {}):
        merged["besov"]["qs"] = [
            q if not isinstance(q, str) else q for q in merged["besov"]["qs"]
        ]
    return config_from_dict(merged)
