"""Scenario files: flat ``section.key = value`` lines.

Comments start with ``#``.  Values are numbers, ``true``/``false``, bare or
quoted words, comma lists, or ``start:stop:step`` sweeps (stop inclusive).
Demand distributions are written ``demand:prob, demand:prob`` and hopped
demand pairs ``a/b:prob, ...``.  Unknown keys are errors.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from pathlib import Path

from .classes import TAIL_POLICIES
from .erlang import DISCOUNT_MODES
from .errors import ConfigError
from .simulator import HOLDING_MODELS

RSMS_INTERFERER_MODES = ("same-offset", "nearest")


@dataclass(frozen=True)
class ScenarioConfig:
    # geometry
    inter_bs_distance: float = 1732.0
    subcell_circumradius: float = 0.0  # 0: equal-area default
    rotation: float = 0.0
    rsms_interferers: str = "same-offset"
    # radio
    system_bandwidth: float = 10e6
    subcarrier_bandwidth: float = 15e3
    k_bs: int = 480
    k_rs: int = 30
    rate: float = 64e3
    # propagation
    interferers: int = 6
    path_loss_exponent: float = 3.5
    sigma_bs_ms: float = 8.0
    sigma_ibs_ms: float = 8.0
    sigma_bs_rs: float = 4.0
    sigma_ibs_rs: float = 4.0
    sigma_rs_ms: float = 8.0
    sigma_irs_ms: float = 8.0
    # traffic
    lambdas: tuple[float, ...] = tuple(float(x) for x in range(1, 81))
    mu: float = 1.0
    direct_fraction: float = 0.5
    per_rs_split: bool = True
    relay_count: int = 6
    # classes
    class_epsilon: float = 1e-4
    max_classes: int = 0  # 0: no cap
    tail_policy: str = "block"
    bs_ms_pmf: tuple[tuple[int, float], ...] = ()
    bs_rs_pmf: tuple[tuple[int, float], ...] = ()
    rs_ms_pmf: tuple[tuple[int, float], ...] = ()
    hopped_pairs: tuple[tuple[int, int, float], ...] = ()
    # model
    discount_mode: str = "aggregate"
    # numerics
    points_per_triangle: int = 256
    exact_samples: int = 1_000_000
    validation_seed: int = 12345
    # simulation
    sim_horizon: float = 1000.0
    sim_warmup: float = 50.0
    sim_replications: int = 20
    sim_seed: int = 1
    holding_model: str = "single"

    def canonical(self) -> str:
        """Canonical text with every key materialised; parses back to ``self``."""
        lines = []
        for key, (attr, kind) in KEYS.items():
            lines.append(f"{key} = {_render(getattr(self, attr), kind)}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


# key -> (attribute, value kind)
KEYS: dict[str, tuple[str, str]] = {
    "geometry.inter_bs_distance": ("inter_bs_distance", "float"),
    "geometry.subcell_circumradius": ("subcell_circumradius", "float"),
    "geometry.rotation": ("rotation", "float"),
    "geometry.rsms_interferers": ("rsms_interferers", "word"),
    "radio.system_bandwidth": ("system_bandwidth", "float"),
    "radio.subcarrier_bandwidth": ("subcarrier_bandwidth", "float"),
    "radio.k_bs": ("k_bs", "int"),
    "radio.k_rs": ("k_rs", "int"),
    "radio.rate": ("rate", "float"),
    "propagation.interferers": ("interferers", "int"),
    "propagation.path_loss_exponent": ("path_loss_exponent", "float"),
    "shadowing.bs_ms": ("sigma_bs_ms", "float"),
    "shadowing.ibs_ms": ("sigma_ibs_ms", "float"),
    "shadowing.bs_rs": ("sigma_bs_rs", "float"),
    "shadowing.ibs_rs": ("sigma_ibs_rs", "float"),
    "shadowing.rs_ms": ("sigma_rs_ms", "float"),
    "shadowing.irs_ms": ("sigma_irs_ms", "float"),
    "traffic.lambda": ("lambdas", "sweep"),
    "traffic.mu": ("mu", "float"),
    "traffic.direct_fraction": ("direct_fraction", "float"),
    "traffic.per_rs_split": ("per_rs_split", "bool"),
    "traffic.relay_count": ("relay_count", "int"),
    "classes.epsilon": ("class_epsilon", "float"),
    "classes.max_classes": ("max_classes", "int"),
    "classes.tail_policy": ("tail_policy", "word"),
    "classes.bs_ms_pmf": ("bs_ms_pmf", "pmf"),
    "classes.bs_rs_pmf": ("bs_rs_pmf", "pmf"),
    "classes.rs_ms_pmf": ("rs_ms_pmf", "pmf"),
    "classes.hopped_pairs": ("hopped_pairs", "pairs"),
    "model.discount_mode": ("discount_mode", "word"),
    "quadrature.points_per_triangle": ("points_per_triangle", "int"),
    "validation.exact_samples": ("exact_samples", "int"),
    "validation.seed": ("validation_seed", "int"),
    "simulation.horizon": ("sim_horizon", "float"),
    "simulation.warmup": ("sim_warmup", "float"),
    "simulation.replications": ("sim_replications", "int"),
    "simulation.seed": ("sim_seed", "int"),
    "simulation.holding_model": ("holding_model", "word"),
}

CHOICES = {
    "rsms_interferers": RSMS_INTERFERER_MODES,
    "tail_policy": TAIL_POLICIES,
    "discount_mode": DISCOUNT_MODES,
    "holding_model": HOLDING_MODELS,
}

_ATTR_TO_KEY = {attr: key for key, (attr, _) in KEYS.items()}


def _render(value, kind: str) -> str:
    if kind == "float":
        return repr(float(value))
    if kind == "int":
        return str(int(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind == "word":
        return str(value)
    if kind == "sweep":
        return ", ".join(repr(float(v)) for v in value)
    if kind == "pmf":
        return ", ".join(f"{d}:{p!r}" for d, p in value) if value else '""'
    if kind == "pairs":
        return ", ".join(f"{a}/{b}:{p!r}" for a, b, p in value) if value else '""'
    raise AssertionError(kind)


def _number(tok: str, kind: str):
    if kind == "int":
        v = float(tok)
        if not v.is_integer():
            raise ValueError(f"expected an integer, got {tok!r}")
        return int(v)
    v = float(tok)
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {tok!r}")
    return v


def _parse_value(raw: str, kind: str):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        raw = raw[1:-1].strip()
    if kind in ("float", "int"):
        return _number(raw, kind)
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected true/false, got {raw!r}")
    if kind == "word":
        if not raw:
            raise ValueError("empty value")
        return raw
    if kind == "sweep":
        if ":" in raw:
            parts = raw.split(":")
            if len(parts) != 3:
                raise ValueError("sweep must be start:stop:step")
            start, stop, step = (float(p) for p in parts)
            if step <= 0 or stop < start:
                raise ValueError("sweep needs step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return tuple(start + k * step for k in range(n))
        vals = tuple(float(p) for p in raw.split(",") if p.strip())
        if not vals:
            raise ValueError("empty lambda list")
        return vals
    if kind == "pmf":
        out = []
        for item in filter(None, (p.strip() for p in raw.split(","))):
            d, p = item.split(":")
            out.append((_number(d, "int"), float(p)))
        return tuple(out)
    if kind == "pairs":
        out = []
        for item in filter(None, (p.strip() for p in raw.split(","))):
            ab, p = item.split(":")
            a, b = ab.split("/")
            out.append((_number(a, "int"), _number(b, "int"), float(p)))
        return tuple(out)
    raise AssertionError(kind)


def parse_config(text: str, path: str | None = None) -> ScenarioConfig:
    values = {}
    lines = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno, path)
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if key in lines:
            raise ConfigError(f"duplicate key {key!r} (first on line {lines[key]})", lineno, path)
        attr, kind = KEYS[key]
        try:
            values[attr] = _parse_value(raw, kind)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno, path) from None
        lines[key] = lineno
    cfg = ScenarioConfig(**values)
    validate(cfg, lines, path)
    return cfg


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=str(p)) from None
    return parse_config(text, str(p))


def validate(cfg: ScenarioConfig, lines: dict[str, int] | None = None, path: str | None = None) -> None:
    """Check ranges and cross-field constraints; errors name the constraint."""
    lines = lines or {}

    def fail(attr, msg):
        key = _ATTR_TO_KEY.get(attr)
        raise ConfigError(msg, lines.get(key), path)

    positive = [
        "inter_bs_distance", "system_bandwidth", "subcarrier_bandwidth", "rate", "mu",
        "sim_horizon", "class_epsilon",
    ]
    for attr in positive:
        if not getattr(cfg, attr) > 0:
            fail(attr, f"{_ATTR_TO_KEY[attr]} must be positive")
    for attr in ("k_bs", "k_rs", "relay_count", "points_per_triangle", "sim_replications", "exact_samples"):
        if getattr(cfg, attr) < 1:
            fail(attr, f"{_ATTR_TO_KEY[attr]} must be >= 1")
    for attr in ("subcell_circumradius", "max_classes", "sim_warmup"):
        if getattr(cfg, attr) < 0:
            fail(attr, f"{_ATTR_TO_KEY[attr]} must be >= 0")
    for attr in ("sigma_bs_ms", "sigma_ibs_ms", "sigma_bs_rs", "sigma_ibs_rs", "sigma_rs_ms", "sigma_irs_ms"):
        if getattr(cfg, attr) < 0:
            fail(attr, f"{_ATTR_TO_KEY[attr]} must be >= 0 dB")
    if not 1 <= cfg.interferers <= 6:
        fail("interferers", "propagation.interferers must be between 1 and 6 (first tier only)")
    if not cfg.path_loss_exponent > 2:
        fail("path_loss_exponent", "propagation.path_loss_exponent must exceed 2")
    if not 0 <= cfg.direct_fraction <= 1:
        fail("direct_fraction", "traffic.direct_fraction must lie in [0, 1]")
    if not cfg.class_epsilon < 1:
        fail("class_epsilon", "classes.epsilon must lie in (0, 1)")
    if any(v < 0 for v in cfg.lambdas):
        fail("lambdas", "traffic.lambda values must be >= 0")
    if not cfg.sim_horizon > cfg.sim_warmup:
        fail("sim_warmup", "constraint horizon-after-warmup violated: simulation.horizon must exceed simulation.warmup")
    for attr, choices in CHOICES.items():
        if getattr(cfg, attr) not in choices:
            fail(attr, f"{_ATTR_TO_KEY[attr]} must be one of {', '.join(choices)}")
    budget = cfg.system_bandwidth / cfg.subcarrier_bandwidth
    if cfg.k_bs + cfg.relay_count * cfg.k_rs > budget + 1e-9:
        fail(
            "k_bs",
            f"constraint subcarrier-budget violated: k_bs + relay_count*k_rs = "
            f"{cfg.k_bs + cfg.relay_count * cfg.k_rs} exceeds system_bandwidth/subcarrier_bandwidth = {budget:g}",
        )
    for attr in ("bs_ms_pmf", "bs_rs_pmf", "rs_ms_pmf"):
        pmf = getattr(cfg, attr)
        if pmf:
            if any(d < 1 or p < 0 for d, p in pmf):
                fail(attr, f"{_ATTR_TO_KEY[attr]}: demands must be >= 1 and probabilities >= 0")
            if abs(sum(p for _, p in pmf) - 1) > 1e-9:
                fail(attr, f"{_ATTR_TO_KEY[attr]}: probabilities must sum to 1")
    if cfg.hopped_pairs:
        if abs(sum(p for *_, p in cfg.hopped_pairs) - 1) > 1e-9:
            fail("hopped_pairs", "classes.hopped_pairs: probabilities must sum to 1")
        if any(a < 1 or b < 1 or p < 0 for a, b, p in cfg.hopped_pairs):
            fail("hopped_pairs", "classes.hopped_pairs: demands must be >= 1 and probabilities >= 0")


def with_overrides(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    """Copy with fields replaced, re-validated."""
    out = replace(cfg, **changes)
    validate(out)
    return out


def default_config() -> ScenarioConfig:
    return ScenarioConfig()


__all__ = [
    "ScenarioConfig",
    "parse_config",
    "load_config",
    "validate",
    "with_overrides",
    "default_config",
    "KEYS",
]
