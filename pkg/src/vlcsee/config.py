"""Scenario configuration and its INI-style file format.

Example::

    [scenario]
    layout = 2x2
    users = 3
    power = 30 dBm
    thresholds = 0.5
    circuitry_power = 8
    led_voltage = 3
    xi = 3

    [algorithm]
    name = cccp
    eps1 = 1e-4

    [experiment]
    seed = 1
    realizations = 1000

    [sweep]
    axis = power_dbm
    values = 20:40:1
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field

import numpy as np

ALGORITHMS = ("cccp", "cccp_sdr", "zf", "random_zf")
LAYOUT_TX = {"2x2": 4, "2x3": 6, "3x3": 9}
SAMPLING = ("per_point", "common")
AXES = ("power_dbm", "threshold", "circuitry", "config")


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    layout: str = "2x2"
    n_users: int = 3
    power_dbm: float = 30.0
    thresholds: float | tuple = 0.5
    circuitry_power: float = 8.0
    led_voltage: float = 3.0
    xi: float = 3.0
    algorithm: str = "cccp"
    eps1: float = 1e-4
    lmax1: int = 30
    eps_inner: float = 1e-4
    lmax_inner: int = 100
    random_zf_samples: int = 1000
    n_realizations: int = 1000
    max_feasible: int | None = None
    sampling: str = "per_point"
    sweep_axis: str | None = None
    sweep_values: tuple = field(default=())

    def __post_init__(self):
        if isinstance(self.thresholds, (list, tuple, np.ndarray)):
            object.__setattr__(self, "thresholds", tuple(float(x) for x in self.thresholds))
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        self.validate()

    @property
    def n_tx(self) -> int:
        return LAYOUT_TX[self.layout]

    def threshold_vector(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.thresholds, dtype=float), (self.n_users,)).copy()

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(msg, name)

        need(isinstance(self.seed, (int, np.integer)) and self.seed >= 0, "seed", "seed must be a nonnegative integer")
        need(self.layout in LAYOUT_TX, "layout", f"layout must be one of {sorted(LAYOUT_TX)}")
        need(1 <= self.n_users <= self.n_tx, "users", f"need 1 <= users <= {self.n_tx} luminaries for ZF")
        need(np.isfinite(self.power_dbm) and -30 <= self.power_dbm <= 60, "power", "power must lie in [-30, 60] dBm")
        lam = np.asarray(self.thresholds, dtype=float)
        need(lam.ndim == 0 or lam.shape == (self.n_users,), "thresholds", "give one threshold or one per user")
        need(np.all(lam >= 0) and np.all(np.isfinite(lam)), "thresholds", "thresholds must be finite and >= 0")
        for name in ("circuitry_power", "led_voltage", "xi"):
            need(getattr(self, name) >= 0, name, "must be nonnegative")
        need(self.algorithm in ALGORITHMS, "algorithm", f"algorithm must be one of {ALGORITHMS}")
        need(self.eps1 > 0 and self.eps_inner > 0, "eps", "tolerances must be positive")
        need(self.lmax1 >= 1 and self.lmax_inner >= 1, "lmax", "iteration caps must be >= 1")
        need(self.random_zf_samples >= 1, "random_zf_samples", "need at least one sample")
        need(self.n_realizations >= 1, "realizations", "need at least one realization")
        need(self.max_feasible is None or self.max_feasible >= 1, "max_feasible", "must be >= 1")
        need(self.sampling in SAMPLING, "sampling", f"sampling must be one of {SAMPLING}")
        need(self.sweep_axis is None or self.sweep_axis in AXES, "axis", f"axis must be one of {AXES}")


def _parse_power(text: str) -> float:
    m = re.fullmatch(r"\s*([-+]?[0-9.]+(?:[eE][-+]?\d+)?)\s*(dBm)?\s*", text, flags=re.IGNORECASE)
    if not m:
        raise ValueError("expected a number with optional 'dBm' suffix")
    return float(m.group(1))


def _parse_thresholds(text: str):
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    vals = [float(p) for p in parts]
    if not vals:
        raise ValueError("empty threshold list")
    return vals[0] if len(vals) == 1 else tuple(vals)


def _parse_optional_int(text: str):
    return None if text.strip().lower() in ("", "none") else int(text)


def parse_grid(text: str) -> tuple:
    """``start:stop:step`` (inclusive) or a comma separated list; dBm suffixes allowed."""
    text = re.sub(r"(?i)dbm", "", text).strip()
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0 or stop < start:
            raise ValueError("range needs step > 0 and stop >= start")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(np.round(start + i * step, 10)) for i in range(n))
    vals = [v.strip() for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty grid")
    # ladder entries such as "4/3" name (luminaries, users)
    return tuple(v if "/" in v else float(v) for v in vals)


# (section, key) -> (field, parser)
_KEYS = {
    ("scenario", "layout"): ("layout", str),
    ("scenario", "users"): ("n_users", int),
    ("scenario", "power"): ("power_dbm", _parse_power),
    ("scenario", "thresholds"): ("thresholds", _parse_thresholds),
    ("scenario", "circuitry_power"): ("circuitry_power", float),
    ("scenario", "led_voltage"): ("led_voltage", float),
    ("scenario", "xi"): ("xi", float),
    ("algorithm", "name"): ("algorithm", str),
    ("algorithm", "eps1"): ("eps1", float),
    ("algorithm", "lmax1"): ("lmax1", int),
    ("algorithm", "eps_inner"): ("eps_inner", float),
    ("algorithm", "lmax_inner"): ("lmax_inner", int),
    ("algorithm", "random_zf_samples"): ("random_zf_samples", int),
    ("experiment", "seed"): ("seed", int),
    ("experiment", "realizations"): ("n_realizations", int),
    ("experiment", "max_feasible"): ("max_feasible", _parse_optional_int),
    ("experiment", "sampling"): ("sampling", str),
    ("sweep", "axis"): ("sweep_axis", str),
    ("sweep", "values"): ("sweep_values", parse_grid),
}

_FIELD_TO_KEY = {f: key for (_, key), (f, _) in _KEYS.items()}


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.fullmatch(r"\[(.+)\]", s)
        if m:
            current = m.group(1).strip().lower()
            continue
        if current == section and re.match(rf"{re.escape(key)}\s*[=:]", s, flags=re.IGNORECASE):
            return no
    return None


def parse_config(text: str, **overrides) -> ScenarioConfig:
    """Parse config text; ``overrides`` (already typed) win over file values."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], line=line) from None
    values = {}
    for section in cp.sections():
        sec = section.lower()
        for key, raw in cp.items(section):
            entry = _KEYS.get((sec, key.lower()))
            if entry is None:
                raise ConfigError(f"unknown key in [{section}]", field=key, line=_line_of(text, sec, key))
            name, parse = entry
            try:
                values[name] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"cannot parse {raw!r}: {exc}", field=key, line=_line_of(text, sec, key)) from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "seed" not in values:
        raise ConfigError("a seed is mandatory ([experiment] seed or --seed)", field="seed")
    try:
        return ScenarioConfig(**values)
    except ConfigError as exc:
        key = _FIELD_TO_KEY.get(exc.field, exc.field)
        sec = next((s for (s, k) in _KEYS if k == key), None)
        line = _line_of(text, sec, key) if sec else None
        raise ConfigError(str(exc).split(": ", 1)[-1], field=key, line=line) from None
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, **overrides) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), **overrides)


def config_echo(cfg: ScenarioConfig) -> dict:
    out = dataclasses.asdict(cfg)
    out["thresholds"] = list(cfg.threshold_vector())
    out["sweep_values"] = list(cfg.sweep_values)
    return out
