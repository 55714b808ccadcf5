"""Experiment configuration: sectioned key = value text, every key declared up front."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ConfigError

# section -> key -> kind
SCHEMA: dict[str, dict[str, str]] = {
    "run": {"command": "str", "statistic": "str"},
    "inputs": {
        "T": "float", "X": "float", "t": "float", "d": "float",
        "family": "str", "alpha": "complex", "beta": "complex", "gamma": "complex", "delta": "complex",
        "shift": "complex", "scaled_alpha": "float", "k": "int", "u": "list",
        "scaled": "bool", "leading_only": "bool", "oscillatory": "bool",
        "zeros_file": "str", "tol": "float",
    },
    "test_function": {"f": "str", "f_params": "list", "strip": "float"},
    "mollifier": {
        "theta": "rational", "theta2": "rational", "P1": "str", "P2": "str", "Q1": "str", "Q2": "str",
        "P": "str", "Q": "str", "scheme": "str", "weight": "rational", "degree": "int", "mode": "str",
    },
    "euler": {"prime_cutoff": "int", "tail_order": "int", "abs_tol": "float"},
    "output": {"out": "str", "format": "str", "cache_dir": "str", "precision": "int"},
}

_KEY_SECTION: dict[str, str] = {}
for _sec, _keys in SCHEMA.items():
    for _k in _keys:
        if _k in _KEY_SECTION:
            raise RuntimeError(f"key {_k} declared twice")
        _KEY_SECTION[_k] = _sec


def section_of(key: str) -> str:
    """Section holding a bare or dotted key."""
    if "." in key:
        sec, name = key.split(".", 1)
        if sec not in SCHEMA or name not in SCHEMA[sec]:
            raise ConfigError(f"unknown config key {key!r}")
        return sec
    try:
        return _KEY_SECTION[key]
    except KeyError:
        raise ConfigError(f"unknown config key {key!r}") from None


def _convert(key: str, kind: str, raw: str):
    raw = raw.strip()
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "complex":
            return complex(raw.replace(" ", "").replace("i", "j"))
        if kind == "rational":
            return Fraction(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "list":
            return [x.strip() for x in raw.split(",") if x.strip()]
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({e})") from None
    raise AssertionError(kind)


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)  # section -> {key: raw string}

    def __post_init__(self):
        for sec, kv in self.values.items():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown config section [{sec}]")
            for k, v in kv.items():
                if k not in SCHEMA[sec]:
                    raise ConfigError(f"unknown config key {k!r} in [{sec}]")
                _convert(k, SCHEMA[sec][k], str(v))

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
        cp.optionxform = str  # keys are case-sensitive (T vs t)
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"cannot parse config: {e}") from None
        return cls({sec: dict(cp[sec]) for sec in cp.sections()})

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_text(fh.read())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None

    def to_text(self) -> str:
        buf = io.StringIO()
        for sec in SCHEMA:
            kv = self.values.get(sec)
            if not kv:
                continue
            buf.write(f"[{sec}]\n")
            for k in sorted(kv):
                buf.write(f"{k} = {kv[k]}\n")
            buf.write("\n")
        return buf.getvalue()

    def set(self, key: str, value) -> "ExperimentConfig":
        sec = section_of(key)
        name = key.split(".", 1)[-1]
        _convert(name, SCHEMA[sec][name], str(value))
        self.values.setdefault(sec, {})[name] = str(value)
        return self

    def with_overrides(self, pairs) -> "ExperimentConfig":
        out = ExperimentConfig({s: dict(kv) for s, kv in self.values.items()})
        for item in pairs:
            if isinstance(item, str):
                if "=" not in item:
                    raise ConfigError(f"expected key=value, got {item!r}")
                k, v = item.split("=", 1)
            else:
                k, v = item
            out.set(k.strip(), v.strip())
        return out

    def has(self, key: str) -> bool:
        sec = section_of(key)
        return key.split(".", 1)[-1] in self.values.get(sec, {})

    def get(self, key: str, default=None):
        sec = section_of(key)
        name = key.split(".", 1)[-1]
        raw = self.values.get(sec, {}).get(name)
        if raw is None:
            return default
        return _convert(name, SCHEMA[sec][name], raw)

    def require(self, key: str):
        v = self.get(key)
        if v is None:
            raise ConfigError(f"missing required key {key!r}")
        return v
