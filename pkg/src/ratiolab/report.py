"""Prediction reports and deterministic serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .specfun import ComplexValue


def _num(x) -> Any:
    """JSON-ready number: floats at 17 significant digits, complex as [re, im]."""
    if isinstance(x, ComplexValue):
        x = complex(x)
    if isinstance(x, (complex, np.complexfloating)):
        x = complex(x)
        if x.imag == 0.0:
            return _num(x.real)
        return [_num(x.real), _num(x.imag)]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return repr(x)
        return float(format(x, ".17g"))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_num(v) for v in x]
    return x


@dataclass
class PredictionReport:
    statistic: str
    inputs: dict
    terms: dict
    total: complex | float = None
    error_budget: float = 0.0
    notes: list = field(default_factory=list)

    def __post_init__(self):
        s = sum(complex(v) for v in self.terms.values())
        if self.total is None:
            self.total = s.real if s.imag == 0 else s
        scale = max(abs(complex(self.total)), max((abs(complex(v)) for v in self.terms.values()), default=0.0))
        if abs(complex(self.total) - s) > 1e-12 * max(scale, 1e-300):
            raise ValueError(f"{self.statistic}: total does not equal the sum of its terms")

    @property
    def value(self):
        return self.total

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "inputs": _num(self.inputs),
            "terms": _num(self.terms),
            "total": _num(self.total),
            "error_budget": _num(self.error_budget),
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)
