#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Report Records Module
Pass/fail check records and the diagnostics report with its fixed JSON
layout.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


def to_plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if hasattr(value, 'tolist'):
        value = value.tolist()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    return value


@dataclass
class CheckReport:
    """Outcome of one report-only verification."""

    name: str
    passed: bool
    value: float
    tolerance: float
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        out = {'name': self.name, 'pass': bool(self.passed),
               'value': to_plain(float(self.value)), 'tolerance': to_plain(float(self.tolerance))}
        if self.details:
            out['details'] = to_plain(self.details)
        return out


@dataclass
class DiagnosticsReport:
    domain: Dict[str, Any]
    p: float
    s: float
    h: float
    n: int
    sup_quotient: float
    anchors: List[Dict[str, Any]] = field(default_factory=list)
    excess: List[Dict[str, Any]] = field(default_factory=list)
    tails: List[Dict[str, Any]] = field(default_factory=list)
    checks: List[CheckReport] = field(default_factory=list)
    meta: Optional[Dict[str, Any]] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> Dict[str, Any]:
        out = {
            'domain': to_plain(self.domain),
            'p': self.p,
            's': self.s,
            'grid': {'h': self.h, 'n': self.n},
            'sup_quotient': to_plain(self.sup_quotient),
            'anchors': to_plain(self.anchors),
            'excess': to_plain(self.excess),
            'tails': to_plain(self.tails),
            'checks': [c.to_dict() for c in self.checks],
        }
        if self.meta is not None:
            out['meta'] = to_plain(self.meta)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)
