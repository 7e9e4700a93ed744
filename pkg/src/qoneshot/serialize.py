"""Canonical JSON emission for reproducible run records.

Same data in, same bytes out: keys sorted, floats printed with %.17g (full
round-trip precision), infinities and NaN encoded as the strings "inf",
"-inf", "nan". Wall-clock time is excluded unless explicitly requested, so
records of identical runs compare equal.
"""

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import BadParam


def _emit(obj):
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, (np.bool_,)):
        return json.dumps(bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        if math.isnan(x):
            return '"nan"'
        return "%.17g" % x
    if isinstance(obj, complex):
        return _emit([obj.real, obj.imag])
    if isinstance(obj, np.ndarray):
        return _emit(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_emit(x) for x in obj) + "]"
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(f"{json.dumps(k)}:{_emit(v)}" for k, v in items) + "}"
    raise BadParam(f"cannot serialize value of type {type(obj).__name__}")


def dumps_canonical(obj):
    return _emit(obj)


def dump_canonical(obj, path):
    text = _emit(obj)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)
        fh.write("\n")
    return text


@dataclass
class RunManifest:
    """What produced a result: command, seed, version, dimension guard.

    wall_clock_ms defaults to None so that two identical runs serialize to
    identical bytes; callers opting into timing give up that property.
    """

    command: str
    version: str
    max_dim: int
    seed: int | None = None
    config_path: str | None = None
    wall_clock_ms: float | None = None
    format: str = "json"
    out_path: str | None = None
    tolerance: float | None = None

    def to_json(self):
        return asdict(self)
