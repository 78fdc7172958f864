"""Small shared helpers: seeded generators, compensated sums, fixed-format JSON."""
from __future__ import annotations

import hashlib
import json
import math

import numpy as np


def derive_rng(seed: int, *labels: str | int) -> np.random.Generator:
    """Counter-based generator keyed by ``seed`` and a sequence of labels.

    Labels are hashed with BLAKE2b so that derived streams do not depend on
    Python's randomized ``hash``.
    """
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for label in labels:
        digest = hashlib.blake2b(str(label).encode(), digest_size=8).digest()
        words.append(int.from_bytes(digest, "little"))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def fsum_weighted(weights: np.ndarray, values: np.ndarray) -> float:
    """Compensated ``sum(weights * values)``."""
    return math.fsum(np.asarray(weights, dtype=float) * np.asarray(values, dtype=float))


def row_norms(v: np.ndarray) -> np.ndarray:
    """Euclidean norms of the rows of a 2-D array."""
    v = np.asarray(v, dtype=float)
    return np.sqrt(np.einsum("ij,ij->i", v, v))


def _fmt(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return _Float(x)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _fmt(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_fmt(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_fmt(v) for v in obj.tolist()]
    return obj


class _Float(float):
    def __repr__(self):
        return format(float(self), ".17g")


def dumps(obj, indent: int | None = 2) -> str:
    """Deterministic JSON with floats written to 17 significant digits.

    NaN and infinities are emitted as strings.
    """
    return _dump_value(_fmt(obj), indent, 0)


def _dump_value(v, indent, level):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = ", " if indent is None else ","
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dump_value(x, indent, level + 1)}" for k, x in v.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(v, list):
        if not v:
            return "[]"
        if all(not isinstance(x, (list, dict)) for x in v):
            return "[" + ", ".join(_dump_value(x, indent, level + 1) for x in v) + "]"
        items = [f"{pad}{_dump_value(x, indent, level + 1)}" for x in v]
        return "[" + sep.join(items) + end + "]"
    if isinstance(v, _Float):
        return repr(v)
    return json.dumps(v)
