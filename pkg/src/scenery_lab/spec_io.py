"""JSON measure specs: validation, construction and canonical serialization.

Schema (informal)::

    {"type": "ifs", "dim": d, "maps": [{"ratio": r, "offset": [...]}, ...],
     "weights": [...], "depth": n}
    {"type": "ifs", "cantor_alpha": a, "depth": n}          # Salli Cantor set
    {"type": "grid", "dim": d, "rule": RULE, "depth": n}
    {"type": "product", "factors": [SPEC, SPEC, ...]}
    {"type": "splice", "dim": d, "rule_a": RULE, "rule_b": RULE, "q": q,
     "block_growth": "linear" | {"constant": L}, "depth": n}
    {"type": "lebesgue_ball", "dim": d}
    {"type": "plane", "dim": d, "axes": [...]}
    {"type": "point_mass", "dim": d, "at": [...]}
    {"type": "mixture", "weights": [...], "components": [SPEC, ...]}

with ``RULE = {"kind": "uniform" | "plane" | "cantor", "axes": [...], "alpha": a}``.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

from .constructions import (IfsSpec, SpliceSchedule, cantor_ifs, grid_measure, ifs_measure, lebesgue_ball,
                            plane, point_mass, product_measure, rule_from_spec, salli_ratio, splice)
from .errors import ConfigError, InvalidParams
from .measure import Measure, Mixture

MAX_DIM = 3
SPEC_TYPES = ("ifs", "grid", "product", "splice", "lebesgue_ball", "point_mass", "plane", "mixture")


def _get(spec: dict, key: str, kind=None):
    if key not in spec:
        raise ConfigError(f"{spec.get('type', 'measure')} spec is missing {key!r}")
    val = spec[key]
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{key!r} must be an integer, got {val!r}")
    elif kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise ConfigError(f"{key!r} must be a finite number, got {val!r}")
        val = float(val)
    elif kind is not None and not isinstance(val, kind):
        raise ConfigError(f"{key!r} has the wrong type: {val!r}")
    return val


def _dim(spec):
    d = _get(spec, "dim", int)
    if not 1 <= d <= MAX_DIM:
        raise InvalidParams(f"dim must lie in [1, {MAX_DIM}], got {d}")
    return d


def _depth(spec):
    if "depth" not in spec:
        return None
    d = _get(spec, "depth", int)
    if not 1 <= d <= 200:
        raise InvalidParams(f"depth must lie in [1, 200], got {d}")
    return d


def _block_growth(val):
    if val == "linear":
        return "linear"
    if isinstance(val, dict) and set(val) == {"constant"}:
        L = val["constant"]
        if isinstance(L, int) and not isinstance(L, bool) and L >= 1:
            return ("constant", L)
    raise ConfigError(f"block_growth must be 'linear' or {{'constant': L}}, got {val!r}")


def measure_from_spec(spec: dict) -> Measure:
    """Build the measure described by ``spec`` (raises :class:`ConfigError`)."""
    if not isinstance(spec, dict):
        raise ConfigError("a measure spec must be a JSON object")
    kind = spec.get("type")
    if kind not in SPEC_TYPES:
        raise ConfigError(f"unknown measure type {kind!r}; expected one of {', '.join(SPEC_TYPES)}")
    if kind == "ifs":
        if "maps" not in spec and "cantor_alpha" in spec:
            alpha = _get(spec, "cantor_alpha", float)
            m = ifs_measure(cantor_ifs(salli_ratio(alpha)), _depth(spec))
            m._spec["cantor_alpha"] = alpha
            return m
        d = _dim(spec)
        maps = []
        for item in _get(spec, "maps", list):
            if not isinstance(item, dict) or "ratio" not in item or "offset" not in item:
                raise ConfigError("each map needs 'ratio' and 'offset'")
            maps.append((float(item["ratio"]), tuple(float(v) for v in item["offset"])))
        weights = tuple(float(w) for w in _get(spec, "weights", list))
        m = ifs_measure(IfsSpec(d, tuple(maps), weights), _depth(spec))
        if "cantor_alpha" in spec:
            m._spec["cantor_alpha"] = _get(spec, "cantor_alpha", float)
        return m
    if kind == "grid":
        d = _dim(spec)
        return grid_measure(rule_from_spec(_get(spec, "rule", dict), d), _depth(spec))
    if kind == "product":
        factors = [measure_from_spec(f) for f in _get(spec, "factors", list)]
        if len(factors) < 2:
            raise ConfigError("a product needs at least two factors")
        if sum(f.ambient_dim for f in factors) > MAX_DIM:
            raise InvalidParams(f"product dimension exceeds {MAX_DIM}")
        out = factors[0]
        for f in factors[1:]:
            out = product_measure(out, f)
        return out
    if kind == "splice":
        d = _dim(spec)
        a = rule_from_spec(_get(spec, "rule_a", dict), d)
        b = rule_from_spec(_get(spec, "rule_b", dict), d)
        q = _get(spec, "q", float)
        depth = _depth(spec)
        if depth is None:
            raise ConfigError("splice spec is missing 'depth'")
        return splice(a, b, SpliceSchedule(q, _block_growth(spec.get("block_growth", "linear")), depth))
    if kind == "lebesgue_ball":
        return lebesgue_ball(_dim(spec))
    if kind == "plane":
        return plane(_dim(spec), [int(a) for a in _get(spec, "axes", list)])
    if kind == "point_mass":
        d = _dim(spec)
        at = spec.get("at")
        if at is not None and len(at) != d:
            raise ConfigError(f"'at' must have {d} coordinates")
        return point_mass(d, at)
    comps = [measure_from_spec(c) for c in _get(spec, "components", list)]
    return Mixture(comps, [float(w) for w in _get(spec, "weights", list)])


def canonical_json(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed separators, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def parse_spec_arg(text: str) -> dict:
    """Accept inline JSON or a path to a JSON file."""
    text = text.strip()
    try:
        if text.startswith("{"):
            return json.loads(text)
        return json.loads(Path(text).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read measure spec: {exc}") from None
