"""Scenario files: JSON with the unit spelled out in every dimensional key.

Keys end in a unit suffix (``radius_m``, ``radius_dm``, ``dt_s``,
``v_max_mps`` ...). Loading converts every such value to meters / seconds and
renames the key to the canonical suffix; the original unit is kept under
``source_units`` so the conversion can be audited.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, SchemaError

MODES = ("boundary", "siege", "coverage", "switching", "force_field")

# suffix -> (canonical suffix, factor)
UNITS = {
    "m": ("m", 1.0), "dm": ("m", 0.1), "cm": ("m", 0.01), "mm": ("m", 1e-3),
    "s": ("s", 1.0), "ms": ("s", 1e-3),
    "mps": ("mps", 1.0), "dmps": ("mps", 0.1), "cmps": ("mps", 0.01), "mmps": ("mps", 1e-3),
    "rad": ("rad", 1.0), "deg": ("rad", math.pi / 180),
}

REQUIRED = {
    "boundary": ["boundary", "team.coords_m", "team.v_max_mps", "team.epsilon_m",
                 "intruder.position_m", "intruder.v_max_mps"],
    "siege": ["ring.center_m", "ring.radius_m", "ring.split_rad", "team.coords1_m",
              "team.coords2_m", "team.v_max_mps", "team.epsilon_m",
              "intruders.positions_m", "intruders.v_max_mps"],
    "coverage": ["corridor.radius_m", "team.n"],
    "switching": ["obstacles", "robots", "params.epsilon_m", "params.mu0_m",
                  "params.sensing_radius_m"],
    "force_field": ["params.epsilon_m"],
}


def _split_unit(key):
    if "_" not in key:
        return key, None
    base, suf = key.rsplit("_", 1)
    return (base, suf) if suf in UNITS else (key, None)


def _scale(v, f):
    if isinstance(v, list):
        return [_scale(x, f) for x in v]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"non-numeric value {v!r} under a unit key")
    return v * f


def normalize_units(obj, path="", seen=None):
    """Copy of ``obj`` with all unit-suffixed keys in canonical units."""
    seen = {} if seen is None else seen
    if isinstance(obj, list):
        return [normalize_units(x, f"{path}[{i}]", seen) for i, x in enumerate(obj)]
    if not isinstance(obj, dict):
        return obj
    out = {}
    for k, v in obj.items():
        if k == "source_units":
            continue
        base, suf = _split_unit(k)
        here = f"{path}.{k}" if path else k
        if suf is None:
            out[k] = normalize_units(v, here, seen)
            continue
        canon, f = UNITS[suf]
        nk = f"{base}_{canon}"
        if nk in out:
            raise SchemaError(f"{here}: duplicate quantity", field=nk)
        out[nk] = _scale(v, f) if f != 1.0 else v
        if suf != canon:
            seen[f"{path}.{nk}" if path else nk] = suf
    return out


def _get(sc, dotted):
    cur = sc
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return None
        cur = cur[part]
    return cur


def validate(sc):
    """Raise :class:`SchemaError` naming every missing required field."""
    if not isinstance(sc, dict):
        raise SchemaError("scenario must be a JSON object", field="")
    mode = sc.get("mode")
    if mode not in MODES:
        raise SchemaError(f"mode must be one of {MODES}", field="mode")
    missing = [f for f in REQUIRED[mode] if _get(sc, f) is None]
    if mode == "force_field" and "layout" not in sc:
        missing += [f for f in ("obstacles", "robot.start_m") if _get(sc, f) is None]
    if missing:
        names = ", ".join(_split_unit(f.split(".")[-1])[0] for f in missing)
        raise SchemaError(f"missing required field(s): {names} ({', '.join(missing)})",
                          field=missing[0])
    return sc


def load_scenario(src):
    """Scenario from a path, JSON text or dict; units normalized and validated."""
    if isinstance(src, dict):
        raw = src
    else:
        text = str(src)
        try:
            if not text.lstrip().startswith("{"):
                text = Path(src).read_text(encoding="utf-8")
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"not valid JSON: {e}", field="") from None
    units = dict(raw.get("source_units", {})) if isinstance(raw, dict) else {}
    sc = normalize_units(raw, seen=units)
    if units:
        sc["source_units"] = units
    return validate(sc)


def dumps(sc) -> str:
    return json.dumps(sc, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_obstacle(spec):
    from .geometry import Obstacle
    vel = tuple(spec.get("velocity_mps", (0.0, 0.0)))
    name = spec.get("name", "")
    if "disk" in spec:
        d = spec["disk"]
        return Obstacle.disk(d["center_m"], d["radius_m"], velocity=vel, name=name)
    if "polygon_m" in spec:
        return Obstacle.polygon(spec["polygon_m"], velocity=vel, name=name)
    if "ellipse" in spec:
        e = spec["ellipse"]
        return Obstacle.ellipse(e["center_m"], e["a_m"], e["b_m"], e.get("angle_rad", 0.0),
                                n=int(e.get("n", 64)), velocity=vel, name=name)
    raise SchemaError("obstacle needs one of disk, polygon, ellipse", field="obstacles")


def build_boundary_curve(spec):
    from .geometry import ConvexRegion, ParamCurve
    if "polyline_m" in spec:
        curve = ParamCurve.polyline(spec["polyline_m"])
        region = None
    elif "circle_arc" in spec:
        a = spec["circle_arc"]
        curve = ParamCurve.circle_arc(a["center_m"], a["radius_m"], a["from_rad"], a["to_rad"])
        region = ConvexRegion.disk(a["center_m"], a["radius_m"])
    else:
        raise SchemaError("boundary needs polyline_m or circle_arc", field="boundary")
    return curve, region


def build_region(sc, curve, region):
    from .geometry import ConvexRegion
    if "region" in sc:
        return ConvexRegion.polygon(sc["region"]["polygon_m"])
    if region is not None:
        return region
    # default: the square standing on a straight defended segment
    p1, p2 = np.asarray(curve.P1), np.asarray(curve.P2)
    t = p2 - p1
    n = np.array([-t[1], t[0]])
    return ConvexRegion.polygon([p1, p2, p2 + n, p1 + n])
