"""Experiment configuration: JSON parsing with exhaustive validation, and the
deterministic JSON / CSV writers used for reports and traces."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Cap, Schedule, Sector
from .htype import HTypeGroup, NPoint, parse_group
from .measures import REGISTERED_DENSITIES, BoundaryMeasure, atom, make_density
from .quadrature import QuadratureSpec

KINDS = ("kernel-check", "limit", "hl-check", "fatou", "two-ray", "diffop-residual")
DIFFOP_FUNCTIONS = ("a^(rho+beta)", "a^(rho-beta)", "q_section", "p_transform")

_TOP_KEYS = {
    "experiment", "group", "space", "beta", "measure", "n0", "sector", "schedule", "apertures",
    "quadrature", "seed", "output", "params", "fd",
}
_PARAM_KEYS = {
    "kernel-check": {"a_values", "tolerance"},
    "limit": {"ray"},
    "hl-check": {"alpha", "sample_count"},
    "fatou": {"ray_count", "sequence_count", "t0", "agreement_tol"},
    "two-ray": {"x0", "alpha1", "alpha2", "alpha_grid"},
    "diffop-residual": {"function", "points", "tolerance"},
}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    kind: str
    group_spec: str
    space: str | None
    beta: float
    measure: dict
    n0: dict
    sector: dict | None
    schedule: Schedule
    apertures: tuple
    quadrature: QuadratureSpec
    seed: int
    output: dict
    params: dict = field(default_factory=dict)
    fd: dict = field(default_factory=dict)

    def group(self) -> HTypeGroup:
        if self.space is not None:
            from .hyperbolic import parse_space

            return parse_space(self.space).group
        return parse_group(self.group_spec)


class _Collector:
    def __init__(self):
        self.errors = []

    def add(self, path: str, msg: str):
        self.errors.append(f"{path}: {msg}" if path else msg)

    def keys(self, obj, allowed, path):
        if not isinstance(obj, dict):
            self.add(path, "expected an object")
            return False
        for k in sorted(set(obj) - set(allowed)):
            self.add(f"{path}.{k}" if path else k, "unknown key")
        return True

    def number(self, obj, key, path, default=None, positive=False, integer=False):
        if key not in obj:
            return default
        v = obj[key]
        p = f"{path}.{key}" if path else key
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int)):
            self.add(p, "expected an integer" if integer else "expected a number")
            return default
        if positive and not v > 0:
            self.add(p, f"{key} must be positive")
            return default
        return v


def _vector(col: _Collector, v, path: str, dim: int):
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                          for x in v):
        col.add(path, "expected a list of numbers")
        return None
    if len(v) != dim:
        col.add(path, f"dimension mismatch: expected {dim} entries, got {len(v)}")
        return None
    return [float(x) for x in v]


def _weight(col: _Collector, w, path: str):
    if isinstance(w, (int, float)) and not isinstance(w, bool):
        return complex(w)
    if isinstance(w, list) and len(w) == 2 and all(isinstance(x, (int, float)) for x in w):
        return complex(w[0], w[1])
    col.add(path, "weight must be a number or [re, im]")
    return None


def _check_measure(col: _Collector, m, g: HTypeGroup | None):
    if not col.keys(m, {"atoms", "densities", "description"}, "measure"):
        return
    for i, a in enumerate(m.get("atoms", [])):
        p = f"measure.atoms[{i}]"
        if col.keys(a, {"X", "Z", "w"}, p) and g is not None:
            _vector(col, a.get("X", [0.0] * g.dim_v), f"{p}.X", g.dim_v)
            _vector(col, a.get("Z", [0.0] * g.k), f"{p}.Z", g.k)
            _weight(col, a.get("w", 1.0), f"{p}.w")
    for i, d in enumerate(m.get("densities", [])):
        p = f"measure.densities[{i}]"
        if not col.keys(d, {"name", "weight"}, p):
            continue
        if "name" not in d:
            col.add(f"{p}.name", "missing density name")
        elif g is not None:
            try:
                make_density(g, str(d["name"]))
            except ValueError as exc:
                col.add(f"{p}.name", str(exc))
        _weight(col, d.get("weight", 1.0), f"{p}.weight")
    if not m.get("atoms") and not m.get("densities"):
        col.add("measure", "measure needs at least one atom or density")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raises ConfigError carrying every problem found."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"invalid JSON: {exc}"]) from None
    col = _Collector()
    if not col.keys(raw, _TOP_KEYS, ""):
        raise ConfigError(col.errors)

    kind = raw.get("experiment")
    if kind not in KINDS:
        col.add("experiment", f"expected one of {', '.join(KINDS)}")
    g, space = None, raw.get("space")
    if ("group" in raw) == ("space" in raw):
        col.add("group", "exactly one of 'group' or 'space' is required")
    else:
        try:
            if space is not None:
                from .hyperbolic import parse_space

                g = parse_space(str(space)).group
            else:
                g = parse_group(str(raw["group"]))
        except ValueError as exc:
            col.add("space" if space is not None else "group", str(exc))
    if kind == "two-ray" and (space is None or g is None or g.dim_v != 1):
        col.add("space", "two-ray experiments need \"space\": \"hyperbolic:2\"")

    beta = raw.get("beta", 1.0)
    if isinstance(beta, bool) or not isinstance(beta, (int, float)):
        col.add("beta", "expected a number")
        beta = 1.0
    elif not beta > 0:
        col.add("beta", "beta must be positive")

    measure = raw.get("measure", {"densities": [{"name": "haar"}]})
    _check_measure(col, measure, g)

    n0 = raw.get("n0", {})
    if col.keys(n0, {"X", "Z"}, "n0") and g is not None:
        n0 = {"X": _vector(col, n0.get("X", [0.0] * g.dim_v), "n0.X", g.dim_v),
              "Z": _vector(col, n0.get("Z", [0.0] * g.k), "n0.Z", g.k)}

    sector = raw.get("sector")
    if sector is not None and col.keys(sector, {"alpha", "cap1", "cap2", "theta_interval"}, "sector"):
        col.number(sector, "alpha", "sector", positive=True)
        for name, dim in (("cap1", g.dim_v if g else None), ("cap2", g.k if g else None)):
            cap = sector.get(name)
            if cap is None:
                continue
            if col.keys(cap, {"center", "radius"}, f"sector.{name}"):
                col.number(cap, "radius", f"sector.{name}", positive=True)
                if dim is not None and "center" in cap:
                    _vector(col, cap["center"], f"sector.{name}.center", dim)
        ti = sector.get("theta_interval")
        if ti is not None and not (isinstance(ti, list) and len(ti) == 2
                                   and 0 <= ti[0] < ti[1] <= 2 * math.pi):
            col.add("sector.theta_interval", "expected [lo, hi] with 0 <= lo < hi <= 2 pi")

    schedule = Schedule()
    sch = raw.get("schedule", {})
    if col.keys(sch, {"a0", "ratio", "steps", "tol"}, "schedule"):
        try:
            schedule = Schedule(**sch)
        except (TypeError, ValueError) as exc:
            col.add("schedule", str(exc))

    apertures = raw.get("apertures", [0.5, 1.0, 2.0])
    if not (isinstance(apertures, list) and apertures
            and all(isinstance(a, (int, float)) and a > 0 for a in apertures)):
        col.add("apertures", "expected a non-empty list of positive numbers")
        apertures = [0.5, 1.0, 2.0]

    quad = QuadratureSpec()
    q = raw.get("quadrature", {})
    if col.keys(q, set(QuadratureSpec().to_dict()), "quadrature"):
        if q.get("engine") == "monte_carlo" and "seed" not in q and "seed" not in raw:
            col.add("quadrature.seed", "monte_carlo engine requires a seed")
        try:
            quad = QuadratureSpec(**{"seed": raw.get("seed", 0), **q})
        except (TypeError, ValueError) as exc:
            col.add("quadrature", str(exc))

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        col.add("seed", "expected an integer")
        seed = 0

    output = raw.get("output", {})
    if col.keys(output, {"report", "trace"}, "output"):
        output = {"report": str(output.get("report", "report.json")),
                  "trace": output.get("trace")}

    params = raw.get("params", {})
    if kind in _PARAM_KEYS and col.keys(params, _PARAM_KEYS[kind], "params"):
        for key in ("tolerance", "alpha", "t0", "agreement_tol"):
            col.number(params, key, "params", positive=True)
        for key in ("sample_count", "points", "ray_count", "sequence_count"):
            v = col.number(params, key, "params", integer=True)
            if v is not None and v < 1:
                col.add(f"params.{key}", f"{key} must be >= 1")
        if kind == "diffop-residual" and params.get("function", DIFFOP_FUNCTIONS[0]) not in DIFFOP_FUNCTIONS:
            col.add("params.function", f"expected one of {', '.join(DIFFOP_FUNCTIONS)}")
        if kind == "two-ray" and params.get("alpha1", -1.0) == params.get("alpha2", 1.0):
            col.add("params.alpha2", "alpha1 and alpha2 must differ")

    fd = raw.get("fd", {})
    if col.keys(fd, {"step", "order", "richardson"}, "fd"):
        from .diffops import FDScheme

        try:
            FDScheme(**fd)
        except (TypeError, ValueError) as exc:
            col.add("fd", str(exc))

    if col.errors:
        raise ConfigError(col.errors)
    return ExperimentConfig(kind, raw.get("group"), space, float(beta), measure, n0, sector, schedule,
                            tuple(float(a) for a in apertures), quad, seed, output, params, fd)


def build_measure(g: HTypeGroup, spec: dict) -> BoundaryMeasure:
    mu = BoundaryMeasure()
    for a in spec.get("atoms", []):
        w = a.get("w", 1.0)
        w = complex(w[0], w[1]) if isinstance(w, list) else complex(w)
        loc = g.point(X=a.get("X"), Z=a.get("Z"))
        mu = mu + atom(loc, w)
    for d in spec.get("densities", []):
        w = d.get("weight", 1.0)
        w = complex(w[0], w[1]) if isinstance(w, list) else complex(w)
        mu = mu + BoundaryMeasure((), (make_density(g, d["name"], w),), d["name"])
    if "description" in spec:
        mu = BoundaryMeasure(mu.atoms, mu.densities, str(spec["description"]))
    return mu


def build_sector(g: HTypeGroup, cfg: ExperimentConfig, n0: NPoint) -> Sector | None:
    from .geometry import default_sector

    if cfg.sector is None:
        return None
    base = default_sector(g, n0, float(cfg.sector.get("alpha", 1.0)), cfg.seed)

    def cap(name, fallback):
        c = cfg.sector.get(name)
        if c is None:
            return fallback
        return Cap(c.get("center", list(fallback.center)), c.get("radius", fallback.radius))

    ti = cfg.sector.get("theta_interval")
    return Sector(base.alpha, cap("cap1", base.cap1),
                  cap("cap2", base.cap2) if g.k else None,
                  tuple(ti) if ti is not None else base.theta_interval, n0)


# -- deterministic output ---------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return '"nan"'
        if math.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        return "%.12e" % v
    if isinstance(v, (complex, np.complexfloating)):
        return _fmt([v.real, v.imag])
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps_report(report: dict) -> str:
    """JSON text with insertion key order and every float as %.12e."""
    return _fmt(report) + "\n"


def dumps_csv(rows: list, columns: tuple) -> str:
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(str(int(r[c])) if isinstance(r[c], (int, np.integer))
                              else "%.12e" % float(r[c]) for c in columns))
    return "\n".join(lines) + "\n"
