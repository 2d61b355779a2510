"""Command line runner: ``narlab run|validate|presets``.

Exit status: 0 when every requested verdict passes, 2 on a failed verdict,
1 on invalid configuration or execution errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .config import (DIFFOP_FUNCTIONS, KINDS, ConfigError, ExperimentConfig, build_measure,
                     build_sector, dumps_csv, dumps_report, parse_config)
from .htype import NPoint, SPoint, estimate_tau, sample_unit_sphere
from .kernels import calibrate, q_values
from .measures import REGISTERED_DENSITIES
from .quadrature import integrate_n
from .rng import make_rng

PRESETS = ("heisenberg:p", "quaternionic:p (2p divisible by 4)", "abelian:d", "hyperbolic:l (space)")
TRACE_COLUMNS = ("ray_id", "theta", "a", "value_re", "value_im")


def _unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def _kernel_check(cfg, g, param, mu, n0):
    tol = float(cfg.params.get("tolerance", 1e-4))
    rows = []
    for a in cfg.params.get("a_values", [0.25, 1.0, 4.0]):
        a = float(a)
        est = integrate_n(g, lambda X, Z: q_values(g, param, a, X, Z), cfg.quadrature,
                          scale=a, tail_exponent=2 * param.beta)
        rows.append({"a": a, "mass": est.value.real, "abs_error": abs(est.value - 1.0),
                     "quad_error": est.error, "pass": bool(abs(est.value - 1.0) < tol)})
    report = {"experiment": "kernel-check", "tolerance": tol, "rows": rows,
              "verdict": "pass" if all(r["pass"] for r in rows) else "fail"}
    return report, None, report["verdict"] == "pass"


def _limit(cfg, g, param, mu, n0):
    from .geometry import Ray, limit_along_ray
    from .transform import q_transform

    spec = cfg.params.get("ray", {})
    omega = _unit(spec.get("omega", [1.0] + [0.0] * (g.dim_v - 1)))
    zeta = _unit(spec["zeta"]) if g.k and "zeta" in spec else (
        _unit([1.0] + [0.0] * (g.k - 1)) if g.k else None)
    ray = Ray(n0, float(spec.get("alpha", 1.0)), omega, zeta, float(spec.get("theta", math.pi / 4)))
    est = limit_along_ray(g, lambda x: q_transform(g, param, mu, x, cfg.quadrature, strict=True),
                          ray, cfg.schedule)
    trace = [{"ray_id": 0, "theta": ray.theta, "a": a, "value_re": v.real, "value_im": v.imag}
             for a, v in est.samples]
    report = {"experiment": "limit", "value": est.value, "converged": bool(est.converged),
              "last_delta": est.last_delta,
              "verdict": "converged" if est.converged else "not-converged"}
    return report, trace, est.converged


def _hl_check(cfg, g, param, mu, n0):
    from .transform import verify_hl

    alpha = float(cfg.params.get("alpha", 1.0))
    count = int(cfg.params.get("sample_count", 20))
    rng = make_rng(cfg.seed, 51)
    sample = []
    for _ in range(count):
        a = 2.0 ** -int(rng.integers(0, 11))
        omega = _unit(rng.normal(size=g.dim_v))
        zeta = _unit(rng.normal(size=g.k)) if g.k else np.zeros(0)
        sample.append((a, omega, zeta, float(rng.uniform(0, 2 * math.pi))))
    rep = verify_hl(g, param, mu, n0, alpha, sample, cfg.quadrature, tau=estimate_tau(g))
    out = {"experiment": "hl-check", "alpha": alpha}
    out.update(rep.to_dict())
    out["verdict"] = "pass" if rep.violations == 0 else "fail"
    return out, None, rep.violations == 0


def _fatou(cfg, g, param, mu, n0):
    from .geometry import FatouConfig, fatou_experiment

    p = cfg.params
    fc = FatouConfig(build_sector(g, cfg, n0), cfg.schedule, cfg.apertures,
                     int(p.get("ray_count", 8)), int(p.get("sequence_count", 5)), cfg.seed,
                     float(p.get("t0", 1.0)), float(p.get("agreement_tol", 0.02)), cfg.quadrature)
    res = fatou_experiment(g, param, mu, n0, fc)
    ok = res.verdict in ("consistent", "no-limit", "h1-fails")
    return res.report, res.trace, ok


def _two_ray(cfg, g, param, mu, n0):
    from .hyperbolic import parse_space, two_ray_report

    h = parse_space(cfg.space)
    p = cfg.params
    rep = two_ray_report(h, param, mu, float(p.get("x0", 0.0)), float(p.get("alpha1", -1.0)),
                         float(p.get("alpha2", 1.0)), p.get("alpha_grid", list(np.linspace(-2, 2, 9))),
                         cfg.schedule, cfg.quadrature)
    ok = all(r["converged"] for r in rep["grid"])
    return {"experiment": "two-ray", "two_ray": rep,
            "verdict": "pass" if ok else "fail"}, None, ok


def _diffop(cfg, g, param, mu, n0):
    from .diffops import FDScheme, eigen_residual
    from .transform import p_transform

    fn = cfg.params.get("function", DIFFOP_FUNCTIONS[0])
    tol = float(cfg.params.get("tolerance", 1e-3))
    beta, rho = param.beta, g.rho
    if fn == "a^(rho+beta)":
        u = lambda x: x.a ** (rho + beta)  # noqa: E731
    elif fn == "a^(rho-beta)":
        u = lambda x: x.a ** (rho - beta)  # noqa: E731
    elif fn == "q_section":
        def u(x):
            X, Z = g.mul(-n0.X, -n0.Z, x.n.X, x.n.Z)
            return x.a ** (rho - beta) * q_values(g, param, x.a, X, Z)
    else:
        def u(x):
            return p_transform(g, param, mu, x, cfg.quadrature)
    rng = make_rng(cfg.seed, 61)
    pts = []
    for _ in range(int(cfg.params.get("points", 10))):
        X = rng.normal(size=g.dim_v) * 0.5
        Z = rng.normal(size=g.k) * 0.3
        pts.append(SPoint(NPoint(X, Z), float(np.exp(rng.uniform(np.log(0.05), np.log(2.0))))))
    res = eigen_residual(g, beta, u, pts, FDScheme(**cfg.fd))
    ok = res < tol
    return {"experiment": "diffop-residual", "function": fn, "residual": res, "tolerance": tol,
            "verdict": "pass" if ok else "fail"}, None, ok


_RUNNERS = {"kernel-check": _kernel_check, "limit": _limit, "hl-check": _hl_check,
            "fatou": _fatou, "two-ray": _two_ray, "diffop-residual": _diffop}
assert set(_RUNNERS) == set(KINDS)


def execute(cfg: ExperimentConfig):
    """Run an experiment; returns (report dict, trace rows or None, passed)."""
    g = cfg.group()
    param = calibrate(g, cfg.beta)
    mu = build_measure(g, cfg.measure)
    n0 = g.point(X=cfg.n0.get("X"), Z=cfg.n0.get("Z"))
    report, trace, ok = _RUNNERS[cfg.kind](cfg, g, param, mu, n0)
    head = {"experiment": cfg.kind, "group": g.name, "beta": cfg.beta, "seed": cfg.seed,
            "quadrature": cfg.quadrature.to_dict(), "schedule": cfg.schedule.to_dict()}
    head.update(report)
    head.setdefault("calibration", {"beta": param.beta, "c_beta": param.c_beta, "c_pk": param.c_pk})
    return head, trace, ok


def run(config_path: str, out_dir: str = ".", trace: bool = False) -> int:
    try:
        text = Path(config_path).read_text()
        cfg = parse_config(text)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        report, rows, ok = execute(cfg)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / cfg.output["report"]).write_text(dumps_report(report))
        if rows is not None and (trace or cfg.output.get("trace")):
            name = cfg.output.get("trace") or "trace.csv"
            (out / name).write_text(dumps_csv(rows, TRACE_COLUMNS))
    except Exception as exc:
        print(f"execution error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0 if ok else 2


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="narlab", description="Harmonic analysis experiments on NA groups")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", default=".", help="output directory")
    r.add_argument("--trace", action="store_true", help="also write the CSV trace")
    v = sub.add_parser("validate", help="validate a config without running it")
    v.add_argument("config")
    sub.add_parser("presets", help="list groups, measures and experiment kinds")
    args = ap.parse_args(argv)

    if args.cmd == "run":
        return run(args.config, args.out, args.trace)
    if args.cmd == "validate":
        try:
            parse_config(Path(args.config).read_text())
        except ConfigError as exc:
            for e in exc.errors:
                print(f"config error: {e}", file=sys.stderr)
            return 1
        except OSError as exc:
            print(f"cannot read config: {exc}", file=sys.stderr)
            return 1
        print("ok")
        return 0
    print("groups:      " + ", ".join(PRESETS))
    print("measures:    " + ", ".join(REGISTERED_DENSITIES) + ", atoms {X, Z, w}")
    print("experiments: " + ", ".join(KINDS))
    return 0


if __name__ == "__main__":
    sys.exit(main())
