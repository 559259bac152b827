"""qtopo command line: experiment runner, verification, and resource accounting.

Grammar: qtopo <group> <command> [--flag value], groups mbb / quantum /
poly / verify / resources plus `run` for named experiments. A JSON config
document given with --config overrides individual flags. Exit codes:
0 success, 2 configuration error, 3 guard violation, 4 budget exhaustion.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import blockenc, qae, qsim, qsvt
from .experiments import ConfigError, EXPERIMENTS, ExperimentConfig, resources, run_experiment
from .fem import (
    GuardError,
    Material,
    MbbDomain,
    StructureConfig,
    compliance_direct,
    enumerate_thetas,
    volume_fraction,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3
EXIT_BUDGET = 4


def _print(payload: dict) -> None:
    json.dump(payload, sys.stdout, sort_keys=True, indent=1)
    sys.stdout.write("\n")


def _domain(args) -> MbbDomain:
    return MbbDomain.mbb(args.nx, args.ny,
                         Material(args.young_modulus, args.poisson_ratio))


def _add_domain_flags(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    p.add_argument("--nx", type=int, default=2 if defaults else None)
    p.add_argument("--ny", type=int, default=2 if defaults else None)
    p.add_argument("--young-modulus", type=float, default=1.0)
    p.add_argument("--poisson-ratio", type=float, default=0.3)


def _add_poly_flags(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    # experiment-backed commands leave these None so per-experiment
    # defaults (e.g. fig12's mu=1e-5) apply unless explicitly overridden
    p.add_argument("--mu", type=float, default=1e-3 if defaults else None)
    p.add_argument("--y0", type=float, default=0.3 if defaults else None)
    p.add_argument("--eps", type=float, default=1e-3 if defaults else None)
    p.add_argument("--mode", choices=("exact", "polynomial"),
                   default="polynomial" if defaults else None)


def _cmd_mbb_table(args) -> int:
    domain = _domain(args)
    spec = qsvt.PolySpec(args.mu, args.y0, args.eps)
    table = enumerate_thetas(domain, spec, args.volume_k, mode=args.mode)
    rows = [{"config": r.config.bitstring(),
             "config_1indexed_solid": [i + 1 for i, b in enumerate(r.config.bits) if b],
             "volume_fraction": volume_fraction(r.config),
             "compliance": None if math.isinf(r.compliance) else r.compliance,
             "theta": r.theta, "t": r.t_value}
            for r in table.sorted_by_theta()]
    _print({"rows": rows, "n": len(rows)})
    return EXIT_OK


def _cmd_mbb_compliance(args) -> int:
    domain = _domain(args)
    config = StructureConfig.from_bitstring(args.config_bits)
    c = compliance_direct(domain, config, args.void_density)
    _print({"config": config.bitstring(),
            "glyphs": config.glyph_grid(args.nx, args.ny),
            "compliance": None if math.isinf(c) else c,
            "feasible": math.isfinite(c),
            "fixed_dofs_0indexed": list(domain.fixed_dofs),
            "fixed_dofs_1indexed": [i + 1 for i in domain.fixed_dofs]})
    return EXIT_OK


def _experiment_overrides(args, **extra) -> dict:
    keys = ("n_x", "n_y", "mu", "y0", "eps", "n_p", "theta0", "volume_k",
            "r", "seed", "runs", "config_bits", "out_dir", "backend",
            "filter_mode")
    mapping = {"n_x": "nx", "n_y": "ny", "n_p": "np", "filter_mode": "mode",
               "out_dir": "out"}
    out = {}
    for key in keys:
        attr = mapping.get(key, key)
        if hasattr(args, attr):
            out[key] = getattr(args, attr)
    out.update(extra)
    return out


def _run_named(name: str, args, **extra) -> int:
    if getattr(args, "config", None):
        cfg = ExperimentConfig.from_json(args.config)
    else:
        cfg = ExperimentConfig.for_experiment(name, **_experiment_overrides(args, **extra))
    report = run_experiment(cfg)
    _print(report)
    if name == "minimize" and report.get("budget_exhausted"):
        return EXIT_BUDGET
    return EXIT_OK


def _cmd_quantum_compliance(args) -> int:
    return _run_named("fig10", args)


def _cmd_quantum_grover(args) -> int:
    name = "fig12" if args.volume_k is not None else "fig11"
    return _run_named(name, args)


def _cmd_quantum_minimize(args) -> int:
    return _run_named("minimize", args)


def _cmd_poly_fit(args) -> int:
    spec = qsvt.PolySpec(args.mu, args.y0, args.eps)
    poly = qsvt.fit_even_poly(spec)
    payload = {"mu": spec.mu, "y0": spec.y0, "eps": spec.eps,
               "degree": poly.degree,
               "coefficients": [float(c) for c in poly.coefficients]}
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
        _print({"degree": poly.degree, "written": args.out})
    else:
        _print(payload)
    return EXIT_OK


def _cmd_poly_eval(args) -> int:
    spec = qsvt.PolySpec(args.mu, args.y0, args.eps)
    poly = qsvt.fit_even_poly(spec)
    xs = np.asarray(args.x, dtype=float)
    payload = {"x": list(map(float, xs)),
               "polynomial": [float(v) for v in qsvt.eval_poly(poly, xs)],
               "target": [float(v) for v in qsvt.target_even(xs, spec)],
               "degree": poly.degree}
    _print(payload)
    return EXIT_OK


def _cmd_poly_scan(args) -> int:
    return _run_named(args.which, args)


def _cmd_verify(args) -> int:
    code = _run_named("verify", args)
    return code


def _cmd_resources(args) -> int:
    _print(resources(_domain(args), args.np))
    return EXIT_OK


def _cmd_run(args) -> int:
    return _run_named(args.experiment, args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtopo", description=__doc__)
    sub = parser.add_subparsers(dest="group", required=True)

    mbb = sub.add_parser("mbb", help="classical FEM table and compliance")
    mbb_sub = mbb.add_subparsers(dest="command", required=True)
    t = mbb_sub.add_parser("table", help="enumerate configs with compliance and phase")
    _add_domain_flags(t)
    _add_poly_flags(t)
    t.add_argument("--volume-k", type=int, default=None)
    t.set_defaults(func=_cmd_mbb_table)
    c = mbb_sub.add_parser("compliance", help="dense-solve compliance of one config")
    _add_domain_flags(c)
    c.add_argument("--config-bits", required=True)
    c.add_argument("--void-density", type=float, default=0.0)
    c.set_defaults(func=_cmd_mbb_compliance)

    quantum = sub.add_parser("quantum", help="QAE and Grover experiments")
    q_sub = quantum.add_subparsers(dest="command", required=True)
    qc = q_sub.add_parser("compliance", help="QAE phase distribution for one config")
    _add_domain_flags(qc, defaults=False)
    _add_poly_flags(qc, defaults=False)
    qc.add_argument("--config-bits", default=None)
    qc.add_argument("--np", type=int, default=None)
    qc.add_argument("--backend", choices=("emulated", "coherent"), default="emulated")
    qc.add_argument("--config", default=None)
    qc.add_argument("--out", default="qtopo_out")
    qc.set_defaults(func=_cmd_quantum_compliance)
    qg = q_sub.add_parser("grover", help="amplitude-amplified search run")
    _add_domain_flags(qg, defaults=False)
    _add_poly_flags(qg, defaults=False)
    qg.add_argument("--theta0", type=float, default=None)
    qg.add_argument("--volume-k", dest="volume_k", type=int, default=None)
    qg.add_argument("--np", type=int, default=None)
    qg.add_argument("--r", type=int, default=None)
    qg.add_argument("--backend", choices=("exact_phase", "coherent_qae"),
                    default="exact_phase")
    qg.add_argument("--config", default=None)
    qg.add_argument("--out", default="qtopo_out")
    qg.set_defaults(func=_cmd_quantum_grover)
    qm = q_sub.add_parser("minimize", help="threshold-descent compliance minimization")
    _add_domain_flags(qm, defaults=False)
    _add_poly_flags(qm, defaults=False)
    qm.add_argument("--theta0", type=float, default=None)
    qm.add_argument("--volume-k", dest="volume_k", type=int, default=None)
    qm.add_argument("--np", type=int, default=None)
    qm.add_argument("--seed", type=int, default=0)
    qm.add_argument("--runs", type=int, default=1)
    qm.add_argument("--config", default=None)
    qm.add_argument("--out", default="qtopo_out")
    qm.set_defaults(func=_cmd_quantum_minimize)

    poly = sub.add_parser("poly", help="filter polynomial fitting and scans")
    p_sub = poly.add_subparsers(dest="command", required=True)
    pf = p_sub.add_parser("fit", help="fit the even filter, emit coefficients JSON")
    _add_poly_flags(pf)
    pf.add_argument("--out", default=None)
    pf.set_defaults(func=_cmd_poly_fit)
    pe = p_sub.add_parser("eval", help="evaluate fitted polynomial vs target")
    _add_poly_flags(pe)
    pe.add_argument("--x", type=float, nargs="+", required=True)
    pe.set_defaults(func=_cmd_poly_eval)
    ps = p_sub.add_parser("scan", help="degree-scaling scans")
    ps.add_argument("--which", choices=("fig15", "fig16", "fig17"),
                    default="fig15")
    ps.add_argument("--config", default=None)
    ps.add_argument("--out", default="qtopo_out")
    ps.set_defaults(func=_cmd_poly_scan)

    verify = sub.add_parser("verify", help="block-encoding and oracle suites")
    _add_domain_flags(verify, defaults=False)
    _add_poly_flags(verify, defaults=False)
    verify.add_argument("--np", type=int, default=None)
    verify.add_argument("--theta0", type=float, default=None)
    verify.add_argument("--config", default=None)
    verify.add_argument("--out", default="qtopo_out")
    verify.set_defaults(func=_cmd_verify)

    res = sub.add_parser("resources", help="register-size accounting")
    _add_domain_flags(res)
    res.add_argument("--np", type=int, default=5)
    res.set_defaults(func=_cmd_resources)

    run = sub.add_parser("run", help="run a named experiment")
    run.add_argument("experiment", choices=EXPERIMENTS)
    _add_domain_flags(run, defaults=False)
    _add_poly_flags(run, defaults=False)
    run.add_argument("--np", type=int, default=None)
    run.add_argument("--theta0", type=float, default=None)
    run.add_argument("--volume-k", dest="volume_k", type=int, default=None)
    run.add_argument("--r", type=int, default=None)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--runs", type=int, default=None)
    run.add_argument("--config-bits", dest="config_bits", default=None)
    run.add_argument("--backend", default=None)
    run.add_argument("--config", default=None)
    run.add_argument("--out", default="qtopo_out")
    run.add_argument("--emit-statevector", action="store_true",
                     help="debug statevector dump; requires "
                          "QTOPO_ALLOW_STATEVECTOR_DUMP=1")
    run.set_defaults(func=_cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "emit_statevector", False) and \
            os.environ.get("QTOPO_ALLOW_STATEVECTOR_DUMP") != "1":
        print("statevector dumps are gated behind QTOPO_ALLOW_STATEVECTOR_DUMP=1",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except GuardError as exc:
        json.dump({"error": "guard", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_GUARD
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        json.dump({"error": "config", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
