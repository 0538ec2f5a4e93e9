"""Command-line entry point ``qdf``.

Exit codes: 0 success, 2 infeasible or not viable, 1 errors, 64 usage.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import fileio
from .average import extreme_decompose, realize_on_average, sample_realization
from .channels import extremality_test
from .control import ControlPulse, cost, optimize, target_components
from .dilation import dilate, find_eps_pure_subsystem, verify_dilation
from .ensembles import random_density
from .errors import InfeasibleError, QdfError
from .linalg import TOL_EQ
from .majorization import block_convex_design, design_stochastic_unitary, majorized_initialization
from .protocols import lloyd_viola as lv
from .protocols.feedback_dd import fbdd_run
from .protocols.splitting import split_build, split_closed_form, split_run

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_flags(p, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="random seed (default 0)")
    p.add_argument("--tol", type=float, default=d(None), help="numerical tolerance override")
    p.add_argument("--out", default=d(None), help="write the JSON report to this path")
    p.add_argument("--json", action="store_true", default=d(False), help="print the JSON report")
    p.add_argument("--timing", action="store_true", default=d(False), help="include wall time in the report")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qdf", description="Unitary design of quantum channels")
    _global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", parents=[common], help="Kraus rank, extremality and Choi spectrum")
    p.add_argument("--channel", required=True)

    p = sub.add_parser("dilate", parents=[common], help="joint unitary for a channel and environment state")
    p.add_argument("--channel", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--mode", choices=["auto", "stinespring", "subsystem"], default="auto")
    p.add_argument("--trials", type=int, default=20)

    p = sub.add_parser("design", help="majorization-based designs")
    dsub = p.add_subparsers(dest="design", required=True, parser_class=_Parser)
    for name in ("stochastic", "convex"):
        q = dsub.add_parser(name, parents=[common])
        q.add_argument("--spec", required=True)
        q.add_argument("--env", required=True)

    p = sub.add_parser("decompose", help="convex decompositions")
    dsub = p.add_subparsers(dest="decompose", required=True, parser_class=_Parser)
    q = dsub.add_parser("extreme", parents=[common])
    q.add_argument("--channel", required=True)
    q.add_argument("--max", type=int)

    p = sub.add_parser("realize", help="randomized realizations")
    dsub = p.add_subparsers(dest="realize", required=True, parser_class=_Parser)
    q = dsub.add_parser("average", parents=[common])
    q.add_argument("--channel", required=True)
    q.add_argument("--env", required=True)

    p = sub.add_parser("protocol", help="coherent protocol simulations")
    dsub = p.add_subparsers(dest="protocol", required=True, parser_class=_Parser)
    for name in ("lv2", "lv3", "fbdd", "split"):
        q = dsub.add_parser(name, parents=[common])
        q.add_argument("--config", required=True)
        q.add_argument("--cycles", type=int, default=64)
        if name == "fbdd":
            q.add_argument("--override", action="store_true", help="run even if the checks fail")

    p = sub.add_parser("optimize", parents=[common], help="pulse optimization for a target channel")
    p.add_argument("--problem", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--restarts", type=int, default=10)
    return parser


# -- command handlers -----------------------------------------------------------


def _state(path):
    return fileio.parse_matrix_file(path, "state").mat


def _channel(path):
    return fileio.parse_matrix_file(path, ("kraus", "choi"))


def _dilation_result(rep, target, args):
    return {
        "method": rep.method.value,
        "eps_certified": rep.eps_certified,
        "eps_measured": rep.eps_measured,
        "diagnostics": rep.diagnostics,
        "result": {
            "d_E": rep.d_E,
            "d_S": rep.d_S,
            "W": rep.W,
            "verified_output_error": verify_dilation(rep, target, trials=getattr(args, "trials", 20), seed=args.seed),
        },
    }


def cmd_analyze(args):
    ch = _channel(args.channel)
    v = extremality_test(ch, args.tol or 1e-8)
    spec = np.sort(np.linalg.eigvalsh(ch.choi))[::-1]
    return {
        "method": "analyze",
        "result": {
            "dim": ch.d,
            "rank": ch.rank,
            "extreme": v.is_extreme,
            "gram_rank": v.gram_rank,
            "min_singular_value": v.min_singular_value,
            "choi_spectrum": spec,
        },
    }


def cmd_dilate(args):
    ch, env = _channel(args.channel), _state(args.env)
    rep = dilate(ch, env, m=args.m, mode=args.mode, seed=args.seed)
    return _dilation_result(rep, ch, args)


def cmd_design(args):
    env = _state(args.env)
    if args.design == "stochastic":
        spec = fileio.parse_matrix_file(args.spec, "stochastic-spec")
        init = majorized_initialization(env, len(spec.unitaries))
        rep = design_stochastic_unitary(spec, init, seed=args.seed)
    else:
        spec = fileio.parse_matrix_file(args.spec, "convex-spec")
        rep = block_convex_design(spec, env, seed=args.seed)
    out = _dilation_result(rep, spec.channel(), args)
    out["result"]["choi_error"] = float(np.abs(rep.achieved().choi - spec.channel().choi).max())
    return out


def cmd_decompose(args):
    ch = _channel(args.channel)
    notes: list = []
    comps = extreme_decompose(ch, tol=args.tol or 1e-8, max_components=args.max, diagnostics=notes)
    err = float(np.abs(sum(w * c.choi for w, c in comps) - ch.choi).max())
    return {
        "method": "extreme_decompose",
        "diagnostics": "; ".join(notes),
        "result": {
            "count": len(comps),
            "reconstitution_error": err,
            "components": [{"weight": w, "rank": c.rank, "ops": list(c.canonical_kraus)} for w, c in comps],
        },
    }


def cmd_realize(args):
    ch, env = _channel(args.channel), _state(args.env)
    init = find_eps_pure_subsystem(env, ch.d)
    ar = realize_on_average(ch, init, tol=args.tol or 1e-8, seed=args.seed)
    idx, _ = sample_realization(ar, args.seed)
    return {
        "method": "average",
        "eps_certified": ar.eps_certified,
        "eps_measured": ar.eps_measured(ch, seed=args.seed),
        "diagnostics": "; ".join(ar.diagnostics),
        "result": {
            "distribution": ar.distribution.weights,
            "count": len(ar.dilations),
            "reconstitution_error": ar.reconstitution_error,
            "component_eps_measured": [r.eps_measured for r in ar.dilations],
            "sampled_index": idx,
        },
    }


def cmd_protocol(args):
    name = args.protocol
    if name == "lv2":
        ch = fileio.parse_matrix_file(args.config, "kraus")
        if len(ch.kraus) != 2:
            raise InfeasibleError("rank mismatch", f"lv2 needs exactly two Kraus operators, got {len(ch.kraus)}")
        tgt = lv.lv_polar_extract(*ch.kraus)
        res = lv.lv_simulate(tgt, N=args.cycles, seed=args.seed)
        return {
            "method": "lv2",
            "eps_measured": res.target_error,
            "diagnostics": "; ".join(tgt.flags),
            "result": {"theta": tgt.theta, "P": tgt.P, "trotter_error": res.trotter_error,
                       "cycles": args.cycles, "choi": res.achieved.choi},
        }
    if name == "lv3":
        ch = fileio.parse_matrix_file(args.config, "kraus")
        if len(ch.kraus) != 3:
            raise InfeasibleError("rank mismatch", f"lv3 needs exactly three Kraus operators, got {len(ch.kraus)}")
        res = lv.lv_nested_rank3(*ch.kraus, N=args.cycles, seed=args.seed)
        return {
            "method": "lv3",
            "eps_measured": res.error,
            "diagnostics": "; ".join(res.flags),
            "result": {"ancillas": res.ancillas, "cycles": args.cycles, "choi": res.achieved.choi},
        }
    if name == "fbdd":
        f = fileio.parse_matrix_file(args.config, "fbdd-config")
        res = fbdd_run(f.config, f.rho_B, override=args.override)
        chk = res.check
        return {
            "method": "fbdd",
            "result": {
                "block_form_ok": chk.block_form_ok,
                "mixing_ok": chk.mixing_ok,
                "block_residual": chk.block_residual,
                "eigenvalues": chk.eigenvalues,
                "fidelity": res.fidelity,
                "rho_S_final": res.rho_S_final,
                "override": bool(args.override),
            },
        }
    f = fileio.parse_matrix_file(args.config, "split-config")
    cfg = split_build(f.d_S, f.projector)
    rng = np.random.default_rng(args.seed)
    inputs = list(f.inputs) or [random_density(f.d_S, rng) for _ in range(20)]
    outs = [split_run(cfg, rho) for rho in inputs]
    return {
        "method": "split",
        "result": {
            "K": cfg.K,
            "block_ranks": [int(round(np.trace(b).real)) for b in cfg.blocks],
            "max_target_leak": max(abs(np.trace(cfg.Pi_T @ o).real - 1) for o in outs),
            "max_closed_form_gap": max(float(np.abs(o - split_closed_form(cfg, r)).max()) for o, r in zip(outs, inputs)),
            "inputs": len(inputs),
        },
    }


def cmd_optimize(args):
    prob = fileio.parse_matrix_file(args.problem, "problem")
    target = _channel(args.target)
    c = target_components(target, prob.basis)
    res = optimize(prob, c, max_iters=args.iters, seed=args.seed, restarts=args.restarts)
    return {
        "method": "optimize",
        "eps_measured": res.final_cost,
        "result": {
            "final_cost": res.final_cost,
            "cost_trace": res.cost_trace,
            "restarts_used": res.restarts_used,
            "pulse": res.pulse.values,
            "recomputed_cost": cost(prob, ControlPulse(res.pulse.values, prob.T), c),
        },
    }


HANDLERS = {
    "analyze": cmd_analyze,
    "dilate": cmd_dilate,
    "design": cmd_design,
    "decompose": cmd_decompose,
    "realize": cmd_realize,
    "protocol": cmd_protocol,
    "optimize": cmd_optimize,
}


def _summary(report) -> str:
    lines = [f"status: {report['status']}"]
    for key in ("method", "reason", "detail", "eps_certified", "eps_measured", "diagnostics", "error"):
        if report.get(key) not in (None, ""):
            lines.append(f"{key}: {report[key]}")
    res = report.get("result", {})
    for key in sorted(res):
        val = res[key]
        if isinstance(val, (bool, int, float, str)):
            lines.append(f"{key}: {val}")
    return "\n".join(lines) + "\n"


def run(argv):
    """Parse ``argv``, dispatch, and return ``(exit code, report, args)``."""
    parser = build_parser()
    args = parser.parse_args(argv)
    report = {
        "command": list(argv),
        "seed": args.seed,
        "tolerances": {"tol": args.tol, "equality": TOL_EQ},
        "method": None,
        "eps_certified": None,
        "eps_measured": None,
        "diagnostics": "",
    }
    t0 = time.perf_counter()
    try:
        report.update(HANDLERS[args.command](args))
        report["status"] = "ok"
        code = EXIT_OK
    except InfeasibleError as exc:
        report.update(status="infeasible", reason=exc.reason, detail=exc.detail)
        code = EXIT_INFEASIBLE
    except (QdfError, ValueError, OSError) as exc:
        report.update(status="error", error=str(exc))
        code = EXIT_ERROR
    if args.timing:
        report["wall_time"] = time.perf_counter() - t0
    return code, report, args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        code, report, args = run(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    text = fileio.emit(report)
    if args.out:
        fileio.write_atomic(args.out, text)
    if args.json:
        sys.stdout.write(text)
    else:
        sys.stdout.write(_summary(report))
    if code == EXIT_ERROR:
        sys.stderr.write(f"error: {report.get('error')}\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
