"""Command-line front end.

Exit codes: 0 on success, 1 on invalid input (usage, configuration,
geometry), 2 on numerical failure (non-finite values, chart exit, drift).
"""
from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from .config import ConfigError, ProblemConfig, load_config
from .curves import ExpressionCurve, format_float, read_curve_csv, write_curve_csv
from .errors import GeometryError, NumericError
from .expr import EvaluationError, ExprError
from .fundeq import h_in_frame
from .export import dumps, obj_text, points_csv_text, write_text
from .odeint import OdeOptions
from .problem import PointSeed, Problem
from .reconstruct import path_independence_audit, reconstruct_grid, reconstruct_point
from .transport import DevelopOptions, SplitSeed, develop, generalized_develop, parallel_transport
from .variation import CurveFamily, integrate_variations, verify_ansatz

__all__ = ["main", "run", "build_parser"]

COMMANDS = ("develop", "gdevelop", "transport", "check", "variation", "reconstruct", "audit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gendev", description="Generalized developments and immersion reconstruction.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "develop": "classical development in the base; writes a trajectory CSV",
        "gdevelop": "generalized development in the ambient; writes a trajectory CSV",
        "transport": "parallel transport of a vector along a curve",
        "check": "Gauss, Codazzi and Ricci residuals at the end of a curve",
        "variation": "integrate the variation systems and compare them",
        "reconstruct": "reconstruct the immersion on a grid; writes OBJ or CSV",
        "audit": "path-independence audit with random curves",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--step", type=float, default=1e-3, metavar="F")
        p.add_argument("--tol", type=float, default=1e-8, metavar="F",
                       help="frame drift bound (default 1e-8)")
        p.add_argument("--format", choices=("obj", "csv", "json"))
        if name in ("develop", "gdevelop", "transport"):
            p.add_argument("--vector", required=True, metavar="V",
                           help="comma-separated components; expressions in t for (g)develop")
            p.add_argument("--samples", type=int, default=101, metavar="N")
        if name in ("transport", "check"):
            p.add_argument("--curve", required=True, metavar="PATH")
        if name == "reconstruct":
            p.add_argument("--grid", default="9x9", metavar="AxB")
            p.add_argument("--policy", choices=("radial", "polyline", "normal"), default="polyline")
            p.add_argument("--jobs", type=int, default=1, metavar="N")
        if name == "audit":
            p.add_argument("--target", required=True, metavar="X")
            p.add_argument("--k", type=int, default=10, metavar="N")
            p.add_argument("--seed", type=int, default=0, metavar="U64")
        if name == "variation":
            p.add_argument("--u", type=float, metavar="F")
    return parser


def _opts(args) -> DevelopOptions:
    if not args.step > 0 or not args.tol > 0:
        raise GeometryError("--step and --tol must be positive")
    return DevelopOptions(OdeOptions(step=args.step), drift_bound=args.tol)


def _echo(args) -> dict:
    return {"step": args.step, "tol": args.tol}


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(p) for p in text.replace(",", " ").split()])
    except ValueError:
        raise GeometryError(f"expected numbers, got {text!r}") from None


def _out(args, default: str) -> str:
    return args.out or default


def _seed_point(problem: Problem) -> PointSeed:
    if not isinstance(problem.seed, PointSeed):
        raise GeometryError("this command needs a [seed] section with a point seed")
    return problem.seed


def _vector_curve(text: str) -> ExpressionCurve:
    return ExpressionCurve([c.strip() for c in text.split(",")])


def _frame_velocity(text: str, dim: int):
    curve = _vector_curve(text)
    if curve.dim != dim:
        raise GeometryError(f"--vector needs {dim} components, got {curve.dim}")
    return lambda t: np.asarray(curve.position(t), dtype=float)[None]


def _write_trajectory(path: str, dev, samples: int, args) -> None:
    t = np.linspace(0.0, 1.0, max(samples, 2))
    pts = np.stack([dev.position(ti)[0] for ti in t])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# step={format_float(args.step)} tol={format_float(args.tol)} "
                 f"max_drift={format_float(dev.max_drift)}\n")
        write_curve_csv(fh, t, pts)


def cmd_develop(cfg: ProblemConfig, problem: Problem, args) -> int:
    seed = _seed_point(problem)
    frame = problem.base_frame(seed.p)[0]
    dev = develop(problem.base, seed.p, frame, _frame_velocity(args.vector, problem.n), _opts(args))
    _write_trajectory(_out(args, "develop.csv"), dev, args.samples, args)
    return 0


def cmd_gdevelop(cfg: ProblemConfig, problem: Problem, args) -> int:
    """Generalized development with ``h~`` frozen at its value at the seed."""
    seed = _seed_point(problem)
    start = problem.start(1)
    split = SplitSeed(seed.ptilde, start.ambient_frame[0], problem.n)
    h = h_in_frame(problem, start.x, start.frame, start.bundle)
    dev = generalized_develop(problem.ambient, split, _frame_velocity(args.vector, problem.n),
                              h if problem.s else None, _opts(args))
    _write_trajectory(_out(args, "gdevelop.csv"), dev, args.samples, args)
    return 0


def cmd_transport(cfg: ProblemConfig, problem: Problem, args) -> int:
    curve = read_curve_csv(args.curve)
    v0 = _floats(args.vector)
    if v0.shape != (problem.n,):
        raise GeometryError(f"--vector needs {problem.n} components")
    v1 = parallel_transport(problem.base, curve, v0, 0.0, 1.0, OdeOptions(step=args.step))
    print(" ".join(format_float(c) for c in v1))
    if args.out:
        write_text(args.out, dumps({"start": list(v0), "end": list(v1), "point": list(curve.position(1.0)),
                                    **_echo(args)}))
    return 0


def cmd_check(cfg: ProblemConfig, problem: Problem, args) -> int:
    curve = read_curve_csv(args.curve)
    res = reconstruct_point(problem, curve, _opts(args), curve_id=str(args.curve))
    extra = {"ambient_point": list(res.point), "drift": res.drift, "tau_gram_defect": res.tau_defect,
             **_echo(args)}
    write_text(_out(args, "residuals.json"), res.report.to_json(extra))
    return 0


def cmd_variation(cfg: ProblemConfig, problem: Problem, args) -> int:
    v = cfg.require("family", "v")[0]
    theta = cfg.get("family", "theta")
    family = CurveFamily([c.strip() for c in v.split(";")],
                         None if theta is None else [c.strip() for c in theta.split(";")])
    u = args.u if args.u is not None else float(cfg.get("family", "u", "0"))
    out = integrate_variations(problem, family, u, _opts(args))
    report = verify_ansatz(out["base"], out["ambient"])
    extra = {"u": u, "antisymmetry": max(out["base"].antisymmetry_defect(),
                                         out["ambient"].antisymmetry_defect()), **_echo(args)}
    write_text(_out(args, "ansatz.json"), report.to_json(extra))
    return 0


def _grid_ranges(cfg: ProblemConfig, problem: Problem) -> list[tuple[float, float]]:
    ranges = []
    for i, key in enumerate(("x1", "x2")):
        if cfg.get("grid", key) is not None:
            lo, hi = cfg.floats("grid", key)
        elif isinstance(problem.seed, PointSeed):
            lo, hi = problem.seed.p[i] - 1.0, problem.seed.p[i] + 1.0
        else:
            raise ConfigError(f"missing key {key} in [grid]")
        ranges.append((float(lo), float(hi)))
    return ranges


def cmd_reconstruct(cfg: ProblemConfig, problem: Problem, args) -> int:
    try:
        counts = tuple(int(c) for c in args.grid.lower().split("x"))
    except ValueError:
        counts = ()
    if len(counts) != 2 or min(counts) < 1:
        raise UsageError("gendev reconstruct: error: --grid expects AxB with positive "
                         f"integers, got {args.grid!r}")
    sample = reconstruct_grid(problem, _grid_ranges(cfg, problem), counts, args.policy,
                              _opts(args), jobs=max(1, args.jobs))
    fmt = args.format or ("obj" if problem.big_n == 3 else "csv")
    if fmt == "obj" and problem.big_n != 3:
        raise GeometryError("OBJ export needs a 3-dimensional ambient; use --format csv")
    path = _out(args, f"mesh.{fmt}")
    if fmt == "obj":
        write_text(path, obj_text(sample.ambient_points, sample.valid, sample.faces))
    elif fmt == "csv":
        write_text(path, points_csv_text(sample.base_points, sample.ambient_points, sample.valid))
    else:
        data = {"counts": list(counts), "policy": args.policy, **_echo(args),
                "valid": [bool(v) for v in sample.valid],
                "base": [list(p) for p in sample.base_points],
                "points": [list(p) for p in sample.ambient_points],
                "errors": [e for e in sample.errors if e]}
        write_text(path, dumps(data))
    bad = int((~sample.valid).sum())
    if bad:
        print(f"{bad} of {sample.count} grid points failed", file=sys.stderr)
    return 0


def cmd_audit(cfg: ProblemConfig, problem: Problem, args) -> int:
    if not 0 <= args.seed < 2 ** 64:
        raise GeometryError("--seed must be an unsigned 64-bit integer")
    target = _floats(args.target)
    if target.shape != (problem.n,):
        raise GeometryError(f"--target needs {problem.n} coordinates")
    report = path_independence_audit(problem, target, args.k, args.seed, _opts(args))
    data = {**report.as_dict(), **_echo(args)}
    text = dumps(data)
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


HANDLERS = {
    "develop": cmd_develop, "gdevelop": cmd_gdevelop, "transport": cmd_transport,
    "check": cmd_check, "variation": cmd_variation, "reconstruct": cmd_reconstruct,
    "audit": cmd_audit,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config)
        problem = cfg.build()
        return HANDLERS[args.command](cfg, problem, args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericError, EvaluationError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (GeometryError, ExprError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
