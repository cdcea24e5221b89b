"""Command line entry point ``hkcone``.

Exit codes: 0 ok, 1 bad input, 2 solver did not converge, 3 a verify suite failed.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .charfn import ShootingFailure, char_function_geodesic
from .cone import Params
from .cone_ot import ValueMismatch, hk_via_lifts
from .et_solver import NonConvergence, SolverConfig, hk_distance
from .fixtures import FIXTURES
from .geodesic import (DEFAULT_FRAMES, dilation_geodesic, dirac_line_example, frame_rows,
                       geodesic_from_plan, mass_profile)
from .measure import MeasureFormatError, load_measure, save_measure
from .suites import SUITES, run_suite
from .tolerances import CLI_MERGE_RADIUS

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGENCE, EXIT_VERIFY = 0, 1, 2, 3


class InputError(Exception):
    """Bad arguments or files; reported on stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors, not the non-convergence code argparse uses
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    params: Params
    solver: SolverConfig
    frames: Tuple[float, ...]
    output: Optional[str]
    format: str
    seed: int


def parse_frames(text: str) -> Tuple[float, ...]:
    try:
        frames = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"frames: not a comma separated list of numbers: {text!r}") from None
    if not frames:
        raise argparse.ArgumentTypeError("frames: empty list")
    bad = [s for s in frames if not 0.0 <= s <= 1.0]
    if bad:
        raise argparse.ArgumentTypeError(f"frames: values outside [0, 1]: {bad}")
    return frames


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a finite number > 0: {text!r}")
    return v


def _center(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"center: not a comma separated point: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=_positive, default=1.0, help="transport weight (default 1)")
    common.add_argument("--beta", type=_positive, default=4.0, help="reaction weight (default 4)")
    common.add_argument("--tol", type=_positive, default=None, help="solver KKT tolerance")
    common.add_argument("--config", default=None, help="solver config JSON")
    common.add_argument("--frames", type=parse_frames, default=DEFAULT_FRAMES,
                        help="comma separated s values in [0, 1] (default k/20)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized suites (default 0)")
    common.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None)

    parser = _Parser(prog="hkcone", description="Hellinger-Kantorovich distances and geodesics.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dist", parents=[common], help="distance between two measure files")
    p.add_argument("m0")
    p.add_argument("m1")

    p = sub.add_parser("geodesic", parents=[common], help="geodesic frames")
    p.add_argument("measures", nargs="*", help="plan: M0 M1; dilation: M1 (default: Diracs on a line)")
    p.add_argument("--family", choices=("plan", "dilation", "charfn"), default="plan")
    p.add_argument("--center", type=_center, default=None, help="dilation center y0 (default origin)")

    p = sub.add_parser("verify", parents=[common], help="run an invariant suite")
    p.add_argument("suite", choices=sorted(SUITES) + ["all"])

    p = sub.add_parser("examples", parents=[common], help="write the example measure files")
    return parser


def _run_config(args) -> RunConfig:
    solver = SolverConfig()
    if args.config is not None:
        try:
            solver = SolverConfig.load(args.config)
        except (OSError, ValueError, TypeError) as exc:
            raise InputError(f"{args.config}: bad solver config ({exc})") from None
    if args.tol is not None:
        solver = replace(solver, tol=args.tol)
    return RunConfig(Params(args.alpha, args.beta), solver, tuple(args.frames), args.output,
                     args.format, args.seed)


def _load(path: str):
    try:
        return load_measure(path, CLI_MERGE_RADIUS)
    except MeasureFormatError as exc:
        raise InputError(f"{path}: {exc}") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _write(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def _pair(cfg: RunConfig, paths: Sequence[str]):
    mu0, mu1 = _load(paths[0]), _load(paths[1])
    if mu0.dim != mu1.dim:
        raise InputError(f"dimension mismatch: {paths[0]} has dim {mu0.dim}, {paths[1]} has dim {mu1.dim}")
    return mu0, mu1


def _solve(mu0, mu1, cfg: RunConfig):
    """``(hk_sq, report, converged)``; a non-converged solve keeps its best iterate."""
    try:
        _, hk_sq, report = hk_distance(mu0, mu1, cfg.params, cfg.solver)
        return hk_sq, report, True
    except NonConvergence as exc:
        report = exc.report
        hk_sq = max(report.value, 0.0)
        gap = abs(hk_sq - cfg.params.lam * (mu0.total_mass + mu1.total_mass - 2.0 * report.eta.mass))
        return hk_sq, replace(report, mass_identity_gap=gap), False


def cmd_dist(m0_path: str, m1_path: str, cfg: RunConfig) -> int:
    mu0, mu1 = _pair(cfg, (m0_path, m1_path))
    hk_sq, report, converged = _solve(mu0, mu1, cfg)
    doc = {
        "hk": math.sqrt(hk_sq),
        "hk_sq": hk_sq,
        "eta_mass": report.eta.mass,
        "kkt": report.kkt.to_json(),
        "iterations": report.iterations,
        "converged": converged,
        "mass_identity_gap": report.mass_identity_gap,
    }
    _write(_dumps(doc), cfg.output)
    return EXIT_OK if converged else EXIT_NONCONVERGENCE


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def _emit_frames(cfg: RunConfig, header: Sequence[str], rows, summary: dict) -> None:
    if (cfg.format or "csv") == "json":
        doc = dict(summary, columns=list(header), rows=[list(map(float, r)) for r in rows])
        _write(_dumps(doc), cfg.output)
        return
    _write(_csv(header, rows), cfg.output)
    if cfg.output is not None:
        _write(_dumps(summary), cfg.output + ".json")


def cmd_geodesic(paths: Sequence[str], family: str, center, cfg: RunConfig) -> int:
    code = EXIT_OK
    if family == "charfn":
        if paths:
            raise InputError("the charfn family takes no measure files")
        try:
            g = char_function_geodesic()
        except ShootingFailure as exc:
            raise InputError(str(exc)) from None
        viol, slack = g.optimality_gap()
        m0, m1 = g.marginal_masses()
        summary = {"family": family, "c_star": g.c_star, "w_star": g.w_star, "c_elliptic": g.c_elliptic,
                   "w_elliptic": g.w_elliptic, "h_optim_violation": viol, "marginal_mass_gap": abs(m0 - m1)}
        _emit_frames(cfg, ("s", "y", "density"), g.frame_rows(cfg.frames), summary)
        return code

    if family == "dilation":
        if len(paths) > 1:
            raise InputError("the dilation family takes one measure file (the endpoint)")
        if paths:
            mu1 = _load(paths[0])
            y0 = np.zeros(mu1.dim) if center is None else center
        else:
            mu1, y0 = dirac_line_example()
            y0 = y0 if center is None else center
        if y0.size != mu1.dim:
            raise InputError(f"center has {y0.size} coordinates, the measure has dim {mu1.dim}")
        curve = dilation_geodesic(mu1, y0, cfg.params)
        prof = mass_profile(curve)
    else:
        if len(paths) != 2:
            raise InputError("the plan family needs two measure files")
        mu0, mu1 = _pair(cfg, paths)
        hk_sq, report, converged = _solve(mu0, mu1, cfg)
        if not converged:
            code = EXIT_NONCONVERGENCE
        try:
            _, plan = hk_via_lifts(mu0, mu1, report, cfg.params, cfg.solver.tol)
        except ValueMismatch as exc:
            if converged:
                raise
            sys.stderr.write(f"hkcone: {exc}\n")
            _write(_dumps({"family": family, "converged": False, "hk_sq": hk_sq}), cfg.output and cfg.output + ".json")
            return code
        curve = geodesic_from_plan(plan, cfg.params)
        prof = mass_profile(curve)
    summary = {
        "plan_cost": prof.hk_sq,
        "family": family,
        "m0": prof.m0,
        "m1": prof.m1,
        "m_star": prof.m_star,
        "hk_sq": prof.hk_sq if family == "dilation" else hk_sq,
        "mass_identity_residual": prof.identity_dev,
        "mass_bound_violation": prof.bound_violation,
        "converged": code == EXIT_OK,
    }
    dim = curve.dim
    header = ["s"] + [f"x_{k + 1}" for k in range(dim)] + ["mass"]
    _emit_frames(cfg, header, frame_rows(curve, cfg.frames), summary)
    return code


def format_table(checks) -> str:
    width = max(len(c.name) for c in checks)
    lines = [f"{'check':<{width}}  {'worst':>12}  {'limit':>9}  result"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {c.worst:12.3e}  {c.limit:9.1e}  {'PASS' if c.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def cmd_verify(suite: str, cfg: RunConfig) -> int:
    checks = run_suite(suite, cfg.seed, cfg.solver)
    if cfg.format == "json":
        text = _dumps([{"name": c.name, "worst": c.worst, "limit": c.limit, "passed": c.passed}
                       for c in checks])
    else:
        text = format_table(checks)
    _write(text, cfg.output)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


def cmd_examples(cfg: RunConfig) -> int:
    out = cfg.output or "."
    os.makedirs(out, exist_ok=True)
    for name in sorted(FIXTURES):
        fx = FIXTURES[name]
        save_measure(fx.mu0, os.path.join(out, f"{name}_m0.json"))
        save_measure(fx.mu1, os.path.join(out, f"{name}_m1.json"))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _run_config(args)
        if args.command == "dist":
            return cmd_dist(args.m0, args.m1, cfg)
        if args.command == "geodesic":
            return cmd_geodesic(args.measures, args.family, args.center, cfg)
        if args.command == "verify":
            return cmd_verify(args.suite, cfg)
        return cmd_examples(cfg)
    except InputError as exc:
        sys.stderr.write(f"hkcone: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
