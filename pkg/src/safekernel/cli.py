"""Command-line entry point: ``safekernel {simulate,robustness,kernel,verify}``.

Exit codes: 0 success, 1 I/O or parse error, 2 validation error,
3 round limit reached, 4 verification failed / negative verdict.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bundled_scenario
from .adversary import ConfigurationError
from .engine import (
    CONVERGED,
    FORMAT_VERSION,
    DegenerateKernelError,
    ScenarioError,
    ScenarioParseError,
    load_scenario,
    plot_data,
    read_trajectory_csv,
    simulate,
    summary,
    trajectory_csv,
)
from .geometry import TOL_GEOM, TOL_VERTEX, GeometryError, safe_kernel, trimmed_box
from .graph import DEFAULT_CAP, GraphError, UnsupportedSizeError, is_r_robust, is_rs_robust, load_network
from .oracle import audit_states

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_ROUND_LIMIT = 3
EXIT_VERIFY = 4

log = logging.getLogger("safekernel")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _scenario_path(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    res = bundled_scenario(arg)
    if res.is_file():
        return Path(str(res))
    raise FileNotFoundError(f"no scenario file or bundled scenario named {arg!r}")


def _overrides(args) -> dict:
    return {
        "epsilon": args.epsilon,
        "max_rounds": args.max_rounds,
        "seed": args.seed,
        "tol_geom": args.tol_geom,
        "tol_vertex": args.tol_vertex,
    }


def cmd_simulate(args) -> int:
    try:
        scenario = load_scenario(_scenario_path(args.scenario), **_overrides(args))
    except (OSError, ScenarioParseError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (ScenarioError, ConfigurationError, GraphError) as exc:
        log.error("invalid scenario: %s", exc)
        return EXIT_VALIDATION
    try:
        traj = simulate(scenario, progress=True)
    except DegenerateKernelError as exc:
        log.error("%s (diagnostics: %s)", exc, json.dumps(exc.diagnostics))
        return EXIT_VALIDATION
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.csv").write_text(trajectory_csv(traj, scenario.dim))
    (out / "summary.json").write_text(_dump(summary(traj, scenario)) + "\n")
    (out / "plot.json").write_text(_dump(plot_data(traj, scenario)) + "\n")
    log.info("%s after %d rounds, benign diameter %.3e", traj.terminal, traj.final.k, traj.final.diameter)
    return EXIT_OK if traj.terminal == CONVERGED else EXIT_ROUND_LIMIT


def cmd_robustness(args) -> int:
    try:
        G = load_network(args.graph)
    except (OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except GraphError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    try:
        if args.s is None:
            report = is_r_robust(G, args.r, strict=args.strict, cap=args.cap)
        else:
            report = is_rs_robust(G, args.r, args.s, strict=args.strict, cap=args.cap)
    except UnsupportedSizeError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    out = report.to_dict()
    out["format_version"] = FORMAT_VERSION
    out["config"] = {"graph": G.to_dict(), "cap": args.cap}
    print(_dump(out))
    return EXIT_OK if report.verdict else EXIT_VERIFY


def read_points(path) -> np.ndarray:
    """One point per line, whitespace-separated; blank and ``#`` lines skipped."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(v) for v in line.split()])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        if len(rows[-1]) != len(rows[0]):
            raise ValueError(f"{path}:{lineno}: expected {len(rows[0])} coordinates")
    if not rows:
        raise ValueError(f"{path}: no points")
    return np.array(rows)


def cmd_kernel(args) -> int:
    try:
        pts = read_points(args.points)
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_IO
    tol = TOL_GEOM if args.tol_geom is None else args.tol_geom
    tolv = TOL_VERTEX if args.tol_vertex is None else args.tol_vertex
    try:
        kernel = safe_kernel(pts, args.n, tol, tolv)
    except GeometryError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    box = trimmed_box(pts, args.n).to_dict() if len(pts) >= 2 * args.n + 1 else None
    out = kernel.to_dict()
    out.update(
        format_version=FORMAT_VERSION,
        trimmed_box=box,
        config={"n": args.n, "m": len(pts), "tol_geom": tol, "tol_vertex": tolv},
    )
    print(_dump(out))
    return EXIT_OK if not kernel.empty else EXIT_VERIFY


def cmd_verify(args) -> int:
    try:
        scenario = load_scenario(_scenario_path(args.scenario))
        rounds, benign, faulty = read_trajectory_csv(args.trajectory)
    except (OSError, ScenarioParseError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (ScenarioError, ConfigurationError, GraphError) as exc:
        log.error("invalid scenario: %s", exc)
        return EXIT_VALIDATION
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_IO
    if benign != scenario.benign or faulty != sorted(scenario.faulty):
        log.error("trajectory roles do not match the scenario")
        return EXIT_VALIDATION
    for k, states in enumerate(rounds):
        if sorted(states) != list(scenario.network.nodes) or any(
            len(v) != scenario.dim for v in states.values()
        ):
            log.error("round %d: node set or dimension does not match the scenario", k)
            return EXIT_VALIDATION
    report = audit_states(rounds, benign, scenario.epsilon, tol=args.tol, window=args.window)
    out = report.to_dict()
    out.update(
        format_version=FORMAT_VERSION,
        config={"tol": args.tol, "window": args.window, "epsilon": scenario.epsilon},
    )
    print(_dump(out))
    return EXIT_OK if report.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="safekernel", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and export its trajectory")
    s.add_argument("scenario", help="scenario JSON path or bundled name (e.g. k5_golden)")
    s.add_argument("-o", "--output", default="out")
    s.add_argument("--epsilon", type=float)
    s.add_argument("--max-rounds", "--max_rounds", dest="max_rounds", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--tol-geom", type=float)
    s.add_argument("--tol-vertex", type=float)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("robustness", help="exhaustive r- or (r,s)-robustness check")
    r.add_argument("graph")
    r.add_argument("--r", type=int, required=True)
    r.add_argument("--s", type=int)
    r.add_argument("--strict", action="store_true", help="require more than one reaching node per set")
    r.add_argument("--cap", type=int, default=DEFAULT_CAP)
    r.set_defaults(func=cmd_robustness)

    k = sub.add_parser("kernel", help="safe kernel of a point file")
    k.add_argument("points")
    k.add_argument("--n", type=int, required=True)
    k.add_argument("--tol-geom", type=float)
    k.add_argument("--tol-vertex", type=float)
    k.set_defaults(func=cmd_kernel)

    v = sub.add_parser("verify", help="audit a trajectory against its scenario")
    v.add_argument("trajectory")
    v.add_argument("scenario")
    v.add_argument("--tol", type=float, default=1e-6)
    v.add_argument("--window", type=int, default=10)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
