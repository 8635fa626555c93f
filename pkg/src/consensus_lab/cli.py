"""``consensus-lab`` command line.

Exit codes: 0 success, 1 input/IO error, 2 assumption violated or
dynamics not stabilizable, 3 simulation finished without converging.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import summarize
from .containment import containment_weights, verify_containment
from .design import SystemDynamics, check_stabilizable, closed_loop_certificate, solve_care, verify_lmi_certificate
from .errors import AssumptionViolation, ConsensusLabError, NotStabilizable, ScenarioError, SingularL1
from .graph import build_laplacian, check_assumption
from .scenario import ScenarioFile, resolve_graph
from .sim import Scenario, Trajectory, integrate
from .spectra import analyze_m_matrix
from .svg import time_series_svg

log = logging.getLogger("consensus_lab")

EXIT_OK, EXIT_INPUT, EXIT_ASSUMPTION, EXIT_NOT_CONVERGED = 0, 1, 2, 3


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc


def _emit(doc) -> None:
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_analyze(path) -> int:
    raw = _load_json(path)
    g = resolve_graph(raw["graph"] if "graph" in raw else raw)
    report = check_assumption(g)
    lp = build_laplacian(g)
    out = {
        "order": list(g.order),
        "assumption": report.to_dict(),
        "L1": lp.L1.tolist(),
        "L2": lp.L2.tolist(),
        "analysis": None,
    }
    if report.satisfied and g.follower_count:
        out["analysis"] = analyze_m_matrix(lp).to_dict()
    _emit(out)
    return EXIT_OK if report.satisfied else EXIT_ASSUMPTION


def cmd_design(path) -> int:
    raw = _load_json(path)
    try:
        sys_ = SystemDynamics.from_dict(raw.get("dynamics", raw))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"dynamics section needs A and B: {exc}") from exc
    if not check_stabilizable(sys_):
        _emit({"stabilizable": False})
        print("error: (A, B) is not stabilizable", file=sys.stderr)
        return EXIT_ASSUMPTION
    design = solve_care(sys_)
    cert = verify_lmi_certificate(sys_, design.P)
    out = {"stabilizable": True, **design.to_dict(sys_), "lmi_certificate": cert.to_dict()}
    out["closed_loop_lambda_max"] = closed_loop_certificate(sys_, design)
    _emit(out)
    return EXIT_OK


def _follower_series(scenario: Scenario, traj: Trajectory):
    """Per-follower error norms and deviations from the tracking target."""
    g = scenario.graph
    m = g.leader_count
    rows = scenario.loop.rows
    xi = np.einsum("fa,san->sfn", rows, traj.states)
    if m == 1:
        target = np.repeat(traj.states[:, :1, :], g.follower_count, axis=1)
    else:
        W = containment_weights(build_laplacian(g)).W
        target = np.einsum("fl,sln->sfn", W, traj.states[:, :m, :])
    return np.linalg.norm(xi, axis=2), traj.states[:, m:, :] - target


def write_plots(scenario: Scenario, traj: Trajectory, kinds, out_dir: Path) -> list[str]:
    written = []
    if scenario.graph.follower_count == 0:
        return written
    t = traj.times
    followers = scenario.graph.followers
    err_i, dev = _follower_series(scenario, traj)
    for kind in kinds:
        if kind == "error_norm":
            panels = [{
                "title": "neighborhood error |xi_i|",
                "ylabel": "|xi_i|",
                "series": {f"follower {f}": (t, err_i[:, k]) for k, f in enumerate(followers)},
            }]
        elif kind == "weights":
            if traj.weights is None:
                continue
            panels = [{
                "title": "adaptive coupling weights c_i",
                "ylabel": "c_i",
                "series": {f"c_{f}": (t, traj.weights[:, k]) for k, f in enumerate(followers)},
            }]
        else:
            ref = "x_0" if scenario.graph.leader_count == 1 else "hull target"
            panels = [
                {
                    "title": f"state component {c}: x_i - {ref}",
                    "ylabel": f"component {c}",
                    "series": {f"follower {f}": (t, dev[:, k, c]) for k, f in enumerate(followers)},
                }
                for c in range(scenario.sys.n)
            ]
        name = f"{kind}.svg"
        (out_dir / name).write_text(time_series_svg(panels))
        written.append(name)
    return written


def _check_graph(sf: ScenarioFile) -> None:
    report = check_assumption(sf.graph())
    if not report.satisfied:
        raise AssumptionViolation(report.unreachable)


def run_simulation(sf: ScenarioFile, out_dir: Path, containment: bool = False) -> tuple[int, dict]:
    """Simulate one scenario file and write its artifacts to ``out_dir``."""
    _check_graph(sf)
    scenario = sf.build()
    traj = integrate(scenario)
    report = summarize(traj, scenario, threshold=sf.sim["success_threshold"])
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = sf.outputs
    (out_dir / outputs["csv"]).write_text(traj.to_csv())
    summary = report.to_dict()
    if traj.weights is not None and traj.weights.shape[1]:
        summary["weight_limits"] = {"min": float(traj.weights[-1].min()), "max": float(traj.weights[-1].max())}
    summary["plots"] = write_plots(scenario, traj, outputs["svg"], out_dir)
    ok = report.convergence["achieved"]
    if containment:
        analysis = containment_weights(build_laplacian(scenario.graph))
        cr = verify_containment(analysis, traj, threshold=sf.sim["success_threshold"])
        summary["containment"] = cr.to_dict(with_samples=False)
        (out_dir / "containment.json").write_text(json.dumps(cr.to_dict(), indent=2) + "\n")
        ok = cr.achieved
    (out_dir / outputs["json"]).write_text(json.dumps(summary, indent=2) + "\n")
    return (EXIT_OK if ok else EXIT_NOT_CONVERGED), summary


def _run_one(args):
    doc, out_dir, containment = args
    try:
        return run_simulation(ScenarioFile(doc), Path(out_dir), containment)
    except (AssumptionViolation, SingularL1) as exc:
        return EXIT_ASSUMPTION, {"error": str(exc)}
    except ConsensusLabError as exc:
        return EXIT_INPUT, {"error": str(exc)}


def cmd_simulate(path, out_dir=".", runs=1, containment=False) -> int:
    sf = ScenarioFile.load(path) if not isinstance(path, ScenarioFile) else path
    out_dir = Path(out_dir)
    if runs <= 1:
        code, summary = run_simulation(sf, out_dir, containment)
        _emit(summary)
        return code
    jobs = [(sf.with_seed_offset(k).to_dict(), str(out_dir / f"run_{k:03d}"), containment) for k in range(runs)]
    with ProcessPoolExecutor() as pool:
        results = list(pool.map(_run_one, jobs))
    _emit({f"run_{k:03d}": {"exit": code, **summary} for k, (code, summary) in enumerate(results)})
    return max(code for code, _ in results)


def cmd_containment(path, out_dir=".", runs=1) -> int:
    return cmd_simulate(path, out_dir, runs, containment=True)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="consensus-lab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("analyze", "graph assumption check and Laplacian spectra"),
        ("design", "Riccati gain synthesis from the dynamics"),
        ("simulate", "integrate a scenario and write CSV/JSON/SVG"),
        ("containment", "simulate a multi-leader scenario and verify containment"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("scenario", help="scenario or graph JSON file")
        if name in ("simulate", "containment"):
            sp.add_argument("--out", default=".", help="output directory (default: current)")
            sp.add_argument("--runs", type=int, default=1, help="run K seed-shifted copies in parallel")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "analyze":
            return cmd_analyze(args.scenario)
        if args.command == "design":
            return cmd_design(args.scenario)
        if args.command == "simulate":
            return cmd_simulate(args.scenario, args.out, args.runs)
        return cmd_containment(args.scenario, args.out, args.runs)
    except (AssumptionViolation, SingularL1) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except NotStabilizable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (ConsensusLabError, OSError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
