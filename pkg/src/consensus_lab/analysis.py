"""Post-run metrics and static/adaptive comparison tables."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .design import closed_loop_certificate, riccati_residual
from .errors import IncompatibleScenarios
from .graph import build_laplacian, check_assumption
from .protocols import static_closed_loop_matrix
from .sim import Scenario, Trajectory
from .spectra import analyze_m_matrix, hurwitz_margin

THRESHOLDS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
CONVERGED_ERROR = 1e-3
WEIGHT_TOL = 1e-3


def _digest(doc) -> str:
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def family_doc(scenario: Scenario) -> dict:
    return {"dynamics": scenario.sys.to_dict(), "graph": scenario.graph.to_dict()}


def scenario_doc(scenario: Scenario) -> dict:
    p = scenario.protocol
    return {
        **family_doc(scenario),
        "protocol": {
            "kind": p.kind,
            "c": p.c,
            "c_init": list(p.c_init) if p.c_init is not None else None,
            "rho_exponent": p.rho_exponent,
            "K": p.gains.K.tolist(),
        },
        "x0": scenario.x0.tolist(),
        "t_end": scenario.t_end,
        "integrator": scenario.integrator.to_dict(),
        "sample_interval": scenario.sample_interval,
        "seed": scenario.seed,
    }


def scenario_digest(scenario: Scenario) -> str:
    return _digest(scenario_doc(scenario))


def time_to_threshold(times: np.ndarray, error_norm: np.ndarray, threshold: float) -> float | None:
    """First sample time after which the error stays below ``threshold``."""
    above = np.nonzero(np.asarray(error_norm) >= threshold)[0]
    if above.size == 0:
        return float(times[0])
    k = above[-1] + 1
    return float(times[k]) if k < len(times) else None


def weight_convergence(trajectory: Trajectory, tol: float = WEIGHT_TOL) -> tuple[np.ndarray, bool]:
    """Per-follower ``|c(t_end) - c(0.9 t_end)|`` and whether all are within ``tol``."""
    w = trajectory.weights
    k = int(np.searchsorted(trajectory.times, 0.9 * trajectory.t_final))
    drift = np.abs(w[-1] - w[min(k, len(w) - 1)])
    return drift, bool(np.all(drift <= tol))


@dataclass
class RunReport:
    scenario_digest: str
    family_digest: str
    kind: str
    assumption_satisfied: bool
    certificates: dict
    convergence: dict
    weights: dict | None
    lyapunov: dict | None
    final_error: float
    t_final: float
    terminated_early: bool
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(trajectory: Trajectory, scenario: Scenario, threshold: float = CONVERGED_ERROR) -> RunReport:
    g = scenario.graph
    sys = scenario.sys
    gains = scenario.protocol.gains
    assumption = check_assumption(g)
    certs = {
        "riccati_residual": riccati_residual(sys, gains.Q),
        "agent_hurwitz_margin": hurwitz_margin(sys.A + sys.B @ gains.K),
        "closed_loop_lambda_max": closed_loop_certificate(sys, gains),
    }
    if assumption.satisfied and g.follower_count:
        mm = analyze_m_matrix(build_laplacian(g))
        certs["min_re_lambda"] = mm.min_re_lambda
        certs["coupling_threshold"] = mm.coupling_threshold
        certs["lambda0_hat"] = mm.lambda0_hat
        if scenario.protocol.kind == "static":
            lifted = static_closed_loop_matrix(sys, build_laplacian(g).L1, gains.K, scenario.protocol.c)
            certs["static_lifted_hurwitz_margin"] = hurwitz_margin(lifted)
    if scenario.protocol.kind == "static":
        certs["static_c"] = scenario.protocol.c

    times, err = trajectory.times, trajectory.error_norm
    ttt = {f"{thr:.0e}": time_to_threshold(times, err, thr) for thr in THRESHOLDS}
    convergence = {"achieved": bool(err[-1] < threshold), "threshold": threshold, "time_to_threshold": ttt}

    weights = None
    if trajectory.weights is not None and trajectory.weights.shape[1]:
        drift, converged = weight_convergence(trajectory)
        w = trajectory.weights
        weights = {
            "initial": {str(f): float(v) for f, v in zip(g.followers, w[0])},
            "final": {str(f): float(v) for f, v in zip(g.followers, w[-1])},
            "drift_last_10pct": {str(f): float(v) for f, v in zip(g.followers, drift)},
            "nondecreasing": bool(np.all(np.diff(w, axis=0) >= -1e-9)),
            "converged": converged,
        }

    lyap = None
    if trajectory.lyapunov is not None and len(trajectory.lyapunov):
        inc = np.diff(trajectory.lyapunov)
        lyap = {
            "initial": float(trajectory.lyapunov[0]),
            "final": float(trajectory.lyapunov[-1]),
            "max_increment": float(inc.max()) if inc.size else 0.0,
            "violations": sum(1 for w in trajectory.warnings if w.startswith("V1")),
        }

    warnings = list(trajectory.warnings)
    if scenario.protocol.rho_exponent != 3:
        warnings.append("rho exponent differs from 3; the convergence guarantee does not apply")
    if trajectory.terminated_early:
        warnings.append(f"terminated early: {trajectory.reason}")

    return RunReport(
        scenario_digest=scenario_digest(scenario),
        family_digest=_digest(family_doc(scenario)),
        kind=scenario.protocol.kind,
        assumption_satisfied=assumption.satisfied,
        certificates=certs,
        convergence=convergence,
        weights=weights,
        lyapunov=lyap,
        final_error=float(err[-1]),
        t_final=trajectory.t_final,
        terminated_early=trajectory.terminated_early,
        warnings=warnings,
    )


@dataclass
class ComparisonTable:
    coupling_threshold: float | None
    rows: list[dict]

    def to_text(self) -> str:
        cols = ["label", "kind", "achieved", "t(1e-3)", "t(1e-6)", "final_error", "weights", "vs_threshold"]
        lines = [cols]
        for r in self.rows:
            lines.append([
                r["label"],
                r["kind"],
                "yes" if r["achieved"] else "no",
                _fmt(r["time_to_threshold"].get("1e-03")),
                _fmt(r["time_to_threshold"].get("1e-06")),
                f"{r['final_error']:.3e}",
                r["weights"],
                r["vs_threshold"],
            ])
        widths = [max(len(str(row[k])) for row in lines) for k in range(len(cols))]
        return "\n".join("  ".join(str(v).ljust(w) for v, w in zip(row, widths)).rstrip() for row in lines)


def _fmt(v):
    return "-" if v is None else f"{v:.4g}"


def compare_static_adaptive(reports: list[RunReport], labels: list[str] | None = None) -> ComparisonTable:
    """Tabulate convergence times and weights against the static threshold.

    No ordering between the adaptive weights and the static threshold is
    implied; the table just records both.
    """
    if len(reports) < 2:
        raise IncompatibleScenarios("need at least two reports to compare")
    families = {r.family_digest for r in reports}
    if len(families) > 1:
        raise IncompatibleScenarios("reports come from different dynamics/graph families")
    labels = labels or [f"run{k}" for k in range(len(reports))]
    thr = reports[0].certificates.get("coupling_threshold")
    rows = []
    for label, r in zip(labels, reports):
        if r.weights is not None:
            final = list(r.weights["final"].values())
            wtxt = f"c in [{min(final):.4g}, {max(final):.4g}]"
            vs = "n/a" if thr is None else f"{sum(v >= thr for v in final)}/{len(final)} >= {thr:.4g}"
        else:
            c = r.certificates.get("static_c")
            wtxt = "static"
            vs = "n/a"
            if c is not None:
                wtxt = f"c = {c:.4g}"
                vs = "n/a" if thr is None else ("above" if c >= thr else "below")
        rows.append({
            "label": label,
            "kind": r.kind,
            "achieved": r.convergence["achieved"],
            "time_to_threshold": r.convergence["time_to_threshold"],
            "final_error": r.final_error,
            "weights": wtxt,
            "vs_threshold": vs,
        })
    return ComparisonTable(thr, rows)
