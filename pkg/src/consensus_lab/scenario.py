"""Scenario documents: parsing, normalization and seeded resolution.

A scenario file is JSON with the sections ``dynamics``, ``graph``,
``protocol``, ``initial_states``, ``sim`` and ``outputs``. Randomized
fields (edge weights, initial coupling weights, initial states) each carry
their own ``seed``; nothing random happens without one.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .design import GainDesign, SystemDynamics, gains_from_P, solve_care, verify_lmi_certificate
from .errors import ConsensusLabError, ScenarioError
from .graph import DirectedGraph, build_laplacian
from .protocols import ADAPTIVE, STATIC, ProtocolConfig
from .sim import IntegratorSettings, Scenario
from .spectra import analyze_m_matrix

SIM_DEFAULTS = {
    "t_end": 10.0,
    "method": "rk4",
    "step": 1e-3,
    "rel_tol": 1e-8,
    "abs_tol": 1e-10,
    "min_step": 1e-12,
    "max_step": None,
    "sample_interval": 0.01,
    "convergence_threshold": 1e-10,
    "convergence_window": 100,
    "success_threshold": 1e-3,
}
OUTPUT_DEFAULTS = {"csv": "trajectory.csv", "json": "report.json", "svg": ["error_norm", "weights", "states"]}
SVG_KINDS = ("error_norm", "weights", "states")


def _interval(value, name) -> list[float]:
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{name} must be a [low, high] pair") from exc
    if not hi > lo:
        raise ScenarioError(f"{name} must satisfy low < high, got {value}")
    return [lo, hi]


def _seed(section: dict, name: str) -> int:
    if "seed" not in section:
        raise ScenarioError(f"{name} is randomized but has no explicit seed")
    return int(section["seed"])


def _uniform_open(rng: np.random.Generator, lo: float, hi: float) -> float:
    """Draw from the open interval (lo, hi)."""
    v = rng.uniform(lo, hi)
    while v <= lo:
        v = rng.uniform(lo, hi)
    return float(v)


def _normalize_graph(doc: dict) -> dict:
    try:
        out = {"nodes": int(doc["nodes"]), "leaders": [int(v) for v in doc["leaders"]]}
        edges = doc["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"graph section needs nodes, leaders and edges: {exc}") from exc
    if "edge_weight_interval" in doc:
        out["edges"] = [[int(e[0]), int(e[1])] for e in edges]
        out["edge_weight_interval"] = _interval(doc["edge_weight_interval"], "edge_weight_interval")
        out["seed"] = _seed(doc, "graph.edge_weight_interval")
    else:
        if any(len(e) != 3 for e in edges):
            raise ScenarioError("edges need [source, target, weight] unless edge_weight_interval is given")
        out["edges"] = [[int(e[0]), int(e[1]), float(e[2])] for e in edges]
    return out


def resolve_graph(doc: dict) -> DirectedGraph:
    doc = _normalize_graph(doc)
    if "edge_weight_interval" in doc:
        rng = np.random.default_rng(doc["seed"])
        lo, hi = doc["edge_weight_interval"]
        edges = [(j, i, _uniform_open(rng, lo, hi)) for j, i in doc["edges"]]
    else:
        edges = [tuple(e) for e in doc["edges"]]
    return DirectedGraph(doc["nodes"], tuple(doc["leaders"]), tuple(edges))


def _normalize_protocol(doc: dict) -> dict:
    kind = doc.get("kind", ADAPTIVE)
    out = {"kind": kind, "rho_exponent": int(doc.get("rho_exponent", 3))}
    if kind == STATIC:
        c = doc.get("c", "threshold")
        if c == "threshold":
            out["c"] = "threshold"
            out["c_scale"] = float(doc.get("c_scale", 1.0))
        else:
            out["c"] = float(c)
    elif kind == ADAPTIVE:
        if "c_init" in doc:
            out["c_init"] = [float(v) for v in doc["c_init"]]
        else:
            out["c_init_interval"] = _interval(doc.get("c_init_interval", [1.0, 3.0]), "c_init_interval")
            out["seed"] = _seed(doc, "protocol.c_init_interval")
    else:
        raise ScenarioError(f"protocol.kind must be 'static' or 'adaptive', got {kind!r}")
    if "P" in doc:
        out["P"] = [[float(v) for v in row] for row in doc["P"]]
        out["lmi_tol"] = float(doc.get("lmi_tol", -1e-6))
    return out


def _normalize_initial(doc: dict) -> dict:
    if "explicit" in doc:
        return {"explicit": [[float(v) for v in np.atleast_1d(row)] for row in doc["explicit"]]}
    if "interval" in doc:
        return {"interval": _interval(doc["interval"], "initial_states.interval"), "seed": _seed(doc, "initial_states")}
    raise ScenarioError("initial_states needs 'explicit' or 'interval' + 'seed'")


def _normalize_sim(doc: dict) -> dict:
    unknown = set(doc) - set(SIM_DEFAULTS)
    if unknown:
        raise ScenarioError(f"unknown sim fields: {sorted(unknown)}")
    out = dict(SIM_DEFAULTS)
    out.update(doc)
    for key in ("t_end", "step", "rel_tol", "abs_tol", "min_step", "sample_interval", "convergence_threshold", "success_threshold"):
        out[key] = float(out[key])
    out["max_step"] = None if out["max_step"] is None else float(out["max_step"])
    out["convergence_window"] = int(out["convergence_window"])
    if out["method"] not in ("rk4", "rkf45"):
        raise ScenarioError(f"sim.method must be rk4 or rkf45, got {out['method']!r}")
    return out


def _normalize_outputs(doc: dict) -> dict:
    out = copy.deepcopy(OUTPUT_DEFAULTS)
    out.update(doc)
    bad = [k for k in out["svg"] if k not in SVG_KINDS]
    if bad:
        raise ScenarioError(f"unknown svg plot kinds: {bad}")
    out["svg"] = list(out["svg"])
    return out


@dataclass(frozen=True)
class ScenarioFile:
    """Normalized scenario document (defaults filled in, nothing resolved)."""

    doc: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioFile":
        if not isinstance(raw, dict):
            raise ScenarioError("scenario document must be a JSON object")
        try:
            doc = {
                "dynamics": {
                    "A": [[float(v) for v in row] for row in np.atleast_2d(raw["dynamics"]["A"]).tolist()],
                    "B": [[float(v) for v in np.atleast_1d(row)] for row in raw["dynamics"]["B"]],
                },
                "graph": _normalize_graph(raw["graph"]),
                "protocol": _normalize_protocol(raw.get("protocol", {})),
                "initial_states": _normalize_initial(raw.get("initial_states", {})),
                "sim": _normalize_sim(raw.get("sim", {})),
                "outputs": _normalize_outputs(raw.get("outputs", {})),
            }
        except KeyError as exc:
            raise ScenarioError(f"missing scenario section or field: {exc}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"malformed scenario: {exc}") from exc
        return cls(doc)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioFile":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.doc)

    def dumps(self) -> str:
        return json.dumps(self.doc, indent=2, sort_keys=True)

    def with_seed_offset(self, k: int) -> "ScenarioFile":
        """Same scenario with every declared seed shifted by ``k``."""
        doc = self.to_dict()
        for section in ("graph", "protocol", "initial_states"):
            if "seed" in doc[section]:
                doc[section]["seed"] += k
        return ScenarioFile(doc)

    @property
    def sim(self) -> dict:
        return self.doc["sim"]

    @property
    def outputs(self) -> dict:
        return self.doc["outputs"]

    def dynamics(self) -> SystemDynamics:
        return SystemDynamics.from_dict(self.doc["dynamics"])

    def graph(self) -> DirectedGraph:
        return resolve_graph(self.doc["graph"])

    def gains(self, sys: SystemDynamics | None = None) -> GainDesign:
        sys = sys or self.dynamics()
        proto = self.doc["protocol"]
        if "P" in proto:
            cert = verify_lmi_certificate(sys, np.array(proto["P"]), tol=proto["lmi_tol"])
            if not cert.holds:
                raise ScenarioError(
                    f"supplied P fails the LMI check (lambda_max={cert.lambda_max_lmi:.3e}, "
                    f"lambda_min(P)={cert.lambda_min_P:.3e})"
                )
            return gains_from_P(sys, np.array(proto["P"]))
        return solve_care(sys)

    def build(self) -> Scenario:
        """Resolve all randomized fields and assemble a :class:`Scenario`."""
        sys = self.dynamics()
        g = self.graph()
        gains = self.gains(sys)
        proto = self.doc["protocol"]
        if proto["kind"] == STATIC:
            c = proto["c"]
            if c == "threshold":
                c = proto["c_scale"] * analyze_m_matrix(build_laplacian(g)).coupling_threshold
            protocol = ProtocolConfig(STATIC, gains, c=float(c), rho_exponent=proto["rho_exponent"])
        else:
            if "c_init" in proto:
                c0 = proto["c_init"]
            else:
                rng = np.random.default_rng(proto["seed"])
                lo, hi = proto["c_init_interval"]
                c0 = rng.uniform(lo, hi, g.follower_count).tolist()
            protocol = ProtocolConfig(ADAPTIVE, gains, c_init=tuple(c0), rho_exponent=proto["rho_exponent"])

        init = self.doc["initial_states"]
        if "explicit" in init:
            x_by_node = np.array(init["explicit"], dtype=float)
        else:
            rng = np.random.default_rng(init["seed"])
            lo, hi = init["interval"]
            x_by_node = rng.uniform(lo, hi, (g.node_count, sys.n))
        if x_by_node.shape != (g.node_count, sys.n):
            raise ScenarioError(f"initial states must have shape {(g.node_count, sys.n)}, got {x_by_node.shape}")
        x0 = x_by_node[list(g.order)]

        s = self.sim
        integrator = IntegratorSettings(
            method=s["method"],
            step=s["step"],
            rel_tol=s["rel_tol"],
            abs_tol=s["abs_tol"],
            min_step=s["min_step"],
            max_step=s["max_step"],
        )
        seed = next((self.doc[k]["seed"] for k in ("graph", "protocol", "initial_states") if "seed" in self.doc[k]), 0)
        try:
            return Scenario(
                sys=sys,
                graph=g,
                protocol=protocol,
                x0=x0,
                t_end=s["t_end"],
                integrator=integrator,
                sample_interval=s["sample_interval"],
                seed=seed,
                convergence_threshold=s["convergence_threshold"],
                convergence_window=s["convergence_window"],
            )
        except (ValueError, ConsensusLabError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(str(exc)) from exc
