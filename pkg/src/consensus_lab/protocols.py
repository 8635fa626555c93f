"""Control laws: the static and adaptive consensus protocols.

States are arrays of shape ``(node_count, n)`` in the graph's internal
order (leaders first). Both protocols act on the neighborhood error
``xi_i = sum_j a_ij (x_i - x_j)`` where ``j`` ranges over leaders and
followers alike.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .design import GainDesign
from .errors import DimensionMismatch, NegativeArgument, WeightBelowOne, WrongKind
from .graph import DirectedGraph, build_laplacian

STATIC = "static"
ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class ProtocolConfig:
    kind: str
    gains: GainDesign
    c: float | None = None
    c_init: tuple[float, ...] | None = None
    rho_exponent: int = 3

    def __post_init__(self):
        if self.kind == STATIC:
            if self.c is None or not self.c > 0:
                raise ValueError(f"static protocol needs a coupling weight c > 0, got {self.c}")
        elif self.kind == ADAPTIVE:
            if self.c_init is None:
                raise ValueError("adaptive protocol needs initial weights c_init")
            c0 = tuple(float(v) for v in self.c_init)
            if any(v < 1.0 for v in c0):
                raise WeightBelowOne(f"initial coupling weights must be >= 1, got {c0}")
            object.__setattr__(self, "c_init", c0)
        else:
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if int(self.rho_exponent) != self.rho_exponent or self.rho_exponent < 1:
            raise ValueError(f"rho_exponent must be a positive integer, got {self.rho_exponent}")


@dataclass(frozen=True)
class ConsensusError:
    """Per-follower neighborhood error, shape (followers, n).

    With one leader this is the consensus error; with several it is the
    containment error. ``per_follower_quadratic`` holds ``xi_i^T Q xi_i``
    when gains were supplied.
    """

    xi: np.ndarray
    per_follower_quadratic: np.ndarray | None = None

    @property
    def stacked(self) -> np.ndarray:
        return self.xi.reshape(-1)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.xi))


def _as_states(g: DirectedGraph, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.size % g.node_count:
            raise DimensionMismatch(f"state length {x.size} is not a multiple of {g.node_count}")
        x = x.reshape(g.node_count, -1)
    if x.ndim != 2 or x.shape[0] != g.node_count:
        raise DimensionMismatch(f"expected {g.node_count} agent states, got shape {x.shape}")
    return x


def consensus_error(g: DirectedGraph, x: np.ndarray, gains: GainDesign | None = None) -> ConsensusError:
    """Neighborhood sums ``xi_i = sum_j a_ij (x_i - x_j)`` over incoming edges."""
    x = _as_states(g, x)
    pos = g.position
    m = g.leader_count
    xi = np.zeros((g.follower_count, x.shape[1]))
    for j, i, w in g.edges:
        xi[pos[i] - m] += w * (x[pos[i]] - x[pos[j]])
    quad = gains.quadratic(xi) if gains is not None else None
    return ConsensusError(xi, quad)


def consensus_error_kron(g: DirectedGraph, x: np.ndarray) -> np.ndarray:
    """Stacked error via the Laplacian blocks: ``(L2 (x) I) x_leaders + (L1 (x) I) x_followers``.

    With a single leader this equals ``(L1 (x) I)(x_followers - 1 (x) x_0)``.
    """
    x = _as_states(g, x)
    lp = build_laplacian(g)
    n = x.shape[1]
    m = g.leader_count
    eye = np.eye(n)
    return np.kron(lp.L2, eye) @ x[:m].reshape(-1) + np.kron(lp.L1, eye) @ x[m:].reshape(-1)


def rho(s, exponent: int = 3):
    """Gain amplifier ``(1 + s) ** exponent``; ``rho(0) = 1``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise NegativeArgument(f"rho is defined for s >= 0, got {s}")
    out = (1.0 + s_arr) ** exponent
    return float(out) if out.ndim == 0 else out


def control_static(cfg: ProtocolConfig, err: ConsensusError) -> np.ndarray:
    """``u_i = c K xi_i``; returns shape (followers, p)."""
    if cfg.kind != STATIC:
        raise WrongKind(f"control_static called with a {cfg.kind} protocol")
    return cfg.c * err.xi @ cfg.gains.K.T


def control_adaptive(
    cfg: ProtocolConfig, err: ConsensusError, c: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive law: inputs ``c_i rho(xi_i^T Q xi_i) K xi_i`` and rates ``xi_i^T Gamma xi_i``."""
    if cfg.kind != ADAPTIVE:
        raise WrongKind(f"control_adaptive called with a {cfg.kind} protocol")
    c = np.asarray(c, dtype=float)
    if np.any(c < 1.0):
        raise WeightBelowOne(f"coupling weights dropped below 1: {c}")
    gains = cfg.gains
    quad = err.per_follower_quadratic
    if quad is None:
        quad = gains.quadratic(err.xi)
    Kxi = err.xi @ gains.K.T
    u = (c * rho(quad, cfg.rho_exponent))[:, None] * Kxi
    # xi^T Gamma xi = |K xi|^2 since Gamma = K^T K
    cdot = np.einsum("ij,ij->i", Kxi, Kxi)
    return u, cdot


def static_closed_loop_matrix(sys, L1: np.ndarray, K: np.ndarray, c: float) -> np.ndarray:
    """Error dynamics matrix ``I (x) A + c L1 (x) B K`` of the static protocol."""
    return np.kron(np.eye(L1.shape[0]), sys.A) + c * np.kron(L1, sys.B @ K)


@dataclass(frozen=True)
class ClosedLoop:
    """Precomputed matrices for fast evaluation of the closed loop.

    ``rows`` is the follower block ``[L2 L1]`` of the Laplacian, so
    ``rows @ x`` gives every ``xi_i`` at once.
    """

    graph: DirectedGraph
    protocol: ProtocolConfig

    @cached_property
    def rows(self) -> np.ndarray:
        lp = build_laplacian(self.graph)
        return lp.L[lp.leader_count :, :]

    def error(self, x: np.ndarray) -> ConsensusError:
        xi = self.rows @ x
        return ConsensusError(xi, self.protocol.gains.quadratic(xi))

    def inputs(self, x: np.ndarray, c: np.ndarray | None = None):
        err = self.error(x)
        if self.protocol.kind == STATIC:
            return err, control_static(self.protocol, err), None
        u, cdot = control_adaptive(self.protocol, err, c)
        return err, u, cdot
