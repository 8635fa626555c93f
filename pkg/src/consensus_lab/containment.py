"""Multi-leader containment: convex-combination weights and verification."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RowStochasticViolation, SingularL1
from .graph import LaplacianPartition
from .sim import Trajectory
from .spectra import TOL_POSITIVE, eigenvalues

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContainmentAnalysis:
    """``W = -L1^{-1} L2`` (followers x leaders); each row is a convex combination."""

    W: np.ndarray
    L1: np.ndarray

    @property
    def leader_count(self) -> int:
        return self.W.shape[1]

    def hull_target(self, x_leaders: np.ndarray) -> np.ndarray:
        """Follower targets ``(W (x) I_n) x_leaders``; shape (followers, n)."""
        x_leaders = np.asarray(x_leaders, dtype=float)
        return self.W @ x_leaders.reshape(self.leader_count, -1)


@dataclass(frozen=True)
class ContainmentReport:
    final_distance: float
    final_zeta_inf: float
    achieved: bool
    per_sample_distance: np.ndarray
    threshold: float

    def to_dict(self, with_samples: bool = True) -> dict:
        out = {
            "final_distance": self.final_distance,
            "final_zeta_inf": self.final_zeta_inf,
            "achieved": self.achieved,
            "threshold": self.threshold,
        }
        if with_samples:
            out["per_sample_distance"] = self.per_sample_distance.tolist()
        return out


def containment_weights(lp: LaplacianPartition) -> ContainmentAnalysis:
    L1, L2 = lp.L1, lp.L2
    if L1.shape[0] == 0:
        return ContainmentAnalysis(np.zeros((0, L2.shape[1])), L1)
    if np.min(eigenvalues(L1).real) <= TOL_POSITIVE:
        raise SingularL1("some follower is unreachable from every leader")
    if lp.leader_count > 1 and lp.follower_count < 2:
        log.warning("multi-leader setting with a single follower; analysis proceeds anyway")
    try:
        W = -np.linalg.solve(L1, L2)
    except np.linalg.LinAlgError as exc:
        raise SingularL1(str(exc)) from exc
    if np.min(W) < -1e-12 or np.max(np.abs(W.sum(axis=1) - 1.0)) > 1e-10:
        raise RowStochasticViolation(
            f"W is not row stochastic: min entry {np.min(W):.3e}, "
            f"worst row-sum error {np.max(np.abs(W.sum(axis=1) - 1.0)):.3e}"
        )
    return ContainmentAnalysis(W, L1)


def verify_containment(
    analysis: ContainmentAnalysis, trajectory: Trajectory, threshold: float = 1e-3
) -> ContainmentReport:
    """Distance ``max |x_followers(t) - hull_target(t)|`` at every sample."""
    m = analysis.leader_count
    S, N, n = trajectory.states.shape
    if N != m + analysis.W.shape[0]:
        raise DimensionMismatch(f"trajectory has {N} agents, analysis expects {m + analysis.W.shape[0]}")
    leaders = trajectory.states[:, :m, :]
    followers = trajectory.states[:, m:, :]
    targets = np.einsum("fl,sln->sfn", analysis.W, leaders)
    gap = followers - targets
    dist = np.max(np.abs(gap), axis=(1, 2)) if gap.size else np.zeros(S)
    # zeta = (L1 (x) I)(x_F - target) because L2 = -L1 W
    zeta = np.einsum("fg,sgn->sfn", analysis.L1, gap[-1:])
    zinf = float(np.max(np.abs(zeta))) if zeta.size else 0.0
    final = float(dist[-1])
    return ContainmentReport(
        final_distance=final,
        final_zeta_inf=zinf,
        achieved=bool(final <= threshold),
        per_sample_distance=dist,
        threshold=threshold,
    )
