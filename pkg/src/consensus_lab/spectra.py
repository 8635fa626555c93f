"""Spectral and M-matrix analysis of the follower Laplacian block."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, SingularL1
from .graph import LaplacianPartition

TOL_HURWITZ = 1e-9
TOL_POSITIVE = 1e-9


def eigenvalues(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"square matrix expected, got shape {m.shape}")
    if m.size == 0:
        return np.zeros(0, dtype=complex)
    try:
        return np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue iteration did not converge: {exc}") from exc


def sym_eigenvalues(s: np.ndarray) -> np.ndarray:
    """Eigenvalues of the symmetric part ``(s + s.T) / 2``, ascending."""
    s = np.asarray(s, dtype=float)
    try:
        return np.linalg.eigvalsh(0.5 * (s + s.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"symmetric eigensolver failed: {exc}") from exc


def hurwitz(m: np.ndarray, tol: float = TOL_HURWITZ) -> bool:
    """True iff every eigenvalue of ``m`` has real part below ``-tol``."""
    return bool(np.all(eigenvalues(m).real < -tol))


def hurwitz_margin(m: np.ndarray) -> float:
    """Distance of the rightmost eigenvalue from the imaginary axis (positive = stable)."""
    return float(-np.max(eigenvalues(m).real))


@dataclass(frozen=True)
class MMatrixAnalysis:
    eigenvalues_L1: np.ndarray
    min_re_lambda: float
    q: np.ndarray
    G: np.ndarray
    lambda0_hat: float

    @property
    def coupling_threshold(self) -> float:
        """Smallest admissible common coupling weight for the static protocol."""
        return 1.0 / self.min_re_lambda

    def to_dict(self) -> dict:
        return {
            "eigenvalues_L1": [[float(z.real), float(z.imag)] for z in self.eigenvalues_L1],
            "min_re_lambda": self.min_re_lambda,
            "q": self.q.tolist(),
            "G": self.G.tolist(),
            "lambda0_hat": self.lambda0_hat,
        }


def scaled_symmetric_part(L1: np.ndarray, G: np.ndarray) -> np.ndarray:
    s = G @ L1 + L1.T @ G
    return 0.5 * (s + s.T)


def analyze_m_matrix(lp: LaplacianPartition | np.ndarray) -> MMatrixAnalysis:
    """Eigenvalues of L1, the diagonal scaling ``G = diag(q)`` with
    ``L1^T q = 1``, and the smallest eigenvalue of ``G L1 + L1^T G``.

    Raises :class:`SingularL1` when L1 is singular or has an eigenvalue
    with nonpositive real part, both of which mean some follower is not
    reachable from a leader.
    """
    L1 = np.asarray(lp.L1 if isinstance(lp, LaplacianPartition) else lp, dtype=float)
    if L1.ndim != 2 or L1.shape[0] != L1.shape[1] or L1.shape[0] == 0:
        raise ValueError(f"L1 must be a nonempty square matrix, got shape {L1.shape}")
    lam = eigenvalues(L1)
    min_re = float(np.min(lam.real))
    if min_re <= TOL_POSITIVE:
        raise SingularL1(f"L1 has an eigenvalue with real part {min_re:.3e} <= 0")
    try:
        q = np.linalg.solve(L1.T, np.ones(L1.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise SingularL1(str(exc)) from exc
    if not np.all(np.isfinite(q)) or np.any(q <= 0):
        raise SingularL1(f"q = (L1^T)^-1 1 is not entrywise positive: {q}")
    G = np.diag(q)
    lambda0_hat = float(sym_eigenvalues(scaled_symmetric_part(L1, G))[0])
    return MMatrixAnalysis(eigenvalues_L1=lam, min_re_lambda=min_re, q=q, G=G, lambda0_hat=lambda0_hat)


def laplacian_zero_eigen(L: np.ndarray, tol: float = 1e-8) -> tuple[int, np.ndarray]:
    """Count of eigenvalues with modulus below ``tol`` and the remaining eigenvalues."""
    lam = eigenvalues(L)
    small = np.abs(lam) < tol
    return int(small.sum()), lam[~small]
