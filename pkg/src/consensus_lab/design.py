"""Gain synthesis from the agent dynamics alone.

Gains are obtained from the Riccati equation ``A^T Q + Q A + I - Q B B^T Q = 0``
solved by Newton-Kleinman iteration. The LMI ``A P + P A^T - 2 B B^T < 0``
is only checked, never solved; a user-supplied ``P`` (for instance one
rounded to a few decimals) can be turned into gains with :func:`gains_from_P`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NewtonDivergence, NotStabilizable, SingularP
from .spectra import eigenvalues, hurwitz, hurwitz_margin, sym_eigenvalues

log = logging.getLogger(__name__)

RESIDUAL_TARGET = 1e-10
RESIDUAL_ACCEPT = 1e-8
MAX_NEWTON_ITER = 100
KRONECKER_MAX_N = 10


@dataclass(frozen=True)
class SystemDynamics:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"B must have {A.shape[0]} rows, got {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @classmethod
    def from_dict(cls, doc: dict) -> "SystemDynamics":
        return cls(np.array(doc["A"], dtype=float), np.array(doc["B"], dtype=float))

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist()}


def triple_integrator() -> SystemDynamics:
    """Third-order integrator used in the reference simulation example."""
    return SystemDynamics(np.diag([1.0, 1.0], 1), np.array([[0.0], [0.0], [1.0]]))


@dataclass(frozen=True)
class GainDesign:
    """Protocol gains. ``Q`` plays the role of ``P^{-1}``."""

    Q: np.ndarray
    K: np.ndarray
    Gamma: np.ndarray
    residual: float
    iterations: int = 0
    history: tuple[float, ...] = field(default=(), repr=False)

    @cached_property
    def P(self) -> np.ndarray:
        return np.linalg.inv(self.Q)

    @cached_property
    def q_factor(self) -> np.ndarray:
        """Upper factor ``M`` with ``Q = M^T M``, so ``x^T Q x = |M x|^2``."""
        return np.linalg.cholesky(self.Q).T

    def quadratic(self, xi: np.ndarray) -> np.ndarray:
        """Row-wise ``xi_i^T Q xi_i`` for ``xi`` of shape (followers, n)."""
        y = np.atleast_2d(xi) @ self.q_factor.T
        return np.einsum("ij,ij->i", y, y)

    def to_dict(self, sys: SystemDynamics | None = None) -> dict:
        out = {
            "Q": self.Q.tolist(),
            "P": self.P.tolist(),
            "K": self.K.tolist(),
            "Gamma": self.Gamma.tolist(),
            "residual": self.residual,
            "iterations": self.iterations,
        }
        if sys is not None:
            out["hurwitz_margin"] = hurwitz_margin(sys.A + sys.B @ self.K)
        return out


@dataclass(frozen=True)
class CertificateReport:
    lambda_max_lmi: float
    lambda_min_P: float
    tol: float
    holds: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def riccati_residual(sys: SystemDynamics, Q: np.ndarray) -> float:
    A, B = sys.A, sys.B
    R = A.T @ Q + Q @ A + np.eye(sys.n) - Q @ B @ B.T @ Q
    return float(np.linalg.norm(R, "fro"))


def solve_lyapunov(F: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Solve ``F^T X + X F + C = 0`` for ``X``.

    Small problems use the vectorized Kronecker system; larger ones fall
    back to Bartels-Stewart.
    """
    n = F.shape[0]
    if n <= KRONECKER_MAX_N:
        eye = np.eye(n)
        op = np.kron(eye, F.T) + np.kron(F.T, eye)
        x = np.linalg.solve(op, -C.reshape(-1, order="F"))
        X = x.reshape(n, n, order="F")
    else:
        X = scipy.linalg.solve_continuous_lyapunov(F.T, -C)
    return 0.5 * (X + X.T)


def check_stabilizable(sys: SystemDynamics) -> bool:
    """PBH test on every eigenvalue of ``A`` that is not strictly stable.

    Eigenvalues with real part above ``-1e-6`` are tested, which covers
    defective zero eigenvalues perturbed by roundoff.
    """
    A, B = sys.A, sys.B
    n = sys.n
    for lam in eigenvalues(A):
        if lam.real < -1e-6:
            continue
        s = np.linalg.svd(np.hstack([A - lam * np.eye(n), B.astype(complex)]), compute_uv=False)
        if np.sum(s > 1e-9 * s[0]) < n:
            return False
    return True


def _hamiltonian_stabilizing(sys: SystemDynamics) -> np.ndarray:
    A, B = sys.A, sys.B
    n = sys.n
    H = np.block([[A, -B @ B.T], [-np.eye(n), -A.T]])
    _, U, sdim = scipy.linalg.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise NotStabilizable(f"Hamiltonian has {sdim} stable eigenvalues, expected {n}")
    X = np.linalg.solve(U[:n, :n].T, U[n:, :n].T).T
    return 0.5 * (X + X.T)


def initial_gain(sys: SystemDynamics) -> np.ndarray:
    """Stabilizing starting gain for Newton-Kleinman.

    Zero when ``A`` is already Hurwitz; otherwise ``-B^T W^{-1}`` with ``W``
    the Gramian of the shifted anti-stable pair, which places every
    closed-loop eigenvalue left of ``-sigma``. When that Gramian is
    singular (uncontrollable but stabilizable pairs) the stable invariant
    subspace of the Hamiltonian is used instead.
    """
    A, B = sys.A, sys.B
    n = sys.n
    if hurwitz(A):
        return np.zeros((sys.p, n))
    sigma = max(0.0, float(np.max(eigenvalues(A).real))) + 1.0
    shifted = A + sigma * np.eye(n)
    W = solve_lyapunov(-shifted.T, 2.0 * B @ B.T)
    if np.linalg.cond(W) < 1e12:
        K0 = -np.linalg.solve(W, B).T
        if hurwitz(A + B @ K0):
            return K0
    log.debug("Gramian bootstrap failed; using Hamiltonian stable subspace")
    return -B.T @ _hamiltonian_stabilizing(sys)


def solve_care(sys: SystemDynamics, max_iter: int = MAX_NEWTON_ITER) -> GainDesign:
    """Riccati synthesis: ``K = -B^T Q`` and ``Gamma = Q B B^T Q``."""
    if not check_stabilizable(sys):
        raise NotStabilizable("(A, B) fails the PBH stabilizability test")
    A, B = sys.A, sys.B
    n = sys.n
    K = initial_gain(sys)
    history: list[float] = []
    best_Q, best_res = None, np.inf
    for _ in range(max_iter):
        Acl = A + B @ K
        Q = solve_lyapunov(Acl, np.eye(n) + K.T @ K)
        res = riccati_residual(sys, Q)
        history.append(res)
        if res < best_res:
            best_Q, best_res = Q, res
        K = -B.T @ Q
        if res <= RESIDUAL_TARGET:
            break
        # at the roundoff floor the quadratic convergence stops
        if len(history) > 1 and res <= RESIDUAL_ACCEPT and res > 0.5 * history[-2]:
            break
    if best_Q is None or best_res > RESIDUAL_ACCEPT:
        raise NewtonDivergence(
            f"Riccati residual stagnated at {best_res:.3e} after {len(history)} iterations", history
        )
    Q = best_Q
    K = -B.T @ Q
    if sym_eigenvalues(Q)[0] <= 0 or not hurwitz(A + B @ K):
        raise NewtonDivergence("Newton iterate is not a stabilizing positive definite solution", history)
    return GainDesign(Q=Q, K=K, Gamma=K.T @ K, residual=best_res, iterations=len(history), history=tuple(history))


def _symmetric(P: np.ndarray, n: int) -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape != (n, n):
        raise DimensionMismatch(f"P must be {n}x{n}, got {P.shape}")
    if not np.allclose(P, P.T, rtol=1e-8, atol=1e-10):
        raise ValueError("P must be symmetric")
    return 0.5 * (P + P.T)


def verify_lmi_certificate(sys: SystemDynamics, P: np.ndarray, tol: float = -1e-6) -> CertificateReport:
    """Check ``P > 0`` and ``A P + P A^T - 2 B B^T < tol``.

    The default ``tol`` demands strict negativity with a margin; externally supplied
    matrices rounded to a few decimals are checked with a positive slack.
    """
    P = _symmetric(P, sys.n)
    M = sys.A @ P + P @ sys.A.T - 2.0 * sys.B @ sys.B.T
    lam_max = float(sym_eigenvalues(M)[-1])
    lam_min = float(sym_eigenvalues(P)[0])
    return CertificateReport(lam_max, lam_min, tol, bool(lam_min > 0 and lam_max < tol))


def closed_loop_certificate(sys: SystemDynamics, design: GainDesign) -> float:
    """Largest eigenvalue of ``A^T Q + Q A - 2 Q B B^T Q`` (negative for valid designs)."""
    Q = design.Q
    M = sys.A.T @ Q + Q @ sys.A - 2.0 * Q @ sys.B @ sys.B.T @ Q
    return float(sym_eigenvalues(M)[-1])


def gains_from_P(sys: SystemDynamics, P: np.ndarray) -> GainDesign:
    """Gains from an LMI solution: ``K = -B^T P^{-1}``, ``Gamma = K^T K``."""
    P = _symmetric(P, sys.n)
    try:
        Q = np.linalg.solve(P, np.eye(sys.n))
    except np.linalg.LinAlgError as exc:
        raise SingularP(str(exc)) from exc
    if not np.all(np.isfinite(Q)) or sym_eigenvalues(P)[0] <= 0:
        raise SingularP("P must be positive definite")
    Q = 0.5 * (Q + Q.T)
    K = -sys.B.T @ Q
    return GainDesign(Q=Q, K=K, Gamma=K.T @ K, residual=riccati_residual(sys, Q))
