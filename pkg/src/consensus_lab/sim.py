"""Closed-loop integration of leader/follower networks with Lyapunov monitoring.

The integrated state packs ``[leader states..., follower states..., weights...]``
with each agent's ``n`` components contiguous. Leaders apply zero input.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .design import GainDesign, SystemDynamics
from .errors import AssumptionViolation, DimensionMismatch, NonFiniteState, WrongExponent
from .graph import DirectedGraph, build_laplacian, check_assumption
from .ode import rk4_span, rkf45_span
from .protocols import ADAPTIVE, ClosedLoop, ConsensusError, ProtocolConfig
from .spectra import analyze_m_matrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntegratorSettings:
    method: str = "rk4"
    step: float = 1e-3
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    min_step: float = 1e-12
    max_step: float | None = None

    def __post_init__(self):
        if self.method not in ("rk4", "rkf45"):
            raise ValueError(f"unknown integrator {self.method!r}")
        if not self.step > 0:
            raise ValueError("step must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Scenario:
    """Everything needed for one deterministic run.

    ``x0`` has shape ``(node_count, n)`` in internal (leaders-first) order.
    """

    sys: SystemDynamics
    graph: DirectedGraph
    protocol: ProtocolConfig
    x0: np.ndarray
    t_end: float
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    sample_interval: float = 0.01
    seed: int = 0
    convergence_threshold: float = 1e-10
    convergence_window: int = 100
    monitor_lyapunov: bool = True

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        if x0.ndim == 1:
            x0 = x0.reshape(self.graph.node_count, -1)
        if x0.shape != (self.graph.node_count, self.sys.n):
            raise DimensionMismatch(
                f"x0 must have shape {(self.graph.node_count, self.sys.n)}, got {x0.shape}"
            )
        object.__setattr__(self, "x0", x0)
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if not self.sample_interval > 0:
            raise ValueError("sample_interval must be positive")
        if self.protocol.kind == ADAPTIVE and len(self.protocol.c_init) != self.graph.follower_count:
            raise DimensionMismatch("c_init needs one entry per follower")
        if self.protocol.gains.K.shape != (self.sys.p, self.sys.n):
            raise DimensionMismatch("gain K does not match the dynamics")

    @property
    def adaptive(self) -> bool:
        return self.protocol.kind == ADAPTIVE

    @cached_property
    def loop(self) -> ClosedLoop:
        return ClosedLoop(self.graph, self.protocol)

    def pack(self, x: np.ndarray, c: np.ndarray | None = None) -> np.ndarray:
        parts = [np.asarray(x, dtype=float).reshape(-1)]
        if self.adaptive:
            parts.append(np.asarray(c, dtype=float))
        return np.concatenate(parts)

    def unpack(self, y: np.ndarray):
        k = self.graph.node_count * self.sys.n
        x = y[:k].reshape(self.graph.node_count, self.sys.n)
        c = y[k:] if self.adaptive else None
        return x, c

    def initial_vector(self) -> np.ndarray:
        return self.pack(self.x0, self.protocol.c_init)


def rhs(scenario: Scenario, t: float, y: np.ndarray) -> np.ndarray:
    """Time derivative of the packed state."""
    x, c = scenario.unpack(y)
    if not np.all(np.isfinite(y)):
        raise NonFiniteState(f"non-finite state at t={t:.6g}")
    A, B = scenario.sys.A, scenario.sys.B
    m = scenario.graph.leader_count
    dx = np.empty_like(x)
    dx[:m] = x[:m] @ A.T
    if x.shape[0] > m:
        # overflow in a trial stage is reported below as NonFiniteState
        with np.errstate(over="ignore", invalid="ignore"):
            _, u, cdot = scenario.loop.inputs(x, c)
            dx[m:] = x[m:] @ A.T + u @ B.T
    else:
        cdot = np.zeros(0) if scenario.adaptive else None
    out = dx.reshape(-1)
    if scenario.adaptive:
        out = np.concatenate([out, cdot])
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(f"non-finite derivative at t={t:.6g}")
    return out


def xi_dynamics(scenario: Scenario, xi: np.ndarray, c: np.ndarray | None = None) -> np.ndarray:
    """Right side of the error dynamics written purely in terms of ``xi``:
    ``[I (x) A + L1 C rho(xi) (x) B K] xi``, with ``C = c I`` for the static law.
    """
    lp = build_laplacian(scenario.graph)
    gains = scenario.protocol.gains
    xi = np.asarray(xi, dtype=float).reshape(lp.follower_count, scenario.sys.n)
    if scenario.adaptive:
        scale = np.asarray(c) * (1.0 + gains.quadratic(xi)) ** scenario.protocol.rho_exponent
    else:
        scale = np.full(lp.follower_count, scenario.protocol.c)
    eye = np.eye(lp.follower_count)
    M = np.kron(eye, scenario.sys.A) + np.kron(lp.L1 @ np.diag(scale), scenario.sys.B @ gains.K)
    return M @ xi.reshape(-1)


@dataclass(frozen=True)
class LyapunovConstants:
    q: np.ndarray
    G: np.ndarray
    lambda0_hat: float
    alpha_hat: float
    alpha: float


def lyapunov_constants(L1: np.ndarray) -> LyapunovConstants:
    """Smallest constants satisfying the sufficient conditions of the
    stability argument: ``sqrt(alpha_hat) * lambda0_hat / q_i >= 6`` and
    ``alpha = alpha_hat + max_i 2 q_i^3 / lambda0_hat^3``.
    """
    mm = analyze_m_matrix(L1)
    lam0, q = mm.lambda0_hat, mm.q
    alpha_hat = float(np.max((6.0 * q / lam0) ** 2))
    alpha = alpha_hat + float(np.max(2.0 * q**3 / lam0**3))
    return LyapunovConstants(q=q, G=mm.G, lambda0_hat=lam0, alpha_hat=alpha_hat, alpha=alpha)


def lyapunov_value(
    constants: LyapunovConstants, gains: GainDesign, err: ConsensusError, c: np.ndarray, exponent: int = 3
) -> float:
    """``V1 = sum_i c_i q_i / 2 * F(s_i) + lambda0_hat / 24 * sum_i (c_i - alpha)^2``
    with ``s_i = xi_i^T Q xi_i`` and ``F(x) = ((1 + x)^4 - 1) / 4``.
    """
    if exponent != 3:
        raise WrongExponent(f"closed-form Lyapunov value needs exponent 3, got {exponent}")
    s = err.per_follower_quadratic
    if s is None:
        s = gains.quadratic(err.xi)
    c = np.asarray(c, dtype=float)
    F = ((1.0 + s) ** 4 - 1.0) / 4.0
    return float(
        np.sum(0.5 * c * constants.q * F) + constants.lambda0_hat / 24.0 * np.sum((c - constants.alpha) ** 2)
    )


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    weights: np.ndarray | None
    error_norm: np.ndarray
    lyapunov: np.ndarray | None
    terminated_early: bool = False
    reason: str = ""
    warnings: list[str] = field(default_factory=list)
    labels: tuple[int, ...] = ()
    followers: tuple[int, ...] = ()
    leader_count: int = 1

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def to_csv(self) -> str:
        """CSV text; floats carry 17 significant digits."""
        S, N, n = self.states.shape
        head = ["t"] + [f"x_{a}_{k}" for a in self.labels for k in range(n)]
        if self.weights is not None:
            head += [f"c_{f}" for f in self.followers]
        head += ["err_norm", "V1"]
        buf = io.StringIO()
        buf.write(",".join(head) + "\n")
        fmt = lambda v: format(float(v), ".17g")
        for k in range(S):
            row = [fmt(self.times[k])] + [fmt(v) for v in self.states[k].reshape(-1)]
            if self.weights is not None:
                row += [fmt(v) for v in self.weights[k]]
            row.append(fmt(self.error_norm[k]))
            row.append(fmt(self.lyapunov[k]) if self.lyapunov is not None else "")
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def _sample_times(t_end: float, dt: float) -> np.ndarray:
    count = int(np.ceil(t_end / dt - 1e-9))
    times = np.minimum(np.arange(count + 1) * dt, t_end)
    return times if count > 0 else np.zeros(1)


def integrate(scenario: Scenario) -> Trajectory:
    """Integrate the closed loop and record samples every ``sample_interval``.

    Stops early (flagged) once the error norm stays below
    ``convergence_threshold`` for ``convergence_window`` consecutive samples.
    """
    g = scenario.graph
    report = check_assumption(g)
    if not report.satisfied:
        raise AssumptionViolation(report.unreachable)

    f = lambda t, y: rhs(scenario, t, y)
    nx = g.node_count * scenario.sys.n
    adaptive = scenario.adaptive
    gains = scenario.protocol.gains

    def clamp(y):
        if adaptive:
            y[nx:] = np.maximum(y[nx:], 1.0)
        return y

    constants = None
    if adaptive and scenario.monitor_lyapunov and g.follower_count and scenario.protocol.rho_exponent == 3:
        constants = lyapunov_constants(build_laplacian(g).L1)

    times = _sample_times(scenario.t_end, scenario.sample_interval)
    settings = scenario.integrator
    h = settings.step
    max_step = settings.max_step or scenario.sample_interval

    y = scenario.initial_vector()
    rec_t, rec_x, rec_c, rec_e, rec_v = [], [], [], [], []
    warnings: list[str] = []
    below = 0
    terminated, reason = False, ""
    v0 = None

    for k, t in enumerate(times):
        if k > 0:
            t_prev = times[k - 1]
            if settings.method == "rk4":
                y = rk4_span(f, t_prev, t, y, settings.step, post=clamp)
            else:
                y, h = rkf45_span(
                    f, t_prev, t, y, h, settings.rel_tol, settings.abs_tol, settings.min_step, max_step, post=clamp
                )
        x, c = scenario.unpack(y)
        err = scenario.loop.error(x) if g.follower_count else ConsensusError(np.zeros((0, scenario.sys.n)))
        rec_t.append(t)
        rec_x.append(x.copy())
        if adaptive:
            rec_c.append(c.copy())
        rec_e.append(err.norm)
        if constants is not None:
            v = lyapunov_value(constants, gains, err, c)
            if v0 is None:
                v0 = v
            elif v > rec_v[-1] + 1e-7 * (t - rec_t[-2]) * max(1.0, v0):
                warnings.append(
                    f"V1 increased by {v - rec_v[-1]:.3e} between t={rec_t[-2]:.6g} and t={t:.6g}"
                )
            rec_v.append(v)
        below = below + 1 if err.norm < scenario.convergence_threshold else 0
        if g.follower_count and below >= scenario.convergence_window and k < len(times) - 1:
            terminated, reason = True, (
                f"error norm below {scenario.convergence_threshold:g} for {below} consecutive samples"
            )
            break

    return Trajectory(
        times=np.array(rec_t),
        states=np.array(rec_x),
        weights=np.array(rec_c) if adaptive else None,
        error_norm=np.array(rec_e),
        lyapunov=np.array(rec_v) if constants is not None else None,
        terminated_early=terminated,
        reason=reason,
        warnings=warnings,
        labels=g.order,
        followers=g.followers,
        leader_count=g.leader_count,
    )
