"""Explicit Runge-Kutta steppers: classical RK4 and embedded Fehlberg 4(5)."""

from __future__ import annotations

import numpy as np

from .errors import StepUnderflow, TrialStepFailure

# Fehlberg tableau
_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])


def rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_span(f, t0, t1, y, h, post=None):
    """Advance from ``t0`` to ``t1`` with equal RK4 steps no longer than ``h``.

    ``post`` (if given) is applied to the state after every step.
    """
    span = t1 - t0
    if span <= 0:
        return y
    m = max(1, int(np.ceil(span / h - 1e-9)))
    hs = span / m
    for k in range(m):
        y = rk4_step(f, t0 + k * hs, y, hs)
        if post is not None:
            y = post(y)
    return y


def rkf45_step(f, t, y, h):
    """One Fehlberg step; returns the 5th-order solution and the error estimate."""
    ks = []
    for i in range(6):
        yi = y
        for a, k in zip(_A[i], ks):
            yi = yi + h * a * k
        ks.append(f(t + _C[i] * h, yi))
    ks = np.array(ks)
    y5 = y + h * (_B5 @ ks)
    err = h * ((_B5 - _B4) @ ks)
    return y5, err


def rkf45_span(f, t0, t1, y, h, rel_tol, abs_tol, min_step, max_step, post=None):
    """Adaptive integration from ``t0`` to ``t1``, landing exactly on ``t1``.

    Returns ``(y, h_next)`` so the caller can carry the step size across
    consecutive spans.
    """
    t = t0
    h = min(h, max_step)
    while t1 - t > 1e-14 * max(1.0, abs(t1)):
        last = h >= t1 - t
        step = t1 - t if last else h
        try:
            y_new, err = rkf45_step(f, t, y, step)
        except TrialStepFailure:
            # an overlong trial step produced an invalid stage; treat as rejected
            y_new, ratio = y, np.inf
        else:
            scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            ratio = float(np.max(np.abs(err) / scale)) if err.size else 0.0
            if not np.isfinite(ratio):
                ratio = np.inf
        if ratio <= 1.0:
            t = t1 if last else t + step
            y = post(y_new) if post is not None else y_new
        factor = 5.0 if ratio == 0 else min(5.0, max(0.1, 0.9 * ratio ** -0.2))
        h_new = min(max_step, step * factor)
        if ratio > 1.0 and h_new < min_step:
            raise StepUnderflow(f"adaptive step {h_new:.3e} fell below min_step {min_step:.3e} at t={t:.6g}")
        if ratio <= 1.0 and last:
            # do not let a short final step shrink the carried step size
            h_new = max(h_new, h)
        h = h_new
    return y, h
