"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL line
per criterion.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from consensus_lab.analysis import weight_convergence
from consensus_lab.containment import containment_weights, verify_containment
from consensus_lab.design import SystemDynamics, check_stabilizable, gains_from_P, solve_care, verify_lmi_certificate
from consensus_lab.graph import build_laplacian, check_assumption, random_graph
from consensus_lab.protocols import STATIC, ProtocolConfig, static_closed_loop_matrix
from consensus_lab.scenario import ScenarioFile
from consensus_lab.sim import IntegratorSettings, Scenario, integrate, lyapunov_constants
from consensus_lab.spectra import analyze_m_matrix, eigenvalues, hurwitz, laplacian_zero_eigen

from conftest import REF_GAMMA, REF_K, REF_P
from test_sim import adaptive_scenario, fd_xi_error, scalar_chain

SCEN = Path(__file__).resolve().parents[1] / "scenarios"


def verdict(number, ok, detail):
    print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def graph_population(seed=2024, count=100):
    rng = np.random.default_rng(seed)
    return [random_graph(rng, int(rng.integers(4, 11)), 1, float(rng.uniform(0.1, 0.4))) for _ in range(count)]


def test_criterion_01_reference_matrices(tri):
    t0 = time.perf_counter()
    cert = verify_lmi_certificate(tri, REF_P, tol=1e-2)
    d = gains_from_P(tri, REF_P)
    dk = float(np.max(np.abs(d.K - REF_K)))
    dg = float(np.max(np.abs(d.Gamma - REF_GAMMA)))
    ident = float(np.max(np.abs(d.Gamma - d.K.T @ d.K)))
    elapsed = time.perf_counter() - t0
    ok = cert.lambda_min_P > 0 and cert.lambda_max_lmi < 1e-2 and dk <= 5e-3 and dg <= 5e-3 and ident <= 1e-10
    verdict(1, ok and elapsed < 1.0,
            f"lambda_min(P)={cert.lambda_min_P:.4f}, lambda_max(LMI)={cert.lambda_max_lmi:.4f}, "
            f"|K-K_ref|={dk:.1e}, |Gamma-Gamma_ref|={dg:.1e}, |Gamma-K'K|={ident:.1e}, {elapsed:.3f}s")


def test_criterion_02_riccati_synthesis(tri):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20)
    systems = [tri]
    while len(systems) < 21:
        n, p = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        s = SystemDynamics(rng.normal(size=(n, n)), rng.normal(size=(n, p)))
        if check_stabilizable(s):
            systems.append(s)
    worst, ok = 0.0, True
    for s in systems:
        d = solve_care(s)
        worst = max(worst, d.residual)
        ok &= d.residual <= 1e-8 and np.linalg.eigvalsh(d.Q)[0] > 0 and hurwitz(s.A + s.B @ d.K)
    elapsed = time.perf_counter() - t0
    verdict(2, bool(ok) and elapsed < 5.0, f"21 systems, worst residual {worst:.2e}, {elapsed:.2f}s")


def test_criterion_03_diagonal_scaling():
    t0 = time.perf_counter()
    ok = True
    worst = np.inf
    for g in graph_population():
        assert check_assumption(g).satisfied
        a = analyze_m_matrix(build_laplacian(g))
        ok &= bool(np.all(a.q > 0) and a.lambda0_hat > 0)
        worst = min(worst, a.lambda0_hat)
    hand = analyze_m_matrix(np.array([[1.0, 0.0], [-1.0, 1.0]])).lambda0_hat
    dev = abs(hand - (3 - math.sqrt(2)))
    elapsed = time.perf_counter() - t0
    verdict(3, ok and dev <= 1e-10 and elapsed < 5.0,
            f"100 graphs, min lambda0_hat {worst:.3e}, 2x2 deviation {dev:.1e}, {elapsed:.2f}s")


def test_criterion_04_laplacian_spectrum():
    ok = True
    smallest_other = np.inf
    for g in graph_population():
        L = build_laplacian(g).L
        exact = bool(np.all(L @ np.ones(L.shape[0]) == 0))
        zeros, rest = laplacian_zero_eigen(L)
        mags = np.sort(np.abs(eigenvalues(L)))
        smallest_other = min(smallest_other, mags[1])
        ok &= exact and zeros == 1 and mags[1] > 1e-6 and bool(np.all(rest.real > 0))
    verdict(4, ok, f"100 graphs, L*1 == 0 exactly, simple zero, next |lambda| >= {smallest_other:.3e}")


def test_criterion_05_adaptive_reproduction():
    sf = ScenarioFile.load(SCEN / "triple_integrator_adaptive.json")
    sc = sf.build()
    t0 = time.perf_counter()
    traj = integrate(sc)
    elapsed = time.perf_counter() - t0
    xi_inf = float(np.max(np.abs(sc.loop.rows @ traj.states[-1])))
    nondecreasing = bool(np.all(np.diff(traj.weights, axis=0) >= -1e-9))
    drift, converged = weight_convergence(traj)
    v = traj.lyapunov
    tol = 1e-7 * np.diff(traj.times) * max(1.0, v[0])
    v_ok = bool(np.all(v[1:] <= v[:-1] + tol))
    ok = xi_inf < 1e-3 and nondecreasing and converged and v_ok and elapsed < 30.0
    verdict(5, ok,
            f"t_final={traj.t_final:g} (early stop: {traj.terminated_early}), |xi|_inf={xi_inf:.2e}, "
            f"c nondecreasing={nondecreasing}, max drift={drift.max():.1e}, V1 monotone={v_ok}, {elapsed:.1f}s")


def test_criterion_06_static_threshold(tri):
    sf = ScenarioFile.load(SCEN / "triple_integrator_static.json")
    sc = sf.build()
    L1 = build_laplacian(sc.graph).L1
    c = sc.protocol.c
    threshold = analyze_m_matrix(L1).coupling_threshold
    lifted = hurwitz(static_closed_loop_matrix(sc.sys, L1, sc.protocol.gains.K, c))
    traj = integrate(sc)
    ok = abs(c - threshold) <= 1e-12 * threshold and lifted and traj.error_norm[-1] < 1e-3
    verdict(6, ok, f"c={c:.4f} (=1/min Re lambda), lifted Hurwitz={lifted}, final |xi|={traj.error_norm[-1]:.2e}")


def test_criterion_07_containment():
    rng = np.random.default_rng(7)
    ok = True
    worst_neg, worst_sum = 0.0, 0.0
    for _ in range(50):
        g = random_graph(rng, int(rng.integers(2, 9)), int(rng.integers(2, 4)), float(rng.uniform(0.1, 0.4)))
        W = containment_weights(build_laplacian(g)).W
        worst_neg = min(worst_neg, float(W.min()))
        worst_sum = max(worst_sum, float(np.max(np.abs(W.sum(axis=1) - 1))))
    ok &= worst_neg >= -1e-12 and worst_sum <= 1e-10
    sc = ScenarioFile.load(SCEN / "containment_two_leaders.json").build()
    rep = verify_containment(containment_weights(build_laplacian(sc.graph)), integrate(sc))
    ok &= rep.final_distance <= 1e-3
    verdict(7, ok, f"50 graphs: min W {worst_neg:.1e}, row-sum error {worst_sum:.1e}; "
                   f"2-leader run final distance {rep.final_distance:.2e}")


def test_criterion_08_xi_dynamics(tri, tri_design):
    rng = np.random.default_rng(77)
    worst = 0.0
    for trial in range(10):
        g = random_graph(rng, int(rng.integers(2, 6)), 1, 0.3)
        sc = adaptive_scenario(tri, tri_design, g, 100 + trial, scale=2e-4)
        worst = max(worst, fd_xi_error(sc, 1e-4)[0])
    verdict(8, worst <= 1e-6, f"10 scenarios, max |FD - rhs| = {worst:.2e} (step 1e-4)")


def test_criterion_09_rk4_order():
    exact = math.exp(-1.0)
    e1 = abs(integrate(scalar_chain(0.1)).states[-1, 1, 0] - exact)
    e2 = abs(integrate(scalar_chain(0.05)).states[-1, 1, 0] - exact)
    fine = abs(integrate(scalar_chain(1e-3)).states[-1, 1, 0] - exact)
    ratio = e1 / e2
    verdict(9, 12 <= ratio <= 20 and fine <= 1e-9, f"halving ratio {ratio:.2f}, error at h=1e-3 {fine:.1e}")


@pytest.mark.parametrize("name", ["triple_integrator_adaptive", "containment_two_leaders", "triple_integrator_static"])
def test_criterion_10_determinism(name):
    doc = ScenarioFile.load(SCEN / f"{name}.json").to_dict()
    doc["sim"]["t_end"] = 2.0
    a = integrate(ScenarioFile(doc).build()).to_csv()
    b = integrate(ScenarioFile(doc).build()).to_csv()
    verdict(10, a.encode() == b.encode(), f"{name}: two runs, {len(a)} bytes, identical={a == b}")
