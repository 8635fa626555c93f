import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from consensus_lab.errors import SingularL1
from consensus_lab.graph import DirectedGraph, build_laplacian, random_graph
from consensus_lab.spectra import analyze_m_matrix, hurwitz, laplacian_zero_eigen, scaled_symmetric_part


def test_two_by_two_hand_case():
    a = analyze_m_matrix(np.array([[1.0, 0.0], [-1.0, 1.0]]))
    np.testing.assert_allclose(a.eigenvalues_L1, [1, 1], atol=1e-9)
    assert a.min_re_lambda == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(a.q, [2, 1], atol=1e-12)
    np.testing.assert_allclose(scaled_symmetric_part(np.array([[1.0, 0], [-1, 1]]), a.G), [[4, -1], [-1, 2]], atol=1e-12)
    # characteristic polynomial of [[4,-1],[-1,2]]: l^2 - 6l + 7
    assert a.lambda0_hat == pytest.approx(3 - math.sqrt(2), abs=1e-10)


@pytest.mark.parametrize("c", [0.3, 1.0, 2.7])
def test_scalar_case(c):
    a = analyze_m_matrix(np.array([[c]]))
    np.testing.assert_allclose(a.q, [1 / c])
    assert a.lambda0_hat == pytest.approx(2.0, abs=1e-12)


def test_random_m_matrices_positive():
    rng = np.random.default_rng(11)
    for _ in range(100):
        off = -rng.uniform(0, 1, (5, 5)) * (rng.random((5, 5)) < 0.5)
        np.fill_diagonal(off, 0)
        L1 = off + np.diag(-off.sum(axis=1) + rng.uniform(0.1, 1, 5))
        a = analyze_m_matrix(L1)
        assert np.all(a.q > 0)
        S = scaled_symmetric_part(L1, a.G)
        assert np.all(np.linalg.eigvalsh(S) > 0)
        assert a.lambda0_hat > 0


def test_singular_l1_raises():
    lp = build_laplacian(DirectedGraph(3, (0,), ((0, 1, 1.0),)))
    with pytest.raises(SingularL1):
        analyze_m_matrix(lp)


def test_hurwitz_examples(tri, tri_design):
    assert hurwitz(np.array([[-1.0, 0], [0, -2]]))
    assert not hurwitz(np.array([[0.0, 1], [0, 0]]))
    assert hurwitz(tri.A - tri.B @ tri.B.T @ tri_design.Q)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), followers=st.integers(2, 9), t=st.floats(0.1, 10))
def test_diagonal_scaling_properties(seed, followers, t):
    g = random_graph(np.random.default_rng(seed), followers, 1, 0.3)
    lp = build_laplacian(g)
    a = analyze_m_matrix(lp)
    S = scaled_symmetric_part(lp.L1, a.G)
    np.testing.assert_allclose(S, S.T, atol=1e-12)
    assert np.all(S @ np.ones(followers) > 0)
    np.testing.assert_allclose(lp.L1.T @ a.G @ np.ones(followers), 1.0, atol=1e-10)
    b = analyze_m_matrix(build_laplacian(g.scaled(t)))
    np.testing.assert_allclose(b.q, a.q / t, rtol=1e-9)
    np.testing.assert_allclose(scaled_symmetric_part(t * lp.L1, b.G), S, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), followers=st.integers(2, 9))
def test_laplacian_simple_zero_eigenvalue(seed, followers):
    lp = build_laplacian(random_graph(np.random.default_rng(seed), followers, 1, 0.3))
    assert np.all(lp.L @ np.ones(followers + 1) == 0)
    zeros, rest = laplacian_zero_eigen(lp.L)
    assert zeros == 1
    assert np.all(rest.real > 0)


def test_to_dict_complex_pairs():
    L1 = np.array([[1.0, -1.0, 0], [0, 1.0, -1.0], [-1.0, 0, 2.0]])
    d = analyze_m_matrix(L1).to_dict()
    assert all(len(v) == 2 for v in d["eigenvalues_L1"])
    assert any(abs(v[1]) > 1e-6 for v in d["eigenvalues_L1"])
