import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from degenpar.fd import ProblemData, build_grid, solve_terminal_value_problem
from degenpar.geometry import DomainSpec, classify_degenerate_boundary
from degenpar.harness import Constant, PutPayoff
from degenpar.obstacle import (CompatibilityError, ObstacleData, PsorConfig, PsorDivergence, check_compatibility,
                               complementarity_residual, inactive_obstacle_gap, psor, solve_obstacle_problem)
from degenpar.operator import HestonParams, make_heston
from degenpar.suites import american_put


def _lcp_by_enumeration(M, q, psi):
    """Oracle: try every active set S (u = psi on S, (Mu)_i = q_i off S) and keep the complementary one."""
    n = len(q)
    for active in itertools.product([False, True], repeat=n):
        act = np.array(active)
        u = psi.copy()
        free = ~act
        if free.any():
            rhs = q[free] - M[np.ix_(free, act)] @ psi[act]
            u[free] = np.linalg.solve(M[np.ix_(free, free)], rhs)
        r = M @ u - q
        if np.all(u >= psi - 1e-12) and np.all(r >= -1e-12) and np.all(np.abs(np.minimum(r, u - psi)) < 1e-10):
            return u
    raise AssertionError("no complementary active set")


@given(st.integers(0, 2**31 - 1), st.integers(2, 7))
def test_psor_matches_enumeration(seed, n):
    rng = np.random.default_rng(seed)
    off = rng.uniform(0.1, 1.0, n - 1)
    M = np.diag(np.r_[off, 0] + np.r_[0, off] + rng.uniform(0.1, 1.0, n)) - np.diag(off, 1) - np.diag(off, -1)
    q = rng.uniform(-1, 1, n)
    psi = rng.uniform(-1, 1, n)
    u, its, res = psor(sp.csr_matrix(M), q, psi, np.ones(n, bool), np.zeros(n), PsorConfig(tol_psor=1e-13))
    np.testing.assert_allclose(u, _lcp_by_enumeration(M, q, psi), atol=1e-9)


def test_psor_config_validation():
    with pytest.raises(ValueError):
        PsorConfig(omega=2.0)
    with pytest.raises(ValueError):
        PsorConfig(tol_psor=0.0)


def test_psor_reports_divergence():
    M = sp.csr_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    with pytest.raises(PsorDivergence):
        psor(M, np.ones(2), np.full(2, -10.0), np.ones(2, bool), np.zeros(2), PsorConfig(tol_psor=1e-15, max_iters=1))


PARAMS = HestonParams(sigma=0.3, rho=-0.3, kappa=1.5, theta=0.04, r=0.05)
DOM = DomainSpec(T=1.0, box=((-1.0, 1.0), (0.0, 0.5)), truncated_faces={"x1=lo", "x1=hi", "x2=hi"})


def _grid(n=21, levels=11):
    op = make_heston(PARAMS)
    return op, build_grid(DOM, classify_degenerate_boundary(op, DOM), n, levels)


def test_incompatible_obstacle_is_rejected():
    op, g = _grid(11, 5)
    data = ObstacleData(f=Constant(0.0), g=Constant(0.0), psi=Constant(1.0))
    assert not check_compatibility(data, g).passed
    with pytest.raises(CompatibilityError):
        solve_obstacle_problem(op, g, data)


def test_american_put():
    res, inst = american_put(PARAMS)
    gap, f_gap, comp = complementarity_residual(res)
    assert gap == 0.0
    assert comp <= 1e-8
    assert res.contact[0].any()
    euro = solve_terminal_value_problem(inst.op, inst.grid, ProblemData(f=Constant(0.0), g=PutPayoff(1.0)))
    assert np.all(res.values >= euro.values - 1e-10)
    payoff = PutPayoff(1.0)(0.0, inst.grid.points)
    assert np.all(res.values[0] >= payoff)


def test_low_obstacle_does_not_bind():
    op, g = _grid(11, 6)
    data = ObstacleData(f=Constant(0.0), g=PutPayoff(1.0), psi=Constant(-5.0))
    assert inactive_obstacle_gap(op, g, data) <= 1e-8


def test_without_obstacle():
    data = ObstacleData(f=Constant(1.0), g=Constant(2.0))
    op, g = _grid(11, 3)
    assert np.all(data.obstacle(g, 0, np.arange(3)) == -np.inf)
    plain = data.without_obstacle()
    assert type(plain) is ProblemData and plain.f is data.f
