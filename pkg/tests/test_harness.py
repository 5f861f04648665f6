import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from degenpar.geometry import DomainSpec
from degenpar.harness import (C_BOUNDED_BELOW, C_NONNEG, C_POS, REGIMES, Constant, RegimeMismatch,
                              check_argmax_on_dirichlet, check_comparison, check_hopf_sign,
                              check_strong_max_constancy, check_time_weighted_bound, check_weak_max_bound,
                              constant_instance, degenerate_1d, ghost_data_check, hopf_instances, inward_axis,
                              make_instance, random_field, random_instance, time_weight, zero_max_instance)
from degenpar.obstacle import ObstacleData
from degenpar.verdict import FAIL, INCONCLUSIVE, PASS

UNIT = DomainSpec(T=1.0, box=((0.0, 1.0),))


def test_random_instance_is_deterministic():
    a = random_instance(7, C_POS)
    b = random_instance(7, C_POS)
    assert a.tags == b.tags
    np.testing.assert_array_equal(a.solve().values, b.solve().values)
    assert random_instance(8, C_POS).tags != a.tags


@pytest.mark.parametrize("regime", REGIMES)
def test_regime_tags_match_sampled_c(regime):
    for seed in range(10):
        inst = random_instance(seed, regime)
        if regime == C_POS:
            assert inst.tags["c_min"] >= inst.tags["c0"] == 0.05
        elif regime == C_NONNEG:
            assert inst.tags["c_min"] >= 0
        else:
            assert 0 <= inst.tags["K0"] <= 0.5


def test_random_instance_options():
    inst = random_instance(3, C_NONNEG, dim=1, resolution=(9, 4), f_sign="zero", obstacle=True)
    assert inst.grid.shape == (9,) and inst.grid.n_levels == 4
    assert inst.tags["family"] == "separable"
    assert inst.data.psi is not None
    with pytest.raises(ValueError):
        random_instance(0, "c_huge")
    with pytest.raises(ValueError):
        random_instance(0, C_POS, f_sign="wobbly")
    with pytest.raises(ValueError):
        random_instance(0, C_POS, dim=3, family="heston")


@given(st.integers(0, 10**6), st.sampled_from(["nonpos", "nonneg", "neg", "zero", "any"]))
def test_random_field_signs(seed, sign):
    f = random_field(np.random.default_rng(seed), 2, sign)
    v = f(0.3, np.random.default_rng(seed + 1).uniform(-2, 2, (50, 2)))
    if sign in ("nonpos", "zero"):
        assert np.all(v <= 1e-12)
    if sign in ("nonneg", "zero"):
        assert np.all(v >= -1e-12)
    if sign == "neg":
        assert np.all(v < 0)


def test_weak_max_bound_worked_example():
    # c = 0.05, f = 0.01, g = 0: bound max(0, 0.01 / 0.05, 0) = 0.2
    inst = make_instance(degenerate_1d(c=0.05), UNIT, 21, 11, ObstacleData(f=Constant(0.01), g=Constant(0.0)),
                         regime=C_POS)
    u = inst.solve()
    v = check_weak_max_bound(u, inst, 2)
    assert v.passed
    assert u.values.max() <= 0.2


def test_regime_mismatch_is_an_error():
    inst = make_instance(degenerate_1d(c=0.0), UNIT, 11, 5, ObstacleData(f=Constant(0.01), g=Constant(0.0)))
    u = inst.solve()
    with pytest.raises(RegimeMismatch):
        check_weak_max_bound(u, inst, 2)
    with pytest.raises(RegimeMismatch):
        check_weak_max_bound(u, inst, 1)  # f > 0
    with pytest.raises(RegimeMismatch):
        check_time_weighted_bound(u, inst)
    with pytest.raises(RegimeMismatch):
        make_instance(degenerate_1d(c=-0.1), UNIT, 11, 5, ObstacleData(), regime=C_NONNEG)


def test_time_weighted_worked_example():
    # c = -0.1, f = 0.01, g = 0, T = 1: weight e^{1.1} at t = 0, bound about 0.03004
    inst = make_instance(degenerate_1d(c=-0.1), UNIT, 21, 11, ObstacleData(f=Constant(0.01), g=Constant(0.0)),
                         regime=C_BOUNDED_BELOW)
    assert inst.tags["K0"] == pytest.approx(0.1)
    assert time_weight(inst)[0] * 0.01 == pytest.approx(0.030042, abs=1e-6)
    u = inst.solve()
    assert check_time_weighted_bound(u, inst, "sub").passed
    assert check_time_weighted_bound(u, inst, "solution").passed


def test_unweighted_boundary_term_is_not_a_bound():
    # c = -K0, f = 0, g = 1: u grows like e^{K0 (T - t)} above sup g = 1
    inst = make_instance(degenerate_1d(c=-0.5), UNIT, 11, 11, ObstacleData(f=Constant(0.0), g=Constant(1.0)),
                         regime=C_BOUNDED_BELOW)
    u = inst.solve()
    assert u.values.max() > 1.2
    assert check_time_weighted_bound(u, inst, "sub", literal=True).status == FAIL
    assert check_time_weighted_bound(u, inst, "sub").status == PASS


@given(st.integers(0, 10**6), st.sampled_from(REGIMES))
def test_bounds_hold_on_random_instances(seed, regime):
    inst = random_instance(seed, regime)
    u = inst.solve()
    if regime == C_BOUNDED_BELOW:
        verdicts = [check_time_weighted_bound(u, inst, k) for k in ("sub", "super", "solution")]
    elif regime == C_POS:
        verdicts = [check_weak_max_bound(u, inst, k) for k in (2, 4, 6)]
    else:
        verdicts = [check_comparison(u, u)]
    assert all(v.passed for v in verdicts), [v.line() for v in verdicts]


def test_comparison_rejects_mismatched_grids():
    a, b = random_instance(0, C_POS, resolution=(11, 6)), random_instance(0, C_POS, resolution=(9, 6))
    with pytest.raises(ValueError):
        check_comparison(a.solve(), b.solve())


def test_strong_max_on_constant_solution():
    inst = constant_instance(1, M=2.5)
    u = inst.solve()
    np.testing.assert_allclose(u.values, 2.5, atol=1e-12)
    node = int(np.flatnonzero(inst.grid.underline_mask())[0])
    assert check_strong_max_constancy(u, inst, (0, node)).passed
    with pytest.raises(ValueError):
        check_strong_max_constancy(u, inst, (0, int(np.flatnonzero(inst.grid.dirichlet_mask())[0])))


def test_strong_max_inconclusive_off_the_max():
    inst = random_instance(2, C_NONNEG, f_sign="neg", g_sign="nonneg")
    u = inst.solve()
    free = np.flatnonzero(inst.grid.underline_mask())
    node = int(free[np.argmin(u.values[0, free])])
    assert check_strong_max_constancy(u, inst, (0, node)).status == INCONCLUSIVE


def test_zero_max_slice():
    inst = zero_max_instance()
    u = inst.solve()
    late = inst.grid.n_levels // 2 + 1
    assert check_strong_max_constancy(u, inst, (late, 5), zero_max=True).passed
    assert u.values[0].min() < 0  # data is negative before T/2


def test_argmax_on_data_boundary():
    inst = random_instance(4, C_POS, f_sign="neg", g_sign="nonneg")
    v = check_argmax_on_dirichlet(inst.solve(), inst)
    assert v.passed and v.details["max"] > 0
    neg = random_instance(4, C_POS, f_sign="neg", g_sign="neg")
    assert check_argmax_on_dirichlet(neg.solve(), neg).status == INCONCLUSIVE


def test_hopf_instances_and_inconclusive_path():
    cases = hopf_instances()
    assert len(cases) == 10
    inst, P = cases[0]
    v = check_hopf_sign(inst.solve(), inst, P)
    assert v.passed and v.details["quotient"] <= -1e-6
    const = constant_instance(0, M=1.0)
    node = const.grid.n_nodes - 1 if const.grid.dim == 1 else int(np.flatnonzero(const.grid.node_class == 2)[0])
    assert check_hopf_sign(const.solve(), const, (0, node)).status == INCONCLUSIVE


def test_inward_axis_needs_a_single_face():
    inst = make_instance(degenerate_1d(), UNIT, 11, 3, ObstacleData())
    assert inward_axis(inst.grid, 10) == (0, -1)
    with pytest.raises(ValueError):
        inward_axis(inst.grid, 5)


def test_ghost_data_on_one_dimensional_problem():
    inst = make_instance(degenerate_1d(b0=0.5, c=0.1), UNIT, 21, 6,
                         ObstacleData(f=Constant(-1.0), g=Constant(2.0)))
    assert all(v.passed for v in ghost_data_check(inst))
