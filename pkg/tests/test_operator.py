import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from degenpar.operator import (CoefficientError, HestonParams, ParabolicOperator, SpaceTimePoint,
                               check_quadratic_growth, conjugate_apply, describe, eval_coefficients,
                               identity_laplacian, least_eigenvalue, least_eigenvalue_matrix, make_constant,
                               make_heston)

PARAMS = HestonParams(sigma=0.2, rho=-0.5, kappa=1.5, theta=0.04, r=0.05)

heston_params = st.builds(
    HestonParams,
    sigma=st.floats(0.05, 1.0), rho=st.floats(-0.95, 0.95), kappa=st.floats(0.1, 5.0),
    theta=st.floats(0.01, 0.5), r=st.floats(-0.1, 0.2), q=st.floats(0.0, 0.1),
)


def test_heston_coefficients_by_hand():
    # a = (x2/2) [[1, rho sigma], [rho sigma, sigma^2]] at x2 = 0.04
    tr = eval_coefficients(make_heston(PARAMS), SpaceTimePoint(0.3, (0.1, 0.04)))
    np.testing.assert_allclose(tr.a_val, [[0.02, -0.002], [-0.002, 0.0008]], atol=1e-15)
    np.testing.assert_allclose(tr.b_val, [0.03, 0.0], atol=1e-15)
    assert tr.c_val == pytest.approx(0.05)


def test_heston_degenerates_on_floor():
    tr = eval_coefficients(make_heston(PARAMS), SpaceTimePoint(0.0, (0.0, 0.0)))
    assert np.all(tr.a_val == 0)
    assert tr.b_val[1] == pytest.approx(PARAMS.kappa * PARAMS.theta)


def test_identity_laplacian():
    tr = eval_coefficients(identity_laplacian(3), SpaceTimePoint(0.0, (1.0, 2.0, 3.0)))
    np.testing.assert_array_equal(tr.a_val, np.eye(3))
    assert np.all(tr.b_val == 0) and tr.c_val == 0


def _op(a):
    return ParabolicOperator(dim=2, a=lambda t, x: np.broadcast_to(np.asarray(a, float), (x.shape[0], 2, 2)),
                             b=lambda t, x: np.zeros((x.shape[0], 2)), c=lambda t, x: np.zeros(x.shape[0]))


def test_rejects_asymmetric_and_indefinite():
    p = SpaceTimePoint(0.0, (0.5, 0.5))
    with pytest.raises(CoefficientError):
        eval_coefficients(_op([[1.0, 0.5], [0.0, 1.0]]), p)
    with pytest.raises(CoefficientError):
        eval_coefficients(_op([[1.0, 0.0], [0.0, -1.0]]), p)
    with pytest.raises(CoefficientError):
        eval_coefficients(_op([[np.nan, 0.0], [0.0, 1.0]]), p)


def test_point_validation():
    with pytest.raises(ValueError):
        SpaceTimePoint(np.inf, (0.0,))
    with pytest.raises(ValueError):
        eval_coefficients(make_heston(PARAMS), SpaceTimePoint(0.0, (0.0, 0.0, 0.0)))


def test_heston_params_validation():
    with pytest.raises(ValueError):
        HestonParams(sigma=0.0, rho=0.0, kappa=1.0, theta=0.1)
    with pytest.raises(ValueError):
        HestonParams(sigma=0.2, rho=1.0, kappa=1.0, theta=0.1)
    assert PARAMS.beta == pytest.approx(3.0)


@given(heston_params, st.floats(0.0, 5.0), st.floats(-3.0, 3.0))
def test_heston_least_eigenvalue_closed_form(params, x2, x1):
    # eigenvalues of (x2/2) [[1, rs], [rs, s^2]]: (x2/4)(1 + s^2 -+ sqrt((1 - s^2)^2 + 4 r^2 s^2))
    s, r = params.sigma, params.rho
    lam = 0.25 * x2 * (1 + s**2 - np.sqrt((1 - s**2) ** 2 + 4 * r**2 * s**2))
    got = least_eigenvalue(make_heston(params), SpaceTimePoint(0.0, (x1, x2)))
    assert got == pytest.approx(lam, abs=1e-12)
    assert got >= -1e-14


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_least_eigenvalue_matrix_matches_eigvalsh(vals):
    m = np.array(vals).reshape(2, 2)
    m = m @ m.T
    assert least_eigenvalue_matrix(m[None])[0] == pytest.approx(np.linalg.eigvalsh(m)[0], abs=1e-10)


@given(heston_params, st.floats(0.01, 2.0))
def test_analytic_divergence_matches_finite_difference(params, x2):
    op = make_heston(params)
    fd_op = ParabolicOperator(dim=2, a=op.a, b=op.b, c=op.c)
    x = np.array([[0.3, x2]])
    np.testing.assert_allclose(op.a_divergence(0.0, x), fd_op.a_divergence(0.0, x), atol=1e-7)


def test_quadratic_growth():
    op = make_heston(PARAMS)
    xs = np.array([[0.0, x1, x2] for x1 in np.linspace(-3, 3, 7) for x2 in np.linspace(0, 3, 7)])
    assert check_quadratic_growth(op, xs, K=10.0).passed
    v = check_quadratic_growth(op, xs, K=1e-3)
    assert not v.passed and v.witness is not None
    with pytest.raises(ValueError):
        check_quadratic_growth(op, [], K=1.0)


def test_conjugation_with_unit_weight_is_identity():
    v = np.arange(5.0)
    np.testing.assert_allclose(conjugate_apply(identity_laplacian(1), np.ones(5), v, lambda w: 2 * w), 2 * v)
    with pytest.raises(ValueError):
        conjugate_apply(identity_laplacian(1), np.array([1.0, 0.0]), np.ones(2), lambda w: w)


def test_constant_builder_shapes():
    op = make_constant([[2.0]], [1.0], 0.5)
    a, b, c = op.coefficients(0.0, np.zeros((3, 1)))
    assert a.shape == (3, 1, 1) and b.shape == (3, 1) and np.all(c == 0.5)


def test_describe():
    text = describe("heston")
    assert "rho*sigma" in text and "kappa*(theta - x2)" in text and "c(t,x) = r" in text
    assert "a = I, b = 0, c = 0" in describe("identity-laplacian")
    with pytest.raises(KeyError):
        describe("nosuch")
