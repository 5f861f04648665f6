import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from degenpar.expr import ExpressionError, compile_expression

X = np.array([[0.5, 2.0], [-1.0, 0.25], [0.0, 0.0]])


def test_arithmetic_and_power():
    e = compile_expression("1 + 2*x1 - x2/4 + x1^2", 2)
    np.testing.assert_allclose(e(0.0, X), 1 + 2 * X[:, 0] - X[:, 1] / 4 + X[:, 0] ** 2)


def test_functions_and_time():
    e = compile_expression("max(1 - exp(x1), 0) + min(t, x2, 1) + sqrt(abs(x2)) + sin(pi*t) + cos(0) + log(1)", 2)
    expected = (np.maximum(1 - np.exp(X[:, 0]), 0) + np.minimum(np.minimum(0.5, X[:, 1]), 1)
                + np.sqrt(np.abs(X[:, 1])) + np.sin(np.pi * 0.5) + 1.0)
    np.testing.assert_allclose(e(0.5, X), expected)


def test_constants_broadcast():
    assert compile_expression(3, 2)(0.0, X).shape == (3,)
    np.testing.assert_array_equal(compile_expression("-2.5", 1)(0.0, np.zeros((4, 1))), -2.5)


@pytest.mark.parametrize("src", ["x3 + 1", "y", "__import__('os')", "x1.real", "[x1]", "x1 if t else 0",
                                 "exp(x1, x2)", "max(x1)", "'a'", "x1 < 2", "lambda: 0", "x1 % 2"])
def test_rejected(src):
    with pytest.raises(ExpressionError):
        compile_expression(src, 2)


def test_syntax_error_reports_column():
    with pytest.raises(ExpressionError) as exc:
        compile_expression("1 + * x1", 1)
    assert exc.value.col is not None and "column" in str(exc.value)


def test_dimension_mismatch_at_call():
    with pytest.raises(ValueError):
        compile_expression("x1", 1)(0.0, X)


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(0, 1))
def test_polynomials_match_numpy(c, t):
    src = f"{c[0]!r} + ({c[1]!r})*x1 + ({c[2]!r})*x2^2 + ({c[3]!r})*t*x1*x2"
    got = compile_expression(src, 2)(t, X)
    expected = c[0] + c[1] * X[:, 0] + c[2] * X[:, 1] ** 2 + c[3] * t * X[:, 0] * X[:, 1]
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12)
