import math

import numpy as np
import pytest

from ddro import expr
from ddro.errors import (
    ExprDomainError,
    ExprIndexError,
    ExprNameError,
    ExprSyntaxError,
)


def test_affine_arithmetic():
    e = expr.parse("0.1 + 0.2*x1", 1)
    assert expr.evaluate(e, (2.0,)) == pytest.approx(0.5)


def test_exp_zero():
    e = expr.parse("exp(-x1)", 1)
    assert expr.evaluate(e, (0.0,)) == 1.0


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as err:
        expr.parse("1 + * 2", 1)
    assert err.value.offset == 4


def test_mixed_variables():
    e = expr.parse("x1*xi1", 1, 1)
    assert expr.evaluate(e, (3.0,), (2.0,)) == 6.0


def test_log_domain_error():
    e = expr.parse("log(x1)", 1)
    with pytest.raises(ExprDomainError):
        expr.evaluate(e, (0.0,))


def test_sqrt():
    e = expr.parse("sqrt(x1)", 1)
    assert expr.evaluate(e, (4.0,)) == 2.0
    with pytest.raises(ExprDomainError):
        expr.evaluate(e, (-1.0,))


def test_division_by_zero():
    e = expr.parse("1 / x1", 1)
    with pytest.raises(ExprDomainError):
        expr.evaluate(e, (0.0,))


def test_unknown_identifier():
    with pytest.raises(ExprNameError):
        expr.parse("y1 + 1", 2)


def test_index_out_of_range():
    with pytest.raises(ExprIndexError):
        expr.parse("x3", 2)
    with pytest.raises(ExprIndexError):
        expr.parse("xi2", 1, 1)
    expr.parse("x2", 2)  # in range


def test_precedence_and_power():
    e = expr.parse("2 + 3*4^2", 0)
    assert expr.evaluate(e) == 50.0
    e = expr.parse("2^3^2", 0)  # right associative
    assert expr.evaluate(e) == 512.0
    e = expr.parse("-x1^2", 1)
    assert expr.evaluate(e, (3.0,)) == -9.0
    e = expr.parse("2**3", 0)
    assert expr.evaluate(e) == 8.0


def test_abs_and_unary():
    e = expr.parse("abs(-x1) + -2", 1)
    assert expr.evaluate(e, (5.0,)) == 3.0


@pytest.mark.parametrize(
    "text",
    [
        "0.1 + 0.2*x1",
        "exp(-x1) * (xi1 - 0.5)^2",
        "1 - 2*x1/xi2 + sqrt(abs(xi1))",
        "-(x1 + xi1)*3",
        "2^-x1",
        "log(1 + x1*x1)",
        "((x1))",
        "1e-3*xi1 + 2.5E2",
    ],
)
def test_print_parse_roundtrip(text):
    tree = expr.parse(text, 1, 2)
    printed = expr.to_str(tree)
    reparsed = expr.parse(printed, 1, 2)
    assert reparsed == tree
    assert expr.to_str(reparsed) == printed  # idempotent fixpoint


def test_eval_is_pure():
    e = expr.parse("exp(x1) - xi1/3 + x1^2", 1, 1)
    rng = np.random.default_rng(7)
    for _ in range(50):
        x, xi = rng.normal(), rng.normal()
        a = expr.evaluate(e, (x,), (xi,))
        b = expr.evaluate(e, (x,), (xi,))
        assert a == b
        assert a == math.exp(x) - xi / 3 + x**2


def test_empty_input():
    with pytest.raises(ExprSyntaxError):
        expr.parse("", 1)
    with pytest.raises(ExprSyntaxError):
        expr.parse("   ", 1)


def test_trailing_garbage():
    with pytest.raises(ExprSyntaxError):
        expr.parse("1 + 2 3", 1)


def test_bare_x_is_unknown():
    with pytest.raises(ExprNameError):
        expr.parse("x + 1", 2)
