import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gendev import expr
from gendev.charts import parse_scalar_field
from gendev.expr import EvaluationError, ExprSyntaxError, UnknownIdentifierError, VariableIndexError


def test_square_of_sine():
    f = parse_scalar_field("sin(x1)^2", 2)
    assert f([math.pi / 2, 0.3]) == pytest.approx(1.0, abs=1e-15)


def test_arithmetic():
    assert parse_scalar_field("x1*x2 + 2", 2)([3.0, 4.0]) == 14.0


def test_unbalanced_parenthesis_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse_scalar_field("sin(x1", 1)
    assert info.value.offset == 7


@pytest.mark.parametrize("src, value", [
    ("-x1^2", -9.0),
    ("2^3^1", None),
    ("x1 - x2 - 1", -2.0),
    ("x1 / x2 / 2", 0.375),
    ("-(x1 + x2)", -7.0),
    ("2*-x1", -6.0),
])
def test_precedence(src, value):
    if value is None:
        with pytest.raises(ExprSyntaxError):
            parse_scalar_field(src, 2)
        return
    assert parse_scalar_field(src, 2)([3.0, 4.0]) == pytest.approx(value)


def test_constants_and_functions():
    f = parse_scalar_field("pi + e + tan(x1) + exp(x1) + log(x2) + sqrt(x2) + cos(x1)", 2)
    x = (0.3, 2.0)
    want = math.pi + math.e + math.tan(0.3) + math.exp(0.3) + math.log(2) + math.sqrt(2) + math.cos(0.3)
    assert f(x) == pytest.approx(want, rel=1e-15)


def test_byte_offsets_count_utf8_bytes():
    with pytest.raises(ExprSyntaxError) as info:
        parse_scalar_field("x1 + é", 1)
    assert info.value.offset == 6


def test_errors():
    with pytest.raises(UnknownIdentifierError):
        parse_scalar_field("y + 1", 1)
    with pytest.raises(VariableIndexError):
        parse_scalar_field("x3", 2)
    with pytest.raises(ExprSyntaxError):
        parse_scalar_field("x1 +", 1)
    with pytest.raises(ExprSyntaxError):
        parse_scalar_field("x1^0.5", 1)
    with pytest.raises(EvaluationError):
        parse_scalar_field("log(x1)", 1)([-1.0])


def test_text_round_trip():
    for src in ("sin(x1)^2 - 3*x2/(1 + x1^2)", "-(x1 - x2)^3", "exp(-x1)*cos(2*x2)"):
        node = expr.parse(src, 2)
        again = expr.parse(expr.to_text(node), 2)
        x = np.array([[0.4, -1.3], [1.1, 0.2]])
        assert np.allclose(expr.compile_nodes([node], 2)(x), expr.compile_nodes([again], 2)(x),
                           rtol=1e-15, atol=0)


_LEAVES = st.sampled_from(["x1", "x2", "0.5", "2", "pi"])


def _combine(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(
        lambda t: f"({t[0]} {t[1]} {t[2]})")
    unary = st.tuples(st.sampled_from(["sin", "cos", "exp", "-"]), children).map(
        lambda t: f"{t[0]}({t[1]})")
    power = st.tuples(children, st.integers(2, 3)).map(lambda t: f"({t[0]})^{t[1]}")
    return binary | unary | power


EXPRESSIONS = st.recursive(_LEAVES, _combine, max_leaves=8)


@settings(max_examples=60, deadline=None)
@given(EXPRESSIONS)
def test_symbolic_derivative_matches_central_difference(src):
    f = parse_scalar_field(src, 2)
    rng = np.random.default_rng(abs(hash(src)) % 2**32)
    x = rng.uniform(-1.0, 1.0, size=(100, 2))
    step = 1e-5
    for i in range(2):
        d = np.asarray(f.diff(i)(x))
        e = np.zeros(2)
        e[i] = step
        fd = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * step)
        scale = np.maximum(1.0, np.abs(d))
        assert np.all(np.abs(d - fd) / scale <= 1e-6)
