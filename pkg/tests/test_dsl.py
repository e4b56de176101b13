from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from indicatrix import DomainError, ExpressionNorm, RandersNorm, fundamental_tensor
from indicatrix.dsl import (
    BinOp,
    Call,
    DslError,
    DslSyntaxError,
    HomogeneityError,
    Neg,
    Num,
    Pow,
    Var,
    eval_expr_jet,
    parse,
    to_text,
)
from oracles import fd_half_hessian_sq


def test_parse_randers_type():
    e = parse("sqrt(y1^2 + y2^2) + 0.5*y1", 2)
    assert e.root == BinOp(
        "+",
        Call("sqrt", BinOp("+", Pow(Var(1), Fraction(2)), Pow(Var(2), Fraction(2)))),
        BinOp("*", Num(0.5), Var(1)),
    )
    assert e([0.0, 1.0]) == 1.0


def test_parse_quartic_root():
    e = parse("(y1^4 + y2^4)^(1/4)", 2)
    assert float(e([1.0, 1.0])) == pytest.approx(2 ** 0.25, abs=1e-12)
    assert e.root.exponent == Fraction(1, 4)


def test_rejects_non_homogeneous():
    with pytest.raises(HomogeneityError) as info:
        parse("y1 + y2^2", 2)
    assert info.value.exponent != pytest.approx(1.0, abs=0.05)
    with pytest.raises(HomogeneityError) as info:
        parse("y1^2 + y2^2", 2)
    assert info.value.exponent == pytest.approx(2.0)


def test_precedence():
    assert parse("-y1^2 + y2*y1 - y2", 2, check_homogeneity=False).root == BinOp(
        "-",
        BinOp("+", Neg(Pow(Var(1), Fraction(2))), BinOp("*", Var(2), Var(1))),
        Var(2),
    )
    assert parse("y1/y2*y1", 2).root == BinOp("*", BinOp("/", Var(1), Var(2)), Var(1))
    assert parse("y1 - (y2 - y1)", 2).root == BinOp("-", Var(1), BinOp("-", Var(2), Var(1)))


@pytest.mark.parametrize(
    "source, exponent",
    [("y1^3", 3), ("y1^(1/3)", Fraction(1, 3)), ("y1^-2", -2), ("y1^(-3/2)", Fraction(-3, 2)), ("y1^0.5", Fraction(1, 2))],
)
def test_rational_exponents(source, exponent):
    assert parse(source, 2, check_homogeneity=False).root.exponent == exponent


@pytest.mark.parametrize(
    "source, column, message",
    [
        ("sqrt(y1^2 + y2^2", 17, "expected ')'"),
        ("y1 + + y2", 6, "unexpected '+'"),
        ("y1 ^ y2", 6, "rational literal"),
        ("y1^2^3", 5, "chained exponent"),
        ("y1 + z", 6, "unknown identifier"),
        ("y1 + y3", 6, "out of range"),
        ("y1 $ y2", 4, "unexpected character"),
        ("cos(y1)", 1, "unknown identifier"),
        ("y1^(1/0)", 7, "zero denominator"),
        ("", 1, "empty expression"),
        ("y1 y2", 4, "unexpected 'y2'"),
        ("y0", 1, "unknown identifier"),
        ("abs(y1)", 1, "unknown identifier"),
    ],
)
def test_syntax_errors_carry_positions(source, column, message):
    with pytest.raises(DslSyntaxError) as info:
        parse(source, 2)
    assert info.value.line == 1
    assert info.value.column == column
    assert message in str(info.value)


def test_multiline_positions():
    with pytest.raises(DslSyntaxError) as info:
        parse("sqrt(y1^2 +\n   y2^2) * ?", 2)
    assert (info.value.line, info.value.column) == (2, 12)


def test_jet_examples():
    j = eval_expr_jet(parse("sqrt(y1^2+y2^2)", 2), [3.0, 4.0])
    assert j.value == pytest.approx(5.0)
    np.testing.assert_allclose(j.gradient, [0.6, 0.8])
    for y in ([1.0, 2.0], [-3.0, 0.5]):
        np.testing.assert_array_equal(eval_expr_jet(parse("2*y1", 2), y).gradient, [2.0, 0.0])
    np.testing.assert_array_equal(eval_expr_jet(parse("2*y1", 3), [1.0, 2.0, 3.0]).gradient, [2.0, 0.0, 0.0])


def test_quartic_root_hessian_of_square_vanishes_on_axis():
    e = parse("(y1^4 + y2^4)^(1/4)", 2)
    j = eval_expr_jet(e, [1.0, 0.0])
    half_hess_sq = j.value * j.hessian + np.outer(j.gradient, j.gradient)
    assert abs(half_hess_sq[1, 1]) <= 1e-12
    fd = fd_half_hessian_sq(lambda y: (y[0] ** 4 + y[1] ** 4) ** (np.longdouble(1) / 4), [1.0, 0.0])
    np.testing.assert_allclose(half_hess_sq, fd, atol=1e-7)


def test_jets_agree_with_finite_differences():
    rng = np.random.default_rng(0)
    sources = [
        ("(y1^4 + y2^4 + y1^2*y2^2)^(1/4) + 0.2*y2", lambda y: (y[0] ** 4 + y[1] ** 4 + y[0] ** 2 * y[1] ** 2) ** (np.longdouble(1) / 4) + np.longdouble("0.2") * y[1]),
        ("sqrt(2*y1^2 + y1*y2 + y2^2) - 0.3*y2", lambda y: np.sqrt(2 * y[0] ** 2 + y[0] * y[1] + y[1] ** 2) - np.longdouble("0.3") * y[1]),
        ("(y1^2 + y2^2)/sqrt(y1^2 + 3*y2^2)", lambda y: (y[0] ** 2 + y[1] ** 2) / np.sqrt(y[0] ** 2 + 3 * y[1] ** 2)),
    ]
    for source, oracle in sources:
        e = parse(source, 2)
        for _ in range(20):
            y = rng.standard_normal(2)
            j = eval_expr_jet(e, y)
            g = j.value * j.hessian + np.outer(j.gradient, j.gradient)
            np.testing.assert_allclose(g, fd_half_hessian_sq(oracle, y), atol=1e-6 * max(1, j.value**2))


def test_domain_error_names_the_node():
    e = parse("sqrt(y1)*sqrt(y2)", 2, check_homogeneity=False)
    with pytest.raises(DomainError, match=r"`sqrt\(y2\)`"):
        eval_expr_jet(e, [1.0, -1.0])
    e = parse("y1/(y2 - y2)", 2, check_homogeneity=False)
    with pytest.raises(DomainError, match="division by zero"):
        e([1.0, 1.0])


def test_dsl_randers_matches_builtin():
    rng = np.random.default_rng(7)
    dsl_norm = ExpressionNorm.from_source("sqrt(y1^2 + y2^2) + 0.5*y1", 2)
    builtin = RandersNorm(np.eye(2), [0.5, 0.0])
    for _ in range(100):
        y = rng.standard_normal(2)
        assert abs(dsl_norm(y) - builtin(y)) <= 1e-12
        np.testing.assert_allclose(
            fundamental_tensor(dsl_norm, y).matrix, fundamental_tensor(builtin, y).matrix, rtol=0, atol=1e-8
        )


def test_expression_norm_rejects_non_positive():
    with pytest.raises(DomainError):
        ExpressionNorm.from_source("2*y1", 2)
    with pytest.raises(DomainError):
        ExpressionNorm.from_source("sqrt(y1^2 + y2^2) + 2*y1", 2)


# --------------------------------------------------------- printer round trip

_leaf = st.one_of(
    st.integers(1, 3).map(Var),
    st.floats(0.0, 1e6, allow_nan=False, allow_infinity=False).map(Num),
)
_exponent = st.builds(Fraction, st.integers(-9, 9), st.integers(1, 9))


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.builds(BinOp, st.sampled_from("+-*/"), children, children),
        st.builds(Pow, children, _exponent),
        children.map(lambda c: Call("sqrt", c)),
    )


expressions = st.recursive(_leaf, _extend, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(expressions)
def test_print_parse_round_trip(tree):
    text = to_text(tree)
    assert parse(text, 3, check_homogeneity=False).root == tree


@settings(max_examples=50, deadline=None)
@given(expressions)
def test_printing_is_a_fixed_point(tree):
    text = to_text(tree)
    assert to_text(parse(text, 3, check_homogeneity=False)) == text


# ------------------------------------------------------------------ fuzzing

_alphabet = st.sampled_from(list("y123456789.0+-*/^() sqrte\n\t,") + ["y1", "y2", "sqrt(", "^(1/2)"])


@settings(max_examples=400, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.binary(max_size=64))
def test_arbitrary_bytes_never_crash(data):
    try:
        parse(data, 2)
    except DslError as exc:
        if isinstance(exc, DslSyntaxError):
            assert exc.line >= 1 and exc.column >= 1


@settings(max_examples=400, deadline=None)
@given(st.lists(_alphabet, max_size=40).map("".join))
def test_token_soup_never_crashes(source):
    try:
        parse(source, 2)
    except DslError:
        pass


def test_deep_nesting_is_an_error_not_a_crash():
    with pytest.raises(DslSyntaxError, match="nested too deeply"):
        parse("(" * 5000 + "y1" + ")" * 5000, 2)
    with pytest.raises(DslSyntaxError, match="nested too deeply"):
        parse("-" * 5000 + "y1", 2)
    with pytest.raises(DslSyntaxError, match="nested too deeply"):
        parse(" + ".join(["y1"] * 2000), 2)


def test_huge_literals_are_errors():
    with pytest.raises(DslSyntaxError, match="out of range"):
        parse("1e999*y1", 2)
    with pytest.raises(DslSyntaxError, match="out of range"):
        parse("y1^100000", 2)
