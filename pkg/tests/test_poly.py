import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from momentvol.poly import (AffineMap, Polynomial, PolynomialSyntaxError, diff, evaluate,
                            evaluate_many, monomials, mul, parse, substitute_affine, to_string)

X12 = ["x1", "x2"]


def polys(n=2, max_deg=3, ints=True):
    exps = st.tuples(*[st.integers(0, max_deg)] * n)
    coef = st.integers(-5, 5).map(float) if ints else \
        st.floats(-10, 10, allow_nan=False, allow_infinity=False)
    return st.dictionaries(exps, coef, max_size=6).map(lambda t: Polynomial(n, t))


# -- parse -------------------------------------------------------------------

def test_parse_ellipse():
    p = parse("1 - 0.25*x1^2 - x2^2", X12)
    assert dict(p.terms) == {(0, 0): 1.0, (2, 0): -0.25, (0, 2): -1.0}


def test_parse_zero():
    p = parse("0", ["x1"])
    assert p.is_zero() and p.degree == 0


def test_parse_binomial():
    p = parse("(x1+x2)^2", X12)
    assert dict(p.terms) == {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0}


def test_parse_precedence_and_unary_minus():
    p = parse("-x1^2*3 + -(x2)", X12)
    assert dict(p.terms) == {(2, 0): -3.0, (0, 1): -1.0}
    assert parse("2^3", X12) == Polynomial.constant(2, 8.0)


@pytest.mark.parametrize("text", ["1 +", "x1 ** 2", "(x1", "x1^-1", "x1^0.5", "x1 $ 2"])
def test_parse_rejects(text):
    with pytest.raises(PolynomialSyntaxError) as err:
        parse(text, X12)
    assert err.value.pos >= 0


def test_parse_unknown_variable_reports_position():
    with pytest.raises(PolynomialSyntaxError) as err:
        parse("x1 + y", X12)
    assert err.value.pos == 5


@given(polys(ints=False))
def test_print_parse_round_trip(p):
    assert parse(to_string(p, X12), X12) == p


# -- arithmetic ------------------------------------------------------------

def test_mul_examples():
    x = parse("x", ["x"])
    one_minus = 1 - x * x
    assert mul(one_minus, one_minus) == parse("1 - 2*x^2 + x^4", ["x"])
    assert mul(one_minus, Polynomial.zero(1)).is_zero()
    a, b = parse("1 - x1^2", X12), parse("1 - x2^2", X12)
    assert mul(a, b) == parse("1 - x1^2 - x2^2 + x1^2*x2^2", X12)


def test_mul_dimension_mismatch():
    with pytest.raises(ValueError):
        mul(Polynomial.constant(1, 1.0), Polynomial.constant(2, 1.0))


@given(polys(), polys(), polys())
def test_mul_commutative_associative(a, b, c):
    assert mul(a, b) == mul(b, a)
    assert mul(mul(a, b), c) == mul(a, mul(b, c))


@given(polys(), polys())
def test_mul_degree_adds(a, b):
    if not a.is_zero() and not b.is_zero():
        assert mul(a, b).degree == a.degree + b.degree


@given(polys(), polys(), st.integers(1, 2))
def test_leibniz(a, b, k):
    assert diff(mul(a, b), k) == diff(a, k) * b + a * diff(b, k)


def test_diff_examples():
    assert diff(parse("1 - x^2", ["x"]), 1) == parse("-2*x", ["x"])
    assert diff(parse("x1^2*x2", X12), 2) == parse("x1^2", X12)
    assert diff(Polynomial.constant(2, 3.0), 1).is_zero()
    with pytest.raises(IndexError):
        diff(parse("x1", X12), 3)
    with pytest.raises(IndexError):
        diff(parse("x1", X12), 0)


def test_eval_examples():
    p = parse("1 - x^2", ["x"])
    assert evaluate(p, [0.0]) == 1.0
    assert evaluate(p, [1.0]) == 0.0
    assert evaluate(parse("x1*x2", X12), [2.0, 3.0]) == 6.0


@given(polys(ints=False), st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_evaluate_many_matches_evaluate(p, pt):
    many = evaluate_many(p, np.array([pt, pt]))
    assert many[0] == pytest.approx(evaluate(p, pt), rel=1e-12, abs=1e-12)


# -- affine substitution -----------------------------------------------------

def test_substitute_affine_examples():
    x = ["x"]
    double = AffineMap((2.0,), (0.0,))
    assert substitute_affine(parse("x", x), double) == parse("2*x", x)
    assert substitute_affine(parse("1 - x^2", x), double) == parse("1 - 4*x^2", x)


def test_affine_map_rejects_nonpositive_scale():
    with pytest.raises(ValueError):
        AffineMap((0.0, 1.0), (0.0, 0.0))


affine_maps = st.tuples(st.floats(0.25, 4.0), st.floats(0.25, 4.0), st.floats(-2, 2),
                        st.floats(-2, 2)).map(lambda t: AffineMap((t[0], t[1]), (t[2], t[3])))


@given(polys(ints=False), affine_maps)
def test_substitute_round_trip_and_degree(p, m):
    back = substitute_affine(substitute_affine(p, m), m.inverse())
    assert back.degree == p.degree or p.is_zero()
    for alpha in set(p.terms) | set(back.terms):
        scale = 1.0 + max(abs(c) for c in p.terms.values()) if p.terms else 1.0
        assert back.coefficient(alpha) == pytest.approx(p.coefficient(alpha), abs=1e-9 * scale)
    assert substitute_affine(p, m).degree == p.degree


@given(polys(ints=False), affine_maps, st.tuples(st.floats(-1, 1), st.floats(-1, 1)))
def test_substitute_is_composition(p, m, pt):
    lhs = evaluate(substitute_affine(p, m), pt)
    rhs = evaluate(p, m(np.array(pt)))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_monomials_grlex_count():
    for n in (1, 2, 3):
        for d in range(5):
            ms = monomials(n, d)
            assert len(ms) == math.comb(n + d, d)
            assert ms[0] == (0,) * n
            assert [sum(a) for a in ms] == sorted(sum(a) for a in ms)
    assert monomials(2, 1) == [(0, 0), (1, 0), (0, 1)]
