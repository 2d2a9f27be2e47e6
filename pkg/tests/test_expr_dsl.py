import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arsgeo import expr_dsl as ed
from arsgeo.errors import DomainError, ExprSyntaxError, UnknownIdentifierError
from arsgeo.expr_dsl import Binary, Const, Unary, Var, diff, evaluate, parse_expr, to_text


def test_parse_shapes():
    e = parse_expr("sin(2*x)")
    assert e == Unary("sin", Binary("mul", Const(2.0), Var("x")))
    e = parse_expr("x*exp(x*y)")
    assert isinstance(e, Binary) and e.op == "mul" and e.right.op == "exp"
    assert parse_expr("1 - cos(x)") == Binary("sub", Const(1.0), Unary("cos", Var("x")))


def test_precedence():
    assert parse_expr("-x^2") == Unary("neg", Binary("pow", Var("x"), Const(2.0)))
    assert parse_expr("x^y^2") == Binary("pow", Var("x"), Binary("pow", Var("y"), Const(2.0)))
    assert parse_expr("x-y-1") == Binary("sub", Binary("sub", Var("x"), Var("y")), Const(1.0))
    assert evaluate(parse_expr("2^-1"), 0.0, 0.0) == 0.5


@pytest.mark.parametrize("text, offset", [("x +* y", 3), ("sin(x", 5), ("", 0), ("(x))", 3), ("x $ y", 2)])
def test_syntax_errors_carry_offsets(text, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr(text)
    assert info.value.offset == offset


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse_expr("x + atan(y)")
    assert info.value.offset == 4


def test_simple_derivatives():
    d = diff(parse_expr("sin(2*x)"), "x")
    xs = np.linspace(-3, 3, 41)
    assert np.allclose(evaluate(d, xs, 0.0), 2 * np.cos(2 * xs), atol=1e-14)
    assert diff(parse_expr("x"), "y") == Const(0.0)


def test_second_derivative_against_differences():
    e = parse_expr("1-cos(x)")
    d2 = diff(diff(e, "x"), "x")
    h = 1e-5
    for x in np.linspace(-3, 3, 13):
        d1 = lambda u: evaluate(diff(e, "x"), u, 0.0)
        fd = (d1(x + h) - d1(x - h)) / (2 * h)
        assert abs(evaluate(d2, x, 0.0) - math.cos(x)) < 1e-14
        assert abs(fd - math.cos(x)) < 1e-8


def test_evaluate_examples():
    assert evaluate(parse_expr("sin(2*x)"), math.pi / 4, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert evaluate(parse_expr("1-cos(x)"), 0.0, 5.0) == 0.0
    assert evaluate(parse_expr("x^2 - y"), 1.0, 1.0) == 0.0


def test_domain_errors():
    for text, pt in [("log(x)", (-1.0, 0.0)), ("1/x", (0.0, 0.0)), ("sqrt(x)", (-2.0, 0.0)), ("exp(x)", (1e4, 0.0))]:
        with pytest.raises(DomainError):
            evaluate(parse_expr(text), *pt)


def test_array_broadcast():
    e = parse_expr("x*y + 1")
    r = evaluate(e, np.arange(3.0), 2.0)
    assert r.shape == (3,) and np.array_equal(r, [1.0, 3.0, 5.0])
    assert evaluate(parse_expr("3"), np.zeros((2, 2)), 0.0).shape == (2, 2)


def test_program_matches_numpy():
    from arsgeo._kernels import eval_many

    exprs = [parse_expr(t) for t in ("x*exp(0.2*x*cos(y))", "sin(x)^2 - y/3", "sqrt(1 + x^2)", "-x^2")]
    prog = ed.compile_program(exprs)
    xs = np.array([0.3, 2.0, -1.1])
    ys = np.array([-1.2, 0.5, 3.0])
    out = eval_many(prog.ops, prog.args, prog.consts, prog.starts, len(exprs), xs, ys, prog.stack_size)
    ref = np.array([evaluate(e, xs, ys) for e in exprs])
    assert np.allclose(out.T, ref, rtol=1e-15, atol=1e-15)


# random trees over a domain-safe alphabet

_leaf = st.one_of(
    st.just(Var("x")),
    st.just(Var("y")),
    st.floats(0.0, 3.0, allow_nan=False).map(lambda v: Const(round(v, 3))),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(["neg", "sin", "cos"]), children).map(lambda t: Unary(*t)),
        st.tuples(st.just("exp"), children).map(lambda t: Unary("exp", Unary("sin", t[1]))),
        st.tuples(st.sampled_from(["add", "sub", "mul"]), children, children).map(lambda t: Binary(*t)),
        children.map(lambda c: Binary("div", c, Binary("add", Const(2.0), Unary("cos", c)))),
        children.map(lambda c: Binary("pow", c, Const(2.0))),
    )


trees = st.recursive(_leaf, _extend, max_leaves=12)


def _depth(e):
    return 1 + max((_depth(c) for c in e.children), default=0)


@settings(max_examples=60, deadline=None)
@given(trees)
def test_roundtrip(e):
    assert parse_expr(to_text(e)) == e


@settings(max_examples=60, deadline=None)
@given(trees, st.integers(0, 2**31 - 1))
def test_derivative_matches_central_difference(e, seed):
    if _depth(e) > 6:
        return
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.5, 1.5, size=(100, 2))
    x, y = pts[:, 0], pts[:, 1]
    h = 1e-5
    for var in ("x", "y"):
        d = np.atleast_1d(evaluate(diff(e, var), x, y))
        if var == "x":
            fd = (evaluate(e, x + h, y) - evaluate(e, x - h, y)) / (2 * h)
        else:
            fd = (evaluate(e, x, y + h) - evaluate(e, x, y - h)) / (2 * h)
        assert np.all(np.abs(d - fd) <= 1e-6 * (1 + np.abs(d)))
