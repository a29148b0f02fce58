import math

import numpy as np
import pytest

from muflow.errors import EvalError, ParseError
from muflow.expression import compile_expression, evaluate

X = np.linspace(0.0, 1.0, 17)


def test_precedence_and_associativity():
    assert evaluate("1 + 2*3", X)[0] == 7
    assert evaluate("2^3^2", X)[0] == 512
    assert evaluate("8/4/2", X)[0] == 1
    assert evaluate("-x^2", np.array([3.0]))[0] == 9
    assert evaluate("0 - x^2", np.array([3.0]))[0] == -9


def test_constants_and_functions():
    assert evaluate("pi", X)[0] == pytest.approx(math.pi)
    assert evaluate("exp(0) + abs(-2) + cos(0) + sin(0)", X)[0] == 4
    assert np.allclose(evaluate("x", X), X)


def test_parse_error_reports_position_and_expected():
    with pytest.raises(ParseError) as err:
        evaluate("sin(2*pi*x", X)
    assert err.value.position == 10
    assert ")" in err.value.expected
    with pytest.raises(ParseError) as err:
        evaluate("2 +* x", X)
    assert err.value.position == 3
    with pytest.raises(ParseError):
        evaluate("tan(x)", X)
    with pytest.raises(ParseError):
        evaluate("x $ 2", X)


def test_eval_error_on_non_finite():
    with pytest.raises(EvalError):
        evaluate("exp(1000*x)", X)


# ---- randomized comparison against an independent tree evaluator ----

UNARY = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}


def random_tree(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        kind = rng.integers(3)
        if kind == 0:
            return ("num", round(float(rng.uniform(0.1, 3.0)), 3))
        return ("x",) if kind == 1 else ("pi",)
    kind = rng.integers(4)
    if kind == 0:
        return ("call", str(rng.choice(list(UNARY))), random_tree(rng, depth - 1))
    if kind == 1:
        return ("neg", random_tree(rng, depth - 1))
    op = str(rng.choice(["+", "-", "*", "/", "^"]))
    return ("bin", op, random_tree(rng, depth - 1), random_tree(rng, depth - 1))


def render(t):
    if t[0] == "num":
        return repr(t[1])
    if t[0] in ("x", "pi"):
        return t[0]
    if t[0] == "call":
        return f"{t[1]}({render(t[2])})"
    if t[0] == "neg":
        return f"(-({render(t[1])}))"
    return f"(({render(t[2])}) {t[1]} ({render(t[3])}))"


def reference(t, x):
    if t[0] == "num":
        return np.full_like(x, t[1])
    if t[0] == "x":
        return x.copy()
    if t[0] == "pi":
        return np.full_like(x, math.pi)
    if t[0] == "call":
        return UNARY[t[1]](reference(t[2], x))
    if t[0] == "neg":
        return -reference(t[1], x)
    a, b = reference(t[2], x), reference(t[3], x)
    return {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}[t[1]](a, b)


def test_random_expressions_match_reference():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 100:
        tree = random_tree(rng, 4)
        with np.errstate(all="ignore"):
            ref = reference(tree, X)
        if not np.all(np.isfinite(ref)) or np.max(np.abs(ref)) > 1e8:
            continue
        got = compile_expression(render(tree))(X)
        assert np.allclose(got, ref, rtol=1e-12, atol=1e-12), render(tree)
        checked += 1
