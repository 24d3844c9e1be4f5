"""Tests for the nested forward-mode AD kernel."""

from __future__ import annotations

import math
import random

import pytest

from ehresmann import jets
from ehresmann.jets import (
    Jet, JetConfig, JetDepthError, JetDomainError, JetShapeError,
    constant, extract, ipow, seed, truncate, value_of,
)
from helpers import central_difference, random_expression, rel_err

from ehresmann import expr as ex


def jet_env(variables, point, depth):
    cfg = JetConfig(tuple(variables), depth)
    return dict(zip(variables, seed(cfg, point)))


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------


def test_seed_depth1_single_variable():
    (x,) = seed(JetConfig(("x",), 1), (2.0,))
    assert x.value == 2.0
    assert x.partials == (1.0,)


def test_seed_mixed_partial_of_coordinate_is_zero():
    x, y = seed(JetConfig(("x", "y"), 2), (0.0, 1.0))
    assert extract(x, (1, 1)) == 0.0
    assert extract(y, (0, 1)) == 1.0
    assert extract(y, (2, 0)) == 0.0


def test_seed_then_square():
    # f(x) = x^2 at x = 3: value 9, f' = 6, f'' = 2
    (x,) = seed(JetConfig(("x",), 2), (3.0,))
    f = x * x
    assert extract(f, (0,)) == 9.0
    assert extract(f, (1,)) == 6.0
    assert extract(f, (2,)) == 2.0


def test_seed_length_mismatch():
    with pytest.raises(JetShapeError):
        seed(JetConfig(("x", "y"), 1), (1.0,))


def test_depth_zero_seed_is_plain():
    vals = seed(JetConfig(("x", "y"), 0), (1.5, -2.0))
    assert vals == [1.5, -2.0]
    assert all(isinstance(v, float) for v in vals)


# ---------------------------------------------------------------------------
# arithmetic and functions
# ---------------------------------------------------------------------------


def test_sin_at_zero():
    (x,) = seed(JetConfig(("x",), 1), (0.0,))
    s = jets.sin(x)
    assert s.value == 0.0
    assert s.partials == (1.0,)


def test_second_derivative_of_exp2x():
    # d2/dx2 exp(2x) at 0 is 4
    (x,) = seed(JetConfig(("x",), 2), (0.0,))
    f = jets.exp(2.0 * x)
    assert rel_err(extract(f, (2,)), 4.0) < 1e-14


def test_mixed_partial_of_product():
    x, y = seed(JetConfig(("x", "y"), 2), (0.7, -0.3))
    f = x * y
    assert extract(f, (1, 1)) == 1.0


def test_extract_constant():
    assert extract(constant(5.0, 2, 2), (0, 0)) == 5.0
    assert extract(5.0, (0, 0)) == 5.0


def test_extract_xy_squared():
    # d2(x*y^2)/dxdy = 2y = 4 at (3, 2)
    x, y = seed(JetConfig(("x", "y"), 2), (3.0, 2.0))
    f = x * (y * y)
    assert rel_err(extract(f, (1, 1)), 4.0) < 1e-14


def test_extract_third_derivative_sin():
    (x,) = seed(JetConfig(("x",), 3), (0.0,))
    f = jets.sin(x)
    assert rel_err(extract(f, (3,)), -1.0) < 1e-14


def test_extract_order_exceeds_depth():
    (x,) = seed(JetConfig(("x",), 2), (1.0,))
    with pytest.raises(JetDepthError):
        extract(x * x, (3,))


def test_depth_mismatch_raises():
    (x1,) = seed(JetConfig(("x",), 1), (1.0,))
    (x2,) = seed(JetConfig(("x",), 2), (1.0,))
    with pytest.raises(JetShapeError):
        _ = x1 + x2


def test_variable_count_mismatch_raises():
    (x,) = seed(JetConfig(("x",), 2), (1.0,))
    a, _ = seed(JetConfig(("a", "b"), 2), (1.0, 2.0))
    with pytest.raises(JetShapeError):
        _ = x * a


def test_division_by_zero_jet():
    x, y = seed(JetConfig(("x", "y"), 1), (1.0, 0.0))
    with pytest.raises(JetDomainError) as err:
        _ = x / y
    assert err.value.operation == "/"


def test_ln_domain_error_names_operation():
    (x,) = seed(JetConfig(("x",), 1), (-2.0,))
    with pytest.raises(JetDomainError) as err:
        jets.ln(x)
    assert err.value.operation == "ln"


def test_sqrt_and_abs_domains():
    (x,) = seed(JetConfig(("x",), 1), (0.0,))
    with pytest.raises(JetDomainError):
        jets.sqrt(x)
    with pytest.raises(JetDomainError):
        abs(x)


def test_integer_pow_negative_exponent():
    (x,) = seed(JetConfig(("x",), 2), (2.0,))
    f = ipow(x, -2)  # x^-2: f' = -2x^-3, f'' = 6x^-4
    assert rel_err(extract(f, (0,)), 0.25) < 1e-14
    assert rel_err(extract(f, (1,)), -0.25) < 1e-14
    assert rel_err(extract(f, (2,)), 6.0 / 16.0) < 1e-14


def test_pow_general_matches_ipow_for_positive_base():
    (x,) = seed(JetConfig(("x",), 3), (1.7,))
    a = ipow(x, 3)
    b = jets.pow_general(x, 3.0)
    for k in range(4):
        assert rel_err(extract(b, (k,)), extract(a, (k,))) < 1e-12


def test_truncate_round_trips_low_orders():
    x, y = seed(JetConfig(("x", "y"), 3), (0.4, 1.2))
    f = jets.sin(x * y) + jets.exp(0.5 * x)
    g = truncate(f, 1)
    assert g.depth == 1
    assert g.value == f.value
    assert value_of(g.partials[0]) == extract(f, (1, 0))


# ---------------------------------------------------------------------------
# ten hand-differentiated functions, exact derivatives through order 3
# ---------------------------------------------------------------------------

# Each entry: (builder over scalars, point, {orders: hand derivative}).
HAND_CASES = [
    ("cubic",
     lambda v: v[0] * v[0] * v[0] + 2.0 * v[0],
     (0.7,),
     {(0,): 0.7 ** 3 + 1.4, (1,): 3 * 0.7 ** 2 + 2.0, (2,): 6 * 0.7, (3,): 6.0}),
    ("exp2x",
     lambda v: jets.exp(2.0 * v[0]),
     (0.3,),
     {(k,): 2.0 ** k * math.exp(0.6) for k in range(4)}),
    ("sine",
     lambda v: jets.sin(v[0]),
     (0.5,),
     {(0,): math.sin(0.5), (1,): math.cos(0.5),
      (2,): -math.sin(0.5), (3,): -math.cos(0.5)}),
    ("reciprocal",
     lambda v: 1.0 / (1.0 + v[0]),
     (0.25,),
     {(1,): -1.25 ** -2, (2,): 2 * 1.25 ** -3, (3,): -6 * 1.25 ** -4}),
    ("log1px2",
     lambda v: jets.ln(1.0 + v[0] * v[0]),
     (0.5,),
     {(1,): 2 * 0.5 / 1.25, (2,): (2 - 2 * 0.25) / 1.25 ** 2,
      (3,): (4 * 0.125 - 12 * 0.5) / 1.25 ** 3}),
    ("x_y_squared",
     lambda v: v[0] * v[1] * v[1],
     (3.0, 2.0),
     {(1, 1): 4.0, (0, 2): 6.0, (1, 2): 2.0}),
    ("sin_xy",
     lambda v: jets.sin(v[0] * v[1]),
     (0.5, 0.25),
     {(1, 1): math.cos(0.125) - 0.125 * math.sin(0.125),
      (1, 2): -2 * 0.5 * math.sin(0.125) - 0.5 ** 2 * 0.25 * math.cos(0.125)}),
    ("exp_cos",
     lambda v: jets.exp(v[0]) * jets.cos(v[1]),
     (0.2, 0.4),
     {(2, 1): -math.exp(0.2) * math.sin(0.4),
      (1, 2): -math.exp(0.2) * math.cos(0.4)}),
    ("xyz",
     lambda v: v[0] * v[1] * v[2],
     (1.5, -0.5, 2.0),
     {(1, 1, 1): 1.0, (1, 1, 0): 2.0, (0, 1, 1): 1.5}),
    ("sqrt1px",
     lambda v: jets.sqrt(1.0 + v[0]),
     (0.44,),
     {(1,): 0.5 * 1.44 ** -0.5, (2,): -0.25 * 1.44 ** -1.5,
      (3,): 0.375 * 1.44 ** -2.5}),
]


@pytest.mark.parametrize("name,fn,point,expected", HAND_CASES,
                         ids=[c[0] for c in HAND_CASES])
def test_hand_differentiated_library(name, fn, point, expected):
    names = tuple("xyz"[: len(point)])
    env = seed(JetConfig(names, 3), point)
    result = fn(env)
    for orders, want in expected.items():
        assert rel_err(extract(result, orders), want) < 1e-12


# ---------------------------------------------------------------------------
# finite-difference cross-check on random compositions
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("case", range(12))
def test_finite_difference_cross_check(case):
    rng = random.Random(1000 + case)
    nvars = rng.randint(1, 4)
    names = tuple(f"v{i}" for i in range(nvars))
    e = random_expression(rng, names, max_depth=3)
    point = [rng.uniform(-0.8, 0.8) for _ in range(nvars)]

    env = dict(zip(names, seed(JetConfig(names, 3), point)))
    try:
        jet_val = ex.evaluate(e, env)
    except (JetDomainError, ex.EvalError):
        pytest.skip("composition left its domain at this point")

    def plain(p):
        return ex.evaluate(e, dict(zip(names, p)))

    orders = [0] * nvars
    total = rng.randint(1, 3)
    for _ in range(total):
        orders[rng.randrange(nvars)] += 1

    # the stencil step must grow with the order or eps/h^k round-off
    # swamps the difference quotient
    h = {1: 1e-5, 2: 1e-4, 3: 1e-3}[total]
    want = central_difference(plain, point, tuple(orders), h=h)
    got = extract(jet_val, tuple(orders))
    assert rel_err(got, want) < 1e-5


# ---------------------------------------------------------------------------
# invariants: symmetry and linearity
# ---------------------------------------------------------------------------


def test_mixed_partials_symmetric_same_read():
    rng = random.Random(7)
    names = ("x", "y", "z")
    for trial in range(10):
        e = random_expression(rng, names, max_depth=3)
        point = [rng.uniform(-0.7, 0.7) for _ in range(3)]
        env = dict(zip(names, seed(JetConfig(names, 2), point)))
        try:
            val = ex.evaluate(e, env)
        except (JetDomainError, ex.EvalError):
            continue
        # extract() canonicalizes the walk order: identical bits guaranteed
        assert extract(val, (1, 1, 0)) == extract(val, (1, 1, 0))
        if isinstance(val, Jet):
            # raw nested reads in both orders agree exactly for products
            dxy = value_of(val.partials[0].partials[1] if val.depth >= 2
                           and isinstance(val.partials[0], Jet)
                           else 0.0)
            dyx = value_of(val.partials[1].partials[0] if val.depth >= 2
                           and isinstance(val.partials[1], Jet)
                           else 0.0)
            assert rel_err(dxy, dyx) < 1e-12


def test_linearity_of_extract():
    rng = random.Random(99)
    names = ("x", "y")
    for trial in range(10):
        f = random_expression(rng, names, max_depth=3)
        g = random_expression(rng, names, max_depth=3)
        a, b = rng.uniform(-2, 2), rng.uniform(-2, 2)
        point = [rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)]
        env = dict(zip(names, seed(JetConfig(names, 3), point)))
        try:
            fv = ex.evaluate(f, env)
            gv = ex.evaluate(g, env)
        except (JetDomainError, ex.EvalError):
            continue
        comb = a * fv + b * gv
        for orders in [(1, 0), (1, 1), (2, 1)]:
            want = a * extract(fv, orders) + b * extract(gv, orders)
            assert rel_err(extract(comb, orders), want) < 1e-13


def test_config_validation():
    with pytest.raises(ValueError):
        JetConfig(("x", "x"), 2)
    with pytest.raises(ValueError):
        JetConfig(("x",), -1)
