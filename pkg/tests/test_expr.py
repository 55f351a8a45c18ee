import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hovar.dual import EvaluationError
from hovar.expr import (
    ExprSyntaxError,
    Jet,
    ShapeError,
    evaluate,
    grad_jet,
    hess_jet,
    parse,
    random_polynomial,
)

from helpers import FIXTURE_LAGRANGIANS, central_gradient, relative_error

K = (3 / 5) ** (5 / 3)


def jet(t, *levels):
    return Jet(t, [[v] if np.isscalar(v) else list(v) for v in levels])


def test_minimal_grammar_case():
    e = parse("d1x[1]^2")
    assert (e.m, e.n) == (1, 1)


def test_example_lagrangian_arity():
    e = parse("abs(x[1]^2 - d1x[1]^5)^2 * abs(d2x[1])^22 + 0.001*d2x[1]^2")
    assert (e.m, e.n) == (2, 1)


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x[1]^")
    assert info.value.offset == 5
    assert "offset 5" in str(info.value)


def test_syntax_error_reports_line_and_column():
    with pytest.raises(ExprSyntaxError) as info:
        parse("d1x[1]^2 +\n  * 3")
    assert (info.value.line, info.value.column) == (2, 3)


@pytest.mark.parametrize("src", ["x[0]", "d0x[1]", "x[-1]", "y[1]", "min(x[1])", "x[1] +", "(x[1]", "x 1", "d2x"])
def test_rejected_sources(src):
    with pytest.raises(ExprSyntaxError):
        parse(src)


def test_unknown_identifier_message():
    with pytest.raises(ExprSyntaxError, match="unknown identifier"):
        parse("foo(x[1])")


def test_eval_square_of_velocity():
    assert evaluate(parse("d1x[1]^2"), jet(0.0, 0.0, 3.0)) == 9.0


def test_eval_example_along_power_curve():
    eps = 0.001
    e = parse(FIXTURE_LAGRANGIANS["example_cv90"])
    t = 0.5
    x, v, w = K * t ** (5 / 3), 5 * K / 3 * t ** (2 / 3), 10 * K / 9 * t ** (-1 / 3)
    val = evaluate(e, jet(t, x, v, w))
    # x^2 - v^5 vanishes along the curve up to rounding
    assert abs(x**2 - v**5) < 1e-15
    assert np.isclose(val, eps * w**2, rtol=1e-12)
    g = grad_jet(e, jet(t, x, v, w))
    assert np.isclose(g.d_x[2][0], 2 * eps * w, rtol=1e-10)


def test_shape_mismatch():
    e = parse("d2x[1]^2")
    with pytest.raises(ShapeError):
        evaluate(e, jet(0.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        Jet(0.0, [[0.0], [1.0, 2.0]])


def test_non_finite_results_raise():
    with pytest.raises(EvaluationError):
        evaluate(parse("1/x[1]"), jet(0.0, 0.0, 1.0))
    with pytest.raises(EvaluationError):
        evaluate(parse("log(x[1])"), jet(0.0, -1.0, 1.0))
    with pytest.raises(EvaluationError):
        evaluate(parse("exp(d1x[1])"), jet(0.0, 0.0, 1e4))


def test_grad_of_square():
    g = grad_jet(parse("d1x[1]^2"), jet(0.0, 0.0, 3.0))
    assert g.d_x[1][0] == 6 and g.d_t == 0 and g.d_x[0][0] == 0


def test_hessians_of_powers():
    h = hess_jet(parse("d1x[1]^2"), jet(0.2, 0.5, -1.0))
    expect = np.zeros((3, 3))
    expect[2, 2] = 2
    assert np.array_equal(h, expect)
    assert hess_jet(parse("d1x[1]^4"), jet(0.0, 0.0, 2.0))[2, 2] == 48


def test_precedence_and_associativity():
    e = parse("-x[1]^2 + 2^3^2 / 4 - 1 - 1")
    assert evaluate(e, jet(0.0, 3.0, 0.0)) == -9 + 512 / 4 - 2
    assert evaluate(parse("2^-1"), jet(0.0, 0.0, 0.0)) == 0.5
    assert evaluate(parse("2 * -x[1]"), jet(0.0, 3.0, 0.0)) == -6


def test_non_integer_power_needs_positive_base():
    e = parse("x[1]^0.5")
    assert np.isclose(evaluate(e, jet(0.0, 4.0, 0.0)), 2.0)
    with pytest.raises(EvaluationError):
        evaluate(e, jet(0.0, -4.0, 0.0))


def test_autonomy_flag():
    assert parse("d1x[1]^2").autonomous
    assert not parse("t*d1x[1]").autonomous


def _random_jet(rng, m, n, scale=1.0):
    return Jet(rng.uniform(0, 1), rng.uniform(-scale, scale, (m + 1, n)).tolist())


def _fd_check(e, j):
    m, n = j.m, j.n

    def f(z):
        return evaluate(e, Jet.from_coordinates(z, m, n))

    ad = grad_jet(e, j).coordinates()
    return relative_error(ad, central_gradient(f, j.coordinates()))


@pytest.mark.parametrize("name", sorted(FIXTURE_LAGRANGIANS))
def test_gradient_matches_finite_differences(name):
    e = parse(FIXTURE_LAGRANGIANS[name])
    rng = np.random.default_rng(11)
    errs = [_fd_check(e, _random_jet(rng, e.m, e.n)) for _ in range(25)]
    assert max(errs) < 1e-6


def test_random_polynomials_gradient_and_hessian():
    rng = np.random.default_rng(5)
    for _ in range(20):
        m, n = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        e = random_polynomial(rng, m, n)
        j = _random_jet(rng, m, n)
        assert _fd_check(e, j) < 1e-6
        H = hess_jet(e, j)
        assert np.max(np.abs(H - H.T)) < 1e-12

        def g(z):
            return grad_jet(e, Jet.from_coordinates(z, m, n)).coordinates()

        z = j.coordinates()
        fd = np.array([(g(z + 1e-5 * u) - g(z - 1e-5 * u)) / 2e-5 for u in np.eye(len(z))])
        assert relative_error(H, fd, floor=1e-6) < 1e-5


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_print_parse_roundtrip(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 4)), int(rng.integers(1, 3))
    e = random_polynomial(rng, m, n, terms=int(rng.integers(1, 6)))
    again = parse(str(e))
    assert (again.m, again.n) == (e.m, e.n)
    for _ in range(3):
        j = _random_jet(rng, m, n)
        assert evaluate(again, j) == evaluate(e, j)


@pytest.mark.parametrize("src", list(FIXTURE_LAGRANGIANS.values()) + ["sin(t)*cos(x[1]) - exp(-d1x[1]^2)/sqrt(1 + x[1]^2)"])
def test_print_parse_roundtrip_on_fixtures(src):
    e = parse(src)
    again = parse(str(e))
    rng = np.random.default_rng(2)
    for _ in range(5):
        j = _random_jet(rng, max(e.m, 1), max(e.n, 1))
        assert evaluate(again, j) == evaluate(e, j)


def test_evaluation_is_pure():
    e = parse(FIXTURE_LAGRANGIANS["mania"])
    j = jet(0.3, 0.7, 1.9)
    assert evaluate(e, j) == evaluate(e, j)
    assert grad_jet(e, j) == grad_jet(e, j)


def test_batched_values_match_pointwise():
    e = parse("t*x[1]*d1x[2] + d1x[1]^2")
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 2, 6))
    t = rng.uniform(size=6)
    vals = e.values(t, x)
    for k in range(6):
        assert np.isclose(vals[k], evaluate(e, Jet(t[k], x[:, :, k].tolist())))
