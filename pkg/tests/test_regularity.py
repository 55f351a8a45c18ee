import numpy as np
import pytest

from hovar import fixtures
from hovar.expr import parse
from hovar.regularity import (
    HOLDS,
    INCONCLUSIVE,
    VIOLATED,
    BudgetError,
    JetBox,
    check_condition,
    check_conditions,
    check_tonelli_hypotheses,
    fit_lower,
    fit_upper,
    sample_S_hypotheses,
)
from hovar.trajectory import Mesh, polynomial_trajectory

SUPER = parse("d2x[1]*(1 + d1x[1]^2) + d2x[1]^3/3")


def second_order_box(r=10.0, counts=9, seed=0):
    return JetBox((0, 1), [[(-1, 1)], [(-r, r)], [(-r, r)]], counts, seed)


def first_order_box(r=2.0, counts=15, seed=0, n=1):
    return JetBox((0, 1), [[(-r, r)] * n, [(-r, r)] * n], counts, seed)


def jets(L, box):
    t, x = box.samples()
    val, grad, hess = L.derivatives(t, x, second_order=True)
    return t, x, val, grad[0], grad[1:].reshape(box.m + 1, box.n, -1), hess


# ---------------------------------------------------------------------------
# worked examples


def test_h4_superlinear_example():
    v = check_condition(SUPER, second_order_box(), "h4")
    assert v.status == HOLDS
    assert v.witness == {"a": 0.5, "b": 0.5}


def test_h4_example_lagrangian_vanishes():
    L = parse(fixtures.load("example_cv90")["lagrangian"])
    box = JetBox.from_dict(fixtures.load("example_cv90")["box"])
    v = check_condition(L, box, "h4")
    assert v.status == VIOLATED and v.point is not None
    assert v.point["partial"] < 1e-12
    assert abs(v.point["x"][2][0]) < 1e-3


def test_cv_autonomous_trivial():
    v = check_condition(parse("d1x[1]^2 + sin(x[1])"), first_order_box(), "cv_autonomous")
    assert v.status == HOLDS and v.witness["c"] == 0 and not any(v.witness["k"])


def test_tonelli_morrey_dirichlet():
    v = check_condition(parse("d1x[1]^2"), first_order_box(), "tonelli_morrey")
    assert v.status == HOLDS and v.witness == {"c": 1.0, "r": 1.0}


def test_tonelli_hypotheses_quadratic():
    h2, h3 = check_tonelli_hypotheses(parse("d2x[1]^2"), second_order_box())
    assert h2.status == HOLDS and h3.status == HOLDS
    assert h3.witness == {"a": 1.0, "b": 0.0}


def test_tonelli_hypotheses_cubic():
    h2, h3 = check_tonelli_hypotheses(parse("d2x[1]^3"), second_order_box())
    assert h2.status == VIOLATED and h2.point is not None
    assert h3.status == VIOLATED


def test_tonelli_hypotheses_example():
    L = parse(fixtures.load("example_cv90")["lagrangian"])
    box = JetBox.from_dict(fixtures.load("example_cv90")["box"])
    h2, h3 = check_tonelli_hypotheses(L, box)
    assert h2.status == HOLDS
    assert h3.status == HOLDS and h3.witness == {"a": 0.001, "b": 0.0}


def test_tension_note_when_h3_holds_and_h4_fails():
    L = parse(fixtures.load("example_cv90")["lagrangian"])
    box = JetBox.from_dict(fixtures.load("example_cv90")["box"])
    h3, h4 = check_conditions(L, box, ["h3", "h4"])
    assert h3.status == HOLDS and h4.status == VIOLATED
    assert any("opposite" in n for n in h3.notes) and any("opposite" in n for n in h4.notes)


# ---------------------------------------------------------------------------
# soundness: the reported constants pass at every sample


FIRST = [
    "d1x[1]^2",
    "d1x[1]^2 + x[1]^2",
    "exp(t)*d1x[1]^2 + t*x[1]",
    "(1 + x[1]^2)*d1x[1]^2 + x[1]",
    "d1x[1]^4 + t^2*x[1]^2",
]


def _assert_sound(L, box, v):
    t, x, val, Lt, Lx, hess = jets(L, box)
    w = v.witness
    norm = lambda a: np.linalg.norm(a, axis=0)
    if v.id == "tonelli_morrey":
        assert np.all(norm(Lx[0]) + norm(Lx[1]) <= w["c"] * np.abs(val) + w["r"])
    elif v.id == "cv_autonomous":
        k = np.asarray(w["k"])
        idx = np.clip(np.searchsorted(w["k_edges"], t, side="right") - 1, 0, len(k) - 1)
        assert np.all(np.abs(Lt) <= w["c"] * np.abs(val) + k[idx])
    elif v.id == "cv_weighted":
        k, mm = np.asarray(w["k"]), np.asarray(w["m"])
        idx = np.clip(np.searchsorted(w["k_edges"], t, side="right") - 1, 0, len(k) - 1)
        assert np.all(norm(Lx[0]) <= w["c"] * np.abs(val) + k[idx] * norm(Lx[1]) + mm[idx])
    elif v.id == "sarychev_torres":
        with np.errstate(divide="ignore", invalid="ignore"):
            lhs = (np.abs(Lt) + norm(Lx[0])) * norm(x[1]) ** w["mu"]
        u = val ** w["beta"] if w["beta"] else np.ones_like(val)
        assert np.all(lhs <= w["gamma"] * u + w["eta"])
    elif v.id == "h4":
        m = box.m
        u = sum(norm(x[i]) for i in range(1, m + 1))
        assert np.all(w["a"] * u + w["b"] <= norm(Lx[m]))


@pytest.mark.parametrize("expr", FIRST)
@pytest.mark.parametrize("cid", ["tonelli_morrey", "cv_autonomous", "cv_weighted", "sarychev_torres"])
def test_witnesses_are_sound(expr, cid):
    L = parse(expr)
    box = first_order_box(counts=11, seed=3)
    v = check_condition(L, box, cid)
    assert v.status in (HOLDS, VIOLATED, INCONCLUSIVE)
    if v.status == HOLDS:
        _assert_sound(L, box, v)
    elif v.status == VIOLATED:
        assert v.point is not None


def test_h4_witness_sound_on_other_boxes():
    for r in (1.0, 3.0, 30.0):
        box = second_order_box(r=r, counts=7, seed=int(r))
        v = check_condition(SUPER, box, "h4")
        assert v.status == HOLDS
        _assert_sound(SUPER, box, v)


def test_known_statuses_for_first_order_checks():
    box = first_order_box()
    assert check_condition(parse("d1x[1]^2 + x[1]^2"), box, "tonelli_morrey").status == HOLDS
    # L_vv = 12 v^2 vanishes on the lattice line v = 0 of an unjittered odd lattice
    on_zero = JetBox((0, 1), [[(-2, 2)], [(-2, 2)]], 15, 0, jitter=0.0)
    assert check_condition(parse("d1x[1]^4 + t^2*x[1]^2"), on_zero, "cv_vectorial").status == VIOLATED
    assert check_condition(parse("d1x[1]^2 + x[1]^2"), box, "cv_vectorial").status == HOLDS
    assert check_condition(parse("d1x[1]^2"), box, "sarychev_torres").status == HOLDS


def test_cv_vectorial_needs_definite_hessian():
    box = JetBox((0, 1), [[(-1, 1), (-1, 1)], [(-1, 1), (-1, 1)]], 5)
    assert check_condition(parse("d1x[1]^2 + d1x[2]^2"), box, "cv_vectorial").status == HOLDS
    v = check_condition(parse("d1x[1]^2 - d1x[2]^2"), box, "cv_vectorial")
    assert v.status == VIOLATED and v.point["min_eigenvalue"] <= 0


# ---------------------------------------------------------------------------
# structure, determinism, budgets


def test_h4_structural_zero():
    # dL/dx'' = x'' vanishes on the lattice line x'' = 0 when counts is odd and jitter is off
    box = JetBox((0, 1), [[(-1, 1)], [(-1, 1)], [(-1, 1)]], 5, 0, jitter=0.0)
    v = check_condition(parse("d2x[1]^2/2"), box, "h4")
    assert v.status == VIOLATED and v.point["partial"] < 1e-12


def test_h4_sign_change_is_located():
    box = second_order_box(r=2.0, counts=6)
    v = check_condition(parse("d2x[1]^2 + d1x[1]*d2x[1]"), box, "h4")
    assert v.status == VIOLATED and v.point["partial"] < 1e-12


def test_deterministic():
    box = first_order_box(seed=11)
    L = parse("exp(t)*d1x[1]^2 + t*x[1]")
    for cid in ("cv_weighted", "sarychev_torres", "cv_autonomous"):
        assert check_condition(L, box, cid).to_dict() == check_condition(L, box, cid).to_dict()
    assert check_condition(L, box, "cv_weighted").to_dict() == check_condition(L, JetBox.from_dict(box.to_dict()), "cv_weighted").to_dict()


def test_nested_boxes_only_lose_status():
    L = SUPER
    order = {HOLDS: 0, INCONCLUSIVE: 1, VIOLATED: 2}
    prev = -1
    for r, lo in ((1.0, 0.5), (1.0, 0.0), (1.0, -1.0)):
        # grow the x'' interval from [lo, r] so it eventually straddles no zero of 1 + x'^2 + x''^2
        box = JetBox((0, 1), [[(-1, 1)], [(-1, 1)], [(lo, r)]], 7)
        s = order[check_condition(L, box, "h4").status]
        assert s >= prev
        prev = s
    L = parse("d2x[1]^2 + d1x[1]")
    prev = -1
    for lo in (0.5, 0.1, -0.5):
        box = JetBox((0, 1), [[(-1, 1)], [(-1, 1)], [(lo, 1.0)]], 7)
        s = order[check_condition(L, box, "h4").status]
        assert s >= prev
        prev = s
    assert prev == order[VIOLATED]


def test_budget_error():
    with pytest.raises(BudgetError):
        JetBox((0, 1), [[(-1, 1)], [(-1, 1)], [(-1, 1)]], 60)


def test_box_validation():
    with pytest.raises(ValueError):
        JetBox((1, 0), [[(-1, 1)], [(-1, 1)]])
    with pytest.raises(ValueError):
        JetBox((0, 1), [[(-1, 1)], [(1, 1)]])
    with pytest.raises(ValueError):
        JetBox((0, 1), [[(-1, 1)], [(-1, 1)]], counts=(3, 3))
    with pytest.raises(ValueError, match="x"):
        JetBox.from_dict({"t": [0, 1]})


def test_first_order_conditions_reject_second_order_boxes():
    with pytest.raises(ValueError):
        check_condition(SUPER, second_order_box(), "tonelli_morrey")
    with pytest.raises(ValueError):
        check_condition(SUPER, second_order_box(), "no_such_condition")


def test_fit_helpers_are_exact():
    u = np.array([0.0, 1.0, 3.0])
    v = np.array([1.0, 2.0, 4.0])
    tau, _ = fit_upper(u, v)
    assert tau == 1.0 and np.all(v <= tau * u + tau)
    tau, _ = fit_lower(u, v)
    assert np.all(tau * u + tau <= v) and tau >= 0.5


# ---------------------------------------------------------------------------
# dominating envelopes along a trajectory


def test_S0_vanishes_for_autonomous():
    x = polynomial_trajectory(Mesh.uniform(0, 1, 2), 2, [0, 0, 3, -2])
    table = sample_S_hypotheses(parse("d2x[1]^2 + x[1]*d1x[1]"), x, 0.1)
    assert np.all(table.envelopes["S0:t"] == 0) and table.norms["S0:t"] == 0
    assert table.exponent == 2.0


def test_S_envelope_on_the_line():
    x = polynomial_trajectory(Mesh.uniform(0, 1, 2), 1, [0.0, 1.0])
    table = sample_S_hypotheses(parse("d1x[1]^2"), x, 0.1)
    assert np.allclose(table.envelopes["S:d1x1"], 2.2)
    assert np.isclose(table.norms["S:d1x1"], 2.2) and table.exponent == np.inf
    assert np.all(table.envelopes["S:x1"] == 0)


def test_S_requires_positive_delta():
    x = polynomial_trajectory(Mesh.uniform(0, 1, 2), 1, [0.0, 1.0])
    with pytest.raises(ValueError):
        sample_S_hypotheses(parse("d1x[1]^2"), x, 0.0)
