import numpy as np
import pytest

from oracles import random_int_lp, vertex_lp
from spvkit.lp import LinearProgram, Status, from_mps, solve_lp, to_mps


def lp(c, A, senses, b, lower=None, upper=None):
    return LinearProgram(np.array(c, float), np.array(A, float), senses, np.array(b, float), lower, upper)


@pytest.mark.parametrize("method", ["auto", "primal", "dual"])
def test_single_bound(method):
    s = solve_lp(lp([1], [[1]], [">="], [1]), method)
    assert s.status is Status.OPTIMAL
    assert s.x == pytest.approx([1.0])
    assert s.objective == pytest.approx(1.0)


@pytest.mark.parametrize("method", ["auto", "primal", "dual"])
def test_infeasible(method):
    s = solve_lp(lp([1], [[1], [1]], [">=", "<="], [1, 0]), method)
    assert s.status is Status.INFEASIBLE
    assert not s.ok


@pytest.mark.parametrize("method", ["auto", "primal", "dual"])
def test_two_variable_vertex(method):
    s = solve_lp(lp([1, 1], [[1, 2], [2, 1]], [">=", ">="], [2, 2]), method)
    assert s.status is Status.OPTIMAL
    assert s.x == pytest.approx([2 / 3, 2 / 3], abs=1e-12)
    assert s.objective == pytest.approx(4 / 3, rel=1e-12)
    assert s.dual_objective == pytest.approx(4 / 3, rel=1e-12)
    assert s.row_dual == pytest.approx([1 / 3, 1 / 3])


def test_unbounded():
    s = solve_lp(lp([-1, 0], [[1, -1]], ["<="], [1]))
    assert s.status is Status.UNBOUNDED


def test_free_variables_and_equalities():
    free = [-np.inf, -np.inf]
    s = solve_lp(lp([1, 1], [[1, -1], [1, 1]], ["=", ">="], [3, -5], free, [np.inf, np.inf]))
    assert s.status is Status.OPTIMAL
    assert s.objective == pytest.approx(-5)
    assert s.x[0] - s.x[1] == pytest.approx(3)


def test_bounds_only():
    s = solve_lp(LinearProgram(np.array([2.0, -1.0]), np.zeros((0, 2)), [], np.zeros(0), [1, -3], [4, 7]))
    assert s.x == pytest.approx([1, 7])
    assert s.bound_dual == pytest.approx([2, -1])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(c=[1, 2], A=[[1, 2, 3]], senses=[">="], b=[1]),
        dict(c=[1], A=[[1]], senses=[">="], b=[1, 2]),
        dict(c=[1], A=[[1]], senses=["=>"], b=[1]),
        dict(c=[np.nan], A=[[1]], senses=[">="], b=[1]),
        dict(c=[1], A=[[1]], senses=[">="], b=[1], lower=[np.inf]),
    ],
)
def test_construction_errors(kwargs):
    with pytest.raises(ValueError):
        lp(**kwargs)


def test_unknown_method():
    with pytest.raises(ValueError):
        solve_lp(lp([1], [[1]], [">="], [1]), "interior")


def test_routes_agree_and_duality_holds_on_random_programs():
    rng = np.random.default_rng(7)
    for _ in range(300):
        c, A, senses, b, lower, upper = random_int_lp(rng)
        prog = LinearProgram(c, A, senses, b, lower, upper)
        p, d = solve_lp(prog, "primal"), solve_lp(prog, "dual")
        assert p.status is d.status
        if p.ok:
            assert p.objective == pytest.approx(d.objective, rel=1e-9, abs=1e-9)
            for s in (p, d):
                assert s.objective == pytest.approx(s.dual_objective, rel=1e-7, abs=1e-7)
                assert A.T @ s.row_dual + s.bound_dual == pytest.approx(c, abs=1e-7)
                assert prog.residual(s.x) <= 1e-7 * (1 + np.max(np.abs(b)))


def test_matches_vertex_enumeration():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        c, A, senses, b, lower, upper = random_int_lp(rng)
        status, value = vertex_lp(c, A, senses, b, lower, upper)
        s = solve_lp(LinearProgram(c, A, senses, b, lower, upper))
        assert s.status.value == status
        if status == "optimal":
            assert s.objective == pytest.approx(value, rel=1e-7, abs=1e-7)


def test_deterministic_bit_pattern():
    rng = np.random.default_rng(3)
    t = rng.random(400)
    A = np.vstack([np.column_stack([np.ones_like(t), t, np.ones_like(t)]), np.column_stack([-np.ones_like(t), -t, np.ones_like(t)])])
    y = np.sin(5 * t)
    prog = LinearProgram([0, 0, 1], A, [">="] * 800, np.concatenate([y, -y]), [-np.inf] * 3, [np.inf] * 3)
    a, b = solve_lp(prog), solve_lp(prog)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.route == "dual"


def test_many_rows_dual_route_matches_primal():
    rng = np.random.default_rng(11)
    A = rng.normal(size=(120, 3))
    b = rng.normal(size=120) - 3.0
    prog = LinearProgram(np.ones(3), A, [">="] * 120, b, [-5] * 3, [5] * 3)
    p, d = solve_lp(prog, "primal"), solve_lp(prog, "dual")
    assert p.ok and d.ok
    assert p.objective == pytest.approx(d.objective, rel=1e-9)


def test_mps_round_trip():
    prog = LinearProgram(
        np.array([1.5, -2.0, 0.0]),
        np.array([[1.0, 2.0, 0.0], [0.0, -1.0, 3.25], [4.0, 0.0, 1.0]]),
        ["<=", ">=", "="],
        np.array([4.0, -1.0, 2.0]),
        np.array([-np.inf, 0.0, -2.0]),
        np.array([3.0, np.inf, -2.0]),
        name="SMALL",
    )
    text = to_mps(prog)
    assert text.startswith("NAME")
    assert text.rstrip().endswith("ENDATA")
    back = from_mps(text)
    assert back.name == "SMALL"
    np.testing.assert_array_equal(back.c, prog.c)
    np.testing.assert_array_equal(back.A, prog.A)
    np.testing.assert_array_equal(back.b, prog.b)
    np.testing.assert_array_equal(back.lower, prog.lower)
    np.testing.assert_array_equal(back.upper, prog.upper)
    assert back.senses == prog.senses
