import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from fragilefp.errors import InfeasibleError, NumericalError, SolverTimeout
from fragilefp.simplex import solve_bounded_lp


def random_lp(seed, m, n):
    """Feasible, bounded LP built around a known interior point."""
    r = np.random.default_rng(seed)
    A = r.normal(size=(m, n))
    lo = -r.uniform(0.5, 3, n)
    hi = r.uniform(0.5, 3, n)
    x_feas = r.uniform(lo, hi)
    return r.normal(size=n), A, A @ x_feas, lo, hi


@given(st.integers(0, 10**6), st.integers(1, 6), st.integers(2, 12))
def test_matches_highs(seed, m, extra):
    c, A, b, lo, hi = random_lp(seed, m, m + extra)
    res = solve_bounded_lp(c, A, b, lo, hi)
    ref = linprog(c, A_eq=A, b_eq=b, bounds=list(zip(lo, hi)), method="highs")
    assert ref.status == 0
    assert res.objective == pytest.approx(ref.fun, abs=1e-7 * max(1, abs(ref.fun)))
    assert np.allclose(A @ res.x, b, atol=1e-8)
    assert np.all(res.x >= lo - 1e-9) and np.all(res.x <= hi + 1e-9)


@given(st.integers(0, 10**6))
def test_duals_certify_optimality(seed):
    c, A, b, lo, hi = random_lp(seed, 4, 9)
    res = solve_bounded_lp(c, A, b, lo, hi)
    d = c - A.T @ res.duals  # reduced costs
    at_lo = np.isclose(res.x, lo, atol=1e-9)
    at_hi = np.isclose(res.x, hi, atol=1e-9)
    between = ~(at_lo | at_hi)
    assert np.all(np.abs(d[between]) < 1e-7)
    assert np.all(d[at_lo & ~at_hi] > -1e-7)
    assert np.all(d[at_hi & ~at_lo] < 1e-7)


def test_free_variables_and_warm_start():
    # min |x - 3| written with a free x and two non-negative slacks
    A = np.array([[1.0, -1.0, 1.0]])
    res = solve_bounded_lp([0, 1, 1], A, [3.0], [-np.inf, 0, 0], [np.inf, np.inf, np.inf], x0=[0, 0, 0])
    assert res.objective == pytest.approx(0.0)
    assert res.x[0] == pytest.approx(3.0)


def test_beale_cycling_example():
    # classic instance on which textbook Dantzig pricing cycles
    c = np.array([-0.75, 150, -0.02, 6, 0, 0, 0])
    A = np.array([[0.25, -60, -0.04, 9, 1, 0, 0],
                  [0.5, -90, -0.02, 3, 0, 1, 0],
                  [0, 0, 1, 0, 0, 0, 1]])
    b = np.array([0, 0, 1.0])
    res = solve_bounded_lp(c, A, b, 0, np.inf, bland_after=1)
    assert res.objective == pytest.approx(-0.05)


def test_infeasible():
    with pytest.raises(InfeasibleError):
        solve_bounded_lp([1, 1], [[1, 1]], [5.0], [0, 0], [1, 1])
    with pytest.raises(InfeasibleError):
        solve_bounded_lp([1], [[1]], [0.0], [1], [0])


def test_unbounded():
    with pytest.raises(NumericalError):
        solve_bounded_lp([-1, 0], [[1, -1]], [0.0], [0, 0], [np.inf, np.inf])


def test_iteration_cap():
    c, A, b, lo, hi = random_lp(3, 6, 20)
    with pytest.raises(SolverTimeout):
        solve_bounded_lp(c, A, b, lo, hi, max_iter=1)
