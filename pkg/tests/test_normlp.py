"""Tests for the positive norm feasibility problem."""
from dataclasses import replace

import numpy as np
import pytest
from scipy import sparse

from pointsbp.const import (
    STATUS_FEASIBLE,
    STATUS_INFEASIBLE,
    TAU_AUTO,
    TAU_LARGE,
    TAU_SMALL,
    TAU_TINY,
)
from pointsbp.exceptions import NormError
from pointsbp.geometry import NodeSet
from pointsbp.normlp import (
    MARGIN_CAP,
    NormProblem,
    finalize_norm,
    norm_tolerances,
    solve_norm,
)


def _problem(m_min, z, tau):
    z = sparse.csr_matrix(np.asarray(z, dtype=float).reshape(len(m_min), -1))
    return NormProblem(
        np.asarray(m_min, dtype=float),
        z,
        np.full(len(m_min), tau),
        np.zeros((z.shape[1], 2), dtype=int),
        {},
    )


@pytest.fixture
def nodes():
    return NodeSet(np.zeros((4, 2)), 0, 0.5, np.array([0.1, 0.2, 0.3, 0.4]), 2)


def test_tolerance_regimes(nodes):
    np.testing.assert_allclose(norm_tolerances(nodes, TAU_LARGE), 0.25 / 4)
    np.testing.assert_allclose(norm_tolerances(nodes, TAU_SMALL), 0.25 / 400)
    np.testing.assert_allclose(norm_tolerances(nodes, TAU_TINY), 0.25 / 40000)
    np.testing.assert_allclose(norm_tolerances(nodes, TAU_AUTO), [0.01, 0.02, 0.03, 0.04])
    np.testing.assert_allclose(norm_tolerances(nodes, 1e-3), 1e-3)


@pytest.mark.parametrize("tau", ["huge", 0.0, -1.0])
def test_bad_tolerance(nodes, tau):
    with pytest.raises(NormError):
        norm_tolerances(nodes, tau)


def test_already_positive():
    solution = solve_norm(_problem([1.0, 2.0], [[1.0], [-1.0]], 0.5))
    assert solution.status == STATUS_FEASIBLE
    np.testing.assert_array_equal(solution.y, [0.0])
    np.testing.assert_array_equal(solution.m, [1.0, 2.0])


def test_lp_moves_weight():
    # m = (-1 + y, 3 - y) >= 0.5 needs 1.5 <= y <= 2.5
    solution = solve_norm(_problem([-1.0, 3.0], [[1.0], [-1.0]], 0.5))
    assert solution.feasible
    assert 1.5 - 1e-9 <= solution.y[0] <= 2.5 + 1e-9
    assert np.all(solution.m >= 0.5 - 1e-9)


def test_lp_lifts_weights_off_the_bound():
    # the largest common margin puts both weights at 1
    solution = solve_norm(_problem([-1.0, 3.0], [[1.0], [-1.0]], 0.5))
    np.testing.assert_allclose(solution.m, [1.0, 1.0], atol=1e-6)
    assert solution.y[0] == pytest.approx(2.0, abs=1e-6)


def test_lp_margin_is_capped():
    solution = solve_norm(_problem([-1.0, 100.0], [[1.0], [-1.0]], 0.5))
    assert solution.feasible
    assert solution.m.min() >= 0.5 * (1.0 + MARGIN_CAP) - 1e-6


def test_infeasible_certified():
    # m = (-1 + y, 0.5 - y) >= 0.5 needs y >= 1.5 and y <= 0
    solution = solve_norm(_problem([-1.0, 0.5], [[1.0], [-1.0]], 0.5))
    assert solution.status == STATUS_INFEASIBLE
    assert solution.y is None and not solution.feasible


def test_no_free_parameters():
    solution = solve_norm(_problem([-1.0, 1.0], np.zeros((2, 0)), 0.1))
    assert solution.status == STATUS_INFEASIBLE


def test_min_norm_objective():
    # m = (0.1 + y, 0.2 + y) >= 0.2 is closest to zero at y = 0.1
    solution = solve_norm(_problem([0.1, 0.2], [[1.0], [1.0]], 0.2), qp_objective=True)
    assert solution.feasible
    assert solution.y[0] == pytest.approx(0.1, abs=1e-6)


def test_tolerance_swap_keeps_structure():
    problem = _problem([-1.0, 3.0], [[1.0], [-1.0]], 0.5)
    tighter = replace(problem, tau=np.full(2, 1.9))
    assert solve_norm(tighter).status == STATUS_INFEASIBLE
    assert solve_norm(problem).feasible


def test_pipeline_norm_bounded_below(box_build):
    assert box_build.feasible
    assert np.all(box_build.ops.m >= box_build.problem.tau * (1 - 1e-8))
    np.testing.assert_allclose(box_build.ops.m, box_build.solution.m, rtol=1e-12, atol=1e-15)


def test_problem_blocks_follow_cells(box_build):
    problem = box_build.problem
    assert problem.ny == sum(op.ny for op in box_build.cell_ops.values())
    for cid, block in problem.slices.items():
        assert block.stop - block.start == box_build.cell_ops[cid].ny
    if problem.ny:
        assert set(problem.column_map[:, 0]) <= set(box_build.cell_ops)


def test_finalize_rejects_wrong_length(box_build):
    with pytest.raises(NormError):
        finalize_norm(
            box_build.mesh, box_build.cell_ops, box_build.problem, np.zeros(box_build.problem.ny + 1)
        )
