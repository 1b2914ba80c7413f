import numpy as np
import pytest

from dualfb.errors import InputError, RangeTooSmallError, RankError
from dualfb.oracles import (
    GridSpec,
    dykstra_reference,
    grid_argmin_scalar,
    min_norm_closed_form,
    primal_grid_oracle,
)
from dualfb.prox.functions import Indicator, ScalarLift, Zero
from dualfb.prox.scalar import Huber, NegLog, Power
from dualfb.prox.sets import Box, Interval, Singleton
from dualfb.solver import ProblemInstance
from dualfb.spaces import identity

WIDE = GridSpec([-5.0], [5.0])


def test_grid_soft_threshold():
    assert grid_argmin_scalar(Power(1, 1.0), 1.0, 2.0, WIDE) == pytest.approx(1.0, abs=1e-6)


def test_grid_neg_log():
    assert grid_argmin_scalar(NegLog(1.0), 1.0, 0.0, WIDE) == pytest.approx(1.0, abs=1e-6)


def test_grid_huber_linear_branch():
    assert grid_argmin_scalar(Huber(1.0, 1.0), 1.0, 5.0, GridSpec([-10.0], [10.0])) == pytest.approx(
        5 - np.sqrt(2), abs=1e-6
    )


def test_grid_quadratic_self_consistency():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, g, xi = rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(-4, 4)
        assert grid_argmin_scalar(Power(2, a), g, xi, WIDE) == pytest.approx(xi / (1 + 2 * a * g), abs=1e-6)


def test_grid_boundary_raises():
    with pytest.raises(RangeTooSmallError):
        grid_argmin_scalar(Power(2, 1.0), 1.0, 30.0, WIDE)


def test_grid_all_infinite_raises():
    with pytest.raises(RangeTooSmallError):
        grid_argmin_scalar(NegLog(1.0), 1.0, 0.0, GridSpec([-5.0], [-1.0]))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(lower=[0.0], upper=[0.0]),
        dict(lower=[0.0, 0.0], upper=[1.0]),
        dict(lower=[0.0] * 4, upper=[1.0] * 4),
        dict(lower=[0.0], upper=[1.0], step=0.0),
        dict(lower=[0.0], upper=[np.inf]),
    ],
)
def test_gridspec_validation(kwargs):
    with pytest.raises(InputError):
        GridSpec(**kwargs)


def test_grid_point_budget():
    with pytest.raises(InputError):
        grid_argmin_scalar(Power(2, 1.0), 1.0, 0.0, GridSpec([-1e5], [1e5], step=1e-3))


def test_primal_oracle_abs():
    P = ProblemInstance(Zero(1), ScalarLift(Power(1, 1.0), 1), identity(1), np.array([3.0]), None, True)
    assert primal_grid_oracle(P, WIDE)[0] == pytest.approx(2.0, abs=1e-3)


def test_primal_oracle_pinned():
    P = ProblemInstance(Indicator(Interval(0, 1)), Indicator(Singleton([0.5])), identity(1), np.array([9.0]), None, True)
    assert primal_grid_oracle(P, GridSpec([-2.0], [2.0]))[0] == pytest.approx(0.5, abs=1e-3)


def test_primal_oracle_two_dims():
    z = np.array([2.0, -0.3])
    P = ProblemInstance(Indicator(Box([-1, -1], [1, 1])), Zero(2), identity(2), z, None, True)
    np.testing.assert_allclose(primal_grid_oracle(P, GridSpec([-2, -2], [2, 2])), [1.0, -0.3], atol=1e-3)


def test_primal_oracle_dimension_mismatch():
    P = ProblemInstance(Zero(1), Zero(1), identity(1), np.array([0.0]), None, True)
    with pytest.raises(InputError):
        primal_grid_oracle(P, GridSpec([-1, -1], [1, 1]))


def test_dykstra_reference_zero_functions():
    z = np.array([1.0, -2.0, 3.0])
    xs, ps = dykstra_reference(Zero(), Zero(), z, 10)
    assert len(xs) == len(ps) == 10
    for x in xs:
        np.testing.assert_array_equal(x, z)


def test_dykstra_reference_box_limit():
    C, D = Box([0, 0, 0], [2, 2, 2]), Box([1, -1, 0.5], [3, 1, 1])
    z = np.array([-1.0, 4.0, 0.7])
    xs, _ = dykstra_reference(Indicator(C), Indicator(D), z, 500)
    np.testing.assert_allclose(xs[-1], np.clip(z, [1, 0, 0.5], [2, 1, 1]), atol=1e-6)


def test_min_norm_examples():
    np.testing.assert_allclose(min_norm_closed_form([[0.6, 0.8]], [1.0]), [0.6, 0.8])
    np.testing.assert_allclose(min_norm_closed_form([[0.7, 0.0], [0.0, 0.7]], [0.7, 1.4]), [1.0, 2.0])
    A = np.array([[0.5, 0.1], [-0.2, 0.4]])
    np.testing.assert_allclose(min_norm_closed_form(A, [1.0, 2.0]), np.linalg.solve(A, [1.0, 2.0]))


def test_min_norm_rank_error():
    with pytest.raises(RankError):
        min_norm_closed_form([[0.3, 0.4], [0.6, 0.8]], [1.0, 2.0])


def test_active_ball_constraint_resolved_to_step():
    # flat objective along an active circle; a feasibility band alone drifts tangentially
    from dualfb.prox.sets import L2Ball
    from dualfb.spaces import from_matrix

    M = np.array([[-0.73822858, 0.62140784], [-0.67866398, -0.53764385]])
    P = ProblemInstance(Indicator(L2Ball([0.0, 0.0], 0.8057629489467608)), ScalarLift(Power(2, 0.6896813327745679), 2),
                        from_matrix(M), np.array([-1.05547713, 2.36090714]), np.array([-0.02748558, 0.01798264]), True)
    R = 0.8057629489467608
    th = np.linspace(1.8, 2.0, 200001)
    X = R * np.stack([np.cos(th), np.sin(th)], 1)
    Y = X @ M.T - P.r
    vals = 0.6896813327745679 * np.sum(Y**2, 1) + 0.5 * np.sum((X - P.z) ** 2, 1)
    best = X[np.argmin(vals)]
    x = primal_grid_oracle(P, GridSpec(P.z - 4, P.z + 4, step=1e-3, rounds=1))
    assert np.linalg.norm(x - best) <= 1e-4


def test_affine_constraint_hit_exactly():
    from dualfb.spaces import from_matrix

    P = ProblemInstance(Zero(2), Indicator(Singleton([0.0])), from_matrix([[0.6, 0.8]]), np.array([2.0, -1.0]),
                        np.array([0.5]), True)
    x = primal_grid_oracle(P, GridSpec([-3, -3], [4, 4]))
    # projection of z onto the line 0.6 x1 + 0.8 x2 = 0.5
    a = np.array([0.6, 0.8])
    np.testing.assert_allclose(x, P.z - a * (a @ P.z - 0.5), atol=1e-3)
    assert abs(a @ x - 0.5) <= 1e-12


def test_frozen_references_reproducible():
    import json
    from pathlib import Path

    from dualfb.verify import instance_grid, standard_instances

    doc = json.loads((Path(__file__).parent / "data" / "oracle_refs.json").read_text())
    for (name, P), rec in zip(standard_instances(doc["count"], doc["seed"]), doc["instances"]):
        assert name == rec["name"]
        x = primal_grid_oracle(P, instance_grid(P, doc["step"]))
        np.testing.assert_allclose(x.ravel(), rec["x"], atol=1e-9)
