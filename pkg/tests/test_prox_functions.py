import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dualfb.errors import CapabilityError, CatalogError, NumericalError, StructuralError
from dualfb.prox import functions as pf
from dualfb.prox.functions import (
    DistSq,
    Indicator,
    PhiOfDist,
    Quadratic,
    ScalarLift,
    SeparableBasis,
    SqMinusDist,
    SumQuadratics,
    Support,
    SupportPlusPhiNorm,
    TightFrameComposite,
    Zero,
    conj_envelope_value,
    moreau_envelope_value,
    prox_conjugate,
    prox_vector,
)
from dualfb.prox.scalar import Huber, NegLog, PlusIndicatorInterval, Power, ZeroFun
from dualfb.prox.sets import Box, Interval, L1Ball, L2Ball, Singleton
from dualfb.spaces import LinOp
from dualfb.verify import vector_catalog

CATALOG = vector_catalog(3, seed=0)
IDS = [n for n, _ in CATALOG]
vec3 = arrays(float, 3, elements=st.floats(-20, 20))
gammas = st.floats(0.05, 10)


def test_support_of_interval_is_soft_threshold():
    assert prox_vector(Support(Interval(-1, 1)), 1.0, np.array([3.0]))[0] == pytest.approx(2.0)


def test_quadratic_identity():
    np.testing.assert_allclose(prox_vector(Quadratic(np.eye(2)), 1.0, np.array([2.0, 4.0])), [1.0, 2.0])


def test_phi_of_dist_to_origin():
    F = PhiOfDist(Power(1, 1.0), Singleton([0.0, 0.0]))
    np.testing.assert_allclose(prox_vector(F, 1.0, np.array([3.0, 0.0])), [2.0, 0.0])


def test_separable_canonical_basis():
    F = SeparableBasis(Power(1, 1.0), np.eye(3))
    np.testing.assert_allclose(prox_vector(F, 1.0, np.array([2.0, -0.5, -3.0])), [1.0, 0.0, -2.0])


@given(vec3, gammas)
def test_conjugate_of_point_indicator_is_identity(x, gamma):
    np.testing.assert_allclose(prox_conjugate(Indicator(Singleton(np.zeros(3))), gamma, x), x)


def test_conjugate_of_abs_is_clamp():
    F = ScalarLift(Power(1, 1.0), 1)
    assert prox_conjugate(F, 1.0, np.array([0.5]))[0] == pytest.approx(0.5)
    assert prox_conjugate(F, 1.0, np.array([3.0]))[0] == pytest.approx(1.0)


@given(vec3, gammas)
def test_conjugate_of_indicator_removes_scaled_projection(x, gamma):
    D = L2Ball([0.3, -0.2, 1.0], 0.9)
    np.testing.assert_allclose(prox_conjugate(Indicator(D), gamma, x), x - gamma * D.project(x / gamma), atol=1e-12)


@given(vec3, gammas)
def test_conjugate_of_support_is_projection(x, gamma):
    D = L1Ball(1.3, 3)
    np.testing.assert_allclose(prox_conjugate(Support(D), gamma, x), D.project(x), atol=1e-12)


def test_envelope_of_indicator_is_half_squared_distance():
    C = Box([-1.0, -1.0], [1.0, 1.0])
    x = np.array([3.0, 0.5])
    assert moreau_envelope_value(Indicator(C), x) == pytest.approx(0.5 * C.distance(x) ** 2)


def test_envelope_of_zero():
    assert moreau_envelope_value(Zero(2), np.array([5.0, -1.0])) == 0.0


def test_envelope_of_abs_and_conjugate():
    F = ScalarLift(Power(1, 1.0), 1)
    x = np.array([3.0])
    assert moreau_envelope_value(F, x) == pytest.approx(2.5)
    assert conj_envelope_value(F, x) == pytest.approx(2.0)


def test_envelope_without_values():
    class NoValue(pf.ProxFunction):
        def _prox(self, x, gamma):
            return x

    with pytest.raises(CapabilityError):
        moreau_envelope_value(NoValue(), np.zeros(2))


@pytest.mark.parametrize("name,F", [(n, F) for n, F in CATALOG if F.has_value and F.has_conj_value], ids=lambda v: v if isinstance(v, str) else "")
@given(x=vec3)
def test_envelope_identity(name, F, x):
    total = moreau_envelope_value(F, x) + conj_envelope_value(F, x)
    assert total == pytest.approx(0.5 * float(x @ x), abs=1e-8 * (1 + float(x @ x)))


@pytest.mark.parametrize("name,F", CATALOG, ids=IDS)
@given(x=vec3, y=vec3, gamma=gammas)
def test_firm_nonexpansive(name, F, x, y, gamma):
    px, py = F.prox(x, gamma), F.prox(y, gamma)
    d = px - py
    scale = 1 + float((x - y) @ (x - y))
    assert float(d @ d) <= float((x - y) @ d) + 1e-10 * scale


@pytest.mark.parametrize("name,F", CATALOG, ids=IDS)
@given(x=vec3, gamma=gammas)
def test_prox_beats_perturbations(name, F, x, gamma):
    p = F.prox(x, gamma)
    obj = lambda y: F.value(y) + float((x - y) @ (x - y)) / (2 * gamma)
    base = obj(p)
    rng = np.random.default_rng(0)
    for _ in range(4):
        q = p + 1e-3 * rng.normal(size=3)
        assert base <= obj(q) + 1e-9 * (1 + abs(base))


@pytest.mark.parametrize("name,F", [(n, F) for n, F in CATALOG if F.conjugate() is not None], ids=lambda v: v if isinstance(v, str) else "")
@given(x=vec3, gamma=gammas)
def test_moreau_identity_with_catalog_conjugate(name, F, x, gamma):
    H = F.conjugate()
    res = x - F.prox(x, gamma) - gamma * H.prox(x / gamma, 1 / gamma)
    assert np.linalg.norm(res) <= 1e-10 * (1 + np.linalg.norm(x))


def test_phi_of_dist_branch_continuity():
    # at d_C(x) = max d phi(0) the shrink branch meets the projection branch
    C = L2Ball([0.0, 0.0], 1.0)
    F = PhiOfDist(Power(1, 0.5), C)
    u = np.array([0.6, 0.8])
    for eps in (1e-9, -1e-9):
        x = u * (1.5 + eps)
        np.testing.assert_allclose(F.prox(x), C.project(x), atol=1e-8)


def test_phi_of_dist_point_in_set_unchanged():
    F = PhiOfDist(Huber(1.0, 1.0), L2Ball([0.0, 0.0], 2.0))
    np.testing.assert_array_equal(F.prox(np.array([0.5, -0.5])), [0.5, -0.5])


def test_phi_of_dist_indicator_of_zero_gives_projection():
    C = L1Ball(1.0, 2)
    F = PhiOfDist(PlusIndicatorInterval(ZeroFun(), 0.0, 0.0), C)
    np.testing.assert_allclose(F.prox(np.array([3.0, 1.0])), C.project(np.array([3.0, 1.0])))


def test_phi_of_dist_rejects_non_even():
    with pytest.raises(CatalogError):
        PhiOfDist(NegLog(1.0), Singleton([0.0]))


def test_support_plus_phi_norm_rejects_unbounded_argmin():
    with pytest.raises(CatalogError):
        SupportPlusPhiNorm(Singleton([0.0, 0.0]), ZeroFun())


def test_sum_quadratics_against_dense_solve():
    rng = np.random.default_rng(2)
    T1, T2 = rng.normal(size=(2, 3)), rng.normal(size=(4, 3))
    r1, r2 = rng.normal(size=2), rng.normal(size=4)
    F = SumQuadratics([(0.7, T1, r1), (1.3, T2, r2)])
    x, g = rng.normal(size=3), 0.9
    A = np.eye(3) + g * (0.7 * T1.T @ T1 + 1.3 * T2.T @ T2)
    ref = np.linalg.solve(A, x + g * (0.7 * T1.T @ r1 + 1.3 * T2.T @ r2))
    np.testing.assert_allclose(F.prox(x, g), ref, atol=1e-10)


def test_quadratic_with_linear_term():
    A = np.diag([1.0, 3.0])
    F = Quadratic(A, b=np.array([1.0, -1.0]))
    np.testing.assert_allclose(F.prox(np.array([2.0, 4.0]), 0.5), [(2 - 0.5) / 1.5, (4 + 0.5) / 2.5])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_quadratic_solve_failure_reports_residual():
    # an indefinite operator breaks conjugate gradients
    A = np.diag([1.0, -1.0])
    F = Quadratic(A)
    with pytest.raises(NumericalError) as info:
        F.prox(np.array([1.0, 1.0]), 1.0)
    assert info.value.residual is not None


def test_tight_frame_rejects_non_tight():
    with pytest.raises(StructuralError):
        TightFrameComposite(Zero(), np.array([[1.0, 0.0], [1.0, 1.0]]), 1.0)


def test_tight_frame_identity_reduces_to_psi():
    psi = ScalarLift(Power(1, 1.0), 2)
    F = TightFrameComposite(psi, np.eye(2), 1.0)
    np.testing.assert_allclose(F.prox(np.array([3.0, -0.5])), psi.prox(np.array([3.0, -0.5])))


def test_separable_basis_requires_orthonormal():
    with pytest.raises(StructuralError):
        SeparableBasis(Power(1, 1.0), np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_scalar_lift_per_coordinate():
    F = ScalarLift([Power(1, 1.0), Power(2, 0.5)])
    np.testing.assert_allclose(F.prox(np.array([3.0, 3.0])), [2.0, 1.5])


def test_dist_sq_prox_formula():
    C = Singleton([0.0])
    assert DistSq(C, 1.0).prox(np.array([4.0]), 1.0)[0] == pytest.approx(2.0)


def test_sq_minus_dist_whole_space_is_shrinkage():
    # with C = R the function is ||x||^2 / (2 alpha)
    C = Box([-np.inf], [np.inf])
    assert SqMinusDist(C, 2.0).prox(np.array([3.0]), 1.0)[0] == pytest.approx(3.0 / 1.5)


def test_prox_shape_check():
    with pytest.raises(StructuralError):
        Indicator(Box([0, 0], [1, 1])).prox(np.zeros(3))


def test_prox_vector_rejects_foreign_object():
    with pytest.raises(CatalogError):
        prox_vector(object(), 1.0, np.zeros(2))


def test_quadratic_operator_form():
    # A given as an operator (no matrix) on images
    op = LinOp((2, 2), (2, 2), lambda x: 2 * x, lambda y: 2 * y, 2.0)
    F = Quadratic(op)
    x = np.arange(4.0).reshape(2, 2)
    np.testing.assert_allclose(F.prox(x, 1.0), x / 3.0)
