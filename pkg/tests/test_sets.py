import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dualfb.errors import CatalogError, InputError, RankError, StructuralError
from dualfb.prox.sets import (
    Affine,
    Box,
    Halfspace,
    Interval,
    L1Ball,
    L2Ball,
    LinfBall,
    NonnegOrthant,
    PairBall,
    ScaledSet,
    Singleton,
    Subspace,
    WholeSpace,
    project,
    project_l1_ball,
)

vec3 = arrays(float, 3, elements=st.floats(-50, 50))


def _sets():
    O, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(3, 2)))
    return [
        Box([-1.0, 0.0, 2.0], [1.0, 0.5, 3.0]),
        NonnegOrthant(3),
        Halfspace([1.0, -2.0, 0.5], 0.7),
        Affine([[1.0, 1.0, 0.0], [0.0, 1.0, -1.0]], [1.0, 2.0]),
        L2Ball([0.5, -0.5, 1.0], 1.3),
        LinfBall(0.6, 3),
        L1Ball(1.1, 3),
        Subspace(O),
        WholeSpace(3),
        Singleton([1.0, 2.0, 3.0]),
        ScaledSet(L1Ball(1.0, 3), 2.5),
    ]


SETS = _sets()
IDS = [type(C).__name__ for C in SETS]


def _bisect_l1(x, radius):
    # independent threshold search for the l1 projection
    if np.abs(x).sum() <= radius:
        return x.copy()
    lo, hi = 0.0, np.abs(x).max()
    for _ in range(200):
        t = 0.5 * (lo + hi)
        if np.maximum(np.abs(x) - t, 0).sum() > radius:
            lo = t
        else:
            hi = t
    return np.sign(x) * np.maximum(np.abs(x) - hi, 0)


def test_l2_ball_radial():
    np.testing.assert_allclose(L2Ball([0, 0], 1).project([3.0, 4.0]), [0.6, 0.8])


def test_interval_clamp():
    assert project(Interval(-1, 1), np.array([-7.0]))[0] == -1.0


def test_l1_ball_symmetric():
    np.testing.assert_allclose(L1Ball(1, 2).project([0.8, 0.8]), [0.5, 0.5])


def test_affine_rank_deficient():
    with pytest.raises(RankError):
        Affine([[1.0, 1.0], [2.0, 2.0]], [0.0, 1.0])


def test_rank_error_is_structural():
    assert issubclass(RankError, StructuralError)


def test_dimension_mismatch():
    with pytest.raises(StructuralError):
        L1Ball(1, 3).project(np.zeros(2))


def test_project_rejects_non_set():
    with pytest.raises(StructuralError):
        project("box", np.zeros(2))


def test_box_rejects_inverted_bounds():
    with pytest.raises(InputError):
        Box([1.0], [0.0])


def test_pairball_rejects_other_p():
    with pytest.raises(CatalogError):
        PairBall(3, 2)


@pytest.mark.parametrize("C", SETS, ids=IDS)
@given(x=vec3)
def test_projection_idempotent(C, x):
    p = C.project(x)
    np.testing.assert_allclose(C.project(p), p, atol=1e-12 * (1 + np.abs(x).max()))


@pytest.mark.parametrize("C", SETS, ids=IDS)
@given(x=vec3, y=vec3)
def test_projection_variational_inequality(C, x, y):
    # <x - Px, c - Px> <= 0 for every c in C; take c = P y
    px, c = C.project(x), C.project(y)
    scale = (1 + np.linalg.norm(x)) * (1 + np.linalg.norm(y))
    assert np.dot(x - px, c - px) <= 1e-9 * scale


@pytest.mark.parametrize("C", SETS, ids=IDS)
@given(x=vec3)
def test_projection_lands_in_set(C, x):
    assert C.distance(C.project(x)) <= 1e-9 * (1 + np.abs(x).max())


@pytest.mark.parametrize("C", [C for C in SETS if not isinstance(C, (Affine, Subspace, WholeSpace, NonnegOrthant, Halfspace))], ids=lambda C: type(C).__name__)
@given(u=vec3)
def test_support_matches_sampled_sup(C, u):
    # sigma_C(u) >= <u, c> for sampled points, with equality at the projection of a far point along u
    s = C.support(u)
    far = C.project(1e6 * u)
    assert s == pytest.approx(float(u @ far), rel=1e-6, abs=1e-6)


@given(arrays(float, (5, 4), elements=st.floats(-10, 10)), st.floats(0.1, 5))
def test_l1_projection_against_bisection(X, radius):
    P = project_l1_ball(X, radius)
    for row, p in zip(X, P):
        np.testing.assert_allclose(p, _bisect_l1(row, radius), atol=1e-9)


@pytest.mark.parametrize("p", [1, 2, np.inf])
def test_pairball_is_pixelwise(p):
    rng = np.random.default_rng(3)
    n = 4
    y = 2 * rng.normal(size=(2, n, n))
    B = PairBall(p, n)
    out = B.project(y)
    for k in range(n):
        for l in range(n):
            pair = y[:, k, l]
            if p == 1:
                ref = np.clip(pair, -1, 1)
            elif p == 2:
                ref = pair / max(1.0, np.linalg.norm(pair))
            else:
                ref = _bisect_l1(pair, 1.0)
            np.testing.assert_allclose(out[:, k, l], ref, atol=1e-12)
    np.testing.assert_allclose(B.project(out), out, atol=1e-15)


def test_singleton_distance():
    assert Singleton([0.0, 0.0]).distance([3.0, 4.0]) == pytest.approx(5.0)


def test_halfspace_support_finite_on_normal_ray():
    H = Halfspace([1.0, 0.0], 2.0)
    assert H.support([3.0, 0.0]) == pytest.approx(6.0)
    assert H.support([0.0, 1.0]) == np.inf
