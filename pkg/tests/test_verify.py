import numpy as np
import pytest

from dualfb.errors import InputError
from dualfb.verify import (
    SUITES,
    CheckResult,
    instance_grid,
    run_suite,
    scalar_catalog,
    standard_instances,
    vector_catalog,
)


def test_check_result_line():
    line = CheckResult("demo", True, 1.5e-12, 1e-10, 7, 0.25).line()
    assert line.startswith("PASS demo:")
    assert "7 cases" in line
    assert CheckResult("demo", False, 1.0, 1e-10, 1, 0.0).line().startswith("FAIL")


@pytest.mark.parametrize("name", ["moreau", "dykstra", "chambolle", "adjoint", "firm"])
def test_fast_suites_pass(name):
    results = run_suite(name)
    assert results and all(r.ok for r in results), [r.line() for r in results if not r.ok]


def test_unknown_suite():
    with pytest.raises(InputError):
        run_suite("nope")


def test_suite_registry_names():
    assert {"prox-grid", "moreau", "dykstra", "chambolle", "adjoint", "firm", "solver-oracle"} <= set(SUITES)


def test_catalogs_cover_kinds():
    names = [n for n, _ in scalar_catalog()]
    for kind in ("power", "neg_log", "log_barrier", "huber", "zero", "plus_support", "plus_indicator"):
        assert any(n.startswith(kind) for n in names)
    vnames = [n for n, _ in vector_catalog()]
    for kind in ("indicator", "support", "phi_of_dist", "scalar_lift", "dist_sq", "quadratic", "tight_frame"):
        assert any(n.startswith(kind) for n in vnames)


def test_standard_instances_deterministic_and_covering():
    a, b = standard_instances(), standard_instances()
    assert [n for n, _ in a] == [n for n, _ in b]
    for (_, P), (_, Q) in zip(a, b):
        np.testing.assert_array_equal(P.z, Q.z)
        np.testing.assert_array_equal(P.L.matrix(), Q.L.matrix())
    pairs = {(n.split()[1], n.split()[2]) for n, _ in a}
    assert len(pairs) == 16
    assert all(P.L.dim_in <= 2 for _, P in a)


def test_instance_grid_centered():
    _, P = standard_instances(1)[0]
    gs = instance_grid(P, half_width=3.0)
    np.testing.assert_allclose(gs.lower, P.z.ravel() - 3.0)
