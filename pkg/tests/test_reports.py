import numpy as np
import pytest

from mvn_shrinkage.errors import InvalidInput
from mvn_shrinkage.reports import (
    GridRequest,
    LemmaGrid,
    bound_curve,
    ratio_curve,
    risk_difference_surface,
    verify_lemmas,
)
from mvn_shrinkage.risk_analysis import upper_bound_curve

from conftest import modified_bayes_ratio_oracle


class TestGridRequest:
    def test_values(self):
        assert np.allclose(GridRequest(1, 100, 3).values(), [1, 10, 100])
        assert np.allclose(GridRequest(0, 1, 3, "linear").values(), [0, 0.5, 1])

    @pytest.mark.parametrize(
        "args", [(1, 1, 3), (2, 1, 3), (1, 2, 1), (0, 1, 3), (1, 2, 3, "cubic")]
    )
    def test_rejects(self, args):
        with pytest.raises(InvalidInput):
            GridRequest(*args)


def test_ratio_curve_rows():
    rows = ratio_curve(6, [0.5, 2.0], threads=2)
    assert [r["rho"] for r in rows] == [0.5, 2.0]
    for r in rows:
        assert r["lower_bound"] <= r["exact_ratio"] <= r["upper_bound"]
        assert r["exact_ratio"] == pytest.approx(modified_bayes_ratio_oracle(6, r["rho"]), rel=1e-9)


def test_surface_is_nonpositive_for_n_ge_5():
    rows = risk_difference_surface(5, [0.1, 1.0, 10.0], [0.1, 1.0, 10.0], p=10)
    assert len(rows) == 9
    assert all(r["delta_r"] < 0 for r in rows)


def test_surface_depends_on_ratio_only_up_to_scale():
    rows = risk_difference_surface(4, [1.0, 2.0], [1.0, 2.0], p=3)
    by_cell = {(r["tau2"], r["sigma2"]): r["delta_r"] for r in rows}
    assert by_cell[(2.0, 2.0)] == pytest.approx(2 * by_cell[(1.0, 1.0)], rel=1e-12)


def test_bound_curve():
    rows = bound_curve(5, [0.1, 1.0])
    assert rows[1]["upper_bound_minus_one"] == upper_bound_curve(5, 1.0)


class TestVerifyLemmas:
    def test_small_grid_passes(self):
        grid = LemmaGrid(dofs=tuple(range(1, 11)), stein_replicates=100_000)
        report = verify_lemmas(grid)
        assert report.passed, report.failures[:3]
        names = set(report.summary())
        assert names == {
            "monotone-in-dof",
            "inv-shift-lower",
            "inv-shift-upper",
            "inv-shift-sq-lower",
            "inv-shift-sq-upper",
            "chi2-recurrence",
            "stein-identity",
        }

    def test_suite_selection(self):
        report = verify_lemmas(LemmaGrid(dofs=(1, 2)), suites=["bracket"])
        assert {c.name for c in report.checks} <= {
            "inv-shift-lower", "inv-shift-upper", "inv-shift-sq-lower", "inv-shift-sq-upper"
        }

    def test_unknown_suite(self):
        with pytest.raises(InvalidInput):
            verify_lemmas(suites=["nope"])

    def test_broken_identity_is_reported(self):
        grid = LemmaGrid(
            stein_functions=(("y^3", lambda y: y**3, lambda y: 2 * y**2),),
            stein_replicates=100_000,
        )
        report = verify_lemmas(grid, suites=["stein"])
        assert not report.passed
        assert report.summary() == {"stein-identity": (0, 1)}
