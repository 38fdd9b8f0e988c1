import math

import numpy as np
import pytest
from scipy import stats

from mvn_shrinkage.errors import InvalidDimension, InvalidInput, MissingHyperparameter
from mvn_shrinkage.estimators import (
    BAYES,
    EMPIRICAL_MODIFIED_BAYES,
    JAMES_STEIN,
    MLE,
    MODIFIED_BAYES,
    ProblemSpec,
    general_c,
)
from mvn_shrinkage.risk_analysis import (
    Verdict,
    asymptotic_limit,
    exact_risk,
    golden_section_minimize,
    modified_bayes_bounds,
    numeric_optimal_c,
    optimal_c,
    risk_bayes,
    risk_empirical_modified_bayes,
    risk_general_c,
    risk_modified_bayes,
    unbiasedness_gap,
    upper_bound_curve,
)

from conftest import laplace_inv_shift, modified_bayes_ratio_oracle

# 40-digit mpmath ratios keyed by (n, rho)
MODIFIED_BAYES_RATIOS = {
    (5, 1.0): 0.55061779040814200862,
    (1, 10.0): 1.0054324604543728071,
    (8, 0.5): 0.3567819827997119198,
    (22, 3.0): 0.76229318838811804391,
}


def general_c_oracle(p, n, sigma2, tau2, c):
    """Risk via Stein's unbiased risk estimate, averaged with scipy chi-square moments.

    ``||X - nu||^2 ~ (sigma2 + tau2) chi2_p`` independently of ``S2 ~ sigma2 chi2_n``.
    """
    s2 = stats.chi2(n)
    d2 = stats.chi2(p)
    e_s2 = sigma2 * s2.moment(1)
    e_s4 = sigma2**2 * s2.moment(2)
    e_inv_d2 = d2.expect(lambda u: 1 / u) / (sigma2 + tau2)
    return p * sigma2 + c**2 * e_s4 * e_inv_d2 - 2 * c * (p - 2) * sigma2 * e_s2 * e_inv_d2


class TestModifiedBayes:
    @pytest.mark.parametrize("key", sorted(MODIFIED_BAYES_RATIOS))
    def test_frozen_ratios(self, key):
        n, rho = key
        report = risk_modified_bayes(ProblemSpec(3, n, 1.0, rho))
        assert report.ratio == pytest.approx(MODIFIED_BAYES_RATIOS[key], rel=1e-10)

    @pytest.mark.parametrize("n", [1, 2, 4, 5, 30, 400])
    @pytest.mark.parametrize("rho", [0.01, 0.3, 2.0, 75.0])
    def test_against_mpmath(self, n, rho):
        ratio = risk_modified_bayes(ProblemSpec(2, n, 1.0, rho)).ratio
        assert ratio == pytest.approx(modified_bayes_ratio_oracle(n, rho), rel=1e-9)

    def test_scales_with_p_and_sigma2(self):
        a = risk_modified_bayes(ProblemSpec(1, 7, 1.0, 2.0))
        b = risk_modified_bayes(ProblemSpec(9, 7, 3.0, 6.0))
        assert b.risk == pytest.approx(27 * a.risk, rel=1e-12)

    def test_sandwich(self):
        for n in (1, 3, 5, 12):
            for rho in (0.05, 1.0, 20.0):
                lower, upper = modified_bayes_bounds(n, rho)
                ratio = risk_modified_bayes(ProblemSpec(1, n, 1.0, rho)).ratio
                assert lower <= ratio <= upper

    def test_zero_tau2_is_shrink_to_prior(self):
        # theta = nu almost surely, the estimator returns nu exactly
        assert risk_modified_bayes(ProblemSpec(4, 3, 1.0, 0.0)).risk == pytest.approx(0.0, abs=1e-12)

    def test_verdicts(self):
        assert risk_modified_bayes(ProblemSpec(1, 5, 1.0, 50.0)).minimax is Verdict.PROVEN
        assert risk_modified_bayes(ProblemSpec(1, 1, 1.0, 10.0)).minimax is Verdict.VIOLATED
        # n=4: the upper bound drops to 1 at rho = 1/2
        assert risk_modified_bayes(ProblemSpec(1, 4, 1.0, 1.0)).minimax is Verdict.PROVEN
        assert risk_modified_bayes(ProblemSpec(1, 4, 1.0, 0.1)).minimax is Verdict.NOT_PROVEN

    def test_needs_tau2(self):
        with pytest.raises(MissingHyperparameter):
            risk_modified_bayes(ProblemSpec(3, 5, tau2=None))


class TestClosedForms:
    def test_bayes(self):
        report = risk_bayes(ProblemSpec(10, 5, 2.0, 6.0))
        assert report.risk == pytest.approx(15.0)
        assert report.minimax is Verdict.NOT_PROVEN

    def test_empirical_eleven_twelfths(self):
        report = risk_empirical_modified_bayes(ProblemSpec(3, 2, 1.0, 1.0))
        assert report.ratio == pytest.approx(11 / 12, rel=1e-15)
        assert report.minimax is Verdict.PROVEN

    def test_empirical_needs_p3(self):
        with pytest.raises(InvalidDimension):
            risk_empirical_modified_bayes(ProblemSpec(2, 2))

    @pytest.mark.parametrize("p, n, sigma2, tau2", [(3, 2, 1.0, 1.0), (50, 30, 1.0, 4.0), (7, 1, 0.5, 3.0)])
    @pytest.mark.parametrize("frac", [0.0, 0.3, 1.0, 1.7, 2.0, 3.1])
    def test_general_c_against_stein_oracle(self, p, n, sigma2, tau2, frac):
        c = frac * (p - 2) / (n + 2)
        risk = risk_general_c(ProblemSpec(p, n, sigma2, tau2), c).risk
        assert risk == pytest.approx(general_c_oracle(p, n, sigma2, tau2, c), rel=1e-10)

    def test_general_c_at_optimum_is_empirical(self):
        spec = ProblemSpec(12, 9, 1.5, 2.5)
        assert risk_general_c(spec, optimal_c(spec)).risk == pytest.approx(
            risk_empirical_modified_bayes(spec).risk, rel=1e-14
        )

    def test_general_c_verdict_region(self):
        spec = ProblemSpec(10, 6, 1.0, 1.0)
        c_max = 2 * 8 / 8
        assert risk_general_c(spec, c_max).minimax is Verdict.PROVEN
        assert risk_general_c(spec, c_max).risk == risk_general_c(spec, 0.0).risk == 10.0
        assert risk_general_c(spec, 1.01 * c_max).minimax is Verdict.VIOLATED
        assert risk_general_c(spec, -0.1).minimax is Verdict.VIOLATED

    def test_exact_risk_dispatch(self):
        spec = ProblemSpec(5, 4, 1.0, 2.0)
        assert exact_risk(MLE, spec).risk == 5.0
        assert exact_risk(BAYES, spec).risk == pytest.approx(10 / 3)
        assert exact_risk(MODIFIED_BAYES, spec).risk == risk_modified_bayes(spec).risk
        assert exact_risk(EMPIRICAL_MODIFIED_BAYES, spec).risk == risk_empirical_modified_bayes(spec).risk
        assert exact_risk(general_c(0.1), spec).risk == risk_general_c(spec, 0.1).risk
        assert exact_risk(JAMES_STEIN, spec) is None

    def test_mle_with_unknown_tau2(self):
        report = exact_risk(MLE, ProblemSpec(5, 4, 2.0, None))
        assert report.risk == 10.0 and math.isnan(report.tau2)


class TestOptimisation:
    def test_golden_section_quadratic(self):
        assert golden_section_minimize(lambda x: (x - 0.3) ** 2, 0.0, 1.0) == pytest.approx(0.3, abs=1e-7)

    def test_golden_section_kink(self):
        assert golden_section_minimize(lambda x: abs(x - math.pi), 0.0, 10.0) == pytest.approx(math.pi, abs=1e-13)

    @pytest.mark.parametrize("p, n", [(3, 1), (10, 5), (100, 50)])
    def test_numeric_matches_closed_form(self, p, n):
        spec = ProblemSpec(p, n, 1.0, 2.0)
        c_star = optimal_c(spec)
        assert abs(numeric_optimal_c(spec) - c_star) / c_star <= 1e-10


class TestCurvesAndLimits:
    @pytest.mark.parametrize("n", [5, 6, 10, 100])
    def test_upper_bound_curve_negative_for_n_ge_5(self, n):
        for rho in np.geomspace(0.01, 100, 41):
            assert upper_bound_curve(n, rho) <= 0

    def test_upper_bound_curve_positive_somewhere_for_small_n(self):
        assert upper_bound_curve(1, 10.0) > 0

    def test_upper_bound_curve_matches_bounds_at_same_point(self):
        # both are upper bounds on the same ratio minus 1
        for n in (5, 9):
            for rho in (0.1, 1.0, 10.0):
                ratio = risk_modified_bayes(ProblemSpec(1, n, 1.0, rho)).ratio
                assert ratio - 1 <= upper_bound_curve(n, rho) + 1e-12

    def test_upper_bound_curve_rejects(self):
        with pytest.raises(InvalidInput):
            upper_bound_curve(0, 1.0)
        with pytest.raises(InvalidInput):
            upper_bound_curve(3, 0.0)

    def test_asymptotic_limit(self):
        assert asymptotic_limit(ProblemSpec(3, 3, 1.0, 4.0)) == pytest.approx(0.8)
        ratio = risk_modified_bayes(ProblemSpec(1, 10_000, 1.0, 4.0)).ratio
        assert abs(ratio - 0.8) < 1e-3

    def test_unbiasedness_gap_modified(self):
        spec = ProblemSpec(3, 6, 1.0, 2.0)
        expected = 6 * laplace_inv_shift(8, 12.0) - 1 / 3
        assert unbiasedness_gap(spec, "modified") == pytest.approx(expected, rel=1e-9)
        assert unbiasedness_gap(spec, "modified") < 0

    def test_unbiasedness_gap_empirical(self):
        assert unbiasedness_gap(ProblemSpec(5, 2, 1.0, 1.0), "empirical") == pytest.approx(-0.25)
        with pytest.raises(InvalidInput):
            unbiasedness_gap(ProblemSpec(5, 2), "other")


def test_empirical_ratio_below_one_over_grid():
    for p in (3, 4, 10, 100):
        for n in (1, 2, 10, 1000):
            for tau2 in (0.0, 0.01, 1.0, 100.0):
                assert risk_empirical_modified_bayes(ProblemSpec(p, n, 1.0, tau2)).ratio < 1


@pytest.mark.parametrize("rho", [0.5, 1.0, 4.0])
def test_convergence_monotone_in_n(rho):
    gaps = [
        abs(risk_modified_bayes(ProblemSpec(1, n, 1.0, rho)).ratio - rho / (1 + rho))
        for n in (10, 100, 1000, 10_000)
    ]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3


def test_optimal_c_examples():
    assert optimal_c(ProblemSpec(3, 2)) == 0.25
    assert optimal_c(ProblemSpec(12, 8)) == 1.0
