import math

import numpy as np
import pytest

from dirichlet_eigen import (asymptotic_report, bessel_j, eigen_table, eigenvalue_result, first_bessel_zero,
                             lambda1_asymptotic, lambda1_euclidean, lambda1_shooting, zero_bracket)
from hgap_errors import DomainError

J01 = 2.404825557695773


def _ascending_series(nu, x, terms=80):
    """J_nu(x) from its power series; an oracle independent of scipy.special"""
    total, term = 0.0, (x / 2.0) ** nu / math.gamma(nu + 1.0)
    for k in range(terms):
        total += term
        term *= -(x / 2.0) ** 2 / ((k + 1) * (k + 1 + nu))
    return total


class TestBessel:
    def test_half_integer_orders(self):
        assert bessel_j(0.5, math.pi) == pytest.approx(0.0, abs=1e-12)
        assert bessel_j(-0.5, math.pi / 2) == pytest.approx(0.0, abs=1e-12)
        x = 1.3
        assert bessel_j(0.5, x) == pytest.approx(math.sqrt(2 / (math.pi * x)) * math.sin(x), rel=1e-13)

    def test_known_zero_of_j0(self):
        assert bessel_j(0.0, J01) == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize("nu", [0.0, 1.0, 2.5, 7.0])
    def test_matches_ascending_series(self, nu):
        for x in (0.5, 2.0, 6.0):
            assert bessel_j(nu, x) == pytest.approx(_ascending_series(nu, x), abs=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            bessel_j(-1.0, 1.0)
        with pytest.raises(DomainError):
            bessel_j(41.0, 1.0)
        with pytest.raises(DomainError):
            bessel_j(0.0, 0.0)
        with pytest.raises(DomainError):
            bessel_j(0.0, 101.0)


class TestFirstZero:
    def test_closed_forms(self):
        assert first_bessel_zero(-0.5) == pytest.approx(math.pi / 2, abs=1e-12)
        assert first_bessel_zero(0.5) == pytest.approx(math.pi, abs=1e-12)
        assert first_bessel_zero(0.0) == pytest.approx(J01, abs=1e-11)

    def test_bracket_holds_a_single_zero(self):
        for nu in np.linspace(-0.5, 40.0, 30):
            lo, hi = zero_bracket(nu)
            j = first_bessel_zero(nu)
            assert lo < j < hi

    def test_residual_is_small_over_range(self):
        for nu in (1.0, 5.5, 19.0, 39.0, 40.0):
            j = first_bessel_zero(nu)
            assert abs(bessel_j(nu, j)) < 1e-10

    def test_zeros_increase_with_order(self):
        zeros = [first_bessel_zero(nu) for nu in np.arange(-0.5, 20.0, 0.5)]
        assert np.all(np.diff(zeros) > 0)

    def test_domain(self):
        with pytest.raises(DomainError):
            first_bessel_zero(-0.75)


class TestEuclideanEigenvalue:
    def test_known_values(self):
        assert lambda1_euclidean(1) == pytest.approx(math.pi ** 2 / 8, abs=1e-10)
        assert lambda1_euclidean(2) == pytest.approx(2.891592981, abs=1e-9)
        assert lambda1_euclidean(3) == pytest.approx(math.pi ** 2 / 2, abs=1e-10)

    @pytest.mark.parametrize("d", range(1, 21))
    def test_shooting_oracle(self, d):
        assert lambda1_shooting(d) == pytest.approx(lambda1_euclidean(d), rel=1e-9)

    def test_growth_like_d_squared_over_eight(self):
        ratios = [lambda1_euclidean(d) / (d * d / 8.0) for d in (10, 20, 30)]
        assert all(1.0 < r < 2.0 for r in ratios)
        assert ratios[0] > ratios[1] > ratios[2]

    def test_result_record(self):
        result = eigenvalue_result(4)
        assert result.nu == 1.0
        assert result.lam == pytest.approx(0.5 * result.j_first_zero ** 2)
        assert set(result.to_dict()) == {'d', 'nu', 'j_first_zero', 'lambda'}

    def test_domain(self):
        with pytest.raises(DomainError):
            lambda1_euclidean(0)
        with pytest.raises(DomainError):
            lambda1_shooting(0)


class TestAsymptoticFormula:
    def test_direct_evaluation(self):
        assert lambda1_asymptotic(1) == pytest.approx(math.pi ** 2, rel=1e-12)
        assert lambda1_asymptotic(2) == pytest.approx((2 * math.pi) ** 1.5, rel=1e-12)
        assert lambda1_asymptotic(4) == pytest.approx(2 * (2 * math.pi) ** 1.25, rel=1e-12)

    def test_large_d_stays_finite(self):
        assert math.isfinite(lambda1_asymptotic(400))

    def test_report_shows_divergence(self):
        report = asymptotic_report(30)
        assert report['asymptotic_ratio'].iloc[1] == pytest.approx(lambda1_asymptotic(2) / lambda1_euclidean(2))
        assert report['asymptotic_ratio'].iloc[-1] < report['asymptotic_ratio'].iloc[0]
        assert 1.0 < report['quadratic_ratio'].iloc[-1] < 2.0


def test_eigen_table():
    table = eigen_table(20)
    assert list(table.columns) == ['d', 'nu', 'j_first_zero', 'lambda', 'lambda_asymptotic_formula']
    assert list(table['d']) == list(range(1, 21))
    assert table['lambda'].is_monotonic_increasing
    assert table.loc[1, 'lambda'] == pytest.approx(2.891592981, abs=1e-9)
