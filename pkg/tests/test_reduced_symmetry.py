"""Tests for the companion equations and the reduced-equation symmetries"""

import numpy as np
import pytest

from qbm_modules.errors import InvalidParameterError
from qbm_modules.fields import Grid1D
from qbm_modules.profiles import AnalyticProfile, parse_profile
from qbm_modules.reduced_symmetry import (
    GROUPED,
    NESTED,
    ReducedSymmetry,
    alpha_equation_residual,
    beta_equation_residual,
    integrate_beta,
    omega_squared,
    reduced_symmetry,
    riccati_beta,
    riccati_beta_constant,
    riccati_beta_profile,
    riccati_constant_initial,
)
from qbm_modules.reduction import ReducedCoefficients


def canonical(R, qt=0.0):
    return ReducedCoefficients(AnalyticProfile.constant(1.0), AnalyticProfile.constant(R), AnalyticProfile.constant(qt))


def gaussian(v):
    return np.exp(-0.5 * v ** 2)


class TestCompanions:
    """beta'' = (R' + R^2) beta and the alpha equation"""

    def test_omega_squared(self):
        assert omega_squared(parse_profile('expr:t'))(2.0) == pytest.approx(5.0)
        assert omega_squared(AnalyticProfile.constant(0.5))(1.0) == pytest.approx(0.25)

    @pytest.mark.parametrize('c', [0.0, 0.5, 1.0])
    def test_general_solution_matches_constant_form(self, c):
        T = np.linspace(0.0, 1.0, 21)
        b0, db0 = riccati_constant_initial(c, 1.0, 0.3)
        beta, dbeta = riccati_beta(c, b0, db0 - c * b0, T)
        assert np.allclose(beta, riccati_beta_constant(c, 1.0, 0.3, T), atol=1e-8, rtol=0.0)
        assert dbeta[0] == pytest.approx(db0)

    @pytest.mark.parametrize('c', [0.0, 0.5, 1.0])
    def test_integration_matches_constant_form(self, c):
        b0, db0 = riccati_constant_initial(c, 1.0, 0.3)
        times, beta, _ = integrate_beta(c, b0, db0, 1.0)
        assert np.allclose(beta, riccati_beta_constant(c, 1.0, 0.3, times), atol=1e-8, rtol=0.0)

    def test_profile_solves_companion(self):
        times = np.linspace(0.0, 2.0, 41)
        beta = riccati_beta_profile(0.5, 1.0, 0.3)
        assert beta(1.0) == pytest.approx(riccati_beta_constant(0.5, 1.0, 0.3, 1.0))
        assert beta_equation_residual(beta, AnalyticProfile.constant(0.5), times) < 1e-10

    def test_negative_times(self):
        with pytest.raises(InvalidParameterError):
            riccati_beta(0.5, 1.0, 0.0, [0.0, -0.1])

    def test_alpha_equation(self):
        times = np.linspace(0.0, 1.0, 11)
        R = AnalyticProfile.constant(0.5)
        assert alpha_equation_residual(AnalyticProfile.constant(1.0), R, times) == 0.0
        assert alpha_equation_residual(parse_profile('expr:t'), R, times) == pytest.approx(1.0)


class TestGenerator:
    """phi readings and the characteristic"""

    def test_unknown_reading(self):
        with pytest.raises(InvalidParameterError):
            ReducedSymmetry(1.0, 0.0, 0.0, 0.5, 0.0, reading='mixed')

    def test_readings_agree_for_constant_alpha(self):
        T = np.linspace(0.0, 1.0, 5)
        grouped = ReducedSymmetry(1.0, 0.0, 0.2, 0.5, 0.1, GROUPED)
        nested = ReducedSymmetry(1.0, 0.0, 0.2, 0.5, 0.1, NESTED)
        assert np.allclose(grouped.phi(T), nested.phi(T))
        assert grouped.phi(0.0) == pytest.approx(0.2 + 0.1 + 0.25)

    def test_readings_differ_for_growing_alpha(self):
        alpha = parse_profile('expr:t')
        grouped = ReducedSymmetry(alpha, 0.0, 0.0, 0.0, 0.0, GROUPED)
        nested = ReducedSymmetry(alpha, 0.0, 0.0, 0.0, 0.0, NESTED)
        assert grouped.phi(2.0) == pytest.approx(-0.25)
        assert nested.phi(2.0) == pytest.approx(-0.5)


class TestVerdict:
    """Convergence of the characteristic defect along a numerical solution"""

    def test_time_translation(self):
        verdict = reduced_symmetry(1.0, 0.0, 0.0, canonical(0.5), Grid1D(-8.0, 8.0, 81), gaussian, 0.5, snapshots=20)
        assert verdict.passed
        assert verdict.accepted == [GROUPED, NESTED]
        assert verdict.readings[GROUPED]['defects'] == pytest.approx(verdict.readings[NESTED]['defects'])
        assert len(verdict.levels) == 2

    def test_drift_translation(self):
        """beta = e^{T/2} solves the companion for R = 1/2"""
        beta = riccati_beta_profile(0.5, 1.0, 0.0)
        verdict = reduced_symmetry(1.0, beta, 0.0, canonical(0.5), Grid1D(-8.0, 8.0, 81), gaussian, 0.5, snapshots=20)
        assert verdict.passed
        assert verdict.equation_residuals['beta'] < 1e-10

    def test_scaling_selects_grouped_reading(self):
        """For the heat equation T d_T + v/2 d_v needs a constant phi"""
        alpha = parse_profile('expr:t')
        verdict = reduced_symmetry(alpha, 0.0, 0.0, canonical(0.0), Grid1D(-8.0, 8.0, 81), gaussian, 0.5, snapshots=20)
        assert verdict.accepted == [GROUPED]
        assert verdict.readings[NESTED]['order'] < 1.0
        assert verdict.passed

    def test_companion_violation_fails(self):
        alpha = parse_profile('expr:t')
        verdict = reduced_symmetry(alpha, 0.0, 0.0, canonical(0.5), Grid1D(-8.0, 8.0, 81), gaussian, 0.5, snapshots=20)
        assert not verdict.passed
        assert 'companion' in verdict.reason
        assert verdict.to_dict()['verdict'] == 'failed'

    def test_needs_canonical_time(self):
        rc = ReducedCoefficients(AnalyticProfile.constant(2.0), AnalyticProfile.constant(0.5), AnalyticProfile.constant(0.0))
        with pytest.raises(InvalidParameterError):
            reduced_symmetry(1.0, 0.0, 0.0, rc, Grid1D(-8.0, 8.0, 81), gaussian, 0.5)
