"""Tests for the Ermakov-Pinney integrator and Pinney's superposition"""

import math

import numpy as np
import pytest

from qbm_modules.ermakov import (
    ErmakovProblem,
    alpha_equation_residual,
    alpha_from_rho,
    analytic_linear_basis,
    ermakov_invariant,
    ermakov_report,
    integrate_ep,
    linear_basis,
    pinney_coefficients,
    pinney_superposition,
    quadratic_alpha,
)
from qbm_modules.errors import AccuracyError, DomainError, InvalidParameterError, SingularityError
from qbm_modules.profiles import AnalyticProfile, parse_profile


@pytest.fixture
def free_problem():
    """w2 = 0, K = 1, rho(0) = 1, rho'(0) = 0: rho = sqrt(1 + T^2)"""
    return ErmakovProblem(0.0, 1.0, 1.0, 0.0)


class TestIntegration:
    """RK4 on rho'' = w2 rho + K / rho^3"""

    def test_free_solution(self, free_problem):
        sol = integrate_ep(free_problem, (0.0, 2.0), 0.01)
        assert sol.times[-1] == 2.0
        assert np.allclose(sol.values, np.sqrt(1.0 + sol.times ** 2), atol=1e-8, rtol=0.0)
        assert np.allclose(sol.derivatives, sol.times / np.sqrt(1.0 + sol.times ** 2), atol=1e-8, rtol=0.0)

    def test_singularity_reports_time(self):
        """K = 0 and rho'(0) = -2 reach rho = 0 at T = 0.5"""
        with pytest.raises(SingularityError) as err:
            integrate_ep(ErmakovProblem(0.0, 0.0, 1.0, -2.0), (0.0, 1.0), 0.01)
        assert err.value.time == pytest.approx(0.5, abs=0.011)

    @pytest.mark.parametrize('rho0', [0.0, -1.0, math.nan])
    def test_invalid_rho0(self, rho0):
        with pytest.raises(InvalidParameterError):
            ErmakovProblem(0.0, 1.0, rho0, 0.0)

    def test_frequency_from_drift(self):
        prob = ErmakovProblem.from_drift(parse_profile('expr:t'), 1.0, 1.0, 0.0)
        assert prob.omega2(2.0) == pytest.approx(5.0)
        assert ErmakovProblem.from_drift(0.5, 1.0, 1.0, 0.0).omega2(3.0) == pytest.approx(0.25)


class TestLinearBasis:
    """sigma'' = w2 sigma with Wronskian monitoring"""

    def test_oscillator(self):
        basis = linear_basis(-1.0, (0.0, 10.0), 0.01)
        assert basis.W == 1.0
        assert np.allclose(basis.sigma1.values, np.cos(basis.times), atol=1e-7)
        assert np.allclose(basis.sigma2.values, np.sin(basis.times), atol=1e-7)

    def test_step_too_large(self):
        with pytest.raises(AccuracyError):
            linear_basis(100.0, (0.0, 2.0), 0.1)

    @pytest.mark.parametrize('omega2, first, second', [(4.0, math.cosh(1.0), math.sinh(1.0) / 2.0),
                                                       (-1.0, math.cos(0.5), math.sin(0.5)),
                                                       (0.0, 1.0, 0.5)])
    def test_closed_form(self, omega2, first, second):
        s1, s2 = analytic_linear_basis(omega2)
        assert s1(0.5) == pytest.approx(first, rel=1e-12)
        assert s2(0.5) == pytest.approx(second, rel=1e-12)
        assert s1(0.0) == pytest.approx(1.0)
        assert s2.derivative()(0.0) == pytest.approx(1.0)


class TestSuperposition:
    """rho = sqrt(a s1^2 + 2 b s1 s2 + c s2^2)"""

    def test_coefficients(self):
        assert pinney_coefficients(1.0, 0.0, 1.0) == (1.0, 0.0, 1.0)
        a, b, c = pinney_coefficients(2.0, 0.5, 3.0, W=2.0)
        assert (a, b) == (4.0, 1.0)
        assert c == pytest.approx((0.75 + 1.0) / 4.0)
        with pytest.raises(InvalidParameterError):
            pinney_coefficients(0.0, 0.0, 1.0)

    def test_free_superposition(self):
        basis = linear_basis(0.0, (0.0, 2.0), 0.01)
        rho, K = pinney_superposition(basis, 1.0, 0.0, 1.0)
        assert K == pytest.approx(1.0)
        assert np.allclose(rho.values, np.sqrt(1.0 + basis.times ** 2), atol=1e-12)

    def test_form_not_positive(self):
        basis = linear_basis(0.0, (0.0, 2.0), 0.01)
        with pytest.raises(DomainError) as err:
            pinney_superposition(basis, 1.0, 0.0, -1.0)
        assert err.value.location == pytest.approx(1.0, abs=0.011)

    def test_invariant_is_constant(self, free_problem):
        sol = integrate_ep(free_problem, (0.0, 2.0), 0.01)
        inv = ermakov_invariant(sol.values, sol.derivatives, sol.times, np.ones_like(sol.times), 1.0)
        assert np.allclose(inv, 1.0, atol=1e-7)


class TestAlpha:
    """alpha = rho^2 and its third-order equation"""

    def test_from_rho(self):
        assert np.array_equal(alpha_from_rho(np.array([1.0, 2.0])), [1.0, 4.0])
        assert alpha_from_rho(AnalyticProfile.constant(3.0))(1.0) == pytest.approx(9.0)
        with pytest.raises(DomainError):
            alpha_from_rho(np.array([1.0, -0.5]))

    def test_free_alpha(self):
        s1, s2 = analytic_linear_basis(0.0)
        alpha = quadratic_alpha(s1, s2, 1.0, 0.0, 1.0)
        times = np.linspace(0.0, 1.0, 101)
        assert np.allclose(alpha(times), 1.0 + times ** 2)
        check = alpha_equation_residual(times, alpha(times), 0.0)
        assert check['residual'] < 1e-6
        assert check['first_integral'] == pytest.approx(2.0, abs=1e-8)
        assert check['K_estimate'] == pytest.approx(1.0, abs=1e-8)

    def test_too_few_samples(self):
        with pytest.raises(InvalidParameterError):
            alpha_equation_residual(np.arange(4.0), np.ones(4), 0.0)


class TestReport:
    """Integrated rho against the superposition"""

    def test_free_problem_passes(self, free_problem):
        report = ermakov_report(free_problem, (0.0, 2.0), 0.001)
        assert report.passed
        assert report.metrics['max_deviation'] < 1e-8
        assert report.metrics['K_superposition'] == pytest.approx(1.0)
        assert report.metrics['alpha_equation']['K_estimate'] == pytest.approx(1.0, abs=1e-4)
        assert report.to_dict()['verdict'] == 'passed'

    def test_oscillator_passes(self):
        report = ermakov_report(ErmakovProblem(-1.0, 0.5, 1.5, 0.2), (0.0, 5.0), 0.001)
        assert report.passed
        assert report.metrics['wronskian_drift'] < 1e-9
        assert report.problem['t_span'] == [0.0, 5.0]
