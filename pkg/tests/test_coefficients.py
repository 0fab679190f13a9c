"""Tests for the coefficient set and its physical parametrization"""

import pytest

from qbm_modules.coefficients import CoefficientSet, constant_coefficients, eval, from_physical, lambda_const
from qbm_modules.errors import DomainError, InvalidParameterError, NotConstantError, OverdampedRegimeError
from qbm_modules.profiles import SplineProfile, parse_profile


class TestFromPhysical:
    """p = m Omega^2, q = 2 Gamma, r = hbar m Gamma h, s = hbar Gamma f"""

    @pytest.mark.parametrize('m, hbar, Omega2, Gamma, h, f, expected', [
        (1.0, 1.0, 1.0, 0.5, 1.0, 1.0, (1.0, 1.0, 0.5, 0.5)),
        (2.0, 1.0, 0.0, 0.0, 1.0, 1.0, (0.0, 0.0, 0.0, 0.0)),
        (1.0, 1.0, 4.0, 1.0, 0.5, 2.0, (4.0, 2.0, 0.5, 2.0)),
        (2.0, 0.5, 1.0, 1.0, 1.0, 1.0, (2.0, 2.0, 1.0, 0.5)),
    ])
    def test_constant_profiles(self, m, hbar, Omega2, Gamma, h, f, expected):
        cs = from_physical(m, hbar, Omega2, Gamma, h, f)
        assert cs.eval(17.0) == pytest.approx(expected)
        assert cs.is_constant()

    def test_time_dependent_profiles(self):
        Omega2 = parse_profile('expr:1 + 0.5*sin(2*t)')
        cs = from_physical(1.0, 1.0, Omega2, 0.25, 1.0, 2.0, domain=(0.0, 1.0))
        p, q, r, s = cs.eval(0.25)
        assert p == pytest.approx(Omega2(0.25))
        assert (q, r, s) == pytest.approx((0.5, 0.25, 0.5))
        assert not cs.is_constant()

    @pytest.mark.parametrize('m, hbar', [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
    def test_nonpositive_constants(self, m, hbar):
        with pytest.raises(InvalidParameterError):
            from_physical(m, hbar, 1.0, 1.0, 1.0, 1.0)


class TestEval:
    """Evaluation and the declared domain"""

    def test_constant_set(self):
        cs = constant_coefficients(1.0, 1.0, 1.0, 0.5, 0.5)
        assert eval(cs, 17.0) == (1.0, 1.0, 0.5, 0.5)

    def test_tabulated_midpoint(self):
        p = SplineProfile.from_samples([0.0, 1.0], [0.0, 2.0], kind='linear')
        cs = CoefficientSet(m=1.0, p=p, q=0, r=0, s=0)
        assert cs.domain == (0.0, 1.0)
        assert cs.eval(0.5)[0] == pytest.approx(1.0)

    @pytest.mark.parametrize('t', [-0.5, 1.5])
    def test_outside_domain(self, t):
        cs = from_physical(1.0, 1.0, 1.0, 0.5, 1.0, 1.0, domain=(0.0, 1.0))
        with pytest.raises(DomainError):
            cs.eval(t)

    def test_describe_is_json_ready(self):
        described = constant_coefficients(1.0, 1.0, 0.0, 0.05, 0.02).describe()
        assert described['domain'] == ['-inf', 'inf']
        assert described['m'] == 1.0


class TestLambda:
    """lambda = sqrt(4p - m q^2)"""

    @pytest.mark.parametrize('p, m, q, expected', [(1.0, 1.0, 0.0, 2.0), (5.0, 1.0, 2.0, 4.0)])
    def test_values(self, p, m, q, expected):
        assert lambda_const(constant_coefficients(m, p, q, 0.0, 0.0)) == pytest.approx(expected)

    def test_boundary_is_overdamped(self):
        with pytest.raises(OverdampedRegimeError):
            lambda_const(constant_coefficients(4.0, 1.0, 1.0, 0.0, 0.0))

    def test_overdamped(self, overdamped_coefficients):
        with pytest.raises(OverdampedRegimeError):
            lambda_const(overdamped_coefficients)

    def test_time_dependent(self):
        cs = from_physical(1.0, 1.0, parse_profile('exp:0.1'), 0.5, 1.0, 1.0)
        with pytest.raises(NotConstantError):
            lambda_const(cs)
