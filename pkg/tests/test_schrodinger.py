"""Tests for free Schrodinger solutions and their map onto the reduced equation"""

import math

import numpy as np
import pytest

from qbm_modules.coefficients import constant_coefficients
from qbm_modules.errors import DegenerateMapError, InvalidMapError, InvalidParameterError, SingularEvaluationError
from qbm_modules.schrodinger import (
    GaussianPacket,
    PlaneWave,
    free_equation_residual,
    free_schrodinger,
    map_diffusion,
    roundtrip_check,
    schrodinger_map,
    schrodinger_time,
)


class TestFreeSolutions:
    """Plane waves and spreading Gaussian packets"""

    def test_plane_wave_frequency(self):
        assert PlaneWave(2.0, 0.5).omega == pytest.approx(-4.0j)

    @pytest.mark.parametrize('psi', [PlaneWave(1.5, 1.0), GaussianPacket(1.0, 2.0, center=0.3)])
    def test_solves_free_equation(self, psi):
        coarse = free_equation_residual(psi, (0.0, 1.0), (-2.0, 2.0), n=41)
        fine = free_equation_residual(psi, (0.0, 1.0), (-2.0, 2.0), n=81)
        assert coarse < 1e-2
        assert 3.5 <= coarse / fine <= 4.5

    def test_packet_focus(self):
        """sigma = a + i tau / (M hbar) vanishes at tau = i a M hbar"""
        with pytest.raises(SingularEvaluationError):
            GaussianPacket(1.0, 1.0)(1j, 0.0)

    def test_packet_at_origin(self):
        assert GaussianPacket(2.0, 1.0, amplitude=3.0)(0.0, 0.0) == pytest.approx(3.0)

    @pytest.mark.parametrize('kind, params', [('bessel', {}), ('plane_wave', {'k': 1.0}), ('gaussian', {'a': -1.0, 'M': 1.0})])
    def test_factory_errors(self, kind, params):
        with pytest.raises(InvalidParameterError):
            free_schrodinger(kind, params)

    def test_factory(self):
        assert isinstance(free_schrodinger('gaussian', {'a': 1.0, 'M': 1.0}), GaussianPacket)

    @pytest.mark.parametrize('M, hbar', [(0.0, 1.0), (1.0, -1.0), (math.inf, 1.0)])
    def test_invalid_mass(self, M, hbar):
        with pytest.raises(InvalidParameterError):
            PlaneWave(1.0, M, hbar)


class TestMap:
    """Complex time, diffusion variants and the mapped field"""

    def test_complex_time(self, underdamped_coefficients):
        k = math.sqrt(3.96) + 0.2
        assert schrodinger_time(underdamped_coefficients, 0.5j, 0.0) == pytest.approx(0.5j)
        tau = schrodinger_time(underdamped_coefficients, 0.0, 1.0)
        assert tau == pytest.approx(1j / k * (math.exp(-k) - 1.0))

    def test_degenerate_time(self):
        """m = 1, p = 0.5, q = -1 gives lam = 1 = -q"""
        cs = constant_coefficients(1.0, 0.5, -1.0, 0.1, 0.1)
        with pytest.raises(DegenerateMapError):
            schrodinger_time(cs, 0.0, 0.5)

    def test_diffusion_variants(self, underdamped_coefficients):
        assert map_diffusion(underdamped_coefficients, 'printed') == 0.5
        assert map_diffusion(underdamped_coefficients, 'matched') == pytest.approx(0.246558, abs=1e-6)
        with pytest.raises(InvalidParameterError):
            map_diffusion(underdamped_coefficients, 'other')

    def test_negative_reduced_diffusion(self, criterion_coefficients):
        """2(-2r + 2s) / 4 = -0.03 for r = 0.05, s = 0.02"""
        with pytest.raises(InvalidMapError):
            map_diffusion(criterion_coefficients, 'matched')
        assert map_diffusion(criterion_coefficients, 'printed') == 0.02

    def test_initial_slice(self, underdamped_coefficients):
        psi = PlaneWave(1.0, 1.0)
        w = np.linspace(-1.0, 1.0, 5)
        U = schrodinger_map(psi, underdamped_coefficients, 1.0, 0.0, np.zeros_like(w), w)
        assert np.allclose(U, np.exp(1j * w * math.sqrt(1.0 / (2.0 * 0.5))))

    def test_mass_mismatch(self, underdamped_coefficients):
        with pytest.raises(InvalidParameterError):
            schrodinger_map(PlaneWave(1.0, 2.0), underdamped_coefficients, 1.0, 0.0, 0.0, 0.0)


class TestRoundTrip:
    """Mapped solutions measured against the printed reduced coefficients"""

    @pytest.mark.parametrize('psi', [PlaneWave(1.0, 1.0), GaussianPacket(1.0, 1.0)])
    def test_matched_map_converges(self, underdamped_coefficients, psi):
        result = roundtrip_check(psi, underdamped_coefficients, 1.0, 0.0, (0.0, 0.5), (-2.0, 2.0), variant='matched')
        assert result['passed'] is True
        assert result['order'] >= 1.8
        assert result['diffusion'] == pytest.approx(result['reduced_diffusion'])

    @pytest.mark.parametrize('psi', [PlaneWave(1.0, 1.0), GaussianPacket(1.0, 1.0)])
    def test_printed_map_plateaus(self, underdamped_coefficients, psi):
        result = roundtrip_check(psi, underdamped_coefficients, 1.0, 0.0, (0.0, 0.5), (-2.0, 2.0), variant='printed')
        assert result['passed'] is False
        assert result['order'] < 0.5
        assert len(result['residuals']) == 2
