"""Tests for grids, fields, quadrature, interpolation and field files"""

import math

import numpy as np
import pytest

from qbm_modules.errors import DomainError, FieldParseError, InvalidGridError, InvalidParameterError
from qbm_modules.fields import (
    Field1D,
    Field2D,
    Grid1D,
    Grid2D,
    gaussian1d,
    gaussian2d,
    gaussian_normalization,
    integrate2d,
    read_field,
    read_field_metadata,
    sample1d,
    sample2d,
    sample_points,
    write_field,
)


class TestGrids:
    """Uniform axes and tensor grids"""

    @pytest.mark.parametrize('w_min, w_max, n', [(1.0, 0.0, 5), (0.0, 0.0, 5), (0.0, 1.0, 2), (0.0, math.inf, 5)])
    def test_invalid(self, w_min, w_max, n):
        with pytest.raises(InvalidGridError):
            Grid1D(w_min, w_max, n)

    def test_refined_halves_spacing(self):
        axis = Grid1D(-1.0, 1.0, 11)
        fine = axis.refined()
        assert fine.n == 21
        assert fine.h == pytest.approx(axis.h / 2)
        assert np.array_equal(fine.coords[::2], axis.coords)

    def test_mesh_orientation(self):
        grid = Grid2D(Grid1D(0.0, 1.0, 3), Grid1D(0.0, 2.0, 5))
        X, Y = grid.mesh
        assert grid.shape == (3, 5) == X.shape
        assert np.all(X[:, 0] == grid.x.coords)
        assert np.all(Y[0, :] == grid.y.coords)


class TestFields:
    """Construction, immutability and Gaussians"""

    def test_values_are_read_only(self, small_grid):
        f = Field2D(small_grid, 0.0, np.zeros(small_grid.shape))
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0

    def test_shape_mismatch(self, small_grid):
        with pytest.raises(InvalidGridError):
            Field2D(small_grid, 0.0, np.zeros((3, 3)))

    def test_non_finite(self, small_grid):
        values = np.zeros(small_grid.shape)
        values[3, 4] = np.inf
        with pytest.raises(InvalidParameterError):
            Field2D(small_grid, 0.0, values)

    def test_gaussian_center_and_sigma_point(self, small_grid):
        g = gaussian2d(small_grid, 0.0, 0.0, 0.4, 0.8, amp=2.0)
        assert g.values[20, 20] == pytest.approx(2.0)
        assert g.values[22, 20] == pytest.approx(2.0 * math.exp(-0.5), rel=1e-12)

    @pytest.mark.parametrize('sx, sy, rho', [(0.0, 1.0, 0.0), (1.0, -1.0, 0.0), (1.0, 1.0, 1.0)])
    def test_gaussian_parameters(self, small_grid, sx, sy, rho):
        with pytest.raises(InvalidParameterError):
            gaussian2d(small_grid, 0.0, 0.0, sx, sy, rho)


class TestIntegrate:
    """Trapezoidal quadrature"""

    def test_constants(self):
        grid = Grid2D(Grid1D(0.0, 1.0, 11), Grid1D(0.0, 1.0, 7))
        assert integrate2d(Field2D(grid, 0.0, np.ones(grid.shape))) == pytest.approx(1.0)
        assert integrate2d(Field2D(grid, 0.0, np.zeros(grid.shape))) == 0.0

    def test_normalized_gaussian(self):
        grid = Grid2D(Grid1D(-8.0, 8.0, 161), Grid1D(-8.0, 8.0, 161))
        amp = gaussian_normalization(1.0, 0.8, 0.3)
        f = gaussian2d(grid, 0.2, -0.1, 1.0, 0.8, rho=0.3, amp=amp)
        assert abs(integrate2d(f) - 1.0) < 1e-6

    @pytest.mark.parametrize('a, b', [(1.0, 1.0), (2.5, -0.7), (-3.0, 0.0)])
    def test_linear(self, small_grid, a, b):
        f = gaussian2d(small_grid, 0.5, -0.3, 0.9, 1.2, rho=0.1)
        g = Field2D(small_grid, 0.0, np.cos(small_grid.mesh[0]) * small_grid.mesh[1] ** 2)
        combined = integrate2d(a * f + b * g)
        assert combined == pytest.approx(a * integrate2d(f) + b * integrate2d(g), rel=1e-12, abs=1e-12)


class TestSampling:
    """Bicubic and cubic-spline interpolation"""

    def test_node_identity(self, small_grid):
        f = gaussian2d(small_grid, 0.3, -0.2, 0.7, 0.9)
        x, y = small_grid.x.coords[13], small_grid.y.coords[27]
        assert sample2d(f, x, y) == f.values[13, 27]

    def test_linear_reproduction(self, small_grid):
        X, Y = small_grid.mesh
        f = Field2D(small_grid, 0.0, 2.0 * X - 3.0 * Y + 1.0)
        assert sample2d(f, 0.123, -1.777) == pytest.approx(2.0 * 0.123 + 3.0 * 1.777 + 1.0, abs=1e-10)

    def test_smooth_gaussian_off_node(self):
        grid = Grid2D(Grid1D(-4.0, 4.0, 81), Grid1D(-4.0, 4.0, 81))
        f = gaussian2d(grid, 0.0, 0.0, 1.0, 1.0)
        x, y = 0.437, -0.261
        exact = math.exp(-0.5 * (x * x + y * y))
        assert abs(sample2d(f, x, y) - exact) < 1e-4

    def test_outside(self, small_grid):
        f = gaussian2d(small_grid, 0.0, 0.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            sample2d(f, 4.5, 0.0)
        filled = sample_points(f, np.array([4.5, 0.0]), np.array([0.0, 0.0]), outside=0.0)
        assert filled[0] == 0.0
        assert filled[1] == pytest.approx(1.0)

    def test_complex_profile(self):
        grid = Grid1D(-3.0, 3.0, 61)
        f = gaussian1d(grid, 0.0, 1.0, amp=1.0 + 2.0j)
        assert sample1d(f, grid.coords[17:18])[0] == f.values[17]
        value = sample1d(f, np.array([0.33]))[0]
        assert value == pytest.approx((1.0 + 2.0j) * math.exp(-0.5 * 0.33 ** 2), abs=1e-4)
        with pytest.raises(DomainError):
            sample1d(f, np.array([3.5]))


class TestFieldFiles:
    """CSV long format with JSON sidecar"""

    def test_round_trip_2d(self, tmp_path, small_grid):
        f = gaussian2d(small_grid, 0.3, -0.2, 0.7, 0.9, rho=0.2, t=0.25)
        path = write_field(tmp_path / 'z.csv', f, provenance='test')
        back = read_field(path)
        assert back.equals(f)
        metadata = read_field_metadata(path)
        assert metadata['kind'] == 'field2d'
        assert metadata['t'] == 0.25
        assert metadata['provenance'] == 'test'

    def test_round_trip_1d(self, tmp_path):
        f = gaussian1d(Grid1D(-2.0, 2.0, 21), 0.1, 0.5, amp=0.5 - 1.5j, t=1.0 / 3.0)
        back = read_field(write_field(tmp_path / 'u.csv', f, sidecar=False))
        assert isinstance(back, Field1D)
        assert back.equals(f)

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / 'bad.csv'
        path.write_text('# t=0\nx,y,value\n0,0,1\n0,1\n')
        with pytest.raises(FieldParseError) as err:
            read_field(path)
        assert err.value.line == 4
        assert 'line 4' in str(err.value)

    def test_missing_time_stamp(self, tmp_path):
        path = tmp_path / 'bad.csv'
        path.write_text('w,re,im\n0,1,0\n1,1,0\n2,1,0\n')
        with pytest.raises(FieldParseError):
            read_field(path)

    def test_incomplete_grid(self, tmp_path):
        path = tmp_path / 'bad.csv'
        path.write_text('# t=0\nx,y,value\n0,0,1\n0,1,1\n0,2,1\n1,0,1\n1,1,1\n2,0,1\n2,1,1\n2,2,1\n')
        with pytest.raises(FieldParseError, match='expected 9 rows'):
            read_field(path)

    def test_uneven_axis(self, tmp_path):
        path = tmp_path / 'bad.csv'
        path.write_text('# t=0\nw,re,im\n0,1,0\n0.1,1,0\n1,1,0\n')
        with pytest.raises(FieldParseError, match='not on a uniform w-axis') as err:
            read_field(path)
        assert err.value.line == 4

    def test_uneven_2d_axis(self, tmp_path):
        rows = ''.join(f'{x},{y},1\n' for x in (0, 1, 3) for y in (0, 1, 2))
        path = tmp_path / 'bad.csv'
        path.write_text('# t=0\nx,y,value\n' + rows)
        with pytest.raises(FieldParseError, match='not on a uniform x-axis') as err:
            read_field(path)
        assert err.value.line == 6

    def test_duplicate_node(self, tmp_path):
        rows = '0,0,1\n0,0,2\n0,2,1\n1,0,1\n1,1,1\n1,2,1\n2,0,1\n2,1,1\n2,2,1\n'
        path = tmp_path / 'bad.csv'
        path.write_text('# t=0\nx,y,value\n' + rows)
        with pytest.raises(FieldParseError, match='repeats line 3') as err:
            read_field(path)
        assert err.value.line == 4
