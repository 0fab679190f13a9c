"""Tests for the invariant reductions, the reduced solver and the pipeline"""

import math

import numpy as np
import pytest

from qbm_modules.coefficients import constant_coefficients
from qbm_modules.errors import (
    CoverageError,
    DegenerateReductionError,
    IllPosedError,
    InvalidTrajectoryError,
    MonotonicityError,
    OverdampedRegimeError,
    StepSizeError,
)
from qbm_modules.fields import Field1D, Grid1D, Grid2D, gaussian1d
from qbm_modules.profiles import AnalyticProfile, parse_profile
from qbm_modules.reduction import (
    ReducedCoefficients,
    convergence_order,
    invariance_defect,
    invariance_slopes,
    invariant_w,
    printed_invariant,
    reconstruct,
    reduced_from_constants,
    reduced_from_invariance,
    rescale_time,
    residual1d,
    run_reduction_pipeline,
    solve_reduced,
    to_canonical_time,
)
from qbm_modules.symmetry import characteristic_translations, constant_generators

SQRT2 = math.sqrt(2.0)


def constant_reduced(S, R, qt):
    return ReducedCoefficients(AnalyticProfile.constant(S), AnalyticProfile.constant(R), AnalyticProfile.constant(qt))


def pipeline_levels(cs, rc, invariant, grid2d, grid1d, sw):
    levels = []
    snapshots = 10
    for _ in range(2):
        levels.append(
            run_reduction_pipeline(cs, rc, invariant, grid2d, grid1d, {'w0': 0.0, 'sw': sw, 'amp': 1.0}, 0.5, snapshots)
        )
        grid2d, grid1d, snapshots = grid2d.refined(), grid1d.refined(), 2 * snapshots
    return levels


class TestPrintedReduction:
    """w = (y m (lam - q) - 2x) / (m (lam - q)) and the printed (S, R, qt)"""

    def test_invariant_values(self, criterion_coefficients):
        assert invariant_w(criterion_coefficients, 0.0, 0.0, 1.0) == pytest.approx(1.0)
        assert invariant_w(criterion_coefficients, 3.0, 1.0, 0.0) == pytest.approx(-1.0)

    @pytest.mark.parametrize('a', [0.0, 0.3, 1.0, -1.5, 2.0])
    def test_invariant_is_affine(self, underdamped_coefficients, a):
        cs = underdamped_coefficients
        rng = np.random.default_rng(11)
        (x1, y1), (x2, y2) = rng.uniform(-3.0, 3.0, size=(2, 2))
        for t in (0.0, 0.6):
            mixed = invariant_w(cs, t, a * x1 + (1 - a) * x2, a * y1 + (1 - a) * y2)
            expected = a * invariant_w(cs, t, x1, y1) + (1 - a) * invariant_w(cs, t, x2, y2)
            assert mixed == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_invariant_on_meshes(self, small_grid, underdamped_coefficients):
        X, Y = small_grid.mesh
        w = invariant_w(underdamped_coefficients, 0.0, X, Y)
        slope = printed_invariant(underdamped_coefficients).slope
        assert np.allclose(w, Y - slope * X, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize('r, s, expected_S', [(0.0, 1.0, 1.0), (1.0, 1.0, 0.0)])
    def test_undamped_values(self, r, s, expected_S):
        rc = reduced_from_constants(constant_coefficients(1.0, 1.0, 0.0, r, s))
        assert rc.eval(5.0) == pytest.approx((expected_S, 1.0, 0.0))

    def test_underdamped_values(self, underdamped_coefficients):
        rc = reduced_from_constants(underdamped_coefficients)
        S, R, qt = rc.eval(0.0)
        assert S == pytest.approx(0.246558, abs=1e-6)
        assert R == pytest.approx(1.094987, abs=1e-6)
        assert qt == pytest.approx(0.4)
        assert printed_invariant(underdamped_coefficients).slope == pytest.approx(1.117334, abs=1e-6)

    def test_lambda_equal_to_q(self):
        """m = 1, q = 1, p = 0.5 gives lam = sqrt(2 - 1) = q"""
        with pytest.raises(DegenerateReductionError):
            reduced_from_constants(constant_coefficients(1.0, 0.5, 1.0, 0.1, 0.1))

    def test_overdamped(self, overdamped_coefficients):
        with pytest.raises(OverdampedRegimeError):
            reduced_from_constants(overdamped_coefficients)

    def test_invariant_under_first_printed_generator(self, underdamped_coefficients):
        x1 = constant_generators(underdamped_coefficients)['X1']
        invariant = printed_invariant(underdamped_coefficients)
        assert invariance_defect(invariant, x1, np.linspace(0.0, 1.0, 11)) < 1e-12


class TestDerivedReduction:
    """w = y - c x with p c^2 + q c + 1/m = 0"""

    def test_slopes(self, overdamped_coefficients):
        assert invariance_slopes(overdamped_coefficients) == pytest.approx([-2.0 - SQRT2, -2.0 + SQRT2])

    def test_values(self, overdamped_coefficients):
        rc, invariant = reduced_from_invariance(overdamped_coefficients)
        assert invariant.slope == pytest.approx(-0.585786, abs=1e-6)
        S, R, qt = rc.eval(0.0)
        assert S == pytest.approx(0.028873, abs=1e-6)
        assert R == pytest.approx(-0.292893, abs=1e-6)
        assert qt == pytest.approx(2.0)

    def test_no_potential(self):
        assert invariance_slopes(constant_coefficients(2.0, 0.0, 0.5, 0.1, 0.1)) == pytest.approx([-1.0])

    @pytest.mark.parametrize('p, q', [(1.0, 0.2), (0.0, 0.0)])
    def test_no_real_slope(self, p, q):
        with pytest.raises(DegenerateReductionError):
            reduced_from_invariance(constant_coefficients(1.0, p, q, 0.1, 0.1))

    def test_translation_along_invariant(self, overdamped_coefficients):
        """The characteristic translation with rate 1/(m c) leaves w unchanged"""
        _, invariant = reduced_from_invariance(overdamped_coefficients)
        times = np.linspace(0.0, 1.0, 11)
        defects = sorted(
            invariance_defect(invariant, g, times) for g in characteristic_translations(overdamped_coefficients).values()
        )
        assert defects[0] < 1e-12
        assert defects[1] > 0.1


class TestSolveReduced:
    """Explicit RK4 solver for U_t = S U_ww - w R U_w + qt U"""

    def test_pure_reaction(self):
        grid = Grid1D(-5.0, 5.0, 51)
        U0 = gaussian1d(grid, 0.5, 1.0, amp=1.0 - 0.5j)
        traj = solve_reduced(U0, constant_reduced(0.0, 0.0, 0.5), (0.0, 1.0), 0.01)
        final = traj[len(traj) - 1]
        assert final.t == 1.0
        assert np.allclose(final.values[1:-1], math.exp(0.5) * U0.values[1:-1], rtol=1e-10, atol=0.0)
        assert final.values[0] == U0.values[0]

    def test_constants_are_steady(self):
        grid = Grid1D(-5.0, 5.0, 51)
        U0 = Field1D(grid, 0.0, np.ones(grid.n))
        traj = solve_reduced(U0, constant_reduced(0.3, 1.2, 0.0), (0.0, 0.5), 0.01, snapshot_stride=10)
        assert all(np.all(snap.values == 1.0) for snap in traj.snapshots)

    @pytest.mark.parametrize('a, b', [(1.0, 1.0), (2.0, -0.5j), (-1.0 + 0.5j, 3.0)])
    def test_superposition(self, underdamped_coefficients, a, b):
        grid = Grid1D(-5.0, 5.0, 51)
        rc = reduced_from_constants(underdamped_coefficients)
        f = gaussian1d(grid, 0.5, 0.8, amp=1.0 - 0.5j)
        g = gaussian1d(grid, -1.0, 1.2, amp=0.3 + 2.0j)
        combined = solve_reduced(a * f + b * g, rc, (0.0, 0.3), 0.01, snapshot_stride=10)
        left = solve_reduced(f, rc, (0.0, 0.3), 0.01, snapshot_stride=10)
        right = solve_reduced(g, rc, (0.0, 0.3), 0.01, snapshot_stride=10)
        for k, snap in enumerate(combined.snapshots):
            expected = a * left[k].values + b * right[k].values
            assert np.max(np.abs(snap.values - expected)) <= 1e-10 * np.max(np.abs(expected))

    @pytest.mark.slow
    def test_heat_kernel(self):
        errors = []
        for n in (201, 401):
            grid = Grid1D(-10.0, 10.0, n)
            traj = solve_reduced(gaussian1d(grid, 0.0, 1.0), constant_reduced(1.0, 0.0, 0.0), (0.0, 0.5), 0.0004)
            w = grid.coords
            exact = np.exp(-w ** 2 / 4.0) / math.sqrt(2.0)
            errors.append(float(np.max(np.abs(traj[len(traj) - 1].values - exact))))
        assert errors[0] < 2e-3
        assert 3.5 <= errors[0] / errors[1] <= 4.5

    def test_negative_diffusion(self):
        U0 = gaussian1d(Grid1D(-5.0, 5.0, 51), 0.0, 1.0)
        with pytest.raises(IllPosedError):
            solve_reduced(U0, constant_reduced(-0.1, 0.0, 0.0), (0.0, 0.1), 0.001)

    def test_step_too_large(self):
        U0 = gaussian1d(Grid1D(-10.0, 10.0, 201), 0.0, 1.0)
        with pytest.raises(StepSizeError) as err:
            solve_reduced(U0, constant_reduced(1.0, 0.0, 0.0), (0.0, 0.1), 0.01)
        assert err.value.admissible_dt == pytest.approx(0.002)

    def test_residual_needs_three_snapshots(self):
        U0 = gaussian1d(Grid1D(-5.0, 5.0, 51), 0.0, 1.0)
        traj = solve_reduced(U0, constant_reduced(0.1, 0.0, 0.0), (0.0, 0.1), 0.01, snapshot_stride=100)
        with pytest.raises(InvalidTrajectoryError):
            residual1d(traj)


class TestReconstruct:
    """Z(t, x, y) = Re U(t, w(x, y))"""

    def test_constant_profile(self, small_grid, criterion_coefficients):
        grid = Grid1D(-15.0, 15.0, 61)
        traj = solve_reduced(Field1D(grid, 0.0, np.ones(grid.n)), constant_reduced(0.1, 1.0, 0.0), (0.0, 0.1), 0.01)
        rebuilt = reconstruct(traj, criterion_coefficients, small_grid)
        assert np.allclose(rebuilt.final.values, 1.0)
        assert rebuilt.notes['imaginary_flag'] is False

    def test_imaginary_part_is_flagged(self, small_grid, criterion_coefficients):
        grid = Grid1D(-15.0, 15.0, 61)
        U0 = gaussian1d(grid, 0.0, 2.0, amp=1.0 + 0.5j)
        traj = solve_reduced(U0, constant_reduced(0.1, 0.0, 0.0), (0.0, 0.05), 0.01)
        rebuilt = reconstruct(traj, criterion_coefficients, small_grid)
        assert rebuilt.notes['imaginary_flag'] is True
        assert rebuilt.notes['imaginary_ratio'] == pytest.approx(0.5, rel=1e-6)

    def test_coverage(self, small_grid, criterion_coefficients):
        grid = Grid1D(-1.0, 1.0, 21)
        traj = solve_reduced(gaussian1d(grid, 0.0, 0.3), constant_reduced(0.1, 0.0, 0.0), (0.0, 0.05), 0.01)
        with pytest.raises(CoverageError) as err:
            reconstruct(traj, criterion_coefficients, small_grid)
        low, high = err.value.required
        assert low == pytest.approx(-8.0)
        assert high == pytest.approx(8.0)


class TestTimeRescaling:
    """T = integral of S from 0 to t"""

    @pytest.mark.parametrize('S, t, expected', [(1.0, 0.7, 0.7),
                                                 (2.0, 0.7, 1.4),
                                                 ('exp:1', 0.7, math.exp(0.7) - 1.0),
                                                 ('expr:1 + t', 2.0, 4.0)])
    def test_values(self, S, t, expected):
        profile = parse_profile(S) if isinstance(S, str) else S
        assert rescale_time(profile, t) == pytest.approx(expected, abs=1e-10)

    def test_zero_time(self):
        assert rescale_time(1.0, 0.0) == 0.0

    def test_non_positive_S(self):
        with pytest.raises(MonotonicityError):
            rescale_time(parse_profile('expr:t - 0.5'), 1.0)

    def test_canonical_constant(self):
        canonical, T_end = to_canonical_time(constant_reduced(2.0, 1.0, 0.4), 0.5)
        assert T_end == pytest.approx(1.0)
        assert canonical.eval(0.3) == pytest.approx((1.0, 0.5, 0.2))

    def test_canonical_time_dependent(self):
        rc = ReducedCoefficients(parse_profile('expr:1 + t'), AnalyticProfile.constant(1.0), AnalyticProfile.constant(0.0))
        canonical, T_end = to_canonical_time(rc, 1.0)
        assert T_end == pytest.approx(1.5, abs=1e-10)
        assert canonical.R(T_end) == pytest.approx(0.5, abs=1e-6)
        assert canonical.S(0.7) == 1.0

    def test_canonical_needs_positive_S(self):
        with pytest.raises(MonotonicityError):
            to_canonical_time(constant_reduced(-1.0, 1.0, 0.0), 0.5)


class TestPipeline:
    """reduce -> reconstruct -> residual under refinement"""

    @pytest.mark.slow
    def test_derived_reduction_converges(self, overdamped_coefficients):
        rc, invariant = reduced_from_invariance(overdamped_coefficients)
        grid2d = Grid2D(Grid1D(-6.0, 6.0, 61), Grid1D(-6.0, 6.0, 61))
        levels = pipeline_levels(overdamped_coefficients, rc, invariant, grid2d, Grid1D(-12.0, 12.0, 121), 1.5)
        assert all(level.error is None for level in levels)
        assert convergence_order(levels[0].residual, levels[1].residual) >= 1.8

    @pytest.mark.slow
    def test_printed_reduction_does_not_converge(self, underdamped_coefficients):
        """The printed slope misses p c^2 + q c + 1/m = 0, so the residual keeps an O(1) part"""
        rc = reduced_from_constants(underdamped_coefficients)
        invariant = printed_invariant(underdamped_coefficients)
        grid2d = Grid2D(Grid1D(-6.0, 6.0, 61), Grid1D(-6.0, 6.0, 61))
        levels = pipeline_levels(underdamped_coefficients, rc, invariant, grid2d, Grid1D(-14.0, 14.0, 141), 1.5)
        order = convergence_order(levels[0].residual, levels[1].residual)
        assert order is not None and order < 1.0

    def test_ill_posed_level_is_recorded(self, small_grid, criterion_coefficients):
        rc = constant_reduced(-0.2, 1.0, 0.0)
        level = run_reduction_pipeline(
            criterion_coefficients, rc, printed_invariant(criterion_coefficients), small_grid,
            Grid1D(-10.0, 10.0, 101), {'sw': 1.0}, 0.2,
        )
        assert level.residual is None
        assert 'ill-posed' in level.error

    @pytest.mark.parametrize('coarse, fine, expected', [(0.4, 0.1, 2.0), (0.1, 0.1, 0.0), (None, 0.1, None), (0.1, 0.0, None)])
    def test_convergence_order(self, coarse, fine, expected):
        assert convergence_order(coarse, fine) == (expected if expected is None else pytest.approx(expected))
