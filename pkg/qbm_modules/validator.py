#!/usr/bin/env python3
"""
QBM Lab - Verification Suite
============================

Runs the numerical verification checks behind ``verify --what ...`` and
``reduce``. Each check returns ``(success, details)``; the suite logs it,
stores it under its name and folds everything into one verdict.

Suites:
    conservation: mass drift, moment oracle, characteristics convergence
    symmetry: structural defect and residual ratio of generator flows
    roundtrip: free Schrodinger solutions mapped into the reduced equation
    reduction: reduce -> reconstruct -> residual for the printed and the
        invariance-derived reductions, plus the reduced-symmetry readings

A numerical failure of an identity (blow-up, ill-posed direction, missing
convergence) makes the check fail. Contract errors propagate to the caller.

Author: QBM Lab Developers
Version: 1.0.0
"""

import logging
import math
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import (
    AccuracyError,
    BlowUpError,
    ConfigError,
    CoverageError,
    DegenerateReductionError,
    DegenerateMapError,
    IllPosedError,
    InvalidMapError,
    InvalidParameterError,
    OverdampedRegimeError,
    SingularEvaluationError,
    SingularityError,
    StepSizeError,
)
from .ermakov import analytic_linear_basis, pinney_coefficients, quadratic_alpha
from .fields import Field2D, Grid1D, gaussian2d, integrate2d
from .master_solver import (
    MOMENT_NAMES,
    SolverConfig,
    Trajectory2D,
    evolve,
    free_streaming_gaussian,
    grid_moments,
    moment_oracle,
    residual2d,
    stable_time_step,
    uniform_part,
)
from .profiles import AnalyticProfile
from .reduced_symmetry import reduced_symmetry, riccati_beta_profile
from .reduction import (
    InvariantMap,
    ReducedCoefficients,
    ReductionLevel,
    convergence_order,
    printed_invariant,
    reduced_from_constants,
    reduced_from_invariance,
    run_reduction_pipeline,
    to_canonical_time,
)
from .run_config import RunConfig
from .schrodinger import free_equation_residual, free_schrodinger, roundtrip_check, schrodinger_time
from .symmetry import characteristic_translations, constant_generators, determining_defect, push_forward

SUITES = ("conservation", "symmetry", "roundtrip", "reduction")

# Identity failures that become a failed check instead of an error exit
NUMERICAL_FAILURES = (
    AccuracyError,
    BlowUpError,
    CoverageError,
    DegenerateReductionError,
    DegenerateMapError,
    IllPosedError,
    InvalidMapError,
    SingularEvaluationError,
    SingularityError,
    StepSizeError,
)

STRUCTURAL_TOLERANCE = 1e-9

Check = Tuple[str, Callable[[], Tuple[bool, Dict[str, Any]]]]


def initial_field(config: RunConfig, grid=None) -> Field2D:
    """Gaussian initial data of the configuration on ``grid`` (default: the configured grid)."""
    init = config.initial
    return gaussian2d(
        grid or config.grid, init.x0, init.y0, init.sx, init.sy, init.rho, init.amplitude, 0.0
    )


def _relative(value: float, reference: float) -> float:
    return abs(value - reference) / abs(reference) if reference != 0 else abs(value)


class VerificationSuite:
    """
    Verification checks for one run configuration.

    Attributes:
        config: validated run configuration
        logger: logger the check results are reported on
        artifacts: trajectories kept for the CLI to write (name -> trajectory)
    """

    def __init__(self, config: RunConfig, logger: logging.Logger):
        self.config = config
        self.logger = logger
        self.artifacts: Dict[str, Any] = {}
        self._trajectory: Optional[Trajectory2D] = None

    # ------------------------------------------------------------------
    # Driver
    # ------------------------------------------------------------------

    def run(self, what: str) -> Dict[str, Any]:
        """Run one suite and return its report (checks, overall_success, verdict)."""
        suites = {
            "conservation": self._conservation_checks,
            "symmetry": self._symmetry_checks,
            "roundtrip": self._roundtrip_checks,
            "reduction": self._reduction_checks,
        }
        if what not in suites:
            raise InvalidParameterError(f"unknown verification suite '{what}' (expected one of {SUITES})")
        self.logger.info(f"🔍 Running {what} verification...")
        return self.run_checks(what, suites[what]())

    def run_checks(self, suite: str, checks: List[Check]) -> Dict[str, Any]:
        """Run ``(name, check)`` pairs and fold them into a report."""
        results: Dict[str, Dict[str, Any]] = {}
        overall_success = True
        for name, check in checks:
            self.logger.info(f"Running {name} check...")
            try:
                success, details = check()
            except NUMERICAL_FAILURES as e:
                self.logger.error(f"❌ {name}: ERROR - {e}")
                success, details = False, {"message": f"{type(e).__name__}: {e}"}
            results[name] = {"success": bool(success), "details": details}
            if success:
                self.logger.info(f"✅ {name}: PASSED")
            else:
                self.logger.error(f"❌ {name}: FAILED - {details.get('message', 'see report')}")
                overall_success = False

        return {
            "suite": suite,
            "coefficients": self.config.coefficients.describe(),
            "checks": results,
            "overall_success": overall_success,
            "verdict": "passed" if overall_success else "failed",
        }

    # ------------------------------------------------------------------
    # Shared trajectory
    # ------------------------------------------------------------------

    def trajectory(self) -> Trajectory2D:
        """The configured master-equation run, computed once per suite."""
        if self._trajectory is None:
            self._trajectory = evolve(initial_field(self.config), self.config.coefficients, self.config.solver)
            self.artifacts["trajectory"] = self._trajectory
        return self._trajectory

    # ------------------------------------------------------------------
    # Conservation
    # ------------------------------------------------------------------

    def _conservation_checks(self) -> List[Check]:
        spec = self.config.conservation
        table = {
            "mass": self._check_mass,
            "moments": self._check_moments,
            "characteristics": self._check_characteristics,
        }
        return [(name, table[name]) for name in spec.checks]

    def _check_mass(self) -> Tuple[bool, Dict[str, Any]]:
        traj = self.trajectory()
        initial = integrate2d(traj[0])
        final = integrate2d(traj.final)
        drift = _relative(final, initial)
        history = [integrate2d(snap) for snap in traj.snapshots]
        tolerance = self.config.conservation.mass_rtol
        details = {
            "initial_mass": initial,
            "final_mass": final,
            "relative_drift": drift,
            "max_relative_drift": max(_relative(value, initial) for value in history),
            "tolerance": tolerance,
            "t_end": float(traj.final.t),
        }
        if drift >= tolerance:
            details["message"] = f"relative mass drift {drift:.3e} exceeds {tolerance:.1e}"
        return drift < tolerance, details

    def _check_moments(self) -> Tuple[bool, Dict[str, Any]]:
        spec = self.config.conservation
        solver = self.config.solver
        t_check = spec.moment_time or solver.t_end
        f0 = initial_field(self.config)
        run = evolve(f0, self.config.coefficients, SolverConfig(solver.dt, t_check, 10 ** 9, solver.cfl_safety))
        observed = grid_moments(run.final)
        oracle = moment_oracle(self.config.coefficients, grid_moments(f0), (0.0, t_check), spec.moment_dt).final()
        # zero-mean moments are compared relative to the mass
        mass = abs(oracle["1"]) or 1.0
        errors = {name: abs(observed[name] - oracle[name]) / max(abs(oracle[name]), mass) for name in MOMENT_NAMES}
        worst = max(errors.values())
        details = {
            "time": float(run.final.t),
            "grid_moments": observed,
            "oracle_moments": oracle,
            "relative_errors": errors,
            "max_relative_error": worst,
            "tolerance": spec.moment_rtol,
        }
        if worst >= spec.moment_rtol:
            details["message"] = f"moment error {worst:.3e} exceeds {spec.moment_rtol:.1e}"
        return worst < spec.moment_rtol, details

    def _check_characteristics(self) -> Tuple[bool, Dict[str, Any]]:
        cs = self.config.coefficients
        if not all(getattr(cs, name).is_zero() for name in ("p", "q", "r", "s")):
            raise InvalidParameterError("the characteristics oracle needs p = q = r = s = 0")
        init, solver = self.config.initial, self.config.solver
        coarse, fine = self.config.grid, self.config.grid.refined()
        dt = min(solver.dt, stable_time_step(fine, cs, 0.0, solver.cfl_safety))
        errors = []
        for grid in (coarse, fine):
            run = evolve(initial_field(self.config, grid), cs, SolverConfig(dt, solver.t_end, 10 ** 9, solver.cfl_safety))
            exact = free_streaming_gaussian(
                grid, run.final.t, cs.m, init.x0, init.y0, init.sx, init.sy, init.rho, init.amplitude
            )
            errors.append(float(np.max(np.abs(run.final.values - exact.values))))
        ratio = errors[0] / errors[1] if errors[1] > 0 else math.inf
        low, high = self.config.conservation.order_range
        passed = low <= ratio <= high
        details = {
            "dt": dt,
            "h": [coarse.x.h, fine.x.h],
            "linf_errors": errors,
            "error_ratio": ratio,
            "expected_range": [low, high],
        }
        if not passed:
            details["message"] = f"error ratio {ratio:.3f} outside [{low}, {high}]"
        return passed, details

    # ------------------------------------------------------------------
    # Symmetry
    # ------------------------------------------------------------------

    def _generators(self) -> Dict[str, Any]:
        cs = self.config.coefficients
        wanted = self.config.symmetry.generators
        gens: Dict[str, Any] = {}
        if any(label in ("Y1", "YZ", "X1", "X2", "X3", "X4") for label in wanted):
            gens.update(constant_generators(cs))
        if any(label in ("T1", "T2") for label in wanted):
            gens.update(characteristic_translations(cs))
        return {label: gens[label] for label in wanted}

    def _symmetry_checks(self) -> List[Check]:
        return [(label, lambda g=g: self._check_flow(g)) for label, g in self._generators().items()]

    def _check_flow(self, g) -> Tuple[bool, Dict[str, Any]]:
        spec = self.config.symmetry
        cs = self.config.coefficients
        traj = uniform_part(self.trajectory())
        defect = determining_defect(g, cs, traj.times)
        moved = push_forward(g, spec.eps, traj)
        details: Dict[str, Any] = {
            "eps": spec.eps,
            "generator": g.describe(),
            "determining_defect": defect,
        }
        structural_ok = defect["relative"] <= STRUCTURAL_TOLERANCE

        if g.is_pure_z():
            # a pure Z d_Z flow with constant gamma is multiplication by exp(eps gamma)
            worst = 0.0
            for snap, image in zip(traj.snapshots, moved.snapshots):
                expected = snap.values * np.exp(spec.eps * g.gamma(snap.t))
                scale = float(np.max(np.abs(expected))) or 1.0
                worst = max(worst, float(np.max(np.abs(image.values - expected))) / scale)
            details["max_relative_deviation"] = worst
            details["tolerance"] = spec.exact_tol
            passed = structural_ok and worst <= spec.exact_tol
            if not passed:
                details["message"] = f"flow deviates from exact scaling by {worst:.3e}"
            return passed, details

        base = residual2d(traj)
        transformed = residual2d(moved)
        ratio = transformed / base if base > 0 else (0.0 if transformed == 0 else math.inf)
        details.update({"base_residual": base, "transformed_residual": transformed, "residual_ratio": ratio})
        details["ratio_limit"] = spec.ratio_limit
        passed = structural_ok and ratio <= spec.ratio_limit
        if not structural_ok:
            details["message"] = f"determining conditions violated (relative defect {defect['relative']:.3e})"
        elif not passed:
            details["message"] = f"residual ratio {ratio:.3f} exceeds {spec.ratio_limit}"
        return passed, details

    # ------------------------------------------------------------------
    # Round trip
    # ------------------------------------------------------------------

    def _roundtrip_checks(self) -> List[Check]:
        spec = self.config.roundtrip
        checks: List[Check] = []
        for family in sorted(spec.families):
            for variant in spec.variants:
                checks.append((f"{family}/{variant}", lambda f=family, v=variant: self._check_roundtrip(f, v)))
        return checks

    def _check_roundtrip(self, family: str, variant: str) -> Tuple[bool, Dict[str, Any]]:
        spec = self.config.roundtrip
        cs = self.config.coefficients
        params = {key: value for key, value in spec.families[family].items() if value is not None}
        psi = free_schrodinger(family, {**params, "M": spec.M, "hbar": cs.hbar})
        result = roundtrip_check(
            psi, cs, spec.M, spec.tau0, spec.t_range, spec.w_range, spec.n, variant, spec.min_order
        )
        # the free family is checked on the real tau segment the map passes through
        tau = schrodinger_time(cs, spec.tau0, np.array(spec.t_range))
        lo, hi = sorted(float(v) for v in tau.imag)
        result["free_residual"] = free_equation_residual(psi, (lo, hi if hi > lo else lo + 1.0), (-1.0, 1.0), spec.n)
        result["M"] = spec.M
        result["family"] = family
        if not result["passed"]:
            order = result["order"]
            result["message"] = (
                f"reduced-equation residual {result['residuals'][0]:.3e} -> {result['residuals'][1]:.3e} "
                f"(order {order if order is None else round(order, 3)}) below {spec.min_order}"
            )
        return result["passed"], result

    # ------------------------------------------------------------------
    # Reduction
    # ------------------------------------------------------------------

    def reduction_candidates(self) -> Dict[str, Optional[Tuple[ReducedCoefficients, InvariantMap]]]:
        """Printed and invariance-derived reductions; None where the regime excludes one."""
        cs = self.config.coefficients
        candidates: Dict[str, Optional[Tuple[ReducedCoefficients, InvariantMap]]] = {}
        try:
            candidates["printed"] = (reduced_from_constants(cs), printed_invariant(cs))
        except (OverdampedRegimeError, DegenerateReductionError) as e:
            self.logger.info(f"printed reduction not applicable: {e}")
            candidates["printed"] = None
        try:
            candidates["derived"] = reduced_from_invariance(cs, self.config.reduction.slope_branch)
        except DegenerateReductionError as e:
            self.logger.info(f"derived reduction not applicable: {e}")
            candidates["derived"] = None
        return candidates

    def reduction_levels(self, rc: ReducedCoefficients, invariant: InvariantMap) -> List[ReductionLevel]:
        """The reduction pipeline at the configured level and one refinement."""
        config = self.config
        if config.w_grid is None:
            raise ConfigError(["grid.w: required block missing (needed by the reduction pipeline)"])
        init = config.initial
        spec = config.reduction
        levels = []
        grid2d, grid1d, snapshots = config.grid, config.w_grid, spec.snapshots
        for _ in range(2):
            levels.append(
                run_reduction_pipeline(
                    config.coefficients,
                    rc,
                    invariant,
                    grid2d,
                    grid1d,
                    {"w0": init.w0, "sw": init.sw, "amp": 1.0},
                    spec.t_end,
                    snapshots,
                    config.solver.cfl_safety,
                )
            )
            grid2d, grid1d, snapshots = grid2d.refined(), grid1d.refined(), 2 * snapshots
        return levels

    def pipeline_checks(self) -> List[Check]:
        """One convergence check per reduction; the ``reduce`` command runs only these."""
        return [
            (f"{name}_reduction", lambda n=name, c=candidate: self.check_reduction(n, c))
            for name, candidate in self.reduction_candidates().items()
        ]

    def _reduction_checks(self) -> List[Check]:
        return self.pipeline_checks() + [("reduced_symmetry", self._check_reduced_symmetry)]

    def check_reduction(self, name: str, candidate) -> Tuple[bool, Dict[str, Any]]:
        """Convergence of the reconstructed residual for one reduction."""
        if candidate is None:
            return True, {"status": "not_applicable", "reduction": name}
        rc, invariant = candidate
        levels = self.reduction_levels(rc, invariant)
        self.artifacts[f"{name}_levels"] = levels
        residuals = [level.residual for level in levels]
        order = convergence_order(*residuals)
        min_order = self.config.reduction.min_order
        passed = residuals[1] == 0.0 or (order is not None and order >= min_order)
        details = {
            "status": "evaluated",
            "reduction": name,
            "reduced_coefficients": rc.to_dict(),
            "invariant_slope": invariant.slope,
            "levels": [level.to_dict() for level in levels],
            "order": order,
            "min_order": min_order,
        }
        if not passed:
            errors = [level.error for level in levels if level.error]
            details["message"] = errors[0] if errors else (
                f"residual {residuals[0]!r} -> {residuals[1]!r} does not converge at order {min_order}"
            )
        return passed, details

    def _check_reduced_symmetry(self) -> Tuple[bool, Dict[str, Any]]:
        spec = self.config.reduction.symmetry
        chosen = None
        for name, candidate in self.reduction_candidates().items():
            if candidate is not None and candidate[0].S.constant_value() > 0:
                chosen = (name, candidate[0])
                break
        if chosen is None:
            return False, {"message": "no well-posed reduction to take into canonical time"}
        name, rc = chosen
        S, R, qt = rc.eval(0.0)
        constant = ReducedCoefficients(
            AnalyticProfile.constant(S), AnalyticProfile.constant(R), AnalyticProfile.constant(qt), rc.description
        )
        canonical, _ = to_canonical_time(constant, spec.T_end)
        omega = canonical.R.constant_value()
        sigma1, sigma2 = analytic_linear_basis(omega * omega)
        alpha = quadratic_alpha(sigma1, sigma2, *pinney_coefficients(1.0, 0.0, spec.K, 1.0))
        beta = riccati_beta_profile(omega, spec.beta0, spec.beta1)

        grid = Grid1D(*spec.grid)
        verdict = reduced_symmetry(
            alpha,
            beta,
            spec.phi0,
            canonical,
            grid,
            lambda v: np.exp(-0.5 * (v / spec.sw) ** 2).astype(complex),
            spec.T_end,
            spec.snapshots,
            spec.eps,
            spec.min_order,
            cfl_safety=self.config.solver.cfl_safety,
        )
        details = verdict.to_dict()
        details.update({"reduction": name, "omega": omega, "alpha": alpha.describe(), "beta": beta.describe()})
        if not verdict.passed:
            details["message"] = verdict.reason
        return verdict.passed, details
