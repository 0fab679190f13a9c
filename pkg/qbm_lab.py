#!/usr/bin/env python3
"""
QBM Lab - Quantum Brownian Motion Numerical Laboratory
======================================================

Command-line orchestrator for the master-equation laboratory. It solves the
two-dimensional master equation, runs the one-dimensional reduction and
reconstruction, checks symmetries and the free Schrodinger map, integrates
the Ermakov-Pinney companion and tabulates generator brackets.

Key Features:
    - One YAML run configuration per scenario (see configs/)
    - Deterministic artifacts: CSV fields with JSON sidecars, schema-checked
      JSON reports and a run manifest per command
    - Distinct exit codes: 0 success, 1 contract or configuration error,
      2 a verification verdict failed
    - Dual logging: DEBUG file log under ~/.qbm_lab/logs, INFO on stderr
    - Stage timing and memory metrics in the log, never in artifacts

Usage:
    python qbm_lab.py solve2d --config configs/mass_conservation.yaml [--out DIR]
    python qbm_lab.py reduce --config configs/reduction_pipeline.yaml
    python qbm_lab.py verify --what conservation --config configs/mass_conservation.yaml
    python qbm_lab.py ermakov --omega2 const:0 --K 1 --rho0 1 --drho0 0 --t1 1 --dt 0.001
    python qbm_lab.py bracket --set constant --config configs/symmetry_flows.yaml

Environment:
    QBM_OUTPUT_DIR  overrides output.directory (``--out`` overrides both);
                    read from the environment or a .env file

Author: QBM Lab Developers
Version: 1.0.0
"""

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import jsonschema
import psutil
from dotenv import find_dotenv, load_dotenv

from qbm_modules.errors import QBMError
from qbm_modules.ermakov import ErmakovProblem, ermakov_report
from qbm_modules.fields import write_field
from qbm_modules.master_solver import boundary_ratio, evolve
from qbm_modules.profiles import parse_profile
from qbm_modules.reports import write_json_document
from qbm_modules.run_config import RunConfig, parse_config
from qbm_modules.run_manifest import RunManifest
from qbm_modules.symmetry import algebra_table, characteristic_translations, constant_generators
from qbm_modules.validator import SUITES, VerificationSuite, initial_field

VERSION = "1.0.0"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERDICT_FAILED = 2

BOUNDARY_WARNING = 1e-10
DEFAULT_OUTPUT_DIR = "qbm_output"


class UsageError(Exception):
    """Command-line usage problem (exit code 1)."""


class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; 2 is reserved for failed verdicts here."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


class QBMLab:
    """
    Orchestrator for one command invocation.

    Attributes:
        args: parsed command-line arguments
        logger: the ``qbm_lab`` logger
        stage_metrics: per-stage duration and resident memory (log only)
    """

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.start_time = time.time()
        self.stage_metrics: Dict[str, Dict[str, float]] = {}
        self._stage_start: Optional[float] = None
        self.log_dir = Path.home() / ".qbm_lab" / "logs"
        self.logger = self._setup_logging(verbose=getattr(args, "verbose", False))
        self.manifest: Optional[RunManifest] = None

    def _setup_logging(self, verbose: bool = False) -> logging.Logger:
        """
        Dual logging: everything (DEBUG) to a file with function names and
        line numbers, INFO and above to stderr. A file that cannot be created
        is skipped silently.
        """
        logger = logging.getLogger("qbm_lab")
        logger.setLevel(logging.DEBUG)
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()

        file_formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'
        )
        console_formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')

        try:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(self.log_dir / f"qbm_lab_{int(time.time())}_{os.getpid()}.log")
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(file_formatter)
            logger.addHandler(file_handler)
        except OSError:
            pass

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
        console_handler.setFormatter(console_formatter)
        logger.addHandler(console_handler)
        return logger

    # ------------------------------------------------------------------
    # Stages and metrics
    # ------------------------------------------------------------------

    def start_stage(self, name: str) -> None:
        self._stage_start = time.time()
        self.logger.info(f"{'=' * 20} {name} {'=' * 20}")
        if self.manifest is not None and name in self.manifest.progress:
            self.manifest.start_stage(name)

    def complete_stage(self, name: str, details: Optional[Dict[str, Any]] = None) -> None:
        self._record_metrics(name)
        if self.manifest is not None and name in self.manifest.progress:
            self.manifest.complete_stage(name, details)

    def fail_stage(self, name: str, message: str) -> None:
        self._record_metrics(name)
        if self.manifest is not None and name in self.manifest.progress and self.manifest.progress[name].status == "in_progress":
            self.manifest.fail_stage(name, message)

    def _record_metrics(self, name: str) -> None:
        duration = time.time() - (self._stage_start or time.time())
        rss = psutil.Process().memory_info().rss / (1024 * 1024)
        self.stage_metrics[name] = {"duration": duration, "rss_mb": rss}
        self.logger.debug(f"stage {name}: {duration:.2f}s, rss {rss:.1f} MiB")

    def print_metrics_summary(self) -> None:
        """Stage timing breakdown and peak memory, on the logger."""
        total = time.time() - self.start_time
        self.logger.info("=" * 60)
        self.logger.info("RUN METRICS SUMMARY")
        self.logger.info("=" * 60)
        if self.stage_metrics:
            width = max(len(name) for name in self.stage_metrics)
            for name, metrics in self.stage_metrics.items():
                share = 100.0 * metrics["duration"] / total if total > 0 else 0.0
                bar = "█" * int(share / 4) + "░" * (25 - int(share / 4))
                self.logger.info(f"  {name:<{width}} : {metrics['duration']:7.2f}s ({share:5.1f}%) {bar}")
            peak = max(m["rss_mb"] for m in self.stage_metrics.values())
            self.logger.info(f"📊 Total {total:.2f}s over {len(self.stage_metrics)} stages, peak RSS {peak:.1f} MiB")
        else:
            self.logger.info(f"📊 Total {total:.2f}s")

    # ------------------------------------------------------------------
    # Shared helpers
    # ------------------------------------------------------------------

    def output_root(self, config: Optional[RunConfig]) -> Path:
        """--out, then QBM_OUTPUT_DIR, then output.directory."""
        out = getattr(self.args, "out", None)
        if out:
            return Path(out)
        env = os.environ.get("QBM_OUTPUT_DIR")
        if env:
            return Path(env)
        if config is not None:
            return Path(config.output.directory)
        return Path(DEFAULT_OUTPUT_DIR)

    def load_config(self, stage: str = "configuration") -> RunConfig:
        self.start_stage(stage)
        config = parse_config(Path(self.args.config))
        self.logger.info(f"✅ Configuration loaded: {config.coefficients.description}")
        return config

    def begin_manifest(self, command: str, stages: Sequence[str], out_dir: Path, config: Optional[RunConfig]) -> None:
        self.manifest = RunManifest(command, stages, out_dir)
        if config is not None:
            self.manifest.config_path = Path(self.args.config).as_posix()
            self.manifest.config_echo = config.echo
            self.manifest.coefficients = config.coefficients.describe()

    def write_trajectory(self, traj: Any, directory: Path, stem: str, formats: Sequence[str], provenance: str) -> None:
        if "csv" not in formats:
            return
        for k, snap in enumerate(traj.snapshots):
            path = write_field(directory / f"{stem}_{k:04d}.csv", snap, provenance, sidecar="json" in formats)
            self.manifest.record_snapshot(path, snap.t)

    def write_report(self, path: Path, payload: Dict[str, Any], schema: str) -> Path:
        written = write_json_document(path, payload, schema)
        self.manifest.record_artifact(written)
        return written

    def finish(self, verdict: Optional[str]) -> int:
        self.manifest.verdict = verdict
        self.manifest.save()
        self.manifest.print_progress_report()
        return EXIT_VERDICT_FAILED if verdict == "failed" else EXIT_OK

    # ------------------------------------------------------------------
    # Commands
    # ------------------------------------------------------------------

    def cmd_solve2d(self) -> int:
        config = self.load_config()
        out_dir = self.output_root(config) / "solve2d"
        self.begin_manifest("solve2d", ["configuration", "initial_data", "evolution", "artifacts"], out_dir, config)
        self.complete_stage("configuration")

        self.start_stage("initial_data")
        f0 = initial_field(config)
        self.complete_stage("initial_data", {"grid": config.grid.to_dict(), "amplitude": config.initial.amplitude})

        self.start_stage("evolution")
        traj = evolve(f0, config.coefficients, config.solver)
        ratio = boundary_ratio(traj.final)
        if ratio > BOUNDARY_WARNING:
            self.logger.warning(f"⚠️  boundary magnitude is {ratio:.3e} of the peak; widen the grid")
        self.complete_stage("evolution", {
            "dt": traj.notes.get("dt"),
            "steps": traj.notes.get("steps"),
            "snapshots": len(traj),
            "boundary_ratio": ratio,
        })

        self.start_stage("artifacts")
        self.write_trajectory(traj, out_dir / "fields", "z", config.output.formats, "solve2d")
        self.complete_stage("artifacts")
        return self.finish(None)

    def cmd_reduce(self) -> int:
        config = self.load_config()
        out_dir = self.output_root(config) / "reduce"
        self.begin_manifest("reduce", ["configuration", "reduction", "artifacts"], out_dir, config)
        self.complete_stage("configuration")

        self.start_stage("reduction")
        suite = VerificationSuite(config, self.logger)
        report = suite.run_checks("reduce", suite.pipeline_checks())
        self.complete_stage("reduction", {"verdict": report["verdict"]})

        self.start_stage("artifacts")
        for name in ("printed", "derived"):
            levels = suite.artifacts.get(f"{name}_levels")
            if not levels or levels[0].reduced is None:
                continue
            self.write_trajectory(levels[0].reduced, out_dir / name, "u", config.output.formats, f"reduce/{name}")
            self.write_trajectory(levels[0].reconstructed, out_dir / name, "z", config.output.formats, f"reduce/{name}")
        self.write_report(out_dir / "reduction_report.json", report, "verification")
        self.complete_stage("artifacts")
        return self.finish(report["verdict"])

    def cmd_verify(self) -> int:
        config = self.load_config()
        what = self.args.what
        out_dir = self.output_root(config) / f"verify_{what}"
        self.begin_manifest(f"verify {what}", ["configuration", "verification", "artifacts"], out_dir, config)
        self.complete_stage("configuration")

        self.start_stage("verification")
        report = VerificationSuite(config, self.logger).run(what)
        self.complete_stage("verification", {"verdict": report["verdict"]})

        self.start_stage("artifacts")
        self.write_report(out_dir / f"{what}_report.json", report, "verification")
        self.complete_stage("artifacts")
        return self.finish(report["verdict"])

    def cmd_ermakov(self) -> int:
        args = self.args
        out_dir = self.output_root(None) / "ermakov"
        self.begin_manifest("ermakov", ["ermakov", "artifacts"], out_dir, None)

        self.start_stage("ermakov")
        omega2 = parse_profile(args.omega2, Path.cwd())
        problem = ErmakovProblem(omega2, args.K, args.rho0, args.drho0)
        report = ermakov_report(problem, (0.0, args.t1), args.dt)
        self.complete_stage("ermakov", {"verdict": "passed" if report.passed else "failed"})

        self.start_stage("artifacts")
        rows = ["T,rho,drho,rho_superposed"]
        for (T, rho, drho), rho_s in zip(report.integrated.to_rows(), report.superposed.values.tolist()):
            rows.append(f"{T!r},{rho!r},{drho!r},{rho_s!r}")
        csv_path = out_dir / "rho.csv"
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text("\n".join(rows) + "\n")
        self.manifest.record_artifact(csv_path)
        self.write_report(out_dir / "ermakov_report.json", report.to_dict(), "ermakov_report")
        self.complete_stage("artifacts")
        return self.finish("passed" if report.passed else "failed")

    def cmd_bracket(self) -> int:
        config = self.load_config()
        out_dir = self.output_root(config) / f"bracket_{self.args.set}"
        self.begin_manifest(f"bracket {self.args.set}", ["configuration", "brackets", "artifacts"], out_dir, config)
        self.complete_stage("configuration")

        self.start_stage("brackets")
        cs = config.coefficients
        if self.args.set == "constant":
            gens = constant_generators(cs)
        else:
            gens = {"YZ": constant_generators(cs)["YZ"], **characteristic_translations(cs)}
        table = algebra_table(gens)
        flags = table.structure
        passed = flags.get("unresolved", 0) == 0 and all(
            flags.get(key, True) for key in ("translation_brackets_pure_z", "time_acts_by_scaling")
        )
        verdict = "passed" if passed else "failed"
        self.complete_stage("brackets", {"verdict": verdict, "structure": flags})

        self.start_stage("artifacts")
        text = table.format_text()
        sys.stdout.write(text)
        text_path = out_dir / "brackets.txt"
        text_path.parent.mkdir(parents=True, exist_ok=True)
        text_path.write_text(text)
        self.manifest.record_artifact(text_path)
        payload = {"set": self.args.set, "coefficients": cs.describe(), **table.to_dict(), "verdict": verdict}
        self.write_report(out_dir / "brackets.json", payload, "bracket_table")
        self.complete_stage("artifacts")
        return self.finish(verdict)

    def execute(self) -> int:
        commands = {
            "solve2d": self.cmd_solve2d,
            "reduce": self.cmd_reduce,
            "verify": self.cmd_verify,
            "ermakov": self.cmd_ermakov,
            "bracket": self.cmd_bracket,
        }
        self.logger.info(f"🚀 qbm_lab {self.args.command}")
        try:
            return commands[self.args.command]()
        except (QBMError, jsonschema.ValidationError, OSError) as e:
            stage = self._current_stage()
            if stage:
                self.fail_stage(stage, str(e))
                self._save_partial_manifest()
            self.logger.error(f"❌ {type(e).__name__}: {e}")
            return EXIT_ERROR
        finally:
            self.print_metrics_summary()

    def _current_stage(self) -> Optional[str]:
        if self.manifest is None:
            return None
        for name in self.manifest.stages:
            if self.manifest.progress[name].status == "in_progress":
                return name
        return None

    def _save_partial_manifest(self) -> None:
        try:
            self.manifest.save()
        except (OSError, jsonschema.ValidationError) as e:
            self.logger.debug(f"manifest not written: {e}")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="qbm_lab",
        description="Numerical laboratory for the quantum Brownian motion master equation",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"qbm_lab {VERSION}")
    parser.add_argument("--verbose", action="store_true", help="DEBUG output on the console")
    sub = parser.add_subparsers(dest="command", parser_class=_ArgumentParser, metavar="{solve2d,reduce,verify,ermakov,bracket}")
    sub.required = True

    solve = sub.add_parser("solve2d", help="integrate the master equation and write snapshots")
    solve.add_argument("--config", required=True, help="YAML run configuration")
    solve.add_argument("--out", help="output directory (overrides QBM_OUTPUT_DIR and output.directory)")

    reduce = sub.add_parser("reduce", help="solve the reduced equation and reconstruct the 2D field")
    reduce.add_argument("--config", required=True, help="YAML run configuration")

    verify = sub.add_parser("verify", help="run a verification suite")
    verify.add_argument("--what", required=True, choices=SUITES, help="suite to run")
    verify.add_argument("--config", required=True, help="YAML run configuration")

    ermakov = sub.add_parser("ermakov", help="integrate the Ermakov-Pinney equation and cross-check it")
    ermakov.add_argument("--omega2", required=True, help="profile spec: number, const:<v>, exp:<rate>, expr:<f(t)>, table:<path>")
    ermakov.add_argument("--K", type=float, required=True, help="Ermakov constant")
    ermakov.add_argument("--rho0", type=float, required=True, help="rho(0) > 0")
    ermakov.add_argument("--drho0", type=float, required=True, help="rho'(0)")
    ermakov.add_argument("--t1", type=float, required=True, help="final time")
    ermakov.add_argument("--dt", type=float, required=True, help="RK4 step")

    bracket = sub.add_parser("bracket", help="tabulate generator commutators")
    bracket.add_argument("--set", required=True, choices=("constant", "characteristic"), help="generator set")
    bracket.add_argument("--config", required=True, help="YAML run configuration")
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv``, execute one command and return its exit code."""
    load_dotenv(find_dotenv(usecwd=True))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"qbm_lab: error: {e}\n")
        return EXIT_ERROR
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)
    return QBMLab(args).execute()


def main():
    """Main entry point."""
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
