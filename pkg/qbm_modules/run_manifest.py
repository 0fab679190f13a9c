#!/usr/bin/env python3
"""
QBM Lab - Run Manifest Module
=============================

Tracks the stages of one subcommand run and writes ``manifest.json`` next
to the artifacts it produced.

The manifest records what was run and what came out of it: the command,
the configuration echo, the coefficient description, every stage with its
status and details, and the snapshot files with their times. Wall-clock
times never enter the manifest, so repeated runs write identical bytes;
durations are logged instead.

Author: QBM Lab Developers
Version: 1.0.0
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .reports import write_json_document

logger = logging.getLogger("qbm_lab.run_manifest")

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = "1.0.0"

STAGE_DEFINITIONS: Dict[str, Dict[str, Any]] = {
    "configuration": {
        "id": "CFG-001",
        "description": "Load, resolve and validate the run configuration",
        "dependencies": [],
    },
    "initial_data": {
        "id": "INI-002",
        "description": "Sample the Gaussian initial data on the grid",
        "dependencies": ["configuration"],
    },
    "evolution": {
        "id": "EVO-003",
        "description": "Integrate the master equation with RK4",
        "dependencies": ["initial_data"],
    },
    "reduction": {
        "id": "RED-004",
        "description": "Solve the reduced equation and reconstruct the 2D field",
        "dependencies": ["configuration"],
    },
    "verification": {
        "id": "VER-005",
        "description": "Run the verification checks and fold them into a verdict",
        "dependencies": ["configuration"],
    },
    "ermakov": {
        "id": "ERM-006",
        "description": "Integrate the Ermakov-Pinney equation and cross-check the superposition",
        "dependencies": [],
    },
    "brackets": {
        "id": "BRK-007",
        "description": "Build the generator set and tabulate commutators",
        "dependencies": ["configuration"],
    },
    "artifacts": {
        "id": "OUT-008",
        "description": "Write fields, reports and sidecars",
        "dependencies": [],
    },
}

STATUS_ICONS = {"completed": "✅", "in_progress": "🔄", "failed": "❌", "pending": "⏳"}


@dataclass
class StageStatus:
    name: str
    status: str  # pending, in_progress, completed, failed
    stage_id: str
    error_message: Optional[str] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        definition = STAGE_DEFINITIONS[self.name]
        return {
            "name": self.name,
            "id": self.stage_id,
            "description": definition["description"],
            "dependencies": list(definition["dependencies"]),
            "status": self.status,
            "error": self.error_message,
            "details": self.details,
        }


class RunManifest:
    """
    Stage bookkeeping for one run.

    Durations live in ``_started``/``durations`` only and are reported through
    the logger.
    """

    def __init__(self, command: str, stages: Sequence[str], output_dir: Path):
        unknown = [name for name in stages if name not in STAGE_DEFINITIONS]
        if unknown:
            raise KeyError(f"unknown stages {unknown}")
        self.command = command
        self.output_dir = Path(output_dir)
        self.stages: List[str] = list(stages)
        self.progress: Dict[str, StageStatus] = {
            name: StageStatus(name=name, status="pending", stage_id=STAGE_DEFINITIONS[name]["id"]) for name in stages
        }
        self.config_path: Optional[str] = None
        self.config_echo: Dict[str, Any] = {}
        self.coefficients: Dict[str, Any] = {}
        self.snapshots: List[Dict[str, Any]] = []
        self.artifacts: List[str] = []
        self.verdict: Optional[str] = None
        self.durations: Dict[str, float] = {}
        self._started: Dict[str, float] = {}

    def _stage(self, name: str) -> StageStatus:
        if name not in self.progress:
            raise KeyError(f"stage '{name}' is not part of the {self.command} run")
        return self.progress[name]

    def start_stage(self, name: str) -> None:
        stage = self._stage(name)
        waiting = [dep for dep in STAGE_DEFINITIONS[name]["dependencies"] if dep in self.progress and self.progress[dep].status != "completed"]
        if waiting:
            logger.warning(f"⚠️  stage {name} started before {', '.join(waiting)} completed")
        stage.status = "in_progress"
        self._started[name] = time.perf_counter()
        logger.debug(f"🔄 {stage.stage_id} {name} started")

    def _finish(self, name: str) -> float:
        elapsed = time.perf_counter() - self._started.pop(name, time.perf_counter())
        self.durations[name] = elapsed
        return elapsed

    def complete_stage(self, name: str, details: Optional[Dict[str, Any]] = None) -> None:
        stage = self._stage(name)
        stage.status = "completed"
        if details:
            stage.details.update(details)
        logger.info(f"✅ {name} completed in {self._finish(name):.2f}s")

    def fail_stage(self, name: str, error_message: str, details: Optional[Dict[str, Any]] = None) -> None:
        stage = self._stage(name)
        stage.status = "failed"
        stage.error_message = error_message
        if details:
            stage.details.update(details)
        logger.error(f"❌ {name} failed after {self._finish(name):.2f}s: {error_message}")

    def record_snapshot(self, path: Path, t: float) -> None:
        self.snapshots.append({"path": self._relative(path), "t": float(t)})

    def record_artifact(self, path: Path) -> None:
        self.artifacts.append(self._relative(path))

    def _relative(self, path: Path) -> str:
        path = Path(path)
        try:
            return path.relative_to(self.output_dir).as_posix()
        except ValueError:
            return path.as_posix()

    def get_progress_summary(self) -> Dict[str, Any]:
        statuses = [self.progress[name].status for name in self.stages]
        return {
            "total_stages": len(self.stages),
            "completed": statuses.count("completed"),
            "failed": statuses.count("failed"),
            "pending": statuses.count("pending"),
            "failed_stages": [name for name in self.stages if self.progress[name].status == "failed"],
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "manifest_version": MANIFEST_VERSION,
            "command": self.command,
            "config_path": self.config_path,
            "configuration": self.config_echo,
            "coefficients": self.coefficients,
            "stages": [self.progress[name].to_dict() for name in self.stages],
            "snapshots": self.snapshots,
            "artifacts": sorted(self.artifacts),
            "verdict": self.verdict,
            "summary": self.get_progress_summary(),
        }

    def save(self) -> Path:
        path = write_json_document(self.output_dir / MANIFEST_NAME, self.to_dict(), "manifest")
        logger.info(f"📝 Manifest written to {path}")
        return path

    def print_progress_report(self) -> None:
        """Stage report on the logger, with the durations kept out of the manifest."""
        summary = self.get_progress_summary()
        logger.info("=" * 60)
        logger.info(f"QBM LAB RUN REPORT: {self.command}")
        logger.info("=" * 60)
        logger.info(f"Stages: {summary['completed']}/{summary['total_stages']} completed")
        for name in self.stages:
            stage = self.progress[name]
            duration = f" ({self.durations[name]:.2f}s)" if name in self.durations else ""
            logger.info(f"  {STATUS_ICONS.get(stage.status, '❓')} {stage.stage_id} {name}{duration}")
            if stage.error_message:
                logger.info(f"      {stage.error_message}")
        if summary["failed_stages"]:
            logger.info(f"❌ Failed stages: {', '.join(summary['failed_stages'])}")
