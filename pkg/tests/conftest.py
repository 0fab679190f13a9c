"""Shared fixtures for the QBM Lab test suite"""

from pathlib import Path
from textwrap import dedent

import pytest

from qbm_modules.coefficients import constant_coefficients
from qbm_modules.fields import Grid1D, Grid2D


@pytest.fixture
def small_grid():
    """41 x 41 grid on [-4, 4]^2"""
    return Grid2D(Grid1D(-4.0, 4.0, 41), Grid1D(-4.0, 4.0, 41))


@pytest.fixture
def criterion_coefficients():
    """m=1, p=1, q=0, r=0.05, s=0.02 (undamped oscillator with weak diffusion)"""
    return constant_coefficients(1.0, 1.0, 0.0, 0.05, 0.02)


@pytest.fixture
def underdamped_coefficients():
    """m=1, p=1, q=0.2, r=0.25, s=0.5 (4p > m q^2, positive reduced diffusion)"""
    return constant_coefficients(1.0, 1.0, 0.2, 0.25, 0.5)


@pytest.fixture
def overdamped_coefficients():
    """m=1, p=0.5, q=2, r=0.05, s=0.02 (4p < m q^2)"""
    return constant_coefficients(1.0, 0.5, 2.0, 0.05, 0.02)


@pytest.fixture
def write_config(tmp_path):
    """Write a YAML run configuration under tmp_path and return its path."""

    def _write(text: str, name: str = "run.yaml") -> Path:
        path = tmp_path / name
        path.write_text(dedent(text).lstrip())
        return path

    return _write
