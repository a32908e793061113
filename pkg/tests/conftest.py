"""Shared fixtures: standard grids and cached solver runs.

The slower PDE runs are session-scoped so acceptance tests and unit tests
share them instead of re-integrating.
"""

from __future__ import annotations

import numpy as np
import pytest

from peakonlab.chsolver import SolverConfig, simulate
from peakonlab.field import init_from_measure
from peakonlab.grid import SpatialGrid


@pytest.fixture(scope="session")
def fine_grid() -> SpatialGrid:
    return SpatialGrid.regular(-40.0, 40.0, 0.01)


@pytest.fixture(scope="session")
def coarse_grid() -> SpatialGrid:
    return SpatialGrid.regular(-30.0, 30.0, 0.02)


@pytest.fixture(scope="session")
def peakon_run_resolved():
    """Well-resolved mollified peakon run (n=8), T=2, every-step snapshots."""
    grid = SpatialGrid.regular(-25.0, 25.0, 0.02)
    state = init_from_measure([(2.0, 0.0)], grid, n=8, sign_split_x0=-10.0)
    cfg = SolverConfig(cfl=0.3, t_end=2.0, output_stride=1, mollification_n=8)
    return simulate(state, cfg)


@pytest.fixture(scope="session")
def peakon_run_T10():
    """Single mollified peakon (c=1, n=64, h=0.02) over T=10."""
    grid = SpatialGrid.regular(-25.0, 45.0, 0.02)
    state = init_from_measure([(2.0, 0.0)], grid, n=64, sign_split_x0=-10.0)
    cfg = SolverConfig(cfl=0.3, t_end=10.0, output_stride=25, mollification_n=64)
    return simulate(state, cfg)


@pytest.fixture(scope="session")
def rng() -> np.random.Generator:
    return np.random.default_rng(20260810)
