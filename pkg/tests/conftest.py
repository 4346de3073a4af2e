import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from safeweave.cache import CacheError, load_cache, save_cache
from safeweave.hji import SolverConfig, TerminalValueSpec, solve_brs, terminal_value, test_grid_tiny
from safeweave.vehicle import VehicleParams


@pytest.fixture(scope="session")
def tiny_cache(request):
    """Converged cache on the very coarse 7D grid, persisted across runs."""
    params = VehicleParams()
    spec = test_grid_tiny()
    term = terminal_value(TerminalValueSpec(), spec)
    cfg = SolverConfig(grid=spec, tol=2e-3, max_time=30.0, workers=2)
    cache_dir = request.config.cache.mkdir("safeweave")
    path = Path(cache_dir) / "tiny.hjvc"
    if path.exists():
        try:
            return load_cache(path, params=params.without_drag(), terminal_values=term.values)
        except CacheError:
            path.unlink()
    cache = solve_brs(cfg, term, params)
    save_cache(cache, path)
    return cache


@pytest.fixture(scope="session")
def default_params():
    return VehicleParams()
