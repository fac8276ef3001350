"""Shared fixtures: grids and transform plans are expensive, build once."""

import pytest

from bessel_riesz.grids import MultiIndexAlpha, build_grid, default_grid_size
from bessel_riesz.hankel import HankelPlan


@pytest.fixture(scope="session")
def grid_of():
    cache = {}

    def get(alpha, n=None, x_max=None, profile="composite-log-linear"):
        alpha = MultiIndexAlpha(alpha)
        n0, x0 = default_grid_size(alpha.d)
        key = (alpha.alpha, n or n0, x_max or x0, profile)
        if key not in cache:
            cache[key] = build_grid(alpha, key[1], key[2], profile=key[3])
        return cache[key]

    return get


@pytest.fixture(scope="session")
def plan_of(grid_of):
    cache = {}

    def get(alpha, n=None, x_max=None):
        alpha = MultiIndexAlpha(alpha)
        g = grid_of(alpha, n, x_max)
        key = (alpha.alpha, id(g))
        if key not in cache:
            cache[key] = HankelPlan(alpha, g)
        return cache[key]

    return get
