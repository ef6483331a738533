"""Quadrature grids, grid functions, and weighted norms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixgeo.errors import ConfigError, NumericError, ShapeError
from mixgeo.quadrature import (GridFunction, QuadratureGrid, RefMeasure,
                               lp_norm, trapezoid_grid)


def test_trapezoid_integrates_gaussian_to_machine_precision():
    # spectral accuracy of the trapezoid rule for analytic decaying
    # integrands; oracle is the exact unit mass
    grid = trapezoid_grid(0.0, 12.0, 301)
    vals = np.exp(-0.5 * grid.nodes[:, 0] ** 2) / np.sqrt(2 * np.pi)
    assert abs(grid.integrate(vals) - 1.0) < 1e-13


def test_trapezoid_2d_mass():
    grid = trapezoid_grid([0.0, 0.0], 9.0, 121, dim=2)
    r2 = np.sum(grid.nodes ** 2, axis=1)
    vals = np.exp(-0.5 * r2) / (2 * np.pi)
    assert abs(grid.integrate(vals) - 1.0) < 1e-12


def test_trapezoid_polynomial_oracle():
    # exact value of int_{-1}^{1} x^2 dx = 2/3 up to O(h^2)
    grid = trapezoid_grid(0.0, 1.0, 2001)
    approx = grid.integrate(grid.nodes[:, 0] ** 2)
    assert abs(approx - 2.0 / 3.0) < 1e-6


def test_grid_validation():
    with pytest.raises(ConfigError):
        trapezoid_grid(0.0, 1.0, 1)
    with pytest.raises(ConfigError):
        trapezoid_grid(0.0, 1.0, 10, dim=3)
    with pytest.raises(ShapeError):
        QuadratureGrid(np.zeros((3, 1)), np.ones(2), "bad")
    with pytest.raises(ConfigError):
        QuadratureGrid(np.zeros((3, 1)), np.array([1.0, -1.0, 1.0]), "neg")
    with pytest.raises(NumericError):
        QuadratureGrid(np.array([[np.nan], [0.0]]), np.ones(2), "nan")


def test_grid_function_arithmetic():
    grid = trapezoid_grid(0.0, 1.0, 11)
    f = GridFunction(grid.nodes[:, 0], grid)
    g = GridFunction(np.ones(grid.n), grid)
    assert np.allclose((f + g).values, f.values + 1.0)
    assert np.allclose((f - 1.0).values, f.values - 1.0)
    assert np.allclose((2.0 * f).values, 2.0 * f.values)
    assert np.allclose(abs(f).values, np.abs(f.values))
    assert np.allclose((f / g).values, f.values)
    with pytest.raises(NumericError):
        GridFunction(np.full(grid.n, np.inf), grid)


def test_ref_measure_mass_certificate():
    grid = trapezoid_grid(0.0, 12.0, 301)
    fstar = np.exp(-0.5 * grid.nodes[:, 0] ** 2) / np.sqrt(2 * np.pi)
    ref = RefMeasure(grid, fstar)
    assert abs(ref.wf.sum() - 1.0) < 1e-6
    # a too-narrow box must fail the certificate
    narrow = trapezoid_grid(0.0, 2.0, 101)
    fnarrow = np.exp(-0.5 * narrow.nodes[:, 0] ** 2) / np.sqrt(2 * np.pi)
    with pytest.raises(ConfigError):
        RefMeasure(narrow, fnarrow)


def test_weighted_lp_norms_against_closed_forms():
    grid = trapezoid_grid(0.0, 12.0, 401)
    fstar = np.exp(-0.5 * grid.nodes[:, 0] ** 2) / np.sqrt(2 * np.pi)
    ref = RefMeasure(grid, fstar)
    # ||1||_p = 1 for all p under a probability measure
    for p in (1.0, 2.0, 4.0):
        assert abs(ref.lp(np.ones(grid.n), p) - 1.0) < 1e-6
    # ||x||_2 under the standard Gaussian is 1
    assert abs(ref.lp(grid.nodes[:, 0], 2.0) - 1.0) < 1e-6
    # ||x||_4 = (E x^4)^(1/4) = 3^(1/4)
    assert abs(ref.lp(grid.nodes[:, 0], 4.0) - 3.0 ** 0.25) < 1e-6
    g = GridFunction(grid.nodes[:, 0], grid)
    assert lp_norm(g, 2.0, ref) == ref.lp(g.values, 2.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_integrate_is_linear(a, b):
    grid = trapezoid_grid(0.0, 3.0, 41)
    f = np.sin(grid.nodes[:, 0])
    g = np.cos(grid.nodes[:, 0])
    lhs = grid.integrate(a * f + b * g)
    rhs = a * grid.integrate(f) + b * grid.integrate(g)
    assert abs(lhs - rhs) < 1e-10 * (1 + abs(a) + abs(b))
