"""Shared fixtures: reference setups reused across the test modules."""

import numpy as np
import pytest

from mixgeo.envelopes import ReferenceContext, compute_envelopes
from mixgeo.families import Mixture, ParameterDomain, fig1_family, \
    gaussian_family
from mixgeo.geometry import LocalGeometry, build_neighborhoods, estimate_cstar
from mixgeo.metrics import envelope_S
from mixgeo.quadrature import trapezoid_grid


@pytest.fixture(scope="session")
def fig1_ctx():
    family = fig1_family()
    domain = ParameterDomain(np.array([0.5]), 0.5)
    ref = Mixture(np.ones(1), np.array([[0.5]]))
    grid = trapezoid_grid(0.5, 6.5, 241)
    return ReferenceContext.build(family, domain, ref, grid)


@pytest.fixture(scope="session")
def fig1_nbhd(fig1_ctx):
    return build_neighborhoods(fig1_ctx.ref, fig1_ctx.domain, seed=0)


@pytest.fixture(scope="session")
def fig1_lg(fig1_ctx, fig1_nbhd):
    return LocalGeometry(fig1_ctx, fig1_nbhd)


@pytest.fixture(scope="session")
def fig1_envs(fig1_ctx):
    return compute_envelopes(fig1_ctx, max_order=3)


@pytest.fixture(scope="session")
def fig1_cstar(fig1_lg):
    c, _, _ = estimate_cstar(fig1_lg, 500, seed=0, refine_steps=80,
                             polish_maxiter=1500)
    return c


@pytest.fixture(scope="session")
def fig1_senv(fig1_envs, fig1_ctx, fig1_cstar):
    return envelope_S(fig1_envs, fig1_ctx, fig1_cstar)


@pytest.fixture(scope="session")
def gauss_ctx():
    family = gaussian_family(1)
    domain = ParameterDomain(np.array([0.0]), 1.5)
    ref = Mixture(np.array([0.4, 0.6]), np.array([[-0.5], [0.5]]))
    grid = trapezoid_grid(0.0, 11.5, 481)
    return ReferenceContext.build(family, domain, ref, grid)


@pytest.fixture(scope="session")
def gauss_nbhd(gauss_ctx):
    return build_neighborhoods(gauss_ctx.ref, gauss_ctx.domain, seed=0)


@pytest.fixture(scope="session")
def gauss_lg(gauss_ctx, gauss_nbhd):
    return LocalGeometry(gauss_ctx, gauss_nbhd)
