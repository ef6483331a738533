"""Divergences and the normalized deviation machinery.

The Hellinger oracle is the closed form for two unit-variance Gaussian
locations, h^2 = 2 (1 - exp(-delta^2 / 8)); the chi-square oracle is
exp(delta^2) - 1.
"""

import numpy as np
import pytest

from mixgeo.envelopes import ReferenceContext
from mixgeo.errors import DegenerateInputError, DependencyError, \
    PreconditionError
from mixgeo.families import Mixture, ParameterDomain, gaussian_family
from mixgeo.metrics import (chi_square, envelope_S, hellinger,
                            hellinger_to_ref, normalized_deviation,
                            total_variation)
from mixgeo.quadrature import trapezoid_grid


@pytest.fixture(scope="module")
def gctx():
    family = gaussian_family(1)
    domain = ParameterDomain(np.zeros(1), 1.5)
    ref = Mixture(np.ones(1), np.zeros((1, 1)))
    grid = trapezoid_grid(0.0, 12.0, 481)
    return ReferenceContext.build(family, domain, ref, grid)


def _atom(theta):
    return Mixture(np.ones(1), np.array([[theta]]))


@pytest.mark.parametrize("delta", [0.1, 0.5, 1.0, 2.0])
def test_hellinger_gaussian_closed_form(delta, gctx):
    h = hellinger(_atom(0.0), _atom(delta), gctx)
    exact = np.sqrt(2.0 * (1.0 - np.exp(-delta ** 2 / 8.0)))
    assert abs(h - exact) < 1e-9


@pytest.mark.parametrize("delta", [0.1, 0.5, 1.0])
def test_chi_square_gaussian_closed_form(delta, gctx):
    chi2 = chi_square(_atom(delta), gctx)
    exact = np.exp(delta ** 2) - 1.0
    assert abs(chi2 - exact) < 1e-6 * max(exact, 1.0)


def test_hellinger_to_ref_agrees_with_plain_hellinger(gctx):
    m = Mixture(np.array([0.3, 0.7]), np.array([[-0.4], [0.6]]))
    assert abs(hellinger_to_ref(m, gctx)
               - hellinger(m, gctx.ref, gctx)) < 1e-9


def test_metric_axioms_and_inequalities(gctx):
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = rng.dirichlet(np.ones(2))
        f = Mixture(w, rng.uniform(-1, 1, (2, 1)))
        g = Mixture(rng.dirichlet(np.ones(2)), rng.uniform(-1, 1, (2, 1)))
        h = hellinger(f, g, gctx)
        tv = total_variation(f, g, gctx)
        assert h >= 0 and tv >= 0
        assert abs(hellinger(f, f, gctx)) < 1e-12
        # h^2 <= ||f - g||_1 <= 2h for this Hellinger normalization
        assert h ** 2 <= tv + 1e-9
        assert tv <= 2.0 * h + 1e-9
        # symmetry
        assert abs(h - hellinger(g, f, gctx)) < 1e-12


def test_normalized_deviation_has_unit_norm(gctx):
    m = _atom(0.7)
    d = normalized_deviation(m, gctx)
    assert abs(gctx.measure.lp(d.values, 2.0) - 1.0) < 1e-9


def test_normalized_deviation_rejects_reference(gctx):
    with pytest.raises(DegenerateInputError):
        normalized_deviation(_atom(0.0), gctx)


def test_envelope_S_requirements(gctx, fig1_envs, fig1_ctx):
    with pytest.raises(PreconditionError):
        envelope_S(fig1_envs, fig1_ctx, 0.0)
    senv = envelope_S(fig1_envs, fig1_ctx, 0.05)
    assert np.all(senv.D.values == 2.0 * senv.S.values)
    assert senv.s4 > 0


def test_envelope_S_needs_three_envelopes(fig1_ctx):
    from mixgeo.envelopes import EnvelopeSet, compute_envelopes
    partial = compute_envelopes(fig1_ctx, max_order=1)
    with pytest.raises(DependencyError):
        envelope_S(partial, fig1_ctx, 0.05)


def test_chi2_gap_bound_on_random_mixtures(fig1_ctx, fig1_senv):
    from mixgeo.geometry import perturbed_mixture
    from mixgeo.metrics import chi2_normalization_gap
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 50:
        t = 10.0 ** rng.uniform(-2.5, -0.7)
        m = perturbed_mixture(fig1_ctx, rng, t)
        h = hellinger_to_ref(m, fig1_ctx)
        if h < 1e-8 or h > 0.3:
            continue
        gap, bound = chi2_normalization_gap(m, fig1_ctx, fig1_senv)
        assert np.all(gap.values <= bound.values + 1e-12)
        checked += 1
