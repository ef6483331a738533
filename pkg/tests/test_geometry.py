"""Neighborhoods, deviation coefficients, the pseudodistance, and c*."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixgeo.errors import (ConfigError, DegenerateInputError, DomainViolation,
                           PreconditionError)
from mixgeo.families import Mixture, ParameterDomain, mixture_density
from mixgeo.geometry import (DeviationCoefficients, DiscreteMeasure,
                             LocalGeometry, NeighborhoodSystem,
                             build_neighborhoods, ell, estimate_cstar,
                             mixture_to_coeffs, perturbed_mixture, pseudo_N,
                             ratio_scan, sample_deviation)


def closed_form_N(m, ref, nbhd):
    """Independent implementation of the pseudodistance of a mixture."""
    regions = nbhd.regions_of(m.atoms)
    total = float(m.weights[regions == 0].sum())  # lost mass
    for i in range(nbhd.q_star):
        sel = regions == i + 1
        w = m.weights[sel]
        off = m.atoms[sel] - nbhd.centers[i]
        total += abs(w.sum() - ref.weights[i])
        total += float(np.linalg.norm(w @ off)) if w.size else 0.0
        total += 0.5 * float(w @ np.sum(off ** 2, axis=1)) if w.size else 0.0
    return total


def test_neighborhoods_separate_projections(gauss_ctx, gauss_nbhd):
    nbhd = gauss_nbhd
    assert nbhd.q_star == 2
    # every direction separates the projected balls
    for u in nbhd.directions:
        proj = nbhd.centers @ u
        gaps = np.diff(np.sort(proj))
        assert np.all(gaps > 2 * nbhd.radius)
    assert nbhd.epsilon >= 4 * nbhd.radius - 1e-12


def test_neighborhood_regions(gauss_nbhd):
    nbhd = gauss_nbhd
    assert nbhd.region_of(nbhd.centers[0]) == 1
    assert nbhd.region_of(nbhd.centers[1]) == 2
    far = nbhd.outside_point()
    assert nbhd.region_of(far) == 0
    # boundary is outside the open ball
    edge = nbhd.centers[0] + np.array([nbhd.radius])
    assert nbhd.region_of(edge) == 0


def test_single_atom_reference_gets_capped_radius(fig1_ctx, fig1_nbhd):
    assert fig1_nbhd.q_star == 1
    assert fig1_nbhd.radius == pytest.approx(fig1_ctx.domain.radius / 2)
    assert np.isinf(fig1_nbhd.epsilon)


def test_degenerate_reference_rejected(fig1_ctx):
    bad = Mixture(np.array([0.5, 0.5]), np.array([[0.5], [0.5]]))
    with pytest.raises(DegenerateInputError):
        build_neighborhoods(bad, fig1_ctx.domain)


def test_overlapping_neighborhoods_rejected():
    with pytest.raises(ConfigError):
        NeighborhoodSystem(np.array([[0.0], [1.0]]), 0.6, np.eye(1), 1.0)


def test_coefficient_validation(gauss_nbhd):
    qs, d = gauss_nbhd.q_star, gauss_nbhd.dim
    point = DiscreteMeasure(np.ones(1), gauss_nbhd.centers[:1])
    nus = [DiscreteMeasure(np.ones(1), gauss_nbhd.outside_point()[None, :]),
           point,
           DiscreteMeasure(np.ones(1), gauss_nbhd.centers[1:2])]
    ok = DeviationCoefficients(np.zeros(qs), np.zeros((qs, d)),
                               np.zeros((qs, d, d)), np.zeros(qs + 1), nus)
    ok.validate(gauss_nbhd)
    bad_rho = DeviationCoefficients(np.zeros(qs), np.zeros((qs, d)),
                                    -np.eye(d)[None].repeat(qs, 0),
                                    np.zeros(qs + 1), nus)
    with pytest.raises(ConfigError):
        bad_rho.validate(gauss_nbhd)
    neg_tau = DeviationCoefficients(np.zeros(qs), np.zeros((qs, d)),
                                    np.zeros((qs, d, d)),
                                    np.array([-0.1, 0.0, 0.0]), nus)
    with pytest.raises(ConfigError):
        neg_tau.validate(gauss_nbhd)
    # nu_1 atoms outside A_1 with positive tau_1
    misplaced = [nus[0],
                 DiscreteMeasure(np.ones(1),
                                 gauss_nbhd.outside_point()[None, :]),
                 nus[2]]
    bad_nu = DeviationCoefficients(np.zeros(qs), np.zeros((qs, d)),
                                   np.zeros((qs, d, d)),
                                   np.array([0.0, 0.5, 0.0]), misplaced)
    with pytest.raises(DomainViolation):
        bad_nu.validate(gauss_nbhd)


@pytest.mark.parametrize("seed", range(5))
def test_decomposition_identity(seed, gauss_ctx, gauss_nbhd, gauss_lg):
    # ell(mixture_to_coeffs(f)) must equal (f - f*)/f* pointwise and
    # pseudo_N must equal the closed-form display value
    rng = np.random.default_rng(seed)
    q = rng.integers(1, 8)
    w = rng.dirichlet(np.ones(q))
    atoms = rng.uniform(-1.5, 1.5, size=(q, 1))
    m = Mixture(w, atoms)
    co = mixture_to_coeffs(m, gauss_ctx.ref, gauss_nbhd)
    lv = ell(co, gauss_lg).values
    fv = mixture_density(m, gauss_ctx.family, gauss_ctx.grid.nodes)
    assert np.max(np.abs(lv - (fv / gauss_ctx.fstar - 1.0))) < 1e-10
    assert abs(pseudo_N(co, gauss_nbhd)
               - closed_form_N(m, gauss_ctx.ref, gauss_nbhd)) < 1e-12


def test_pseudo_N_zero_iff_reference(gauss_ctx, gauss_nbhd):
    co = mixture_to_coeffs(gauss_ctx.ref, gauss_ctx.ref, gauss_nbhd)
    assert pseudo_N(co, gauss_nbhd) == 0.0


def test_sample_deviation_is_normalized(fig1_lg, fig1_nbhd):
    for seed in range(10):
        co = sample_deviation(fig1_lg, seed)
        assert abs(pseudo_N(co, fig1_nbhd) - 1.0) < 1e-9
        co.validate(fig1_nbhd)


def test_estimate_cstar_positive_and_bounded(fig1_lg, fig1_cstar):
    # the tau0-only element has ratio <= 1, so the minimum is in (0, 1]
    assert 0.0 < fig1_cstar <= 1.0


def test_estimate_cstar_budget_monotone(fig1_lg):
    for seed in (0, 1):
        a = estimate_cstar(fig1_lg, 150, seed=seed, refine_steps=40,
                           polish_maxiter=500)[0]
        b = estimate_cstar(fig1_lg, 300, seed=seed, refine_steps=40,
                           polish_maxiter=500)[0]
        assert b <= a + 1e-12


def test_estimate_cstar_lower_bounds_mixture_ratios(fig1_lg, fig1_ctx,
                                                    fig1_nbhd, fig1_cstar):
    rng = np.random.default_rng(3)
    for _ in range(50):
        t = 10.0 ** rng.uniform(-2.5, -0.5)
        m = perturbed_mixture(fig1_ctx, rng, t)
        co = mixture_to_coeffs(m, fig1_ctx.ref, fig1_nbhd)
        n = pseudo_N(co, fig1_nbhd)
        if n < 1e-10:
            continue
        l1 = fig1_lg.l1(ell(co, fig1_lg).values)
        assert l1 / n >= fig1_cstar * (1 - 1e-9)


def test_estimate_cstar_rejects_zero_budget(fig1_lg):
    with pytest.raises(PreconditionError):
        estimate_cstar(fig1_lg, 0)


def test_trace_is_running_minimum(fig1_lg):
    _, _, trace = estimate_cstar(fig1_lg, 120, seed=7, refine_steps=30,
                                 polish_maxiter=300)
    assert all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))


def test_ratio_scan_strata_and_exclusions(fig1_lg):
    rows = ratio_scan(fig1_lg, 60, seed=0, h_max=0.3,
                      strata=((0.0, 0.05), (0.05, 0.15), (0.15, 0.31)))
    assert len(rows) >= 30
    for h, n, r in rows:
        assert n >= 1e-10
        assert abs(r - h / n) < 1e-12
        assert 0 < h <= 0.3
    # determinism
    rows2 = ratio_scan(fig1_lg, 60, seed=0, h_max=0.3,
                       strata=((0.0, 0.05), (0.05, 0.15), (0.15, 0.31)))
    assert rows == rows2


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(0.1, 5.0), seed=st.integers(0, 100))
def test_pseudo_N_is_positively_homogeneous(fig1_lg, lam, seed):
    # scaling (eta, beta, rho, tau) by lam scales N by lam
    from mixgeo.geometry import _sample_raw
    rng = np.random.default_rng(seed)
    raw = _sample_raw(fig1_lg, rng)
    n1 = pseudo_N(raw.to_coefficients(), fig1_lg.nbhd)
    raw.scale(lam)
    n2 = pseudo_N(raw.to_coefficients(), fig1_lg.nbhd)
    assert n2 == pytest.approx(lam * n1, rel=1e-9)
