"""Divergences between mixtures and the normalized deviation machinery.

Hellinger and total variation are plain Lebesgue quadratures; the
chi-square divergence and the normalized deviation ``d_f`` are weighted
by the reference density.  ``envelope_S`` assembles the pointwise
envelope ``S = (H0 + H1 + H2) d / c*`` that dominates normalized
deviations, and ``chi2_normalization_gap`` evaluates both sides of the
chi-square approximation inequality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envelopes import EnvelopeSet, ReferenceContext
from .errors import DegenerateInputError, DependencyError, PreconditionError
from .families import Mixture, mixture_density
from .quadrature import GridFunction

ATOL_H = 1e-9


def hellinger(f: Mixture, g: Mixture, ctx: ReferenceContext) -> float:
    """Hellinger distance ``(int (sqrt f - sqrt g)^2 dmu)^(1/2)``."""
    fv = mixture_density(f, ctx.family, ctx.grid.nodes)
    gv = mixture_density(g, ctx.family, ctx.grid.nodes)
    diff = np.sqrt(fv) - np.sqrt(gv)
    return float(np.sqrt(ctx.grid.integrate(diff * diff)))


def total_variation(f: Mixture, g: Mixture, ctx: ReferenceContext) -> float:
    """Total variation distance ``int |f - g| dmu``."""
    fv = mixture_density(f, ctx.family, ctx.grid.nodes)
    gv = mixture_density(g, ctx.family, ctx.grid.nodes)
    return float(ctx.grid.integrate(np.abs(fv - gv)))


def chi_square(f: Mixture, ctx: ReferenceContext) -> float:
    """Chi-square divergence ``|| f/f* - 1 ||_2^2`` against the reference."""
    fv = mixture_density(f, ctx.family, ctx.grid.nodes)
    return ctx.measure.lp(fv / ctx.fstar - 1.0, 2.0) ** 2


def hellinger_to_ref(f: Mixture, ctx: ReferenceContext) -> float:
    """``h(f, f*)`` computed in the weighted representation."""
    fv = mixture_density(f, ctx.family, ctx.grid.nodes)
    return ctx.measure.lp(np.sqrt(fv / ctx.fstar) - 1.0, 2.0)


def normalized_deviation(f: Mixture, ctx: ReferenceContext) -> GridFunction:
    """``d_f = (sqrt(f/f*) - 1) / || sqrt(f/f*) - 1 ||_2``.

    Raises ``DegenerateInputError`` when ``h(f, f*)`` is below the noise
    floor ``ATOL_H`` (the definition excludes ``f = f*``).
    """
    fv = mixture_density(f, ctx.family, ctx.grid.nodes)
    root = np.sqrt(fv / ctx.fstar) - 1.0
    h = ctx.measure.lp(root, 2.0)
    if h <= ATOL_H:
        raise DegenerateInputError(
            f"h(f, f*) = {h:g} is below atol_h; d_f is undefined")
    return GridFunction(root / h, ctx.grid)


@dataclass
class SEnvelope:
    """Pointwise envelope S with its doubled companion D = 2S."""

    S: GridFunction
    D: GridFunction
    cstar_hat: float
    s4: float  # ||S||_4, cached for the chi-square bound

    @property
    def values(self) -> np.ndarray:
        return self.S.values


def envelope_S(envs: EnvelopeSet, ctx: ReferenceContext,
               cstar_hat: float) -> SEnvelope:
    """``S = (H0 + H1 + H2) d / c*`` and ``D = 2S``."""
    if cstar_hat <= 0:
        raise PreconditionError("cstar_hat must be positive")
    if envs.max_order < 2:
        raise DependencyError("envelope_S needs H0, H1, H2")
    vals = (envs[0].values + envs[1].values + envs[2].values) \
        * ctx.dim / cstar_hat
    S = GridFunction(vals, ctx.grid)
    D = GridFunction(2.0 * vals, ctx.grid)
    return SEnvelope(S, D, cstar_hat, ctx.measure.lp(vals, 4.0))


def chi2_normalization_gap(f: Mixture, ctx: ReferenceContext,
                           senv: SEnvelope):
    """Gap between Hellinger- and chi-square-normalized deviations.

    Returns ``(gap, bound)`` where ``gap = |d_f - (f/f* - 1)/sqrt(chi2)|``
    and ``bound = (4 ||S||_4^2 S + 2 S^2) h(f, f*)``, both as grid
    functions.
    """
    fv = mixture_density(f, ctx.family, ctx.grid.nodes)
    ratio = fv / ctx.fstar - 1.0
    root = np.sqrt(fv / ctx.fstar) - 1.0
    h = ctx.measure.lp(root, 2.0)
    if h <= ATOL_H:
        raise DegenerateInputError("f = f* is excluded")
    chi = ctx.measure.lp(ratio, 2.0)
    gap = np.abs(root / h - ratio / chi)
    s = senv.values
    bound = (4.0 * senv.s4 ** 2 * s + 2.0 * s * s) * h
    return GridFunction(gap, ctx.grid), GridFunction(bound, ctx.grid)
