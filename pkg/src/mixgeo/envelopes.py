"""Envelope functions dominating derivative ratios over the parameter ball.

``envelope_H(k, ...)`` approximates ``H_k(x) = sup_theta max_abs
D_k f_theta(x) / f*(x)`` by maximizing over a theta-grid and refining
with per-node coordinate ascent.  The result is a certified *lower*
approximation of the true sup; all library inequalities only use the
domination direction, which is verified on probes by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ConfigError, DependencyError
from .families import LocationFamily, Mixture, ParameterDomain, mixture_density
from .quadrature import GridFunction, QuadratureGrid, RefMeasure

ATOL_ENV = 1e-10


@dataclass
class ReferenceContext:
    """Bundles the fixed reference configuration of an experiment."""

    family: LocationFamily
    domain: ParameterDomain
    ref: Mixture
    grid: QuadratureGrid
    measure: RefMeasure

    @classmethod
    def build(cls, family: LocationFamily, domain: ParameterDomain,
              ref: Mixture, grid: QuadratureGrid) -> "ReferenceContext":
        fstar = mixture_density(ref, family, grid.nodes)
        measure = RefMeasure(grid, fstar, total_mass=family.total_mass)
        return cls(family, domain, ref, grid, measure)

    @property
    def fstar(self) -> np.ndarray:
        return self.measure.fstar

    @property
    def dim(self) -> int:
        return self.family.dim


def _ratio_at(family: LocationFamily, order: int, nodes: np.ndarray,
              thetas: np.ndarray, fstar: np.ndarray) -> np.ndarray:
    """max-abs derivative ratio for per-node theta values, shape (n,)."""
    d = family.deriv(order, nodes - thetas)
    while d.ndim > 1:
        d = np.max(np.abs(d), axis=-1)
    return np.abs(d) / fstar


def _theta_candidates(domain: ParameterDomain, res: int) -> np.ndarray:
    c, T = domain.center, domain.radius
    if T == 0.0:
        return c[None, :]
    if domain.dim == 1:
        return np.linspace(c[0] - T, c[0] + T, res)[:, None]
    axes = [np.linspace(ci - T, ci + T, res) for ci in c]
    xx, yy = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    keep = np.linalg.norm(pts - c, axis=1) <= T + 1e-12
    return pts[keep]


def envelope_H(k: int, domain: ParameterDomain, family: LocationFamily,
               grid: QuadratureGrid, ref: RefMeasure, theta_res: int = 64,
               ascent_rounds: int = 20) -> GridFunction:
    """Pointwise sup over theta of the order-k max-abs derivative ratio."""
    if k > family.smoothness_order:
        raise CapabilityError(
            f"H_{k} needs smoothness order {k}, family has "
            f"{family.smoothness_order}")
    cand = _theta_candidates(domain, theta_res)
    if cand.size == 0:
        raise ConfigError("empty theta grid")
    nodes = grid.nodes
    fstar = ref.fstar
    best_val = np.full(grid.n, -np.inf)
    best_theta = np.zeros((grid.n, family.dim))
    for theta in cand:
        val = _ratio_at(family, k, nodes, theta[None, :], fstar)
        better = val > best_val
        best_val = np.where(better, val, best_val)
        best_theta[better] = theta
    if domain.radius == 0.0 or len(cand) == 1:
        return GridFunction(best_val, grid)

    # Coordinate-ascent refinement; step sizes halve each round, and a
    # greedy inner loop keeps moving while the objective improves.
    step = 2.0 * domain.radius / max(theta_res - 1, 1)
    c, T = domain.center, domain.radius
    for _ in range(ascent_rounds):
        for i in range(family.dim):
            for sign in (1.0, -1.0):
                for _ in range(4):
                    cand_theta = best_theta.copy()
                    cand_theta[:, i] += sign * step
                    off = cand_theta - c
                    r = np.linalg.norm(off, axis=1)
                    scale = np.where(r > T, T / np.maximum(r, 1e-300), 1.0)
                    cand_theta = c + off * scale[:, None]
                    val = _ratio_at(family, k, nodes, cand_theta, fstar)
                    better = val > best_val
                    if not np.any(better):
                        break
                    best_val = np.where(better, val, best_val)
                    best_theta[better] = cand_theta[better]
        step *= 0.5
    return GridFunction(best_val, grid)


@dataclass
class EnvelopeSet:
    """The envelopes H_0..H_3 for one reference configuration."""

    H: list  # GridFunction per order, indexed 0..smoothness_order

    def __getitem__(self, k: int) -> GridFunction:
        if k >= len(self.H):
            raise DependencyError(f"envelope H_{k} was not computed")
        return self.H[k]

    @property
    def max_order(self) -> int:
        return len(self.H) - 1


def compute_envelopes(ctx: ReferenceContext, max_order: int | None = None,
                      theta_res: int = 64,
                      ascent_rounds: int = 20) -> EnvelopeSet:
    if max_order is None:
        max_order = ctx.family.smoothness_order
    H = [envelope_H(k, ctx.domain, ctx.family, ctx.grid, ctx.measure,
                    theta_res=theta_res, ascent_rounds=ascent_rounds)
         for k in range(max_order + 1)]
    return EnvelopeSet(H)
