"""Location families, parameter domains, and finite mixtures.

A location family generates ``f_theta(x) = f0(x - theta)`` from a base
density ``f0``, together with the derivatives with respect to the
location parameter up to third order.  Derivatives in theta are
evaluated directly in the displacement ``z = x - theta``, which is where
the closed forms for Gaussian-type bases are cheapest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (CapabilityError, ConfigError, DomainViolation,
                     NumericError)
from .quadrature import GridFunction, QuadratureGrid

ATOL_SIMPLEX = 1e-12
RTOL_FD = 1e-4


@dataclass(frozen=True)
class LocationFamily:
    """Base density with location-derivative evaluators.

    ``deriv(order, z)`` returns the order-``order`` derivative of
    ``theta -> f0(x - theta)`` evaluated at displacement ``z = x -
    theta``, with shape ``(n,)``, ``(n, d)``, ``(n, d, d)`` or
    ``(n, d, d, d)``.  ``total_mass`` is the Lebesgue integral of
    ``f0`` (1 for proper densities; the Figure-1 family is used
    unnormalized, as in the source setup).
    """

    dim: int
    deriv: Callable[[int, np.ndarray], np.ndarray]
    smoothness_order: int
    name: str
    total_mass: float = 1.0

    def f0(self, z: np.ndarray) -> np.ndarray:
        return self.deriv(0, z)

    def density(self, theta: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Evaluate ``f_theta`` at the given points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        theta = np.asarray(theta, dtype=float).reshape(self.dim)
        return self.deriv(0, pts - theta)

    def derivative(self, order: int, theta: np.ndarray,
                   pts: np.ndarray) -> np.ndarray:
        """Order-``order`` theta-derivative of ``f_theta`` at the points."""
        if order > self.smoothness_order:
            raise CapabilityError(
                f"derivative order {order} exceeds smoothness "
                f"{self.smoothness_order} of family '{self.name}'")
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        theta = np.asarray(theta, dtype=float).reshape(self.dim)
        return self.deriv(order, pts - theta)


def _gaussian_type_deriv(a: float, const: float, dim: int):
    """Derivative evaluators for ``f0(z) = const * exp(-a ||z||^2)``."""
    eye = np.eye(dim)

    def deriv(order: int, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        f = const * np.exp(-a * np.einsum("ni,ni->n", z, z))
        if order == 0:
            return f
        if order == 1:
            return 2.0 * a * z * f[:, None]
        if order == 2:
            zz = np.einsum("ni,nj->nij", z, z)
            return (4.0 * a * a * zz - 2.0 * a * eye) * f[:, None, None]
        if order == 3:
            zzz = np.einsum("ni,nj,nk->nijk", z, z, z)
            dz = (np.einsum("ij,nk->nijk", eye, z)
                  + np.einsum("ik,nj->nijk", eye, z)
                  + np.einsum("jk,ni->nijk", eye, z))
            return (8.0 * a ** 3 * zzz - 4.0 * a * a * dz) * f[:, None, None, None]
        raise CapabilityError(f"derivative order {order} not available")

    return deriv


def gaussian_family(dim: int = 1) -> LocationFamily:
    """Standard Gaussian base density in the given dimension."""
    const = (2.0 * np.pi) ** (-dim / 2.0)
    return LocationFamily(dim=dim,
                          deriv=_gaussian_type_deriv(0.5, const, dim),
                          smoothness_order=3, name="gaussian")


def fig1_family() -> LocationFamily:
    """The unnormalized bump ``f_theta(x) = exp(-2 (x - theta)^2)``."""
    return LocationFamily(dim=1, deriv=_gaussian_type_deriv(2.0, 1.0, 1),
                          smoothness_order=3, name="fig1",
                          total_mass=float(np.sqrt(np.pi / 2.0)))


def tabulated_family(xs: np.ndarray, fs: np.ndarray) -> LocationFamily:
    """Base density given by a table, linearly interpolated (d=1 only).

    Location derivatives are taken by finite differences of the table,
    so the family only certifies smoothness order 2.
    """
    xs = np.asarray(xs, dtype=float)
    fs = np.asarray(fs, dtype=float)
    if xs.ndim != 1 or xs.shape != fs.shape or xs.size < 4:
        raise ConfigError("table needs matching 1-d x/f columns, >= 4 rows")
    if np.any(fs < 0):
        raise ConfigError("tabulated density must be nonnegative")
    step = float(np.min(np.diff(xs)))
    if step <= 0:
        raise ConfigError("table x values must be strictly increasing")
    h = 0.5 * step

    def interp(z):
        return np.interp(z, xs, fs, left=0.0, right=0.0)

    def deriv(order, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))[:, 0]
        if order == 0:
            return interp(z)
        if order == 1:
            # d/dtheta f0(x - theta) = -f0'(z)
            return (-(interp(z + h) - interp(z - h)) / (2 * h))[:, None]
        if order == 2:
            val = (interp(z + h) - 2 * interp(z) + interp(z - h)) / (h * h)
            return val[:, None, None]
        raise CapabilityError("tabulated family has smoothness order 2")

    mass = float(np.trapezoid(fs, xs))
    return LocationFamily(dim=1, deriv=deriv, smoothness_order=2,
                          name="table", total_mass=mass)


@dataclass(frozen=True)
class ParameterDomain:
    """Closed Euclidean ball of radius T containing all atoms."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if self.radius < 0:
            raise ConfigError("domain radius must be nonnegative")
        object.__setattr__(self, "center", center)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, theta: np.ndarray, tol: float = 1e-12) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.linalg.norm(theta - self.center) <= self.radius + tol)

    def clip(self, theta: np.ndarray) -> np.ndarray:
        """Project a point onto the ball."""
        theta = np.asarray(theta, dtype=float)
        off = theta - self.center
        r = np.linalg.norm(off)
        if r <= self.radius or r == 0.0:
            return theta
        return self.center + off * (self.radius / r)


@dataclass(frozen=True)
class Mixture:
    """Simplex weights and atom locations.

    Degenerate mixtures (zero weights, coincident atoms) are valid
    inputs everywhere; nondegeneracy is only required of the fixed
    reference mixture.
    """

    weights: np.ndarray
    atoms: np.ndarray

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        if atoms.shape[0] != weights.shape[0]:
            raise ConfigError("weight/atom count mismatch")
        if np.any(weights < -ATOL_SIMPLEX):
            raise ConfigError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ConfigError("weights must sum to 1")
        object.__setattr__(self, "weights", np.clip(weights, 0.0, None))
        object.__setattr__(self, "atoms", atoms)

    @property
    def q(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def is_nondegenerate(self) -> bool:
        if np.any(self.weights <= 0):
            return False
        for i in range(self.q):
            for j in range(i + 1, self.q):
                if np.allclose(self.atoms[i], self.atoms[j]):
                    return False
        return True


def mixture_density(m: Mixture, family: LocationFamily,
                    pts: np.ndarray) -> np.ndarray:
    """Raw array version of :func:`eval_mixture`."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.zeros(pts.shape[0])
    for w, theta in zip(m.weights, m.atoms):
        if w > 0.0:
            out += w * family.density(theta, pts)
    return out


def eval_mixture(m: Mixture, family: LocationFamily, grid: QuadratureGrid,
                 domain: ParameterDomain | None = None) -> GridFunction:
    """Evaluate ``sum_i pi_i f0(x - theta_i)`` on the grid nodes."""
    if domain is not None:
        for theta in m.atoms:
            if not domain.contains(theta):
                raise DomainViolation(f"atom {theta} outside parameter domain")
    values = mixture_density(m, family, grid.nodes)
    if not np.all(np.isfinite(values)):
        raise NumericError("mixture density is not finite on the grid")
    return GridFunction(values, grid)


def eval_derivative_ratio(family: LocationFamily, theta: np.ndarray,
                          order: int, grid: QuadratureGrid,
                          fstar: np.ndarray) -> np.ndarray:
    """Componentwise ``D_k f_theta / f*`` on the grid.

    Returns shape ``(n,)`` for order 0, ``(n, d)`` for order 1, etc.
    """
    d = family.derivative(order, theta, grid.nodes)
    extra = (slice(None),) + (None,) * (d.ndim - 1)
    return d / fstar[extra]


def check_derivatives(family: LocationFamily, probes: np.ndarray,
                      thetas: np.ndarray, rtol: float = RTOL_FD,
                      step: float = 1e-5) -> float:
    """Max relative error of analytic derivatives vs central differences.

    Probes the first derivative in every coordinate, and the diagonal of
    the second derivative; used as a construction-time sanity check.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    worst = 0.0
    for theta in thetas:
        base = family.density(theta, probes)
        d1 = family.derivative(1, theta, probes)
        for i in range(family.dim):
            e = np.zeros(family.dim)
            e[i] = step
            fp = family.density(theta + e, probes)
            fm = family.density(theta - e, probes)
            fd = (fp - fm) / (2 * step)
            scale = np.maximum(np.abs(d1[:, i]), np.maximum(np.abs(base), 1e-12))
            worst = max(worst, float(np.max(np.abs(fd - d1[:, i]) / scale)))
            if family.smoothness_order >= 2:
                d2 = family.derivative(2, theta, probes)
                fd2 = (fp - 2 * base + fm) / (step * step)
                scale = np.maximum(np.abs(d2[:, i, i]),
                                   np.maximum(np.abs(base), 1e-12))
                worst = max(worst,
                            float(np.max(np.abs(fd2 - d2[:, i, i]) / scale)))
    if worst > rtol:
        raise NumericError(
            f"analytic derivatives deviate from finite differences: {worst:g}")
    return worst
