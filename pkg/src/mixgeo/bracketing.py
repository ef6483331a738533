"""Brackets on finite-dimensional lattices and the shell-slicing bound.

A bracket is an order interval [l, u] in a componentwise-ordered vector
lattice; a bracket set at scale eps witnesses a bracketing number.
``slice_local_brackets`` turns a global bracket generator for the
normalized class D0 = {(t - t0)/||t - t0||} into local brackets for the
original class restricted to a ball around t0, by covering geometric
shells: the key step behind the local entropy bounds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (CapExceeded, CertificateError, ConfigError, ScaleError,
                     ShapeError)

MATERIALIZE_CAP = 10 ** 7
NORM_TAGS = ("l1", "l2", "sup", "weighted-l2")


@dataclass(frozen=True)
class LatticeVector:
    """Finite real vector with a norm tag; order is componentwise.

    ``weights`` is only used by the weighted-l2 tag, where the norm is
    the quadrature norm ``(sum_k w_k f*(x_k) v_k^2)^(1/2)`` and the
    weights array holds the products ``w_k f*(x_k)``.
    """

    coordinates: np.ndarray
    norm_tag: str = "sup"
    weights: np.ndarray | None = None

    def __post_init__(self):
        coords = np.atleast_1d(np.asarray(self.coordinates, dtype=float))
        if not np.all(np.isfinite(coords)):
            raise ConfigError("lattice vector has non-finite coordinates")
        if self.norm_tag not in NORM_TAGS:
            raise ConfigError(f"unknown norm tag {self.norm_tag!r}")
        if self.norm_tag == "weighted-l2":
            if self.weights is None:
                raise ConfigError("weighted-l2 needs a weight vector")
            w = np.asarray(self.weights, dtype=float)
            if w.shape != coords.shape:
                raise ShapeError("weight/coordinate mismatch")
            object.__setattr__(self, "weights", w)
        object.__setattr__(self, "coordinates", coords)

    @property
    def dim(self) -> int:
        return self.coordinates.shape[0]

    def norm(self) -> float:
        v = self.coordinates
        if self.norm_tag == "l1":
            return float(np.sum(np.abs(v)))
        if self.norm_tag == "l2":
            return float(np.linalg.norm(v))
        if self.norm_tag == "sup":
            return float(np.max(np.abs(v)))
        return float(np.sqrt(np.dot(self.weights, v * v)))

    def with_coords(self, coords: np.ndarray) -> "LatticeVector":
        return LatticeVector(coords, self.norm_tag, self.weights)

    def leq(self, other: "LatticeVector", tol: float = 1e-9) -> bool:
        return bool(np.all(self.coordinates <= other.coordinates + tol))


@dataclass(frozen=True)
class Bracket:
    """Order interval [lower, upper] with lower <= upper componentwise."""

    lower: LatticeVector
    upper: LatticeVector

    def __post_init__(self):
        if self.lower.norm_tag != self.upper.norm_tag:
            raise ConfigError("bracket endpoints use different norms")
        if not self.lower.leq(self.upper):
            raise ConfigError("bracket lower endpoint exceeds upper")

    @property
    def size(self) -> float:
        return self.lower.with_coords(
            self.upper.coordinates - self.lower.coordinates).norm()

    def contains(self, point: np.ndarray, tol: float = 1e-9) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(self.lower.coordinates - tol <= p)
                    and np.all(p <= self.upper.coordinates + tol))


@dataclass
class BracketSet:
    """A witness for a bracketing number at a given scale.

    ``count`` may exceed ``len(brackets)`` for implicit constructions
    whose full materialization is astronomically large; such sets carry
    a ``locate`` callable producing the bracket of a given point on
    demand.
    """

    brackets: list
    scale: float
    provenance: str
    count: float | None = None
    locate: object = None  # callable point -> Bracket, or None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.count is None:
            self.count = float(len(self.brackets))
        for b in self.brackets:
            if b.size > self.scale * (1.0 + 1e-9) + 1e-12:
                raise CertificateError(
                    f"bracket of size {b.size:g} exceeds scale "
                    f"{self.scale:g} ({self.provenance})")

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            header = {"scale": self.scale, "provenance": self.provenance,
                      "count": self.count}
            fh.write(json.dumps(header) + "\n")
            for b in self.brackets:
                fh.write(json.dumps({
                    "lower": b.lower.coordinates.tolist(),
                    "upper": b.upper.coordinates.tolist(),
                    "size": b.size}) + "\n")


def load_jsonl(path, norm_tag: str = "sup",
               weights: np.ndarray | None = None) -> BracketSet:
    with open(path) as fh:
        header = json.loads(fh.readline())
        brackets = []
        for line in fh:
            rec = json.loads(line)
            brackets.append(Bracket(
                LatticeVector(np.array(rec["lower"]), norm_tag, weights),
                LatticeVector(np.array(rec["upper"]), norm_tag, weights)))
    return BracketSet(brackets, header["scale"], header["provenance"],
                      count=header.get("count"))


def verify_bracket_cover(bset: BracketSet, points) -> dict:
    """Check each point against the bracket list; report hits and misses.

    When the set carries a ``locate`` callable, it is used for points
    the materialized list misses.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        return {"n_points": 0, "n_covered": 0, "coverage": 1.0,
                "assignments": [], "violations": []}
    assignments = []
    violations = []
    if bset.brackets:
        lowers = np.stack([b.lower.coordinates for b in bset.brackets])
        uppers = np.stack([b.upper.coordinates for b in bset.brackets])
    else:
        lowers = uppers = None
    tol = 1e-9
    chunk = max(1, int(2e7 // max(len(bset.brackets), 1)))
    for start in range(0, pts.shape[0], chunk):
        block = pts[start:start + chunk]
        if lowers is not None:
            ok = np.all((lowers[None] - tol <= block[:, None])
                        & (block[:, None] <= uppers[None] + tol), axis=2)
            hits = np.where(ok.any(axis=1), ok.argmax(axis=1), -1)
        else:
            hits = np.full(block.shape[0], -1)
        for off, hit in enumerate(hits):
            k = start + off
            hit = int(hit)
            if hit < 0 and bset.locate is not None:
                b = bset.locate(block[off])
                if b is not None and b.contains(block[off]):
                    hit = -2  # located on demand
            if hit == -1:
                violations.append(k)
                assignments.append(None)
            else:
                assignments.append(hit)
    return {"n_points": len(assignments),
            "n_covered": len(assignments) - len(violations),
            "coverage": 1.0 if not assignments
            else 1.0 - len(violations) / len(assignments),
            "assignments": assignments,
            "violations": violations}


def slice_local_brackets(global_gen, d_env: LatticeVector,
                         t0: LatticeVector, delta: float,
                         rho: float) -> BracketSet:
    """Local brackets for T intersected with B(t0, delta) at scale rho.

    ``global_gen`` maps a scale eps to a BracketSet for the normalized
    class D0; ``d_env`` dominates |d| pointwise for every d in D0 (the
    caller certifies this).  Shell n collects the global brackets at
    scale ``eps_n = r^(n-H-1) ||d_env|| / 4`` rescaled into the shell,
    and the innermost ball is covered by the single envelope bracket.
    """
    d_norm = d_env.norm()
    if not (rho / delta < min(4.0, 2.0 * d_norm)):
        raise ScaleError(
            f"need rho/delta < min(4, 2||d||): rho/delta = {rho / delta:g}, "
            f"||d|| = {d_norm:g}")
    r = 4.0 / (4.0 - rho / delta)
    H = math.log(2.0 * d_norm * delta / rho) / math.log(r)
    n_shells = max(int(math.ceil(H)), 0)

    brackets = []
    inner_scale = r ** (-n_shells) * delta
    env = d_env.coordinates
    brackets.append(Bracket(
        t0.with_coords(t0.coordinates - inner_scale * env),
        t0.with_coords(t0.coordinates + inner_scale * env)))

    for n in range(1, n_shells + 1):
        eps_n = r ** (n - H - 1) * d_norm / 4.0
        gen = global_gen(eps_n)
        for b in gen.brackets:
            if b.size > eps_n * (1.0 + 1e-9):
                raise CertificateError(
                    f"global generator returned size {b.size:g} > {eps_n:g}")
            lo, up = b.lower.coordinates, b.upper.coordinates
            lo_s = np.minimum(r ** (-n) * lo, r ** (-n + 1) * lo)
            up_s = np.maximum(r ** (-n) * up, r ** (-n + 1) * up)
            brackets.append(Bracket(
                t0.with_coords(lo_s * delta + t0.coordinates),
                t0.with_coords(up_s * delta + t0.coordinates)))

    out = BracketSet(brackets, rho, f"slice[delta={delta:g},rho={rho:g}]",
                     meta={"r": r, "H": H, "n_shells": n_shells})
    worst = max((b.size for b in brackets), default=0.0)
    if worst > rho * (1.0 + 1e-9):
        raise CertificateError(
            f"slicing produced bracket of size {worst:g} > rho = {rho:g}")
    return out


def greedy_cover(points: np.ndarray, eps: float, metric="euclidean"):
    """Greedy farthest-point eps-net over a finite sample.

    ``metric`` is "euclidean", "sup", or a callable
    ``(center, points) -> distances``.  The first center is the first
    point and ties are broken by lowest index, so the output is
    deterministic given the input order.  Returns center indices.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        return []
    if metric == "euclidean":
        dist = lambda c, p: np.linalg.norm(p - c, axis=1)
    elif metric == "sup":
        dist = lambda c, p: np.max(np.abs(p - c), axis=1)
    elif callable(metric):
        dist = metric
    else:
        raise ConfigError(f"unknown metric {metric!r}")
    centers = [0]
    mind = dist(pts[0], pts)
    while True:
        far = int(np.argmax(mind))  # argmax takes the lowest tied index
        if mind[far] <= eps:
            return centers
        centers.append(far)
        mind = np.minimum(mind, dist(pts[far], pts))
        if len(centers) > pts.shape[0]:
            raise CapExceeded("greedy cover failed to terminate")


# ---------------------------------------------------------------------------
# Synthetic scenarios used by the slicing demonstrations and tests

def ball_D0_generator(dim: int, c0_margin: float = 1.0):
    """Sup-norm box brackets for the unit Euclidean sphere in R^dim.

    The normalized class of the Euclidean ball around its center is the
    unit sphere; axis-aligned boxes of side eps that meet the spherical
    shell cover it with O((c/eps)^(dim-1)) boxes.
    """

    def gen(eps: float) -> BracketSet:
        side = eps  # sup-size of each box equals the grid spacing
        n_cells = int(math.ceil(2.0 / side))
        if n_cells ** dim > MATERIALIZE_CAP:
            raise CapExceeded(
                f"ball generator would build {n_cells ** dim} cells")
        edges = -1.0 + side * np.arange(n_cells + 1)
        centers_1d = 0.5 * (edges[:-1] + edges[1:])
        mesh = np.meshgrid(*([centers_1d] * dim), indexing="ij")
        cc = np.column_stack([m.ravel() for m in mesh])
        # a box meets the unit sphere iff min/max distance straddle 1
        half = side / 2.0
        lo_d = np.linalg.norm(np.maximum(np.abs(cc) - half, 0.0), axis=1)
        hi_d = np.linalg.norm(np.abs(cc) + half, axis=1)
        keep = (lo_d <= 1.0 + 1e-12) & (hi_d >= 1.0 - 1e-12)
        brackets = [
            Bracket(LatticeVector(c - half, "sup"),
                    LatticeVector(c + half, "sup"))
            for c in cc[keep]]
        return BracketSet(brackets, eps, f"ball-sphere[dim={dim},eps={eps:g}]")

    return gen


def calibrate_c0(gen, scales, q: int) -> float:
    """Smallest C0 with count(eps) <= (C0/eps)^q on the given scales."""
    c0 = 0.0
    for eps in scales:
        count = gen(eps).count
        c0 = max(c0, eps * count ** (1.0 / q))
    return c0


def hilbert_truncation_brackets(r: int, k: int, K: int = 20) -> BracketSet:
    """Brackets for {2^-j e_j : j <= K} + {0} near 0, truncated sup-norm.

    The ball of radius 2^-r around 0 contains the atoms with j >= r and
    the origin; singleton brackets for j = r..k-1 plus one tail bracket
    [0, sum_{j>=k} 2^-j e_j] of sup-size 2^-k give k-r+1 brackets at
    scale 2^-k.
    """
    if not (0 <= r <= k <= K):
        raise ConfigError("need 0 <= r <= k <= K")
    brackets = []
    for j in range(r, k):
        v = np.zeros(K)
        v[j] = 2.0 ** (-j)
        lv = LatticeVector(v, "sup")
        brackets.append(Bracket(lv, lv))
    tail = np.zeros(K)
    for j in range(k, K + 1):
        if j < K:
            tail[j] = 2.0 ** (-j)
    brackets.append(Bracket(LatticeVector(np.zeros(K), "sup"),
                            LatticeVector(tail, "sup")))
    return BracketSet(brackets, 2.0 ** (-k),
                      f"hilbert-truncation[r={r},k={k},K={K}]")


def hilbert_truncation_points(r: int, K: int = 20) -> np.ndarray:
    """All members of the truncated lattice class inside B(0, 2^-r)."""
    pts = [np.zeros(K)]
    for j in range(r, K):
        v = np.zeros(K)
        v[j] = 2.0 ** (-j)
        pts.append(v)
    return np.array(pts)
