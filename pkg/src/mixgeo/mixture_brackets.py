"""Global and local brackets for the normalized mixture deviation class.

The construction follows the two-step proof scheme: near the reference,
normalized deviations are approximated by weighted score-type functions
indexed by low-rank coefficient families, and a finite grid over the
coefficient polytope yields brackets; far from the reference, a plain
(pi, theta)-parameter grid with a Lipschitz envelope does.  The counts
are astronomically large by design (the content of the theorems is that
their logarithm is polynomial), so bracket sets here are implicit: they
carry exact log-counts and a ``locate`` callable instead of a
materialized list.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .bracketing import Bracket, BracketSet, LatticeVector
from .envelopes import EnvelopeSet
from .errors import (CertificateError, ConfigError, PreconditionError,
                     ScaleError)
from .families import Mixture
from .geometry import LocalGeometry
from .metrics import SEnvelope
from .quadrature import GridFunction

Q_CAP = 4
DELTA_CAP = 1.0


def compositions(total: int, parts: int):
    """All nonnegative integer compositions of ``total`` into ``parts``."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in compositions(total - head, parts - 1):
            yield (head,) + rest


@dataclass(frozen=True)
class ScoreFamilyIndex:
    """One cell of the near-reference score-family decomposition.

    ``m`` prescribes the rank budget of the second-order coefficient in
    each neighborhood; the radii bound the coefficient blocks of the
    constraint polytope.
    """

    m: tuple
    alpha: float
    radius_eta: float
    radius_beta: float
    radius_rho_sq: float
    radius_gamma: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if min(self.radius_eta, self.radius_beta, self.radius_rho_sq,
               self.radius_gamma) <= 0:
            raise ConfigError("constraint radii must be positive")

    @property
    def rank_total(self) -> int:
        return sum(self.m)


def score_family_indices(q: int, lg: LocalGeometry, alpha: float,
                         cstar_hat: float) -> list:
    """The index set over rank compositions with the proof's radii."""
    qs, d = lg.nbhd.q_star, lg.ctx.dim
    T = lg.ctx.domain.radius
    p = min(q, d * qs)
    ca = math.sqrt(cstar_hat * alpha)
    return [ScoreFamilyIndex(
        m=m, alpha=alpha,
        radius_eta=1.0 / cstar_hat + 1.0 / ca,
        radius_beta=1.0 / cstar_hat + 2.0 * T / ca,
        radius_rho_sq=1.0 / cstar_hat,
        radius_gamma=1.0 / min(ca, cstar_hat))
        for m in compositions(p, qs)]


@dataclass
class ScoreApproximation:
    """Low-rank score representation of a chi-square-normalized deviation."""

    eta: np.ndarray        # (q*,)
    beta: np.ndarray       # (q*, d)
    rho: np.ndarray        # (q*, d, d)
    gamma: np.ndarray      # (n_out,)
    theta_out: np.ndarray  # (n_out, d)
    values: GridFunction   # the approximating function ell on the grid
    error_bound: GridFunction
    rank_total: int


def score_approximation(f: Mixture, alpha: float, lg: LocalGeometry,
                        envs: EnvelopeSet, senv: SEnvelope,
                        cstar_hat: float) -> ScoreApproximation:
    """The lemma's L/||L||_2 representation of (f/f* - 1)/sqrt(chi2).

    Atoms within the squared-distance threshold 2 sqrt(alpha/c*) of
    their neighborhood center contribute to the polynomial coefficients;
    the remaining atoms stay as raw density terms with gamma weights.
    """
    from .metrics import hellinger_to_ref

    ctx, nbhd = lg.ctx, lg.nbhd
    h = hellinger_to_ref(f, ctx)
    if h > alpha:
        raise PreconditionError(
            f"score approximation needs h <= alpha: h = {h:g}, "
            f"alpha = {alpha:g}")
    fv = np.zeros(ctx.grid.n)
    for w, theta in zip(f.weights, f.atoms):
        if w > 0:
            fv += w * ctx.family.density(theta, ctx.grid.nodes)
    ratio = fv / ctx.fstar - 1.0
    l2 = ctx.measure.lp(ratio, 2.0)
    if l2 <= 1e-14:
        raise PreconditionError("f = f* has no normalized deviation")

    qs, d = nbhd.q_star, ctx.dim
    threshold_sq = 2.0 * math.sqrt(alpha / cstar_hat)
    regions = nbhd.regions_of(f.atoms)
    eta = np.zeros(qs)
    beta = np.zeros((qs, d))
    rho = np.zeros((qs, d, d))
    gamma, theta_out = [], []
    for j in range(f.q):
        i = regions[j]
        c = nbhd.centers[i - 1] if i >= 1 else None
        in_J = i >= 1 and float(np.sum((f.atoms[j] - c) ** 2)) <= threshold_sq
        if in_J:
            off = f.atoms[j] - c
            eta[i - 1] += f.weights[j] / l2
            beta[i - 1] += f.weights[j] * off / l2
            rho[i - 1] += f.weights[j] * np.outer(off, off) / (2.0 * l2)
        elif f.weights[j] > 0:
            gamma.append(f.weights[j] / l2)
            theta_out.append(f.atoms[j])
    eta -= lg.ctx.ref.weights / l2

    vals = (eta @ lg.F
            + np.einsum("id,ind->n", beta, lg.G)
            + np.einsum("ide,inde->n", rho, lg.Hm))
    for g, theta in zip(gamma, theta_out):
        vals = vals + g * ctx.family.density(theta, ctx.grid.nodes) / ctx.fstar

    rank_total = int(sum(np.linalg.matrix_rank(r, tol=1e-12) for r in rho))
    if rank_total > min(f.q, d * qs):
        raise CertificateError("rank budget violated by construction")

    h3 = envs[3].values
    s = senv.values
    h3_l2 = ctx.measure.lp(h3, 2.0)
    scale = d ** 1.5 * math.sqrt(2.0) / (3.0 * cstar_hat ** 1.25)
    bound = scale * (h3_l2 * s + h3) * alpha ** 0.25
    gamma = np.array(gamma) if gamma else np.zeros(0)
    theta_out = np.array(theta_out) if len(theta_out) else np.zeros((0, d))
    return ScoreApproximation(eta, beta, rho, gamma, theta_out,
                              GridFunction(vals, ctx.grid),
                              GridFunction(bound, ctx.grid), rank_total)


def envelope_U(lg: LocalGeometry, envs: EnvelopeSet,
               senv: SEnvelope) -> GridFunction:
    """The near-part slack envelope combining both approximation errors."""
    ctx = lg.ctx
    h3 = envs[3].values
    s = senv.values
    h3_l2 = ctx.measure.lp(h3, 2.0)
    c = senv.cstar_hat
    coef = (1.0 + h3_l2) / c ** 1.25 + 8.0 * senv.s4 ** 2 + 4.0
    vals = coef * ctx.dim ** 1.5 * (s + s * s + h3)
    return GridFunction(vals, ctx.grid)


def envelope_W(lg: LocalGeometry, envs: EnvelopeSet,
               senv: SEnvelope) -> GridFunction:
    """The far-part Lipschitz envelope for the (pi, theta)-grid."""
    ctx = lg.ctx
    base = envs[0].values + envs[1].values * math.sqrt(ctx.dim)
    base_l1 = float(np.dot(ctx.measure.wf, np.abs(base)))
    vals = math.sqrt(base_l1) * 2.0 * senv.values + np.sqrt(base)
    return GridFunction(vals, ctx.grid)


def _log_axis_count(radius: float, spacing: float) -> float:
    """log of the number of grid points covering [-radius, radius]."""
    return math.log(2.0 * math.floor(radius / spacing) + 3.0)


@dataclass
class _D0Plan:
    """Everything locate() needs, precomputed once per scale delta."""

    delta: float
    alpha: float
    u_l2: float
    v_l2: float
    w_l2: float
    eps_prime: float
    eps_far: float
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    spacings: dict = field(default_factory=dict)


def build_D0_brackets_mixture(q: int, delta: float, lg: LocalGeometry,
                              envs: EnvelopeSet, senv: SEnvelope,
                              delta_cap: float = DELTA_CAP) -> BracketSet:
    """Implicit global brackets at scale delta for the deviation class.

    Near part: for each rank composition, an axis-uniform grid over the
    coefficient polytope; every grid point ell' yields the bracket
    [ell' - eps'V - alpha^(1/4)U, ell' + eps'V + alpha^(1/4)U].  Far
    part: a (pi, theta)-grid whose cells yield d_f' +- delta W/(2||W||).
    ``count`` is exact but astronomically large; ``locate`` materializes
    the bracket of one given mixture on demand.
    """
    if q > Q_CAP:
        raise ConfigError(f"q = {q} exceeds desk-scale cap {Q_CAP}")
    if delta > delta_cap:
        raise ScaleError(f"delta = {delta:g} exceeds cap {delta_cap:g}")
    ctx, nbhd = lg.ctx, lg.nbhd
    qs, d, T = nbhd.q_star, ctx.dim, ctx.domain.radius
    c = senv.cstar_hat

    U = envelope_U(lg, envs, senv)
    V = GridFunction((envs[0].values + envs[1].values + envs[2].values)
                     * d * math.sqrt(d * qs), ctx.grid)
    W = envelope_W(lg, envs, senv)
    u_l2 = ctx.measure.lp(U.values, 2.0)
    v_l2 = ctx.measure.lp(V.values, 2.0)
    w_l2 = ctx.measure.lp(W.values, 2.0)
    alpha = (delta / (4.0 * u_l2)) ** 4
    eps_prime = delta / (4.0 * v_l2)
    eps_far = (alpha * delta / (2.0 * w_l2)) ** 2

    p = min(q, d * qs)
    ca = math.sqrt(c * alpha)
    radius = (6.0 + 3.0 * T) / min(ca, c)
    # Per-axis spacings sized so a full-block move costs at most eps' in
    # the composite coefficient norm (five blocks, each budgeted eps'/5).
    sp = {"eta": 2.0 * eps_prime / (5.0 * qs),
          "beta": 2.0 * eps_prime / (5.0 * qs * math.sqrt(d)),
          "gamma": 2.0 * eps_prime / (5.0 * max(q, 1)),
          "theta": 2.0 * eps_prime * min(ca, c) / (5.0 * math.sqrt(d)),
          "rho": eps_prime * math.sqrt(c) / (5.0 * math.sqrt(max(p, 1) * d))}

    n_m = sum(1 for _ in compositions(p, qs))
    log_near = (math.log(n_m)
                + qs * _log_axis_count(radius, sp["eta"])
                + qs * d * _log_axis_count(radius, sp["beta"])
                + q * _log_axis_count(radius, sp["gamma"])
                + q * d * _log_axis_count(T, sp["theta"])
                + p * d * _log_axis_count(radius, sp["rho"]))
    # far grid: q-1 free simplex coordinates plus q*d atom coordinates
    s_pi = eps_far / (2.0 * max(q, 1))
    s_th = eps_far / (2.0 * math.sqrt(d))
    log_far = ((q - 1) * _log_axis_count(0.5, s_pi)
               + q * d * _log_axis_count(T, s_th))
    log_count = np.logaddexp(log_near, log_far)

    plan = _D0Plan(delta, alpha, u_l2, v_l2, w_l2, eps_prime, eps_far,
                   U.values, V.values, W.values,
                   {"near": sp, "pi": s_pi, "theta_far": s_th})

    wf = ctx.measure.wf

    def locate(f) -> Bracket:
        return _locate_d0(f, lg, envs, senv, plan, wf)

    try:
        count = math.exp(log_count)
    except OverflowError:
        count = math.inf
    return BracketSet([], delta,
                      f"D0-mixture[q={q},delta={delta:g}]",
                      count=count, locate=locate,
                      meta={"log_count": float(log_count),
                            "log_count_near": float(log_near),
                            "log_count_far": float(log_far),
                            "alpha": alpha, "eps_prime": eps_prime,
                            "eps_far": eps_far, "u_l2": u_l2,
                            "v_l2": v_l2, "w_l2": w_l2})


def _snap(x: np.ndarray, spacing: float) -> np.ndarray:
    return np.round(x / spacing) * spacing


def _locate_d0(f, lg: LocalGeometry, envs, senv, plan: _D0Plan,
               wf: np.ndarray) -> Bracket:
    """Materialize the bracket that the implicit construction assigns to f."""
    from .metrics import hellinger_to_ref

    ctx = lg.ctx
    h = hellinger_to_ref(f, ctx)
    if h <= plan.alpha:
        # near part: snap the score coefficients to the polytope grid
        appr = score_approximation(f, plan.alpha, lg, envs, senv,
                                   senv.cstar_hat)
        sp = plan.spacings["near"]
        eta = _snap(appr.eta, sp["eta"])
        beta = _snap(appr.beta, sp["beta"])
        rho = appr.rho  # PSD cone is not an axis grid; snap via factors
        w, vecs = np.linalg.eigh(rho)
        w = _snap(np.clip(w, 0.0, None), sp["rho"] ** 2)
        rho = np.einsum("ilk,ik,imk->ilm", vecs, w, vecs)
        gamma = _snap(appr.gamma, sp["gamma"])
        theta_out = _snap(appr.theta_out, sp["theta"])
        vals = (eta @ lg.F
                + np.einsum("id,ind->n", beta, lg.G)
                + np.einsum("ide,inde->n", rho, lg.Hm))
        for g, theta in zip(gamma, theta_out):
            vals = vals + g * ctx.family.density(theta, ctx.grid.nodes) \
                / ctx.fstar
        half = plan.eps_prime * plan.V + plan.alpha ** 0.25 * plan.U
    else:
        # far part: snap the raw mixture parameters
        wts = np.clip(_snap(f.weights, plan.spacings["pi"]), 0.0, None)
        if wts.sum() <= 0:
            wts = f.weights
        wts = wts / wts.sum()
        atoms = np.stack([ctx.domain.clip(a) for a in
                          _snap(f.atoms, plan.spacings["theta_far"])])
        fp = Mixture(wts, atoms)
        fv = np.zeros(ctx.grid.n)
        for w_, theta in zip(fp.weights, fp.atoms):
            if w_ > 0:
                fv += w_ * ctx.family.density(theta, ctx.grid.nodes)
        root = np.sqrt(fv / ctx.fstar) - 1.0
        hp = ctx.measure.lp(root, 2.0)
        if hp > 1e-9:
            vals = root / hp
        else:
            # snapped mixture collapsed onto the reference; recenter on f
            fv = np.zeros(ctx.grid.n)
            for w_, theta in zip(f.weights, f.atoms):
                if w_ > 0:
                    fv += w_ * ctx.family.density(theta, ctx.grid.nodes)
            vals = (np.sqrt(fv / ctx.fstar) - 1.0) / h
        half = plan.delta * plan.W / (2.0 * plan.w_l2)
    return Bracket(LatticeVector(vals - half, "weighted-l2", wf),
                   LatticeVector(vals + half, "weighted-l2", wf))


def bracket_Hq_local(q: int, eps: float, delta: float, lg: LocalGeometry,
                     envs: EnvelopeSet, senv: SEnvelope) -> BracketSet:
    """Implicit local brackets at scale delta for {sqrt(f/f*): h <= eps}.

    Composes the global deviation-class construction with shell slicing
    around the constant function 1, using the doubled envelope D = 2S.
    The composition stays implicit (counts only, plus locate) because
    the shell generators are themselves implicit.
    """
    if delta > eps:
        raise ScaleError("local scale delta must not exceed the ball "
                         f"radius eps: {delta:g} > {eps:g}")
    ctx = lg.ctx
    wf = ctx.measure.wf
    d_env = senv.D.values
    d_norm = ctx.measure.lp(d_env, 2.0)
    if not (delta / eps < min(4.0, 2.0 * d_norm)):
        raise ScaleError("slicing precondition rho/delta < 4 ^ 2||d|| fails")
    r = 4.0 / (4.0 - delta / eps)
    H = math.log(2.0 * d_norm * eps / delta) / math.log(r)
    n_shells = max(int(math.ceil(H)), 0)

    shell_sets = []
    log_count = 0.0  # the single inner bracket
    for n in range(1, n_shells + 1):
        eps_n = r ** (n - H - 1) * d_norm / 4.0
        bs = build_D0_brackets_mixture(q, min(eps_n, DELTA_CAP), lg, envs,
                                       senv)
        shell_sets.append((n, bs))
        log_count = np.logaddexp(log_count, bs.meta["log_count"])

    inner_scale = r ** (-n_shells) * eps

    def locate(f) -> Bracket:
        from .metrics import hellinger_to_ref
        h = hellinger_to_ref(f, ctx)
        if h > eps * (1.0 + 1e-9):
            raise PreconditionError(f"h = {h:g} outside the ball {eps:g}")
        if h <= inner_scale * 1.0 or not shell_sets:
            lo = 1.0 - inner_scale * d_env
            up = 1.0 + inner_scale * d_env
        else:
            # shell n holds norms in (r^-n eps, r^-(n-1) eps]
            n = min(max(int(math.ceil(math.log(eps / h) / math.log(r))), 1),
                    n_shells)
            b = shell_sets[n - 1][1].locate(f)
            lo_d, up_d = b.lower.coordinates, b.upper.coordinates
            lo = np.minimum(r ** (-n) * lo_d, r ** (-n + 1) * lo_d) * eps + 1.0
            up = np.maximum(r ** (-n) * up_d, r ** (-n + 1) * up_d) * eps + 1.0
        return Bracket(LatticeVector(lo, "weighted-l2", wf),
                       LatticeVector(up, "weighted-l2", wf))

    try:
        count = math.exp(float(log_count))
    except OverflowError:
        count = math.inf
    return BracketSet([], delta,
                      f"Hq-local[q={q},eps={eps:g},delta={delta:g}]",
                      count=count, locate=locate,
                      meta={"log_count": float(log_count), "r": r, "H": H,
                            "n_shells": n_shells,
                            "d_norm": d_norm,
                            "inner_scale": inner_scale})
