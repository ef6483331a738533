"""Seeded experiment runners behind the command line interface.

Each runner takes a plain config dict, a seed, and an output directory,
writes CSV point clouds or ladders plus a JSON summary, and returns the
summary.  Every output embeds the config hash, seed, grid resolution,
and the c* estimate in use, so runs are auditable and byte-reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bracketing import (ball_D0_generator, calibrate_c0, greedy_cover,
                         hilbert_truncation_brackets,
                         hilbert_truncation_points, slice_local_brackets,
                         verify_bracket_cover, LatticeVector)
from .envelopes import ReferenceContext, compute_envelopes
from .errors import ConfigError, NumericError
from .families import (Mixture, ParameterDomain, fig1_family, gaussian_family,
                       mixture_density)
from .geometry import (LocalGeometry, build_neighborhoods, estimate_cstar,
                       ratio_scan)
from .metrics import envelope_S
from .mixture_brackets import bracket_Hq_local
from .quadrature import trapezoid_grid


def n_threads() -> int:
    try:
        return max(int(os.environ.get("MIXGEO_THREADS", "1")), 1)
    except ValueError:
        raise ConfigError("MIXGEO_THREADS must be an integer")


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return json.loads(text)
    if path.suffix == ".toml":
        import tomli
        return tomli.loads(text)
    raise ConfigError(f"unsupported config format: {path.suffix}")


def write_csv(path, meta: dict, header: list, rows):
    with open(path, "w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}={v}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.12g}" if isinstance(v, float) else v
                             for v in row])


def write_json(path, obj: dict):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def build_context(config: dict) -> ReferenceContext:
    """Family, domain, reference mixture, and grid from a config dict."""
    name = config.get("family", "gaussian")
    dim = int(config.get("dim", 1))
    if name == "gaussian":
        family = gaussian_family(dim)
        tail = 10.0
    elif name == "fig1":
        family = fig1_family()
        dim = 1
        tail = 6.0
    else:
        raise ConfigError(f"unknown family {name!r}")
    center = np.asarray(config.get("domain_center", [0.0] * dim), dtype=float)
    radius = float(config.get("domain_radius", 1.0))
    domain = ParameterDomain(center, radius)
    ref = Mixture(np.asarray(config.get("ref_weights", [1.0]), dtype=float),
                  np.asarray(config.get("ref_atoms",
                                        [[float(c) for c in center]]),
                             dtype=float))
    halfwidth = float(config.get("grid_halfwidth", radius + tail))
    nodes = int(config.get("grid_nodes", 401 if dim == 1 else 161))
    grid = trapezoid_grid(center, halfwidth, nodes, dim=dim)
    return ReferenceContext.build(family, domain, ref, grid)


def _base_meta(config: dict, seed: int, ctx=None, cstar=None) -> dict:
    meta = {"config_hash": config_hash(config), "seed": seed}
    if ctx is not None:
        meta["grid"] = ctx.grid.description
    if cstar is not None:
        meta["cstar_hat"] = f"{cstar:.6g}"
    return meta


# ---------------------------------------------------------------------------

def run_figure1(config: dict, seed: int, outdir) -> dict:
    """Hellinger vs pseudodistance sublevel clouds over (p, th1, th2)."""
    res = int(config.get("resolution", 64))
    thresh = float(config.get("threshold", 0.05))
    family = fig1_family()
    grid = trapezoid_grid(0.5, 6.5, int(config.get("grid_nodes", 401)))
    c = 0.5
    fstar = family.density(np.array([c]), grid.nodes)
    sqrt_fstar = np.sqrt(fstar)

    axis = np.linspace(0.0, 1.0, res)
    dens = np.stack([family.density(np.array([t]), grid.nodes)
                     for t in axis])  # (res, n)
    p = axis[:, None]  # broadcast over grid nodes

    def pair_h(args):
        i, j = args
        f = p * dens[i] + (1.0 - p) * dens[j]  # (res, n)
        diff = np.sqrt(f) - sqrt_fstar
        return i, j, np.sqrt((diff * diff) @ grid.weights)

    h_cube = np.empty((res, res, res))  # [ip, i1, i2]
    pairs = [(i, j) for i in range(res) for j in range(res)]
    workers = n_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = pool.map(pair_h, pairs, chunksize=64)
    else:
        results = map(pair_h, pairs)
    for i, j, col in results:
        h_cube[:, i, j] = col

    off1 = axis - c
    pn = axis[:, None, None]
    first = pn * off1[None, :, None] + (1.0 - pn) * off1[None, None, :]
    second = pn * off1[None, :, None] ** 2 + (1.0 - pn) * off1[None, None, :] ** 2
    n_cube = np.abs(first) + 0.5 * second

    mask_a = h_cube <= thresh
    mask_b = n_cube <= thresh
    inter = int(np.sum(mask_a & mask_b))
    union = int(np.sum(mask_a | mask_b))
    jaccard = inter / union if union else 1.0

    meta = _base_meta(config, seed)
    meta["resolution"] = res
    meta["grid"] = grid.description
    outdir = Path(outdir)
    for tag, mask in (("a_hellinger", mask_a), ("b_pseudo", mask_b)):
        idx = np.argwhere(mask)
        rows = [(float(axis[i]), float(axis[j]), float(axis[k]))
                for i, j, k in idx]
        write_csv(outdir / f"figure1_{tag}.csv", meta,
                  ["p", "theta1", "theta2"], rows)
    summary = {"jaccard": jaccard, "count_hellinger": int(mask_a.sum()),
               "count_pseudo": int(mask_b.sum()), "threshold": thresh,
               **meta}
    write_json(outdir / "figure1_summary.json", summary)
    return summary


def _geometry_from_config(config: dict, seed: int):
    ctx = build_context(config)
    nbhd = build_neighborhoods(
        ctx.ref, ctx.domain, seed=int(config.get("nbhd_seed", seed)),
        radius_cap=config.get("radius_cap"))
    search_nodes = int(config.get("search_nodes", 241))
    if search_nodes != ctx.grid.n:
        sgrid = trapezoid_grid(ctx.domain.center,
                               float(config.get(
                                   "grid_halfwidth",
                                   ctx.domain.radius
                                   + (6.0 if config.get("family") == "fig1"
                                      else 10.0))),
                               search_nodes, dim=ctx.dim)
        sctx = ReferenceContext.build(ctx.family, ctx.domain, ctx.ref, sgrid)
    else:
        sctx = ctx
    return ctx, sctx, nbhd


def run_cstar(config: dict, seed: int, outdir) -> dict:
    """Empirical search for the comparison constant c*."""
    ctx, sctx, nbhd = _geometry_from_config(config, seed)
    lg = LocalGeometry(sctx, nbhd)
    budget = int(config.get("budget", 2000))
    c_hat, _, trace = estimate_cstar(
        lg, budget, seed=seed,
        refine_steps=int(config.get("refine_steps", 150)),
        polish_maxiter=int(config.get("polish_maxiter", 3000)))
    meta = _base_meta(config, seed, sctx, c_hat)
    stride = max(len(trace) // 500, 1)
    summary = {"c_hat": c_hat, "budget": budget,
               "trace": [float(t) for t in trace[::stride]],
               "trace_stride": stride, **meta}
    write_json(Path(outdir) / "cstar_summary.json", summary)
    return summary


def run_ratio(config: dict, seed: int, outdir) -> dict:
    """Stratified h/N ratio table over sampled mixtures."""
    ctx, sctx, nbhd = _geometry_from_config(config, seed)
    lg = LocalGeometry(sctx, nbhd)
    n_samples = int(config.get("n_samples", 2000))
    h_max = float(config.get("h_max", 0.05))
    if math.isfinite(h_max) and h_max <= 0.2:
        strata = ((0.0, 0.4 * h_max), (0.4 * h_max, 0.8 * h_max),
                  (0.8 * h_max, h_max * (1 + 1e-12)))
    else:
        strata = ((0.0, 0.02), (0.02, 0.2), (0.2, math.inf))
    rows = ratio_scan(lg, n_samples, seed=seed, h_max=h_max, strata=strata)
    meta = _base_meta(config, seed, sctx)
    write_csv(Path(outdir) / "ratio_scan.csv", meta,
              ["h", "pseudo_N", "ratio"], rows)
    ratios = [r for _, _, r in rows]
    summary = {"n_rows": len(rows), "ratio_min": min(ratios),
               "ratio_max": max(ratios), "h_max": h_max, **meta}
    write_json(Path(outdir) / "ratio_summary.json", summary)
    return summary


def _sqrt_embedding(ms, ctx, grid):
    """Vectors whose Euclidean distance is the Hellinger distance."""
    sw = np.sqrt(grid.weights)
    return np.stack([np.sqrt(mixture_density(m, ctx.family, grid.nodes)) * sw
                     for m in ms])


def run_entropy(config: dict, seed: int, outdir) -> dict:
    """Constructed vs empirical local entropy over a scale ladder."""
    from .metrics import hellinger_to_ref

    ctx, sctx, nbhd = _geometry_from_config(config, seed)
    lg = LocalGeometry(sctx, nbhd)
    q = int(config.get("q", 2))
    eps = float(config.get("eps", 0.25))
    ladder = [eps * 2.0 ** (-k) for k in
              range(1, int(config.get("ladder_points", 4)) + 1)]

    envs = compute_envelopes(sctx, max_order=3)
    c_hat = float(config.get(
        "cstar_hat",
        estimate_cstar(lg, int(config.get("budget", 400)), seed=seed,
                       refine_steps=50, polish_maxiter=1000)[0]))
    senv = envelope_S(envs, sctx, c_hat)

    log_counts = []
    for delta in ladder:
        bs = bracket_Hq_local(q, eps, delta, lg, envs, senv)
        log_counts.append(bs.meta["log_count"])
    x = np.log([eps / d for d in ladder])
    slope_con = float(np.polyfit(x, log_counts, 1)[0])

    # empirical lower estimate: uniform parameter-cube sample of the
    # Hellinger ball, so the full parameter dimension is exercised
    n_samples = int(config.get("entropy_samples", 8000))
    rng = np.random.default_rng(seed)
    samples = []
    max_tries = 200 * n_samples
    tries = 0
    while len(samples) < n_samples and tries < max_tries:
        tries += 1
        w = rng.dirichlet(np.ones(q))
        atoms = np.stack([ctx.domain.clip(a) for a in rng.uniform(
            ctx.domain.center - ctx.domain.radius,
            ctx.domain.center + ctx.domain.radius, size=(q, ctx.dim))])
        m = Mixture(w, atoms)
        if hellinger_to_ref(m, sctx) <= eps:
            samples.append(m)
    emb = _sqrt_embedding(samples, sctx, sctx.grid)
    greedy_counts = [len(greedy_cover(emb, delta)) for delta in ladder]
    usable = [k for k, c in enumerate(greedy_counts)
              if c < 0.5 * n_samples]  # drop saturated scales
    if len(usable) >= 2:
        slope_emp = float(np.polyfit(x[usable],
                                     np.log(np.array(greedy_counts)[usable]),
                                     1)[0])
    else:
        slope_emp = float("nan")

    meta = _base_meta(config, seed, sctx, c_hat)
    rows = [(d, lc, gc) for d, lc, gc in zip(ladder, log_counts,
                                             greedy_counts)]
    write_csv(Path(outdir) / "entropy_ladder.csv", meta,
              ["delta", "log_count_construction", "greedy_count"], rows)
    summary = {"q": q, "eps": eps, "slope_construction": slope_con,
               "slope_bound": 10 * (ctx.dim + 1) * q + 1,
               "slope_greedy": slope_emp, "greedy_counts": greedy_counts,
               "n_samples": n_samples, **meta}
    write_json(Path(outdir) / "entropy_summary.json", summary)
    return summary


def gaussian_envelope_norms(T: float, dim: int = 1,
                            theta_res: int = 96) -> dict:
    """Weighted envelope norms for a centered Gaussian reference at radius T."""
    family = gaussian_family(dim)
    center = np.zeros(dim)
    halfwidth = 4.0 * T + 10.0
    nodes = max(int(40 * halfwidth), 401)
    if dim == 2:
        nodes = min(nodes, 201)
    grid = trapezoid_grid(center, halfwidth, nodes, dim=dim)
    ref = Mixture(np.ones(1), center[None, :])
    ctx = ReferenceContext.build(family, ParameterDomain(center, T), ref, grid)
    envs = compute_envelopes(ctx, max_order=3, theta_res=theta_res)
    out = {}
    for k, p in ((0, 4.0), (1, 4.0), (2, 4.0), (3, 2.0)):
        val = ctx.measure.lp(envs[k].values, p)
        if not math.isfinite(val):
            raise NumericError(
                f"H_{k} norm overflowed; widen the quadrature box")
        out[f"H{k}_p{int(p)}"] = val
    return out


def run_gauss(config: dict, seed: int, outdir) -> dict:
    """Envelope norm growth against T^2 for the Gaussian family."""
    ladder = [float(t) for t in config.get("T_ladder",
                                           [0.5, 1.0, 1.5, 2.0, 2.5])]
    dim = int(config.get("dim", 1))
    rows = []
    for T in ladder:
        norms = gaussian_envelope_norms(T, dim=dim)
        rows.append((T, norms["H0_p4"], norms["H1_p4"], norms["H2_p4"],
                     norms["H3_p2"]))
    t2 = np.array(ladder) ** 2
    fits = {}
    for col, name in ((1, "H0_p4"), (2, "H1_p4"), (3, "H2_p4"),
                      (4, "H3_p2")):
        y = np.log([r[col] for r in rows])
        slope, intercept = np.polyfit(t2, y, 1)
        resid = y - (slope * t2 + intercept)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot else 1.0
        fits[name] = {"slope": float(slope), "intercept": float(intercept),
                      "r2": r2, "max_residual": float(np.max(np.abs(resid)))}
    meta = _base_meta(config, seed)
    write_csv(Path(outdir) / "gauss_envelopes.csv", meta,
              ["T", "H0_l4", "H1_l4", "H2_l4", "H3_l2"], rows)
    summary = {"fits": fits, "T_ladder": ladder, **meta}
    write_json(Path(outdir) / "gauss_summary.json", summary)
    return summary


def ball_scenario(q: int, delta: float, rho: float, n_points: int,
                  seed: int) -> dict:
    """Slicing on the unit Euclidean ball in R^(q+1), sup-norm lattice."""
    dim = q + 1
    gen = ball_D0_generator(dim)
    d_env = LatticeVector(np.ones(dim), "sup")
    t0 = LatticeVector(np.zeros(dim), "sup")
    bset = slice_local_brackets(gen, d_env, t0, delta, rho)
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n_points, dim))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts *= delta * rng.random((n_points, 1)) ** (1.0 / dim)
    report = verify_bracket_cover(bset, pts)
    # calibrate the generator's polynomial certificate on the used scales
    r, H = bset.meta["r"], bset.meta["H"]
    scales = [r ** (n - H - 1) * d_env.norm() / 4.0
              for n in range(1, bset.meta["n_shells"] + 1)]
    eps0 = max(scales) if scales else rho
    c0 = calibrate_c0(gen, scales, q) if scales else 1.0
    C = c0 * max(1.0, d_env.norm() / (4.0 * eps0))
    bound = (8.0 * C * delta / rho) ** (q + 1)
    return {"q": q, "delta": delta, "rho": rho,
            "coverage": report["coverage"],
            "max_size": max(b.size for b in bset.brackets),
            "count": bset.count, "bound": bound, "C": C,
            "within_bound": bset.count <= bound}


def hilbert_scenario(K: int = 20, r: int = 2) -> dict:
    """Truncated lattice example: local counts linear in k, global blowup."""
    counts = {}
    for k in range(r, K + 1, 3):
        bset = hilbert_truncation_brackets(r, k, K)
        pts = [p for p in hilbert_truncation_points(r, K)
               if np.max(np.abs(p)) <= 2.0 ** (-r) + 1e-12]
        report = verify_bracket_cover(bset, pts)
        counts[k] = {"count": len(bset.brackets), "bound": k - r + 1,
                     "coverage": report["coverage"]}
    # normalized class: distinct unit vectors are sup-distance 1 apart,
    # so any bracket of size < 1 contains at most one of them
    pair_size = 1.0
    return {"r": r, "K": K, "local_counts": counts,
            "normalized_min_brackets": K,
            "normalized_pair_size": pair_size}


def run_slice(config: dict, seed: int, outdir) -> dict:
    """The two synthetic slicing scenarios plus one mixture scenario."""
    q = int(config.get("q", 2))
    ball = ball_scenario(q, float(config.get("delta", 0.8)),
                         float(config.get("rho", 0.4)),
                         int(config.get("n_points", 10000)), seed)
    hilbert = hilbert_scenario(int(config.get("hilbert_K", 20)),
                               int(config.get("hilbert_r", 2)))

    from .geometry import perturbed_mixture
    from .metrics import hellinger_to_ref
    mix_cfg = {"family": "fig1", "domain_center": [0.5],
               "domain_radius": 0.5, "ref_atoms": [[0.5]],
               "ref_weights": [1.0], "search_nodes": 201,
               "grid_nodes": 201}
    ctx, sctx, nbhd = _geometry_from_config(mix_cfg, seed)
    lg = LocalGeometry(sctx, nbhd)
    envs = compute_envelopes(sctx, max_order=3)
    c_hat = estimate_cstar(lg, 300, seed=seed, refine_steps=40,
                           polish_maxiter=800)[0]
    senv = envelope_S(envs, sctx, c_hat)
    eps, delta = float(config.get("mix_eps", 0.2)), \
        float(config.get("mix_delta", 0.1))
    bs = bracket_Hq_local(q, eps, delta, lg, envs, senv)
    rng = np.random.default_rng(seed + 1)
    n_cov, n_tot = 0, 0
    while n_tot < int(config.get("mix_points", 100)):
        t = 10.0 ** rng.uniform(-2.5, np.log10(eps))
        m = perturbed_mixture(sctx, rng, t)
        h = hellinger_to_ref(m, sctx)
        if h > eps or h < 1e-8:
            continue
        n_tot += 1
        fv = mixture_density(m, sctx.family, sctx.grid.nodes)
        root = np.sqrt(fv / sctx.fstar)
        if bs.locate(m).contains(root):
            n_cov += 1
    mixture = {"eps": eps, "delta": delta, "coverage": n_cov / n_tot,
               "log_count": bs.meta["log_count"], "cstar_hat": c_hat}

    meta = _base_meta(config, seed, sctx, c_hat)
    summary = {"ball": ball, "hilbert": hilbert, "mixture": mixture, **meta}
    write_json(Path(outdir) / "slice_summary.json", summary)
    return summary
