"""Lattice brackets, shell slicing, greedy covers, synthetic scenarios."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixgeo.bracketing import (Bracket, BracketSet, LatticeVector,
                               ball_D0_generator, calibrate_c0, greedy_cover,
                               hilbert_truncation_brackets,
                               hilbert_truncation_points, load_jsonl,
                               slice_local_brackets, verify_bracket_cover)
from mixgeo.errors import CertificateError, ConfigError, ScaleError


def test_lattice_vector_norms():
    v = LatticeVector(np.array([3.0, -4.0]), "l2")
    assert v.norm() == pytest.approx(5.0)
    assert LatticeVector(np.array([3.0, -4.0]), "l1").norm() == 7.0
    assert LatticeVector(np.array([3.0, -4.0]), "sup").norm() == 4.0
    w = LatticeVector(np.array([1.0, 1.0]), "weighted-l2",
                      weights=np.array([0.25, 0.75]))
    assert w.norm() == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        LatticeVector(np.zeros(2), "bogus")
    with pytest.raises(ConfigError):
        LatticeVector(np.zeros(2), "weighted-l2")
    with pytest.raises(ConfigError):
        LatticeVector(np.array([np.inf]), "sup")


def test_bracket_order_and_size():
    lo = LatticeVector(np.array([0.0, 0.0]), "sup")
    up = LatticeVector(np.array([0.5, 1.0]), "sup")
    b = Bracket(lo, up)
    assert b.size == 1.0
    assert b.contains(np.array([0.3, 0.9]))
    assert not b.contains(np.array([0.6, 0.5]))
    with pytest.raises(ConfigError):
        Bracket(up, lo)


def test_bracket_set_scale_certificate():
    lo = LatticeVector(np.zeros(1), "sup")
    up = LatticeVector(np.ones(1), "sup")
    with pytest.raises(CertificateError):
        BracketSet([Bracket(lo, up)], 0.5, "test")
    ok = BracketSet([Bracket(lo, up)], 1.0, "test")
    assert ok.count == 1.0


def test_jsonl_roundtrip(tmp_path):
    lo = LatticeVector(np.array([0.0, 0.1]), "sup")
    up = LatticeVector(np.array([0.2, 0.4]), "sup")
    bset = BracketSet([Bracket(lo, up)], 0.5, "roundtrip")
    path = tmp_path / "brackets.jsonl"
    bset.to_jsonl(path)
    loaded = load_jsonl(path)
    assert loaded.scale == 0.5
    assert loaded.provenance == "roundtrip"
    assert np.allclose(loaded.brackets[0].lower.coordinates, [0.0, 0.1])
    assert np.allclose(loaded.brackets[0].upper.coordinates, [0.2, 0.4])


def test_slice_precondition_boundary():
    gen = ball_D0_generator(2)
    d_env = LatticeVector(np.ones(2), "sup")
    t0 = LatticeVector(np.zeros(2), "sup")
    with pytest.raises(ScaleError):
        slice_local_brackets(gen, d_env, t0, delta=0.25, rho=1.0)  # ratio 4
    with pytest.raises(ScaleError):
        # 2||d|| = 0.2 < rho/delta = 0.5
        tiny = LatticeVector(np.full(2, 0.1), "sup")
        slice_local_brackets(gen, tiny, t0, delta=1.0, rho=0.5)


def test_slice_rejects_oversized_generator_brackets():
    def bad_gen(eps):
        lo = LatticeVector(np.array([-2.0, -2.0]), "sup")
        up = LatticeVector(np.array([2.0, 2.0]), "sup")
        return BracketSet([Bracket(lo, up)], 10.0, "bad")

    d_env = LatticeVector(np.ones(2), "sup")
    t0 = LatticeVector(np.zeros(2), "sup")
    with pytest.raises(CertificateError):
        slice_local_brackets(bad_gen, d_env, t0, delta=1.0, rho=0.5)


def _brute_force_sphere_gen(dim):
    return ball_D0_generator(dim)


@pytest.mark.parametrize("seed", range(20))
def test_slicing_soundness_random_instances(seed):
    # random finite-dimensional ball instances with brute-force D0
    # generators: exhaustive-coverage, size, and count certificates
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 4))
    q = dim - 1
    delta = float(rng.uniform(0.5, 1.5))
    rho = float(rng.uniform(0.3, 0.9)) * delta
    t0_vec = rng.normal(size=dim)
    gen = _brute_force_sphere_gen(dim)
    d_env = LatticeVector(np.ones(dim), "sup")
    t0 = LatticeVector(t0_vec, "sup")
    bset = slice_local_brackets(gen, d_env, t0, delta, rho)
    assert max(b.size for b in bset.brackets) <= rho * (1 + 1e-9)
    pts = rng.normal(size=(2000, dim))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts = t0_vec + pts * delta * rng.random((2000, 1)) ** (1.0 / dim)
    report = verify_bracket_cover(bset, pts)
    assert report["coverage"] == 1.0
    # count bound with C = C0 (1 v ||d||/4 eps0) on the used scales
    r, H = bset.meta["r"], bset.meta["H"]
    scales = [r ** (n - H - 1) * d_env.norm() / 4.0
              for n in range(1, bset.meta["n_shells"] + 1)]
    if scales:
        eps0 = max(scales)
        c0 = calibrate_c0(gen, scales, q)
        C = c0 * max(1.0, d_env.norm() / (4.0 * eps0))
        assert bset.count <= (8.0 * C * delta / rho) ** (q + 1)


def test_count_monotone_in_scale():
    gen = ball_D0_generator(2)
    d_env = LatticeVector(np.ones(2), "sup")
    t0 = LatticeVector(np.zeros(2), "sup")
    counts = [slice_local_brackets(gen, d_env, t0, 1.0, rho).count
              for rho in (0.8, 0.4, 0.2)]
    assert counts[0] <= counts[1] <= counts[2]


def test_local_slope_exceeds_global_by_about_one():
    # global D0 slope is q; local slicing adds at most ~1 to it
    dim, q = 2, 1
    gen = ball_D0_generator(dim)
    scales = [0.2, 0.1, 0.05]
    g_counts = [gen(e).count for e in scales]
    g_slope = np.polyfit(np.log([1 / e for e in scales]),
                         np.log(g_counts), 1)[0]
    d_env = LatticeVector(np.ones(dim), "sup")
    t0 = LatticeVector(np.zeros(dim), "sup")
    rhos = [0.4, 0.2, 0.1]
    l_counts = [slice_local_brackets(gen, d_env, t0, 1.0, r).count
                for r in rhos]
    l_slope = np.polyfit(np.log([1 / r for r in rhos]),
                         np.log(l_counts), 1)[0]
    assert l_slope <= g_slope + 1.5
    assert q - 1.0 <= g_slope <= q + 1.0


def test_hilbert_truncation_counts_and_coverage():
    K, r = 20, 2
    for k in range(r, K + 1):
        bset = hilbert_truncation_brackets(r, k, K)
        assert len(bset.brackets) == k - r + 1
        pts = [p for p in hilbert_truncation_points(r, K)]
        assert verify_bracket_cover(bset, pts)["coverage"] == 1.0
    with pytest.raises(ConfigError):
        hilbert_truncation_brackets(5, 3, K)


def test_hilbert_normalized_class_needs_K_brackets():
    # normalized atoms are the unit vectors e_j; the smallest bracket
    # containing two of them has sup-size exactly 1, so any bracket set
    # at scale < 1 uses at least one bracket per atom
    K = 20
    for i in range(0, K, 5):
        for j in range(i + 1, K, 7):
            ei, ej = np.zeros(K), np.zeros(K)
            ei[i] = 1.0
            ej[j] = 1.0
            b = Bracket(LatticeVector(np.minimum(ei, ej), "sup"),
                        LatticeVector(np.maximum(ei, ej), "sup"))
            assert b.size >= 1.0


def test_verify_bracket_cover_reports():
    lo = LatticeVector(np.zeros(2), "sup")
    up = LatticeVector(np.ones(2), "sup")
    bset = BracketSet([Bracket(lo, up)], 1.0, "unit")
    report = verify_bracket_cover(bset, [])
    assert report["coverage"] == 1.0 and report["n_points"] == 0
    report = verify_bracket_cover(bset, [np.array([2.0, 2.0]),
                                         np.array([0.5, 0.5])])
    assert report["violations"] == [0]
    assert report["assignments"][1] == 0


def test_greedy_cover_trivial_cases():
    pts = np.array([[0.0, 0.0], [0.01, 0.0], [0.0, 0.02]])
    assert greedy_cover(pts, 0.5) == [0]
    # 5x5 unit grid with sup metric eps = 0.5: brute-force optimum is 4
    axis = np.linspace(0, 1, 5)
    grid = np.array([[x, y] for x in axis for y in axis])
    centers = greedy_cover(grid, 0.5, metric="sup")
    assert len(centers) <= 4


def test_greedy_cover_doubling_slope():
    rng = np.random.default_rng(0)
    pts = rng.random((4000, 2))
    n1 = len(greedy_cover(pts, 0.2))
    n2 = len(greedy_cover(pts, 0.1))
    assert n2 / n1 <= 2.0 ** 2 * 2.0  # ~2^dim growth with slack


def test_greedy_cover_deterministic():
    rng = np.random.default_rng(1)
    pts = rng.random((500, 3))
    assert greedy_cover(pts, 0.3) == greedy_cover(pts, 0.3)
    # coverage property: every point within eps of some center
    centers = greedy_cover(pts, 0.3)
    d = np.min(np.linalg.norm(pts[:, None] - pts[centers][None], axis=2),
               axis=1)
    assert np.max(d) <= 0.3


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.05, 0.8))
def test_greedy_cover_properties(seed, eps):
    rng = np.random.default_rng(seed)
    pts = rng.random((100, 2))
    centers = greedy_cover(pts, eps)
    assert len(set(centers)) == len(centers) <= 100
    d = np.min(np.max(np.abs(pts[:, None] - pts[centers][None]), axis=2),
               axis=1)
    # euclidean cover implies sup cover at the same radius
    assert np.max(np.min(np.linalg.norm(
        pts[:, None] - pts[centers][None], axis=2), axis=1)) <= eps + 1e-12
