import itertools
import math

import numpy as np
import pytest

from photonsieve import distributions as dist
from photonsieve import gaussian, hafnian
from photonsieve.errors import (
    LayoutMismatch,
    PartitionMismatch,
    RankViolation,
)

L1 = gaussian.ModeLayout(1)
L2 = gaussian.ModeLayout(2)


def haar_unitary(rng, n):
    h = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(h)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def tmsv(r):
    bs = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    return gaussian.apply_channel(gaussian.from_squeezing([r, -r], L2), bs)


# -- prob_fine ----------------------------------------------------------------

def test_prob_fine_vacuum():
    rep = gaussian.to_adjacency(gaussian.from_squeezing([0.0], L1))
    assert np.isclose(dist.prob_fine(rep, [0]), 1.0)


def test_prob_fine_tmsv_pairing():
    r = 0.5
    rep = gaussian.to_adjacency(tmsv(r))
    th, ch = np.tanh(r), np.cosh(r)
    for k in range(3):
        assert np.isclose(dist.prob_fine(rep, [k, k]),
                          th ** (2 * k) / ch ** 2, atol=1e-12)
    assert abs(dist.prob_fine(rep, [1, 2])) < 1e-12


def test_prob_fine_coherent_poisson():
    alpha = 0.9
    s = gaussian.displace(gaussian.from_squeezing([0.0], L1), [alpha])
    rep = gaussian.to_adjacency(s)
    lam = abs(alpha) ** 2
    for k in range(5):
        assert np.isclose(dist.prob_fine(rep, [k]),
                          math.exp(-lam) * lam ** k / math.factorial(k),
                          atol=1e-12)


# -- totals -------------------------------------------------------------------

def test_prob_total_poisson_and_parity():
    alpha = 0.7 + 0.2j
    s = gaussian.displace(gaussian.from_squeezing([0.0], L1), [alpha])
    rep = gaussian.to_adjacency(s)
    lam = abs(alpha) ** 2
    for n in range(6):
        assert np.isclose(dist.prob_total(rep, [0], n),
                          math.exp(-lam) * lam ** n / math.factorial(n),
                          atol=1e-12)
    srep = gaussian.to_adjacency(gaussian.from_squeezing([0.8], L1))
    assert abs(dist.prob_total(srep, [0], 3)) < 1e-12


def test_total_distribution_auto_cutoff():
    rep = gaussian.to_adjacency(gaussian.from_squeezing([0.6], L1))
    d = dist.total_distribution(rep)
    assert d.deficit < 1e-7
    assert np.all(d.probabilities >= 0)
    assert np.isclose(d.probabilities[0], 1 / np.cosh(0.6), atol=1e-12)


def test_total_distribution_matches_convolution():
    # product state through a unitary: total distribution is the convolution
    # of the per-mode distributions of the inputs
    rng = np.random.default_rng(3)
    xi = [0.4, 0.7]
    u = haar_unitary(rng, 2)
    s = gaussian.apply_channel(gaussian.from_squeezing(xi, L2), u)
    rep = gaussian.to_adjacency(s)
    nmax = 12
    single = []
    for r in xi:
        rr = gaussian.to_adjacency(gaussian.from_squeezing([r], L1))
        single.append([dist.prob_total(rr, [0], n) for n in range(nmax + 1)])
    conv = np.convolve(single[0], single[1])[: nmax + 1]
    mine = [dist.prob_total(rep, [0, 1], n) for n in range(nmax + 1)]
    assert np.allclose(mine, conv, atol=1e-9)


# -- coarse -------------------------------------------------------------------

def lossy_three_mode_rep(seed=11):
    rng = np.random.default_rng(seed)
    lay = gaussian.ModeLayout(3)
    s = gaussian.from_squeezing([0.5, -0.3, 0.4], lay)
    s = gaussian.apply_channel(s, 0.85 * haar_unitary(rng, 3))
    s = gaussian.displace(s, [0.2, -0.1j, 0.05])
    return gaussian.to_adjacency(s)


def test_prob_coarse_consistency():
    rep = lossy_three_mode_rep()
    # singleton blocks -> fine
    cp = dist.CoarsePattern([[0], [1], [2]], [1, 0, 2])
    assert np.isclose(dist.prob_coarse(rep, cp),
                      dist.prob_fine(rep, [1, 0, 2]), atol=1e-12)
    # one block -> total
    cp1 = dist.CoarsePattern([[0, 1, 2]], [3])
    assert np.isclose(dist.prob_coarse(rep, cp1),
                      dist.prob_total(rep, [0, 1, 2], 3), atol=1e-12)


def test_prob_coarse_fine_sum():
    rep = lossy_three_mode_rep()
    cp = dist.CoarsePattern([[0, 1], [2]], [2, 1])
    want = sum(dist.prob_fine(rep, [a, 2 - a, 1]) for a in range(3))
    assert np.isclose(dist.prob_coarse(rep, cp), want, rtol=1e-9)


def test_prob_coarse_refinement_of_total():
    rep = lossy_three_mode_rep()
    n = 3
    total = dist.prob_total(rep, [0, 1, 2], n)
    acc = 0.0
    for b0 in range(n + 1):
        cp = dist.CoarsePattern([[0, 1], [2]], [b0, n - b0])
        acc += dist.prob_coarse(rep, cp)
    assert np.isclose(acc, total, rtol=1e-9)


# -- external detectors -------------------------------------------------------

def two_internal_state(seed=5, eta=0.9):
    """Two distinguishable squeezers per external mode, 2 externals."""
    rng = np.random.default_rng(seed)
    lay = gaussian.ModeLayout(2, 2)
    s = gaussian.from_squeezing([0.5, 0.3, -0.4, 0.6], lay)
    u = haar_unitary(rng, 2)
    t = np.sqrt(eta) * np.kron(u, np.eye(2))  # internal modes do not mix
    return gaussian.apply_channel(s, t)


def test_prob_external_k1_is_fine():
    rep = lossy_three_mode_rep()
    assert np.isclose(dist.prob_external(rep, [1, 0, 2]),
                      dist.prob_fine(rep, [1, 0, 2]), atol=1e-12)


def test_prob_external_vs_internal_brute_force():
    rep = gaussian.to_adjacency(two_internal_state())
    n = [2, 1]
    want = 0.0
    for a in range(n[0] + 1):
        for b in range(n[1] + 1):
            want += dist.prob_fine(rep, [a, n[0] - a, b, n[1] - b])
    assert np.isclose(dist.prob_external(rep, n), want, rtol=1e-9)


def distinguishable_state(seed=5, eta=0.9):
    """Each external mode feeds its squeezer into its own spectral mode."""
    rng = np.random.default_rng(seed)
    lay = gaussian.ModeLayout(2, 2)
    s = gaussian.from_squeezing([0.5, 0.0, 0.0, 0.6], lay)
    u = haar_unitary(rng, 2)
    t = np.sqrt(eta) * np.kron(u, np.eye(2))
    return gaussian.apply_channel(s, t)


def test_prob_external_distinguishable_matches_general():
    rep = gaussian.to_adjacency(distinguishable_state())
    blocks = dist.extract_distinguishable_blocks(rep)
    for n in ([0, 0], [1, 1], [2, 1], [2, 2]):
        assert np.isclose(
            dist.prob_external_distinguishable(blocks, n),
            dist.prob_external(rep, n),
            rtol=1e-9, atol=1e-12,
        )


def test_prob_external_distinguishable_k1():
    rep = gaussian.to_adjacency(
        gaussian.apply_channel(gaussian.from_squeezing([0.7], L1),
                               np.array([[0.9]]))
    )
    blocks = dist.extract_distinguishable_blocks(rep)
    for n in range(4):
        assert np.isclose(dist.prob_external_distinguishable(blocks, [n]),
                          dist.prob_fine(rep, [n]), rtol=1e-9, atol=1e-12)


def test_distinguishable_rank_guard():
    # two squeezers sharing one spectral mode make that block rank four
    rep = gaussian.to_adjacency(two_internal_state())
    blocks = dist.extract_distinguishable_blocks(rep)
    with pytest.raises(RankViolation):
        dist.prob_external_distinguishable(blocks, [2, 1])


# -- moments ------------------------------------------------------------------

def test_mgf_values():
    assert np.isclose(
        dist.moment_mgf(gaussian.from_squeezing([0.0, 0.0], L2), [0.0, 0.0]),
        1.0,
    )
    nbar, t = 0.7, 0.3
    th = gaussian.thermal_state([nbar], L1)
    assert np.isclose(dist.moment_mgf(th, [t]),
                      1 / (1 - nbar * np.expm1(t)), atol=1e-12)
    alpha = 0.6 - 0.1j
    coh = gaussian.displace(gaussian.from_squeezing([0.0], L1), [alpha])
    assert np.isclose(dist.moment_mgf(coh, [t]),
                      np.exp(abs(alpha) ** 2 * np.expm1(t)), atol=1e-12)


def test_coarse_moment_values():
    vac = gaussian.from_squeezing([0.0, 0.0], L2)
    assert np.isclose(dist.coarse_moment(vac, [[0, 1]]), 0.0, atol=1e-12)
    r = 0.8
    sq = gaussian.from_squeezing([r], L1)
    assert np.isclose(dist.coarse_moment(sq, [[0]]), np.sinh(r) ** 2,
                      atol=1e-10)


def test_coarse_moment_matches_mgf_derivative():
    s = two_internal_state(seed=9, eta=0.8)
    s = gaussian.displace(s, [0.3, 0.0, -0.2j, 0.1])
    blocks = [[0, 1], [2, 3]]
    h = 1e-5
    vals = {}
    for i, j in itertools.product([0, 1], repeat=2):
        t = np.zeros(4)
        for b, sgn in zip(blocks, (i, j)):
            for idx in b:
                t[idx] = h * (1 if sgn else -1)
        vals[(i, j)] = dist.moment_mgf(s, t)
    numeric = (vals[(1, 1)] - vals[(1, 0)] - vals[(0, 1)] + vals[(0, 0)]) \
        / (2 * h) ** 2
    assert np.isclose(dist.coarse_moment(s, blocks), numeric, atol=1e-6)


def test_block_cumulant_thermal_variance():
    nbar = 0.9
    th = gaussian.thermal_state([nbar], L1)
    assert np.isclose(dist.block_cumulant(th, [0], 1), nbar, atol=1e-12)
    assert np.isclose(dist.block_cumulant(th, [0], 2), nbar + nbar ** 2,
                      atol=1e-12)


def test_coarse_cumulant_covariance():
    # joint cumulant of two blocks equals Cov(n_B1, n_B2), checked by MGF
    s = two_internal_state(seed=2, eta=0.75)
    blocks = [[0, 1], [2, 3]]
    mom = dist.coarse_moment(s, blocks)
    m1 = dist.coarse_moment(s, [blocks[0]])
    m2 = dist.coarse_moment(s, [blocks[1]])
    assert np.isclose(dist.coarse_cumulant(s, blocks), mom - m1 * m2,
                      atol=1e-9)


def test_partition_validation():
    s = gaussian.from_squeezing([0.0, 0.0], L2)
    with pytest.raises(PartitionMismatch):
        dist.coarse_moment(s, [[0], [0]])
    with pytest.raises(LayoutMismatch):
        dist.prob_external(gaussian.to_adjacency(s), [1])
