import math

import numpy as np
import pytest

from photonsieve import fock_channel as fc
from photonsieve import heralding
from photonsieve.distributions import CoarsePattern
from photonsieve.errors import NotSubunitary, PartitionMismatch, TooLarge
from photonsieve.heralding import HeraldSpec

BS = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def haar_unitary(rng, n):
    h = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(h)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def fine_cp(b):
    return CoarsePattern([[k] for k in range(len(b))], list(b))


# -- construction -------------------------------------------------------------

def test_build_a_phi_structure():
    t = 0.9 * BS
    a = fc.build_a_phi(t)
    assert a.shape == (8, 8)
    assert np.allclose(a, a.T)
    assert np.allclose(a[:2, 2:4], t.conj().T)
    assert np.allclose(a[:2, 4:6], np.eye(2) - t.conj().T @ t)


def test_input_validation():
    with pytest.raises(NotSubunitary):
        fc.FockInput((1, 0), 1.1 * np.eye(2))
    with pytest.raises(PartitionMismatch):
        fc.FockInput((1,), np.eye(2))
    with pytest.raises(PartitionMismatch):
        fc.FockInput((-1, 0), np.eye(2))


# -- coarse probabilities -----------------------------------------------------

def test_identity_circuit_passthrough():
    fi = fc.FockInput((2, 1), np.eye(2))
    assert np.isclose(fc.fock_coarse_prob(fi, fine_cp([2, 1])), 1.0)
    assert np.isclose(fc.fock_coarse_prob(fi, fine_cp([1, 2])), 0.0,
                      atol=1e-12)
    assert fc.fock_coarse_prob(fi, fine_cp([2, 2])) == 0.0


def test_balanced_splitter_single_photon():
    fi = fc.FockInput((1, 0), BS)
    assert np.isclose(fc.fock_coarse_prob(fi, fine_cp([1, 0])), 0.5)
    assert np.isclose(fc.fock_coarse_prob(fi, fine_cp([0, 1])), 0.5)


def test_two_photon_interference():
    fi = fc.FockInput((1, 1), BS)
    assert abs(fc.fock_coarse_prob(fi, fine_cp([1, 1]))) < 1e-12
    assert np.isclose(fc.fock_coarse_prob(fi, fine_cp([2, 0])), 0.5)
    assert np.isclose(fc.fock_coarse_prob(fi, fine_cp([0, 2])), 0.5)


def test_lossy_single_mode():
    eta = 0.72
    fi = fc.FockInput((1,), np.array([[np.sqrt(eta)]]))
    assert np.isclose(fc.fock_coarse_prob(fi, fine_cp([0])), 1 - eta)
    assert np.isclose(fc.fock_coarse_prob(fi, fine_cp([1])), eta)
    fi2 = fc.FockInput((2,), np.array([[np.sqrt(eta)]]))
    for k in range(3):
        want = math.comb(2, k) * eta ** k * (1 - eta) ** (2 - k)
        assert np.isclose(fc.fock_coarse_prob(fi2, fine_cp([k])), want)


def test_unitary_normalization():
    rng = np.random.default_rng(21)
    u = haar_unitary(rng, 3)
    fi = fc.FockInput((1, 2, 0), u)
    n = sum(fi.p)
    cp = CoarsePattern([[0, 1, 2]], [n])
    assert np.isclose(fc.fock_coarse_prob(fi, cp), 1.0, atol=1e-10)
    cp_less = CoarsePattern([[0, 1, 2]], [n - 1])
    assert abs(fc.fock_coarse_prob(fi, cp_less)) < 1e-12


def test_lossy_total_normalization():
    rng = np.random.default_rng(22)
    t = 0.8 * haar_unitary(rng, 2)
    fi = fc.FockInput((1, 1), t)
    total = sum(fc.fock_coarse_prob(fi, CoarsePattern([[0, 1]], [n]))
                for n in range(3))
    assert np.isclose(total, 1.0, atol=1e-10)


def test_output_permutation_covariance():
    rng = np.random.default_rng(23)
    t = 0.9 * haar_unitary(rng, 3)
    perm = np.zeros((3, 3))
    for i, j in enumerate([2, 0, 1]):
        perm[i, j] = 1.0
    fi = fc.FockInput((1, 1, 0), t)
    fi_p = fc.FockInput((1, 1, 0), perm @ t)
    b = [0, 2, 0]
    assert np.isclose(fc.fock_coarse_prob(fi, fine_cp(b)),
                      fc.fock_coarse_prob(fi_p, fine_cp(perm @ b)),
                      rtol=1e-10)


# -- permanent oracle ---------------------------------------------------------

def test_perm_oracle_small():
    assert np.isclose(fc.perm_oracle([[3.0]]), 3.0)
    assert np.isclose(fc.perm_oracle([[1, 2], [3, 4]]), 1 * 4 + 2 * 3)
    assert np.isclose(fc.perm_oracle(np.ones((4, 4))), math.factorial(4))
    with pytest.raises(TooLarge):
        fc.perm_oracle(np.ones((17, 17)))


@pytest.mark.parametrize("seed", range(5))
def test_cross_oracle_random(seed):
    rng = np.random.default_rng(300 + seed)
    m = int(rng.integers(2, 4))
    t = rng.uniform(0.6, 0.95) * haar_unitary(rng, m)
    p = tuple(int(x) for x in rng.integers(0, 3, size=m))
    if sum(p) == 0:
        p = (1,) + p[1:]
    fi = fc.FockInput(p, t)
    blocks = [[0], list(range(1, m))] if m > 1 else [[0]]
    for total in range(sum(p) + 1):
        for b0 in range(total + 1):
            counts = [b0, total - b0] if m > 1 else [b0]
            if m == 1 and b0 != total:
                continue
            cp = CoarsePattern(blocks, counts)
            assert np.isclose(fc.fock_coarse_prob(fi, cp),
                              fc.fock_perm_oracle(fi, cp),
                              rtol=1e-9, atol=1e-12)


# -- heralded states ----------------------------------------------------------

def test_herald_splitter_vacuum_outcome():
    # |1,0> on a balanced splitter, heralding vacuum on port 1 leaves
    # the photon on port 0 with probability one half
    fi = fc.FockInput((1, 0), BS)
    dm = fc.fock_herald(fi, HeraldSpec([1], [0], cutoff=2))
    assert np.isclose(dm.trace.real, 0.5, atol=1e-10)
    assert np.isclose(dm.entries[1, 1].real, 0.5, atol=1e-10)
    off = dm.entries.copy()
    off[1, 1] = 0
    assert np.max(np.abs(off)) < 1e-10


def test_herald_more_than_input_is_zero():
    fi = fc.FockInput((1, 0), BS)
    dm = fc.fock_herald(fi, HeraldSpec([1], [2], cutoff=2))
    assert np.max(np.abs(dm.entries)) == 0.0


def test_herald_outcomes_sum_to_marginal():
    rng = np.random.default_rng(31)
    t = 0.85 * haar_unitary(rng, 2)
    fi = fc.FockInput((1, 1), t)
    cutoff = 2
    full = fc.fock_herald(fi, HeraldSpec([], [], cutoff=cutoff))
    marg = heralding.partial_trace(full, [1])
    acc = np.zeros_like(marg.entries)
    for k in range(cutoff + 1):
        acc += fc.fock_herald(fi, HeraldSpec([1], [k], cutoff=cutoff)).entries
    assert np.allclose(acc, marg.entries, atol=1e-10)


def test_herald_diagonal_matches_coarse_prob():
    rng = np.random.default_rng(32)
    t = 0.9 * haar_unitary(rng, 2)
    fi = fc.FockInput((2, 0), t)
    dm = fc.fock_herald(fi, HeraldSpec([1], [1], cutoff=2))
    for n in range(3):
        want = fc.fock_coarse_prob(fi, fine_cp([n, 1]))
        assert np.isclose(dm.entries[n, n].real, want, atol=1e-10)


def test_herald_grouped_equals_fine_sum():
    rng = np.random.default_rng(33)
    t = 0.9 * haar_unitary(rng, 3)
    fi = fc.FockInput((1, 1, 0), t)
    total = 1
    grouped = fc.fock_herald(
        fi, HeraldSpec([0, 1], ([(0, 1)], (total,)), cutoff=2))
    acc = np.zeros_like(grouped.entries)
    for k in range(total + 1):
        fine = fc.fock_herald(
            fi, HeraldSpec([0, 1], [k, total - k], cutoff=2))
        acc += fine.entries
    assert np.allclose(grouped.entries, acc, atol=1e-10)


def test_herald_trace_out():
    rng = np.random.default_rng(34)
    t = 0.8 * haar_unitary(rng, 3)
    fi = fc.FockInput((1, 1, 0), t)
    direct = fc.fock_herald(
        fi, HeraldSpec([0], [1], cutoff=2, trace_out=[2]))
    full = fc.fock_herald(fi, HeraldSpec([0], [1], cutoff=2))
    traced = heralding.partial_trace(full, [1])
    assert np.allclose(direct.entries, traced.entries, atol=1e-10)


def test_herald_hermitian_with_complex_circuit():
    rng = np.random.default_rng(35)
    t = 0.85 * haar_unitary(rng, 2)
    fi = fc.FockInput((2, 1), t)
    dm = fc.fock_herald(fi, HeraldSpec([1], [1], cutoff=2))
    assert np.allclose(dm.entries, dm.entries.conj().T)
    evals = np.linalg.eigvalsh(dm.entries)
    assert evals.min() > -1e-10
