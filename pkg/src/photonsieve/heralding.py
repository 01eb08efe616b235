"""Fock matrix elements of Gaussian states and heralded density matrices.

Off-diagonal elements <m|rho|n> need the loop Hafnian of a rectangular
repetition A_{n (+) m}. The embedding construction turns that into a square
repetition of a larger matrix so the finite-difference sieve applies. Density
matrices of heralded states are assembled element by element, with traced
modes marginalized at the Gaussian level first.
"""

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import (
    IndexOutOfRange,
    LengthMismatch,
    NotNormalized,
    PartitionMismatch,
)
from .gaussian import AdjacencyRep, ModeLayout, adjacency_from_cov
from .hafnian import blocked_lhaf, lhaf_sieve
from .linalg import xmat

PAD = "pad"


@dataclass(frozen=True)
class Embedding:
    """Square-repetition equivalent of a rectangular repetition.

    The defining contract: the loop Hafnian of a_prime repeated with pattern
    t on both halves equals the loop Hafnian of the source matrix repeated
    with the original (ket, bra) patterns.
    """

    a_prime: np.ndarray
    gamma_prime: np.ndarray
    t: tuple
    source_map: tuple


@dataclass(frozen=True)
class HeraldSpec:
    """What is measured, what is kept, what is discarded.

    ``measurement`` is either a fine pattern (sequence of counts, one per
    herald mode) or a pair (blocks, counts) grouping the herald modes.
    ``trace_out`` modes are discarded; ``cutoff`` bounds the Fock index of
    every remaining mode.
    """

    herald_modes: tuple
    measurement: object
    cutoff: int
    trace_out: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "herald_modes", tuple(self.herald_modes))
        object.__setattr__(self, "trace_out", tuple(self.trace_out))
        if self.cutoff < 0:
            raise PartitionMismatch("cutoff must be non-negative")
        if set(self.herald_modes) & set(self.trace_out):
            raise PartitionMismatch("herald and traced modes must be disjoint")


@dataclass(frozen=True)
class DensityMatrix:
    """Fock-basis density matrix over ``modes`` modes, truncated at cutoff.

    Row/column indices are row-major multi-indices over the per-mode photon
    numbers; ``trace`` of an unnormalized herald output is the (truncated)
    herald probability.
    """

    modes: int
    cutoff: int
    entries: np.ndarray

    def __post_init__(self):
        d = (self.cutoff + 1) ** self.modes
        entries = np.asarray(self.entries, dtype=complex)
        if entries.shape != (d, d):
            raise LengthMismatch(f"entries must be {d}x{d}")
        object.__setattr__(self, "entries", entries)

    @property
    def trace(self):
        return complex(np.trace(self.entries))

    def normalized(self):
        return DensityMatrix(
            self.modes, self.cutoff, self.entries / self.trace.real
        )

    def index_of(self, pattern):
        idx = 0
        for p in pattern:
            if not 0 <= p <= self.cutoff:
                raise IndexOutOfRange(f"Fock index {p} beyond cutoff")
            idx = idx * (self.cutoff + 1) + p
        return idx


# ---------------------------------------------------------------------------
# embedding construction
# ---------------------------------------------------------------------------

def _source_index(tag, nmodes):
    half, k = tag
    return k if half == "ket" else nmodes + k


def _assemble(a, gamma, nmodes, tbar, new_modes, pad_slots):
    """Build (a', gamma', t, source_map) from per-new-mode source tags.

    ``new_modes`` is a list of (ket_tag, bra_tag, count); a tag is
    ('ket'|'bra', original mode) or PAD.
    """
    mprime = nmodes + len(new_modes)
    tags = [("ket", k) for k in range(nmodes)]
    tags += [nm[0] for nm in new_modes]
    tags += [("bra", k) for k in range(nmodes)]
    tags += [nm[1] for nm in new_modes]
    ap = np.zeros((2 * mprime, 2 * mprime), dtype=complex)
    gp = np.zeros(2 * mprime, dtype=complex)
    for i, ti in enumerate(tags):
        if ti is PAD:
            ap[i, i] = 1.0
            gp[i] = 1.0
            continue
        si = _source_index(ti, nmodes)
        gp[i] = gamma[si]
        for j, tj in enumerate(tags):
            if tj is PAD:
                continue
            ap[i, j] = a[si, _source_index(tj, nmodes)]
    for i, ti in enumerate(tags):
        if ti is PAD:
            ap[i, :] = 0.0
            ap[:, i] = 0.0
            ap[i, i] = 1.0
    t = tuple(tbar) + tuple(nm[2] for nm in new_modes)
    return Embedding(ap, gp, t, tuple(tags))


def build_embedding(rep, n, m):
    """Literal construction: every surplus pair becomes a one-photon mode.

    Surplus ket copies (n_k > m_k) and bra copies (m_k > n_k) are listed in
    ascending mode order and zipped two at a time; an odd leftover is paired
    with a padding half (zero row, loop weight one).
    """
    nmodes = rep.layout.total
    n = [int(x) for x in n]
    m = [int(x) for x in m]
    if len(n) != nmodes or len(m) != nmodes:
        raise LengthMismatch("patterns must cover all modes")
    tbar = [min(a, b) for a, b in zip(n, m)]
    slots = []
    for k in range(nmodes):
        slots += [("ket", k)] * (n[k] - m[k]) if n[k] > m[k] else []
    for k in range(nmodes):
        slots += [("bra", k)] * (m[k] - n[k]) if m[k] > n[k] else []
    new_modes = []
    for i in range(0, len(slots) - 1, 2):
        new_modes.append((slots[i], slots[i + 1], 1))
    if len(slots) % 2:
        new_modes.append((slots[-1], PAD, 1))
    return _assemble(rep.a, rep.gamma, nmodes, tbar, new_modes, None)


def _merged_embedding(rep, n, m):
    """Compact variant: same-source surplus copies merge into counted modes.

    A source with d surplus copies yields one new mode of count d // 2 (its
    ket and bra halves both carry the source row, so the repetition is
    entry-identical to d // 2 zipped one-photon modes); odd leftovers are
    zipped across sources, with a final padding half if their number is odd.
    """
    nmodes = rep.layout.total
    n = [int(x) for x in n]
    m = [int(x) for x in m]
    if len(n) != nmodes or len(m) != nmodes:
        raise LengthMismatch("patterns must cover all modes")
    tbar = [min(a, b) for a, b in zip(n, m)]
    new_modes = []
    leftovers = []
    for k in range(nmodes):
        d = n[k] - m[k]
        tag = ("ket", k) if d > 0 else ("bra", k)
        d = abs(d)
        if d >= 2:
            new_modes.append((tag, tag, d // 2))
        if d % 2:
            leftovers.append(tag)
    for i in range(0, len(leftovers) - 1, 2):
        new_modes.append((leftovers[i], leftovers[i + 1], 1))
    if len(leftovers) % 2:
        new_modes.append((leftovers[-1], PAD, 1))
    return _assemble(rep.a, rep.gamma, nmodes, tbar, new_modes, None)


# ---------------------------------------------------------------------------
# matrix elements
# ---------------------------------------------------------------------------

def fock_element(rep, m, n, merged=False):
    """<m|rho|n> for the Gaussian state behind ``rep``."""
    emb = (_merged_embedding if merged else build_embedding)(rep, n, m)
    val = rep.vacuum_prob * lhaf_sieve(emb.a_prime, emb.gamma_prime, emb.t)
    norm = np.prod([math.sqrt(math.factorial(a) * math.factorial(b))
                    for a, b in zip(n, m)])
    return complex(val / norm)


def _grouped_element(rep, herald_blocks, counts, kept, u, v, abs_tol=None):
    """<v|rho_G|u> with the herald modes measured through grouped detectors.

    ``herald_blocks``/``counts`` describe the coarse herald outcome over the
    herald modes, ``kept`` lists the supported modes, ``u``/``v`` their ket
    and bra Fock indices.  ``abs_tol`` is the acceptable absolute error of
    the returned element; it relaxes the adaptive sieve on elements whose
    exact value is negligibly small.
    """
    nmodes = rep.layout.total
    nfull = [0] * nmodes
    mfull = [0] * nmodes
    for k, (a, b) in zip(kept, zip(u, v)):
        nfull[k] = int(a)
        mfull[k] = int(b)
    emb = _merged_embedding(rep, nfull, mfull)
    mprime = len(emb.t)
    blocks = [tuple(b) for b in herald_blocks]
    blk_counts = list(counts)
    in_herald = set(i for b in blocks for i in b)
    for j in range(mprime):
        if j not in in_herald:
            blocks.append((j,))
            blk_counts.append(emb.t[j])
    norm = np.prod([math.factorial(int(c)) for c in counts])
    norm *= np.prod([math.sqrt(math.factorial(int(a)) * math.factorial(int(b)))
                     for a, b in zip(u, v)])
    scale = abs(rep.vacuum_prob) / norm
    val = rep.vacuum_prob * blocked_lhaf(
        emb.a_prime, emb.gamma_prime, blocks, blk_counts,
        abs_tol=None if abs_tol is None or scale == 0 else abs_tol / scale,
    )
    return complex(val / norm)


# ---------------------------------------------------------------------------
# heralded density matrices
# ---------------------------------------------------------------------------

def _marginal_rep(rep, keep):
    """Partial trace at the Gaussian level: reduce the covariance, re-derive.

    Unlike ``reduce_modes`` (which asserts vacuum on the excluded modes),
    this sums over all outcomes of the excluded modes exactly.
    """
    t = rep.layout.total
    keep = list(keep)
    cov = np.linalg.inv(np.eye(2 * t) - xmat(t) @ rep.a)
    means = cov @ xmat(t) @ rep.gamma
    idx = keep + [t + i for i in keep]
    return adjacency_from_cov(
        cov[np.ix_(idx, idx)], means[idx], ModeLayout(len(keep), 1)
    )


def _herald_parts(rep, spec):
    """Marginalize traced modes and renumber; returns (rep', blocks, counts,
    kept') in the reduced indexing."""
    t = rep.layout.total
    if isinstance(spec.measurement, tuple) and len(spec.measurement) == 2 \
            and not np.isscalar(spec.measurement[0]):
        blocks, counts = spec.measurement
        blocks = [tuple(b) for b in blocks]
        counts = [int(c) for c in counts]
    else:
        blocks = [(h,) for h in spec.herald_modes]
        counts = [int(c) for c in spec.measurement]
    if sorted(i for b in blocks for i in b) != sorted(spec.herald_modes):
        raise PartitionMismatch("measurement blocks must cover herald modes")
    if len(blocks) != len(counts):
        raise PartitionMismatch("one count per herald block")
    kept = [i for i in range(t)
            if i not in spec.herald_modes and i not in spec.trace_out]
    survivors = sorted(set(spec.herald_modes) | set(kept))
    renum = {old: new for new, old in enumerate(survivors)}
    sub = _marginal_rep(rep, survivors) if len(survivors) < t else rep
    blocks = [tuple(renum[i] for i in b) for b in blocks]
    kept = [renum[i] for i in kept]
    return sub, blocks, counts, kept


def herald_grouped(rep, spec):
    """Unnormalized heralded state for a grouped (or fine) herald outcome."""
    sub, blocks, counts, kept = _herald_parts(rep, spec)
    c = spec.cutoff
    g = len(kept)
    dim = (c + 1) ** g
    patterns = list(product(range(c + 1), repeat=g))
    entries = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        entries[i, i] = _grouped_element(sub, blocks, counts, kept,
                                         patterns[i], patterns[i])
    # the trace sets the scale of the state; off-diagonal elements only
    # need absolute accuracy far below it
    tol = 1e-9 * abs(np.trace(entries).real)
    for i in range(dim):
        for j in range(i + 1, dim):
            # row index is the bra pattern v, column the ket pattern u
            val = _grouped_element(sub, blocks, counts, kept,
                                   patterns[j], patterns[i],
                                   abs_tol=tol if tol > 0 else None)
            entries[i, j] = val
            entries[j, i] = np.conj(val)
    return DensityMatrix(g, c, entries)


def herald_fine(rep, spec):
    """Unnormalized heralded state for an exact herald pattern."""
    if isinstance(spec.measurement, tuple) and len(spec.measurement) == 2 \
            and not np.isscalar(spec.measurement[0]):
        raise PartitionMismatch("herald_fine needs a fine pattern")
    return herald_grouped(rep, spec)


def partial_trace(dm, drop):
    """Fock-basis partial trace over the dropped modes."""
    drop = sorted(set(drop))
    for i in drop:
        if not 0 <= i < dm.modes:
            raise IndexOutOfRange(f"mode {i} out of range")
    if not drop:
        return dm
    g = dm.modes
    c1 = dm.cutoff + 1
    tensor = dm.entries.reshape((c1,) * (2 * g))
    for off, i in enumerate(drop):
        ax = i - off
        rem = g - off
        tensor = np.trace(tensor, axis1=ax, axis2=ax + rem)
    keep = g - len(drop)
    dim = c1 ** keep
    return DensityMatrix(keep, dm.cutoff, tensor.reshape(dim, dim))


def fidelity(dm, target):
    """sqrt(<psi|rho|psi>) between a normalized dm and a pure target."""
    target = np.asarray(target, dtype=complex).reshape(-1)
    if target.shape[0] != dm.entries.shape[0]:
        raise LengthMismatch("target length must match the dm dimension")
    if abs(dm.trace.real - 1) > 1e-9:
        raise NotNormalized("density matrix must be normalized")
    if abs(np.linalg.norm(target) - 1) > 1e-9:
        raise NotNormalized("target state must be normalized")
    overlap = (target.conj() @ dm.entries @ target).real
    return math.sqrt(max(overlap, 0.0))
