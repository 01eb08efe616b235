"""Fock states through lossy linear circuits.

The channel matrix pairs each input port with its output port in a doubled
4M x 4M adjacency-style matrix; output statistics and heralded states then
reduce to blocked loop Hafnians with a zero loop vector, plus an exponential
permanent-based oracle for cross-checking.
"""

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import NotSubunitary, PartitionMismatch, TooLarge
from .gaussian import AdjacencyRep, ModeLayout
from .hafnian import blocked_lhaf, compatible_patterns
from .heralding import DensityMatrix, _grouped_element, partial_trace

_PERM_LIMIT = 16


@dataclass(frozen=True)
class FockInput:
    """Photon counts per input port and the circuit transmission matrix."""

    p: tuple
    t: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=complex)
        p = tuple(int(x) for x in self.p)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or len(p) != t.shape[0]:
            raise PartitionMismatch("one photon count per circuit port")
        if any(x < 0 for x in p):
            raise PartitionMismatch("photon counts must be non-negative")
        if np.max(np.linalg.svd(t, compute_uv=False)) > 1 + 1e-10:
            raise NotSubunitary("transmission has a singular value above 1")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "t", t)


def build_a_phi(t):
    """Symmetric 4M x 4M matrix encoding the loss channel of ``t``.

    Modes 0..M-1 are the input ports, M..2M-1 the output ports, each doubled
    into ket and bra halves.
    """
    t = np.asarray(t, dtype=complex)
    m = t.shape[0]
    if np.max(np.linalg.svd(t, compute_uv=False)) > 1 + 1e-10:
        raise NotSubunitary("transmission has a singular value above 1")
    eye = np.eye(m)
    z = np.zeros((m, m))
    a = np.block([
        [z, t.conj().T, eye - t.conj().T @ t, z],
        [t.conj(), z, z, z],
        [eye - t.T @ t.conj(), z, z, t.T],
        [z, z, t, z],
    ])
    return a


def _channel_rep(fi):
    m = len(fi.p)
    a = build_a_phi(fi.t)
    return AdjacencyRep(a, np.zeros(4 * m, dtype=complex), 1.0,
                        ModeLayout(2 * m, 1))


def fock_coarse_prob(fi, cp):
    """Probability of coarse output counts b for Fock input p through t."""
    m = len(fi.p)
    if sum(cp.counts) > sum(fi.p):
        return 0.0  # a passive lossy circuit cannot create photons
    blocks = [(k,) for k in range(m)]
    blocks += [tuple(m + i for i in blk) for blk in cp.blocks]
    counts = list(fi.p) + list(cp.counts)
    a = build_a_phi(fi.t)
    val = blocked_lhaf(a, None, blocks, counts)
    val /= np.prod([math.factorial(x) for x in counts])
    return float(val.real)


def perm_oracle(mat):
    """Permanent by Ryser's formula with Gray-code subset updates."""
    mat = np.asarray(mat, dtype=complex)
    n = mat.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n > _PERM_LIMIT:
        raise TooLarge(f"permanent limited to {_PERM_LIMIT} rows, got {n}")
    sums = np.zeros(n, dtype=complex)
    total = 0.0 + 0.0j
    sign = -1.0 if n % 2 else 1.0
    gray = 0
    for k in range(1, 2 ** n):
        bit = (k & -k).bit_length() - 1
        gray ^= 1 << bit
        if gray >> bit & 1:
            sums += mat[:, bit]
        else:
            sums -= mat[:, bit]
        parity = -1.0 if bin(gray).count("1") % 2 else 1.0
        total += parity * np.prod(sums)
    return sign * total


def fock_perm_oracle(fi, cp):
    """Coarse output probability through a sum of permanents (exponential)."""
    m = len(fi.p)
    nin = sum(fi.p)
    base = np.block([
        [np.eye(m) - fi.t.conj().T @ fi.t, fi.t.conj().T],
        [fi.t, np.zeros((m, m))],
    ])
    total = 0.0
    for fine in compatible_patterns([list(b) for b in cp.blocks],
                                    list(cp.counts), m):
        if nin + sum(fine) > _PERM_LIMIT:
            raise TooLarge("permanent oracle needs N + |b| <= 16")
        idx = [k for k in range(m) for _ in range(fi.p[k])]
        idx += [m + k for k in range(m) for _ in range(fine[k])]
        sub = base[np.ix_(idx, idx)]
        weight = np.prod([math.factorial(x) for x in fi.p])
        weight *= np.prod([math.factorial(x) for x in fine])
        total += perm_oracle(sub).real / weight
    return float(total)


def fock_herald(fi, spec):
    """Heralded state on the unmeasured output ports of a Fock-fed circuit.

    Herald modes and trace_out in ``spec`` index the output ports; traced
    ports are removed by a Fock-basis partial trace after assembly.
    """
    m = len(fi.p)
    rep = _channel_rep(fi)
    if isinstance(spec.measurement, tuple) and len(spec.measurement) == 2 \
            and not np.isscalar(spec.measurement[0]):
        hblocks, hcounts = spec.measurement
        hblocks = [tuple(i for i in b) for b in hblocks]
        hcounts = [int(c) for c in hcounts]
    else:
        hblocks = [(h,) for h in spec.herald_modes]
        hcounts = [int(c) for c in spec.measurement]
    if sorted(i for b in hblocks for i in b) != sorted(spec.herald_modes):
        raise PartitionMismatch("measurement blocks must cover herald modes")
    blocks = [(k,) for k in range(m)]
    blocks += [tuple(m + i for i in b) for b in hblocks]
    counts = list(fi.p) + hcounts
    kept = [m + i for i in range(m)
            if i not in spec.herald_modes]
    kept_ports = [i for i in range(m) if i not in spec.herald_modes]

    c = spec.cutoff
    g = len(kept)
    dim = (c + 1) ** g
    entries = np.zeros((dim, dim), dtype=complex)
    if sum(hcounts) <= sum(fi.p):
        patterns = list(product(range(c + 1), repeat=g))
        budget = sum(fi.p) - sum(hcounts)
        for i in range(dim):
            for j in range(i, dim):
                u, v = patterns[j], patterns[i]
                if sum(u) > budget or sum(v) > budget:
                    continue  # photon conservation under loss
                val = _grouped_element(rep, blocks, counts, kept, u, v)
                entries[i, j] = val
                if j > i:
                    entries[j, i] = np.conj(val)
    dm = DensityMatrix(g, c, entries)
    if spec.trace_out:
        drop = [kept_ports.index(i) for i in spec.trace_out]
        dm = partial_trace(dm, drop)
    return dm
