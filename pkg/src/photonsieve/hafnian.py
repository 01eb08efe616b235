"""Loop-Hafnian kernels.

Four layers, from slow-and-certain to fast:

* ``lhaf_oracle``     exact enumeration of single-pair matchings with loops,
                      exponential, guarded to 14 rows;
* ``f_from_g``        partition dynamic program turning log-series
                      coefficients g_k into the Taylor coefficient f_N;
* ``lhaf_sieve``      coefficient-extraction sieve on a grid of f
                      evaluations (roots-of-unity circles by default,
                      divided-difference ladders on request), equal to the
                      oracle on the repeated matrix;
* ``blocked_lhaf``    the grouped-detector generalization, one sieve variable
                      per block.
"""

import math
from itertools import product

import numpy as np

from .errors import NonFinite, OddDimension, PartitionMismatch, TooLarge
from .linalg import require_finite, xmat

_ORACLE_LIMIT = 14

# grids at least this large switch the f evaluation from repeated matrix
# products to batched eigenvalues (less memory traffic, slightly less
# accurate); batched BLAS powers win comfortably below this size
_EIG_GRID = 1 << 17
_EIG_ORDER = 12


# ---------------------------------------------------------------------------
# combinatorial oracle
# ---------------------------------------------------------------------------

def lhaf_oracle(a, gamma=None):
    """Loop Hafnian by explicit enumeration of matchings with loops.

    The diagonal of ``a`` is ignored; loop weights come from ``gamma``.
    Without ``gamma`` the dimension must be even (plain Hafnian). Guarded to
    14 rows.
    """
    a = np.asarray(a, dtype=complex)
    d = a.shape[0]
    if d > _ORACLE_LIMIT:
        raise TooLarge(f"oracle limited to {_ORACLE_LIMIT} rows, got {d}")
    if gamma is None:
        if d % 2:
            raise OddDimension("plain Hafnian needs an even dimension")
        g = np.zeros(d, dtype=complex)
    else:
        g = np.asarray(gamma, dtype=complex)

    def rec(idx):
        if not idx:
            return 1.0 + 0.0j
        i = idx[0]
        rest = idx[1:]
        total = g[i] * rec(rest)
        for pos, j in enumerate(rest):
            total += a[i, j] * rec(rest[:pos] + rest[pos + 1:])
        return total

    return rec(tuple(range(d)))


def repeat_pattern(a, gamma, n, m=None):
    """Repeated matrix A_{n (+) m} and loop vector, for oracle cross-checks.

    ``n`` indexes the first half of ``a``'s modes, ``m`` the second; with
    ``m`` omitted the diagonal repetition n (+) n is built.
    """
    a = np.asarray(a, dtype=complex)
    n = list(n)
    if m is None:
        m = n
    nmodes = a.shape[0] // 2
    idx = [k for k in range(nmodes) for _ in range(n[k])]
    idx += [nmodes + k for k in range(nmodes) for _ in range(list(m)[k])]
    rep = a[np.ix_(idx, idx)]
    if gamma is None:
        return rep, None
    return rep, np.asarray(gamma, dtype=complex)[idx]


# ---------------------------------------------------------------------------
# partition dynamic program
# ---------------------------------------------------------------------------

def f_from_g(g):
    """Coefficient of eta^N in exp(sum_k g_k eta^k), N = len(g)."""
    return f_coefficients(g)[-1]


def f_coefficients(g):
    """All coefficients f_0..f_N of exp(sum_k g_k eta^k) at once."""
    g = np.asarray(g, dtype=complex)
    n = len(g)
    c = np.zeros(n + 1, dtype=complex)
    c[0] = 1.0
    for i in range(1, n + 1):
        base = c.copy()
        p = 1.0 + 0.0j
        for j in range(1, n // i + 1):
            p = p * g[i - 1] / j
            c[i * j:] += base[: n + 1 - i * j] * p
    return c


def g_coefficients(a, gamma=None, nmax=1, scale=None):
    """Log-series coefficients g_1..g_nmax of the generating function.

    g_k = tr([XA]^k) / (2k) + gamma^T [XA]^(k-1) X gamma / 2, with every XA
    and X gamma replaced by their D(scale)-scaled versions when ``scale`` is
    given (one scale entry per mode, applied to both halves).
    """
    a = np.asarray(a, dtype=complex)
    nmodes = a.shape[0] // 2
    x = xmat(nmodes)
    xa = x @ a
    if scale is not None:
        d = np.concatenate([scale, scale]).astype(complex)
        xa = d[:, None] * xa
    g = np.zeros(nmax, dtype=complex)
    running = xa
    if gamma is not None:
        gamma = np.asarray(gamma, dtype=complex)
        w = x @ gamma
        if scale is not None:
            w = d * w
    for k in range(1, nmax + 1):
        g[k - 1] = np.trace(running) / (2 * k)
        if gamma is not None:
            g[k - 1] += (gamma @ w) / 2
            w = xa @ w
        if k < nmax:
            running = running @ xa
    require_finite(g, "g coefficients")
    return g


def f_n(a, gamma=None, n=0, scale=None):
    """N-th Taylor coefficient of the generating function q."""
    if n == 0:
        return 1.0 + 0.0j
    return f_from_g(g_coefficients(a, gamma, nmax=n, scale=scale))


# ---------------------------------------------------------------------------
# finite-difference sieve
# ---------------------------------------------------------------------------

def _node_pairs(pattern, nodes):
    """Resolve per-variable (u, v) node pairs; ``None`` keeps the default."""
    pairs = []
    for j, k in enumerate(pattern):
        if nodes is None:
            pairs.append(None)
            continue
        u, v = nodes[j]
        if k > 0 and u == v:
            raise PartitionMismatch(f"sieve nodes for variable {j} coincide")
        pairs.append((u, v))
    return pairs


def _difference_weights(k, u, v):
    """Points and weights of the k-th order divided difference operator."""
    step = u - v
    pts = v + step * np.arange(k + 1)
    wts = np.array(
        [math.comb(k, m) * (-1.0) ** (k - m) for m in range(k + 1)]
    ) / step ** k
    return pts, wts


def _variable_grid(k, pair):
    """Evaluation points and weights for one sieve variable of order k.

    With an explicit (u, v) pair this is the k-th divided difference on the
    arithmetic ladder v, v+h, ..., v+kh.  By default it is a discrete Fourier
    transform over the (k+1)-th roots of unity, scaled by k! to match the
    divided-difference normalization.  All default points sit on the unit
    circle and all default weights share the magnitude k!/(k+1), so the fold
    stays well conditioned even for orders in the dozens, where the ladder
    points grow like k*h and wipe out double precision.
    """
    if pair is not None:
        return _difference_weights(k, *pair)
    if k == 0:
        return np.zeros(1, dtype=complex), np.ones(1)
    omega = np.exp(2j * np.pi / (k + 1))
    m = np.arange(k + 1)
    pts = omega ** m
    wts = math.factorial(k) * omega ** (-k * m) / (k + 1)
    return pts, wts


def sieve(evaluate, pattern, nodes=None):
    """Apply the product of finite-difference operators to ``evaluate``.

    ``evaluate`` maps a full node assignment (one value per pattern entry) to
    a complex number and must be polynomial of degree <= N per variable.
    Variables with a zero count are pinned at zero (or at their v node when
    explicit nodes are supplied).
    """
    pattern = list(pattern)
    pairs = _node_pairs(pattern, nodes)
    active = [j for j, k in enumerate(pattern) if k > 0]
    base = np.array(
        [0.0 if pairs[j] is None else pairs[j][1] for j in range(len(pattern))],
        dtype=complex,
    )
    if not active:
        return complex(evaluate(base))
    grids = [_variable_grid(pattern[j], pairs[j]) for j in active]
    total = 0.0 + 0.0j
    for combo in product(*(range(pattern[j] + 1) for j in active)):
        z = base.copy()
        w = 1.0 + 0.0j
        for (pts, wts), m, j in zip(grids, combo, active):
            z[j] = pts[m]
            w *= wts[m]
        total += w * evaluate(z)
    return total


# memory budget (bytes) for the stored half-powers of one grid chunk
_CHUNK_BYTES = 1 << 28


def _f_batch(a, gamma, total, zgrid, force_eig=None):
    """f_total evaluated at every row of ``zgrid`` (shape grid x modes)."""
    a = np.asarray(a, dtype=complex)
    nmodes = a.shape[0] // 2
    x = xmat(nmodes)
    xa = x @ a
    zgrid = np.asarray(zgrid, dtype=complex)
    npts = zgrid.shape[0]

    use_eig = force_eig
    if use_eig is None:
        use_eig = npts >= _EIG_GRID and total >= _EIG_ORDER

    per_point = 16 * (2 * nmodes) ** 2 * 4
    chunk = max(1, min(npts, _CHUNK_BYTES // per_point))
    out = np.empty(npts, dtype=complex)
    for lo in range(0, npts, chunk):
        zc = zgrid[lo:lo + chunk]
        d = np.concatenate([zc, zc], axis=1)            # (G, 2M)
        mats = d[:, :, None] * xa[None, :, :]           # (G, 2M, 2M)
        gpts = zc.shape[0]
        g = np.zeros((gpts, total), dtype=complex)
        if use_eig:
            lam = np.linalg.eigvals(mats)               # (G, 2M)
            pw = np.ones_like(lam)
            for k in range(1, total + 1):
                pw = pw * lam
                g[:, k - 1] = pw.sum(axis=1) / (2 * k)
        else:
            running = mats
            for k in range(1, total + 1):
                g[:, k - 1] = running.diagonal(
                    axis1=1, axis2=2
                ).sum(axis=1) / (2 * k)
                if k < total:
                    running = running @ mats
        if gamma is not None and np.any(gamma):
            gam = np.asarray(gamma, dtype=complex)
            w = d * (x @ gam)[None, :]
            for k in range(1, total + 1):
                g[:, k - 1] += (w @ gam) / 2
                if k < total:
                    w = (mats @ w[:, :, None])[:, :, 0]

        # batched version of f_coefficients
        c = np.zeros((gpts, total + 1), dtype=complex)
        c[:, 0] = 1.0
        for i in range(1, total + 1):
            base = c.copy()
            p = np.ones(gpts, dtype=complex)
            for j in range(1, total // i + 1):
                p = p * g[:, i - 1] / j
                c[:, i * j:] += base[:, : total + 1 - i * j] * p[:, None]
        out[lo:lo + chunk] = c[:, total]
    return out


def _sieve_grid(counts, pairs, boost=1.0):
    """Full evaluation grid and fold weights for a list of variables.

    ``boost`` > 1 dilates the default circles to radius boost**(k/kmax),
    which rebalances the fold between variables of unequal order.  The
    target coefficient is homogeneous of total degree N, so any radius
    assignment yields the same exact value; only rounding error changes.
    """
    points, weights = [], []
    kmax = max(counts)
    for k, pair in zip(counts, pairs):
        pts, wts = _variable_grid(k, pair)
        if boost != 1.0 and pair is None and k > 0:
            r = boost ** (k / kmax)
            pts = pts * r
            wts = wts / r ** k
        points.append(np.asarray(pts, dtype=complex))
        weights.append(np.asarray(wts, dtype=complex))
    mesh = np.stack(
        np.meshgrid(*points, indexing="ij"), axis=-1
    ).reshape(-1, len(points))
    wmesh = weights[0]
    for w in weights[1:]:
        wmesh = np.multiply.outer(wmesh, w)
    return mesh, wmesh.ravel()


# circle dilation used first when variable orders differ, the alternatives
# tried when the fold is still dominated by cancellation, and the fraction
# of the absolute fold mass the result must exceed to count as sound
_PRIMARY_BOOST = 4.0
_FALLBACK_BOOSTS = (1.0, 16.0)
_CANCEL_GUARD = 1e-3
_EPS = float(np.finfo(float).eps)


def _sieve_reduce(a, gamma, counts, pairs, expand, total, force_eig=None,
                  abs_tol=None):
    """Shared grid evaluation: expand maps variable columns to mode columns.

    The absolute fold mass (the sum of |weight * f| over the grid) bounds
    the rounding error of the fold, so it doubles as a condition estimate.
    When variable orders differ, the fold starts from a dilated grid, which
    empirically minimizes the mass; if the result still drowns in
    cancellation, the remaining dilations are tried and the assignment with
    the smallest mass wins.  Every dilation evaluates the same exact
    quantity, because the target coefficient is homogeneous.  A result is
    accepted once it clearly exceeds the error bound, or once the bound
    drops below ``abs_tol`` when the caller supplied one.  Explicitly given
    nodes are never second-guessed.
    """
    adaptive = all(p is None for p in pairs) and len(set(counts)) > 1

    def fold(boost):
        mesh, wmesh = _sieve_grid(counts, pairs, boost)
        vals = _f_batch(a, gamma, total, mesh @ expand, force_eig=force_eig)
        terms = wmesh * vals
        return complex(terms.sum()), float(np.abs(terms).sum())

    def sound(out, mass):
        if abs(out) >= _CANCEL_GUARD * mass:
            return True
        return abs_tol is not None and _EPS * mass <= abs_tol

    out, mass = fold(_PRIMARY_BOOST if adaptive else 1.0)
    if adaptive and not sound(out, mass):
        for boost in _FALLBACK_BOOSTS:
            cand, cmass = fold(boost)
            if cmass < mass:
                out, mass = cand, cmass
            if sound(out, mass):
                break
    if not np.isfinite(out):
        raise NonFinite("sieve accumulation overflowed")
    return out


def lhaf_sieve(a, gamma, pattern, nodes=None, force_eig=None, abs_tol=None):
    """Loop Hafnian of the repeated matrix A_{n (+) n} via the sieve."""
    pattern = [int(k) for k in pattern]
    a = np.asarray(a, dtype=complex)
    nmodes = a.shape[0] // 2
    if len(pattern) != nmodes:
        raise PartitionMismatch(
            f"pattern length {len(pattern)} != mode count {nmodes}"
        )
    total = sum(pattern)
    if total == 0:
        return 1.0 + 0.0j
    pairs = _node_pairs(pattern, nodes)
    active = [j for j, k in enumerate(pattern) if k > 0]
    expand = np.zeros((len(active), nmodes), dtype=complex)
    for row, j in enumerate(active):
        expand[row, j] = 1.0
    counts = [pattern[j] for j in active]
    act_pairs = [pairs[j] for j in active]
    return _sieve_reduce(a, gamma, counts, act_pairs, expand, total,
                         force_eig=force_eig, abs_tol=abs_tol)


# ---------------------------------------------------------------------------
# blocked loop Hafnian
# ---------------------------------------------------------------------------

def check_partition(blocks, nmodes):
    """Validate disjoint, covering, non-empty blocks over range(nmodes)."""
    seen = set()
    for b in blocks:
        if not len(b):
            raise PartitionMismatch("empty block")
        for i in b:
            if not 0 <= i < nmodes:
                raise PartitionMismatch(f"block index {i} out of range")
            if i in seen:
                raise PartitionMismatch(f"index {i} appears in two blocks")
            seen.add(i)
    if len(seen) != nmodes:
        raise PartitionMismatch("partition does not cover all modes")


def compatible_patterns(blocks, b, nmodes):
    """All fine patterns whose block sums equal the coarse counts b."""
    def splits(indices, count):
        if len(indices) == 1:
            yield {indices[0]: count}
            return
        for first in range(count + 1):
            for rest in splits(indices[1:], count - first):
                yield {indices[0]: first, **rest}

    per_block = [list(splits(list(blk), cnt)) for blk, cnt in zip(blocks, b)]
    for combo in product(*per_block):
        fine = [0] * nmodes
        for assignment in combo:
            for i, c in assignment.items():
                fine[i] = c
        yield tuple(fine)


def blocked_lhaf(a, gamma, blocks, b, nodes=None, force_eig=None,
                 abs_tol=None):
    """Blocked loop Hafnian: one sieve variable per block."""
    a = np.asarray(a, dtype=complex)
    nmodes = a.shape[0] // 2
    check_partition(blocks, nmodes)
    b = [int(x) for x in b]
    if len(b) != len(blocks):
        raise PartitionMismatch("one count per block required")
    total = sum(b)
    if total == 0:
        return 1.0 + 0.0j
    pairs = _node_pairs(b, nodes)
    active = [j for j, k in enumerate(b) if k > 0]
    expand = np.zeros((len(active), nmodes), dtype=complex)
    for row, j in enumerate(active):
        for i in blocks[j]:
            expand[row, i] = 1.0
    counts = [b[j] for j in active]
    act_pairs = [pairs[j] for j in active]
    return _sieve_reduce(a, gamma, counts, act_pairs, expand, total,
                         force_eig=force_eig, abs_tol=abs_tol)


def blocked_lhaf_combinatorial(a, gamma, blocks, b, use_oracle=False):
    """Defining sum over all compatible fine patterns; the slow cross-check."""
    a = np.asarray(a, dtype=complex)
    nmodes = a.shape[0] // 2
    check_partition(blocks, nmodes)
    facts = np.prod([math.factorial(int(x)) for x in b])
    total = 0.0 + 0.0j
    for fine in compatible_patterns(blocks, b, nmodes):
        if use_oracle:
            rep, rg = repeat_pattern(a, gamma, fine)
            term = lhaf_oracle(rep, rg if gamma is not None else None)
        else:
            term = lhaf_sieve(a, gamma, fine)
        total += term / np.prod([math.factorial(k) for k in fine])
    return facts * total
