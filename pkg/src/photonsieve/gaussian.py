"""Gaussian states and their adjacency parametrization.

States live in the ladder-operator ordering (a_1..a_T, a_1^†..a_T^†) with the
Husimi covariance convention: vacuum has covariance I. The adjacency
representation (A, gamma, vacuum probability) is what the Hafnian kernels
consume.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    IndexOutOfRange,
    LayoutMismatch,
    LengthMismatch,
    NotHermitian,
    NotPositiveDefinite,
    NotSubunitary,
    NotSymmetric,
    SingularCovariance,
)
from .linalg import (
    STRUCTURE_TOL,
    hermitian_power,
    require_finite,
    takagi,
    xmat,
)

_COND_LIMIT = 1e12
_UNCERTAINTY_TOL = -1e-9


@dataclass(frozen=True)
class ModeLayout:
    """M external modes, each carrying K co-propagating internal modes.

    Internal modes of external k occupy the contiguous indices
    k*K .. (k+1)*K - 1.
    """

    externals: int
    internals_per_external: int = 1

    def __post_init__(self):
        if self.externals < 1 or self.internals_per_external < 1:
            raise LayoutMismatch("layout needs positive mode counts")

    @property
    def total(self):
        return self.externals * self.internals_per_external

    def internal_indices(self, external):
        k = self.internals_per_external
        if not 0 <= external < self.externals:
            raise IndexOutOfRange(f"external mode {external} out of range")
        return list(range(external * k, (external + 1) * k))


def _zmat(t):
    z = np.zeros((2 * t, 2 * t), dtype=complex)
    z[:t, :t] = np.eye(t)
    z[t:, t:] = -np.eye(t)
    return z


@dataclass(frozen=True)
class GaussianState:
    """Husimi covariance and ladder-operator means over a mode layout."""

    husimi_cov: np.ndarray
    means: np.ndarray
    layout: ModeLayout

    def __post_init__(self):
        cov = np.asarray(self.husimi_cov, dtype=complex)
        z = np.asarray(self.means, dtype=complex)
        t = self.layout.total
        if cov.shape != (2 * t, 2 * t) or z.shape != (2 * t,):
            raise LayoutMismatch(
                f"covariance/means shapes {cov.shape}/{z.shape} do not match "
                f"{t} modes"
            )
        require_finite(cov, "covariance")
        require_finite(z, "means")
        if np.max(np.abs(cov - cov.conj().T)) > STRUCTURE_TOL:
            raise NotHermitian("Husimi covariance is not Hermitian")
        if np.min(np.linalg.eigvalsh(cov)) <= 0:
            raise NotPositiveDefinite("Husimi covariance is not positive definite")
        # physicality: normal-ordered covariance plus commutator term is PSD
        phys = cov + (_zmat(t) - np.eye(2 * t)) / 2
        if np.min(np.linalg.eigvalsh(phys)) < _UNCERTAINTY_TOL:
            raise NotPositiveDefinite("state violates the uncertainty bound")
        if np.max(np.abs(z[t:] - z[:t].conj())) > STRUCTURE_TOL:
            raise LayoutMismatch("means halves are not conjugate")
        object.__setattr__(self, "husimi_cov", cov)
        object.__setattr__(self, "means", z)


@dataclass(frozen=True)
class AdjacencyRep:
    """Adjacency matrix A, loop vector gamma, and cached vacuum probability."""

    a: np.ndarray
    gamma: np.ndarray
    vacuum_prob: complex
    layout: ModeLayout

    def __post_init__(self):
        a = np.asarray(self.a, dtype=complex)
        g = np.asarray(self.gamma, dtype=complex)
        t = self.layout.total
        if a.shape != (2 * t, 2 * t) or g.shape != (2 * t,):
            raise LayoutMismatch("adjacency shapes do not match layout")
        if np.max(np.abs(a - a.T)) > STRUCTURE_TOL:
            raise NotSymmetric("adjacency matrix is not symmetric")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True)
class OverlapModel:
    """Pairwise overlaps of the spectral functions feeding each squeezer."""

    overlap: np.ndarray
    squeeze_params: np.ndarray = field(default=None)

    def __post_init__(self):
        o = np.asarray(self.overlap, dtype=complex)
        xi = np.asarray(self.squeeze_params, dtype=complex)
        if o.shape != (len(xi), len(xi)):
            raise LengthMismatch("one squeeze parameter per overlap row")
        if np.max(np.abs(o - o.conj().T)) > STRUCTURE_TOL:
            raise NotHermitian("overlap matrix is not Hermitian")
        if np.max(np.abs(np.diag(o) - 1)) > STRUCTURE_TOL:
            raise DomainError("overlap diagonal must be 1 (normalized modes)")
        if np.min(np.linalg.eigvalsh(o)) <= 0:
            raise NotPositiveDefinite("overlap matrix is not positive definite")
        object.__setattr__(self, "overlap", o)
        object.__setattr__(self, "squeeze_params", xi)


# ---------------------------------------------------------------------------
# constructors and channels
# ---------------------------------------------------------------------------

def from_squeezing(xi, layout):
    """Product of single-mode squeezed vacua, one parameter per mode."""
    xi = np.asarray(xi, dtype=complex)
    require_finite(xi, "squeeze parameters")
    t = layout.total
    if len(xi) != t:
        raise LengthMismatch(f"need {t} squeeze parameters, got {len(xi)}")
    cov = np.eye(2 * t, dtype=complex)
    for k in range(t):
        r = abs(xi[k])
        if r == 0:
            continue
        phase = xi[k] / r
        c, s = np.cosh(r), np.sinh(r)
        cov[k, k] = cov[t + k, t + k] = c * c
        cov[k, t + k] = phase * s * c
        cov[t + k, k] = np.conj(phase) * s * c
    return GaussianState(cov, np.zeros(2 * t, dtype=complex), layout)


def thermal_state(nbar, layout):
    """Product of thermal states with the given mean photon numbers."""
    nbar = np.asarray(nbar, dtype=float)
    t = layout.total
    if len(nbar) != t:
        raise LengthMismatch(f"need {t} occupation numbers, got {len(nbar)}")
    if np.any(nbar < 0):
        raise DomainError("thermal occupation must be non-negative")
    cov = np.diag(np.concatenate([nbar + 1.0, nbar + 1.0])).astype(complex)
    return GaussianState(cov, np.zeros(2 * t, dtype=complex), layout)


def displace(state, alphas):
    """Shift the means by (alpha, alpha*); covariance unchanged."""
    alphas = np.asarray(alphas, dtype=complex)
    require_finite(alphas, "displacements")
    t = state.layout.total
    if len(alphas) != t:
        raise LengthMismatch(f"need {t} displacements, got {len(alphas)}")
    z = state.means + np.concatenate([alphas, alphas.conj()])
    return GaussianState(state.husimi_cov, z, state.layout)


def apply_channel(state, t):
    """Pass the state through a subunitary transmission matrix.

    Lost light is replaced by vacuum: Sigma' = W Sigma W† + (I - W W†),
    means' = W means, with W = conj(t) (+) t on the doubled space.
    """
    t = np.asarray(t, dtype=complex)
    require_finite(t, "transmission")
    n = state.layout.total
    if t.shape != (n, n):
        raise LayoutMismatch(f"transmission must be {n}x{n}, got {t.shape}")
    if np.max(np.linalg.svd(t, compute_uv=False)) > 1 + 1e-10:
        raise NotSubunitary("transmission has a singular value above 1")
    w = np.zeros((2 * n, 2 * n), dtype=complex)
    w[:n, :n] = t.conj()
    w[n:, n:] = t
    cov = w @ state.husimi_cov @ w.conj().T + np.eye(2 * n) - w @ w.conj().T
    return GaussianState(cov, w @ state.means, state.layout)


# ---------------------------------------------------------------------------
# adjacency representation
# ---------------------------------------------------------------------------

def adjacency_from_cov(cov, means, layout):
    """A = X(I - Sigma^-1), gamma = X Sigma^-1 means, and Pr(vacuum)."""
    cov = np.asarray(cov, dtype=complex)
    means = np.asarray(means, dtype=complex)
    t = layout.total
    if np.linalg.cond(cov) > _COND_LIMIT:
        raise SingularCovariance("Husimi covariance is numerically singular")
    inv = np.linalg.inv(cov)
    x = xmat(t)
    a = x @ (np.eye(2 * t) - inv)
    a = (a + a.T) / 2  # remove roundoff asymmetry
    gamma = x @ inv @ means
    sign, logdet = np.linalg.slogdet(cov)
    quad = means.conj() @ inv @ means
    vac = np.exp(-quad / 2 - logdet / 2) / np.sqrt(sign)
    return AdjacencyRep(a, gamma, complex(vac), layout)


def to_adjacency(state):
    """Adjacency representation of a Gaussian state."""
    return adjacency_from_cov(state.husimi_cov, state.means, state.layout)


def reduce_modes(rep, keep):
    """Submatrix rep on the kept modes; vacuum probability unchanged.

    This is the "vacuum elsewhere" reduction used inside generating-function
    identities, not a partial trace.
    """
    keep = list(keep)
    t = rep.layout.total
    if not keep:
        raise IndexOutOfRange("keep set must be non-empty")
    for i in keep:
        if not 0 <= i < t:
            raise IndexOutOfRange(f"mode {i} out of range")
    idx = keep + [t + i for i in keep]
    sub = rep.a[np.ix_(idx, idx)]
    return AdjacencyRep(
        sub, rep.gamma[idx], rep.vacuum_prob, ModeLayout(len(keep), 1)
    )


def marginal_state(state, keep):
    """Partial trace of a Gaussian state: submatrix of covariance and means."""
    keep = list(keep)
    t = state.layout.total
    for i in keep:
        if not 0 <= i < t:
            raise IndexOutOfRange(f"mode {i} out of range")
    idx = keep + [t + i for i in keep]
    return GaussianState(
        state.husimi_cov[np.ix_(idx, idx)],
        state.means[idx],
        ModeLayout(len(keep), 1),
    )


# ---------------------------------------------------------------------------
# spectral impurity machinery
# ---------------------------------------------------------------------------

def lowdin_internal_model(model):
    """Rotate non-orthogonal squeezer modes to an orthonormal internal basis.

    For each source k builds the rank-one symmetric coupling
    J^(k) = xi_k * outer(row_k, row_k) with row_k the k-th row of O^(1/2),
    and factors it. Returns (table, factors): table[k] holds the effective
    squeeze magnitudes of source k in the rotated basis (descending, at most
    one nonzero), factors[k] the corresponding unitary basis change.
    """
    o = model.overlap
    xi = model.squeeze_params
    osqrt = hermitian_power(o, 0.5)
    m = o.shape[0]
    table = np.zeros((m, m))
    factors = []
    for k in range(m):
        row = osqrt[k, :]
        j = xi[k] * np.outer(row, row)
        f, sigma = takagi(j)
        table[k, :] = sigma
        factors.append(f)
    return table, factors


def impure_source(xi, p, layout):
    """Squeezed sources with spectral purity p, two internal modes each.

    Each external mode carries a dominant squeezer xi_k on its first internal
    mode and a parasite xi'_k with tanh^2(xi') = ((1-p)/p) tanh^2(xi) on its
    second.
    """
    xi = np.asarray(xi, dtype=float)
    if not 0 < p <= 1:
        raise DomainError(f"purity must be in (0, 1], got {p}")
    if np.any(xi < 0):
        raise DomainError("squeeze magnitudes must be non-negative")
    if layout.internals_per_external != 2:
        raise LayoutMismatch("impure source needs two internal modes per external")
    if len(xi) != layout.externals:
        raise LengthMismatch("one squeeze magnitude per external mode")
    xi_p = np.arctanh(np.sqrt((1 - p) / p) * np.tanh(xi))
    full = np.zeros(layout.total)
    full[0::2] = xi
    full[1::2] = xi_p
    return from_squeezing(full, layout)
