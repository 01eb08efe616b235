"""Monte Carlo estimator for total photon-number probabilities.

Squeezed inputs with real squeezing parameters admit a positive phase-space
distribution that factorizes per mode, so Pr(N across all detectors) becomes
the average of Re[(n')^N e^{-n'} / N!] over Gaussian samples, with the
N-dependent weight built by a stable recursion instead of an explicit N!.
"""

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, NonFinite, NotSubunitary, PartitionMismatch

_CHUNK = 1 << 15


@dataclass(frozen=True)
class PPRun:
    """Inputs of one estimation run.

    ``squeeze_params`` are real squeezing parameters, one per input port of
    the transmission matrix ``t``; ``n_values`` are the total photon numbers
    to estimate.
    """

    squeeze_params: tuple
    t: np.ndarray
    samples: int
    seed: int
    n_values: tuple

    def __post_init__(self):
        xi = tuple(float(x) for x in self.squeeze_params)
        t = np.asarray(self.t, dtype=complex)
        if t.ndim != 2 or t.shape[1] != len(xi):
            raise LengthMismatch("one squeezing parameter per input port")
        if np.max(np.linalg.svd(t, compute_uv=False)) > 1 + 1e-10:
            raise NotSubunitary("transmission has a singular value above 1")
        if self.samples < 1:
            raise PartitionMismatch("samples must be positive")
        nv = tuple(int(n) for n in self.n_values)
        if any(n < 0 for n in nv):
            raise PartitionMismatch("photon numbers must be non-negative")
        object.__setattr__(self, "squeeze_params", xi)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "n_values", nv)


def pp_estimate(run):
    """Estimates and standard errors of Pr(N) for each N in ``run.n_values``.

    Per-mode samples alpha = u*s + i*v*d, beta = u*s - i*v*d with
    s = sqrt((nbar + mbar) / 2), d = sqrt((nbar - mbar) / 2) (complex for
    positive squeezing), nbar = sinh^2(xi), mbar = sinh(2*xi) / 2; then
    n' = sum_j alpha'_j conj(beta'_j) after the circuit.
    """
    xi = np.asarray(run.squeeze_params, dtype=float)
    nbar = np.sinh(xi) ** 2
    mbar = np.sinh(2 * xi) / 2
    s = np.sqrt((nbar + mbar).astype(complex) / 2)
    d = np.sqrt((nbar - mbar).astype(complex) / 2)
    nmax = max(run.n_values) if run.n_values else 0
    wanted = sorted(set(run.n_values))
    rng = np.random.default_rng(run.seed)
    sums = {n: 0.0 for n in wanted}
    sqsums = {n: 0.0 for n in wanted}
    remaining = run.samples
    while remaining > 0:
        batch = min(remaining, _CHUNK)
        remaining -= batch
        u = rng.standard_normal((batch, xi.size))
        v = rng.standard_normal((batch, xi.size))
        alpha = u * s + 1j * v * d
        beta = u * s - 1j * v * d
        ap = alpha @ run.t.T
        bp = beta @ run.t.T
        nprime = np.sum(ap * np.conj(bp), axis=1)
        w = np.exp(-nprime)
        if 0 in sums:
            r = w.real
            sums[0] += r.sum()
            sqsums[0] += (r * r).sum()
        for n in range(1, nmax + 1):
            w = w * nprime / n
            if n in sums:
                r = w.real
                sums[n] += r.sum()
                sqsums[n] += (r * r).sum()
        if not np.all(np.isfinite(w)):
            raise NonFinite("diverging phase-space trajectory")
    estimates = np.array([sums[n] / run.samples for n in wanted])
    variances = np.array(
        [max(sqsums[n] / run.samples - (sums[n] / run.samples) ** 2, 0.0)
         for n in wanted]
    )
    errors = np.sqrt(variances / run.samples)
    return estimates, errors
