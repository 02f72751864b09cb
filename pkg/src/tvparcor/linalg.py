"""Dense symmetric-matrix kernels and the Kronecker design expansion.

Conventions pinned here and relied on everywhere else:

* ``vec`` stacks matrix columns (column-major), so
  ``kron_design(v) @ vec(M) == M @ v`` for any K x K matrix ``M``.
* SPD operations symmetrize their input as ``(a + a.T) / 2`` and clamp
  eigenvalues below ``spd_floor(a)`` before factorizing, because the
  noise/forecast covariance recursions can graze singularity on short
  series.
"""

import numpy as np
import scipy.linalg as sla

from .errors import NonFiniteInput, NotSymmetric

# Relative asymmetry beyond which a matrix is rejected outright.
SYM_TOL = 1e-8


def vec(m):
    """Column-stack a matrix into a vector."""
    return np.asarray(m).flatten(order="F")


def unvec(v, k, d=None):
    """Inverse of :func:`vec`; reshapes a length k*d vector to k x d."""
    v = np.asarray(v)
    if d is None:
        d = v.size // k
    return v.reshape((k, d), order="F")


def symmetrize(a):
    """Return (a + a.T) / 2; used on entry to every SPD operation."""
    return (a + np.swapaxes(a, -1, -2)) / 2.0


def spd_floor(a):
    """Eigenvalue floor used when clamping near-singular matrices."""
    dim = a.shape[-1]
    tr = np.trace(a, axis1=-2, axis2=-1)
    return 1e-12 * np.maximum(tr, 0.0) / dim


def _checked_symmetric(a):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput("matrix contains non-finite entries")
    scale = np.max(np.abs(a), initial=0.0)
    asym = np.max(np.abs(a - np.swapaxes(a, -1, -2)), initial=0.0)
    if asym > SYM_TOL * max(scale, 1.0):
        raise NotSymmetric(f"relative asymmetry {asym / max(scale, 1.0):.3e} exceeds {SYM_TOL:.0e}")
    return symmetrize(a)


def clamped_eigh(a):
    """Eigendecomposition of a symmetrized matrix with eigenvalues clamped
    at :func:`spd_floor`. Accepts stacked matrices (..., n, n)."""
    a = _checked_symmetric(a)
    w, q = np.linalg.eigh(a)
    floor = np.expand_dims(spd_floor(a), -1)
    w = np.maximum(w, floor)
    return w, q


def sym_sqrt(a):
    """Symmetric square root via spectral decomposition.

    Eigenvalues below the SPD floor are clamped before rooting, so the
    result satisfies ``r @ r == a`` only up to that clamping.
    """
    w, q = clamped_eigh(a)
    return symmetrize((q * np.sqrt(w)[..., None, :]) @ np.swapaxes(q, -1, -2))


def sym_inv_sqrt(a):
    """Symmetric inverse square root: returns r with r @ a @ r == identity."""
    w, q = clamped_eigh(a)
    return symmetrize((q / np.sqrt(w)[..., None, :]) @ np.swapaxes(q, -1, -2))


def sym_inv(a):
    """SPD inverse with the same clamping policy as :func:`sym_sqrt`."""
    w, q = clamped_eigh(a)
    return symmetrize((q / w[..., None, :]) @ np.swapaxes(q, -1, -2))


def kron_design(v, k=None):
    """Expand a regression vector into the design matrix (v' kron I_k).

    For ``v`` of length d the result is k x (d*k) and satisfies
    ``kron_design(v, k) @ vec(M) == M @ v`` for any k x d matrix ``M``.
    ``k`` defaults to ``len(v)`` (the square case used by the lattice).
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput("design vector contains non-finite entries")
    if k is None:
        k = v.size
    return np.kron(v, np.eye(k))


def gaussian_logpdf(e, cov):
    """Log density of N(0, cov) at e, via Cholesky with eigenvalue-clamped
    fallback for numerically indefinite covariances."""
    e = np.asarray(e, dtype=float)
    cov = symmetrize(np.asarray(cov, dtype=float))
    k = e.size
    try:
        chol = np.linalg.cholesky(cov)
        u = sla.solve_triangular(chol, e, lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        quad = u @ u
    except np.linalg.LinAlgError:
        w, q = clamped_eigh(cov)
        logdet = np.sum(np.log(w))
        u = q.T @ e
        quad = np.sum(u * u / w)
    return -0.5 * (k * np.log(2.0 * np.pi) + logdet + quad)
