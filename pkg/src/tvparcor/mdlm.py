"""Multivariate dynamic linear model engine.

One engine serves every regression in the package: sequential filtering
with a discount-factor system covariance, running estimation of the
unknown observational covariance, backward (fixed-interval) smoothing,
one-step predictive log-likelihood accumulation, and posterior sampling.

The state is a p-vector evolving as a random walk whose innovation
covariance is induced by discount factors: with Delta = diag(delta^-1/2)
the prior covariance at t is R_t = Delta C_{t-1} Delta, i.e.
W_t = Delta C_{t-1} Delta - C_{t-1}. The K x p observation matrix is the
Kronecker expansion of a regression vector (see
:func:`tvparcor.linalg.kron_design`) and is stored as that vector: all
products with it exploit the block structure instead of forming the
dense matrix.

The observational covariance is unknown; a running estimate S_t is
updated after every observation by

    (n0 + t) S_t = (n0 + t - 1) S_{t-1}
                   + S_{t-1}^{1/2} Q_t^{-1/2} e_t e_t' Q_t^{-1/2} S_{t-1}^{1/2}

which converges to the true covariance when it is constant. S_{t-1}
plugs into the one-step forecast covariance Q_t, and the accumulated
log-likelihood is the normal one-step predictive density under that
plug-in (no Student-t correction).
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from . import linalg
from .errors import (DimensionMismatch, NonFiniteInput, NonFiniteState, NotFiltered,
                     NotSmoothed)


@dataclass(frozen=True)
class PriorSpec:
    """Conjugate prior for one regression: state mean/covariance plus the
    weight and expectation of the observational-covariance estimate."""

    m0: np.ndarray  # (p,)
    c0: np.ndarray  # (p, p) SPD
    n0: float
    s0: np.ndarray  # (k, k) SPD

    def __post_init__(self):
        object.__setattr__(self, "m0", np.asarray(self.m0, dtype=float))
        object.__setattr__(self, "c0", linalg.symmetrize(np.asarray(self.c0, dtype=float)))
        object.__setattr__(self, "s0", linalg.symmetrize(np.asarray(self.s0, dtype=float)))
        if self.n0 <= 0:
            raise ValueError("n0 must be positive")
        if self.c0.shape != (self.m0.size, self.m0.size):
            raise DimensionMismatch("c0 shape inconsistent with m0")

    @classmethod
    def default(cls, k, d=None, n0=1.0, s0=None, c0_scale=1.0, m0_scale=0.0):
        """Neutral prior: zero mean, scaled identity C0, identity-ish S0."""
        d = k if d is None else d
        p = k * d
        s0 = np.eye(k) if s0 is None else np.asarray(s0, dtype=float)
        return cls(m0=np.full(p, float(m0_scale)), c0=float(c0_scale) * np.eye(p),
                   n0=float(n0), s0=s0)


@dataclass(frozen=True)
class DiscountSpec:
    """Per-component discount factors in (0, 1]; 1 freezes a component."""

    delta: np.ndarray  # (p,)

    def __post_init__(self):
        d = np.asarray(self.delta, dtype=float)
        object.__setattr__(self, "delta", d)
        if d.ndim != 1 or np.any(d <= 0.0) or np.any(d > 1.0):
            raise ValueError("discount factors must lie in (0, 1]")

    @classmethod
    def uniform(cls, value, p):
        return cls(np.full(p, float(value)))

    @property
    def scalar(self):
        """The shared value if all components are equal, else None."""
        v = self.delta[0]
        return float(v) if np.all(self.delta == v) else None


@dataclass(frozen=True)
class DlmPosterior:
    """Filtered (and optionally smoothed) moments of one regression run.

    Arrays are indexed by step i = 0..n-1 corresponding to original-series
    times t = t_lo + i, with t_hi = t_lo + n - 1.
    """

    t_lo: int
    t_hi: int
    filtered_mean: np.ndarray  # (n, p)
    filtered_cov: np.ndarray  # (n, p, p)
    noise_est: np.ndarray  # (n, k, k) running S_t
    forecast_err: np.ndarray  # (n, k)
    forecast_cov: np.ndarray  # (n, k, k)
    loglik: float
    smoothed_mean: np.ndarray | None = None  # (n, p)
    smoothed_cov: np.ndarray | None = None  # (n, p, p)

    @property
    def n_steps(self):
        return self.t_hi - self.t_lo + 1

    @property
    def state_dim(self):
        return self.filtered_mean.shape[1]

    @property
    def obs_dim(self):
        return self.forecast_err.shape[1]

    def final_noise(self):
        return self.noise_est[-1]

    def moments(self, which):
        if which == "filtered":
            if self.filtered_mean is None:
                raise NotFiltered("posterior lacks filtered moments")
            return self.filtered_mean, self.filtered_cov
        if which == "smoothed":
            if self.smoothed_mean is None:
                raise NotSmoothed("posterior lacks smoothed moments; run smooth_run first")
            return self.smoothed_mean, self.smoothed_cov
        raise ValueError(f"unknown moment set {which!r}")


def _design_apply(state, v, k):
    # (v' kron I_k) @ state without forming the design: reshape the state
    # into its k x d coefficient matrix and multiply by v.
    return state.reshape(v.size, k).T @ v


def _chol_inverse_pieces(q):
    """Cholesky of q with clamped-eigendecomposition fallback.

    Returns (solve, logdet) where solve(b) computes q^{-1} b.
    """
    try:
        chol = np.linalg.cholesky(q)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))

        def solve(b):
            return sla.cho_solve((chol, True), b)

        return solve, logdet
    except np.linalg.LinAlgError:
        w, qmat = linalg.clamped_eigh(q)
        logdet = float(np.sum(np.log(w)))

        def solve(b):
            return qmat @ ((qmat.T @ b).T / w).T

        return solve, logdet


def filter_run(responses, design_vectors, prior, disc, t_lo=0, update_noise=True):
    """Sequential filter for one Kronecker-design regression.

    Parameters
    ----------
    responses : array (n, k)
        Observation vectors in time order.
    design_vectors : array (n, d)
        Regression vectors; the observation matrix at step i is
        ``kron_design(design_vectors[i], k)``.
    prior : PriorSpec
        State/noise prior; ``len(prior.m0)`` must equal k*d.
    disc : DiscountSpec
        Discount factors for the p = k*d state components.
    t_lo : int
        Original-series index of the first step (bookkeeping only).
    update_noise : bool
        When False, the noise estimate is held at ``prior.s0`` (used by
        oracle tests and known-noise comparisons).

    Returns
    -------
    DlmPosterior with filtered moments and accumulated log-likelihood.
    """
    y = np.asarray(responses, dtype=float)
    vs = np.asarray(design_vectors, dtype=float)
    if y.ndim != 2 or vs.ndim != 2 or y.shape[0] != vs.shape[0]:
        raise DimensionMismatch("responses and designs must be (n, k) and (n, d) with equal n")
    n, k = y.shape
    d = vs.shape[1]
    p = k * d
    if prior.m0.size != p:
        raise DimensionMismatch(f"prior state dimension {prior.m0.size} != k*d = {p}")
    if prior.s0.shape != (k, k):
        raise DimensionMismatch("prior.s0 inconsistent with response dimension")
    if disc.delta.size != p:
        raise DimensionMismatch("discount vector inconsistent with state dimension")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(vs))):
        raise NonFiniteInput("non-finite responses or designs")

    dd = disc.delta ** -0.5
    discount_scale = np.outer(dd, dd)
    static = bool(np.all(disc.delta == 1.0))

    m = prior.m0.copy()
    c = linalg.symmetrize(prior.c0.copy())
    s = linalg.symmetrize(prior.s0.copy())
    n0 = prior.n0

    means = np.empty((n, p))
    covs = np.empty((n, p, p))
    noises = np.empty((n, k, k))
    errs = np.empty((n, k))
    qcovs = np.empty((n, k, k))
    loglik = 0.0

    for i in range(n):
        v = vs[i]
        r = c if static else c * discount_scale
        # Q = B R B' + S and R B' via the Kronecker block structure.
        rbt = np.einsum("pjk,j->pk", r.reshape(p, d, k), v)
        q = np.einsum("jkl,j->kl", rbt.reshape(d, k, k), v) + s
        q = linalg.symmetrize(q)
        e = y[i] - _design_apply(m, v, k)
        solve, logdet = _chol_inverse_pieces(q)
        u = solve(rbt.T).T  # (p, k) gain
        m = m + u @ e
        c = linalg.symmetrize(r - u @ (q @ u.T))
        loglik += -0.5 * (k * np.log(2.0 * np.pi) + logdet + e @ solve(e))
        if update_noise:
            tau = i + 1
            s_half = linalg.sym_sqrt(s)
            q_inv_half = linalg.sym_inv_sqrt(q)
            w = s_half @ (q_inv_half @ e)
            s = linalg.symmetrize(((n0 + tau - 1.0) * s + np.outer(w, w)) / (n0 + tau))
        if not (np.all(np.isfinite(m)) and np.isfinite(loglik)):
            raise NonFiniteState(f"filter diverged at step {i} (t={t_lo + i})")
        means[i] = m
        covs[i] = c
        noises[i] = s
        errs[i] = e
        qcovs[i] = q

    if not (np.all(np.isfinite(covs)) and np.all(np.isfinite(noises))):
        raise NonFiniteState("filter produced non-finite covariances")
    return DlmPosterior(t_lo=t_lo, t_hi=t_lo + n - 1, filtered_mean=means,
                        filtered_cov=covs, noise_est=noises, forecast_err=errs,
                        forecast_cov=qcovs, loglik=float(loglik))


def smooth_run(post, disc):
    """Backward fixed-interval smoother for a random-walk-state run.

    Uses the standard symmetric recursion with prior mean a_{t+1} = m_t
    and prior covariance R_{t+1} = Delta C_t Delta. With a single shared
    discount, R_{t+1} is proportional to C_t and the smoothing gain
    collapses to delta * I, which the implementation exploits.
    """
    if post.filtered_mean is None:
        raise NotFiltered("smooth_run requires a filtered posterior")
    n, p = post.filtered_mean.shape
    if disc.delta.size != p:
        raise DimensionMismatch("discount vector inconsistent with state dimension")
    m = post.filtered_mean
    c = post.filtered_cov
    s_mean = np.empty_like(m)
    s_cov = np.empty_like(c)
    s_mean[n - 1] = m[n - 1]
    s_cov[n - 1] = c[n - 1]

    scalar = disc.scalar
    if scalar is not None:
        delta = scalar
        for t in range(n - 2, -1, -1):
            # m_t + delta (s_{t+1} - m_t), written so delta = 1 is exact.
            s_mean[t] = (1.0 - delta) * m[t] + delta * s_mean[t + 1]
            s_cov[t] = linalg.symmetrize((1.0 - delta) * c[t] + delta * delta * s_cov[t + 1])
    else:
        dd = disc.delta ** -0.5
        discount_scale = np.outer(dd, dd)
        for t in range(n - 2, -1, -1):
            r_next = c[t] * discount_scale
            j = np.linalg.solve(r_next, c[t].T).T
            s_mean[t] = m[t] - j @ (m[t] - s_mean[t + 1])
            s_cov[t] = linalg.symmetrize(c[t] - j @ (r_next - s_cov[t + 1]) @ j.T)
    return replace(post, smoothed_mean=s_mean, smoothed_cov=s_cov)


def batched_sqrt_factors(covs):
    """Per-step transform factors L_t with L_t L_t' = cov_t.

    Tries one batched Cholesky; on failure falls back to per-step
    Cholesky with a clamped-eigendecomposition rescue, so degenerate
    (zero) covariances yield zero factors rather than errors.
    """
    try:
        return np.linalg.cholesky(covs)
    except np.linalg.LinAlgError:
        out = np.empty_like(covs)
        for t in range(covs.shape[0]):
            try:
                out[t] = np.linalg.cholesky(covs[t])
            except np.linalg.LinAlgError:
                w, q = np.linalg.eigh(linalg.symmetrize(covs[t]))
                out[t] = q * np.sqrt(np.maximum(w, 0.0))
        return out


def sample_states(post, which, n_samples, seed, rng=None):
    """Independent draws from the per-step state distributions.

    Returns an array (n_samples, n, p); draws are N(mean_t, cov_t),
    independent across t, reproducible under ``seed`` (or under a
    caller-supplied ``rng``, in which case ``seed`` is ignored).
    """
    mean, cov = post.moments(which)
    if rng is None:
        from .rng import derive

        rng = derive(seed, "states")
    factors = batched_sqrt_factors(cov)
    z = rng.standard_normal((int(n_samples), *mean.shape))
    return mean[None] + np.einsum("tpq,stq->stp", factors, z)
