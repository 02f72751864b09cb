"""Pointwise conversion between PARCOR matrices and VAR coefficients.

The up-step is the multivariate Durbin-Levinson recursion: starting
from the stage matrices, for m = 1..P and j = 1..m-1

    A_j^(m) = A_j^(m-1) - A_m^(m) D_{m-j}^(m-1)
    D_j^(m) = D_j^(m-1) - D_m^(m) A_{m-j}^(m-1)

with A_m^(m) and D_m^(m) equal to the stage-m forward/backward PARCOR
matrices. The down-step inverts the same pair jointly:

    A_j^(m-1) = (I - A_m^(m) D_m^(m))^-1 (A_j^(m) + A_m^(m) D_{m-j}^(m))

and symmetrically for D. Everything is pointwise in t and vectorized
over a common time range.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RangeMismatch, SingularStage

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class TvvarCoefficients:
    """Time-indexed VAR coefficient matrices at one order.

    ``forward[i, j-1]`` is the lag-j forward coefficient at original-series
    index ``t_start + i``; ``backward`` holds the backward (time-reversed)
    coefficients and may be None for fits that only provide the forward
    representation.
    """

    order: int
    k: int
    t_start: int
    forward: np.ndarray  # (n, P, K, K)
    backward: np.ndarray | None = None

    def __post_init__(self):
        f = np.asarray(self.forward, dtype=float)
        object.__setattr__(self, "forward", f)
        if f.shape[1] != self.order or f.shape[2] != self.k or f.shape[3] != self.k:
            raise DimensionMismatch("forward array shape inconsistent with order/k")
        if self.backward is not None:
            b = np.asarray(self.backward, dtype=float)
            object.__setattr__(self, "backward", b)
            if b.shape != f.shape:
                raise DimensionMismatch("backward array shape != forward array shape")

    @property
    def n(self):
        return self.forward.shape[0]

    @property
    def t_stop(self):
        """One past the last valid original-series index."""
        return self.t_start + self.n

    def at(self, t):
        if not self.t_start <= t < self.t_stop:
            raise RangeMismatch(f"t={t} outside [{self.t_start}, {self.t_stop})")
        return self.forward[t - self.t_start]


def _aligned_stage_arrays(fit):
    """Stack per-stage PARCOR trajectories on the common time range.

    Returns (t_start, lam, theta) with lam/theta of shape (n, P, K, K),
    where the common range is [P, T-1-P] in 0-based series indices.
    """
    p, k, t_len = fit.order, fit.k, fit.t_len
    t_start, t_stop = p, t_len - p
    if t_stop <= t_start:
        raise RangeMismatch("stage ranges have empty intersection (series too short)")
    n = t_stop - t_start
    lam = np.empty((n, p, k, k))
    theta = np.empty((n, p, k, k))
    for m in range(1, p + 1):
        fr = fit.stage(m, "forward")
        br = fit.stage(m, "backward")
        lam[:, m - 1] = fr.coef[t_start - fr.start:t_start - fr.start + n]
        theta[:, m - 1] = br.coef[t_start - br.start:t_start - br.start + n]
    return t_start, lam, theta


def stages_to_tvvar(lam, theta):
    """Up-step on stacked stage arrays (n, P, K, K) -> (A, D) same shape."""
    lam = np.asarray(lam, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if lam.shape != theta.shape:
        raise DimensionMismatch("forward/backward stage arrays differ in shape")
    n, p, k, _ = lam.shape
    a_prev = np.zeros((n, 0, k, k))
    d_prev = np.zeros((n, 0, k, k))
    for m in range(1, p + 1):
        a_cur = np.empty((n, m, k, k))
        d_cur = np.empty((n, m, k, k))
        a_cur[:, m - 1] = lam[:, m - 1]
        d_cur[:, m - 1] = theta[:, m - 1]
        for j in range(1, m):
            a_cur[:, j - 1] = a_prev[:, j - 1] - np.matmul(lam[:, m - 1], d_prev[:, m - j - 1])
            d_cur[:, j - 1] = d_prev[:, j - 1] - np.matmul(theta[:, m - 1], a_prev[:, m - j - 1])
        a_prev, d_prev = a_cur, d_cur
    return a_prev, d_prev


def parcor_to_tvvar(fit):
    """Convert a ParcorFit to VAR coefficients on the common time range.

    The emitted range is the intersection [P, T-1-P] of all stage ranges;
    the trimmed edges are recorded implicitly via ``t_start``.
    """
    t_start, lam, theta = _aligned_stage_arrays(fit)
    a, d = stages_to_tvvar(lam, theta)
    return TvvarCoefficients(order=fit.order, k=fit.k, t_start=t_start, forward=a, backward=d)


def tvvar_to_parcor(forward, backward=None):
    """Down-step: recover per-stage PARCOR matrices from order-P arrays.

    Parameters
    ----------
    forward, backward : array (n, P, K, K) or a single TvvarCoefficients
        Order-P forward and backward coefficient arrays (pointwise in t).

    Returns
    -------
    (lam, theta) arrays of shape (n, P, K, K): stage-m matrices at [:, m-1].
    """
    if isinstance(forward, TvvarCoefficients):
        if forward.backward is None:
            raise DimensionMismatch("coefficients lack a backward representation")
        forward, backward = forward.forward, forward.backward
    a_cur = np.array(forward, dtype=float)
    d_cur = np.array(backward, dtype=float)
    if a_cur.shape != d_cur.shape:
        raise DimensionMismatch("forward/backward arrays differ in shape")
    n, p, k, _ = a_cur.shape
    lam = np.empty((n, p, k, k))
    theta = np.empty((n, p, k, k))
    eye = np.eye(k)
    for m in range(p, 0, -1):
        lam[:, m - 1] = a_cur[:, m - 1]
        theta[:, m - 1] = d_cur[:, m - 1]
        if m == 1:
            break
        ga = eye - np.matmul(a_cur[:, m - 1], d_cur[:, m - 1])
        gd = eye - np.matmul(d_cur[:, m - 1], a_cur[:, m - 1])
        conds = np.maximum(np.linalg.cond(ga), np.linalg.cond(gd))
        bad = ~np.isfinite(conds) | (conds > _COND_LIMIT)
        if np.any(bad):
            raise SingularStage(
                f"stage {m} down-step singular at {int(np.count_nonzero(bad))} time point(s)"
            )
        a_next = np.empty((n, m - 1, k, k))
        d_next = np.empty((n, m - 1, k, k))
        for j in range(1, m):
            rhs_a = a_cur[:, j - 1] + np.matmul(a_cur[:, m - 1], d_cur[:, m - j - 1])
            rhs_d = d_cur[:, j - 1] + np.matmul(d_cur[:, m - 1], a_cur[:, m - j - 1])
            a_next[:, j - 1] = np.linalg.solve(ga, rhs_a)
            d_next[:, j - 1] = np.linalg.solve(gd, rhs_d)
        a_cur, d_cur = a_next, d_next
    return lam, theta
