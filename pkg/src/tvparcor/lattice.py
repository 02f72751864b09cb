"""Stage-recursive lattice fitting of time-varying PARCOR matrices.

Stage m regresses the stage-(m-1) forward prediction errors on the
backward errors lagged by m (and vice versa), each via one MDLM whose
state is the vectorized K x K coefficient matrix. Residuals feed the
next stage.

Index conventions (0-based into the original series of length T):
forward stage-m errors live on t = m .. T-1, backward stage-m errors on
t = 0 .. T-1-m; both have length T - m. Stage 0 is the series itself.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg, mdlm
from .errors import DimensionMismatch, NonFiniteInput, RangeExhausted

FORWARD = "forward"
BACKWARD = "backward"

# Minimum time points per stage: 10*K K-vector observations, i.e. 10*K^2
# scalar observations, to let the noise recursion stabilize.
MIN_POINTS_PER_K = 10


@dataclass(frozen=True)
class TimeSeries:
    """A T x K block of complete, finite observations."""

    values: np.ndarray
    labels: tuple | None = None
    sample_interval: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 1:
            raise DimensionMismatch("series must be T x K with T >= 2, K >= 1")
        if not np.all(np.isfinite(v)):
            raise NonFiniteInput("series contains non-finite values")
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != v.shape[1]:
                raise DimensionMismatch("label count != component count")
            object.__setattr__(self, "labels", labels)
        if self.sample_interval is not None and self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")

    @property
    def t_len(self):
        return self.values.shape[0]

    @property
    def k(self):
        return self.values.shape[1]

    def sample_cov(self):
        c = np.atleast_2d(np.cov(self.values.T))
        return linalg.symmetrize(c)


@dataclass(frozen=True)
class ErrorSeries:
    """Prediction-error vectors for one stage and direction."""

    stage: int
    direction: str
    start: int  # 0-based original-series index of values[0]
    values: np.ndarray  # (n, K)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def k(self):
        return self.values.shape[1]

    def at(self, t):
        """Error vector at original-series index t."""
        return self.values[t - self.start]


@dataclass(frozen=True)
class StageFit:
    """Full per-stage, per-direction artifact: the fitted regression plus
    the data that defined it (needed by DIC and the band sampler)."""

    stage: int
    direction: str
    start: int
    responses: np.ndarray  # (n, K) stage-(m-1) errors
    design_vectors: np.ndarray  # (n, K) lagged/led partner errors
    posterior: mdlm.DlmPosterior
    delta: mdlm.DiscountSpec

    @property
    def k(self):
        return self.responses.shape[1]

    def coef_trajectory(self):
        """Smoothed coefficient means as (n, K, K) matrices."""
        k = self.k
        sm = self.posterior.smoothed_mean
        return sm.reshape(-1, k, k).transpose(0, 2, 1)

    def residuals(self):
        """response_t - coef_t @ design_t over the stage range."""
        fitted = np.einsum("tkl,tl->tk", self.coef_trajectory(), self.design_vectors)
        return self.responses - fitted

    def record(self):
        post = self.posterior
        return StageRecord(stage=self.stage, direction=self.direction, start=self.start,
                           coef=self.coef_trajectory(), coef_cov=post.smoothed_cov,
                           delta=self.delta, loglik=post.loglik,
                           noise=post.final_noise())


@dataclass(frozen=True)
class StageRecord:
    """What a finished fit retains per stage and direction."""

    stage: int
    direction: str
    start: int
    coef: np.ndarray  # (n, K, K) smoothed PARCOR means
    coef_cov: np.ndarray  # (n, K^2, K^2) smoothed covariances
    delta: mdlm.DiscountSpec
    loglik: float
    noise: np.ndarray  # (K, K) final noise estimate


@dataclass(frozen=True)
class ParcorFit:
    """Complete lattice fit: stage records for both directions plus the
    final-stage forward noise covariance and fitting provenance."""

    order: int
    k: int
    t_len: int
    forward: tuple  # StageRecord, stages 1..P
    backward: tuple
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.forward) != self.order or len(self.backward) != self.order:
            raise DimensionMismatch("stage count != order")

    @property
    def residual_noise(self):
        """Final forward noise estimate, the default innovations covariance."""
        return self.forward[-1].noise

    def stage(self, m, direction):
        recs = self.forward if direction == FORWARD else self.backward
        return recs[m - 1]


def min_stage_length(k):
    return MIN_POINTS_PER_K * k


def default_prior(x, n0=1.0, s0=None, c0_scale=1.0, m0_scale=0.0):
    """Stage prior used when none is given: zero mean, identity-scaled C0,
    and S0 at the sample covariance of the series unless overridden."""
    s0 = x.sample_cov() if s0 is None else s0
    return mdlm.PriorSpec.default(x.k, n0=n0, s0=s0, c0_scale=c0_scale, m0_scale=m0_scale)


def init_stage0(x):
    """Stage-0 errors: both directions equal the observed series."""
    f0 = ErrorSeries(stage=0, direction=FORWARD, start=0, values=x.values.copy())
    b0 = ErrorSeries(stage=0, direction=BACKWARD, start=0, values=x.values.copy())
    return f0, b0


def _stage_regression(f_prev, b_prev, m, direction):
    """Responses and design vectors for one stage-m regression."""
    k = f_prev.k
    t_len = f_prev.start + f_prev.n
    n = t_len - m  # points in the stage-m range
    if n < min_stage_length(k):
        raise RangeExhausted(
            f"stage {m} has {n} usable points; needs at least {min_stage_length(k)}"
        )
    if direction == FORWARD:
        # t = m .. T-1: response f_t^{(m-1)}, design b_{t-m}^{(m-1)}
        start = m
        responses = f_prev.values[start - f_prev.start:]
        designs = b_prev.values[:n]
    else:
        # t = 0 .. T-1-m: response b_t^{(m-1)}, design f_{t+m}^{(m-1)}
        start = 0
        responses = b_prev.values[:n]
        designs = f_prev.values[m - f_prev.start:m - f_prev.start + n]
    return start, responses, designs


def fit_stage_direction(f_prev, b_prev, m, direction, prior, disc, smooth=True):
    """Fit the stage-m MDLM for one direction and wrap it as a StageFit."""
    start, responses, designs = _stage_regression(f_prev, b_prev, m, direction)
    post = mdlm.filter_run(responses, designs, prior, disc, t_lo=start)
    if smooth:
        post = mdlm.smooth_run(post, disc)
    return StageFit(stage=m, direction=direction, start=start, responses=responses,
                    design_vectors=designs, posterior=post, delta=disc)


def run_stage(f_prev, b_prev, m, prior, disc_f, disc_b):
    """One full lattice stage: fit both directions, propagate residuals.

    Parameters
    ----------
    f_prev, b_prev : ErrorSeries
        Stage m-1 forward/backward errors.
    m : int
        Stage index >= 1.
    prior : PriorSpec
        Shared by both directions.
    disc_f, disc_b : DiscountSpec
        Discounts for the forward and backward regressions.

    Returns
    -------
    (StageFit forward, StageFit backward, ErrorSeries f_next, ErrorSeries b_next)
    """
    if m != f_prev.stage + 1 or m != b_prev.stage + 1:
        raise DimensionMismatch(f"stage {m} requires stage {m - 1} inputs")
    fwd = fit_stage_direction(f_prev, b_prev, m, FORWARD, prior, disc_f)
    bwd = fit_stage_direction(f_prev, b_prev, m, BACKWARD, prior, disc_b)
    f_next = ErrorSeries(stage=m, direction=FORWARD, start=fwd.start, values=fwd.residuals())
    b_next = ErrorSeries(stage=m, direction=BACKWARD, start=bwd.start, values=bwd.residuals())
    return fwd, bwd, f_next, b_next


def fit(x, order, priors=None, discounts=None, keep_stage_fits=False):
    """Run the stage loop at a fixed order with given hyperparameters.

    Parameters
    ----------
    x : TimeSeries
    order : int
        Number of lattice stages P >= 1.
    priors : PriorSpec | list[PriorSpec] | None
        Per-stage priors (a single spec is reused for every stage).
        Defaults to :func:`default_prior`.
    discounts : list[(DiscountSpec, DiscountSpec)] | (DiscountSpec, DiscountSpec) | None
        Per-stage (forward, backward) discounts; defaults to 1 (static).
    keep_stage_fits : bool
        Also return the rich per-stage artifacts.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    p = x.k * x.k
    if priors is None:
        priors = default_prior(x)
    if isinstance(priors, mdlm.PriorSpec):
        priors = [priors] * order
    if discounts is None:
        discounts = (mdlm.DiscountSpec.uniform(1.0, p), mdlm.DiscountSpec.uniform(1.0, p))
    if isinstance(discounts, tuple):
        discounts = [discounts] * order
    if len(priors) != order or len(discounts) != order:
        raise DimensionMismatch("need one prior and one discount pair per stage")

    t0 = time.perf_counter()
    f_cur, b_cur = init_stage0(x)
    fwd_fits, bwd_fits = [], []
    for m in range(1, order + 1):
        fwd, bwd, f_cur, b_cur = run_stage(f_cur, b_cur, m, priors[m - 1],
                                           discounts[m - 1][0], discounts[m - 1][1])
        fwd_fits.append(fwd)
        bwd_fits.append(bwd)
    provenance = {
        "labels": x.labels,
        "n0": priors[0].n0,
        "wall_clock": time.perf_counter() - t0,
    }
    result = ParcorFit(order=order, k=x.k, t_len=x.t_len,
                       forward=tuple(f.record() for f in fwd_fits),
                       backward=tuple(f.record() for f in bwd_fits),
                       provenance=provenance)
    if keep_stage_fits:
        return result, fwd_fits, bwd_fits
    return result
