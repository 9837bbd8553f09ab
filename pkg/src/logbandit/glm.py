"""Logistic maximum likelihood on fixed designs.

Contains the damped-Newton MLE, the fixed-design mean-parameter
confidence width and its sample-size requirement gamma(d, n, delta),
the warmup-condition check, and the one-dimensional natural-parameter
estimators (plain MLE with boundary convention, add-half smoothed
estimator) together with their exact binomial bias oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import core
from .core import mu, mudot
from .errors import DegenerateDesign, DimensionMismatch, InvalidDelta, Singular

__all__ = [
    "PullLog",
    "MleResult",
    "GammaParams",
    "WarmupCheck",
    "gamma",
    "fit_mle",
    "mean_conf_width",
    "warmup_check",
    "kt_estimate",
    "mle_1d_natural",
    "exact_bias_1d",
]

DELTA_MAX = math.exp(-1.0)


class PullLog:
    """Aggregated fixed-design data: per-arm pull and success counts.

    The Bernoulli likelihood depends on the data only through these
    counts, so individual rewards are never stored.
    """

    def __init__(self, k):
        self.pulls = np.zeros(k, dtype=np.int64)
        self.successes = np.zeros(k, dtype=np.int64)

    def record(self, arm_index, successes, pulls):
        if pulls < 0 or not (0 <= successes <= pulls):
            raise ValueError("need 0 <= successes <= pulls")
        self.pulls[arm_index] += pulls
        self.successes[arm_index] += successes

    @property
    def t(self):
        """Total number of pulls."""
        return int(self.pulls.sum())

    @property
    def t_eff(self):
        """Number of distinct arms with at least one pull."""
        return int(np.count_nonzero(self.pulls))

    @property
    def pulled(self):
        """Indices of arms with at least one pull."""
        return np.flatnonzero(self.pulls)

    @staticmethod
    def from_counts(pulls, successes):
        pulls = np.asarray(pulls, dtype=np.int64)
        successes = np.asarray(successes, dtype=np.int64)
        if pulls.shape != successes.shape:
            raise ValueError("pulls and successes must have the same shape")
        if np.any(successes < 0) or np.any(successes > pulls):
            raise ValueError("need 0 <= successes <= pulls per arm")
        log = PullLog(pulls.size)
        log.pulls[:] = pulls
        log.successes[:] = successes
        return log


@dataclass
class MleResult:
    theta_hat: np.ndarray
    converged: bool
    iterations: int
    grad_norm: float
    regularizer_used: float


@dataclass
class GammaParams:
    d: int
    n: int
    delta: float

    def value(self):
        return gamma(self.d, self.n, self.delta)


@dataclass
class WarmupCheck:
    xi2: float
    satisfied: bool
    gamma_value: float


def _check_delta(delta):
    if not (0.0 < delta <= DELTA_MAX + 1e-15):
        raise InvalidDelta("delta must lie in (0, e^-1], got %r" % (delta,))


def gamma(d, n, delta):
    """Sample-size requirement max{d + log(6(2+n)/delta), 6.1^2 log(6(2+n)/delta)}.

    Nondecreasing in d and n, nonincreasing in delta.
    """
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    _check_delta(delta)
    log_term = math.log(6.0 * (2.0 + n) / delta)
    return max(d + log_term, 6.1**2 * log_term)


def _log_likelihood(z, successes, failures, l2_eps, theta):
    # log mu and log(1-mu) via log_expit, stable at |z| up to ~700
    ll = float(successes @ core.log_mu(z) + failures @ core.log_mu(-z))
    if l2_eps > 0.0:
        ll -= 0.5 * l2_eps * float(theta @ theta)
    return ll


def fit_mle(arms, pulls, tol=1e-10, max_iter=100, l2_eps=1e-9, norm_cap=None):
    """Maximize the Bernoulli log-likelihood with damped Newton steps.

    The objective is sum_i [s_i log mu(x_i.theta) + (n_i - s_i) log(1 - mu)]
    minus (l2_eps/2)||theta||^2.  Each Newton step is backtracked until an
    Armijo condition holds; with ``norm_cap`` the iterate is projected onto
    the Euclidean ball of that radius after every step.  Convergence means
    the gradient norm of the regularized objective fell below ``tol``.
    """
    if pulls.t < 1:
        raise ValueError("need at least one pull")
    idx = pulls.pulled
    x = arms.subset(idx)
    n = pulls.pulls[idx].astype(float)
    s = pulls.successes[idx].astype(float)
    f = n - s
    d = arms.d
    if l2_eps == 0.0 and np.linalg.matrix_rank(x) < d:
        raise DegenerateDesign(
            "pulled arms span only %d of %d dimensions and l2_eps = 0"
            % (np.linalg.matrix_rank(x), d)
        )

    theta = np.zeros(d)
    z = x @ theta
    obj = _log_likelihood(z, s, f, l2_eps, theta)
    best_theta, best_obj = theta, obj
    grad_norm = math.inf
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        p = mu(z)
        grad = x.T @ (s - n * p) - l2_eps * theta
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            converged = True
            break
        w = n * mudot(z)
        hess = (x * w[:, None]).T @ x + l2_eps * np.eye(d)
        try:
            step = core.spd_solve(hess, grad)
        except Singular:
            # saturated likelihood flattens the Hessian; nudge it
            step = core.spd_solve(hess, grad, ridge=max(core.default_ridge(hess), 1e-300))
        # backtracking line search (Armijo) on the concave objective; once
        # the predicted gain falls below the objective's float resolution
        # the test can never verify, so take the full Newton step as is
        alpha = 1.0
        slope = float(grad @ step)
        plateau = slope <= 1e-12 * (1.0 + abs(obj))
        accepted = False
        while alpha > 2.0**-60:
            cand = theta + alpha * step
            if norm_cap is not None:
                nrm = float(np.linalg.norm(cand))
                if nrm > norm_cap:
                    cand = cand * (norm_cap / nrm)
            z_cand = x @ cand
            obj_cand = _log_likelihood(z_cand, s, f, l2_eps, cand)
            if plateau or obj_cand >= obj + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        theta, z, obj = cand, z_cand, obj_cand
        if obj > best_obj:
            best_theta, best_obj = theta, obj

    if not converged:
        # report the best iterate seen with its own gradient norm
        theta = best_theta
        z = x @ theta
        grad = x.T @ (s - n * mu(z)) - l2_eps * theta
        grad_norm = float(np.linalg.norm(grad))
        converged = grad_norm <= tol
    return MleResult(
        theta_hat=theta,
        converged=converged,
        iterations=iterations,
        grad_norm=grad_norm,
        regularizer_used=l2_eps,
    )


def mean_conf_width(x, h, t_eff, k, delta, theta, ridge=0.0):
    """Fixed-design confidence width on the mean parameter mu(x.theta).

    4.8 * mudot(x.theta) * ||x||_{H^{-1}} * sqrt(log(2(2+t_eff)K/delta)),
    valid once the logged design satisfies the warmup condition.
    """
    _check_delta(delta)
    x = np.asarray(x, dtype=float).ravel()
    theta = np.asarray(theta, dtype=float).ravel()
    if x.size != theta.size:
        raise DimensionMismatch("x and theta dimensions differ")
    lever = core.inv_quad(h, x, ridge=ridge)
    log_term = math.log(2.0 * (2.0 + t_eff) * k / delta)
    return 4.8 * float(mudot(x @ theta)) * math.sqrt(lever) * math.sqrt(log_term)


def warmup_check(arms, pulls, theta, delta):
    """Check the warmup condition on logged pulls at a given parameter.

    xi2 is the largest inverse-information leverage among pulled arms;
    the condition holds when xi2 <= 1 / gamma(d, t_eff, delta).
    """
    if pulls.t < 1:
        raise ValueError("need at least one pull")
    h = core.fisher_counts(arms, pulls, theta)
    xs = arms.subset(pulls.pulled)
    xi2 = float(core.inv_quad_many(h, xs).max())
    gam = gamma(arms.d, pulls.t_eff, delta)
    return WarmupCheck(xi2=xi2, satisfied=xi2 <= 1.0 / gam, gamma_value=gam)


def kt_estimate(successes, n):
    """Add-half smoothed log-odds estimate log((H + 1/2) / (N - H + 1/2))."""
    if n < 1:
        raise ValueError("need n >= 1")
    return math.log((successes + 0.5) / (n - successes + 0.5))


def mle_1d_natural(successes, n):
    """One-dimensional natural-parameter MLE log(p/(1-p)) with p = H/N.

    At the boundaries the undefined estimate is replaced by the
    convention p = (N - 1/2)/N for all successes and p = (1/2)/N for
    none, keeping the estimator finite and antisymmetric.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if successes == 0:
        p = 0.5 / n
    elif successes == n:
        p = (n - 0.5) / n
    else:
        p = successes / n
    return math.log(p / (1.0 - p))


def _binom_logpmf(n, prob):
    h = np.arange(n + 1)
    return (
        gammaln(n + 1.0)
        - gammaln(h + 1.0)
        - gammaln(n - h + 1.0)
        + h * math.log(prob)
        + (n - h) * math.log1p(-prob)
    )


def exact_bias_1d(estimator, c, n):
    """Exact bias of a 1-d natural-parameter estimator at parameter c.

    Enumerates the full Binomial(n, mu(c)) distribution (log-domain pmf,
    feasible up to n = 10^6) and returns E[estimator(H, n)] - c.
    """
    if n < 1 or n > 10**6:
        raise ValueError("need 1 <= n <= 1e6")
    estimator = estimator.lower()
    h = np.arange(n + 1, dtype=float)
    if estimator == "kt":
        est = np.log(h + 0.5) - np.log(n - h + 0.5)
    elif estimator == "mle":
        p = h / n
        p[0] = 0.5 / n
        p[-1] = (n - 0.5) / n
        est = np.log(p) - np.log1p(-p)
    else:
        raise ValueError("estimator must be 'mle' or 'kt'")
    pmf = np.exp(_binom_logpmf(n, float(mu(c))))
    return float(pmf @ est) - c
