"""Warmup procedures that buy an initial estimate before regret rounds.

Three interchangeable strategies produce a ``WarmupReport``:

* ``naive_warmup`` plans against the worst-case variance mudot(||x|| S)
  for a known norm bound S — simple but exponentially expensive in S;
* ``war`` (warmup-aware-of-responses) first probes a cheap spanning
  design with Bernstein stopping to classify arms as high- or
  low-variance, propagates those single-arm intervals to relative bounds
  for every arm, then plans a pessimistic design that adapts to the
  instance;
* ``oracle_warmup`` plans the G-optimal design at the true parameter —
  a lower-bound reference, not a deployable strategy.

All sampling flows through an ``Environment``-like object exposing
``pull_block`` and is optionally metered by a ``SampleBudget`` and
mirrored into a regret ledger.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logit

from . import core
from .core import ArmSet, mudot
from .design import pessimistic_design, two_approx_design
from .errors import BudgetExhausted, LoopCap, RankDeficient
from .glm import PullLog, fit_mle, gamma

__all__ = [
    "UNDECIDED",
    "ACCEPTED",
    "REJECTED",
    "SampleBudget",
    "BernsteinTracker",
    "ConfidenceSummary",
    "WarParams",
    "WarmupReport",
    "bernstein_width",
    "natural_bounds",
    "decide_arm",
    "optimistic_mudot",
    "pessimistic_mudot",
    "war",
    "naive_warmup",
    "oracle_warmup",
    "warmup_sample_count",
]

log = logging.getLogger(__name__)

UNDECIDED = "undecided"
ACCEPTED = "accepted"
REJECTED = "rejected"

_MEAN_CLAMP = 1e-12
MAX_PROBE_ROUNDS = 64


class SampleBudget:
    """Counts pulls against an optional hard limit."""

    def __init__(self, limit=None):
        if limit is not None and limit < 0:
            raise ValueError("budget limit must be nonnegative")
        self.limit = limit
        self.used = 0

    @property
    def remaining(self):
        if self.limit is None:
            return None
        return self.limit - self.used

    def take(self, n):
        """Grant up to n pulls, raising BudgetExhausted when none remain."""
        if n < 0:
            raise ValueError("cannot take a negative number of pulls")
        if self.limit is None:
            self.used += n
            return n
        left = self.limit - self.used
        if left <= 0:
            raise BudgetExhausted("sample budget exhausted after %d pulls" % self.used)
        granted = min(n, left)
        self.used += granted
        return granted


def bernstein_width(mu_hat, n, delta, k):
    """Anytime empirical-Bernstein half-width for a Bernoulli mean.

    Valid simultaneously over all sample sizes for each of k arms via a
    per-(arm, n) failure share delta / (k n (n+1)).
    """
    if n < 1:
        raise ValueError("need at least one sample")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if k < 1:
        raise ValueError("k must be at least 1")
    level = math.log(3.0 * k * n * (n + 1) / delta)
    var = mu_hat * (1.0 - mu_hat)
    return math.sqrt(2.0 * var * level / n) + 3.0 * level / n


def natural_bounds(mu_hat, width):
    """Map a mean interval to bounds on the natural-parameter magnitude.

    Returns (lo, hi) with lo <= |logit(mu)| <= hi for every mu in the
    clamped interval [mu_hat - width, mu_hat + width]; lo is zero whenever
    the interval straddles one half.
    """
    a = min(max(mu_hat - width, _MEAN_CLAMP), 1.0 - _MEAN_CLAMP)
    b = min(max(mu_hat + width, _MEAN_CLAMP), 1.0 - _MEAN_CLAMP)
    za = float(logit(a))
    zb = float(logit(b))
    hi = max(abs(za), abs(zb))
    lo = 0.0 if za <= 0.0 <= zb else min(abs(za), abs(zb))
    return lo, hi


class BernsteinTracker:
    """Per-arm pull totals with anytime mean and natural-magnitude intervals."""

    def __init__(self, arms: ArmSet, delta):
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        self.k = len(arms)
        self.delta = float(delta)
        self.pulls = np.zeros(self.k, dtype=np.int64)
        self.successes = np.zeros(self.k, dtype=np.int64)
        self.width = np.full(self.k, math.inf)
        self.lo = np.zeros(self.k)
        self.hi = np.full(self.k, math.inf)
        self.status = np.array([UNDECIDED] * self.k, dtype=object)

    def update(self, arm, successes, pulls):
        if pulls < 1 or not 0 <= successes <= pulls:
            raise ValueError("invalid pull block")
        self.pulls[arm] += pulls
        self.successes[arm] += successes
        n = int(self.pulls[arm])
        mu_hat = self.successes[arm] / n
        w = bernstein_width(mu_hat, n, self.delta, self.k)
        self.width[arm] = w
        self.lo[arm], self.hi[arm] = natural_bounds(mu_hat, w)

    def mark(self, arm, status):
        if status not in (ACCEPTED, REJECTED):
            raise ValueError("status must be accepted or rejected")
        if self.status[arm] not in (UNDECIDED, status):
            raise ValueError("arm %d is already %s" % (arm, self.status[arm]))
        self.status[arm] = status


@dataclass
class ConfidenceSummary:
    """Probed arms with per-arm bounds on |z^T theta| and the norm cap s."""

    vectors: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    s: float

    @staticmethod
    def from_tracker(tracker: BernsteinTracker, arms: ArmSet, s):
        idx = np.flatnonzero(tracker.pulls > 0)
        vectors = arms.vectors[idx]
        hi = np.minimum(tracker.hi[idx], s * arms.norms[idx])
        lo = np.minimum(tracker.lo[idx], hi)
        return ConfidenceSummary(vectors=vectors, lo=lo, hi=hi, s=float(s))

    def __len__(self):
        return self.vectors.shape[0]


def optimistic_mudot(x, summary: ConfidenceSummary):
    """Largest variance mudot(x^T theta) consistent with the summary.

    Decomposes x along each probed direction z: any consistent theta has
    |x^T theta| >= |c| lo_z - s ||x - c z|| with c = x^T z / ||z||^2, so
    the best case is the smallest certified magnitude over all such
    lower bounds (never below zero).
    """
    x = np.asarray(x, dtype=float).ravel()
    lo_rel = 0.0
    if len(summary) > 0:
        z = summary.vectors
        zz = np.einsum("ij,ij->i", z, z)
        c = (z @ x) / zz
        resid = np.linalg.norm(x[None, :] - c[:, None] * z, axis=1)
        cand = np.abs(c) * summary.lo - summary.s * resid
        lo_rel = max(0.0, float(cand.max()))
    return float(mudot(lo_rel))


def pessimistic_mudot(x, summary: ConfidenceSummary):
    """Smallest variance mudot(x^T theta) consistent with the summary.

    Combines certified magnitude caps on |x^T theta|: the global s ||x||;
    the arm's own interval when x was itself probed; the ellipsoidal bound
    sqrt(2 m) ||x|| in the norm of (M + (m/s^2) I)^{-1} with
    M = sum_z z z^T / hi_z^2, which aggregates every probed upper interval
    into a constraint on theta; and, per probed arm z, the exact maximum
    of |x^T theta| over the ball intersected with lo_z <= |z^T theta| <=
    hi_z alone.  Writing u = z/||z||, c1 = |x^T u|, c2 = ||x - (x^T u)u||
    and a = |u^T theta|, that maximum is c1 a + c2 sqrt(s^2 - a^2)
    maximized over the feasible a-interval — concave in a, so attained at
    the unconstrained peak s c1/||x|| clipped into the interval.  The
    result never falls below mudot(s ||x||).
    """
    x = np.asarray(x, dtype=float).ravel()
    nx = float(np.linalg.norm(x))
    s = summary.s
    caps = [s * nx]
    m = len(summary)
    if m > 0:
        own = np.all(summary.vectors == x[None, :], axis=1)
        if np.any(own):
            caps.append(float(summary.hi[own].min()))
        hi = np.maximum(summary.hi, _MEAN_CLAMP)
        scaled = summary.vectors / hi[:, None]
        mat = scaled.T @ scaled + (m / s**2) * np.eye(x.size)
        caps.append(math.sqrt(2.0 * m * core.inv_quad(mat, x)))
        if nx > 0.0:
            nz = np.linalg.norm(summary.vectors, axis=1)
            nz = np.maximum(nz, _MEAN_CLAMP)
            c1 = np.abs(summary.vectors @ x) / nz
            c2 = np.sqrt(np.maximum(nx**2 - c1**2, 0.0))
            a_lo = summary.lo / nz
            a_hi = np.minimum(summary.hi / nz, s)
            a_star = np.clip(s * c1 / nx, a_lo, a_hi)
            slack = np.sqrt(np.maximum(s**2 - a_star**2, 0.0))
            caps.append(float(np.min(c1 * a_star + c2 * slack)))
    return float(mudot(min(caps)))


@dataclass
class WarParams:
    """Thresholds for probing: accept |z| < u, reject |z| > l, shrink rate r."""

    l: float
    u: float
    r: float
    delta: float
    s: float

    def __post_init__(self):
        if not 0.0 < self.l < self.u <= 2.399 + 1e-9:
            raise ValueError("need 0 < l < u <= 2.399")
        if self.r <= 1.0:
            raise ValueError("r must exceed 1")
        if not 0.0 < self.delta <= math.exp(-1.0) + 1e-15:
            raise ValueError("delta must lie in (0, exp(-1)]")
        if self.s <= 0.0:
            raise ValueError("s must be positive")


@dataclass
class WarmupReport:
    theta_hat0: np.ndarray
    samples_probing: int
    samples_planning: int
    iterations: int
    decisions: list
    design: object
    planning_log: PullLog
    probing_pulls: np.ndarray = field(default=None)

    @property
    def total(self):
        return self.samples_probing + self.samples_planning


def decide_arm(env, arm, tracker: BernsteinTracker, params: WarParams,
               batch=8, max_pulls_per_arm=10**6, budget=None, ledger=None):
    """Pull one arm until its interval clears u from above or l from below.

    Accepts when hi < u (low natural magnitude certified), rejects when
    lo > l.  A previously decided arm is returned unchanged without
    sampling.  Hitting the per-arm cap logs a warning and rejects.
    """
    if tracker.status[arm] != UNDECIDED:
        return tracker.status[arm]
    while True:
        granted = budget.take(batch) if budget is not None else batch
        successes = env.pull_block(arm, granted)
        tracker.update(arm, successes, granted)
        if ledger is not None:
            ledger.append_block(arm, granted, successes, "warmup")
        if tracker.hi[arm] < params.u:
            tracker.mark(arm, ACCEPTED)
            return ACCEPTED
        if tracker.lo[arm] > params.l:
            tracker.mark(arm, REJECTED)
            return REJECTED
        if tracker.pulls[arm] >= max_pulls_per_arm:
            log.warning(
                "arm %d undecided after %d pulls; rejecting", arm, tracker.pulls[arm]
            )
            tracker.mark(arm, REJECTED)
            return REJECTED


def _planning_pulls(env, arms, sol, delta, budget, ledger, norm_cap):
    """Pull ceil(lam_x * gamma * objective) per support arm, then fit the MLE.

    The gamma factor is evaluated at n = K (the full arm count) so every
    warmup strategy on the same arm set shares it; sample totals then
    compare across strategies purely through their design objectives.
    """
    lam = sol.weights.weights
    supp = sol.weights.support
    gam = gamma(arms.d, len(arms), delta)
    plog = PullLog(len(arms))
    for i in supp:
        want = int(math.ceil(lam[i] * gam * sol.objective))
        if want == 0:
            continue
        granted = budget.take(want) if budget is not None else want
        successes = env.pull_block(int(i), granted)
        plog.record(int(i), successes, granted)
        if ledger is not None:
            ledger.append_block(int(i), granted, successes, "warmup")
        if granted < want:
            raise BudgetExhausted("planning pulls truncated by the sample budget")
    mle = fit_mle(arms, plog, l2_eps=1e-9, norm_cap=norm_cap)
    return plog, mle


def war(env, arms: ArmSet, params: WarParams, tol=1e-4,
        batch=8, max_pulls_per_arm=10**6, budget=None, ledger=None):
    """Variance-aware warmup: probe to classify arms, then plan adaptively.

    Probing repeatedly solves a cheap spanning design over the surviving
    arms, decides its support arms with Bernstein stopping, and drops
    every arm whose optimistic variance falls at or below mudot(l / r).
    Rejected support arms always fall below that bar, so each round makes
    strict progress until all support arms are accepted (or the survivor
    pool is exhausted or loses rank, which ends probing early).  Planning
    then solves the pessimistic design over the full arm set and fits the
    initial estimate on the planning samples alone.
    """
    tracker = BernsteinTracker(arms, params.delta)
    survivors = np.arange(len(arms))
    iterations = 0
    for iterations in range(1, MAX_PROBE_ROUNDS + 2):
        if iterations > MAX_PROBE_ROUNDS:
            raise LoopCap("probing failed to settle in %d rounds" % MAX_PROBE_ROUNDS)
        try:
            accepted_pos = np.flatnonzero(tracker.status[survivors] == ACCEPTED)
            probe = two_approx_design(
                arms.vectors[survivors],
                prefer=accepted_pos if accepted_pos.size else None,
            )
        except RankDeficient:
            log.warning(
                "surviving arms lost rank after %d probing rounds; planning now",
                iterations - 1,
            )
            break
        supp = survivors[probe.weights.support]
        for i in np.sort(supp):
            decide_arm(
                env, int(i), tracker, params,
                batch=batch, max_pulls_per_arm=max_pulls_per_arm,
                budget=budget, ledger=ledger,
            )
        if all(tracker.status[i] == ACCEPTED for i in supp):
            break
        summary = ConfidenceSummary.from_tracker(tracker, arms, params.s)
        bar = mudot(params.l / params.r)
        opt = np.array(
            [optimistic_mudot(arms.vectors[i], summary) for i in survivors]
        )
        survivors = survivors[opt > bar]
        if survivors.size == 0:
            break

    summary = ConfidenceSummary.from_tracker(tracker, arms, params.s)
    floors = np.array(
        [pessimistic_mudot(arms.vectors[i], summary) for i in range(len(arms))]
    )
    sol = pessimistic_design(arms, floors, tol=tol)
    plog, mle = _planning_pulls(env, arms, sol, params.delta, budget, ledger, params.s)
    decisions = [
        {
            "arm": int(i),
            "status": str(tracker.status[i]),
            "pulls": int(tracker.pulls[i]),
            "lo": float(tracker.lo[i]),
            "hi": float(tracker.hi[i]),
        }
        for i in range(len(arms))
    ]
    return WarmupReport(
        theta_hat0=mle.theta_hat,
        samples_probing=int(tracker.pulls.sum()),
        samples_planning=int(plog.t),
        iterations=iterations,
        decisions=decisions,
        design=sol,
        planning_log=plog,
        probing_pulls=tracker.pulls.copy(),
    )


def naive_warmup(env, arms: ArmSet, s, delta, tol=1e-4, budget=None, ledger=None):
    """Warmup planned against the worst-case variance under ||theta|| <= s."""
    from .design import naive_warmup_design

    sol = naive_warmup_design(arms, s, tol=tol)
    plog, mle = _planning_pulls(env, arms, sol, delta, budget, ledger, s)
    return WarmupReport(
        theta_hat0=mle.theta_hat,
        samples_probing=0,
        samples_planning=int(plog.t),
        iterations=0,
        decisions=[],
        design=sol,
        planning_log=plog,
        probing_pulls=np.zeros(len(arms), dtype=np.int64),
    )


def oracle_warmup(env, arms: ArmSet, theta_true, delta, tol=1e-4, budget=None, ledger=None):
    """Reference warmup planned at the true parameter (not deployable)."""
    from .design import g_optimal

    theta_true = np.asarray(theta_true, dtype=float)
    sol = g_optimal(arms, theta=theta_true, tol=tol)
    norm = float(np.linalg.norm(theta_true))
    cap = norm if norm > 0.0 else None
    plog, mle = _planning_pulls(env, arms, sol, delta, budget, ledger, cap)
    return WarmupReport(
        theta_hat0=mle.theta_hat,
        samples_probing=0,
        samples_planning=int(plog.t),
        iterations=0,
        decisions=[],
        design=sol,
        planning_log=plog,
        probing_pulls=np.zeros(len(arms), dtype=np.int64),
    )


def warmup_sample_count(objective, d, n_arms, delta):
    """Idealized (real-valued) warmup cost: design objective times gamma."""
    return float(objective) * gamma(d, n_arms, delta)
