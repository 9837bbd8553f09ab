"""Bandit environment, regret accounting, and the elimination policy.

The policy proceeds in doubling rounds: each round solves two designs on
the surviving arms at the previous round's estimate — the
variance-squared design that controls mean-gap widths and the G-optimal
design that keeps the next estimate in the small-error regime — mixes
them by entrywise max, rounds the mix into integer pull counts, refits
the estimate on that round's samples alone, and eliminates every arm
whose estimated mean gap is at least twice the round's target accuracy.
Once one arm survives (or the horizon is hit) it commits.  All pulls,
including warmup and commit, run against a fixed total budget.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from .core import ArmSet, mu
from .design import g_optimal, h_optimal, mix_designs, round_design, rounding_floor
from .errors import BudgetExhausted, LogBanditError, RankDeficient
from .glm import PullLog, fit_mle, gamma
from .warmup import SampleBudget, WarParams, naive_warmup, oracle_warmup, war

__all__ = [
    "Environment",
    "RegretLedger",
    "HomerBudgets",
    "HomerParams",
    "HomerState",
    "HomerResult",
    "budget_h",
    "budget_g",
    "homer_budgets",
    "homer_round",
    "run_homer",
    "baseline_policy",
]

log = logging.getLogger(__name__)

_COUNT_CAP = 2**61  # keep planned counts inside int64 when budgets explode


class Environment:
    """Bernoulli responses with mean mu(x^T theta) and a seeded generator."""

    def __init__(self, arms: ArmSet, theta, rng):
        self.arms = arms
        self.theta = np.asarray(theta, dtype=float).ravel()
        if self.theta.size != arms.d:
            raise core.DimensionMismatch("theta dimension does not match arms")
        self.means = mu(arms.vectors @ self.theta)
        self.means.flags.writeable = False
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.pulls = 0

    @property
    def best_mean(self):
        return float(self.means.max())

    @property
    def gaps(self):
        return self.best_mean - self.means

    def pull(self, arm):
        self.pulls += 1
        return int(self.rng.random() < self.means[arm])

    def pull_block(self, arm, n):
        if n < 0:
            raise ValueError("block size must be nonnegative")
        if n == 0:
            return 0
        self.pulls += n
        return int(self.rng.binomial(n, self.means[arm]))

    def pull_sequence(self, arm_seq):
        arm_seq = np.asarray(arm_seq, dtype=int)
        self.pulls += arm_seq.size
        return (self.rng.random(arm_seq.size) < self.means[arm_seq]).astype(np.int64)


class RegretLedger:
    """Pull history as (arm, count, successes, phase) segments.

    Blocks keep many pulls of one arm compact; per-pull sequences (the
    uniform baseline) are stored as runs of unit counts.  Expansion and
    the downsampled regret curve are vectorized over the segments.
    """

    def __init__(self, means):
        means = np.asarray(means, dtype=float).ravel()
        self.means = means
        self.best = float(means.max())
        self.gaps = self.best - means
        self._arms = []
        self._counts = []
        self._succ = []
        self._phases = []  # (phase, number of aligned entries)
        self._total = 0

    def append_block(self, arm, count, successes, phase):
        if count < 0 or not 0 <= successes <= count:
            raise ValueError("invalid block")
        if count == 0:
            return
        self._arms.append(np.array([arm], dtype=np.int64))
        self._counts.append(np.array([count], dtype=np.int64))
        self._succ.append(np.array([successes], dtype=np.int64))
        self._phases.append((str(phase), 1))
        self._total += int(count)

    def append_sequence(self, arm_seq, succ_seq, phase):
        arm_seq = np.asarray(arm_seq, dtype=np.int64)
        succ_seq = np.asarray(succ_seq, dtype=np.int64)
        if arm_seq.size == 0:
            return
        self._arms.append(arm_seq)
        self._counts.append(np.ones(arm_seq.size, dtype=np.int64))
        self._succ.append(succ_seq)
        self._phases.append((str(phase), arm_seq.size))
        self._total += int(arm_seq.size)

    @property
    def total_pulls(self):
        return self._total

    def _concat(self):
        if not self._arms:
            z = np.zeros(0, dtype=np.int64)
            return z, z.copy(), z.copy(), np.zeros(0, dtype=object)
        arms = np.concatenate(self._arms)
        counts = np.concatenate(self._counts)
        succ = np.concatenate(self._succ)
        phases = np.repeat(
            np.array([p for p, _ in self._phases], dtype=object),
            np.array([n for _, n in self._phases], dtype=np.int64),
        )
        return arms, counts, succ, phases

    def final_regret(self):
        arms, counts, _, _ = self._concat()
        if arms.size == 0:
            return 0.0
        return float(np.cumsum(self.gaps[arms] * counts)[-1])

    def per_arm(self):
        arms, counts, succ, _ = self._concat()
        k = self.means.size
        pulls = np.bincount(arms, weights=counts, minlength=k).astype(np.int64)
        wins = np.bincount(arms, weights=succ, minlength=k).astype(np.int64)
        return pulls, wins

    def curve(self, max_points=1000):
        """Per-pull cumulative regret, downsampled but always ending at T.

        Works at segment granularity, so the last point reproduces
        final_regret() exactly regardless of max_points.
        """
        arms, counts, _, phases = self._concat()
        t = int(counts.sum())
        if t == 0:
            z = np.zeros(0, dtype=np.int64)
            return z, np.zeros(0), np.zeros(0, dtype=object)
        if t <= max_points:
            idx = np.arange(t, dtype=np.int64)
        else:
            idx = np.unique(np.round(np.linspace(0, t - 1, max_points)).astype(np.int64))
        ends = np.cumsum(counts)
        block_of = np.searchsorted(ends, idx, side="right")
        block_cum = np.concatenate(([0.0], np.cumsum(self.gaps[arms] * counts)))
        within = idx - (ends[block_of] - counts[block_of]) + 1
        cum = block_cum[block_of] + self.gaps[arms[block_of]] * within
        return idx + 1, cum, phases[block_of]

    def to_bytes(self):
        arms, counts, succ, phases = self._concat()
        return (
            arms.tobytes()
            + counts.tobytes()
            + succ.tobytes()
            + "|".join(phases.tolist()).encode()
        )


@dataclass
class HomerBudgets:
    delta_k: float
    h_sol: object
    g_sol: object
    n_h: int
    n_g: int


@dataclass
class HomerParams:
    """Everything a round needs besides its evolving state."""

    arms: ArmSet
    delta: float
    eps: float
    s_cap: float = None
    tol: float = 1e-4
    budget: SampleBudget = None
    ledger: RegretLedger = None


@dataclass
class HomerState:
    k: int
    active: np.ndarray
    theta_prev: np.ndarray
    delta_k: float = None
    n_h: int = None
    n_g: int = None
    n_k: int = None
    round_log: PullLog = None
    theta_hat: np.ndarray = None


@dataclass
class HomerResult:
    ledger: RegretLedger
    chosen: int
    rounds: list
    warmup_report: object
    truncated: bool


def budget_h(k, h_obj, delta_k, eps):
    """Round-k sample count for the variance-squared design (grows as 4^k)."""
    return int(
        math.ceil(
            6.0 * (1.0 + eps) * 6.1**2 * 27.0 * 4.0**k * h_obj * math.log(1.0 / delta_k)
        )
    )


def budget_g(d, n_active, g_obj, delta_k, eps):
    """Round-k sample count for the G-optimal design (warmup-condition share)."""
    return int(math.ceil(6.0 * (1.0 + eps) * gamma(d, n_active, delta_k) * g_obj))


def homer_budgets(k, active, theta_prev, delta, eps, arms: ArmSet, tol=1e-4):
    """Round-k failure share, both designs, and both sample budgets.

    The variance-squared budget scales as 4^k times that design's
    objective; the G-optimal budget mirrors the warmup sample count at
    the round's failure share.  A rank-deficient active set falls back to
    ridged design solves with a warning.
    """
    kk = len(arms)
    active = np.asarray(active, dtype=int)
    delta_k = delta / (4.0 * (2.0 + kk) * kk * k * k)
    try:
        h_sol = h_optimal(arms, active, theta_prev, tol=tol)
        g_sol = g_optimal(arms, active, theta_prev, tol=tol)
    except RankDeficient:
        log.warning("active arms are rank-deficient in round %d; using ridged designs", k)
        h_sol = h_optimal(arms, active, theta_prev, tol=tol, ridge="auto")
        g_sol = g_optimal(arms, active, theta_prev, tol=tol, ridge="auto")
    n_h = budget_h(k, h_sol.objective, delta_k, eps)
    n_g = budget_g(arms.d, active.size, g_sol.objective, delta_k, eps)
    return HomerBudgets(delta_k, h_sol, g_sol, n_h, n_g)


def homer_round(state: HomerState, env: Environment, params: HomerParams):
    """Play one elimination round and return the state entering the next.

    Computes both budgets at the entering estimate, mixes and rounds the
    designs, pulls the plan (ascending arm index), refits the estimate on
    this round's samples only, and drops every arm whose estimated mean
    gap is at least 2 * 2^{-k}.  The entering ``state`` is filled in with
    the round's budgets, pull log, and fitted estimate.  Exhausting the
    sample budget raises BudgetExhausted after logging the partial round.
    """
    arms = params.arms
    b = homer_budgets(state.k, state.active, state.theta_prev,
                      params.delta, params.eps, arms, tol=params.tol)
    mixed = mix_designs(b.h_sol.weights, b.n_h, b.g_sol.weights, b.n_g)
    p = int(mixed.support.size)
    n_k = max(b.n_h + b.n_g, rounding_floor(p, params.eps))
    state.delta_k = b.delta_k
    state.n_h = b.n_h
    state.n_g = b.n_g
    state.n_k = n_k
    state.round_log = PullLog(len(arms))
    rem = params.budget.remaining if params.budget is not None else None
    n_plan = n_k
    if n_k > _COUNT_CAP:
        n_plan = max(rem if rem is not None else 0, rounding_floor(p, params.eps))
    plan = round_design(n_plan, mixed, params.eps)
    for i in np.flatnonzero(plan.counts):
        want = int(plan.counts[i])
        granted = params.budget.take(want) if params.budget is not None else want
        successes = env.pull_block(int(i), granted)
        state.round_log.record(int(i), successes, granted)
        if params.ledger is not None:
            params.ledger.append_block(int(i), granted, successes, "round %d" % state.k)
        if granted < want:
            raise BudgetExhausted("round %d truncated" % state.k)
    mle = fit_mle(arms, state.round_log, l2_eps=1e-9, norm_cap=params.s_cap)
    state.theta_hat = mle.theta_hat
    means_hat = mu(arms.vectors[state.active] @ mle.theta_hat)
    keep = (means_hat.max() - means_hat) < 2.0 * 2.0 ** (-state.k)
    return HomerState(
        k=state.k + 1,
        active=state.active[keep],
        theta_prev=mle.theta_hat,
    )


def _empirical_best(ledger: RegretLedger):
    pulls, wins = ledger.per_arm()
    if pulls.sum() == 0:
        return 0
    rates = np.where(pulls > 0, wins / np.maximum(pulls, 1), -math.inf)
    return int(np.argmax(rates))


def run_homer(env: Environment, arms: ArmSet, t, delta, eps=1.0,
              warmup_choice="naive", s=None, war_params=None, tol=1e-4,
              max_rounds=60):
    """Run the elimination policy to horizon t and return its full trace.

    ``warmup_choice`` selects the initial-estimate strategy ("naive",
    "war", or "oracle"); "naive" and "war" need the norm bound ``s`` (war
    accepts explicit ``war_params`` instead).  Exhausting the budget
    anywhere — inside warmup, mid-round, or at the horizon — commits to
    the current empirical best for every remaining pull, so exactly t
    pulls are always spent.  Internal numerical failures inside a round
    likewise degrade to commit (logged), never propagate.
    """
    if t < 1:
        raise ValueError("horizon must be at least 1")
    budget = SampleBudget(t)
    ledger = RegretLedger(env.means)
    wreport = None
    theta = None
    s_cap = s
    try:
        if warmup_choice == "naive":
            if s is None:
                raise ValueError("naive warmup needs the norm bound s")
            wreport = naive_warmup(env, arms, s, delta, tol=tol, budget=budget, ledger=ledger)
        elif warmup_choice == "war":
            if war_params is None:
                if s is None:
                    raise ValueError("war warmup needs war_params or s")
                war_params = WarParams(l=1.0, u=2.399, r=2.0,
                                       delta=min(delta, math.exp(-1.0)), s=s)
            s_cap = war_params.s if s_cap is None else s_cap
            wreport = war(env, arms, war_params, tol=tol, budget=budget, ledger=ledger)
        elif warmup_choice == "oracle":
            norm = float(np.linalg.norm(env.theta))
            s_cap = (norm if norm > 0 else None) if s_cap is None else s_cap
            wreport = oracle_warmup(env, arms, env.theta, delta, tol=tol,
                                    budget=budget, ledger=ledger)
        else:
            raise ValueError("unknown warmup %r" % (warmup_choice,))
        theta = wreport.theta_hat0
    except BudgetExhausted:
        log.warning("budget exhausted during warmup; committing to empirical best")

    params = HomerParams(arms=arms, delta=delta, eps=eps, s_cap=s_cap,
                         tol=tol, budget=budget, ledger=ledger)
    rounds = []
    truncated = theta is None
    state = HomerState(k=1, active=np.arange(len(arms)), theta_prev=theta)
    if theta is not None:
        while state.active.size > 1 and state.k <= max_rounds:
            rem = budget.remaining
            if rem is not None and rem <= 0:
                truncated = True
                break
            rounds.append(state)
            try:
                state = homer_round(state, env, params)
            except BudgetExhausted:
                truncated = True
                break
            except (LogBanditError, np.linalg.LinAlgError) as exc:
                log.warning("round %d failed (%s); committing to empirical best",
                            state.k, exc)
                truncated = True
                break

    theta_final = state.theta_prev
    if theta_final is not None:
        active = state.active
        chosen = int(active[np.argmax(arms.vectors[active] @ theta_final)])
    else:
        chosen = _empirical_best(ledger)
    rem = budget.remaining
    if rem is not None and rem > 0:
        granted = budget.take(rem)
        successes = env.pull_block(chosen, granted)
        ledger.append_block(chosen, granted, successes, "commit")
    if ledger.total_pulls != t:
        raise AssertionError(
            "ledger recorded %d pulls for horizon %d" % (ledger.total_pulls, t)
        )
    return HomerResult(ledger=ledger, chosen=chosen, rounds=rounds,
                       warmup_report=wreport, truncated=truncated)


def baseline_policy(kind, env: Environment, arms: ArmSet, t, m=None):
    """Reference policies: round-robin "uniform" or explore-then-commit "etc"."""
    if t < 1:
        raise ValueError("horizon must be at least 1")
    k = env.means.size
    ledger = RegretLedger(env.means)
    if kind == "uniform":
        reps = -(-t // k)
        order = np.tile(np.arange(k), reps)[:t]
        succ = env.pull_sequence(order)
        ledger.append_sequence(order, succ, "uniform")
        return ledger, None
    if kind == "etc":
        if m is None or m < 1:
            raise ValueError("etc needs the per-arm exploration count m")
        order = np.tile(np.arange(k), m)[: min(k * m, t)]
        succ = env.pull_sequence(order)
        ledger.append_sequence(order, succ, "explore")
        counts = np.bincount(order, minlength=k)
        wins = np.bincount(order, weights=succ, minlength=k)
        rates = np.where(counts > 0, wins / np.maximum(counts, 1), -math.inf)
        chosen = int(np.argmax(rates))
        rem = t - order.size
        if rem > 0:
            successes = env.pull_block(chosen, rem)
            ledger.append_block(chosen, rem, successes, "commit")
        return ledger, chosen
    raise ValueError("unknown baseline %r" % (kind,))
