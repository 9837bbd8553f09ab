"""Optimal-design solvers and the rounding procedure.

Four design problems appear in the toolkit, all over a finite arm set:

* D-optimal (used to probe cheaply): solved by Wolfe's algorithm with
  away steps, initialized from a Householder-based spanning support;
* G-optimal and its variance-weighted variant (the ``h``-objective
  ``max_x mudot(x.theta)^2 ||x||^2_{H^{-1}}``);
* the conservative warmup design weighting each arm by mudot(||x|| S);
* the pessimistic planning design driven by per-arm variance floors.

The last three all reduce to one weighted min-max problem
``min_lam max_i w_i ||y_i||^2_{A(lam)^{-1}}`` solved by Frank-Wolfe with
the standard 2/(k+2) step (optionally with pairwise away steps), so a
single solver backs them.  ``round_design`` converts a design and a
budget into integer pull counts with a per-theta information guarantee.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import ArmSet, DesignWeights, mudot
from .errors import BudgetTooSmall, DimensionMismatch, MaxIterations, RankDeficient

__all__ = [
    "DesignSolution",
    "RoundingPlan",
    "initial_support",
    "away_step_design",
    "two_approx_design",
    "weighted_g_design",
    "g_optimal",
    "h_optimal",
    "naive_warmup_design",
    "pessimistic_design",
    "mix_designs",
    "round_design",
    "rounding_floor",
]

log = logging.getLogger(__name__)

PRUNE_WEIGHT = 1e-8


@dataclass
class DesignSolution:
    weights: DesignWeights
    objective: float
    iterations: int
    certificate_gap: float


@dataclass
class RoundingPlan:
    counts: np.ndarray
    n: int
    eps: float


def _vectors(arms):
    if isinstance(arms, ArmSet):
        return arms.vectors
    v = np.atleast_2d(np.asarray(arms, dtype=float))
    return v


def initial_support(arms, prefer=None):
    """Spanning support of d arm indices via successive Householder reflections.

    Each step picks the arm with the largest component orthogonal to the
    span of the arms already chosen (the first step simply maximizes
    |first coordinate|), then reflects the working orthogonal basis so
    the next column is orthogonal to everything selected so far.  When
    ``prefer`` lists arm indices, each step takes the best-scoring
    preferred arm whenever one still has a usable orthogonal component,
    falling back to the global best otherwise — the support stays
    spanning but reuses the preferred arms as far as possible.
    """
    x = _vectors(arms)
    k, d = x.shape
    scale = float(np.linalg.norm(x, axis=1).max())
    if scale <= 0.0:
        raise RankDeficient("all arms are zero")
    preferred = np.zeros(k, dtype=bool)
    if prefer is not None:
        preferred[np.asarray(prefer, dtype=np.int64)] = True
    q = np.eye(d)
    v = q[:, 0]
    chosen = []
    for j in range(d):
        scores = np.abs(x @ v)
        ell = int(np.argmax(scores))
        if preferred.any():
            best_pref = int(np.argmax(np.where(preferred, scores, -1.0)))
            if scores[best_pref] > 1e-10 * scale:
                ell = best_pref
        if scores[ell] <= 1e-10 * scale:
            raise RankDeficient(
                "arms span only %d of %d dimensions" % (j, d)
            )
        chosen.append(ell)
        y = x[ell]
        w = q.T @ y
        if j > 0:
            w = w.copy()
            w[:j] = 0.0
        nw = float(np.linalg.norm(w))
        sj = 1.0 if w[j] >= 0 else -1.0
        u = w.copy()
        u[j] += sj * nw
        q = q - np.outer(q @ u, u) / (nw * (abs(w[j]) + nw))
        if j + 1 < d:
            v = q[:, j + 1]
    return np.array(chosen, dtype=int)


def away_step_design(arms, init=None, eps=0.01, max_iter=100_000, prefer=None):
    """D-optimal design by Wolfe's algorithm with away steps.

    Tracks leverages ``omega(k) = x_k^T V_lam^{-1} x_k`` and alternates
    add steps (push mass toward the most under-covered arm) with away
    steps (pull mass off the worst support atom), each with its exact
    line-search step size, until the equivalence-theorem certificate
    ``d(1-eps) <= omega <= d(1+eps)`` holds on the support.  ``prefer``
    seeds the initial support (ignored when ``init`` is given).
    """
    x = _vectors(arms)
    k, d = x.shape
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if init is None:
        supp = initial_support(x, prefer=prefer)
        lam = np.zeros(k)
        lam[supp] = 1.0 / supp.size
    else:
        lam = np.array(init.weights, dtype=float)

    if d == 1:
        # the one-point design on the largest |x| is exactly optimal
        j = int(np.argmax(np.abs(x[:, 0])))
        lam = np.zeros(k)
        lam[j] = 1.0
        omega = x[:, 0] ** 2 / x[j, 0] ** 2
        return DesignSolution(DesignWeights(lam), float(omega.max()), 0, 0.0)

    gap = math.inf
    omega = None
    for iterations in range(1, max_iter + 1):
        v = (x * lam[:, None]).T @ x
        try:
            c = cho_factor(v, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            raise RankDeficient("design information matrix is singular")
        omega = np.einsum("ij,ji->i", x, cho_solve(c, x.T, check_finite=False))
        i = int(np.argmax(omega))
        eps_plus = (omega[i] - d) / d
        away = np.where(lam > 0.0, d - omega, -math.inf)
        j = int(np.argmax(away))
        eps_minus = away[j] / d
        gap = max(eps_plus, eps_minus)
        if gap <= eps:
            return DesignSolution(
                DesignWeights(lam / lam.sum()), float(omega.max()), iterations, gap
            )
        if eps_plus > eps_minus:
            psi = (omega[i] - d) / ((d - 1.0) * omega[i])
            lam[i] += psi
        else:
            psi = max(-lam[j], (omega[j] - d) / ((d - 1.0) * omega[j]))
            lam[j] += psi
        lam /= 1.0 + psi
        np.clip(lam, 0.0, None, out=lam)
        lam /= lam.sum()
    raise MaxIterations(
        "away-step solver hit %d iterations (certificate gap %.3g)" % (max_iter, gap),
        certificate_gap=gap,
    )


def two_approx_design(arms, prefer=None):
    """Cheap spanning design with worst leverage at most 2d.

    Runs the away-step solver from the Householder support with the loose
    certificate eps = 1; the support stays within a small multiple of d.
    ``prefer`` seeds the support with the given arm indices when they can
    still contribute a spanning direction.
    """
    return away_step_design(arms, init=None, eps=1.0, prefer=prefer)


def _fw_state(y, lam, ridge):
    a = (y * lam[:, None]).T @ y
    if ridge > 0.0:
        a = a + ridge * np.eye(a.shape[1])
    c = cho_factor(a, lower=True, check_finite=False)
    sol = cho_solve(c, y.T, check_finite=False)  # A^{-1} y_i in columns
    lev = np.einsum("ij,ji->i", y, sol)
    return sol, lev


_ALPHA_LADDER = 0.5 ** np.arange(16)  # pairwise steps: fractions of removable mass
_PLAIN_LADDER = np.concatenate(([0.9], 0.5 ** np.arange(1, 16)))


def _smoothed(gv, tau):
    """Soft maximum of each row of ``gv`` at temperature ``tau``."""
    top = np.max(gv, axis=-1)
    return top + tau * np.log(np.sum(np.exp((gv - top[..., None]) / tau), axis=-1))


def _line_search(y, w, a_mat, move, alphas, ridge, tau):
    """Best step along ``A + alpha * move`` judged by the smoothed objective.

    Returns the best (smoothed objective, alpha) pair; singular trial
    matrices are skipped.  All candidates are evaluated in one batched
    solve.
    """
    d = a_mat.shape[0]
    trials = a_mat[None, :, :] + alphas[:, None, None] * move[None, :, :]
    if ridge > 0.0:
        trials = trials + ridge * np.eye(d)
    try:
        xs = np.linalg.solve(trials, np.broadcast_to(y.T, (alphas.size, d, y.shape[0])))
    except np.linalg.LinAlgError:
        best = (math.inf, None)
        for alpha in alphas:
            try:
                c = cho_factor(a_mat + alpha * move + ridge * np.eye(d),
                               lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                continue
            lev = np.einsum("ij,ji->i", y, cho_solve(c, y.T, check_finite=False))
            f = float(_smoothed(w * lev, tau))
            if f < best[0]:
                best = (f, float(alpha))
        return best
    lev = np.einsum("id,gdi->gi", y, xs)
    gv = w[None, :] * lev
    fvals = _smoothed(gv, tau)
    ok = np.isfinite(fvals) & (np.min(lev, axis=1) > -1e-9)
    fvals = np.where(ok, fvals, math.inf)
    g = int(np.argmin(fvals))
    if not math.isfinite(float(fvals[g])):
        return math.inf, None
    return float(fvals[g]), float(alphas[g])


def weighted_g_design(
    vectors,
    point_weights,
    tol=1e-4,
    max_iter=None,
    use_away=False,
    init=None,
    ridge=0.0,
):
    """Approximately minimize ``max_i w_i ||y_i||^2_{A(lam)^{-1}}`` over the simplex.

    Frank-Wolfe: at each iterate the vertex moved toward is the one
    minimizing the partial derivative of the active max term, i.e.
    maximizing ``(y_{i*}^T A^{-1} y_j)^2``, and the step size is chosen by
    line search over a geometric ladder (evaluating the true objective,
    batched over candidates).  With ``use_away`` a pairwise step that
    transfers mass from the least useful support atom competes against the
    plain step each iteration, which drives stray weights to exactly zero.
    The best iterate seen is returned; stopping is by relative improvement
    of that best value over a 25-iteration window, or ``max_iter``
    (default 20 d K).

    ``certificate_gap`` is the Frank-Wolfe linearization gap
    ``w_{i*} (max_j (y_{i*}^T A^{-1} y_j)^2 - lev_{i*})`` at the returned
    iterate (zero only at an interior smooth optimum; always >= 0).
    """
    y = _vectors(vectors)
    k, d = y.shape
    w = np.asarray(point_weights, dtype=float).ravel()
    if w.size != k:
        raise DimensionMismatch("need one point weight per vector")
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise ValueError("point weights must be finite and positive")
    if max_iter is None:
        max_iter = 20 * d * k
    if ridge == "auto":
        ridge = 1e-10 * float((y * y).sum()) / (k * d)
    if d == 1:
        # Point mass on the longest vector maximizes the scalar information,
        # which minimizes every leverage term simultaneously.
        sq = y[:, 0] ** 2
        top = int(np.argmax(sq))
        if sq[top] + ridge <= 0.0:
            raise RankDeficient("design information matrix is singular")
        lam = np.zeros(k)
        lam[top] = 1.0
        lev = sq / (sq[top] + ridge)
        fvals = w * lev
        istar = int(np.argmax(fvals))
        gap = float(w[istar] * lev[istar] * (sq.max() / (sq[top] + ridge) - 1.0))
        return DesignSolution(DesignWeights(lam), float(fvals[istar]), 1, max(gap, 0.0))
    if init is None:
        try:
            supp = initial_support(y)
        except RankDeficient:
            if ridge > 0.0:
                lam = np.full(k, 1.0 / k)
            else:
                raise
        else:
            lam = np.zeros(k)
            lam[supp] = 1.0 / supp.size
    else:
        lam = np.array(init.weights, dtype=float)

    best_lam = lam.copy()
    best_f = math.inf
    best_hist = []
    tau_floor = max(tol, 1e-6)
    tau_rel = 0.25
    iterations = 0
    for iterations in range(1, max_iter + 1):
        try:
            sol, lev = _fw_state(y, lam, ridge)
        except np.linalg.LinAlgError:
            raise RankDeficient("design information matrix is singular")
        fvals = w * lev
        istar = int(np.argmax(fvals))
        f = float(fvals[istar])
        if f < best_f:
            best_f = f
            best_lam = lam.copy()
        best_hist.append(best_f)
        if len(best_hist) > 25 and best_hist[-26] - best_f <= tol * best_f:
            if tau_rel <= tau_floor:
                break
            # stalled at this smoothing level: sharpen the soft max and go on
            tau_rel = max(tau_floor, tau_rel * 0.25)
            best_hist = [best_f]
        # Blend the active terms: near-ties share the direction choice, so
        # the iterate cannot zigzag between tied leverage terms.
        tau = tau_rel * f
        p = np.exp((fvals - f) / tau)
        p /= p.sum()
        m = y @ sol  # m[i, j] = y_i^T A^{-1} y_j
        scores = (p * w) @ (m ** 2)
        jstar = int(np.argmax(scores))
        a_mat = (y * lam[:, None]).T @ y
        yj = np.outer(y[jstar], y[jstar])
        step_f, plain_a = _line_search(y, w, a_mat, yj - a_mat, _PLAIN_LADDER, ridge, tau)
        next_lam = None
        if plain_a is not None:
            next_lam = lam * (1.0 - plain_a)
            next_lam[jstar] += plain_a
        if use_away:
            on_support = lam > 0.0
            away_scores = np.where(on_support, scores, math.inf)
            astar = int(np.argmin(away_scores))
            if astar != jstar and lam[astar] > 0.0:
                ya = np.outer(y[astar], y[astar])
                pair_f, pair_a = _line_search(
                    y, w, a_mat, yj - ya, lam[astar] * _ALPHA_LADDER, ridge, tau
                )
                if pair_a is not None and pair_f < step_f:
                    trial = lam.copy()
                    trial[astar] = max(trial[astar] - pair_a, 0.0)
                    trial[jstar] += pair_a
                    try:
                        cho_factor(
                            (y * trial[:, None]).T @ y + ridge * np.eye(d),
                            lower=True,
                            check_finite=False,
                        )
                    except np.linalg.LinAlgError:
                        pass  # pairwise move would kill the span; keep plain step
                    else:
                        next_lam = trial
        if next_lam is None:
            alpha = 2.0 / (iterations + 2.0)
            next_lam = lam * (1.0 - alpha)
            next_lam[jstar] += alpha
        lam = next_lam
        lam /= lam.sum()

    sol, lev = _fw_state(y, best_lam, ridge)
    fvals = w * lev
    istar = int(np.argmax(fvals))
    g2 = (y @ sol[:, istar]) ** 2
    gap = float(w[istar] * (g2.max() - lev[istar]))
    return DesignSolution(
        DesignWeights(best_lam / best_lam.sum()),
        float(fvals[istar]),
        iterations,
        max(gap, 0.0),
    )


def _prune(y, w, sol, ridge=0.0):
    """Drop negligible weights and re-evaluate the objective exactly."""
    lam = sol.weights.weights.copy()
    small = (lam > 0.0) & (lam < PRUNE_WEIGHT)
    if not np.any(small):
        return sol
    lam[small] = 0.0
    lam /= lam.sum()
    fsol, lev = _fw_state(y, lam, ridge)
    fvals = w * lev
    istar = int(np.argmax(fvals))
    g2 = (y @ fsol[:, istar]) ** 2
    gap = float(w[istar] * (g2.max() - lev[istar]))
    return DesignSolution(
        DesignWeights(lam), float(fvals[istar]), sol.iterations, max(gap, 0.0)
    )


def _expand(sol, active, k):
    """Lift a solution on an index subset back to the full arm list."""
    lam = np.zeros(k)
    lam[np.asarray(active, dtype=int)] = sol.weights.weights
    return DesignSolution(
        DesignWeights(lam), sol.objective, sol.iterations, sol.certificate_gap
    )


def _transformed_solve(arms, active, scale, point_w, tol, max_iter, use_away, ridge):
    x = _vectors(arms)
    k = x.shape[0]
    if active is None:
        active = np.arange(k)
    else:
        active = np.asarray(active, dtype=int)
    y = np.sqrt(scale[active])[:, None] * x[active]
    if ridge == "auto":
        ridge = 1e-10 * float((y * y).sum()) / (y.shape[0] * y.shape[1])
    sol = weighted_g_design(
        y,
        point_w[active],
        tol=tol,
        max_iter=max_iter,
        use_away=use_away,
        ridge=ridge,
    )
    sol = _prune(y, point_w[active], sol, ridge=ridge)
    return _expand(sol, active, k)


def g_optimal(arms, active=None, theta=None, tol=1e-4, max_iter=None, use_away=True, ridge=0.0):
    """Design minimizing the worst leverage max_x ||x||^2_{H_lam(theta)^{-1}}.

    Solved in transformed coordinates y = sqrt(mudot(x.theta)) x with point
    weights 1/mudot, so the reported objective is already in original
    coordinates.
    """
    x = _vectors(arms)
    theta = np.zeros(x.shape[1]) if theta is None else np.asarray(theta, dtype=float)
    if theta.size != x.shape[1]:
        raise DimensionMismatch("theta dimension does not match arms")
    md = mudot(x @ theta)
    return _transformed_solve(arms, active, md, 1.0 / md, tol, max_iter, use_away, ridge)


def h_optimal(arms, active=None, theta=None, tol=1e-4, max_iter=None, use_away=True, ridge=0.0):
    """Design minimizing max_x mudot(x.theta)^2 ||x||^2_{H_lam(theta)^{-1}}.

    The variance-squared weighting matches the mean-parameter confidence
    width; the optimal value is at most d/4 on any arm set.
    """
    x = _vectors(arms)
    theta = np.zeros(x.shape[1]) if theta is None else np.asarray(theta, dtype=float)
    if theta.size != x.shape[1]:
        raise DimensionMismatch("theta dimension does not match arms")
    md = mudot(x @ theta)
    return _transformed_solve(arms, active, md, md, tol, max_iter, use_away, ridge)


def naive_warmup_design(arms, s, tol=1e-4, max_iter=None, use_away=True):
    """Conservative warmup design weighting each arm by mudot(||x|| S).

    Uses the worst variance an arm can have under any ||theta|| <= S, so
    its objective dominates the oracle G-optimal value for every such theta.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    x = _vectors(arms)
    md = mudot(np.linalg.norm(x, axis=1) * s)
    return _transformed_solve(arms, None, md, 1.0 / md, tol, max_iter, use_away, 0.0)


def pessimistic_design(arms, mudot_pes, tol=1e-4, max_iter=None, use_away=True):
    """Planning design for given per-arm variance floors.

    Minimizes max_x ||x||^2 over the inverse of sum lam_x mudot_pes(x) x x^T;
    weights below 1e-8 are pruned and the design renormalized.
    """
    x = _vectors(arms)
    mp = np.asarray(mudot_pes, dtype=float).ravel()
    if mp.size != x.shape[0]:
        raise DimensionMismatch("need one variance floor per arm")
    if np.any(mp <= 0.0) or np.any(mp > 0.25 + 1e-12):
        raise ValueError("variance floors must lie in (0, 1/4]")
    return _transformed_solve(arms, None, mp, 1.0 / mp, tol, max_iter, use_away, 0.0)


def mix_designs(lam_h, n_h, lam_g, n_g):
    """Combine two designs by entrywise max of their budget-scaled weights.

    The result, renormalized to the simplex, retains at least a
    n_side/(2(n_h+n_g)) share of each input design's information matrix
    for every theta.
    """
    if n_h + n_g < 1:
        raise ValueError("need n_h + n_g >= 1")
    wh = n_h / (n_h + n_g)
    tilde = np.maximum(wh * lam_h.weights, (1.0 - wh) * lam_g.weights)
    return DesignWeights(tilde / tilde.sum())


def rounding_floor(p, eps):
    """Minimum budget r(eps) for rounding a design with support size p."""
    return int(math.ceil(p * (1.0 + eps) / eps))


def round_design(n, lam, eps):
    """Round a design into integer counts summing to n.

    Support arms first get ceil(n lam_x / (1+eps)); the remaining pulls
    are handed out one at a time cycling through the support in
    descending-weight order (ties to the lower index).  Every support arm
    then satisfies counts_x >= n lam_x / (1+eps), so the realized
    information matrix dominates (n/(1+eps)) H_lam(theta) for every theta.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    supp = lam.support
    floor = rounding_floor(supp.size, eps)
    if n < floor:
        raise BudgetTooSmall(
            "budget %d below the rounding floor r(eps) = %d" % (n, floor)
        )
    weights = lam.weights
    counts = np.zeros(weights.size, dtype=np.int64)
    counts[supp] = np.ceil(n * weights[supp] / (1.0 + eps)).astype(np.int64)
    rem = n - int(counts.sum())
    if rem < 0:
        raise AssertionError("rounding overshoot; budget check is wrong")
    order = supp[np.lexsort((supp, -weights[supp]))]
    for t in range(rem):
        counts[order[t % order.size]] += 1
    return RoundingPlan(counts=counts, n=n, eps=eps)
