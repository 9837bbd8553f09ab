"""Numeric foundations for the logistic-bandit toolkit.

Link functions, Fisher information matrices, and the small dense
linear-algebra kernels (inverse-quadratic forms, SPD solves) that every
other module builds on.  Conventions used throughout the package:

* an arm is a d-dimensional feature vector with Euclidean norm <= 1,
* a parameter ``theta`` is a plain d-vector (numpy array),
* a design is a probability vector over arm indices,
* the information matrix of a design ``lam`` at ``theta`` is
  ``H_lam(theta) = sum_x lam_x * mudot(x.theta) * x x^T``.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit, log_expit

from .errors import DimensionMismatch, Singular

__all__ = [
    "ArmSet",
    "DesignWeights",
    "mu",
    "mudot",
    "log_mu",
    "fisher_weighted",
    "fisher_counts",
    "default_ridge",
    "spd_solve",
    "inv_quad",
    "inv_quad_many",
    "g_value",
    "h_value",
]

#: absolute slack allowed on the unit-norm arm constraint
NORM_SLACK = 1e-12


def mu(z):
    """Logistic mean function 1 / (1 + exp(-z)), stable for |z| <= 700."""
    return expit(z)


def log_mu(z):
    """log(mu(z)) without underflow for very negative z."""
    return log_expit(z)


def mudot(z):
    """Logistic variance mu(z) * (1 - mu(z)).

    Computed as expit(z) * expit(-z), which keeps full relative accuracy
    in the tails where 1 - mu(z) would cancel.
    """
    return expit(z) * expit(-z)


class ArmSet:
    """An ordered, immutable collection of arms (rows of a (K, d) array).

    Indices are stable for the lifetime of the set; subsets are always
    referred to by index into this set, never by reordering it.
    """

    def __init__(self, vectors):
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise ValueError("ArmSet needs a non-empty (K, d) array")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("arm coordinates must be finite")
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms > 1.0 + NORM_SLACK):
            raise ValueError(
                "arm norms must be <= 1 (max %.6g)" % float(norms.max())
            )
        self._vectors = vectors
        self._vectors.setflags(write=False)
        self._norms = norms
        self._norms.setflags(write=False)

    @property
    def vectors(self):
        return self._vectors

    @property
    def norms(self):
        return self._norms

    @property
    def d(self):
        return self._vectors.shape[1]

    def __len__(self):
        return self._vectors.shape[0]

    def __getitem__(self, i):
        return self._vectors[i]

    def subset(self, indices):
        """Rows for an index subset, in the given order."""
        return self._vectors[np.asarray(indices, dtype=int)]


class DesignWeights:
    """A probability vector over arm indices (a point in the simplex)."""

    def __init__(self, weights, check=True):
        weights = np.asarray(weights, dtype=float).ravel()
        if check:
            if weights.size == 0 or not np.all(np.isfinite(weights)):
                raise ValueError("design weights must be finite and non-empty")
            if np.any(weights < -1e-12):
                raise ValueError("design weights must be nonnegative")
            if abs(weights.sum() - 1.0) > 1e-9:
                raise ValueError(
                    "design weights must sum to 1 (got %.12g)" % weights.sum()
                )
            weights = np.clip(weights, 0.0, None)
        self._weights = weights
        self._weights.setflags(write=False)

    @property
    def weights(self):
        return self._weights

    @property
    def support(self):
        """Indices with strictly positive mass."""
        return np.flatnonzero(self._weights > 0.0)

    def __len__(self):
        return self._weights.size

    @staticmethod
    def point_mass(k, index):
        w = np.zeros(k)
        w[index] = 1.0
        return DesignWeights(w)


def _check_theta(arms, theta):
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != arms.d:
        raise DimensionMismatch(
            "theta has dimension %d, arms have %d" % (theta.size, arms.d)
        )
    return theta


def fisher_weighted(arms, weights, theta):
    """Information matrix of a design: sum_x lam_x * mudot(x.theta) * x x^T."""
    theta = _check_theta(arms, theta)
    lam = weights.weights if isinstance(weights, DesignWeights) else np.asarray(weights, dtype=float)
    x = arms.vectors
    coef = lam * mudot(x @ theta)
    return (x * coef[:, None]).T @ x


def fisher_counts(arms, pulls, theta):
    """Unnormalized information of logged pulls: sum_s mudot(x_s.theta) x_s x_s^T.

    ``pulls`` is anything with a per-arm integer array attribute ``pulls``
    (see glm.PullLog); only arms with positive counts contribute.
    """
    theta = _check_theta(arms, theta)
    counts = np.asarray(pulls.pulls, dtype=float)
    x = arms.vectors
    coef = counts * mudot(x @ theta)
    return (x * coef[:, None]).T @ x


def default_ridge(a):
    """Default regularizer for near-singular information matrices."""
    a = np.asarray(a)
    d = a.shape[0]
    return 1e-10 * float(np.trace(a)) / d


def _factor(a, strict):
    """SPD factorization with an eigendecomposition fallback.

    Returns a callable solve(b).  Cholesky is attempted first; on failure
    the matrix is eigendecomposed and eigenvalues below 1e-12 * lambda_max
    are clipped up to that floor (they are rounding noise on a PSD input).
    With ``strict`` a structurally singular matrix raises Singular instead
    of being clipped.
    """
    try:
        c = cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    else:
        return lambda b: cho_solve(c, b, check_finite=False)
    evals, evecs = np.linalg.eigh(a)
    emax = float(evals.max(initial=0.0))
    floor = 1e-12 * emax
    if emax <= 0.0 or (strict and float(evals.min()) <= floor):
        raise Singular("singular matrix; supply a ridge or a spanning design")
    evals = np.clip(evals, floor, None)
    inv = evecs / evals[None, :]

    def solve(b):
        return inv @ (evecs.T @ b)

    return solve


def spd_solve(a, b, ridge=0.0):
    """Solve (A + ridge I) X = B for symmetric PSD A.

    A structurally singular A raises Singular unless a positive ridge is
    supplied; tiny negative eigenvalues from rounding are clipped.
    """
    a = np.asarray(a, dtype=float)
    if ridge > 0.0:
        a = a + ridge * np.eye(a.shape[0])
    return _factor(a, strict=(ridge == 0.0))(np.asarray(b, dtype=float))


def inv_quad(a, x, ridge=0.0):
    """Inverse-quadratic form x^T (A + ridge I)^{-1} x for SPD A.

    Raises Singular when A is singular and no ridge is supplied.
    """
    x = np.asarray(x, dtype=float).ravel()
    a = np.asarray(a, dtype=float)
    if a.shape[0] != x.size:
        raise DimensionMismatch(
            "matrix is %dx%d but vector has length %d" % (*a.shape, x.size)
        )
    return float(x @ spd_solve(a, x, ridge=ridge))


def inv_quad_many(a, xs, ridge=0.0):
    """Row-wise inverse-quadratic forms x_i^T (A + ridge I)^{-1} x_i."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    sol = spd_solve(a, xs.T, ridge=ridge)
    return np.einsum("ij,ji->i", xs, sol)


def g_value(arms, active, weights, theta, ridge=0.0):
    """Worst leverage of a design: max over active arms of ||x||^2_{H_lam^{-1}}."""
    theta = _check_theta(arms, theta)
    h = fisher_weighted(arms, weights, theta)
    xs = arms.subset(active)
    return float(inv_quad_many(h, xs, ridge=ridge).max())


def h_value(arms, active, weights, theta, ridge=0.0):
    """Variance-weighted worst leverage: max of mudot(x.theta)^2 ||x||^2_{H_lam^{-1}}."""
    theta = _check_theta(arms, theta)
    h = fisher_weighted(arms, weights, theta)
    xs = arms.subset(active)
    md = mudot(xs @ theta)
    vals = inv_quad_many(h, xs, ridge=ridge)
    return float((md * md * vals).max())
