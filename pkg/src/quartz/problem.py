"""Data matrix, losses, regularizer and the primal/dual objectives.

The problem solved is

    min_w  P(w) = 1/n sum_i phi(A_i^T w) + lam * g(w)

with g(w) = 0.5 ||w||^2 and its Fenchel dual

    max_alpha  D(alpha) = -lam g*(abar) - 1/n sum_i phi*(-alpha_i),
    abar = 1/(lam n) sum_i A_i alpha_i.

Examples are the columns of a sparse d x n matrix. Labels are folded into
the columns (A_i <- y_i A_i) before anything here sees them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

# absolute slack for gap nonnegativity checks
TOL_NUM = 1e-9

# slack when deciding whether a dual variable sits inside its box
_FEAS_TOL = 1e-12


def _real(x):
    # keep extended precision when the caller asks for it
    x = np.asarray(x)
    return x if x.dtype == np.longdouble else x.astype(np.float64)


class InfeasibleDualError(ValueError):
    """Raised when a dual vector leaves the effective domain of phi*(-.)."""


class DataMatrix:
    """Sparse d x n example matrix stored column-major.

    Parameters
    ----------
    A : array-like or scipy sparse matrix, shape (d, n)
        Column ``i`` is example ``A_i``. Explicit zeros are dropped.
    labels : array-like of +-1, optional
        Kept for reference only; callers fold them into ``A`` beforehand.
    """

    def __init__(self, A, labels=None):
        A = sparse.csc_matrix(A, dtype=np.float64, copy=True)
        A.eliminate_zeros()
        A.sort_indices()
        if not np.all(np.isfinite(A.data)):
            raise ValueError("data matrix contains non-finite entries")
        d, n = A.shape
        if d < 1 or n < 1:
            raise ValueError(f"data matrix must be nonempty, got shape {A.shape}")
        self.A = A
        self.d = d
        self.n = n
        self.labels = None if labels is None else np.asarray(labels, dtype=np.float64)
        # omega_j: number of examples with a nonzero in feature j
        self.row_nnz = np.bincount(A.indices, minlength=d).astype(np.int64)
        self._col_ids = np.repeat(np.arange(n), np.diff(A.indptr))

    @classmethod
    def from_dense(cls, M, labels=None):
        return cls(np.asarray(M, dtype=np.float64), labels=labels)

    @property
    def indptr(self):
        return self.A.indptr

    @property
    def indices(self):
        return self.A.indices

    @property
    def data(self):
        return self.A.data

    @property
    def nnz(self):
        return self.A.nnz

    @property
    def col_ids(self):
        """Column index of every stored entry, aligned with ``data``."""
        return self._col_ids

    def column(self, i):
        """Return ``(row_indices, values)`` of example ``i``."""
        lo, hi = self.A.indptr[i], self.A.indptr[i + 1]
        return self.A.indices[lo:hi], self.A.data[lo:hi]

    def col_sq_norms(self):
        return np.bincount(self._col_ids, weights=self.A.data ** 2, minlength=self.n)

    def toarray(self):
        return self.A.toarray()

    def density(self):
        return self.nnz / (self.n * self.d)

    def matvec(self, alpha):
        """Return ``sum_i A_i alpha_i``."""
        return self.A @ alpha

    def rmatvec(self, w):
        """Return the margins ``A_i^T w`` for all i."""
        return self.A.T @ w

    def __repr__(self):
        return f"DataMatrix(d={self.d}, n={self.n}, nnz={self.nnz})"


@dataclass(frozen=True)
class LossModel:
    """A (1/gamma)-smooth scalar loss with a closed-form conjugate."""

    gamma: float = 1.0
    kind = "abstract"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    # dual box [lo, hi] for alpha_i, i.e. -alpha_i in dom phi*
    dual_lo = 0.0
    dual_hi = math.inf

    def value(self, a):
        raise NotImplementedError

    def derivative(self, a):
        raise NotImplementedError

    def conjugate(self, b):
        raise NotImplementedError

    def option1_delta(self, alpha, abar_dot, v_over_lam_n):
        """Exact maximizer of the Option I block model (closed form)."""
        raise NotImplementedError

    def project_dual(self, alpha):
        return np.clip(alpha, self.dual_lo, self.dual_hi)

    def is_dual_feasible(self, alpha, tol=_FEAS_TOL):
        alpha = np.asarray(alpha, dtype=np.float64)
        return bool(np.all(alpha >= self.dual_lo - tol) and np.all(alpha <= self.dual_hi + tol))


@dataclass(frozen=True)
class SmoothedHinge(LossModel):
    r"""Smoothed hinge loss.

    phi(a) = 0                      if a >= 1
           = 1 - a - gamma/2        if a <= 1 - gamma
           = (1 - a)^2 / (2 gamma)  otherwise

    Its conjugate is finite on [-1, 0] where phi*(b) = b + gamma b^2 / 2.
    """

    kind = "smoothed_hinge"
    dual_lo = 0.0
    dual_hi = 1.0

    def value(self, a):
        a = _real(a)
        g = self.gamma
        out = np.where(a >= 1.0, 0.0,
                       np.where(a <= 1.0 - g, 1.0 - a - g / 2.0, (1.0 - a) ** 2 / (2.0 * g)))
        return out if out.ndim else float(out)

    def derivative(self, a):
        a = np.asarray(a, dtype=np.float64)
        out = -np.clip((1.0 - a) / self.gamma, 0.0, 1.0)
        return out if out.ndim else float(out)

    def conjugate(self, b):
        b = _real(b)
        inside = (b >= -1.0) & (b <= 0.0)
        out = np.where(inside, b + self.gamma * b * b / 2.0, np.inf)
        return out if out.ndim else float(out)

    def option1_delta(self, alpha, abar_dot, v_over_lam_n):
        step = (1.0 - abar_dot - self.gamma * alpha) / (v_over_lam_n + self.gamma)
        return max(-alpha, min(1.0 - alpha, step))


@dataclass(frozen=True)
class SquaredHinge(LossModel):
    r"""Squared hinge loss phi(a) = ([1 - a]_+)^2 / (2 gamma).

    Conjugate is finite for b <= 0 where phi*(b) = b + gamma b^2 / 2.
    """

    kind = "squared_hinge"
    dual_lo = 0.0
    dual_hi = math.inf

    def value(self, a):
        a = np.asarray(a, dtype=np.float64)
        out = np.maximum(1.0 - a, 0.0) ** 2 / (2.0 * self.gamma)
        return out if out.ndim else float(out)

    def derivative(self, a):
        a = np.asarray(a, dtype=np.float64)
        out = -np.maximum(1.0 - a, 0.0) / self.gamma
        return out if out.ndim else float(out)

    def conjugate(self, b):
        b = _real(b)
        out = np.where(b <= 0.0, b + self.gamma * b * b / 2.0, np.inf)
        return out if out.ndim else float(out)

    def option1_delta(self, alpha, abar_dot, v_over_lam_n):
        step = (1.0 - abar_dot - self.gamma * alpha) / (self.gamma + v_over_lam_n)
        return max(step, -alpha)


LOSSES = {
    "smoothed_hinge": SmoothedHinge,
    "squared_hinge": SquaredHinge,
}


def make_loss(kind, gamma=1.0):
    """Build a loss by name; dashes and underscores are interchangeable."""
    key = kind.replace("-", "_")
    if key not in LOSSES:
        raise ValueError(f"unknown loss {kind!r}; choose from {sorted(LOSSES)}")
    return LOSSES[key](gamma=float(gamma))


class L2Regularizer:
    """g(w) = 0.5 ||w||^2, 1-strongly convex and self-conjugate."""

    kind = "l2"

    def value(self, w):
        w = np.asarray(w, dtype=np.float64)
        return 0.5 * float(w @ w)

    def conjugate(self, s):
        return self.value(s)

    def grad_conjugate(self, s):
        return np.asarray(s, dtype=np.float64)

    def __repr__(self):
        return "L2Regularizer()"


@dataclass(frozen=True)
class ProblemInstance:
    matrix: DataMatrix
    loss: LossModel
    lam: float
    reg: L2Regularizer = L2Regularizer()

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    @property
    def n(self):
        return self.matrix.n

    @property
    def d(self):
        return self.matrix.d

    def alpha_bar(self, alpha):
        return self.matrix.matvec(alpha) / (self.lam * self.n)


def primal_value(prob, w):
    """P(w) = 1/n sum_i phi(A_i^T w) + lam g(w)."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (prob.d,):
        raise ValueError(f"w must have shape ({prob.d},), got {w.shape}")
    margins = prob.matrix.rmatvec(w)
    return float(np.sum(prob.loss.value(margins))) / prob.n + prob.lam * prob.reg.value(w)


def _checked_alpha(prob, alpha):
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (prob.n,):
        raise ValueError(f"alpha must have shape ({prob.n},), got {alpha.shape}")
    if not prob.loss.is_dual_feasible(alpha):
        bad = np.flatnonzero((alpha < prob.loss.dual_lo - _FEAS_TOL)
                             | (alpha > prob.loss.dual_hi + _FEAS_TOL))
        raise InfeasibleDualError(
            f"alpha[{bad[0]}] = {alpha[bad[0]]!r} outside dual box "
            f"[{prob.loss.dual_lo}, {prob.loss.dual_hi}] of {prob.loss.kind}")
    # absorb roundoff-level excursions
    return prob.loss.project_dual(alpha)


def dual_value(prob, alpha):
    """D(alpha) = -lam g*(abar) - 1/n sum_i phi*(-alpha_i)."""
    alpha = _checked_alpha(prob, alpha)
    abar = prob.alpha_bar(alpha)
    return -prob.lam * prob.reg.conjugate(abar) - float(np.sum(prob.loss.conjugate(-alpha))) / prob.n


def gap_components(prob, w, alpha):
    """Fenchel-Young decomposition of the duality gap.

    Returns
    -------
    gap_g : float
        g(w) + g*(abar) - <w, abar>.
    gap_phi : ndarray, shape (n,)
        phi(A_i^T w) + phi*(-alpha_i) + alpha_i A_i^T w per example.

    The gap equals ``lam * gap_g + gap_phi.mean()``.
    """
    w = np.asarray(w, dtype=np.float64)
    alpha = _checked_alpha(prob, alpha)
    abar = prob.alpha_bar(alpha)
    gap_g = prob.reg.value(w) + prob.reg.conjugate(abar) - float(w @ abar)
    margins = prob.matrix.rmatvec(w)
    gap_phi = prob.loss.value(margins) + prob.loss.conjugate(-alpha) + alpha * margins
    return gap_g, np.asarray(gap_phi)


def duality_gap(prob, w, alpha):
    """P(w) - D(alpha)."""
    return primal_value(prob, w) - dual_value(prob, alpha)
