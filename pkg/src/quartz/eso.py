"""ESO parameters v, the stepsize theta and an exact ESO oracle.

For a sampling S with inclusion probabilities p, a vector v satisfies the
expected separable overapproximation when

    E || sum_{i in S} A_i h_i ||^2 <= sum_i p_i v_i h_i^2   for all h.

Blocks are scalar (one dual variable per example), so every lambda_max in the
closed-form bounds reduces to a weighted squared column norm. All v
computations make one pass over the stored nonzeros.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampling import (
    DistributedSampling,
    ProductSampling,
    SamplingScheme,
    SerialSampling,
    TauNiceSampling,
    _first_violating_row,
)


class SeparabilityError(ValueError):
    """A feature row has nonzeros in two different product groups."""

    def __init__(self, row, groups_hit=None):
        msg = f"feature row {row} spans more than one group"
        if groups_hit is not None:
            msg += f" (groups {sorted(groups_hit)})"
        super().__init__(msg)
        self.row = row


def _weighted_sq_norms(matrix, row_factor):
    """v_i = sum_j row_factor[j] * A_ji^2."""
    data = matrix.data
    w = data * data * row_factor[matrix.indices]
    return np.bincount(matrix.col_ids, weights=w, minlength=matrix.n)


def v_serial(matrix):
    """Squared column norms; valid for every serial sampling."""
    return _weighted_sq_norms(matrix, np.ones(matrix.d))


def _nice_term(omega, tau, denom):
    # (tau - 1)(omega_j - 1) / denom, shared so the distributed bound with
    # c = 1 reproduces the tau-nice one bit for bit
    return (tau - 1) * (omega - 1) / denom


def v_tau_nice(matrix, tau):
    n = matrix.n
    if not 1 <= tau <= n:
        raise ValueError(f"tau must lie in [1, n={n}], got {tau}")
    omega = matrix.row_nnz.astype(np.float64)
    if n == 1:
        factor = np.ones(matrix.d)
    else:
        factor = 1.0 + _nice_term(omega, tau, n - 1)
    return _weighted_sq_norms(matrix, factor)


def v_product(matrix, groups):
    """Product sampling admits the serial v once groups share no feature."""
    groups = tuple(tuple(g) for g in groups)
    row = _first_violating_row(matrix, groups)
    if row is not None:
        lab = np.empty(matrix.n, dtype=np.int64)
        for l, g in enumerate(groups):
            lab[list(g)] = l
        cols = matrix.col_ids[matrix.indices == row]
        raise SeparabilityError(row, set(lab[cols].tolist()))
    return v_serial(matrix)


def active_cells(matrix, partition):
    """omega'_j: how many partition cells hold a nonzero of row j."""
    lab = np.empty(matrix.n, dtype=np.int64)
    for l, P in enumerate(partition):
        lab[list(P)] = l
    c = len(partition)
    pairs = np.unique(matrix.indices.astype(np.int64) * c + lab[matrix.col_ids])
    return np.bincount(pairs // c, minlength=matrix.d)


def v_distributed(matrix, c, tau, partition=None):
    scheme = DistributedSampling(matrix.n, c, tau, partition)
    n = matrix.n
    s = n // c
    denom = max(s - 1, 1)
    omega = matrix.row_nnz.astype(np.float64)
    omega_p = active_cells(matrix, scheme.partition).astype(np.float64)
    # rows with no nonzeros never contribute; keep the ratio finite there
    spread = np.where(omega_p > 0, (omega_p - 1) / np.maximum(omega_p, 1), 0.0)
    factor = (1.0 + _nice_term(omega, tau, denom)
              + (tau * c / n - (tau - 1) / denom) * spread * omega)
    return _weighted_sq_norms(matrix, factor)


def v_for(matrix, scheme):
    """Closed-form v matching the sampling family."""
    if isinstance(scheme, SerialSampling):
        return v_serial(matrix)
    if isinstance(scheme, TauNiceSampling):
        return v_tau_nice(matrix, scheme.tau)
    if isinstance(scheme, ProductSampling):
        return v_product(matrix, scheme.groups)
    if isinstance(scheme, DistributedSampling):
        return v_distributed(matrix, scheme.c, scheme.tau, scheme.partition)
    raise TypeError(f"no closed-form ESO for {type(scheme).__name__}")


def theta(p, v, lam, gamma, n):
    """theta = min_i p_i lam gamma n / (v_i + lam gamma n)."""
    p = np.asarray(p, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    lgn = lam * gamma * n
    return float(np.min(p * lgn / (v + lgn)))


def importance_probs(v, lam, gamma, n):
    """Serial probabilities maximizing theta: p_i proportional to v_i + lam gamma n."""
    w = np.asarray(v, dtype=np.float64) + lam * gamma * n
    return w / w.sum()


@dataclass
class EsoParams:
    v: np.ndarray
    theta: float
    scheme: SamplingScheme
    lambda_gamma_n: float

    @property
    def p(self):
        return self.scheme.inclusion_probs()


def eso_params(matrix, scheme, lam, gamma, v=None):
    """Bundle v and theta for a (matrix, scheme) pair.

    A precomputed ``v`` may be passed for samplings outside the four closed
    forms; it is trusted as given.
    """
    if v is None:
        v = v_for(matrix, scheme)
    n = matrix.n
    return EsoParams(v=np.asarray(v, dtype=np.float64),
                     theta=theta(scheme.inclusion_probs(), v, lam, gamma, n),
                     scheme=scheme, lambda_gamma_n=lam * gamma * n)


def exact_eso_lhs(matrix, scheme, h, method="pairwise"):
    """E || A h_[S] ||^2 computed exactly.

    ``method="pairwise"`` uses h^T (P o A^T A) h with closed-form pair
    probabilities; ``method="enumerate"`` sums over the full support.
    """
    h = np.asarray(h, dtype=np.float64)
    if method == "pairwise":
        G = (matrix.A.T @ matrix.A).toarray()
        return float(h @ ((scheme.pair_probs() * G) @ h))
    if method == "enumerate":
        A = matrix.toarray()
        terms = []
        for S, prob in scheme.enumerate_distribution():
            idx = list(S)
            u = A[:, idx] @ h[idx]
            terms.append(prob * float(u @ u))
        return float(np.sum(terms))
    raise ValueError(f"unknown method {method!r}")


def eso_rhs(p, v, h):
    h = np.asarray(h, dtype=np.float64)
    return float(np.sum(p * v * h * h))
