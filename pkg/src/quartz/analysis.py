"""Complexity bounds, theoretical speedup factors and measured speedups."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eso import active_cells, v_distributed, v_serial, v_tau_nice
from .sampling import DistributedSampling


@dataclass
class ComplexityReport:
    T_iterations: float
    log_factor: float
    T_total: float
    kappa: float
    omega_tilde: float | None = None


def leading_term(p, v, lam, gamma, n):
    """max_i (1/p_i + v_i / (p_i lam gamma n)); equals 1/theta."""
    p = np.asarray(p, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return float(np.max(1.0 / p + v / (p * lam * gamma * n)))


def complexity_bound(p, v, lam, gamma, n, gap0, epsilon, v_serial=None, omega_tilde=None):
    """Iterations guaranteeing E[gap] <= epsilon.

    ``v_serial`` (squared column norms) sets the condition number; it
    defaults to ``v``.
    """
    if not (gap0 > 0 and epsilon > 0):
        raise ValueError("gap0 and epsilon must be positive")
    if epsilon > gap0:
        raise ValueError(f"epsilon={epsilon} exceeds the initial gap {gap0}")
    T = leading_term(p, v, lam, gamma, n)
    log_factor = math.log(gap0 / epsilon)
    vs = v if v_serial is None else v_serial
    return ComplexityReport(T_iterations=T, log_factor=log_factor, T_total=T * log_factor,
                            kappa=float(np.max(vs)) / (lam * gamma), omega_tilde=omega_tilde)


def speedup_tau_nice(n, lam, gamma, omega_tilde, tau, vmax=1.0):
    """Theoretical speedup T(1)/T(tau) of tau-nice over serial uniform sampling.

    ``vmax`` is max_i ||A_i||^2; the closed form assumes 1 and a general value
    enters only through lam gamma n / vmax.
    """
    if not 1 <= tau <= n:
        raise ValueError(f"tau must lie in [1, n={n}], got {tau}")
    if not 1 <= omega_tilde <= n:
        raise ValueError(f"omega_tilde must lie in [1, n={n}], got {omega_tilde}")
    if n == 1:
        return 1.0
    lgn = lam * gamma * n / vmax
    return tau / (1.0 + (tau - 1) * (omega_tilde - 1) / ((n - 1) * (1.0 + lgn)))


def omega_tilde_from_v(v_ser, v_tau, n, tau):
    """Average sparsity implied by the tau-nice bound.

    Chosen so that 1 + (omega~ - 1)(tau - 1)/(n - 1) = max v_tau / max v_serial.
    """
    if tau < 2:
        raise ValueError("omega_tilde is undefined for tau = 1")
    ratio = float(np.max(v_tau)) / float(np.max(v_ser))
    return 1.0 + (n - 1) * (ratio - 1.0) / (tau - 1)


def tau_nice_speedup_from_data(matrix, tau, lam, gamma):
    """T(1)/T(tau) evaluated from the data's own v vectors."""
    n = matrix.n
    vs = v_serial(matrix)
    T1 = leading_term(np.full(n, 1.0 / n), vs, lam, gamma, n)
    Tt = leading_term(np.full(n, tau / n), v_tau_nice(matrix, tau), lam, gamma, n)
    return T1 / Tt


@dataclass
class DistributedSpeedup:
    speedup: float
    T_11: float
    T_ctau: float
    T_ctau_bound: float | None
    omega_hat: float | None


def T_distributed(matrix, c, tau, lam, gamma, partition=None):
    """Leading complexity term T(c, tau) of the (c, tau)-distributed sampling."""
    n = matrix.n
    v = v_distributed(matrix, c, tau, partition)
    return n / (c * tau) + float(np.max(v)) / (lam * gamma * c * tau)


def speedup_distributed(matrix, c, tau, lam, gamma, partition=None):
    """T(1,1)/T(c,tau), plus the partition-free upper bound on T(c,tau).

    The bound replaces the partition-dependent term using
    (1 + 1/(tau-1)) * max_i sum_j (1 + (tau-1)(omega_j-1)/(n/c-1)) A_ji^2,
    available when n/c >= 2 and tau >= 2.
    """
    n = matrix.n
    scheme = DistributedSampling(n, c, tau, partition)
    vs = v_serial(matrix)
    T11 = n + float(np.max(vs)) / (lam * gamma)
    Tct = T_distributed(matrix, c, tau, lam, gamma, scheme.partition)
    bound = omega_hat = None
    s = n // c
    if s >= 2 and tau >= 2:
        omega = matrix.row_nnz.astype(np.float64)
        factor = 1.0 + (tau - 1) * (omega - 1) / (s - 1)
        data = matrix.data
        vin = np.bincount(matrix.col_ids, weights=data * data * factor[matrix.indices],
                          minlength=n)
        bound = n / (c * tau) + (1.0 + 1.0 / (tau - 1)) * float(np.max(vin)) / (lam * gamma * c * tau)
        omega_hat = 1.0 + (s - 1) * (float(np.max(vin)) / float(np.max(vs)) - 1.0) / (tau - 1)
    return DistributedSpeedup(speedup=T11 / Tct, T_11=T11, T_ctau=Tct, T_ctau_bound=bound,
                              omega_hat=omega_hat)


def contour_grid(matrix, lam, gamma, c_values, tau_values):
    """Rows (c, tau, T(c,tau), T(1,1)/T(c,tau)) for every feasible pair."""
    n = matrix.n
    T11 = n + float(np.max(v_serial(matrix))) / (lam * gamma)
    rows = []
    for c in c_values:
        if n % c:
            continue
        for tau in tau_values:
            if tau > n // c:
                continue
            Tct = T_distributed(matrix, c, tau, lam, gamma)
            rows.append((int(c), int(tau), Tct, T11 / Tct))
    return rows


def log_grid(hi, points):
    """Distinct integers log-spaced on [1, hi]."""
    vals = np.unique(np.round(np.logspace(0, math.log10(max(hi, 1)), points)).astype(int))
    return [int(x) for x in vals if 1 <= x <= hi]


def sandwich_check(omega_tilde, tau, n, rtol=1e-12):
    """The three inequalities

        (w-1)(t-1)/(n-1) <= w t / n <= 1 + (w-1)(t-1)/(n-1) <= 1 + w t / n

    for w, t in [1, n]. Returns a triple of booleans.
    """
    a = (omega_tilde - 1) * (tau - 1) / (n - 1) if n > 1 else 0.0
    b = omega_tilde * tau / n
    c = 1.0 + a
    e = 1.0 + b

    def le(x, y):
        return x <= y + rtol * max(abs(x), abs(y), 1.0)

    return le(a, b), le(b, c), le(c, e)


def iterations_to_epsilon(trace, epsilon):
    for rec in trace:
        if rec.gap <= epsilon:
            return rec.iteration
    raise ValueError(f"trace never reaches gap <= {epsilon}")


def practical_speedup(trace_serial, trace_scheme, epsilon):
    """Serial-uniform iterations to epsilon divided by the scheme's.

    Either argument may be a single trace or a list of traces (one per seed);
    lists are reduced by the median before taking the ratio.
    """
    def med(traces):
        if traces and not isinstance(traces[0], (list, tuple)):
            traces = [traces]
        return float(np.median([iterations_to_epsilon(t, epsilon) for t in traces]))

    num, den = med(trace_serial), med(trace_scheme)
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def partition_activity(matrix, partition):
    """omega'_j per feature row for a given partition."""
    return active_cells(matrix, partition)
