"""Randomized self-checks on small instances (backs the ``verify`` command)."""
from __future__ import annotations

import numpy as np

from .eso import eso_rhs, exact_eso_lhs, importance_probs, v_for
from .problem import DataMatrix, ProblemInstance, SmoothedHinge
from .sampling import (
    DistributedSampling,
    ProductSampling,
    SerialSampling,
    TauNiceSampling,
    detect_product_partition,
)
from .solver import SolverConfig, solve


def random_matrix(rng, n, d, density):
    M = rng.standard_normal((d, n)) * (rng.random((d, n)) < density)
    return DataMatrix(M)


def schemes_for(matrix, rng):
    """Every feasible scheme of the standard test battery for this matrix."""
    n = matrix.n
    out = [SerialSampling.uniform(n)]
    p = importance_probs(v_for(matrix, out[0]), 1.0, 1.0, n)
    # importance weights for an arbitrary lam gamma n keep p proper
    out.append(SerialSampling(p))
    for tau in sorted({2, 3, n}):
        if tau <= n:
            out.append(TauNiceSampling(n, tau))
    groups = detect_product_partition(matrix)
    if groups is not None:
        out.append(ProductSampling(groups))
    if n % 2 == 0:
        for tau in (1, 2):
            if tau <= n // 2:
                out.append(DistributedSampling(n, 2, tau, _random_partition(rng, n, 2)))
    return out


def _random_partition(rng, n, c):
    perm = rng.permutation(n)
    s = n // c
    return [sorted(perm[l * s:(l + 1) * s].tolist()) for l in range(c)]


def eso_certification(n_instances=200, n_h=50, seed=0, max_n=10, max_d=8):
    """Worst slack min(rhs - lhs) over random matrices, schemes and h."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    checked = 0
    for _ in range(n_instances):
        n = int(rng.integers(1, max_n + 1))
        d = int(rng.integers(1, max_d + 1))
        density = float(rng.choice(np.linspace(0.1, 1.0, 10)))
        matrix = random_matrix(rng, n, d, density)
        G = (matrix.A.T @ matrix.A).toarray()
        for scheme in schemes_for(matrix, rng):
            v = v_for(matrix, scheme)
            p = scheme.inclusion_probs()
            Q = scheme.pair_probs() * G
            H = rng.standard_normal((n_h, n))
            lhs = np.einsum("ki,ij,kj->k", H, Q, H)
            rhs = (H * H) @ (p * v)
            worst = min(worst, float(np.min(rhs - lhs)))
            checked += n_h
    return worst, checked


def oracle_agreement(n_instances=50, seed=0, max_n=8, max_d=6):
    """Largest |pairwise - enumeration| over random enumerable cases."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        n = int(rng.integers(1, max_n + 1))
        d = int(rng.integers(1, max_d + 1))
        matrix = random_matrix(rng, n, d, float(rng.uniform(0.1, 1.0)))
        for scheme in schemes_for(matrix, rng):
            h = rng.standard_normal(n)
            a = exact_eso_lhs(matrix, scheme, h, "pairwise")
            b = exact_eso_lhs(matrix, scheme, h, "enumerate")
            worst = max(worst, abs(a - b))
    return worst


def contraction_check(n_runs=100, n=40, d=12, seed=0, checkpoints=(1, 2, 4)):
    """Ratio of mean gap to (1 - theta)^t gap0 at t = k n for each checkpoint k."""
    rng = np.random.default_rng(seed)
    matrix = random_matrix(rng, n, d, 0.4)
    prob = ProblemInstance(matrix, SmoothedHinge(1.0), 1.0 / np.sqrt(n))
    scheme = SerialSampling.uniform(n)
    gaps = []
    for s in range(n_runs):
        cfg = SolverConfig(scheme, epsilon=1e-300, max_epochs=max(checkpoints),
                           gap_check_every=n, seed=s)
        res = solve(prob, cfg)
        gaps.append([r.gap for r in res.trace])
    gaps = np.array(gaps)
    th, g0 = res.theta, gaps[0, 0]
    return {k: float(gaps[:, k].mean() / ((1 - th) ** (k * n) * g0)) for k in checkpoints}


def run_all(seed=0, quick=True):
    """Return a list of (name, passed, detail) tuples."""
    k = 40 if quick else 200
    worst, count = eso_certification(n_instances=k, seed=seed)
    results = [("eso-certification", worst >= -1e-10, f"min slack {worst:.3e} over {count} checks")]
    err = oracle_agreement(n_instances=k // 4, seed=seed)
    results.append(("hadamard-vs-enumeration", err <= 1e-12, f"max abs diff {err:.3e}"))
    ratios = contraction_check(n_runs=60 if quick else 200, seed=seed)
    ok = all(r <= 1.1 for r in ratios.values())
    results.append(("expected-contraction", ok,
                    ", ".join(f"t={k}n: {r:.3f}" for k, r in ratios.items())))
    return results
