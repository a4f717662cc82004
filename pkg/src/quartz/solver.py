"""Quartz: randomized primal-dual updates under an arbitrary block sampling.

Each iteration
    1. moves w toward grad g*(abar) by a convex combination with weight theta
       (times an optional aggressiveness multiplier beta),
    2. draws a set S of dual coordinates,
    3. computes every dual step in S from the pre-iteration snapshot and
       applies them,
    4. updates abar = 1/(lam n) A alpha incrementally.

Option I maximizes the per-coordinate model

    -phi*(-(alpha_i + D)) - grad g*(abar)^T A_i D - v_i D^2 / (2 lam n)

(closed form for both built-in losses); Option II moves alpha_i a fraction
theta/p_i of the way to -phi'(A_i^T w).
"""
from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .eso import eso_params
from .problem import InfeasibleDualError, dual_value, primal_value
from .sampling import SamplingScheme, SerialSampling, make_rng

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget_exhausted"
ABORTED = "aborted"


class NumericalAbort(RuntimeError):
    pass


@dataclass
class SolverConfig:
    """Run parameters.

    ``gap_check_every`` defaults to one epoch, i.e. ceil(n / E|S|)
    iterations. ``max_epochs`` bounds the run in the same unit.
    """

    scheme: SamplingScheme
    option: str = "I"
    beta: float = 1.0
    epsilon: float = 1e-6
    max_epochs: int = 1000
    gap_check_every: int | None = None
    seed: int = 0
    v: np.ndarray | None = None

    def __post_init__(self):
        self.option = str(self.option).upper()
        if self.option not in ("I", "II"):
            raise ValueError(f"option must be 'I' or 'II', got {self.option!r}")
        if self.beta < 1:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be a positive integer")

    def epoch_length(self):
        return max(1, math.ceil(self.scheme.n / self.scheme.expected_size()))

    def describe(self):
        return {
            "sampling": type(self.scheme).__name__,
            "option": self.option,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "max_epochs": self.max_epochs,
            "gap_check_every": self.gap_check_every or self.epoch_length(),
            "seed": self.seed,
        }


@dataclass
class TraceRecord:
    iteration: int
    epoch: float
    primal: float
    dual: float
    gap: float
    wall_ns: int


@dataclass
class SolverState:
    w: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    p: np.ndarray
    v: np.ndarray
    theta: float
    beta: float
    t: int = 0
    trace: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def init_state(prob, cfg, w0=None, alpha0=None):
    """Compute p, v, theta and abar from scratch; record the starting gap."""
    n, d = prob.n, prob.d
    w = np.zeros(d) if w0 is None else np.array(w0, dtype=np.float64)
    alpha = np.zeros(n) if alpha0 is None else np.array(alpha0, dtype=np.float64)
    if w.shape != (d,) or alpha.shape != (n,):
        raise ValueError("w0/alpha0 have the wrong shape")
    if not prob.loss.is_dual_feasible(alpha):
        raise InfeasibleDualError(f"alpha0 is outside the dual box of {prob.loss.kind}")
    alpha = prob.loss.project_dual(alpha)
    if cfg.scheme.n != n:
        raise ValueError(f"sampling is over {cfg.scheme.n} blocks but the data has n={n}")

    eso = eso_params(prob.matrix, cfg.scheme, prob.lam, prob.loss.gamma, v=cfg.v)
    notes = []
    beta = cfg.beta
    if beta * eso.theta > 1.0:
        beta = 1.0 / eso.theta
        msg = f"beta={cfg.beta} gives beta*theta > 1; clamped to {beta:.6g}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    state = SolverState(w=w, alpha=alpha, alpha_bar=prob.alpha_bar(alpha),
                        p=cfg.scheme.inclusion_probs(), v=eso.v, theta=eso.theta,
                        beta=beta, notes=notes)
    record_gap(state, prob, cfg)
    return state


def record_gap(state, prob, cfg):
    P = primal_value(prob, state.w)
    D = dual_value(prob, state.alpha)
    epoch = state.t * cfg.scheme.expected_size() / prob.n
    rec = TraceRecord(state.t, epoch, P, D, P - D, time.perf_counter_ns())
    state.trace.append(rec)
    return rec


def option1_closed_form(loss, alpha_i, abar_dot, v_i, lam, n):
    """Option I step via the loss's closed form."""
    return loss.option1_delta(alpha_i, abar_dot, v_i / (lam * n))


def option1_model(loss, alpha_i, abar_dot, v_i, lam, n, delta):
    """Value of the Option I block model at step ``delta``."""
    return (-loss.conjugate(-(alpha_i + delta)) - abar_dot * delta
            - v_i * delta * delta / (2.0 * lam * n))


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def option1_numeric(loss, alpha_i, abar_dot, v_i, lam, n, width=1e-12):
    """Maximize the Option I model by golden-section search.

    Works elementwise on arrays. The model is evaluated in extended
    precision so the search can resolve the maximizer well below sqrt(eps).
    Unbounded dual boxes are bracketed by doubling first.
    """
    ld = np.longdouble
    alpha_i, abar_dot, v_i = np.broadcast_arrays(
        np.asarray(alpha_i, dtype=ld), np.asarray(abar_dot, dtype=ld), np.asarray(v_i, dtype=ld))
    scalar = alpha_i.ndim == 0
    alpha_i, abar_dot, v_i = (np.atleast_1d(x).astype(ld) for x in (alpha_i, abar_dot, v_i))
    lam_n = ld(lam) * ld(n)
    lo_b, hi_b = loss.dual_lo, loss.dual_hi

    def model(delta):
        return (-loss.conjugate(-(alpha_i + delta)) - abar_dot * delta
                - v_i * delta * delta / (2 * lam_n))

    lo = ld(lo_b) - alpha_i
    if math.isinf(hi_b):
        hi = lo + 1
        while True:
            grow = model(hi) > model((lo + hi) / 2)
            if not grow.any():
                break
            hi = np.where(grow, lo + 2 * (hi - lo), hi)
    else:
        hi = ld(hi_b) - alpha_i

    a, b = lo.copy(), hi.copy()
    x1 = b - ld(_INVPHI) * (b - a)
    x2 = a + ld(_INVPHI) * (b - a)
    f1, f2 = model(x1), model(x2)
    for _ in range(400):
        if np.all(b - a <= width):
            break
        left = f1 >= f2
        # maximum lies in [a, x2] when f1 >= f2, else in [x1, b]
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        nx1 = np.where(left, b - ld(_INVPHI) * (b - a), x2)
        nx2 = np.where(left, x1, a + ld(_INVPHI) * (b - a))
        x1, x2 = nx1, nx2
        f1, f2 = model(x1), model(x2)
    # endpoints may be the maximizers when the model is monotone on the box
    cands = np.stack([lo, hi, (a + b) / 2])
    vals = np.stack([model(lo), model(hi), model((a + b) / 2)])
    best = cands[np.argmax(vals, axis=0), np.arange(cands.shape[1])].astype(np.float64)
    return float(best[0]) if scalar else best


def option2_delta(loss, alpha_i, margin, theta, p_i):
    """Convex-combination step toward -phi'(A_i^T w)."""
    return -theta / p_i * (alpha_i + loss.derivative(margin))


def step(state, prob, cfg, draw):
    """Run one Quartz iteration in place and return the state.

    ``draw`` is a sampler returned by ``cfg.scheme.sampler(rng)``.
    """
    m = prob.matrix
    indptr, indices, data = m.indptr, m.indices, m.data
    loss, lam_n = prob.loss, prob.lam * prob.n
    w, alpha, abar = state.w, state.alpha, state.alpha_bar
    lo_b, hi_b = loss.dual_lo, loss.dual_hi

    bt = state.beta * state.theta
    # grad g* is the identity for the L2 regularizer
    grad_conj = prob.reg.grad_conjugate(abar)
    w *= 1.0 - bt
    w += bt * grad_conj

    S = draw()
    updates = []
    option1 = cfg.option == "I"
    for i in S:
        lo, hi = indptr[i], indptr[i + 1]
        idx, val = indices[lo:hi], data[lo:hi]
        a_i = float(alpha[i])
        if option1:
            delta = loss.option1_delta(a_i, float(val @ grad_conj[idx]), float(state.v[i]) / lam_n)
        else:
            delta = option2_delta(loss, a_i, float(val @ w[idx]), state.theta, float(state.p[i]))
        new = min(max(a_i + delta, lo_b), hi_b)
        if not math.isfinite(new):
            raise NumericalAbort(f"non-finite dual update at t={state.t + 1}, i={i}")
        updates.append((i, lo, hi, new - a_i, new))
    # all steps above were computed from the snapshot; apply them in index
    # order so abar accumulates identically whatever order S came in
    updates.sort()
    for i, lo, hi, dl, new in updates:
        alpha[i] = new
        if dl != 0.0:
            abar[indices[lo:hi]] += data[lo:hi] * (dl / lam_n)
    state.t += 1
    return state


def check_state(state, prob, rtol=1e-8):
    """Finite iterates and incremental abar matching a fresh recomputation."""
    for name in ("w", "alpha", "alpha_bar"):
        if not np.all(np.isfinite(getattr(state, name))):
            raise NumericalAbort(f"non-finite entries in {name} at t={state.t}")
    fresh = prob.alpha_bar(state.alpha)
    err = np.linalg.norm(state.alpha_bar - fresh)
    scale = max(np.linalg.norm(fresh), 1e-300)
    if err > rtol * scale and err > 1e-14:
        raise NumericalAbort(
            f"incremental abar drifted from recomputation at t={state.t}: "
            f"|diff|={err:.3e}, |abar|={scale:.3e}")


@dataclass
class SolveResult:
    w: np.ndarray
    alpha: np.ndarray
    trace: list
    status: str
    iterations: int
    theta: float
    beta: float
    v: np.ndarray
    p: np.ndarray
    wall_time: float
    message: str = ""
    notes: list = field(default_factory=list)

    @property
    def gap(self):
        return self.trace[-1].gap

    def iterations_to(self, epsilon):
        """First recorded iteration whose gap is <= epsilon, else None."""
        for rec in self.trace:
            if rec.gap <= epsilon:
                return rec.iteration
        return None

    def write_trace_csv(self, path):
        t0 = self.trace[0].wall_ns
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iteration", "epoch", "primal", "dual", "gap", "wall_ns"])
            for r in self.trace:
                wr.writerow([r.iteration, repr(r.epoch), repr(r.primal), repr(r.dual),
                             repr(r.gap), r.wall_ns - t0])

    def summary(self, config=None):
        v = self.v
        out = {
            "status": self.status,
            "message": self.message,
            "iterations": self.iterations,
            "theta": self.theta,
            "beta_effective": self.beta,
            "final_gap": self.gap,
            "final_primal": self.trace[-1].primal,
            "final_dual": self.trace[-1].dual,
            "wall_time_s": self.wall_time,
            "v_stats": {"min": float(v.min()), "max": float(v.max()),
                        "mean": float(v.mean())},
            "notes": list(self.notes),
        }
        if config is not None:
            out["config"] = config
        return out

    def write_summary_json(self, path, config=None):
        with open(path, "w") as fh:
            json.dump(self.summary(config), fh, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def solve(prob, cfg, w0=None, alpha0=None):
    """Iterate until the measured gap is <= epsilon or the budget runs out.

    The gap is evaluated every ``gap_check_every`` iterations; a single run
    stops on its own measured gap.
    """
    start = time.perf_counter()
    state = init_state(prob, cfg, w0, alpha0)
    rng = make_rng(cfg.seed)
    draw = cfg.scheme.sampler(rng)
    every = cfg.gap_check_every or cfg.epoch_length()
    budget = math.ceil(cfg.max_epochs * cfg.epoch_length())

    status, message = BUDGET_EXHAUSTED, ""
    if state.trace[-1].gap <= cfg.epsilon:
        status = CONVERGED
    else:
        try:
            while state.t < budget:
                n_steps = min(every, budget - state.t)
                for _ in range(n_steps):
                    step(state, prob, cfg, draw)
                check_state(state, prob)
                rec = record_gap(state, prob, cfg)
                if not math.isfinite(rec.gap):
                    raise NumericalAbort(f"non-finite gap at t={state.t}")
                if rec.gap <= cfg.epsilon:
                    status = CONVERGED
                    break
        except NumericalAbort as exc:
            status, message = ABORTED, str(exc)
    return SolveResult(w=state.w, alpha=state.alpha, trace=state.trace, status=status,
                       iterations=state.t, theta=state.theta, beta=state.beta, v=state.v,
                       p=state.p, wall_time=time.perf_counter() - start, message=message,
                       notes=state.notes)


def trace_as_dicts(trace):
    return [asdict(r) for r in trace]


def uniform_config(n, **kw):
    return SolverConfig(scheme=SerialSampling.uniform(n), **kw)
