"""Random block samplings over [n] = {0, ..., n-1}.

Four families are supported:

* ``SerialSampling``      one index, drawn with probabilities ``p``
* ``TauNiceSampling``     uniform subset of fixed size ``tau``
* ``ProductSampling``     one index from each cell of a feature-disjoint partition
* ``DistributedSampling`` independent tau-nice draws inside ``c`` equal cells

Schemes are immutable. Drawing goes through a ``Sampler`` that owns the random
stream and any scratch buffers, so one scheme can be shared between solvers.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

MAX_SUPPORT = 10 ** 6


class SupportTooLargeError(ValueError):
    def __init__(self, size, limit=MAX_SUPPORT):
        super().__init__(f"support has {size} sets, more than the enumeration limit {limit}")
        self.size = size


def _check_partition(groups, n):
    seen = np.zeros(n, dtype=bool)
    for g in groups:
        if len(g) == 0:
            raise ValueError("partition cells must be nonempty")
        g = np.asarray(g)
        if g.min() < 0 or g.max() >= n:
            raise ValueError(f"partition index out of range [0, {n})")
        if seen[g].any() or len(np.unique(g)) != len(g):
            raise ValueError("partition cells must be disjoint")
        seen[g] = True
    if not seen.all():
        missing = np.flatnonzero(~seen)
        raise ValueError(f"partition does not cover [n]; index {missing[0]} is missing")


def _as_groups(groups):
    return tuple(tuple(int(i) for i in g) for g in groups)


class SamplingScheme:
    """Base class; subclasses define probabilities, drawing and enumeration."""

    n: int

    def inclusion_probs(self):
        """Vector of ``p_i = P(i in S)``."""
        raise NotImplementedError

    def pair_probs(self):
        """Dense matrix of ``P(i in S, k in S)``; diagonal equals ``p``."""
        raise NotImplementedError

    def expected_size(self):
        return float(np.sum(self.inclusion_probs()))

    def support_size(self):
        raise NotImplementedError

    def _iter_support(self):
        raise NotImplementedError

    def enumerate_distribution(self):
        """List of ``(index tuple, probability)`` over the full support."""
        size = self.support_size()
        if size > MAX_SUPPORT:
            raise SupportTooLargeError(size)
        return list(self._iter_support())

    def sampler(self, rng):
        raise NotImplementedError

    def draw(self, rng):
        """Draw a single set. Prefer ``sampler(rng)`` inside loops."""
        return self.sampler(rng)()


@dataclass(frozen=True, eq=False)
class SerialSampling(SamplingScheme):
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64).copy()
        if p.ndim != 1 or p.size == 0:
            raise ValueError("p must be a nonempty vector")
        if np.any(p <= 0):
            i = int(np.flatnonzero(p <= 0)[0])
            raise ValueError(f"sampling is not proper: p[{i}] = {p[i]}")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"serial probabilities must sum to 1, got {p.sum()!r}")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, n):
        return cls(np.full(n, 1.0 / n))

    @property
    def n(self):
        return self.p.size

    @property
    def is_uniform(self):
        return bool(np.all(self.p == self.p[0]))

    def inclusion_probs(self):
        return self.p.copy()

    def pair_probs(self):
        return np.diag(self.p)

    def support_size(self):
        return self.n

    def _iter_support(self):
        for i in range(self.n):
            yield (i,), float(self.p[i])

    def sampler(self, rng):
        if self.is_uniform:
            n = self.n
            return lambda: (int(rng.integers(n)),)
        cdf = np.cumsum(self.p)
        cdf[-1] = 1.0
        last = self.n - 1

        def draw():
            return (min(int(np.searchsorted(cdf, rng.random(), side="right")), last),)

        return draw


class _PartialShuffle:
    """Uniform tau-subsets of a fixed index pool by partial Fisher-Yates.

    The pool is permuted in place and never reset; a partial shuffle of any
    permutation still yields a uniformly random tau-subset.
    """

    def __init__(self, pool, tau, rng):
        self.buf = np.array(pool, dtype=np.int64)
        self.m = self.buf.size
        self.tau = tau
        self.rng = rng
        self._lows = np.arange(tau)

    def __call__(self):
        buf, tau = self.buf, self.tau
        if tau == self.m:
            return buf.tolist()
        js = self.rng.integers(self._lows, self.m)
        for k in range(tau):
            j = js[k]
            buf[k], buf[j] = buf[j], buf[k]
        return buf[:tau].tolist()


@dataclass(frozen=True)
class TauNiceSampling(SamplingScheme):
    n: int
    tau: int

    def __post_init__(self):
        if not 1 <= self.tau <= self.n:
            raise ValueError(f"tau must lie in [1, n={self.n}], got {self.tau}")

    def inclusion_probs(self):
        return np.full(self.n, self.tau / self.n)

    def pair_probs(self):
        n, tau = self.n, self.tau
        off = tau * (tau - 1) / (n * (n - 1)) if n > 1 else 0.0
        P = np.full((n, n), off)
        np.fill_diagonal(P, tau / n)
        return P

    def support_size(self):
        return math.comb(self.n, self.tau)

    def _iter_support(self):
        prob = 1.0 / math.comb(self.n, self.tau)
        for S in itertools.combinations(range(self.n), self.tau):
            yield S, prob

    def sampler(self, rng):
        return _PartialShuffle(np.arange(self.n), self.tau, rng)


@dataclass(frozen=True, eq=False)
class ProductSampling(SamplingScheme):
    """One index uniformly from each group; groups must cover [n] disjointly."""

    groups: tuple
    n: int = field(default=-1)

    def __post_init__(self):
        groups = _as_groups(self.groups)
        n = self.n if self.n >= 0 else sum(len(g) for g in groups)
        _check_partition(groups, n)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "n", n)

    def group_of(self):
        lab = np.empty(self.n, dtype=np.int64)
        for l, g in enumerate(self.groups):
            lab[list(g)] = l
        return lab

    def inclusion_probs(self):
        p = np.empty(self.n)
        for g in self.groups:
            p[list(g)] = 1.0 / len(g)
        return p

    def pair_probs(self):
        p = self.inclusion_probs()
        lab = self.group_of()
        P = np.outer(p, p)
        P[lab[:, None] == lab[None, :]] = 0.0
        np.fill_diagonal(P, p)
        return P

    def support_size(self):
        return math.prod(len(g) for g in self.groups)

    def _iter_support(self):
        prob = 1.0 / self.support_size()
        for S in itertools.product(*self.groups):
            yield tuple(sorted(S)), prob

    def sampler(self, rng):
        groups = [np.asarray(g, dtype=np.int64) for g in self.groups]
        sizes = np.array([len(g) for g in groups])

        def draw():
            picks = rng.integers(0, sizes)
            return [int(g[k]) for g, k in zip(groups, picks)]

        return draw


def contiguous_partition(n, c):
    if c < 1 or n % c:
        raise ValueError(f"n={n} is not divisible by c={c}")
    s = n // c
    return tuple(tuple(range(l * s, (l + 1) * s)) for l in range(c))


@dataclass(frozen=True, eq=False)
class DistributedSampling(SamplingScheme):
    """(c, tau)-distributed sampling: tau-nice inside each of c equal cells."""

    n: int
    c: int
    tau: int
    partition: tuple = None

    def __post_init__(self):
        n, c, tau = self.n, self.c, self.tau
        if c < 1 or n % c:
            raise ValueError(f"n={n} must be an integer multiple of c={c}")
        s = n // c
        if not 1 <= tau <= s:
            raise ValueError(f"tau must lie in [1, n/c={s}], got {tau}")
        part = contiguous_partition(n, c) if self.partition is None else _as_groups(self.partition)
        if len(part) != c or any(len(P) != s for P in part):
            raise ValueError(f"partition must have {c} cells of size {s}")
        _check_partition(part, n)
        object.__setattr__(self, "partition", part)

    @property
    def cell_size(self):
        return self.n // self.c

    def cell_of(self):
        lab = np.empty(self.n, dtype=np.int64)
        for l, P in enumerate(self.partition):
            lab[list(P)] = l
        return lab

    def inclusion_probs(self):
        return np.full(self.n, self.c * self.tau / self.n)

    def pair_probs(self):
        s, tau = self.cell_size, self.tau
        q = tau / s
        within = tau * (tau - 1) / (s * (s - 1)) if s > 1 else 0.0
        lab = self.cell_of()
        P = np.where(lab[:, None] == lab[None, :], within, q * q)
        np.fill_diagonal(P, q)
        return P

    def support_size(self):
        return math.comb(self.cell_size, self.tau) ** self.c

    def _iter_support(self):
        prob = 1.0 / self.support_size()
        per_cell = [list(itertools.combinations(P, self.tau)) for P in self.partition]
        for choice in itertools.product(*per_cell):
            yield tuple(sorted(itertools.chain.from_iterable(choice))), prob

    def sampler(self, rng):
        # one stream for all cells keeps the draw sequence reproducible
        cells = [_PartialShuffle(P, self.tau, rng) for P in self.partition]

        def draw():
            out = []
            for cell in cells:
                out.extend(cell())
            return out

        return draw


def draw(scheme, rng):
    return scheme.draw(rng)


def make_rng(seed):
    """64-bit seeded PCG64 stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


# ---------------------------------------------------------------------------
# product-partition detection


class _UnionFind:
    def __init__(self, n):
        self.parent = np.arange(n)

    def find(self, x):
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                ra, rb = rb, ra
            self.parent[ra] = rb


def detect_product_partition(matrix, n_groups=None):
    """Split examples into groups no two of which share a feature.

    Components of the example-feature incidence graph are found with
    union-find. With ``n_groups`` set, components are merged greedily
    (largest first into the currently smallest group) into at most that many
    groups; merging keeps separability.

    Returns
    -------
    tuple of tuples or None
        Groups sorted by their smallest member, or None when everything is
        one component.
    """
    n = matrix.n
    uf = _UnionFind(n)
    # first example seen in each feature row
    first = np.full(matrix.d, -1, dtype=np.int64)
    rows, cols = matrix.indices, matrix.col_ids
    for j, i in zip(rows.tolist(), cols.tolist()):
        if first[j] < 0:
            first[j] = i
        else:
            uf.union(first[j], i)
    roots = np.array([uf.find(i) for i in range(n)])
    comps = {}
    for i, r in enumerate(roots.tolist()):
        comps.setdefault(r, []).append(i)
    groups = sorted(comps.values(), key=lambda g: g[0])
    if n_groups is not None and len(groups) > n_groups:
        groups = balance_groups(groups, n_groups)
    if len(groups) < 2:
        return None
    return _as_groups(groups)


def balance_groups(groups, k):
    """Greedy bin packing of groups into k bins by size."""
    bins = [[] for _ in range(k)]
    for g in sorted(groups, key=len, reverse=True):
        min(bins, key=len).extend(g)
    return sorted((sorted(b) for b in bins if b), key=lambda g: g[0])


def is_group_separable(matrix, groups):
    return _first_violating_row(matrix, groups) is None


def _first_violating_row(matrix, groups):
    lab = np.full(matrix.n, -1, dtype=np.int64)
    for l, g in enumerate(groups):
        lab[list(g)] = l
    entry_lab = lab[matrix.col_ids]
    lo = np.full(matrix.d, np.iinfo(np.int64).max)
    hi = np.full(matrix.d, -1)
    np.minimum.at(lo, matrix.indices, entry_lab)
    np.maximum.at(hi, matrix.indices, entry_lab)
    bad = np.flatnonzero((hi >= 0) & (lo != hi))
    return int(bad[0]) if bad.size else None


# ---------------------------------------------------------------------------
# partition files: one group per line, whitespace-separated 0-based indices


def read_partition(path):
    groups = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                groups.append(tuple(int(tok) for tok in line.split()))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad partition line: {exc}") from None
    return tuple(groups)


def write_partition(path, groups):
    with open(path, "w") as fh:
        for g in groups:
            fh.write(" ".join(str(int(i)) for i in g) + "\n")
