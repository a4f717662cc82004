"""LIBSVM reading/writing and synthetic instances."""
from __future__ import annotations

import warnings

import numpy as np
from scipy import sparse

from .problem import DataMatrix


class DataFormatError(ValueError):
    pass


def load_libsvm(path, normalize=False, n_features=None):
    """Read ``label idx:val ...`` lines with 1-based feature indices.

    Labels must be +1 or -1 and are folded into the columns. Returns
    ``(matrix, labels)``.
    """
    rows, cols, vals, labels = [], [], [], []
    max_idx = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            try:
                y = float(toks[0])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad label {toks[0]!r}") from None
            if y not in (1.0, -1.0):
                raise DataFormatError(f"{path}:{lineno}: label must be +1 or -1, got {toks[0]!r}")
            i = len(labels)
            labels.append(y)
            entries = {}
            for tok in toks[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    j = int(idx)
                    x = float(val)
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: malformed entry {tok!r}") from None
                if not sep:
                    raise DataFormatError(f"{path}:{lineno}: malformed entry {tok!r}")
                if j < 1:
                    raise DataFormatError(f"{path}:{lineno}: feature index must be >= 1, got {j}")
                if n_features is not None and j > n_features:
                    raise DataFormatError(
                        f"{path}:{lineno}: feature index {j} exceeds declared d={n_features}")
                if j in entries:
                    warnings.warn(f"{path}:{lineno}: duplicate feature {j}; keeping the last value",
                                  stacklevel=2)
                entries[j] = x
            for j, x in entries.items():
                rows.append(j - 1)
                cols.append(i)
                vals.append(y * x)
                max_idx = max(max_idx, j)
    if not labels:
        raise DataFormatError(f"{path}: no examples")
    d = n_features if n_features is not None else max(max_idx, 1)
    A = sparse.csc_matrix((vals, (rows, cols)), shape=(d, len(labels)))
    matrix = DataMatrix(A, labels=np.array(labels))
    if normalize:
        matrix = normalize_columns(matrix)
    return matrix, matrix.labels


def write_libsvm(path, matrix, labels=None):
    """Write columns as LIBSVM lines; values keep full float precision.

    With ``labels`` the stored (folded) columns are unfolded again.
    """
    A = matrix.A
    with open(path, "w") as fh:
        for i in range(matrix.n):
            y = 1.0 if labels is None else float(labels[i])
            idx, val = matrix.column(i)
            parts = [f"{j + 1}:{float(x * y)!r}" for j, x in zip(idx.tolist(), val.tolist())]
            fh.write(" ".join(["+1" if y > 0 else "-1"] + parts) + "\n")
    return A.shape


def normalize_columns(matrix):
    """Scale every nonzero column to unit Euclidean norm."""
    norms = np.sqrt(matrix.col_sq_norms())
    scale = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    A = matrix.A @ sparse.diags(scale)
    return DataMatrix(A, labels=matrix.labels)


def scale_columns(matrix, norms):
    """Rescale columns to the given Euclidean norms (zero columns stay zero)."""
    cur = np.sqrt(matrix.col_sq_norms())
    scale = np.where(cur > 0, np.asarray(norms, dtype=np.float64) / np.where(cur > 0, cur, 1.0), 0.0)
    return DataMatrix(matrix.A @ sparse.diags(scale), labels=matrix.labels)


PROFILES = ("uniform", "fully_sparse", "fully_dense")


def synth_instance(n, d, density=0.1, omega_profile="uniform", seed=0, normalize=False):
    """Reproducible random data matrix with signed Gaussian entries.

    Entries are scaled by 1/sqrt(expected nonzeros per column), so that
    E ||A_i||^2 = 1 before any normalization.

    Profiles
    --------
    uniform
        each entry nonzero independently with probability ``density``;
        every column keeps at least one nonzero
    fully_sparse
        each column gets ``max(1, round(density d))`` features of its own,
        so omega_j is 0 or 1; needs n * k <= d
    fully_dense
        every entry nonzero, omega_j = n
    """
    omega_profile = omega_profile.replace("-", "_")
    if omega_profile not in PROFILES:
        raise ValueError(f"unknown omega profile {omega_profile!r}")
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if not 0 < density <= 1:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    rng = np.random.default_rng(seed)

    if omega_profile == "fully_dense":
        A = rng.standard_normal((d, n))
        A[A == 0] = 1.0
        M = sparse.csc_matrix(A / np.sqrt(d))
    elif omega_profile == "fully_sparse":
        k = max(1, int(round(density * d)))
        if n * k > d:
            raise ValueError(
                f"fully_sparse needs n*k <= d but n={n}, k={k} nonzeros/column, d={d}")
        feats = rng.permutation(d)[: n * k]
        rows = feats
        cols = np.repeat(np.arange(n), k)
        vals = _nonzero_normals(rng, n * k) / np.sqrt(k)
        M = sparse.csc_matrix((vals, (rows, cols)), shape=(d, n))
    else:
        mask = rng.random((d, n)) < density
        # guarantee one nonzero per column
        empty = np.flatnonzero(~mask.any(axis=0))
        mask[rng.integers(0, d, size=empty.size), empty] = True
        rows, cols = np.nonzero(mask)
        vals = _nonzero_normals(rng, rows.size) / np.sqrt(density * d)
        M = sparse.csc_matrix((vals, (rows, cols)), shape=(d, n))

    matrix = DataMatrix(M)
    return normalize_columns(matrix) if normalize else matrix


def _nonzero_normals(rng, size):
    x = rng.standard_normal(size)
    x[x == 0] = 1.0
    return x
