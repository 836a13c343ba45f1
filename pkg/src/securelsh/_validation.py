"""Input validation in the spirit of ``sklearn.utils.check_array``."""

import operator

import numpy as np
import scipy.sparse as sp


def check_dense(X, *, allow_zero=False, ensure_2d=True):
    """Return ``X`` as a finite float64 array of shape (n, D)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and ensure_2d:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array of dense vectors, got shape {X.shape}")
    if X.shape[1] < 1:
        raise ValueError("dense vectors need at least one coordinate")
    if not np.all(np.isfinite(X)):
        raise ValueError("dense coordinates must be finite")
    if not allow_zero and X.shape[0] and np.any(~X.any(axis=1)):
        raise ValueError("undefined direction: all-zero vector")
    return X


def check_sets(X, universe=None):
    """Return a list of sorted unique uint64 id arrays, one per set.

    Accepts an iterable of iterables of non-negative ints or a scipy sparse
    matrix whose non-zero columns are the members.
    """
    if sp.issparse(X):
        X = sp.csr_matrix(X)
        rows = [X.indices[X.indptr[i] : X.indptr[i + 1]] for i in range(X.shape[0])]
    elif isinstance(X, (set, frozenset)):
        rows = [X]
    elif isinstance(X, np.ndarray) and X.dtype.kind == "f":
        raise TypeError("dense float array where sets were expected")
    else:
        rows = list(X)
    out = []
    for row in rows:
        ids = np.unique(np.fromiter((operator.index(e) for e in row), dtype=np.int64))
        if ids.size == 0:
            raise ValueError("empty input set")
        if ids[0] < 0:
            raise ValueError("set element ids must be non-negative")
        if universe is not None and ids[-1] >= universe:
            raise ValueError(f"set element id {ids[-1]} outside universe of size {universe}")
        out.append(ids.astype(np.uint64))
    return out


def is_set_input(x) -> bool:
    if isinstance(x, (set, frozenset)) or sp.issparse(x):
        return True
    if isinstance(x, np.ndarray):
        return False
    try:
        first = next(iter(x))
    except (TypeError, StopIteration):
        return False
    return isinstance(first, (set, frozenset))


def check_bits(B):
    """Return a (n, l) uint8 array of 0/1 values."""
    B = np.asarray(B)
    if B.ndim == 1:
        B = B[None, :]
    if B.ndim != 2:
        raise ValueError(f"expected a 2-D bit matrix, got shape {B.shape}")
    if B.size and (B.min() < 0 or B.max() > 1):
        raise ValueError("bit matrix entries must be 0 or 1")
    return B.astype(np.uint8, copy=False)


def check_random_state_seed(seed) -> int:
    if seed is None:
        return 0
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    raise TypeError("random_state must be an int seed (all randomness is keyed)")
