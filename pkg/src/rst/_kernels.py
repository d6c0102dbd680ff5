"""Batch kernels for the candidate-scoring math.

Candidate selection evaluates entropy, Jensen-Shannon diversity, and the
selection score for every unlabeled document in every bootstrapping round,
so these per-row loops are the hottest non-BLAS code in the package.  Every
kernel exists twice: a pure-numpy implementation (suffix ``_numpy``) and a
numba-compiled twin (suffix ``_numba``).  The unsuffixed public names are
bound at import time to one of the two:

* default: the numba path, when numba imports cleanly;
* ``RST_NUMBA=0`` in the environment forces the numpy path.

Both paths use float64 and agree to well below 1e-12; ``scripts/bench_kernels.py``
times them against each other.

Shapes: ``P`` is ``(N, n)`` with one probability row per document; ``stack``
is ``(m, N, n)`` holding the m classifiers' rows for the same N documents.
Rows are assumed valid (non-negative, summing to 1); validation lives in
:mod:`rst.infometrics`.
"""

import os

import numpy as np

__all__ = [
    "BACKEND",
    "entropy_rows",
    "normalized_entropy_rows",
    "gjs_rows",
    "score_rows",
    "entropy_rows_numpy",
    "normalized_entropy_rows_numpy",
    "gjs_rows_numpy",
    "score_rows_numpy",
]


def _numba_requested() -> bool:
    return os.environ.get("RST_NUMBA", "1").strip().lower() not in ("0", "false", "off")


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def entropy_rows_numpy(P):
    """Shannon entropy (nats) of each row, with the 0*log(0) = 0 convention."""
    P = np.asarray(P, dtype=np.float64)
    logs = np.log(np.where(P > 0.0, P, 1.0))
    return -(P * logs).sum(axis=-1)


def normalized_entropy_rows_numpy(P):
    """Row entropy divided by its maximum log(n), clipped into [0, 1]."""
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[-1]
    return np.minimum(entropy_rows_numpy(P) / np.log(n), 1.0)


def gjs_rows_numpy(stack):
    """Generalized Jensen-Shannon distance per document.

    H(mean of the m rows) minus the mean of the m row entropies; non-negative
    by concavity of entropy (clipped at 0 against rounding).
    """
    stack = np.asarray(stack, dtype=np.float64)
    mean = stack.mean(axis=0)
    return np.maximum(entropy_rows_numpy(mean) - entropy_rows_numpy(stack).mean(axis=0), 0.0)


def score_rows_numpy(stack, alpha):
    """Selection score per document: (prod_i(1 - Hhat_i) + alpha) / (GJS + alpha)."""
    stack = np.asarray(stack, dtype=np.float64)
    confidence = np.prod(1.0 - normalized_entropy_rows_numpy(stack), axis=0)
    return (confidence + alpha) / (gjs_rows_numpy(stack) + alpha)


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

def _build_numba_kernels():
    from numba import njit

    @njit
    def entropy_rows_numba(P):
        N, n = P.shape
        out = np.empty(N, dtype=np.float64)
        for i in range(N):
            h = 0.0
            for j in range(n):
                p = P[i, j]
                if p > 0.0:
                    h -= p * np.log(p)
            out[i] = h
        return out

    @njit
    def normalized_entropy_rows_numba(P):
        N, n = P.shape
        log_n = np.log(n)
        out = np.empty(N, dtype=np.float64)
        for i in range(N):
            h = 0.0
            for j in range(n):
                p = P[i, j]
                if p > 0.0:
                    h -= p * np.log(p)
            h /= log_n
            out[i] = h if h < 1.0 else 1.0
        return out

    @njit
    def gjs_rows_numba(stack):
        m, N, n = stack.shape
        out = np.empty(N, dtype=np.float64)
        for i in range(N):
            member_h = 0.0
            for k in range(m):
                for j in range(n):
                    p = stack[k, i, j]
                    if p > 0.0:
                        member_h -= p * np.log(p)
            mean_h = 0.0
            for j in range(n):
                q = 0.0
                for k in range(m):
                    q += stack[k, i, j]
                q /= m
                if q > 0.0:
                    mean_h -= q * np.log(q)
            g = mean_h - member_h / m
            out[i] = g if g > 0.0 else 0.0
        return out

    @njit
    def score_rows_numba(stack, alpha):
        m, N, n = stack.shape
        log_n = np.log(n)
        out = np.empty(N, dtype=np.float64)
        for i in range(N):
            confidence = 1.0
            for k in range(m):
                h = 0.0
                for j in range(n):
                    p = stack[k, i, j]
                    if p > 0.0:
                        h -= p * np.log(p)
                h /= log_n
                if h > 1.0:
                    h = 1.0
                confidence *= 1.0 - h
            mean_h = 0.0
            for j in range(n):
                q = 0.0
                for k in range(m):
                    q += stack[k, i, j]
                q /= m
                if q > 0.0:
                    mean_h -= q * np.log(q)
            member_h = 0.0
            for k in range(m):
                for j in range(n):
                    p = stack[k, i, j]
                    if p > 0.0:
                        member_h -= p * np.log(p)
            g = mean_h - member_h / m
            if g < 0.0:
                g = 0.0
            out[i] = (confidence + alpha) / (g + alpha)
        return out

    return {
        "entropy_rows": entropy_rows_numba,
        "normalized_entropy_rows": normalized_entropy_rows_numba,
        "gjs_rows": gjs_rows_numba,
        "score_rows": score_rows_numba,
    }


def _contiguous(fn):
    # njit loop kernels want C-contiguous float64; callers may pass views.
    def wrapped(*arrays_and_scalars):
        converted = tuple(
            np.ascontiguousarray(a, dtype=np.float64) if isinstance(a, np.ndarray) else a
            for a in arrays_and_scalars
        )
        return fn(*converted)

    return wrapped


BACKEND = "numpy"
entropy_rows = entropy_rows_numpy
normalized_entropy_rows = normalized_entropy_rows_numpy
gjs_rows = gjs_rows_numpy
score_rows = score_rows_numpy

if _numba_requested():
    try:
        _numba_kernels = _build_numba_kernels()
    except ImportError:
        _numba_kernels = None
    if _numba_kernels is not None:
        BACKEND = "numba"
        entropy_rows = _contiguous(_numba_kernels["entropy_rows"])
        normalized_entropy_rows = _contiguous(_numba_kernels["normalized_entropy_rows"])
        gjs_rows = _contiguous(_numba_kernels["gjs_rows"])
        score_rows = _contiguous(_numba_kernels["score_rows"])
