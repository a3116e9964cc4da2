# cython: language_level=3
"""Compiled SGNS update loop. Semantics must match ``_sgns_py.train_pairs``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline double log_sigmoid(double x) noexcept nogil:
    if x >= 0:
        return -log1p(exp(-x))
    return x - log1p(exp(x))


cdef inline double sigmoid(double x) noexcept nogil:
    cdef double z
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    z = exp(x)
    return z / (1.0 + z)


def train_pairs(double[:, ::1] w_in not None,
                double[:, ::1] w_out not None,
                const int[::1] centers not None,
                const int[::1] contexts not None,
                const int[:, ::1] negatives not None,
                double lr_start, double lr_end,
                long long offset, long long total):
    """Apply one gradient-ascent step per (center, context) pair, in order.

    Returns the summed negative log-likelihood over the processed pairs.
    """
    cdef Py_ssize_t n_pairs = centers.shape[0]
    cdef Py_ssize_t n_neg = negatives.shape[1]
    cdef Py_ssize_t dim = w_in.shape[1]
    cdef Py_ssize_t p, j, d, n_targets
    cdef int c, t
    cdef double lr, f, loss = 0.0
    cdef double *grad = <double *> malloc(dim * sizeof(double))
    cdef int *targets = <int *> malloc((n_neg + 1) * sizeof(int))
    cdef double *g = <double *> malloc((n_neg + 1) * sizeof(double))
    if grad == NULL or targets == NULL or g == NULL:
        free(grad); free(targets); free(g)
        raise MemoryError()
    if centers.shape[0] != contexts.shape[0] or negatives.shape[0] != n_pairs:
        free(grad); free(targets); free(g)
        raise ValueError("pair arrays must be aligned")
    try:
        with nogil:
            for p in range(n_pairs):
                lr = lr_start - (lr_start - lr_end) * (<double> (offset + p)) / (<double> total)
                c = centers[p]
                targets[0] = contexts[p]
                n_targets = 1
                for j in range(n_neg):
                    if negatives[p, j] != contexts[p]:
                        targets[n_targets] = negatives[p, j]
                        n_targets += 1
                # all scores from the pre-update parameters
                for j in range(n_targets):
                    t = targets[j]
                    f = 0.0
                    for d in range(dim):
                        f += w_out[t, d] * w_in[c, d]
                    if j == 0:
                        loss -= log_sigmoid(f)
                        g[j] = lr * (1.0 - sigmoid(f))
                    else:
                        loss -= log_sigmoid(-f)
                        g[j] = -lr * sigmoid(f)
                for d in range(dim):
                    grad[d] = 0.0
                for j in range(n_targets):
                    t = targets[j]
                    for d in range(dim):
                        grad[d] += g[j] * w_out[t, d]
                for j in range(n_targets):
                    t = targets[j]
                    for d in range(dim):
                        w_out[t, d] += g[j] * w_in[c, d]
                for d in range(dim):
                    w_in[c, d] += grad[d]
                if not isfinite(loss):
                    break
    finally:
        free(grad)
        free(targets)
        free(g)
    return loss
