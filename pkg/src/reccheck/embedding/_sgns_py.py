"""Pure numpy SGNS update loop; the fallback when the compiled kernel is absent."""
import numpy as np


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def train_pairs(w_in, w_out, centers, contexts, negatives, lr_start, lr_end, offset, total):
    """Apply one gradient-ascent step per (center, context) pair, in order.

    Returns the summed negative log-likelihood over the processed pairs.
    """
    n_pairs = len(centers)
    if len(contexts) != n_pairs or len(negatives) != n_pairs:
        raise ValueError("pair arrays must be aligned")
    loss = 0.0
    labels_cache = {}
    for p in range(n_pairs):
        lr = lr_start - (lr_start - lr_end) * float(offset + p) / float(total)
        c = centers[p]
        ctx = contexts[p]
        negs = negatives[p]
        targets = np.concatenate(([ctx], negs[negs != ctx]))
        n_t = len(targets)
        labels = labels_cache.get(n_t)
        if labels is None:
            labels = np.zeros(n_t)
            labels[0] = 1.0
            labels_cache[n_t] = labels
        v = w_in[c]
        u = w_out[targets]
        f = u @ v
        signed = np.where(labels > 0, f, -f)
        loss -= float(_log_sigmoid(signed).sum())
        g = lr * (labels - _sigmoid(f))
        grad = g @ u
        np.add.at(w_out, targets, np.outer(g, v))
        w_in[c] += grad
        if not np.isfinite(loss):
            break
    return loss
