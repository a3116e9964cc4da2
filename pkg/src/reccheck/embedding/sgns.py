"""Skip-gram with negative sampling over item or feature sequences."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import TrainingError
from . import _backend
from .space import EmbeddingSpace

logger = logging.getLogger(__name__)

NEG_TABLE_SIZE = 1_000_000
UNIGRAM_POWER = 0.75


@dataclass(frozen=True)
class EmbeddingConfig:
    """Hyperparameters; ``window=None`` uses the whole session as context."""

    dim: int = 32
    window: int | None = 3
    negatives: int = 5
    epochs: int = 5
    lr_start: float = 0.025
    lr_end: float = 1e-4
    min_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.window is not None and self.window < 1:
            raise ValueError("window must be positive or None")
        for name in ("negatives", "epochs", "min_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not (0 < self.lr_end < self.lr_start):
            raise ValueError("need 0 < lr_end < lr_start")

    def to_dict(self) -> dict:
        return asdict(self)


# -- objective (reference implementation used by the gradient check) --------


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return np.exp(_log_sigmoid(x))


def sgns_objective(center, context, negatives) -> float:
    """log σ(u_ctx·v) + Σ log σ(−u_neg·v) for one (center, context) pair."""
    v = np.asarray(center, dtype=np.float64)
    u = np.asarray(context, dtype=np.float64)
    negs = np.asarray(negatives, dtype=np.float64).reshape(-1, v.shape[0])
    return float(_log_sigmoid(u @ v) + _log_sigmoid(-(negs @ v)).sum())


def sgns_gradient(center, context, negatives):
    """Analytic gradient of :func:`sgns_objective`.

    Returns ``(d_center, d_context, d_negatives)``.
    """
    v = np.asarray(center, dtype=np.float64)
    u = np.asarray(context, dtype=np.float64)
    negs = np.asarray(negatives, dtype=np.float64).reshape(-1, v.shape[0])
    g_pos = 1.0 - _sigmoid(u @ v)
    g_neg = -_sigmoid(negs @ v)
    d_center = g_pos * u + g_neg @ negs
    return d_center, g_pos * v, np.outer(g_neg, v)


def train_step(w_in, w_out, center: int, context: int, negatives: Sequence[int], lr: float) -> float:
    """Run the active kernel on a single pair at a fixed learning rate, in place."""
    return _backend.train_pairs(
        w_in,
        w_out,
        np.array([center], dtype=np.int32),
        np.array([context], dtype=np.int32),
        np.array([negatives], dtype=np.int32),
        lr,
        lr,
        0,
        1,
    )


# -- training ----------------------------------------------------------------


def negative_table(counts: np.ndarray, size: int = NEG_TABLE_SIZE) -> np.ndarray:
    """Unigram^0.75 sampling table: token index ``i`` fills a share of slots
    proportional to ``counts[i] ** 0.75``."""
    weights = np.asarray(counts, dtype=np.float64) ** UNIGRAM_POWER
    cum = np.cumsum(weights / weights.sum())
    slots = (np.arange(size, dtype=np.float64) + 0.5) / size
    table = np.searchsorted(cum, slots, side="right")
    return np.minimum(table, len(counts) - 1).astype(np.int32)


def _epoch_pairs(seqs: list[np.ndarray], order: np.ndarray, window: int | None):
    """(center, context) index pairs, sequence by sequence, position by position."""
    ordered = [seqs[i] for i in order]
    lengths = np.array([len(s) for s in ordered], dtype=np.int64)
    flat = np.concatenate(ordered)
    starts = np.repeat(np.cumsum(lengths) - lengths, lengths)
    ends = starts + np.repeat(lengths, lengths)
    pos = np.arange(len(flat), dtype=np.int64)
    w = int(lengths.max()) - 1 if window is None else window
    centers, contexts, keys = [], [], []
    for d in range(-w, w + 1):
        if d == 0:
            continue
        other = pos + d
        ok = (other >= starts) & (other < ends)
        centers.append(pos[ok])
        contexts.append(other[ok])
        keys.append(np.full(int(ok.sum()), d, dtype=np.int64))
    c = np.concatenate(centers)
    x = np.concatenate(contexts)
    srt = np.lexsort((np.concatenate(keys), c))
    return flat[c[srt]].astype(np.int32), flat[x[srt]].astype(np.int32)


def train_skipgram(sequences: Iterable[Sequence[str]], config: EmbeddingConfig = EmbeddingConfig()) -> EmbeddingSpace:
    """Train item (or feature) vectors with SGNS.

    Randomness (initialisation, per-epoch sequence order, negative draws)
    comes from one generator seeded with ``config.seed``, so a fixed seed and
    kernel give bit-identical vectors. The learning rate decays linearly from
    ``lr_start`` to ``lr_end`` over all processed pairs.
    """
    sequences = [list(s) for s in sequences]
    counts = Counter(t for s in sequences for t in s)
    keep = {t for t, c in counts.items() if c >= config.min_count}
    filtered = [[t for t in s if t in keep] for s in sequences]
    filtered = [s for s in filtered if len(s) >= 2]
    if not filtered:
        raise TrainingError(
            "empty effective vocabulary: no sequence of length >= 2 survives "
            f"min_count={config.min_count}"
        )
    used = Counter(t for s in filtered for t in s)
    vocab = sorted(used, key=lambda t: (-counts[t], t))
    index = {t: i for i, t in enumerate(vocab)}
    seqs = [np.array([index[t] for t in s], dtype=np.int32) for s in filtered]

    rng = np.random.default_rng(config.seed % 2**64)
    n, dim = len(vocab), config.dim
    w_in = (rng.random((n, dim)) - 0.5) / dim
    w_out = np.zeros((n, dim))
    table = negative_table(np.array([counts[t] for t in vocab]))

    per_epoch = sum(
        _n_pairs(len(s), config.window) for s in seqs
    )
    total = per_epoch * config.epochs
    done = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(seqs))
        centers, contexts = _epoch_pairs(seqs, order, config.window)
        negs = table[rng.integers(0, len(table), size=(len(centers), config.negatives))]
        loss = _backend.train_pairs(
            w_in, w_out, centers, contexts, np.ascontiguousarray(negs, dtype=np.int32),
            config.lr_start, config.lr_end, done, total,
        )
        done += len(centers)
        if not np.isfinite(loss) or not np.all(np.isfinite(w_in)):
            raise TrainingError(
                f"non-finite loss in epoch {epoch} after {done} pairs "
                f"(lr_start={config.lr_start}, dim={dim}); lower the learning rate"
            )
        logger.debug("epoch %d: mean loss %.5f over %d pairs", epoch, loss / max(1, len(centers)), len(centers))

    norms = np.linalg.norm(w_in, axis=1)
    if np.any(norms == 0):
        raise TrainingError("zero-norm vector after training")
    return EmbeddingSpace(vocab, w_in, {t: counts[t] for t in vocab})


def _n_pairs(length: int, window: int | None) -> int:
    w = length - 1 if window is None else min(window, length - 1)
    # each position pairs with up to w neighbours on each side
    return sum(min(i, w) + min(length - 1 - i, w) for i in range(length))


def feature_sequences(sessions, catalog, feature: str) -> list[list[str]]:
    """Map each session to a feature token sequence (``brand`` or ``category_leaf``).

    Items without the feature are dropped, consecutive repeats collapse to
    one token and sequences shorter than two tokens are discarded.
    """
    if feature not in ("brand", "category_leaf"):
        raise ValueError(f"unknown feature {feature!r}")
    out = []
    for s in sessions:
        tokens: list[str] = []
        for item in s.items:
            meta = catalog.get(item)
            tok = getattr(meta, feature) if meta is not None else None
            if tok is None:
                continue
            if not tokens or tokens[-1] != tok:
                tokens.append(tok)
        if len(tokens) >= 2:
            out.append(tokens)
    return out
