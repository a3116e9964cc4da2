"""Token vectors with cosine geometry and brute-force neighbor search."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import DataError


def cosine_distance(u, v) -> float:
    """``1 - cos(u, v)``, clamped to [0, 2] against rounding."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {v.shape}")
    uu = float(np.dot(u, u))
    vv = float(np.dot(v, v))
    if uu == 0.0 or vv == 0.0:
        raise ValueError("cosine distance undefined for zero-norm vectors")
    d = 1.0 - float(np.dot(u, v)) / np.sqrt(uu * vv)
    return min(2.0, max(0.0, d))


class EmbeddingSpace:
    """Immutable token -> vector map.

    Parameters
    ----------
    tokens
        Vocabulary, one entry per row of ``matrix``.
    matrix
        ``(len(tokens), dim)`` array of input vectors.
    vocab_counts
        Training count per token.
    """

    def __init__(self, tokens: Sequence[str], matrix, vocab_counts: Mapping[str, int] | None = None):
        matrix = np.array(matrix, dtype=np.float64, copy=True)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise ValueError("matrix must have one row per token")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("embedding contains NaN or Inf")
        matrix.setflags(write=False)
        self._tokens = tuple(tokens)
        self._index = {t: i for i, t in enumerate(self._tokens)}
        self._matrix = matrix
        self._counts = dict(vocab_counts or {})
        norms = np.linalg.norm(matrix, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            unit = np.where(norms[:, None] > 0, matrix / norms[:, None], 0.0)
        unit.setflags(write=False)
        self._unit = unit
        # rank of each token in lexicographic order, for deterministic tie-breaks
        lex = np.empty(len(self._tokens), dtype=np.int64)
        lex[np.argsort(np.array(self._tokens, dtype=object), kind="stable")] = np.arange(len(self._tokens))
        self._lex_rank = lex

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def vocab_counts(self) -> Mapping[str, int]:
        return dict(self._counts)

    @property
    def vectors(self) -> dict[str, np.ndarray]:
        return {t: self._matrix[i] for t, i in self._index.items()}

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token) -> bool:
        return token in self._index

    def __getitem__(self, token: str) -> np.ndarray:
        return self._matrix[self._index[token]]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSpace):
            return NotImplemented
        return (
            self._tokens == other._tokens
            and np.array_equal(self._matrix, other._matrix)
            and self._counts == other._counts
        )

    def mean_vector(self, tokens: Iterable[str]) -> np.ndarray | None:
        """Mean of the vectors of the in-vocabulary tokens, or None if none are known."""
        rows = [self._index[t] for t in tokens if t in self._index]
        if not rows:
            return None
        return self._matrix[rows].mean(axis=0)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self._tokens).encode())
        h.update(np.ascontiguousarray(self._matrix).tobytes())
        return h.hexdigest()

    def nearest_neighbors(self, query, k: int, exclude: Iterable[str] = ()) -> list[tuple[str, float]]:
        return nearest_neighbors(self, query, k, exclude)

    # -- serialization: {"dim", "count"} header, then one token per line ----

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"dim": self.dim, "count": len(self)}) + "\n")
            for t, row in zip(self._tokens, self._matrix):
                rec = {"token": t, "vector": [float(x) for x in row]}
                if t in self._counts:
                    rec["freq"] = self._counts[t]
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def load(cls, path) -> "EmbeddingSpace":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if ln.strip()]
        if not lines:
            raise DataError(f"{path}: empty embedding file")
        header = json.loads(lines[0])
        dim, count = header.get("dim"), header.get("count")
        if not isinstance(dim, int) or not isinstance(count, int):
            raise DataError(f"{path}: header must carry integer dim and count")
        if len(lines) - 1 != count:
            raise DataError(f"{path}: header says {count} tokens, found {len(lines) - 1}")
        tokens, rows, counts = [], [], {}
        for n, line in enumerate(lines[1:], start=2):
            rec = json.loads(line)
            vec = rec.get("vector")
            if not isinstance(vec, list) or len(vec) != dim:
                raise DataError(f"{path}: line {n}: vector must have {dim} components")
            tokens.append(rec["token"])
            rows.append(vec)
            if "freq" in rec:
                counts[rec["token"]] = rec["freq"]
        matrix = np.array(rows, dtype=np.float64).reshape(count, dim)
        return cls(tokens, matrix, counts)


def nearest_neighbors(
    space: EmbeddingSpace, query, k: int, exclude: Iterable[str] = ()
) -> list[tuple[str, float]]:
    """The ``k`` closest tokens by cosine distance.

    ``query`` is a token (itself excluded from the result) or a vector. Ties
    are broken by token in lexicographic order.
    """
    if k < 1:
        raise ValueError("k must be positive")
    excluded = set(exclude)
    if isinstance(query, str):
        if query not in space:
            raise KeyError(f"unknown token {query!r}")
        excluded.add(query)
        qvec = space[query]
    else:
        qvec = np.asarray(query, dtype=np.float64)
        if qvec.shape != (space.dim,):
            raise ValueError(f"query vector must have shape ({space.dim},)")
    qnorm = float(np.linalg.norm(qvec))
    if qnorm == 0.0:
        raise ValueError("zero-norm query vector")
    dist = 1.0 - space._unit @ (qvec / qnorm)
    np.clip(dist, 0.0, 2.0, out=dist)
    order = np.lexsort((space._lex_rank, dist))
    out = []
    for i in order:
        tok = space.tokens[i]
        if tok in excluded:
            continue
        out.append((tok, float(dist[i])))
        if len(out) == k:
            break
    return out
