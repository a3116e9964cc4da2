"""Black-box recommender contract, reference baselines and a remote client."""
from __future__ import annotations

import logging
import threading
import time
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import requests

from .dataset import Session, TestCase, item_popularity
from .embedding import EmbeddingSpace, nearest_neighbors
from .errors import ContractViolation, RemoteModelError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictionList:
    """Ranked items, optionally with non-increasing scores."""

    items: tuple[str, ...] = ()
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if self.scores is not None:
            object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if len(set(self.items)) != len(self.items):
            raise ValueError("duplicate items in prediction list")
        if self.scores is not None:
            if len(self.scores) != len(self.items):
                raise ValueError("scores and items differ in length")
            if any(b > a for a, b in zip(self.scores, self.scores[1:])):
                raise ValueError("scores must be non-increasing")

    def __len__(self) -> int:
        return len(self.items)

    def __bool__(self) -> bool:
        return bool(self.items)

    def top(self, k: int) -> tuple[str, ...]:
        return self.items[:k]


def check_contract(query: Sequence[str], pred: PredictionList, k: int) -> list[str]:
    """Return human-readable contract violations (empty if compliant)."""
    problems = []
    if len(pred.items) > k:
        problems.append(f"{len(pred.items)} items for k={k}")
    leaked = set(query) & set(pred.items)
    if leaked:
        problems.append(f"query items predicted: {sorted(leaked)}")
    return problems


class RecModel:
    """Base class for anything that can rank items for item-sequence queries.

    Subclasses implement :meth:`predict`. ``deterministic`` declares that the
    same queries always give the same predictions; remote models say False.
    """

    name = "model"
    deterministic = True
    sanitizes = False

    def predict(self, queries: Sequence[Sequence[str]], k: int) -> list[PredictionList]:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r})"


def _take(ranked: Iterable[str], excluded: set, k: int) -> list[str]:
    out = []
    for item in ranked:
        if item in excluded:
            continue
        out.append(item)
        if len(out) == k:
            break
    return out


class PopularityModel(RecModel):
    name = "popularity"

    def __init__(self, train: Sequence[Session]):
        if not train:
            raise ValueError("popularity model needs training sessions")
        self.popularity = item_popularity(train)
        self._ranked = sorted(self.popularity, key=lambda i: (-self.popularity[i], i))

    def predict(self, queries, k):
        out = []
        for q in queries:
            items = _take(self._ranked, set(q), k)
            out.append(PredictionList(items, [float(self.popularity[i]) for i in items]))
        return out


class CooccurrenceModel(RecModel):
    """Session co-occurrence counts, symmetric by construction.

    ``C[a][b]`` is the number of training sessions containing both items. A
    query scores each candidate by summing its co-occurrence with the query
    items; ties fall back to popularity, then item id.
    """

    name = "cooccurrence"

    def __init__(self, train: Sequence[Session]):
        if not train:
            raise ValueError("co-occurrence model needs training sessions")
        self.popularity = item_popularity(train)
        counts: dict[str, Counter] = defaultdict(Counter)
        for s in train:
            uniq = sorted(set(s.items))
            for i, a in enumerate(uniq):
                for b in uniq[i + 1:]:
                    counts[a][b] += 1
                    counts[b][a] += 1
        self.counts = dict(counts)
        self._ranked = sorted(self.popularity, key=lambda i: (-self.popularity[i], i))

    def cooccurrence(self, a: str, b: str) -> int:
        return self.counts.get(a, {}).get(b, 0)

    def predict(self, queries, k):
        out = []
        for q in queries:
            excluded = set(q)
            scores: Counter[str] = Counter()
            for item in q:
                scores.update(self.counts.get(item, {}))
            ranked = sorted(
                (c for c in scores if c not in excluded and scores[c] > 0),
                key=lambda c: (-scores[c], -self.popularity.get(c, 0), c),
            )[:k]
            if len(ranked) < k:
                ranked += _take(self._ranked, excluded | set(ranked), k - len(ranked))
            out.append(PredictionList(ranked, [float(scores.get(c, 0)) for c in ranked]))
        return out


class P2VModel(RecModel):
    """Mean-pooled query embedding, cosine nearest neighbours."""

    name = "p2v"

    def __init__(self, space: EmbeddingSpace):
        if len(space) == 0:
            raise ValueError("empty embedding space")
        self.space = space

    def predict(self, queries, k):
        out = []
        for q in queries:
            vec = self.space.mean_vector(q)
            if vec is None or not np.any(vec):
                out.append(PredictionList())
                continue
            hits = nearest_neighbors(self.space, vec, k, exclude=q)
            out.append(PredictionList([t for t, _ in hits], [1.0 - d for _, d in hits]))
        return out


class OracleModel(RecModel):
    """Answers each known query with its ground truth (test double)."""

    name = "oracle"

    def __init__(self, cases: Iterable[TestCase]):
        self._answers: dict[tuple, tuple] = {}
        for c in cases:
            self._answers.setdefault(tuple(c.query), tuple(c.ground_truth))

    def predict(self, queries, k):
        out = []
        for q in queries:
            gt = self._answers.get(tuple(q), ())
            out.append(PredictionList(_take(dict.fromkeys(gt), set(q), k)))
        return out


class ConstantModel(RecModel):
    """Always the same list, minus query items (test double)."""

    name = "constant"

    def __init__(self, items: Sequence[str]):
        self.items = list(dict.fromkeys(items))

    def predict(self, queries, k):
        return [PredictionList(_take(self.items, set(q), k)) for q in queries]


class FunctionModel(RecModel):
    """Wrap a per-query callable ``fn(query, k) -> list of items``."""

    def __init__(self, fn, name: str = "function"):
        self.fn = fn
        self.name = name

    def predict(self, queries, k):
        return [PredictionList(list(self.fn(tuple(q), k))[:k]) for q in queries]


# -- remote --------------------------------------------------------------------


class RemoteModel(RecModel):
    """Client for the batch prediction protocol.

    POST ``{"queries": [[item, ...], ...], "k": k}`` and expect
    ``{"predictions": [[{"item_id": ..., "score": ...}, ...], ...]}`` back,
    aligned with the queries. Items breaking the prediction contract are
    stripped and tallied in :attr:`violations`; every exchange is kept in
    :attr:`exchanges` so the analysis can be replayed.
    """

    deterministic = False
    sanitizes = True

    def __init__(
        self,
        endpoint: str,
        timeout_ms: int = 5000,
        max_retries: int = 3,
        *,
        batch_size: int = 128,
        max_in_flight: int = 4,
        token: str | None = None,
        backoff_ms: int = 100,
        name: str = "remote",
    ):
        if timeout_ms <= 0 or max_retries < 0 or batch_size < 1 or max_in_flight < 1:
            raise ValueError("invalid remote model configuration")
        self.endpoint = endpoint
        self.timeout = timeout_ms / 1000.0
        self.max_retries = max_retries
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight
        self.backoff = backoff_ms / 1000.0
        self.name = name
        self._headers = {"Content-Type": "application/json"}
        if token:
            self._headers["Authorization"] = f"Bearer {token}"
        self._lock = threading.Lock()
        self.violations: Counter[str] = Counter()
        self.exchanges: list[dict] = []
        self.n_requests = 0

    def _post(self, payload: dict) -> dict:
        last = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            with self._lock:
                self.n_requests += 1
            try:
                resp = requests.post(self.endpoint, json=payload, headers=self._headers, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last = f"{type(exc).__name__}: {exc}"
                logger.warning("remote attempt %d failed: %s", attempt + 1, last)
                continue
            if resp.status_code == 200:
                try:
                    return resp.json()
                except ValueError:
                    raise RemoteModelError("malformed response: body is not JSON") from None
            last = f"HTTP {resp.status_code}"
            if resp.status_code < 500:
                break
            logger.warning("remote attempt %d failed: %s", attempt + 1, last)
        raise RemoteModelError(f"{self.endpoint}: giving up after {attempt + 1} attempt(s): {last}")

    def _sanitize(self, query: Sequence[str], raw, k: int) -> PredictionList:
        if not isinstance(raw, list):
            raise RemoteModelError("malformed response: each prediction must be a list")
        seen = set(query)
        items, scores = [], []
        all_scored = True
        for entry in raw:
            if not isinstance(entry, dict) or not isinstance(entry.get("item_id"), str):
                raise RemoteModelError(f"malformed response entry {entry!r}")
            item = entry["item_id"]
            score = entry.get("score")
            if score is not None and (isinstance(score, bool) or not isinstance(score, (int, float))):
                raise RemoteModelError(f"malformed score {score!r}")
            if item in query:
                self._count("query_item")
                continue
            if item in seen:
                self._count("duplicate")
                continue
            if len(items) >= k:
                self._count("beyond_k")
                continue
            if score is not None and scores and scores[-1] is not None and score > scores[-1]:
                self._count("score_order")
                continue
            seen.add(item)
            items.append(item)
            scores.append(score)
            all_scored = all_scored and score is not None
        return PredictionList(items, scores if (items and all_scored) else None)

    @property
    def n_violations(self) -> int:
        return sum(self.violations.values())

    def _count(self, kind: str) -> None:
        with self._lock:
            self.violations[kind] += 1

    def _predict_batch(self, batch: list[list[str]], k: int) -> list[PredictionList]:
        payload = {"queries": batch, "k": k}
        body = self._post(payload)
        preds = body.get("predictions") if isinstance(body, dict) else None
        if not isinstance(preds, list):
            raise RemoteModelError("malformed response: missing 'predictions' list")
        if len(preds) != len(batch):
            raise RemoteModelError(
                f"response has {len(preds)} prediction lists for {len(batch)} queries"
            )
        out = [self._sanitize(q, raw, k) for q, raw in zip(batch, preds)]
        with self._lock:
            self.exchanges.append({"request": payload, "response": body})
        return out

    def predict(self, queries, k):
        queries = [list(q) for q in queries]
        batches = [queries[i:i + self.batch_size] for i in range(0, len(queries), self.batch_size)]
        if len(batches) <= 1 or self.max_in_flight == 1:
            results = [self._predict_batch(b, k) for b in batches]
        else:
            with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
                results = list(pool.map(lambda b: self._predict_batch(b, k), batches))
        return [p for batch in results for p in batch]


# -- factories -----------------------------------------------------------------


def popularity_model(train: Sequence[Session]) -> PopularityModel:
    return PopularityModel(train)


def cooccurrence_model(train: Sequence[Session]) -> CooccurrenceModel:
    return CooccurrenceModel(train)


def p2v_model(space: EmbeddingSpace) -> P2VModel:
    return P2VModel(space)


def remote_model(endpoint: str, timeout_ms: int = 5000, max_retries: int = 3, **kwargs) -> RemoteModel:
    return RemoteModel(endpoint, timeout_ms, max_retries, **kwargs)


def oracle_model(cases: Iterable[TestCase]) -> OracleModel:
    return OracleModel(cases)


def constant_model(items: Sequence[str]) -> ConstantModel:
    return ConstantModel(items)


def checked_predict(model: RecModel, queries: Sequence[Sequence[str]], k: int) -> list[PredictionList]:
    """Call ``model.predict`` and enforce the prediction contract.

    Sanitizing models (remote) have already stripped offending items; any
    violation from a local model is a bug and raises ContractViolation.
    """
    preds = model.predict(queries, k)
    if len(preds) != len(queries):
        raise ContractViolation(
            f"{model.name}: {len(preds)} predictions for {len(queries)} queries"
        )
    for q, p in zip(queries, preds):
        if not isinstance(p, PredictionList):
            raise ContractViolation(f"{model.name}: predict must return PredictionList objects")
        problems = check_contract(q, p, k)
        if problems:
            raise ContractViolation(f"{model.name}: query {list(q)}: {'; '.join(problems)}")
    return preds

