"""Interaction logs, item catalogs, sessions, splits and test-case construction."""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import DataError

logger = logging.getLogger(__name__)

CATEGORY_SEP = ">"


class EventType(str, Enum):
    VIEW = "view"
    ADD = "add"
    PURCHASE = "purchase"


@dataclass(frozen=True)
class Interaction:
    session_id: str
    item_id: str
    timestamp: int
    event_type: EventType = EventType.VIEW

    def __post_init__(self):
        if not self.item_id:
            raise ValueError("item_id must be non-empty")
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")


@dataclass(frozen=True)
class Session:
    """Items of one session in ascending timestamp order.

    ``timestamps`` runs parallel to ``items``; it is kept so that splits can
    be made on the first interaction time.
    """

    session_id: str
    items: tuple[str, ...]
    timestamps: tuple[int, ...]

    def __post_init__(self):
        if not self.items:
            raise ValueError(f"session {self.session_id!r} has no items")
        if len(self.items) != len(self.timestamps):
            raise ValueError("items and timestamps must be the same length")

    @property
    def start(self) -> int:
        return self.timestamps[0]

    def __len__(self) -> int:
        return len(self.items)


SessionSet = tuple[Session, ...]


@dataclass(frozen=True)
class ItemMeta:
    item_id: str
    price: float | None = None
    brand: str | None = None
    category_path: tuple[str, ...] | None = None
    extra: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.price is not None and (self.price < 0 or not math.isfinite(self.price)):
            raise ValueError(f"invalid price {self.price!r} for item {self.item_id!r}")
        if self.category_path is not None:
            if not self.category_path or not all(self.category_path):
                raise ValueError(f"empty category label for item {self.item_id!r}")

    @property
    def category_leaf(self) -> str | None:
        return self.category_path[-1] if self.category_path else None


class Taxonomy:
    """Category tree whose nodes are path prefixes; the root is ``()``.

    Because every node *is* its own root-to-node path, the lowest common
    ancestor of two nodes is their longest common prefix.
    """

    ROOT: tuple[str, ...] = ()

    def __init__(self, paths: Iterable[Sequence[str]]):
        nodes = {self.ROOT}
        for path in paths:
            path = tuple(path)
            for i in range(1, len(path) + 1):
                nodes.add(path[:i])
        self._nodes = frozenset(nodes)

    def __contains__(self, node) -> bool:
        return tuple(node) in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def nodes(self) -> frozenset[tuple[str, ...]]:
        return self._nodes

    @staticmethod
    def parent(node: tuple[str, ...]) -> tuple[str, ...] | None:
        return node[:-1] if node else None

    @staticmethod
    def depth(node: Sequence[str]) -> int:
        return len(node)

    @staticmethod
    def lca(a: Sequence[str], b: Sequence[str]) -> tuple[str, ...]:
        n = 0
        for x, y in zip(a, b):
            if x != y:
                break
            n += 1
        return tuple(a[:n])

    def distance(self, a: Sequence[str], b: Sequence[str]) -> int:
        """Number of edges between two nodes of the tree."""
        for node in (a, b):
            if tuple(node) not in self._nodes:
                raise KeyError(f"unknown taxonomy node {CATEGORY_SEP.join(node)!r}")
        return len(a) + len(b) - 2 * len(self.lca(a, b))


class Catalog:
    """Item metadata keyed by item id, plus the induced category taxonomy."""

    def __init__(self, items: Iterable[ItemMeta]):
        table: dict[str, ItemMeta] = {}
        for meta in items:
            if meta.item_id in table:
                raise DataError(f"duplicate item_id {meta.item_id!r}")
            table[meta.item_id] = meta
        self._items = table
        self.taxonomy = Taxonomy(m.category_path for m in table.values() if m.category_path)

    @property
    def items(self) -> Mapping[str, ItemMeta]:
        return self._items

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item_id) -> bool:
        return item_id in self._items

    def __iter__(self) -> Iterator[ItemMeta]:
        return iter(self._items.values())

    def get(self, item_id: str) -> ItemMeta | None:
        return self._items.get(item_id)

    def brand(self, item_id: str) -> str | None:
        meta = self._items.get(item_id)
        return meta.brand if meta else None

    def price(self, item_id: str) -> float | None:
        meta = self._items.get(item_id)
        return meta.price if meta else None

    def category_node(self, item_id: str) -> tuple[str, ...] | None:
        """Taxonomy node of the item's leaf category, or None if it has none."""
        meta = self._items.get(item_id)
        return meta.category_path if meta else None

    def has_field(self, name: str) -> bool:
        """True if at least one item carries a value for ``name``."""
        return any(getattr(m, name) is not None for m in self._items.values())


@dataclass(frozen=True)
class TestCase:
    """Query item sequence (X) and ground-truth items (Y)."""

    __test__ = False  # keep pytest from collecting this class

    query: tuple[str, ...]
    ground_truth: tuple[str, ...]
    session_id: str = ""

    def __post_init__(self):
        if not self.query:
            raise ValueError("query must be non-empty")
        if not self.ground_truth:
            raise ValueError("ground_truth must be non-empty")
        if set(self.query) & set(self.ground_truth):
            raise ValueError("query and ground_truth overlap")

    @property
    def target(self) -> str:
        return self.ground_truth[0]


class TestCaseList(list):
    """List of test cases that remembers how many sessions were dropped."""

    __test__ = False

    def __init__(self, cases=(), dropped: int = 0):
        super().__init__(cases)
        self.dropped = dropped


@dataclass(frozen=True)
class Dataset:
    train: SessionSet
    test: SessionSet
    catalog: Catalog
    popularity: Mapping[str, int]

    def __post_init__(self):
        overlap = {s.session_id for s in self.train} & {s.session_id for s in self.test}
        if overlap:
            raise DataError(f"train/test share session ids: {sorted(overlap)[:5]}")


# -- loading -----------------------------------------------------------------

_INTERACTION_FIELDS = ("session_id", "item_id", "timestamp")


def _iter_rows(path: Path, fmt: str) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, row_dict) pairs; line numbers are 1-based file lines."""
    if fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
                if not isinstance(row, dict):
                    raise DataError(f"{path}: line {lineno}: expected a JSON object")
                yield lineno, row
    elif fmt == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                if None in row:
                    raise DataError(f"{path}: line {reader.line_num}: too many columns")
                yield reader.line_num, {k: v for k, v in row.items() if v not in ("", None)}
    else:
        raise DataError(f"unsupported format {fmt!r} (expected jsonl or csv)")


def _parse_interaction(row: dict, where: str) -> Interaction:
    for name in _INTERACTION_FIELDS:
        if row.get(name) in (None, ""):
            raise DataError(f"{where}: missing required field {name!r}")
    ts = row["timestamp"]
    try:
        if isinstance(ts, bool) or (isinstance(ts, float) and not ts.is_integer()):
            raise ValueError
        ts = int(ts)
    except (TypeError, ValueError):
        raise DataError(f"{where}: timestamp must be an integer, got {row['timestamp']!r}") from None
    if ts < 0:
        raise DataError(f"{where}: negative timestamp {ts}")
    try:
        event = EventType(row.get("event_type") or "view")
    except ValueError:
        raise DataError(f"{where}: unknown event_type {row.get('event_type')!r}") from None
    return Interaction(str(row["session_id"]), str(row["item_id"]), ts, event)


def load_interactions(path, format: str = "jsonl") -> list[Interaction]:
    """Read interactions in file order.

    Raises DataError naming the offending line for unparsable rows, missing
    required fields and negative timestamps.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    return [_parse_interaction(row, f"{path}: line {n}") for n, row in _iter_rows(path, format)]


def _parse_item(row: dict, where: str) -> ItemMeta:
    if row.get("item_id") in (None, ""):
        raise DataError(f"{where}: missing required field 'item_id'")
    price = row.get("price")
    if price is not None:
        try:
            price = float(price)
        except (TypeError, ValueError):
            raise DataError(f"{where}: price must be numeric, got {row['price']!r}") from None
        if price < 0 or not math.isfinite(price):
            raise DataError(f"{where}: negative or non-finite price {price}")
    path = row.get("category_path")
    if path is not None:
        if isinstance(path, list):
            labels = tuple(str(p).strip() for p in path)
        else:
            labels = tuple(p.strip() for p in str(path).split(CATEGORY_SEP))
        if not labels or not all(labels):
            raise DataError(f"{where}: empty label in category_path {path!r}")
        path = labels
    extra = row.get("extra")
    if extra is None:
        # csv: any column beyond the known ones is kept as extra metadata
        known = {"item_id", "price", "brand", "category_path", "extra"}
        extra = {k: str(v) for k, v in row.items() if k not in known}
    elif isinstance(extra, str):
        try:
            extra = json.loads(extra)
        except json.JSONDecodeError:
            raise DataError(f"{where}: extra must be a JSON object") from None
    if not isinstance(extra, dict):
        raise DataError(f"{where}: extra must be an object")
    brand = row.get("brand")
    return ItemMeta(
        item_id=str(row["item_id"]),
        price=price,
        brand=str(brand) if brand not in (None, "") else None,
        category_path=path,
        extra={str(k): str(v) for k, v in extra.items()},
    )


def load_catalog(path, format: str = "jsonl") -> Catalog:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    items = []
    seen: dict[str, int] = {}
    for lineno, row in _iter_rows(path, format):
        meta = _parse_item(row, f"{path}: line {lineno}")
        if meta.item_id in seen:
            raise DataError(
                f"{path}: line {lineno}: duplicate item_id {meta.item_id!r} "
                f"(first seen on line {seen[meta.item_id]})"
            )
        seen[meta.item_id] = lineno
        items.append(meta)
    return Catalog(items)


# -- sessions ----------------------------------------------------------------


def sessionize(interactions: Iterable[Interaction], gap_ms: int | None = None) -> SessionSet:
    """Group interactions into sessions ordered by first appearance of the id.

    Within a session items are sorted by timestamp; equal timestamps keep
    input order. With ``gap_ms`` a session is cut wherever two consecutive
    timestamps differ by more than ``gap_ms``; only sessions that are actually
    cut get ``#0``, ``#1``, ... suffixes.
    """
    if gap_ms is not None and gap_ms <= 0:
        raise ValueError("gap_ms must be positive")
    groups: dict[str, list[Interaction]] = {}
    for it in interactions:
        groups.setdefault(it.session_id, []).append(it)

    out: list[Session] = []
    for sid, rows in groups.items():
        rows.sort(key=lambda r: r.timestamp)  # stable: ties keep input order
        parts = [rows]
        if gap_ms is not None:
            parts = [[rows[0]]]
            for prev, cur in zip(rows, rows[1:]):
                if cur.timestamp - prev.timestamp > gap_ms:
                    parts.append([])
                parts[-1].append(cur)
        for i, part in enumerate(parts):
            name = sid if len(parts) == 1 else f"{sid}#{i}"
            out.append(
                Session(name, tuple(r.item_id for r in part), tuple(r.timestamp for r in part))
            )
    return tuple(out)


def flatten(sessions: Iterable[Session]) -> list[Interaction]:
    """Inverse of :func:`sessionize` (event types are not preserved)."""
    return [
        Interaction(s.session_id, item, ts)
        for s in sessions
        for item, ts in zip(s.items, s.timestamps)
    ]


def temporal_split(
    sessions: Sequence[Session],
    *,
    timestamp: int | None = None,
    test_fraction: float | None = None,
) -> tuple[SessionSet, SessionSet]:
    """Split sessions by their first interaction time.

    Exactly one of ``timestamp`` or ``test_fraction`` must be given. With a
    timestamp, sessions starting strictly before it are train. With a
    fraction ``f``, the ``ceil(f * n)`` latest-starting sessions are test
    (ties ordered by session id).
    """
    if (timestamp is None) == (test_fraction is None):
        raise ValueError("give exactly one of timestamp or test_fraction")
    if not sessions:
        raise DataError("cannot split an empty session set")
    if timestamp is not None:
        train = tuple(s for s in sessions if s.start < timestamp)
        test = tuple(s for s in sessions if s.start >= timestamp)
    else:
        if not 0.0 < test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
        ordered = sorted(sessions, key=lambda s: (s.start, s.session_id))
        n_test = math.ceil(test_fraction * len(ordered))
        train, test = tuple(ordered[: len(ordered) - n_test]), tuple(ordered[len(ordered) - n_test:])
    if not train:
        raise DataError("split leaves the training set empty")
    if not test:
        raise DataError("split leaves the test set empty")
    return train, test


def _dedup(items: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(items))


def build_test_cases(
    test: Iterable[Session], scheme: str = "next_item", min_query_len: int = 1
) -> TestCaseList:
    """Leave-last-out test cases.

    ``next_item`` uses the raw session; ``cart_last`` first drops repeated
    items (keeping first occurrences). Sessions whose target also appears in
    the query are dropped and counted in ``.dropped``.
    """
    if scheme not in ("next_item", "cart_last"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if min_query_len < 1:
        raise ValueError("min_query_len must be positive")
    cases = []
    dropped = 0
    for s in test:
        items = list(s.items) if scheme == "next_item" else _dedup(s.items)
        if len(items) < min_query_len + 1:
            continue
        query, target = tuple(items[:-1]), items[-1]
        if target in query:
            dropped += 1
            continue
        cases.append(TestCase(query, (target,), s.session_id))
    return TestCaseList(cases, dropped)


def item_popularity(train: Iterable[Session]) -> dict[str, int]:
    """Occurrence counts over all training sessions, repeats included."""
    counts: Counter[str] = Counter()
    for s in train:
        counts.update(s.items)
    return dict(counts)


def make_dataset(
    interactions: Sequence[Interaction],
    catalog: Catalog,
    *,
    gap_ms: int | None = None,
    split_ts: int | None = None,
    test_fraction: float | None = None,
) -> Dataset:
    """Sessionize, split and count popularity in one go."""
    if split_ts is None and test_fraction is None:
        test_fraction = 0.2
    sessions = sessionize(interactions, gap_ms)
    train, test = temporal_split(sessions, timestamp=split_ts, test_fraction=test_fraction)
    missing = {i for s in sessions for i in s.items if i not in catalog}
    if missing:
        logger.info("%d session items are absent from the catalog", len(missing))
    return Dataset(train, test, catalog, item_popularity(train))
