"""Compose dataset, embeddings, model and tests into a versioned report."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import uuid
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from importlib import resources
from typing import Any, Callable, Mapping, Sequence

from . import __version__
from .behavioral import (
    asymmetry_directional,
    brand_distance,
    brand_partition,
    category_partition,
    cold_start_partition,
    less_wrong_distances,
    popularity_strata,
    price_asymmetry,
    slice_metrics,
    taxonomy_path_length,
)
from .dataset import Dataset, TestCase, build_test_cases
from .embedding import BACKEND, EmbeddingConfig, EmbeddingSpace, feature_sequences, train_skipgram
from .errors import ConfigError, ReportError
from .metrics import coverage_at_k, hit_rate_at_k, mrr_at_k, popularity_bias_at_k
from .models import PredictionList, RecModel, checked_predict

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
TASKS = ("similar_items", "complementary_items", "session_based")


# -- test registry -------------------------------------------------------------


@dataclass
class RunContext:
    dataset: Dataset
    cases: list[TestCase]
    predictions: dict[tuple, PredictionList]
    model: RecModel
    k: int
    item_space: EmbeddingSpace | None = None
    brand_space: EmbeddingSpace | None = None

    def pairs(self):
        return [(c, self.predictions[c.query]) for c in self.cases]


@dataclass(frozen=True)
class TestKind:
    __test__ = False

    run: Callable[[RunContext, str, dict], Any]
    requires: tuple[str, ...] = ()
    ranked: bool = True  # needs predictions for the test cases


def _k(ctx, params):
    return int(params.get("k", ctx.k))


def _asymmetry(ctx: RunContext, name: str, params: dict):
    pop = ctx.dataset.popularity
    n = int(params.get("n_probes", 50))
    probes = sorted(pop, key=lambda i: (-pop[i], i))[:n]
    return asymmetry_directional(ctx.model, probes, _k(ctx, params), name=name)


TEST_KINDS: dict[str, TestKind] = {
    "hit_rate": TestKind(
        lambda c, n, p: hit_rate_at_k(c.pairs(), _k(c, p), any_ground_truth=bool(p.get("any_ground_truth", False)))
    ),
    "mrr": TestKind(
        lambda c, n, p: mrr_at_k(c.pairs(), _k(c, p), any_ground_truth=bool(p.get("any_ground_truth", False)))
    ),
    "coverage": TestKind(lambda c, n, p: coverage_at_k(c.pairs(), _k(c, p), max(1, len(c.dataset.catalog)))),
    "popularity_bias": TestKind(lambda c, n, p: popularity_bias_at_k(c.pairs(), _k(c, p), c.dataset.popularity)),
    "cos_distance_misses": TestKind(
        lambda c, n, p: less_wrong_distances(
            c.pairs(), c.item_space, p.get("scope", "misses_only"), int(p.get("bins", 20)),
            miss_rank=int(p.get("miss_rank", 1)), name=n,
        ),
        requires=("item_space",),
    ),
    "cos_distance_brand": TestKind(
        lambda c, n, p: brand_distance(
            c.pairs(), c.brand_space, c.dataset.catalog, p.get("scope", "misses_only"), int(p.get("bins", 20)),
            miss_rank=int(p.get("miss_rank", 1)), name=n,
        ),
        requires=("catalog:brand", "brand_space"),
    ),
    "path_length_category": TestKind(
        lambda c, n, p: taxonomy_path_length(c.pairs(), c.dataset.catalog, p.get("anchor", "query_last"), name=n),
        requires=("catalog:category_path",),
    ),
    "popularity_strata": TestKind(
        lambda c, n, p: popularity_strata(
            c.pairs(), c.dataset.popularity, _k(c, p), int(p.get("n_buckets", 10)), p.get("scheme", "quantile"), name=n
        )
    ),
    "slice_brand": TestKind(
        lambda c, n, p: slice_metrics(c.pairs(), _k(c, p), brand_partition(c.dataset.catalog), name=n),
        requires=("catalog:brand",),
    ),
    "slice_category": TestKind(
        lambda c, n, p: slice_metrics(c.pairs(), _k(c, p), category_partition(c.dataset.catalog), name=n),
        requires=("catalog:category_path",),
    ),
    "slice_cold_start": TestKind(
        lambda c, n, p: slice_metrics(c.pairs(), _k(c, p), cold_start_partition(c.dataset.popularity), name=n)
    ),
    "asymmetry_directional": TestKind(_asymmetry, ranked=False),
    "price_asymmetry": TestKind(
        lambda c, n, p: price_asymmetry(c.pairs(), c.dataset.catalog, _k(c, p), name=n),
        requires=("catalog:price",),
    ),
}


@dataclass(frozen=True)
class TestDescriptor:
    """One test in a run. ``kind`` defaults to ``name``."""

    __test__ = False

    name: str
    params: Mapping[str, Any] = field(default_factory=dict)
    kind: str | None = None

    @property
    def test_kind(self) -> str:
        return self.kind or self.name

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.test_kind, "params": dict(self.params)}


@dataclass(frozen=True)
class RecListSpec:
    task: str
    tests: tuple[TestDescriptor, ...]
    k: int = 10
    seed: int = 0
    min_query_len: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tests", tuple(self.tests))
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        names = [t.name for t in self.tests]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigError(f"duplicate test names: {dupes}")
        unknown = sorted({t.test_kind for t in self.tests} - TEST_KINDS.keys())
        if unknown:
            raise ConfigError(f"unknown test kinds: {unknown}; available: {sorted(TEST_KINDS)}")
        for t in self.tests:
            k = t.params.get("k")
            if k is not None and (not isinstance(k, int) or k < 1):
                raise ConfigError(f"test {t.name!r}: k must be a positive integer")

    @classmethod
    def from_names(cls, task: str, names: Sequence[str], **kwargs) -> "RecListSpec":
        return cls(task, tuple(TestDescriptor(n) for n in names), **kwargs)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "tests": [t.to_dict() for t in self.tests],
            "k": self.k,
            "seed": self.seed,
            "min_query_len": self.min_query_len,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RecListSpec":
        tests = tuple(TestDescriptor(t["name"], dict(t.get("params", {})), t.get("kind")) for t in d["tests"])
        return cls(d["task"], tests, d.get("k", 10), d.get("seed", 0), d.get("min_query_len", 1))


def requirements(spec: RecListSpec) -> set[str]:
    return {r for t in spec.tests for r in TEST_KINDS[t.test_kind].requires}


def _unmet(spec: RecListSpec, dataset: Dataset) -> list[tuple[str, str]]:
    out = []
    brand_ok = None
    for t in spec.tests:
        for req in TEST_KINDS[t.test_kind].requires:
            if req.startswith("catalog:"):
                fname = req.split(":", 1)[1]
                if not dataset.catalog.has_field(fname):
                    out.append((t.name, f"test {t.name!r} needs catalog field {fname!r}, which no item has"))
            elif req == "brand_space":
                if brand_ok is None:
                    brand_ok = bool(feature_sequences(dataset.train, dataset.catalog, "brand"))
                if not brand_ok:
                    out.append((t.name, f"test {t.name!r} needs brand sequences of length >= 2 in train"))
    return out


def check_requirements(spec: RecListSpec, dataset: Dataset) -> list[str]:
    """Unmet requirements, as messages naming the tests that need them."""
    return [msg for _, msg in _unmet(spec, dataset)]


def satisfiable_tests(dataset: Dataset, names: Sequence[str] | None = None) -> list[str]:
    """Registered test kinds (or ``names``) whose requirements the dataset meets."""
    names = list(names or TEST_KINDS)
    bad = {name for name, _ in _unmet(RecListSpec.from_names("session_based", names), dataset)}
    return [n for n in names if n not in bad]


# -- test cases ----------------------------------------------------------------


def task_test_cases(dataset: Dataset, spec: RecListSpec):
    """Test cases for the task, plus the number of sessions dropped.

    Session and similar-items tasks use leave-last-out on raw sessions
    (similar items keeps only the last query item); the complementary task
    deduplicates the session into a cart first.
    """
    scheme = "cart_last" if spec.task == "complementary_items" else "next_item"
    cases = build_test_cases(dataset.test, scheme, spec.min_query_len)
    dropped = cases.dropped
    if spec.task == "similar_items":
        cases = [TestCase((c.query[-1],), c.ground_truth, c.session_id) for c in cases]
    return list(cases), dropped


# -- reports -------------------------------------------------------------------


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _digest(obj) -> str:
    return hashlib.sha256(_canonical(obj).encode("utf-8")).hexdigest()


def _jsonable(obj):
    return json.loads(_canonical(obj))


def dataset_fingerprint(dataset: Dataset) -> str:
    def sessions(ss):
        return sorted([s.session_id, list(s.items), list(s.timestamps)] for s in ss)

    catalog = sorted(
        [
            m.item_id,
            m.price,
            m.brand,
            list(m.category_path) if m.category_path else None,
            dict(sorted(m.extra.items())),
        ]
        for m in dataset.catalog
    )
    return _digest({"train": sessions(dataset.train), "test": sessions(dataset.test), "catalog": catalog})


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass
class RecReport:
    schema_version: str
    run_id: str
    model_name: str
    dataset_fingerprint: str
    spec: dict
    config: dict
    config_fingerprint: str
    started_at: str
    finished_at: str
    results: list[dict]
    skip_counters: dict[str, int]
    deterministic: bool
    n_test_cases: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "RecReport":
        if not isinstance(d, Mapping):
            raise ReportError("report must be a JSON object")
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ReportError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION!r})")
        names = {f.name for f in fields(cls)}
        missing = sorted(n for n in names if n not in d and n != "n_test_cases")
        if missing:
            raise ReportError(f"report is missing fields: {missing}")
        return cls(**{k: v for k, v in d.items() if k in names})

    def result(self, name: str) -> dict:
        for r in self.results:
            if r["name"] == name:
                return r
        raise KeyError(name)


def report_schema() -> dict:
    """The JSON Schema that serialized reports conform to."""
    return json.loads(resources.files(__package__).joinpath("report.schema.json").read_text("utf-8"))


def serialize_report(report: RecReport) -> bytes:
    """Canonical JSON: sorted keys, shortest round-trip floats, UTF-8, trailing newline."""
    return (_canonical(report.to_dict()) + "\n").encode("utf-8")


def parse_report(data: bytes | str) -> RecReport:
    try:
        obj = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ReportError(f"report is not valid JSON: {exc}") from None
    return RecReport.from_dict(obj)


def results_bytes(report: RecReport) -> bytes:
    """The run-invariant part of a report (no run id or timestamps)."""
    d = report.to_dict()
    for key in ("run_id", "started_at", "finished_at"):
        d.pop(key)
    return (_canonical(d) + "\n").encode("utf-8")


# -- running -------------------------------------------------------------------


def train_item_space(dataset: Dataset, config: EmbeddingConfig) -> EmbeddingSpace:
    return train_skipgram([s.items for s in dataset.train], config)


def train_brand_space(dataset: Dataset, config: EmbeddingConfig) -> EmbeddingSpace:
    return train_skipgram(feature_sequences(dataset.train, dataset.catalog, "brand"), config)


def run_reclist(
    dataset: Dataset,
    model: RecModel | Callable[[Dataset, EmbeddingSpace], RecModel],
    spec: RecListSpec,
    *,
    embedding: EmbeddingConfig | None = None,
    item_space: EmbeddingSpace | None = None,
    brand_space: EmbeddingSpace | None = None,
    batch_size: int = 128,
) -> RecReport:
    """Run every test in ``spec`` against ``model`` and assemble a report.

    Predictions are requested once per distinct query, in batches, and
    shared by all tests. A test that raises is recorded as an error entry
    without stopping the run. Injected embedding spaces are fingerprinted
    into the config so reports stay comparable.

    ``model`` may also be a factory ``(dataset, item_space) -> RecModel``,
    called once the run's item space is trained (this is how a p2v model
    shares the run's own embeddings).
    """
    started = _now()
    unmet = check_requirements(spec, dataset)
    if unmet:
        raise ConfigError("unsatisfiable test spec:\n  " + "\n  ".join(unmet))
    if batch_size < 1:
        raise ConfigError("batch_size must be positive")

    emb = embedding or EmbeddingConfig(seed=spec.seed)
    reqs = requirements(spec)
    injected = {}
    if item_space is None:
        item_space = train_item_space(dataset, emb)
    else:
        injected["item_space"] = item_space.fingerprint()
    if "brand_space" in reqs:
        if brand_space is None:
            brand_space = train_brand_space(dataset, emb)
        else:
            injected["brand_space"] = brand_space.fingerprint()
    if not isinstance(model, RecModel):
        model = model(dataset, item_space)

    cases, dropped = task_test_cases(dataset, spec)
    skip_counters: dict[str, int] = {"test_cases.dropped_overlap": dropped}
    k_pred = max([spec.k] + [int(t.params.get("k", spec.k)) for t in spec.tests])

    predictions: dict[tuple, PredictionList] = {}
    if any(TEST_KINDS[t.test_kind].ranked for t in spec.tests):
        queries = list(dict.fromkeys(c.query for c in cases))
        for i in range(0, len(queries), batch_size):
            batch = queries[i:i + batch_size]
            predictions.update(zip(batch, checked_predict(model, batch, k_pred)))
        skip_counters["predictions.empty"] = sum(1 for c in cases if not predictions[c.query])
    logger.info("%d test cases, %d distinct queries", len(cases), len(predictions))

    ctx = RunContext(dataset, cases, predictions, model, spec.k, item_space, brand_space)
    results = []
    for t in spec.tests:
        entry = {"name": t.name, "kind": t.test_kind, "params": dict(t.params)}
        try:
            out = TEST_KINDS[t.test_kind].run(ctx, t.name, dict(t.params))
            entry.update(status="ok", result=out.to_dict())
            reasons = getattr(out, "skip_reasons", None)
            if reasons:
                for reason, n in reasons.items():
                    skip_counters[f"{t.name}.{reason}"] = n
            elif getattr(out, "n_skipped", 0):
                skip_counters[f"{t.name}.empty_prediction"] = out.n_skipped
            if getattr(out, "n_unsliceable", 0):
                skip_counters[f"{t.name}.unsliceable"] = out.n_unsliceable
        except Exception as exc:  # noqa: BLE001 - isolate failures per test
            logger.exception("test %s failed", t.name)
            entry.update(status="error", error=f"{type(exc).__name__}: {exc}")
        results.append(entry)

    violations = getattr(model, "violations", None)
    if violations:
        for kind, n in violations.items():
            skip_counters[f"model.violations.{kind}"] = n

    config = {
        "embedding": emb.to_dict(),
        "kernel": BACKEND,
        "version": __version__,
        "batch_size": batch_size,
        "prediction_k": k_pred,
        "injected_spaces": injected,
    }
    spec_dict = spec.to_dict()
    return RecReport(
        schema_version=SCHEMA_VERSION,
        run_id=uuid.uuid4().hex,
        model_name=model.name,
        dataset_fingerprint=dataset_fingerprint(dataset),
        spec=_jsonable(spec_dict),
        config=_jsonable(config),
        config_fingerprint=_digest({"spec": spec_dict, "config": config}),
        started_at=started,
        finished_at=_now(),
        results=_jsonable(results),
        skip_counters=dict(sorted(skip_counters.items())),
        deterministic=bool(model.deterministic),
        n_test_cases=len(cases),
    )


# -- comparison ----------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    test: str
    metric: str
    a: float | None
    b: float | None

    @property
    def abs_delta(self) -> float | None:
        if self.a is None or self.b is None:
            return None
        return self.b - self.a

    @property
    def rel_delta(self) -> float | None:
        if self.a is None or self.b is None or self.a == 0:
            return None
        return (self.b - self.a) / abs(self.a)

    @property
    def ratio(self) -> float | None:
        if self.a is None or self.b is None or self.a == 0:
            return None
        return self.b / self.a

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "metric": self.metric,
            "a": self.a,
            "b": self.b,
            "abs_delta": self.abs_delta,
            "rel_delta": self.rel_delta,
            "ratio": self.ratio,
        }


_SCALAR_FIELDS = {
    "hit_rate": ("value",),
    "mrr": ("value",),
    "coverage": ("value",),
    "popularity_bias": ("value",),
    "cos_distance_misses": ("mean_query_to_label", "mean_query_to_pred"),
    "cos_distance_brand": ("mean_query_to_label", "mean_query_to_pred"),
    "path_length_category": ("mean",),
    "asymmetry_directional": ("score",),
    "price_asymmetry": ("frac_cheaper", "mean_price_ratio"),
}


def _scalars(entry: Mapping) -> dict[str, float | None]:
    res = entry.get("result") or {}
    kind = entry.get("kind")
    if kind in _SCALAR_FIELDS:
        return {f: res.get(f) for f in _SCALAR_FIELDS[kind]}
    if "buckets" in res:
        return {
            f"bucket[{i}] hr": b["hr_at_k"]
            for i, b in enumerate(res["buckets"])
        }
    if "slices" in res:
        out = {}
        for key, s in res["slices"].items():
            out[f"{key} hr"] = s["hr_at_k"]
            out[f"{key} mrr"] = s["mrr_at_k"]
        return out
    return {}


@dataclass
class Comparison:
    model_a: str
    model_b: str
    rows: list[ComparisonRow]

    def row(self, test: str, metric: str = "value") -> ComparisonRow:
        for r in self.rows:
            if r.test == test and r.metric == metric:
                return r
        raise KeyError((test, metric))

    def to_dict(self) -> dict:
        return {"a": self.model_a, "b": self.model_b, "rows": [r.to_dict() for r in self.rows]}

    def to_table(self) -> str:
        header = ("test", "metric", f"A:{self.model_a}", f"B:{self.model_b}", "delta", "rel", "ratio")
        body = [
            (r.test, r.metric, _fmt(r.a), _fmt(r.b), _fmt(r.abs_delta, signed=True), format_pct(r.rel_delta), _fmt(r.ratio))
            for r in self.rows
        ]
        widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
        lines = ["  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip() for row in (header, *body)]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def _fmt(x, signed: bool = False) -> str:
    if x is None:
        return "-"
    return f"{x:+.4g}" if signed else f"{x:.4g}"


def format_pct(rel: float | None) -> str:
    """Relative delta as a signed percentage, e.g. ``+40.0%``."""
    if rel is None or not math.isfinite(rel):
        return "-"
    return f"{rel * 100:+.1f}%"


def compare_reports(a: RecReport, b: RecReport) -> Comparison:
    """Per-test deltas of B against A (B minus A; relative to A)."""
    if a.dataset_fingerprint != b.dataset_fingerprint:
        raise ReportError(
            f"dataset fingerprints differ: {a.dataset_fingerprint[:12]} vs {b.dataset_fingerprint[:12]}"
        )
    names_a = [r["name"] for r in a.results]
    names_b = [r["name"] for r in b.results]
    if set(names_a) != set(names_b):
        only_a = sorted(set(names_a) - set(names_b))
        only_b = sorted(set(names_b) - set(names_a))
        raise ReportError(f"test sets differ: only in A {only_a}, only in B {only_b}")
    rows = []
    for name in names_a:
        ea, eb = a.result(name), b.result(name)
        sa, sb = _scalars(ea), _scalars(eb)
        for metric in list(dict.fromkeys([*sa, *sb])):
            rows.append(ComparisonRow(name, metric, sa.get(metric), sb.get(metric)))
    return Comparison(a.model_name, b.model_name, rows)
