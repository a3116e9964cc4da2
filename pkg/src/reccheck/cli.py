"""``reccheck`` command line: run, compare, gen.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 remote-model
error. ``RECCHECK_LOG`` sets the log level (default WARNING).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .dataset import load_catalog, load_interactions, make_dataset
from .embedding import EmbeddingConfig
from .errors import ConfigError, RecCheckError
from .harness import (
    TEST_KINDS,
    RecListSpec,
    compare_reports,
    parse_report,
    run_reclist,
    satisfiable_tests,
    serialize_report,
)
from .models import cooccurrence_model, p2v_model, popularity_model, remote_model
from .syngen import SynSpec, generate

logger = logging.getLogger("reccheck")

TASK_NAMES = {"similar": "similar_items", "complementary": "complementary_items", "session": "session_based"}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; we reserve 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reccheck", description="Behavioral testing for recommender systems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="evaluate a model and write a report")
    run.add_argument("--interactions", required=True, type=Path)
    run.add_argument("--catalog", required=True, type=Path)
    run.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    run.add_argument("--task", choices=sorted(TASK_NAMES), default="session")
    run.add_argument("--model", choices=("popularity", "cooccurrence", "p2v", "remote"), required=True)
    run.add_argument("--endpoint", help="remote model URL (with --model remote)")
    run.add_argument("--token", help="bearer token for the remote model")
    run.add_argument("--timeout-ms", type=int, default=5000)
    run.add_argument("--max-retries", type=int, default=3)
    run.add_argument("--k", type=int, default=10)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--tests", default="all", help=f"comma-separated list or 'all' ({', '.join(TEST_KINDS)})")
    run.add_argument("--out", required=True, type=Path)
    run.add_argument("--gap-ms", type=int)
    split = run.add_mutually_exclusive_group()
    split.add_argument("--split-fraction", type=float)
    split.add_argument("--split-ts", type=int)
    run.add_argument("--dim", type=int, default=32)
    run.add_argument("--window", type=int, default=3)
    run.add_argument("--negatives", type=int, default=5)
    run.add_argument("--epochs", type=int, default=5)
    run.add_argument("--batch-size", type=int, default=128)

    cmp_ = sub.add_parser("compare", help="compare two reports on the same data")
    cmp_.add_argument("a", type=Path)
    cmp_.add_argument("b", type=Path)
    cmp_.add_argument("--format", choices=("table", "json"), default="table")

    gen = sub.add_parser("gen", help="write a synthetic dataset")
    gen.add_argument("--preset", choices=("clustered", "zipf"), required=True)
    gen.add_argument("--out-dir", required=True, type=Path)
    gen.add_argument("--seed", type=int, default=42)
    gen.add_argument("--n-clusters", type=int, default=5)
    gen.add_argument("--items-per-cluster", type=int, default=20)
    gen.add_argument("--n-items", type=int, default=1000)
    gen.add_argument("--n-sessions", type=int, default=5000)
    gen.add_argument("--min-len", type=int, default=3)
    gen.add_argument("--max-len", type=int, default=8)
    gen.add_argument("--noise", type=float, default=0.05)
    gen.add_argument("--zipf-exponent", type=float, default=1.1)
    return p


def _cmd_run(args) -> int:
    catalog = load_catalog(args.catalog, args.format)
    interactions = load_interactions(args.interactions, args.format)
    dataset = make_dataset(
        interactions, catalog, gap_ms=args.gap_ms, split_ts=args.split_ts, test_fraction=args.split_fraction
    )
    if args.tests.strip() == "all":
        names = satisfiable_tests(dataset)
        skipped = sorted(set(TEST_KINDS) - set(names))
        if skipped:
            logger.warning("skipping tests the data cannot support: %s", ", ".join(skipped))
    else:
        names = [t.strip() for t in args.tests.split(",") if t.strip()]
    spec = RecListSpec.from_names(TASK_NAMES[args.task], names, k=args.k, seed=args.seed)
    try:
        emb = EmbeddingConfig(
            dim=args.dim, window=args.window, negatives=args.negatives, epochs=args.epochs, seed=args.seed
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    if args.model == "popularity":
        model = popularity_model(dataset.train)
    elif args.model == "cooccurrence":
        model = cooccurrence_model(dataset.train)
    elif args.model == "p2v":
        # built from the item space the run trains anyway
        model = lambda ds, space: p2v_model(space)  # noqa: E731
    else:
        if not args.endpoint:
            raise ConfigError("--model remote requires --endpoint")
        model = remote_model(
            args.endpoint, args.timeout_ms, args.max_retries, batch_size=args.batch_size, token=args.token
        )

    report = run_reclist(dataset, model, spec, embedding=emb, batch_size=args.batch_size)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_bytes(serialize_report(report))
    for r in report.results:
        print(f"{r['name']:<24} {r['status']}" + (f"  {r['error']}" if r["status"] != "ok" else ""))
    print(f"wrote {args.out} ({report.n_test_cases} test cases)")
    return 0


def _cmd_compare(args) -> int:
    a = parse_report(args.a.read_bytes())
    b = parse_report(args.b.read_bytes())
    cmp = compare_reports(a, b)
    if args.format == "json":
        print(json.dumps(cmp.to_dict(), indent=2, sort_keys=True))
    else:
        print(cmp.to_table())
    return 0


def _cmd_gen(args) -> int:
    spec = SynSpec(
        preset=args.preset,
        n_clusters=args.n_clusters,
        items_per_cluster=args.items_per_cluster,
        n_items=args.n_items,
        n_sessions=args.n_sessions,
        session_len_range=(args.min_len, args.max_len),
        cross_cluster_noise=args.noise,
        zipf_exponent=args.zipf_exponent,
        seed=args.seed,
    )
    paths = generate(spec, args.out_dir)
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("RECCHECK_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "compare": _cmd_compare, "gen": _cmd_gen}[args.command]
    try:
        return handler(args)
    except RecCheckError as exc:
        print(f"reccheck: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"reccheck: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"reccheck: invalid configuration: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
