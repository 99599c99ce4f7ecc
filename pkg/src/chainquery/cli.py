"""Command-line front end: dataset generation, ingestion, querying,
chain verification, and the benchmark harness.

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from chainquery import workload
from chainquery.engine import Engine, VerificationFailure, replay
from chainquery.ledger import Ledger, LedgerDecodeError
from chainquery.sqlgrammar import SqlSyntaxError, UnsupportedFeature
from chainquery.store import ContentStore, IntegrityFailure


def _threshold(args) -> int | None:
    if args.index_variant == "bplus-only":
        return None
    return args.threshold_t


def _ledger_path(dataset: str) -> str:
    return os.path.join(dataset, "ledger.bin")


def _store_dir(dataset: str) -> str:
    return os.path.join(dataset, "store")


def _meta_path(dataset: str) -> str:
    return os.path.join(dataset, "ingest-meta.json")


def _saved_threshold(args) -> int | None:
    """Replaying a saved ledger must use the same index variant it was
    built with, or the rebuilt roots cannot match the anchors."""
    path = _meta_path(args.dataset)
    if os.path.exists(path):
        with open(path) as fh:
            return json.load(fh)["threshold_t"]
    return _threshold(args)


def _load_engine(args) -> Engine:
    path = _ledger_path(args.dataset)
    if not os.path.exists(path):
        raise SystemExit2(f"no ingested ledger at {path}; run `ingest` "
                          "first")
    ledger = Ledger.load(path)
    store = ContentStore(_store_dir(args.dataset))
    return replay(ledger, store=store, threshold_t=_saved_threshold(args))


class SystemExit2(Exception):
    """Usage-level error: reported on stderr, exit code 2."""


def cmd_generate(args) -> int:
    spec = workload.WorkloadSpec(
        n_blocks=args.blocks, entries_per_block=args.entries_per_block,
        timestamp_density=args.density, seed=args.seed,
        query_mix={p: args.queries_per_primitive
                   for p in workload.PRIMITIVES})
    workload.generate(spec, args.dataset)
    total = spec.n_blocks * spec.entries_per_block
    print(f"generated {total} entries and "
          f"{4 * args.queries_per_primitive} queries in {args.dataset}")
    return 0


def cmd_ingest(args) -> int:
    store = ContentStore(_store_dir(args.dataset))
    engine = workload.ingest(args.dataset, args.blocks,
                             args.entries_per_block,
                             threshold_t=_threshold(args), store=store)
    engine.ledger.save(_ledger_path(args.dataset))
    with open(_meta_path(args.dataset), "w") as fh:
        json.dump({"threshold_t": _threshold(args)}, fh)
    roots = engine.ledger.latest_roots()
    print(f"ingested {args.blocks} blocks; time-index root "
          f"{roots[0].hex()[:16]}… trie root {roots[1].hex()[:16]}…")
    return 0


def _emit_rows(rows, fmt) -> None:
    if fmt == "jsonl":
        for row in rows:
            print(json.dumps(row, sort_keys=True))
        return
    columns = ["entry_id", "amount", "timestamp", "addresses",
               "imagecid", "videocid"]
    if fmt == "csv":
        print(",".join(columns))
        for row in rows:
            print(",".join(_cell(row[c]) for c in columns))
        return
    widths = {c: max([len(c)] + [len(_cell(r[c])) for r in rows])
              for c in columns}
    print("  ".join(c.ljust(widths[c]) for c in columns))
    for row in rows:
        print("  ".join(_cell(row[c]).ljust(widths[c]) for c in columns))


def _cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, list):
        return "|".join(value)
    return str(value)


def cmd_query(args) -> int:
    engine = _load_engine(args)
    try:
        result = engine.execute(args.sql, emit_vo=args.emit_vo)
    except (SqlSyntaxError, UnsupportedFeature) as exc:
        raise SystemExit2(f"bad query: {exc}")
    _emit_rows(result.rows, args.format)
    if args.emit_vo and result.vo_bytes is not None:
        print(f"# vo_bytes={len(result.vo_bytes)}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    path = _ledger_path(args.dataset)
    if not os.path.exists(path):
        raise SystemExit2(f"no ingested ledger at {path}")
    try:
        ledger = Ledger.load(path)
    except LedgerDecodeError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    if not ledger.verify_chain():
        print("verification failed: block chain is inconsistent",
              file=sys.stderr)
        return 1
    store = ContentStore(_store_dir(args.dataset))
    try:
        engine = replay(ledger, store=store,
                        threshold_t=_saved_threshold(args))
    except (VerificationFailure, IntegrityFailure) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    print(f"ok: {len(ledger.blocks)} blocks, "
          f"{len(engine.entries)} entries, roots match at every height")
    return 0


def cmd_bench(args) -> int:
    scales = [int(s) for s in args.scales.split(",") if s]
    if not scales:
        raise SystemExit2("--scales must list at least one block count")
    spec = workload.WorkloadSpec(
        n_blocks=max(scales), entries_per_block=args.entries_per_block,
        seed=args.seed)
    if not os.path.exists(os.path.join(args.dataset, "dataset.jsonl")):
        workload.generate(spec, args.dataset)
    report = workload.run_bench(spec, args.dataset, scales,
                                threshold_t=_threshold(args))
    if args.format == "jsonl":
        for row in report.rows:
            print(json.dumps({
                "n_blocks": row.n_blocks,
                "insert_cpu_ms": row.insert_cpu_ms,
                "latency_ms": row.latency_ms,
                "vo_bytes": row.vo_bytes,
                "gas": row.gas,
                "root_digest": row.root_digest,
            }, sort_keys=True))
    else:
        print(report.to_csv(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainquery",
        description="verifiable hybrid-storage query middleware")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_dataset=True):
        if needs_dataset:
            p.add_argument("--dataset", required=True,
                           help="dataset directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--index-variant", choices=["bhash", "bplus-only"],
                       default="bhash")
        p.add_argument("--threshold-t", type=int, default=10)
        p.add_argument("--entries-per-block", type=int, default=1)
        p.add_argument("--format", choices=["table", "jsonl", "csv"],
                       default="table")

    p = sub.add_parser("generate", help="write a deterministic dataset")
    common(p)
    p.add_argument("--blocks", type=int, default=64,
                   help="number of blocks (power of two)")
    p.add_argument("--density", type=float, default=0.01,
                   help="event rate; mean inter-arrival is 1/density")
    p.add_argument("--queries-per-primitive", type=int, default=8)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="build and save a ledger from a "
                                      "dataset")
    common(p)
    p.add_argument("--blocks", type=int, default=64)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="run one SQL statement")
    common(p)
    p.add_argument("--emit-vo", action="store_true")
    p.add_argument("sql", help="statement to execute")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("verify", help="check chain integrity and re-derive "
                                      "all anchored roots")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="ingest at several scales and report "
                                     "latency, VO size, and gas")
    common(p)
    p.add_argument("--scales", default="16,64",
                   help="comma-separated block counts")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; normalize others
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (VerificationFailure, IntegrityFailure) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
