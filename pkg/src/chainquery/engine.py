"""Query middleware: planning and verified execution of the six primitives.

The engine owns a ledger, a time index (BHashTree), a prefix index (Trie),
a content-addressed payload store, and a bloom-filter query cache.  Writes
append a block (entry + operation record), re-insert into both indexes,
anchor the new roots, and bump the cache epoch.  Reads probe the cache,
query the index, verify the returned proof against the latest anchored
root, and filter out deleted or superseded entries before returning rows.
"""
from __future__ import annotations

import datetime
from dataclasses import dataclass
from typing import Optional

from chainquery.bhash import BHashTree, verify_range
from chainquery.cache import QueryCache
from chainquery.core import DataEntry
from chainquery.gas import GasMeter
from chainquery.ledger import (Ledger, OP_DELETE, OP_INSERT, OP_UPDATE)
from chainquery.sqlgrammar import (DeleteQuery, InsertQuery, QueryAst,
                                   SelectFuzzy, SelectSimple, SelectTimeRange,
                                   UpdateQuery, parse)
from chainquery.store import ContentStore
from chainquery.trie import Trie, verify_prefix

# Planner cost constants (abstract units).
COST_CACHE_PROBE = 1
COST_INDEX_LOOKUP = 50
COST_OFFCHAIN_FETCH = 500
COST_MERGE = 5
COST_LEDGER_APPEND = 100

# Trie namespace prefixes; both are alphabet characters that cannot start
# a key in the other namespace.
NS_TIMESTAMP = ":"
NS_ADDRESS = "-"

TS_FORMAT = "%Y-%m-%d-%H:%M:%S"


class UnknownEntry(KeyError):
    pass


class VerificationFailure(RuntimeError):
    pass


def timestamp_string(ts: int) -> str:
    dt = datetime.datetime.fromtimestamp(ts, tz=datetime.timezone.utc)
    return dt.strftime(TS_FORMAT)


@dataclass(frozen=True)
class Plan:
    steps: tuple[str, ...]
    est_cost: int


@dataclass
class QueryResult:
    rows: list[dict]
    plan: Plan
    verified: bool = False
    cached: bool = False
    vo_bytes: Optional[bytes] = None
    affected: int = 0


def plan_query(ast: QueryAst) -> Plan:
    if isinstance(ast, (InsertQuery, DeleteQuery, UpdateQuery)):
        steps = ["store-payloads"] if isinstance(ast, InsertQuery) else []
        steps += ["ledger-append", "index-insert", "anchor-roots",
                  "cache-invalidate"]
        cost = COST_LEDGER_APPEND + 2 * COST_INDEX_LOOKUP
        if isinstance(ast, InsertQuery):
            cost += COST_OFFCHAIN_FETCH
        return Plan(tuple(steps), cost)
    if isinstance(ast, SelectSimple) and ast.entry_id is not None:
        return Plan(("cache-probe", "ledger-lookup", "payload-fetch",
                     "merge"),
                    COST_CACHE_PROBE + COST_INDEX_LOOKUP
                    + COST_OFFCHAIN_FETCH + COST_MERGE)
    if isinstance(ast, (SelectSimple, SelectTimeRange)):
        return Plan(("cache-probe", "time-index-query", "verify-vo",
                     "payload-fetch", "merge"),
                    COST_CACHE_PROBE + COST_INDEX_LOOKUP
                    + COST_OFFCHAIN_FETCH + COST_MERGE)
    if isinstance(ast, SelectFuzzy):
        return Plan(("cache-probe", "trie-query", "verify-vo",
                     "payload-fetch", "merge"),
                    COST_CACHE_PROBE + COST_INDEX_LOOKUP
                    + COST_OFFCHAIN_FETCH + COST_MERGE)
    raise TypeError(f"unplannable ast {ast!r}")


class Engine:
    def __init__(self, store: Optional[ContentStore] = None,
                 threshold_t: Optional[int] = 10, meter: GasMeter = None):
        self.meter = meter or GasMeter()
        self.ledger = Ledger()
        self.time_index = BHashTree(threshold_t=threshold_t,
                                    meter=self.meter)
        self.trie = Trie(meter=self.meter)
        # not `store or ...`: an empty ContentStore is falsy via __len__
        self.store = store if store is not None else ContentStore()
        self.cache = QueryCache()
        self.threshold_t = threshold_t
        self.tombstones: set[int] = set()
        self.superseded: set[int] = set()
        self.entries: dict[int, DataEntry] = {}
        self._next_id = 0

    # -- state helpers -------------------------------------------------

    def is_live(self, entry_id: int) -> bool:
        return (entry_id not in self.tombstones
                and entry_id not in self.superseded)

    def _trusted_roots(self):
        return self.ledger.latest_roots()

    def _entry_row(self, entry: DataEntry, fetch_payloads: bool = True) \
            -> dict:
        if fetch_payloads:
            # get() re-hashes the payload; a corrupted store raises here.
            for cid in (entry.image_cid, entry.video_cid):
                if cid is not None:
                    self.store.get(cid)
        return {
            "entry_id": entry.entry_id,
            "amount": entry.amount,
            "addresses": list(entry.addresses),
            "timestamp": entry.timestamp,
            "imagecid": entry.image_cid.hex() if entry.image_cid else None,
            "videocid": entry.video_cid.hex() if entry.video_cid else None,
        }

    # -- writes --------------------------------------------------------

    def _index_entry(self, entry: DataEntry) -> None:
        self.entries[entry.entry_id] = entry
        self.time_index.insert(entry.entry_id, entry.timestamp)
        self.trie.insert(NS_TIMESTAMP + timestamp_string(entry.timestamp),
                         entry.entry_id)
        for addr in entry.addresses:
            self.trie.insert(NS_ADDRESS + addr[2:], entry.entry_id)

    def _append(self, entries, ops) -> None:
        self.ledger.append_block(
            entries,
            (self.time_index.root_digest(), self.trie.root_digest()),
            ops=ops)
        self.cache.invalidate()

    def _make_entry(self, amount, addresses, timestamp,
                    image_payload=None, video_payload=None) -> DataEntry:
        imagecid = self.store.put(image_payload) \
            if image_payload is not None else None
        videocid = self.store.put(video_payload) \
            if video_payload is not None else None
        entry = DataEntry(entry_id=self._next_id, amount=amount,
                          addresses=tuple(addresses), timestamp=timestamp,
                          image_cid=imagecid, video_cid=videocid)
        self._next_id += 1
        return entry

    def insert_batch(self, inserts: list[InsertQuery]) -> list[int]:
        """Apply several inserts as a single ledger block. Returns the
        assigned entry ids."""
        entries = []
        for ins in inserts:
            entry = self._make_entry(ins.amount, ins.addresses,
                                     ins.timestamp, ins.image_payload,
                                     ins.video_payload)
            self._index_entry(entry)
            entries.append(entry)
        self._append(entries, [(OP_INSERT, e.entry_id) for e in entries])
        return [e.entry_id for e in entries]

    def _exec_insert(self, ast: InsertQuery) -> QueryResult:
        entry = self._make_entry(ast.amount, ast.addresses, ast.timestamp,
                                 ast.image_payload, ast.video_payload)
        self._index_entry(entry)
        self._append([entry], [(OP_INSERT, entry.entry_id)])
        return QueryResult([], plan_query(ast), affected=1)

    def _require_live(self, entry_id: int) -> DataEntry:
        entry = self.entries.get(entry_id)
        if entry is None or not self.is_live(entry_id):
            raise UnknownEntry(entry_id)
        return entry

    def _exec_delete(self, ast: DeleteQuery) -> QueryResult:
        self._require_live(ast.entry_id)
        self.tombstones.add(ast.entry_id)
        self._append([], [(OP_DELETE, ast.entry_id)])
        return QueryResult([], plan_query(ast), affected=1)

    def _exec_update(self, ast: UpdateQuery) -> QueryResult:
        old = self._require_live(ast.entry_id)
        fields = {"amount": old.amount, "addresses": old.addresses,
                  "timestamp": old.timestamp}
        fields.update(dict(ast.changes))
        new = self._make_entry(fields["amount"], fields["addresses"],
                               fields["timestamp"],
                               None, None)
        # carry payload references forward; the payloads are unchanged
        new = DataEntry(entry_id=new.entry_id, amount=new.amount,
                        addresses=new.addresses, timestamp=new.timestamp,
                        image_cid=old.image_cid, video_cid=old.video_cid)
        self.superseded.add(ast.entry_id)
        self._index_entry(new)
        self._append([new], [(OP_UPDATE, ast.entry_id)])
        return QueryResult([], plan_query(ast), affected=1)

    # -- reads ---------------------------------------------------------

    def _rows_for_ids(self, ids) -> list[dict]:
        rows = []
        for eid in sorted(set(ids)):
            if not self.is_live(eid):
                continue
            rows.append(self._entry_row(self.entries[eid]))
        return rows

    def _exec_time_range(self, ast, start: int, end: int,
                         emit_vo: bool) -> QueryResult:
        plan = plan_query(ast)
        cached = self.cache.get(ast)
        if cached is not None:
            return QueryResult(list(cached), plan, verified=True,
                               cached=True)
        ids, vo = self.time_index.range_query(start, end)
        bhash_root, _ = self._trusted_roots()
        if not verify_range(vo, bhash_root, start, end, ids):
            raise VerificationFailure("time-range proof rejected")
        rows = self._rows_for_ids(ids)
        self.cache.put(ast, tuple(rows))
        return QueryResult(rows, plan, verified=True,
                           vo_bytes=vo.to_bytes() if emit_vo else None)

    def _exec_fuzzy(self, ast: SelectFuzzy, emit_vo: bool) -> QueryResult:
        plan = plan_query(ast)
        cached = self.cache.get(ast)
        if cached is not None:
            return QueryResult(list(cached), plan, verified=True,
                               cached=True)
        if ast.field == "timestamp_string":
            key = NS_TIMESTAMP + ast.prefix
        else:
            body = ast.prefix[2:] if ast.prefix.startswith("0x") \
                else ("" if "0x".startswith(ast.prefix) else ast.prefix)
            key = NS_ADDRESS + body
        ids, vo = self.trie.prefix_query(key)
        _, trie_root = self._trusted_roots()
        if not verify_prefix(vo, trie_root, key, ids):
            raise VerificationFailure("prefix proof rejected")
        rows = self._rows_for_ids(ids)
        self.cache.put(ast, tuple(rows))
        return QueryResult(rows, plan, verified=True,
                           vo_bytes=vo.to_bytes() if emit_vo else None)

    def _exec_simple_id(self, ast: SelectSimple) -> QueryResult:
        plan = plan_query(ast)
        cached = self.cache.get(ast)
        if cached is not None:
            return QueryResult(list(cached), plan, verified=True,
                               cached=True)
        entry = self.entries.get(ast.entry_id)
        rows = []
        if entry is not None and self.is_live(ast.entry_id):
            rows = [self._entry_row(entry)]
        self.cache.put(ast, tuple(rows))
        return QueryResult(rows, plan, verified=True)

    # -- entry points --------------------------------------------------

    def execute_ast(self, ast: QueryAst, emit_vo: bool = False) \
            -> QueryResult:
        if isinstance(ast, InsertQuery):
            return self._exec_insert(ast)
        if isinstance(ast, DeleteQuery):
            return self._exec_delete(ast)
        if isinstance(ast, UpdateQuery):
            return self._exec_update(ast)
        if isinstance(ast, SelectSimple):
            if ast.entry_id is not None:
                return self._exec_simple_id(ast)
            return self._exec_time_range(ast, ast.timestamp, ast.timestamp,
                                         emit_vo)
        if isinstance(ast, SelectTimeRange):
            return self._exec_time_range(ast, ast.start_time, ast.end_time,
                                         emit_vo)
        if isinstance(ast, SelectFuzzy):
            return self._exec_fuzzy(ast, emit_vo)
        raise TypeError(f"unexecutable ast {ast!r}")

    def execute(self, sql: str, emit_vo: bool = False) -> QueryResult:
        return self.execute_ast(parse(sql), emit_vo=emit_vo)


def replay(ledger: Ledger, store: Optional[ContentStore] = None,
           threshold_t: Optional[int] = 10) -> Engine:
    """Rebuild engine state from a ledger by re-applying every block's
    operation records in order."""
    engine = Engine(store=store, threshold_t=threshold_t)
    for block in ledger.blocks:
        by_id = {e.entry_id: e for e in block.entries}
        for kind, target in block.ops:
            if kind == OP_INSERT:
                entry = by_id[target]
                engine._index_entry(entry)
                engine._next_id = max(engine._next_id, target + 1)
            elif kind == OP_DELETE:
                engine.tombstones.add(target)
            elif kind == OP_UPDATE:
                engine.superseded.add(target)
                # the replacement entry rides in the same block
                new = next(e for e in block.entries
                           if e.entry_id not in (target,))
                engine._index_entry(new)
                engine._next_id = max(engine._next_id, new.entry_id + 1)
        rebuilt_roots = (engine.time_index.root_digest(),
                         engine.trie.root_digest())
        if rebuilt_roots != block.anchored_roots:
            raise VerificationFailure(
                f"replayed roots at height {block.height} do not match the "
                "anchored roots")
        engine.ledger.append_block(block.entries, rebuilt_roots,
                                   ops=block.ops)
    engine.cache.invalidate()
    return engine
