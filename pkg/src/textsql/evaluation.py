"""Exact-set-match, execution accuracy, execution-guided beam selection, and
corpus-level reporting against sqlite databases laid out as
``{db_dir}/{db_id}/{db_id}.sqlite``.
"""

from __future__ import annotations

import sqlite3
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .dialect import (
    KEYWORD,
    NUMBER,
    STRING,
    ClauseTree,
    Condition,
    SqlToken,
    join_tokens,
    parse,
    tokenize,
)
from .errors import CorpusError, TextSqlError
from .schema import DatabaseSchema

DEFAULT_TIMEOUT_MS = 30_000
_PROGRESS_OPCODES = 2_000
_VALUE_MASK = "_value_"


# --- beams -------------------------------------------------------------------

@dataclass(frozen=True)
class Beam:
    """Scored candidates for one question, best first."""

    question_id: str
    candidates: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if not self.candidates:
            raise ValueError(f"beam for {self.question_id!r} is empty")
        ordered = tuple(sorted(self.candidates, key=lambda c: -c[1]))
        object.__setattr__(self, "candidates", ordered)


@dataclass(frozen=True)
class SelectionOutcome:
    sql: str
    index: int
    executable: bool


# --- report ------------------------------------------------------------------

@dataclass
class InstanceOutcome:
    question_id: str
    em: bool
    ex: bool
    chosen_sql: str
    error: str | None = None
    beam_index: int | None = None
    executable: bool | None = None

    def to_dict(self) -> dict:
        record = {
            "question_id": self.question_id,
            "em": self.em,
            "ex": self.ex,
            "chosen_sql": self.chosen_sql,
        }
        if self.error is not None:
            record["error"] = self.error
        if self.beam_index is not None:
            record["beam_index"] = self.beam_index
        if self.executable is not None:
            record["executable"] = self.executable
        return record


@dataclass
class EvalReport:
    instances: list[InstanceOutcome] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.instances)

    @property
    def em_pct(self) -> float:
        if not self.instances:
            return 0.0
        return 100.0 * sum(r.em for r in self.instances) / len(self.instances)

    @property
    def ex_pct(self) -> float:
        if not self.instances:
            return 0.0
        return 100.0 * sum(r.ex for r in self.instances) / len(self.instances)

    def to_dict(self) -> dict:
        return {
            "em_pct": self.em_pct,
            "ex_pct": self.ex_pct,
            "n": self.n,
            "instances": [r.to_dict() for r in self.instances],
        }


# --- exact-set-match ----------------------------------------------------------

def _mask_expression(expression: str) -> str:
    masked = []
    for tok in tokenize(expression):
        if tok.kind in (NUMBER, STRING):
            masked.append(SqlToken(tok.kind, _VALUE_MASK, _VALUE_MASK))
        else:
            masked.append(tok)
    return join_tokens(masked)


def _mask_literal(value: str) -> str:
    return _mask_expression(value)


def _condition_key(cond: Condition):
    if cond.right_kind == "subquery":
        right = ("subquery", _em_key(cond.right))
    elif isinstance(cond.right, tuple):
        right = ("literal", tuple(_mask_literal(v) for v in cond.right))
    elif cond.right_kind == "literal":
        right = ("literal", _mask_literal(cond.right))
    else:
        right = ("column", _mask_expression(cond.right))
    return (_mask_expression(cond.left), cond.comparator, right)


def _conjunct_key(conjuncts: tuple[Condition, ...]):
    conditions = frozenset(_condition_key(c) for c in conjuncts)
    connectives = tuple(sorted(c.joined_by for c in conjuncts[1:]))
    return (conditions, connectives)


def _em_key(tree: ClauseTree):
    select_key = frozenset(
        (item.aggregate, item.distinct, _mask_expression(item.expression))
        for item in tree.select_items
    )
    set_op_key = None
    if tree.set_op is not None:
        set_op_key = (tree.set_op[0], _em_key(tree.set_op[1]))
    return (
        select_key,
        tree.select_distinct,
        tree.from_tables,
        tree.join_conditions,
        _conjunct_key(tree.where_conjuncts),
        frozenset(_mask_expression(g) for g in tree.group_by),
        _conjunct_key(tree.having_conjuncts),
        tuple((_mask_expression(e), d) for e, d in tree.order_by),
        tree.limit is not None,
        set_op_key,
    )


def exact_set_match(pred_sql: str, gold_sql: str) -> bool:
    """Clause-structure equality with literals masked and intra-clause sets.

    Predictions that fail to parse return false; an unparseable gold query is
    a corpus error.
    """
    try:
        gold_tree = parse(gold_sql)
    except TextSqlError as exc:
        raise CorpusError(f"gold query does not parse: {exc}")
    try:
        pred_tree = parse(pred_sql)
    except TextSqlError:
        return False
    return _em_key(pred_tree) == _em_key(gold_tree)


# --- execution ----------------------------------------------------------------

def open_database(path) -> sqlite3.Connection:
    """Open a sqlite database read-only."""
    db_path = Path(path)
    if not db_path.exists():
        raise CorpusError(f"database file not found: {db_path}")
    conn = sqlite3.connect(f"file:{db_path}?mode=ro", uri=True)
    conn.text_factory = lambda b: b.decode("utf-8", errors="replace")
    return conn


def run_query(conn: sqlite3.Connection, sql: str, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> list[tuple]:
    """Execute and fetch all rows; interrupts the engine past the deadline."""
    deadline = time.monotonic() + timeout_ms / 1000.0
    conn.set_progress_handler(lambda: 1 if time.monotonic() > deadline else 0, _PROGRESS_OPCODES)
    try:
        cursor = conn.execute(sql)
        return [tuple(row) for row in cursor.fetchall()]
    finally:
        conn.set_progress_handler(None, 0)


def _has_top_level_order_by(sql: str) -> bool:
    try:
        tree = parse(sql)
    except TextSqlError:
        try:
            depth = 0
            for tok in tokenize(sql):
                if tok.text == "(":
                    depth += 1
                elif tok.text == ")":
                    depth -= 1
                elif depth == 0 and tok.kind == KEYWORD and tok.lower == "order":
                    return True
        except TextSqlError:
            pass
        return False
    while True:
        if tree.order_by:
            return True
        if tree.set_op is None:
            return False
        tree = tree.set_op[1]


def execution_accuracy(
    pred_sql: str,
    gold_sql: str,
    database: sqlite3.Connection,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
) -> bool:
    """Compare result multisets; row order matters only when both queries order."""
    try:
        gold_rows = run_query(database, gold_sql, timeout_ms)
    except sqlite3.Error as exc:
        raise CorpusError(f"gold query failed to execute: {exc}")
    try:
        pred_rows = run_query(database, pred_sql, timeout_ms)
    except sqlite3.Error:
        return False
    if _has_top_level_order_by(pred_sql) and _has_top_level_order_by(gold_sql):
        return pred_rows == gold_rows
    return Counter(gold_rows) == Counter(pred_rows)


def select_executable(
    beam: Beam,
    database: sqlite3.Connection,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
) -> SelectionOutcome:
    """Pick the first candidate that executes without error (empty results count).

    Falls back to the top candidate, flagged, when nothing executes.
    """
    for index, (sql, _score) in enumerate(beam.candidates):
        try:
            run_query(database, sql, timeout_ms)
        except sqlite3.Error:
            continue
        return SelectionOutcome(sql=sql, index=index, executable=True)
    return SelectionOutcome(sql=beam.candidates[0][0], index=0, executable=False)


# --- corpus evaluation ----------------------------------------------------------

def database_path(db_dir, db_id: str) -> Path:
    return Path(db_dir) / db_id / f"{db_id}.sqlite"


def evaluate_corpus(
    dataset: list[dict],
    *,
    predictions: dict[str, str] | None = None,
    beams: dict[str, Beam] | None = None,
    schemas: dict[str, DatabaseSchema] | None = None,
    db_dir,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    workers: int = 1,
) -> EvalReport:
    """Evaluate EM and EX per instance; beams are resolved to predictions first."""
    if (predictions is None) == (beams is None):
        raise ValueError("provide exactly one of predictions or beams")

    def one(instance: dict) -> InstanceOutcome:
        try:
            qid = instance["question_id"]
            db_id = instance["db_id"]
            gold = instance["query"]
        except KeyError as exc:
            raise CorpusError(f"dataset instance missing field {exc}")
        if schemas is not None and db_id not in schemas:
            raise CorpusError(f"db_id {db_id!r} not present in the schema document")
        db_path = database_path(db_dir, db_id)
        if not db_path.exists():
            raise CorpusError(f"database for {db_id!r} not found at {db_path}")

        conn = open_database(db_path)
        try:
            beam_index = None
            executable = None
            if predictions is not None:
                pred = predictions.get(qid)
                if pred is None:
                    return InstanceOutcome(qid, False, False, "", error="missing prediction")
            else:
                beam = beams.get(qid)
                if beam is None:
                    return InstanceOutcome(qid, False, False, "", error="missing beam")
                outcome = select_executable(beam, conn, timeout_ms)
                pred = outcome.sql
                beam_index = outcome.index
                executable = outcome.executable
            em = exact_set_match(pred, gold)
            ex = execution_accuracy(pred, gold, conn, timeout_ms)
            return InstanceOutcome(
                qid, em, ex, pred, beam_index=beam_index, executable=executable
            )
        finally:
            conn.close()

    if workers <= 1:
        results = [one(instance) for instance in dataset]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, dataset))
    return EvalReport(instances=results)


# --- sample value scanning -------------------------------------------------------

def scan_sample_values(
    db_path,
    schema: DatabaseSchema,
    max_per_column: int = 500,
) -> dict[str, list[str]]:
    """Collect distinct cell values per column for content enrichment.

    Values are ordered for determinism; columns or tables missing from the
    file are skipped silently.
    """
    conn = open_database(db_path)
    values: dict[str, list[str]] = {}
    try:
        for table in schema.tables:
            t_name = table.original_name
            for col in table.columns:
                query = (
                    f'SELECT DISTINCT CAST("{col.original_name}" AS TEXT) '
                    f'FROM "{t_name}" ORDER BY 1 LIMIT {int(max_per_column)}'
                )
                try:
                    rows = run_query(conn, query)
                except sqlite3.Error:
                    continue
                cells = [row[0] for row in rows if row[0] not in (None, "")]
                if cells:
                    values[f"{t_name.lower()}.{col.original_name.lower()}"] = cells
    finally:
        conn.close()
    return values
