"""Schema-item labeling, scoring, ranking/filtering, and input serialization."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .dialect import ClauseTree, column_refs
from .errors import LinkageError
from .schema import Column, DatabaseSchema, Table

_WORD_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class LinkLabels:
    table_labels: tuple[int, ...]
    column_labels: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class SchemaScores:
    table_probs: tuple[float, ...]
    column_probs: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class RankConfig:
    k1: int = 4
    k2: int = 5
    include_foreign_keys: bool = False
    include_content: bool = False

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError("k1 and k2 must be positive")


@dataclass(frozen=True)
class RankedTable:
    table: Table
    kept_columns: tuple[Column, ...]
    table_prob: float
    column_probs: tuple[float, ...]


@dataclass
class RankedSchema:
    entries: list[RankedTable]
    matched_values: dict[str, list[str]] = field(default_factory=dict)


# --- gold labels ------------------------------------------------------------

def _scopes(tree: ClauseTree):
    yield tree
    for cond in tree.where_conjuncts + tree.having_conjuncts:
        if cond.right_kind == "subquery":
            yield from _scopes(cond.right)
    if tree.set_op is not None:
        yield from _scopes(tree.set_op[1])


def _scope_column_refs(scope: ClauseTree) -> list[str]:
    refs: list[str] = []
    for item in scope.select_items:
        refs.extend(item.qualified_columns)
    for cond in scope.where_conjuncts + scope.having_conjuncts:
        refs.extend(column_refs(cond.left))
        if cond.right_kind == "column":
            refs.extend(column_refs(cond.right))
    for entry in scope.group_by:
        refs.extend(column_refs(entry))
    for expr, _direction in scope.order_by:
        refs.extend(column_refs(expr))
    for join in scope.join_conditions:
        for side in join.split(" = "):
            refs.extend(column_refs(side))
    return refs


def derive_labels(tree: ClauseTree, schema: DatabaseSchema) -> LinkLabels:
    """Label every schema item referenced by an alias-free query tree."""
    table_labels = [0] * schema.table_count
    column_labels = [[0] * len(t.columns) for t in schema.tables]

    for scope in _scopes(tree):
        scope_tables: list[int] = []
        for name in sorted(scope.from_tables):
            idx = schema.table_index(name)
            if idx is None:
                raise LinkageError(f"table {name!r} not found in schema {schema.db_id!r}")
            table_labels[idx] = 1
            scope_tables.append(idx)
        scope_tables.sort()  # resolve bare columns in default schema order

        for ref in _scope_column_refs(scope):
            if "." in ref:
                table_name, col_name = ref.split(".", 1)
                t_idx = schema.table_index(table_name)
                if t_idx is None:
                    raise LinkageError(f"column {ref!r} names a table absent from schema {schema.db_id!r}")
                c_idx = schema.column_index(t_idx, col_name)
                if c_idx is None:
                    raise LinkageError(f"column {ref!r} not found in schema {schema.db_id!r}")
            else:
                t_idx = c_idx = None
                for cand in scope_tables:
                    k = schema.column_index(cand, ref)
                    if k is not None:
                        t_idx, c_idx = cand, k
                        break
                if t_idx is None:
                    raise LinkageError(
                        f"column {ref!r} not found in any table referenced by the query "
                        f"(schema {schema.db_id!r})"
                    )
            # a referenced column always implies its table
            table_labels[t_idx] = 1
            column_labels[t_idx][c_idx] = 1

    return LinkLabels(tuple(table_labels), tuple(tuple(row) for row in column_labels))


def labels_as_scores(labels: LinkLabels) -> SchemaScores:
    """Treat gold labels as oracle probabilities (1.0 / 0.0)."""
    return SchemaScores(
        table_probs=tuple(float(x) for x in labels.table_labels),
        column_probs=tuple(tuple(float(x) for x in row) for row in labels.column_labels),
    )


# --- deterministic lexical scorer -------------------------------------------

def _fold_plural(token: str) -> str:
    if len(token) > 3 and token.endswith("ies"):
        return token[:-3] + "y"
    if len(token) > 3 and token.endswith("s") and not token.endswith("ss"):
        return token[:-1]
    return token


def _token_set(text: str) -> set[str]:
    return {_fold_plural(t) for t in _WORD_RE.findall(text.lower())}


def _overlap(a: set[str], b: set[str]) -> float:
    if not a or not b:
        return 0.0
    return len(a & b) / min(len(a), len(b))


def _whole_word_match(question_lower: str, value: str) -> bool:
    needle = value.strip().lower()
    if not needle:
        return False
    pattern = r"(?<![a-z0-9])" + re.escape(needle) + r"(?![a-z0-9])"
    return re.search(pattern, question_lower) is not None


VALUE_MATCH_BONUS = 0.3


def lexical_scores(question: str, schema: DatabaseSchema) -> SchemaScores:
    """Deterministic stand-in scorer: name-token overlap plus a cell-match bonus.

    This is not a claim of cross-encoder quality; it exists so ranking and
    serialization can run without a trained model.
    """
    q_tokens = _token_set(question)
    q_lower = question.lower()
    table_probs: list[float] = []
    column_probs: list[tuple[float, ...]] = []
    for table in schema.tables:
        names = (table.semantic_name, table.original_name)
        table_probs.append(max(_overlap(q_tokens, _token_set(n)) for n in names))
        row = []
        for col in table.columns:
            names = (col.semantic_name, col.original_name)
            score = max(_overlap(q_tokens, _token_set(n)) for n in names)
            if any(_whole_word_match(q_lower, v) for v in col.sample_values):
                score = min(1.0, score + VALUE_MATCH_BONUS)
            row.append(score)
        column_probs.append(tuple(row))
    return SchemaScores(tuple(table_probs), tuple(column_probs))


def ingest_scores(scores_document: dict, schema: DatabaseSchema) -> SchemaScores:
    """Validate externally produced probabilities against the schema shape."""
    table_probs = scores_document.get("table_probs")
    column_probs = scores_document.get("column_probs")
    if not isinstance(table_probs, list) or not isinstance(column_probs, list):
        raise ValueError("scores document needs 'table_probs' and 'column_probs' arrays")
    if len(table_probs) != schema.table_count:
        raise ValueError(
            f"expected {schema.table_count} table probabilities for {schema.db_id!r}, "
            f"got {len(table_probs)}"
        )
    if len(column_probs) != schema.table_count:
        raise ValueError(
            f"expected one column probability row per table for {schema.db_id!r}, "
            f"got {len(column_probs)} rows"
        )
    for i, table in enumerate(schema.tables):
        row = column_probs[i]
        if not isinstance(row, list) or len(row) != len(table.columns):
            raise ValueError(
                f"column probability row for table {table.original_name!r} has wrong shape"
            )
    def check(value) -> float:
        prob = float(value)
        if not 0.0 <= prob <= 1.0:
            raise ValueError(f"probability {value!r} outside [0, 1]")
        return prob

    return SchemaScores(
        table_probs=tuple(check(v) for v in table_probs),
        column_probs=tuple(tuple(check(v) for v in row) for row in column_probs),
    )


# --- ranking and serialization ----------------------------------------------

def rank_and_filter(scores: SchemaScores, schema: DatabaseSchema, config: RankConfig) -> RankedSchema:
    """Keep the top-k1 tables and top-k2 columns per table, probability order.

    Ties break by default schema order (earlier index wins).
    """
    if len(scores.table_probs) != schema.table_count or len(scores.column_probs) != schema.table_count:
        raise ValueError("scores shape does not match schema")
    table_order = sorted(
        range(schema.table_count), key=lambda i: (-scores.table_probs[i], i)
    )[: config.k1]
    entries: list[RankedTable] = []
    for i in table_order:
        table = schema.tables[i]
        probs = scores.column_probs[i]
        if len(probs) != len(table.columns):
            raise ValueError(f"column scores for table {table.original_name!r} have wrong shape")
        col_order = sorted(range(len(table.columns)), key=lambda k: (-probs[k], k))[: config.k2]
        entries.append(
            RankedTable(
                table=table,
                kept_columns=tuple(table.columns[k] for k in col_order),
                table_prob=scores.table_probs[i],
                column_probs=tuple(probs[k] for k in col_order),
            )
        )
    return RankedSchema(entries)


def build_cross_encoder_input(question: str, schema: DatabaseSchema) -> str:
    """Question plus the full schema sequence in default order, semantic names."""
    parts = [question]
    for table in schema.tables:
        cols = " , ".join(col.semantic_name for col in table.columns)
        parts.append(f"{table.semantic_name} : {cols}")
    return " | ".join(parts)


def build_ranked_input(
    question: str,
    ranked: RankedSchema,
    schema: DatabaseSchema,
    config: RankConfig,
) -> str:
    """Question plus the ranked schema sequence, original names throughout.

    Matched cell values follow their column in parentheses when content is
    enabled; foreign keys are appended only when both endpoint tables
    survived filtering.
    """
    parts = [question]
    for entry in ranked.entries:
        t_name = entry.table.original_name.lower()
        pieces = []
        for col in entry.kept_columns:
            piece = col.original_name.lower()
            if config.include_content:
                values = ranked.matched_values.get(f"{t_name}.{col.original_name.lower()}", [])
                if values:
                    piece += " ( " + " , ".join(f"'{v}'" for v in values) + " )"
            pieces.append(piece)
        parts.append(f"{t_name} : " + " , ".join(pieces))
    if config.include_foreign_keys:
        kept = {entry.table.original_name.lower() for entry in ranked.entries}
        for fk in schema.foreign_keys:
            from_table = schema.tables[fk.from_table_index]
            to_table = schema.tables[fk.to_table_index]
            ft, tt = from_table.original_name.lower(), to_table.original_name.lower()
            if ft in kept and tt in kept:
                fc = from_table.columns[fk.from_column_index].original_name.lower()
                tc = to_table.columns[fk.to_column_index].original_name.lower()
                parts.append(f"{ft}.{fc} = {tt}.{tc}")
    return " | ".join(parts)


def match_cell_values(question: str, schema: DatabaseSchema) -> dict[str, list[str]]:
    """Find sample cell values appearing as whole words in the question.

    Keeps at most two matches per column, longest first.
    """
    q_lower = question.lower()
    matches: dict[str, list[str]] = {}
    for table in schema.tables:
        t_name = table.original_name.lower()
        for col in table.columns:
            seen: set[str] = set()
            hits: list[str] = []
            for value in col.sample_values:
                key = value.strip().lower()
                if not key or key in seen:
                    continue
                seen.add(key)
                if _whole_word_match(q_lower, value):
                    hits.append(value.strip())
            if hits:
                hits.sort(key=lambda v: -len(v))
                matches[f"{t_name}.{col.original_name.lower()}"] = hits[:2]
    return matches
