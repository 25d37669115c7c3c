"""SQL normalization rules and the canonical clause-tree printer.

Normalization rewrites a query so that (1) keywords and schema identifiers
are lowercase, (2) parentheses are space-padded and string literals use
single quotes, (3) every ``order by`` expression carries an explicit
direction, and (4) ``as`` clauses are dropped with aliases replaced by their
table names. Literal contents are never touched.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dialect import (
    IDENTIFIER,
    KEYWORD,
    PUNCT,
    STRING,
    ClauseTree,
    Condition,
    SqlToken,
    join_tokens,
    parse,
    resolve_aliases,
    tokenize,
)
from .errors import NormalizeError

_ORDER_CLAUSE_END = frozenset({"limit", "union", "intersect", "except"})


@dataclass(frozen=True)
class NormalizedSql:
    text: str
    source: str


def normalize_sql(sql_text: str) -> NormalizedSql:
    """Apply the four normalization rules to ``sql_text``."""
    parse(sql_text)  # reject anything outside the supported subset up front
    tokens = [t for t in tokenize(sql_text) if not (t.kind == PUNCT and t.text == ";")]
    tokens, _ = resolve_aliases(tokens)
    _check_qualifiers(tokens)
    tokens = _insert_order_directions(tokens)
    tokens = [_normalize_token(t) for t in tokens]
    return NormalizedSql(text=join_tokens(tokens), source=sql_text)


def _normalize_token(tok: SqlToken) -> SqlToken:
    if tok.kind == STRING:
        if tok.text.startswith('"'):
            text = "'" + tok.text[1:-1] + "'"
            return SqlToken(STRING, text, text)
        return tok
    if tok.kind in (KEYWORD, IDENTIFIER):
        return SqlToken(tok.kind, tok.lower, tok.lower)
    return tok


def _from_table_names(tokens: list[SqlToken]) -> set[str]:
    names: set[str] = set()
    for i, tok in enumerate(tokens):
        if tok.kind == KEYWORD and tok.lower in ("from", "join"):
            j = i + 1
            while j < len(tokens) and tokens[j].kind == IDENTIFIER:
                names.add(tokens[j].lower)
                if j + 1 < len(tokens) and tokens[j + 1].text == ",":
                    j += 2
                else:
                    break
    return names


def _check_qualifiers(tokens: list[SqlToken]) -> None:
    tables = _from_table_names(tokens)
    for i, tok in enumerate(tokens):
        if (
            tok.kind == IDENTIFIER
            and i + 1 < len(tokens)
            and tokens[i + 1].text == "."
            and tok.lower not in tables
        ):
            raise NormalizeError(f"alias {tok.text!r} referenced but never bound")


def _insert_order_directions(tokens: list[SqlToken]) -> list[SqlToken]:
    out = list(tokens)
    i = 0
    while i < len(out) - 1:
        if out[i].kind == KEYWORD and out[i].lower == "order" and out[i + 1].lower == "by":
            i = _fix_order_clause(out, i + 2)
        else:
            i += 1
    return out


def _fix_order_clause(out: list[SqlToken], start: int) -> int:
    asc = SqlToken(KEYWORD, "asc", "asc")
    depth = 0
    j = start
    while j < len(out):
        tok = out[j]
        if tok.text == "(":
            depth += 1
        elif tok.text == ")":
            if depth == 0:
                break
            depth -= 1
        elif depth == 0 and tok.kind == KEYWORD and tok.lower in _ORDER_CLAUSE_END:
            break
        elif depth == 0 and tok.text == ",":
            if out[j - 1].lower not in ("asc", "desc"):
                out.insert(j, asc)
                j += 1
        j += 1
    if j > start and out[j - 1].lower not in ("asc", "desc"):
        out.insert(j, asc)
        j += 1
    return j


# --- canonical printer ------------------------------------------------------

def unparse(tree: ClauseTree) -> str:
    """Print a clause tree as normalized SQL; ``parse(unparse(t)) == t``."""
    parts: list[str] = ["select"]
    if tree.select_distinct:
        parts.append("distinct")
    rendered_items = []
    for item in tree.select_items:
        if item.aggregate != "none":
            body = ("distinct " if item.distinct else "") + item.expression
            rendered_items.append(f"{item.aggregate} ( {body} )")
        else:
            rendered_items.append(item.expression)
    parts.append(" , ".join(rendered_items))

    parts.append("from")
    parts.append(" join ".join(sorted(tree.from_tables)))
    if tree.join_conditions:
        parts.append("on")
        parts.append(" and ".join(sorted(tree.join_conditions)))

    if tree.where_conjuncts:
        parts.append("where")
        parts.append(_print_conditions(tree.where_conjuncts))
    if tree.group_by:
        parts.append("group by")
        parts.append(" , ".join(sorted(tree.group_by)))
    if tree.having_conjuncts:
        parts.append("having")
        parts.append(_print_conditions(tree.having_conjuncts))
    if tree.order_by:
        parts.append("order by")
        parts.append(" , ".join(f"{expr} {direction}" for expr, direction in tree.order_by))
    if tree.limit is not None:
        parts.append(f"limit {tree.limit}")
    if tree.set_op is not None:
        op, right = tree.set_op
        parts.append(op)
        parts.append(unparse(right))
    return " ".join(parts)


def _print_conditions(conjuncts: tuple[Condition, ...]) -> str:
    pieces = [_print_condition(conjuncts[0])]
    for cond in conjuncts[1:]:
        pieces.append(cond.joined_by)
        pieces.append(_print_condition(cond))
    return " ".join(pieces)


def _print_condition(cond: Condition) -> str:
    if cond.comparator == "exists":
        return f"exists ( {unparse(cond.right)} )"
    if cond.comparator == "between":
        lo, hi = cond.right
        return f"{cond.left} between {lo} and {hi}"
    if cond.right_kind == "subquery":
        return f"{cond.left} {cond.comparator} ( {unparse(cond.right)} )"
    return f"{cond.left} {cond.comparator} {cond.right}"
