"""Tokenizer and clause-level parser for the benchmark SQL subset.

The parser produces a :class:`ClauseTree` whose clause contents are stored as
normalized strings (lowercase identifiers, single-quoted literals, spaced
parentheses). Table aliases bound with ``as`` are resolved up front, so trees
are always alias-free.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ParseError, TokenizeError

KEYWORDS = frozenset({
    "select", "from", "where", "group", "by", "having", "order", "limit",
    "distinct", "and", "or", "not", "in", "like", "between", "is", "exists",
    "join", "on", "as", "asc", "desc", "union", "intersect", "except",
    "count", "max", "min", "sum", "avg", "null",
})

AGGREGATES = ("count", "max", "min", "sum", "avg")
SET_OPERATORS = ("intersect", "union", "except")
CLAUSE_KEYWORDS = frozenset({
    "select", "from", "where", "group", "having", "order", "limit",
    "union", "intersect", "except",
})

# token kinds
KEYWORD = "keyword"
IDENTIFIER = "identifier"
NUMBER = "number_literal"
STRING = "string_literal"
OPERATOR = "operator"
PUNCT = "punctuation"

_COMPARATOR_TEXTS = frozenset({"=", "!=", "<>", "<", "<=", ">", ">="})
_CONDITION_KEYWORDS = frozenset({"not", "in", "like", "between", "is"})
_TWO_CHAR_OPS = ("<>", "!=", "<=", ">=", "||")
_ONE_CHAR_OPS = "=<>+-*/"
_PUNCT_CHARS = "(),.;"
_ARITH_OPS = frozenset({"+", "-", "*", "/", "||"})


@dataclass(frozen=True)
class SqlToken:
    kind: str
    text: str
    lower: str


def _token(kind: str, text: str) -> SqlToken:
    return SqlToken(kind, text, text if kind == STRING else text.lower())


def tokenize(sql_text: str) -> list[SqlToken]:
    """Split ``sql_text`` into tokens; every non-whitespace character is consumed."""
    tokens: list[SqlToken] = []
    i, n = 0, len(sql_text)
    while i < n:
        ch = sql_text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "'\"":
            j = i + 1
            closed = False
            while j < n:
                if sql_text[j] == ch:
                    if j + 1 < n and sql_text[j + 1] == ch:  # doubled-quote escape
                        j += 2
                        continue
                    closed = True
                    break
                j += 1
            if not closed:
                raise TokenizeError(f"unterminated string literal starting at offset {i}")
            tokens.append(_token(STRING, sql_text[i:j + 1]))
            i = j + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and sql_text[i + 1].isdigit()):
            i = _scan_number(sql_text, i, tokens)
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (sql_text[j].isalnum() or sql_text[j] == "_"):
                j += 1
            word = sql_text[i:j]
            kind = KEYWORD if word.lower() in KEYWORDS else IDENTIFIER
            tokens.append(_token(kind, word))
            i = j
            continue
        pair = sql_text[i:i + 2]
        if pair in _TWO_CHAR_OPS:
            tokens.append(_token(OPERATOR, pair))
            i += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(_token(OPERATOR, ch))
            i += 1
            continue
        if ch in _PUNCT_CHARS:
            tokens.append(_token(PUNCT, ch))
            i += 1
            continue
        raise TokenizeError(f"illegal character {ch!r} at offset {i}")
    return tokens


def _scan_number(s: str, i: int, tokens: list[SqlToken]) -> int:
    n = len(s)
    j = i
    while j < n and s[j].isdigit():
        j += 1
    if j < n and s[j] == "." and j + 1 < n and s[j + 1].isdigit():
        j += 1
        while j < n and s[j].isdigit():
            j += 1
    if j < n and s[j] in "eE":
        k = j + 1
        if k < n and s[k] in "+-":
            k += 1
        if k < n and s[k].isdigit():
            while k < n and s[k].isdigit():
                k += 1
            j = k
    tokens.append(_token(NUMBER, s[i:j]))
    return j


def join_tokens(tokens: list[SqlToken]) -> str:
    """Render tokens single-space separated, with qualifier dots kept tight."""
    parts: list[str] = []
    glue_next = False
    for tok in tokens:
        if tok.kind == PUNCT and tok.text == ".":
            if parts:
                parts[-1] += "."
            else:
                parts.append(".")
            glue_next = True
            continue
        if glue_next and parts:
            parts[-1] += tok.text
        else:
            parts.append(tok.text)
        glue_next = False
    return " ".join(parts)


def column_refs(expression: str) -> list[str]:
    """Extract column references (``table.column`` or bare names) from an expression string."""
    toks = tokenize(expression)
    refs: list[str] = []
    i = 0
    while i < len(toks):
        tok = toks[i]
        if tok.kind == IDENTIFIER:
            if i + 2 < len(toks) and toks[i + 1].text == "." and toks[i + 2].kind == IDENTIFIER:
                refs.append(f"{tok.lower}.{toks[i + 2].lower}")
                i += 3
                continue
            if i + 2 < len(toks) and toks[i + 1].text == "." and toks[i + 2].text == "*":
                i += 3
                continue
            refs.append(tok.lower)
        i += 1
    return refs


def resolve_aliases(tokens: list[SqlToken]) -> tuple[list[SqlToken], dict[str, str]]:
    """Drop ``as`` clauses and substitute every alias with its bound table token."""
    bindings: dict[str, SqlToken] = {}
    out: list[SqlToken] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind == KEYWORD and tok.lower == "as":
            if not out or out[-1].kind != IDENTIFIER or i + 1 >= len(tokens) or tokens[i + 1].kind != IDENTIFIER:
                raise ParseError("misplaced 'as' clause")
            alias = tokens[i + 1].lower
            target = out[-1]
            if alias in bindings and bindings[alias].lower != target.lower:
                raise ParseError(f"alias {alias!r} bound to multiple tables")
            bindings[alias] = target
            i += 2
            continue
        out.append(tok)
        i += 1
    if not bindings:
        return out, {}
    resolved = [bindings.get(t.lower, t) if t.kind == IDENTIFIER else t for t in out]
    return resolved, {alias: tok.lower for alias, tok in bindings.items()}


# --- clause tree -----------------------------------------------------------

@dataclass(frozen=True)
class SelectItem:
    aggregate: str  # "none" or one of AGGREGATES
    distinct: bool
    expression: str
    qualified_columns: tuple[str, ...]


@dataclass(frozen=True)
class Condition:
    left: str
    comparator: str  # =, !=, <, <=, >, >=, like, not like, in, not in, between, is, exists
    right_kind: str  # "literal" | "column" | "subquery"
    right: object    # str, (lo, hi) pair for between, or ClauseTree
    joined_by: str = "and"  # connective to the previous conjunct


@dataclass(frozen=True)
class ClauseTree:
    select_items: tuple[SelectItem, ...]
    select_distinct: bool
    from_tables: frozenset[str]
    join_conditions: frozenset[str]
    where_conjuncts: tuple[Condition, ...]
    group_by: frozenset[str]
    having_conjuncts: tuple[Condition, ...]
    order_by: tuple[tuple[str, str], ...]
    limit: int | None
    set_op: tuple[str, "ClauseTree"] | None


def _normalize_literal_token(tok: SqlToken) -> SqlToken:
    if tok.kind == STRING and tok.text.startswith('"'):
        return _token(STRING, "'" + tok.text[1:-1] + "'")
    if tok.kind in (KEYWORD, IDENTIFIER):
        return _token(tok.kind, tok.lower)
    return tok


def _render(tokens: list[SqlToken]) -> str:
    return join_tokens([_normalize_literal_token(t) for t in tokens])


class _Parser:
    def __init__(self, tokens: list[SqlToken]):
        self.toks = tokens
        self.pos = 0

    def peek(self, offset: int = 0) -> SqlToken | None:
        idx = self.pos + offset
        return self.toks[idx] if idx < len(self.toks) else None

    def take(self) -> SqlToken:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of query")
        self.pos += 1
        return tok

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == KEYWORD and tok.lower in words

    def at_text(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.text == text

    def expect_keyword(self, word: str) -> SqlToken:
        if not self.at_keyword(word):
            self.fail(f"expected {word!r}")
        return self.take()

    def expect_text(self, text: str) -> SqlToken:
        if not self.at_text(text):
            self.fail(f"expected {text!r}")
        return self.take()

    def fail(self, message: str) -> None:
        tok = self.peek()
        if tok is None:
            raise ParseError(f"unsupported syntax: {message} at end of query")
        raise ParseError(f"unsupported syntax: {message} at token {self.pos} ({tok.text!r})")

    # --- grammar ---

    def parse_query(self) -> ClauseTree:
        tree = self.parse_core()
        if self.at_keyword(*SET_OPERATORS):
            op = self.take().lower
            right = self.parse_query()
            tree = replace(tree, set_op=(op, right))
        return tree

    def parse_core(self) -> ClauseTree:
        self.expect_keyword("select")
        select_distinct = False
        if self.at_keyword("distinct"):
            self.take()
            select_distinct = True
        items = [self.parse_select_item()]
        while self.at_text(","):
            self.take()
            items.append(self.parse_select_item())

        self.expect_keyword("from")
        from_tables, join_conditions = self.parse_from()

        where_conjuncts: tuple[Condition, ...] = ()
        if self.at_keyword("where"):
            self.take()
            where_conjuncts = self.parse_conditions()

        group_by: frozenset[str] = frozenset()
        if self.at_keyword("group"):
            self.take()
            self.expect_keyword("by")
            group_by = self.parse_group_columns()

        having_conjuncts: tuple[Condition, ...] = ()
        if self.at_keyword("having"):
            self.take()
            having_conjuncts = self.parse_conditions()

        order_by: tuple[tuple[str, str], ...] = ()
        if self.at_keyword("order"):
            self.take()
            self.expect_keyword("by")
            order_by = self.parse_order_items()

        limit = None
        if self.at_keyword("limit"):
            self.take()
            tok = self.take()
            if tok.kind != NUMBER or not tok.text.isdigit():
                raise ParseError(f"unsupported syntax: limit requires an integer, got {tok.text!r}")
            limit = int(tok.text)

        return ClauseTree(
            select_items=tuple(items),
            select_distinct=select_distinct,
            from_tables=from_tables,
            join_conditions=join_conditions,
            where_conjuncts=where_conjuncts,
            group_by=group_by,
            having_conjuncts=having_conjuncts,
            order_by=order_by,
            limit=limit,
            set_op=None,
        )

    def parse_select_item(self) -> SelectItem:
        tokens = self.capture_expression(self._stop_select_item)
        if not tokens:
            self.fail("expected select expression")
        # agg ( [distinct] inner ) captured as a whole; peel the aggregate off
        if (
            len(tokens) >= 4
            and tokens[0].kind == KEYWORD
            and tokens[0].lower in AGGREGATES
            and tokens[1].text == "("
            and tokens[-1].text == ")"
            and _balanced_inner(tokens[2:-1])
        ):
            inner = tokens[2:-1]
            distinct = False
            if inner and inner[0].kind == KEYWORD and inner[0].lower == "distinct":
                distinct = True
                inner = inner[1:]
            if not inner:
                self.fail("empty aggregate call")
            expr = _render(inner)
            return SelectItem(tokens[0].lower, distinct, expr, tuple(column_refs(expr)))
        expr = _render(tokens)
        return SelectItem("none", False, expr, tuple(column_refs(expr)))

    @staticmethod
    def _stop_select_item(tok: SqlToken) -> bool:
        return tok.text == "," or (tok.kind == KEYWORD and tok.lower == "from")

    def parse_from(self) -> tuple[frozenset[str], frozenset[str]]:
        tables: set[str] = set()
        joins: set[str] = set()
        self._take_table(tables)
        while True:
            if self.at_text(","):
                self.take()
                self._take_table(tables)
            elif self.at_keyword("join"):
                self.take()
                self._take_table(tables)
                if self.at_keyword("on"):
                    self.take()
                    joins.add(self.parse_join_condition())
                    while self.at_keyword("and"):
                        self.take()
                        joins.add(self.parse_join_condition())
            else:
                break
        return frozenset(tables), frozenset(joins)

    def _take_table(self, tables: set[str]) -> None:
        tok = self.peek()
        if tok is None or tok.kind != IDENTIFIER:
            self.fail("expected table name")
        tables.add(self.take().lower)

    def parse_join_condition(self) -> str:
        left = _render(self.capture_expression(self._stop_join_side))
        if not self.at_text("="):
            self.fail("expected '=' in join condition")
        self.take()
        right = _render(self.capture_expression(self._stop_join_side))
        if not left or not right:
            self.fail("empty join condition side")
        lo, hi = sorted((left, right))
        return f"{lo} = {hi}"

    @staticmethod
    def _stop_join_side(tok: SqlToken) -> bool:
        if tok.kind == OPERATOR and tok.text in _COMPARATOR_TEXTS:
            return True
        return tok.kind == KEYWORD and (tok.lower in CLAUSE_KEYWORDS or tok.lower in ("join", "on", "and", "or"))

    def parse_conditions(self) -> tuple[Condition, ...]:
        conds = [self.parse_condition("and")]
        while self.at_keyword("and", "or"):
            connective = self.take().lower
            conds.append(self.parse_condition(connective))
        return tuple(conds)

    def parse_condition(self, joined_by: str) -> Condition:
        if self.at_keyword("exists"):
            self.take()
            sub = self.parse_subquery()
            return Condition("", "exists", "subquery", sub, joined_by)

        left_tokens = self.capture_expression(self._stop_condition_left)
        if not left_tokens:
            self.fail("expected condition expression")
        left = _render(left_tokens)

        negated = False
        if self.at_keyword("not"):
            self.take()
            negated = True

        if self.at_keyword("in"):
            self.take()
            comparator = "not in" if negated else "in"
            tok = self.peek(1)
            if self.at_text("(") and tok is not None and tok.kind == KEYWORD and tok.lower == "select":
                sub = self.parse_subquery()
                return Condition(left, comparator, "subquery", sub, joined_by)
            return Condition(left, comparator, "literal", self.parse_literal_list(), joined_by)

        if self.at_keyword("like"):
            self.take()
            comparator = "not like" if negated else "like"
            tok = self.take()
            if tok.kind != STRING:
                raise ParseError(f"unsupported syntax: like requires a string pattern, got {tok.text!r}")
            return Condition(left, comparator, "literal", _normalize_literal_token(tok).text, joined_by)

        if negated:
            self.fail("expected 'in' or 'like' after 'not'")

        if self.at_keyword("between"):
            self.take()
            lo = self.parse_scalar_value()
            self.expect_keyword("and")
            hi = self.parse_scalar_value()
            return Condition(left, "between", "literal", (lo, hi), joined_by)

        if self.at_keyword("is"):
            self.take()
            if self.at_keyword("not"):
                self.take()
                self.expect_keyword("null")
                return Condition(left, "is", "literal", "not null", joined_by)
            self.expect_keyword("null")
            return Condition(left, "is", "literal", "null", joined_by)

        tok = self.peek()
        if tok is None or tok.kind != OPERATOR or tok.text not in _COMPARATOR_TEXTS:
            self.fail("expected comparator")
        comparator = self.take().text
        if comparator == "<>":
            comparator = "!="

        next_tok = self.peek(1)
        if self.at_text("(") and next_tok is not None and next_tok.kind == KEYWORD and next_tok.lower == "select":
            sub = self.parse_subquery()
            return Condition(left, comparator, "subquery", sub, joined_by)

        tok = self.peek()
        if tok is not None and (
            tok.kind in (NUMBER, STRING)
            or (tok.kind == KEYWORD and tok.lower == "null")
            or (tok.kind == OPERATOR and tok.text == "-" and self._next_is_number())
        ):
            return Condition(left, comparator, "literal", self.parse_scalar_value(), joined_by)

        right_tokens = self.capture_expression(self._stop_condition_right)
        if not right_tokens:
            self.fail("expected condition value")
        return Condition(left, comparator, "column", _render(right_tokens), joined_by)

    def _next_is_number(self) -> bool:
        tok = self.peek(1)
        return tok is not None and tok.kind == NUMBER

    def parse_subquery(self) -> ClauseTree:
        self.expect_text("(")
        sub = self.parse_query()
        self.expect_text(")")
        return sub

    def parse_literal_list(self) -> str:
        self.expect_text("(")
        tokens: list[SqlToken] = [_token(PUNCT, "(")]
        while not self.at_text(")"):
            tok = self.peek()
            if tok is None:
                self.fail("unterminated value list")
            if tok.kind not in (NUMBER, STRING) and tok.text != "," and not (
                tok.kind == OPERATOR and tok.text == "-"
            ):
                self.fail("expected literal in value list")
            tokens.append(self.take())
        tokens.append(self.take())
        return _render(tokens)

    def parse_scalar_value(self) -> str:
        tok = self.peek()
        if tok is None:
            self.fail("expected value")
        if tok.kind == OPERATOR and tok.text == "-" and self._next_is_number():
            self.take()
            return "-" + self.take().text
        if tok.kind in (NUMBER, STRING):
            return _normalize_literal_token(self.take()).text
        if tok.kind == KEYWORD and tok.lower == "null":
            self.take()
            return "null"
        tokens = self.capture_expression(self._stop_condition_right)
        if not tokens:
            self.fail("expected value")
        return _render(tokens)

    @staticmethod
    def _stop_condition_left(tok: SqlToken) -> bool:
        if tok.kind == OPERATOR and tok.text in _COMPARATOR_TEXTS:
            return True
        return tok.kind == KEYWORD and (tok.lower in _CONDITION_KEYWORDS or tok.lower in CLAUSE_KEYWORDS
                                        or tok.lower in ("and", "or"))

    @staticmethod
    def _stop_condition_right(tok: SqlToken) -> bool:
        return tok.kind == KEYWORD and (tok.lower in ("and", "or") or tok.lower in CLAUSE_KEYWORDS)

    def parse_group_columns(self) -> frozenset[str]:
        cols = {_render(self.capture_expression(self._stop_group_item)) or self.fail("expected group by column")}
        while self.at_text(","):
            self.take()
            expr = _render(self.capture_expression(self._stop_group_item))
            if not expr:
                self.fail("expected group by column")
            cols.add(expr)
        return frozenset(cols)

    @staticmethod
    def _stop_group_item(tok: SqlToken) -> bool:
        return tok.text == "," or (tok.kind == KEYWORD and tok.lower in CLAUSE_KEYWORDS)

    def parse_order_items(self) -> tuple[tuple[str, str], ...]:
        items: list[tuple[str, str]] = []
        while True:
            tokens = self.capture_expression(self._stop_order_item)
            if not tokens:
                self.fail("expected order by expression")
            direction = "asc"
            if self.at_keyword("asc", "desc"):
                direction = self.take().lower
            items.append((_render(tokens), direction))
            if self.at_text(","):
                self.take()
                continue
            break
        return tuple(items)

    @staticmethod
    def _stop_order_item(tok: SqlToken) -> bool:
        return tok.text == "," or (tok.kind == KEYWORD and (tok.lower in CLAUSE_KEYWORDS or tok.lower in ("asc", "desc")))

    def capture_expression(self, stop) -> list[SqlToken]:
        """Collect tokens up to a depth-0 stop token or an unbalanced ')'."""
        captured: list[SqlToken] = []
        depth = 0
        while True:
            tok = self.peek()
            if tok is None:
                break
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                if depth == 0:
                    break
                depth -= 1
            elif depth == 0 and stop(tok):
                break
            captured.append(self.take())
        _check_operand_adjacency(captured)
        return captured


def _is_operand_start(tok: SqlToken) -> bool:
    if tok.kind in (IDENTIFIER, NUMBER, STRING) or tok.text == "(":
        return True
    return tok.kind == KEYWORD and tok.lower in AGGREGATES


def _check_operand_adjacency(tokens: list[SqlToken]) -> None:
    # Two operands with no operator between them means the construct is
    # outside the dialect (CASE, CAST, window clauses all look like this).
    # A '*' is a star operand when no operand precedes it, multiplication
    # otherwise.
    after_operand = False
    for tok in tokens:
        if tok.text == "*":
            after_operand = not after_operand
            continue
        if after_operand and _is_operand_start(tok):
            raise ParseError(
                f"unsupported syntax: unexpected {tok.text!r} inside an expression"
            )
        after_operand = tok.kind in (IDENTIFIER, NUMBER, STRING) or tok.text == ")"


def _balanced_inner(tokens: list[SqlToken]) -> bool:
    depth = 0
    for tok in tokens:
        if tok.text == "(":
            depth += 1
        elif tok.text == ")":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def parse(sql_text: str) -> ClauseTree:
    """Parse ``sql_text`` (aliases permitted) into an alias-free clause tree."""
    tokens = [t for t in tokenize(sql_text) if not (t.kind == PUNCT and t.text == ";")]
    tokens, _ = resolve_aliases(tokens)
    parser = _Parser(tokens)
    tree = parser.parse_query()
    if parser.pos != len(tokens):
        parser.fail("trailing input")
    return tree
