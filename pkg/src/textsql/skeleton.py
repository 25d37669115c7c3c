"""Skeleton extraction and the two-part decoding target.

A skeleton keeps the top-level clause keywords of a normalized query and
collapses everything else (the whole from clause included) into ``_`` slots.
The decoding target is the skeleton, the ``" | "`` delimiter, then the query.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dialect import KEYWORD, tokenize
from .normalize import NormalizedSql, normalize_sql

TARGET_DELIMITER = " | "
SLOT = "_"

# Clause keywords that survive into the skeleton; join/on and everything
# inside clause bodies become slots.
RETAINED_KEYWORDS = frozenset({
    "select", "from", "where", "group", "by", "having", "order", "limit",
    "asc", "desc", "union", "intersect", "except",
})


@dataclass(frozen=True)
class Skeleton:
    text: str


@dataclass(frozen=True)
class Seq2seqSample:
    question_id: str
    input_sequence: str
    target: str


def extract_skeleton(normalized: NormalizedSql | str) -> Skeleton:
    """Collapse a normalized query to its clause-keyword skeleton."""
    text = normalized.text if isinstance(normalized, NormalizedSql) else normalized
    pieces: list[str] = []
    depth = 0
    for tok in tokenize(text):
        kept = False
        if tok.text == "(":
            depth += 1
        elif tok.text == ")":
            depth -= 1
        else:
            kept = depth == 0 and tok.kind == KEYWORD and tok.lower in RETAINED_KEYWORDS
        if kept:
            pieces.append(tok.lower)
        elif not pieces or pieces[-1] != SLOT:
            pieces.append(SLOT)
    return Skeleton(" ".join(pieces))


def build_target(normalized: NormalizedSql) -> str:
    """Concatenate skeleton and normalized SQL with the target delimiter."""
    return extract_skeleton(normalized).text + TARGET_DELIMITER + normalized.text


def split_output(decoded_text: str) -> tuple[str, str]:
    """Split decoded model output at the last delimiter; total on any input."""
    if TARGET_DELIMITER in decoded_text:
        skeleton_text, _, sql_text = decoded_text.rpartition(TARGET_DELIMITER)
        return skeleton_text, sql_text
    return "", decoded_text.strip()


def make_sample(question_id: str, input_sequence: str, query: str) -> Seq2seqSample:
    """Build a training sample: ranked input sequence plus skeleton-aware target."""
    return Seq2seqSample(
        question_id=question_id,
        input_sequence=input_sequence,
        target=build_target(normalize_sql(query)),
    )
