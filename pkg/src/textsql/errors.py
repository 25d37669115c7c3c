"""Exception types shared across the toolkit."""


class TextSqlError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(TextSqlError):
    """Malformed schema document or violated schema invariants.

    ``violations`` collects every failed invariant so callers see the full
    picture in one error instead of fixing them one at a time.
    """

    def __init__(self, message: str, violations: list[str] | None = None):
        if violations:
            message = message + ": " + "; ".join(violations)
        super().__init__(message)
        self.violations = violations or []


class TokenizeError(TextSqlError):
    """Input text cannot be tokenized (illegal character, unterminated literal)."""


class ParseError(TextSqlError):
    """Token stream is outside the supported SQL subset."""


class NormalizeError(TextSqlError):
    """Query cannot be normalized (e.g. a table alias is used but never bound)."""


class LinkageError(TextSqlError):
    """A query references a table or column absent from its schema."""


class CorpusError(TextSqlError):
    """Corpus-level evaluation inputs are broken (bad gold query, missing database)."""
