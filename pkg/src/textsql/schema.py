"""Database schema model and ingestion of the benchmark schema document."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .errors import SchemaError

# `|`, `:` and `,` delimit the serialized schema sequences, so identifiers
# may not contain them.
RESERVED_NAME_CHARS = ("|", ":", ",")

TYPE_TAGS = ("text", "number", "time", "boolean", "other")


@dataclass(frozen=True)
class Column:
    original_name: str
    semantic_name: str
    type_tag: str = "other"
    sample_values: tuple[str, ...] = ()


@dataclass(frozen=True)
class Table:
    original_name: str
    semantic_name: str
    columns: tuple[Column, ...]


@dataclass(frozen=True)
class ForeignKey:
    """Directed reference between two columns, indexed per table."""

    from_table_index: int
    from_column_index: int
    to_table_index: int
    to_column_index: int


@dataclass(frozen=True)
class DatabaseSchema:
    db_id: str
    tables: tuple[Table, ...]
    foreign_keys: tuple[ForeignKey, ...] = ()
    primary_keys: tuple[int, ...] = ()  # flat column indices; retained, unused

    @property
    def table_count(self) -> int:
        return len(self.tables)

    @property
    def column_count(self) -> int:
        return sum(len(t.columns) for t in self.tables)

    def table_index(self, name: str) -> int | None:
        lowered = name.lower()
        for i, table in enumerate(self.tables):
            if table.original_name.lower() == lowered:
                return i
        return None

    def column_index(self, table_idx: int, name: str) -> int | None:
        lowered = name.lower()
        for k, col in enumerate(self.tables[table_idx].columns):
            if col.original_name.lower() == lowered:
                return k
        return None


def _normalize_type_tag(raw: str) -> str:
    tag = str(raw).strip().lower()
    if tag in TYPE_TAGS:
        return tag
    if tag == "others":
        return "other"
    return "other"


def _check_name(name: str, what: str, violations: list[str]) -> None:
    if not name:
        violations.append(f"{what} has empty original name")
        return
    for ch in RESERVED_NAME_CHARS:
        if ch in name:
            violations.append(f"{what} original name {name!r} contains reserved character {ch!r}")


def validate_schema(schema: DatabaseSchema) -> list[str]:
    """Return every invariant violation in ``schema`` (empty list when valid)."""
    violations: list[str] = []
    if not schema.tables:
        violations.append(f"database {schema.db_id!r} has no tables")
    seen_tables: set[str] = set()
    for table in schema.tables:
        _check_name(table.original_name, f"table {table.original_name!r}", violations)
        if not table.semantic_name:
            violations.append(f"table {table.original_name!r} has empty semantic name")
        lowered = table.original_name.lower()
        if lowered in seen_tables:
            violations.append(f"duplicate table name {lowered!r}")
        seen_tables.add(lowered)
        if not table.columns:
            violations.append(f"table {table.original_name!r} has no columns")
        seen_cols: set[str] = set()
        for col in table.columns:
            what = f"column {table.original_name!r}.{col.original_name!r}"
            _check_name(col.original_name, what, violations)
            if not col.semantic_name:
                violations.append(f"{what} has empty semantic name")
            if col.type_tag not in TYPE_TAGS:
                violations.append(f"{what} has unknown type tag {col.type_tag!r}")
            col_lower = col.original_name.lower()
            if col_lower in seen_cols:
                violations.append(f"duplicate column name {col_lower!r} in table {table.original_name!r}")
            seen_cols.add(col_lower)
    for fk in schema.foreign_keys:
        for side, (ti, ci) in (
            ("from", (fk.from_table_index, fk.from_column_index)),
            ("to", (fk.to_table_index, fk.to_column_index)),
        ):
            if not 0 <= ti < len(schema.tables):
                violations.append(f"foreign key {side}-table index {ti} out of range in {schema.db_id!r}")
            elif not 0 <= ci < len(schema.tables[ti].columns):
                violations.append(
                    f"foreign key {side}-column index {ci} out of range for table "
                    f"{schema.tables[ti].original_name!r}"
                )
    return violations


def _load_one(entry: dict) -> DatabaseSchema:
    db_id = entry.get("db_id")
    if not isinstance(db_id, str) or not db_id:
        raise SchemaError("schema entry missing 'db_id'")

    def need(key: str) -> list:
        value = entry.get(key)
        if not isinstance(value, list):
            raise SchemaError(f"database {db_id!r}: field {key!r} missing or not an array")
        return value

    table_names_original = need("table_names_original")
    table_names = need("table_names")
    column_names_original = need("column_names_original")
    column_names = need("column_names")
    column_types = need("column_types")
    foreign_keys = entry.get("foreign_keys", [])
    primary_keys = entry.get("primary_keys", [])

    if len(table_names_original) != len(table_names):
        raise SchemaError(f"database {db_id!r}: table name arrays are not aligned")
    if not (len(column_names_original) == len(column_names) == len(column_types)):
        raise SchemaError(f"database {db_id!r}: column arrays are not aligned")

    # Walk the flat column list; the star pseudo-column (table index -1) is
    # skipped, and flat indices are remapped to (table, column) pairs.
    per_table_cols: list[list[Column]] = [[] for _ in table_names_original]
    flat_to_pair: dict[int, tuple[int, int]] = {}
    for flat_idx, pair in enumerate(column_names_original):
        try:
            t_idx, orig_name = pair
        except (TypeError, ValueError):
            raise SchemaError(f"database {db_id!r}: column entry {flat_idx} is not a [table_index, name] pair")
        if t_idx == -1:
            continue
        if not 0 <= t_idx < len(table_names_original):
            raise SchemaError(f"database {db_id!r}: column {orig_name!r} has table index {t_idx} out of range")
        semantic = column_names[flat_idx][1]
        col = Column(
            original_name=str(orig_name),
            semantic_name=str(semantic),
            type_tag=_normalize_type_tag(column_types[flat_idx]),
        )
        flat_to_pair[flat_idx] = (t_idx, len(per_table_cols[t_idx]))
        per_table_cols[t_idx].append(col)

    tables = tuple(
        Table(
            original_name=str(table_names_original[i]),
            semantic_name=str(table_names[i]),
            columns=tuple(per_table_cols[i]),
        )
        for i in range(len(table_names_original))
    )

    fks = []
    fk_violations = []
    for pair in foreign_keys:
        try:
            from_flat, to_flat = pair
        except (TypeError, ValueError):
            raise SchemaError(f"database {db_id!r}: foreign key entry {pair!r} is not an index pair")
        if from_flat not in flat_to_pair or to_flat not in flat_to_pair:
            fk_violations.append(f"foreign key {pair!r} references a column index outside the column list")
            continue
        ft, fc = flat_to_pair[from_flat]
        tt, tc = flat_to_pair[to_flat]
        fks.append(ForeignKey(ft, fc, tt, tc))

    schema = DatabaseSchema(
        db_id=db_id,
        tables=tables,
        foreign_keys=tuple(fks),
        primary_keys=tuple(int(i) for i in primary_keys),
    )
    violations = fk_violations + validate_schema(schema)
    if violations:
        raise SchemaError(f"database {db_id!r} is invalid", violations)
    return schema


def load_schemas(document) -> dict[str, DatabaseSchema]:
    """Load a schema document (JSON text or parsed array) into schemas keyed by db_id."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"schema document is not valid JSON: {exc}")
    if not isinstance(document, list):
        raise SchemaError("schema document must be a JSON array of database entries")
    schemas: dict[str, DatabaseSchema] = {}
    for entry in document:
        if not isinstance(entry, dict):
            raise SchemaError("schema document entries must be objects")
        schema = _load_one(entry)
        if schema.db_id in schemas:
            raise SchemaError(f"duplicate db_id {schema.db_id!r} in schema document")
        schemas[schema.db_id] = schema
    return schemas


def load_schemas_file(path) -> dict[str, DatabaseSchema]:
    with open(path, encoding="utf-8") as handle:
        return load_schemas(handle.read())


def dump_schema(schema: DatabaseSchema) -> dict:
    """Serialize back to the document layout (inverse of loading, star re-inserted)."""
    column_names_original: list = [[-1, "*"]]
    column_names: list = [[-1, "*"]]
    column_types: list[str] = ["text"]
    pair_to_flat: dict[tuple[int, int], int] = {}
    for t_idx, table in enumerate(schema.tables):
        for c_idx, col in enumerate(table.columns):
            pair_to_flat[(t_idx, c_idx)] = len(column_names_original)
            column_names_original.append([t_idx, col.original_name])
            column_names.append([t_idx, col.semantic_name])
            column_types.append(col.type_tag)
    return {
        "db_id": schema.db_id,
        "table_names_original": [t.original_name for t in schema.tables],
        "table_names": [t.semantic_name for t in schema.tables],
        "column_names_original": column_names_original,
        "column_names": column_names,
        "column_types": column_types,
        "foreign_keys": [
            [
                pair_to_flat[(fk.from_table_index, fk.from_column_index)],
                pair_to_flat[(fk.to_table_index, fk.to_column_index)],
            ]
            for fk in schema.foreign_keys
        ],
        "primary_keys": list(schema.primary_keys),
    }


def dump_schemas(schemas: dict[str, DatabaseSchema]) -> list[dict]:
    return [dump_schema(s) for s in schemas.values()]


def with_sample_values(schema: DatabaseSchema, values: dict[str, list[str]]) -> DatabaseSchema:
    """Return a copy of ``schema`` with sample cell values attached.

    ``values`` maps lowercase ``table.column`` to the cell strings gathered by
    a database scan; schemas themselves stay immutable.
    """
    new_tables = []
    for table in schema.tables:
        t_lower = table.original_name.lower()
        new_cols = tuple(
            replace(col, sample_values=tuple(values.get(f"{t_lower}.{col.original_name.lower()}", ())))
            for col in table.columns
        )
        new_tables.append(replace(table, columns=new_cols))
    return replace(schema, tables=tuple(new_tables))
