import json

import pytest

from textsql.errors import SchemaError
from textsql.schema import (
    dump_schema,
    load_schemas,
    with_sample_values,
)


def minimal_entry(**overrides):
    entry = {
        "db_id": "tiny",
        "table_names_original": ["t"],
        "table_names": ["t"],
        "column_names_original": [[-1, "*"], [0, "c"]],
        "column_names": [[-1, "*"], [0, "c"]],
        "column_types": ["text", "text"],
        "foreign_keys": [],
        "primary_keys": [],
    }
    entry.update(overrides)
    return entry


def test_minimal_schema_loads():
    schemas = load_schemas([minimal_entry()])
    schema = schemas["tiny"]
    assert schema.table_count == 1
    assert schema.column_count == 1
    assert schema.tables[0].columns[0].original_name == "c"


def test_semantic_names_from_document(schemas):
    airlines = schemas["flights"].tables[0]
    by_original = {c.original_name: c.semantic_name for c in airlines.columns}
    assert by_original["uid"] == "airline id"
    flights_table = schemas["flights"].tables[2]
    dest = {c.original_name: c.semantic_name for c in flights_table.columns}
    assert dest["destairport"] == "destination airport"


def test_star_pseudo_column_skipped(schemas):
    for schema in schemas.values():
        for table in schema.tables:
            assert all(col.original_name != "*" for col in table.columns)


def test_column_count_is_sum_of_tables(schemas):
    for schema in schemas.values():
        assert schema.column_count == sum(len(t.columns) for t in schema.tables)


def test_foreign_keys_remapped_per_table(schemas):
    fk = schemas["music"].foreign_keys[0]
    music = schemas["music"]
    from_col = music.tables[fk.from_table_index].columns[fk.from_column_index]
    to_col = music.tables[fk.to_table_index].columns[fk.to_column_index]
    assert (from_col.original_name, to_col.original_name) == ("f_id", "f_id")
    assert music.tables[fk.from_table_index].original_name == "song"


def test_round_trip(schemas, schema_document):
    dumped = [dump_schema(s) for s in schemas.values()]
    reloaded = load_schemas(json.dumps(dumped))
    assert reloaded == schemas


def test_out_of_range_foreign_key_rejected():
    entry = minimal_entry(foreign_keys=[[1, 99]])
    with pytest.raises(SchemaError, match="foreign key"):
        load_schemas([entry])


def test_duplicate_table_names_rejected():
    entry = minimal_entry(
        table_names_original=["T", "t"],
        table_names=["T", "t"],
        column_names_original=[[-1, "*"], [0, "c"], [1, "c"]],
        column_names=[[-1, "*"], [0, "c"], [1, "c"]],
        column_types=["text", "text", "text"],
    )
    with pytest.raises(SchemaError, match="duplicate table"):
        load_schemas([entry])


def test_reserved_characters_rejected_and_all_violations_listed():
    entry = minimal_entry(
        column_names_original=[[-1, "*"], [0, "a|b"], [0, "c,d"]],
        column_names=[[-1, "*"], [0, "a b"], [0, "c d"]],
        column_types=["text", "text", "text"],
    )
    with pytest.raises(SchemaError) as exc_info:
        load_schemas([entry])
    assert len(exc_info.value.violations) >= 2


def test_empty_table_rejected():
    entry = minimal_entry(
        table_names_original=["t", "u"],
        table_names=["t", "u"],
    )
    with pytest.raises(SchemaError, match="no columns"):
        load_schemas([entry])


def test_malformed_document_names_field():
    with pytest.raises(SchemaError, match="table_names_original"):
        load_schemas([{"db_id": "x"}])
    with pytest.raises(SchemaError, match="db_id"):
        load_schemas([{"table_names_original": []}])


def test_with_sample_values_keeps_original_schema(schemas):
    music = schemas["music"]
    enriched = with_sample_values(music, {"song.genre_is": ["pop", "folk"]})
    genre = next(c for c in enriched.tables[1].columns if c.original_name == "genre_is")
    assert genre.sample_values == ("pop", "folk")
    original_genre = next(c for c in music.tables[1].columns if c.original_name == "genre_is")
    assert original_genre.sample_values == ()
