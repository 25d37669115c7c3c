import json
import sqlite3
from pathlib import Path

import pytest

from textsql.schema import load_schemas

DATA_DIR = Path(__file__).parent / "data"

_SQLITE_TYPES = {"number": "NUMERIC", "text": "TEXT", "time": "TEXT", "boolean": "INTEGER", "other": "TEXT"}


@pytest.fixture(scope="session")
def schema_document():
    return json.loads((DATA_DIR / "tables.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def schemas(schema_document):
    return load_schemas(schema_document)


@pytest.fixture(scope="session")
def corpus():
    lines = (DATA_DIR / "corpus.jsonl").read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line.strip()]


def build_databases(root: Path, schemas) -> Path:
    rows = json.loads((DATA_DIR / "database_rows.json").read_text(encoding="utf-8"))
    for db_id, schema in schemas.items():
        db_folder = root / db_id
        db_folder.mkdir(parents=True, exist_ok=True)
        conn = sqlite3.connect(db_folder / f"{db_id}.sqlite")
        for table in schema.tables:
            columns = ", ".join(
                f'"{col.original_name}" {_SQLITE_TYPES[col.type_tag]}' for col in table.columns
            )
            conn.execute(f'CREATE TABLE "{table.original_name}" ({columns})')
            table_rows = rows.get(db_id, {}).get(table.original_name, [])
            if table_rows:
                placeholders = ", ".join("?" * len(table.columns))
                conn.executemany(
                    f'INSERT INTO "{table.original_name}" VALUES ({placeholders})', table_rows
                )
        conn.commit()
        conn.close()
    return root


@pytest.fixture(scope="session")
def db_dir(tmp_path_factory, schemas):
    return build_databases(tmp_path_factory.mktemp("databases"), schemas)
