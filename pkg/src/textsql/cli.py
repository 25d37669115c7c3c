"""Command-line surface: streaming JSONL wrappers over the library operations."""

from __future__ import annotations

import argparse
import json
import sys

from . import kernels
from .errors import TextSqlError
from .evaluation import (
    DEFAULT_TIMEOUT_MS,
    Beam,
    database_path,
    evaluate_corpus,
    open_database,
    scan_sample_values,
    select_executable,
)
from .dialect import parse
from .linking import (
    RankConfig,
    build_ranked_input,
    derive_labels,
    ingest_scores,
    lexical_scores,
    match_cell_values,
    rank_and_filter,
)
from .normalize import normalize_sql
from .schema import load_schemas_file, with_sample_values
from .skeleton import build_target, extract_skeleton


def _read_jsonl(path):
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise TextSqlError(f"{path}:{line_no}: invalid JSON ({exc})")


def _dump(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False)


def _fatal(command: str, message: str) -> int:
    sys.stderr.write(_dump({"command": command, "error": message}) + "\n")
    return 2


class _Stream:
    """Per-instance processing loop: errors are recorded, not fatal."""

    def __init__(self, out_path):
        self.out = open(out_path, "w", encoding="utf-8")
        self.errors = 0

    def emit(self, record: dict) -> None:
        self.out.write(_dump(record) + "\n")

    def emit_error(self, question_id, message: str) -> None:
        self.errors += 1
        self.emit({"question_id": question_id, "error": message})

    def close(self) -> None:
        self.out.close()

    def exit_code(self, strict: bool) -> int:
        return 1 if strict and self.errors else 0


def _instance_loop(args, handler) -> int:
    stream = _Stream(args.output)
    try:
        for instance in _read_jsonl(args.dataset):
            qid = instance.get("question_id")
            try:
                stream.emit(handler(instance))
            except TextSqlError as exc:
                stream.emit_error(qid, str(exc))
    finally:
        stream.close()
    return stream.exit_code(args.strict)


# --- commands -----------------------------------------------------------------

def cmd_normalize(args) -> int:
    def handler(instance):
        normalized = normalize_sql(instance["query"])
        return {"question_id": instance["question_id"], "normalized": normalized.text}

    return _instance_loop(args, handler)


def cmd_skeleton(args) -> int:
    def handler(instance):
        normalized = normalize_sql(instance["query"])
        return {
            "question_id": instance["question_id"],
            "skeleton": extract_skeleton(normalized).text,
            "target": build_target(normalized),
        }

    return _instance_loop(args, handler)


def cmd_label(args) -> int:
    schemas = load_schemas_file(args.schemas)

    def handler(instance):
        schema = schemas.get(instance["db_id"])
        if schema is None:
            raise TextSqlError(f"db_id {instance['db_id']!r} not in schema document")
        labels = derive_labels(parse(instance["query"]), schema)
        return {
            "question_id": instance["question_id"],
            "table_labels": list(labels.table_labels),
            "column_labels": [list(row) for row in labels.column_labels],
        }

    return _instance_loop(args, handler)


def _enriched_schemas(args, schemas):
    if not getattr(args, "db_dir", None):
        return schemas
    enriched = {}
    for db_id, schema in schemas.items():
        path = database_path(args.db_dir, db_id)
        if path.exists():
            values = scan_sample_values(path, schema, max_per_column=args.max_cells)
            enriched[db_id] = with_sample_values(schema, values)
        else:
            enriched[db_id] = schema
    return enriched


def cmd_score(args) -> int:
    schemas = _enriched_schemas(args, load_schemas_file(args.schemas))

    def handler(instance):
        schema = schemas.get(instance["db_id"])
        if schema is None:
            raise TextSqlError(f"db_id {instance['db_id']!r} not in schema document")
        scores = lexical_scores(instance["question"], schema)
        return {
            "question_id": instance["question_id"],
            "table_probs": list(scores.table_probs),
            "column_probs": [list(row) for row in scores.column_probs],
        }

    return _instance_loop(args, handler)


def _load_score_map(path):
    return {record["question_id"]: record for record in _read_jsonl(path)}


def cmd_rank(args) -> int:
    schemas = load_schemas_file(args.schemas)
    score_map = _load_score_map(args.scores) if args.scores else None
    config = RankConfig(k1=args.k1, k2=args.k2)

    def handler(instance):
        schema = schemas.get(instance["db_id"])
        if schema is None:
            raise TextSqlError(f"db_id {instance['db_id']!r} not in schema document")
        scores = _scores_for(instance, schema, score_map)
        ranked = rank_and_filter(scores, schema, config)
        return {
            "question_id": instance["question_id"],
            "tables": [
                {
                    "name": entry.table.original_name.lower(),
                    "prob": entry.table_prob,
                    "columns": [
                        [col.original_name.lower(), prob]
                        for col, prob in zip(entry.kept_columns, entry.column_probs)
                    ],
                }
                for entry in ranked.entries
            ],
        }

    return _instance_loop(args, handler)


def _scores_for(instance, schema, score_map):
    if score_map is None:
        return lexical_scores(instance.get("question", ""), schema)
    record = score_map.get(instance["question_id"])
    if record is None:
        raise TextSqlError(f"no scores for question_id {instance['question_id']!r}")
    try:
        return ingest_scores(record, schema)
    except ValueError as exc:
        raise TextSqlError(str(exc))


def cmd_prepare(args) -> int:
    schemas = _enriched_schemas(args, load_schemas_file(args.schemas))
    score_map = _load_score_map(args.scores) if args.scores else None
    config = RankConfig(
        k1=args.k1,
        k2=args.k2,
        include_foreign_keys=args.fks,
        include_content=args.content,
    )

    def handler(instance):
        schema = schemas.get(instance["db_id"])
        if schema is None:
            raise TextSqlError(f"db_id {instance['db_id']!r} not in schema document")
        question = instance.get("question", "")
        scores = _scores_for(instance, schema, score_map)
        ranked = rank_and_filter(scores, schema, config)
        if config.include_content:
            ranked.matched_values = match_cell_values(question, schema)
        record = {
            "question_id": instance["question_id"],
            "input_sequence": build_ranked_input(question, ranked, schema, config),
        }
        if instance.get("query"):
            record["target"] = build_target(normalize_sql(instance["query"]))
        return record

    return _instance_loop(args, handler)


def cmd_select(args) -> int:
    db_by_qid = {}
    if args.dataset:
        db_by_qid = {r["question_id"]: r["db_id"] for r in _read_jsonl(args.dataset)}
    stream = _Stream(args.output)
    try:
        for record in _read_jsonl(args.beams):
            qid = record.get("question_id")
            try:
                beam = Beam(
                    question_id=qid,
                    candidates=tuple(
                        (c["sql"], float(c.get("score", 0.0))) for c in record["candidates"]
                    ),
                )
                db_id = record.get("db_id") or db_by_qid.get(qid)
                if db_id is None:
                    raise TextSqlError("beam record has no 'db_id' and no --dataset was given")
                conn = open_database(database_path(args.db_dir, db_id))
                try:
                    outcome = select_executable(beam, conn, args.timeout_ms)
                finally:
                    conn.close()
                stream.emit(
                    {
                        "question_id": qid,
                        "sql": outcome.sql,
                        "beam_index": outcome.index,
                        "executable": outcome.executable,
                    }
                )
            except (TextSqlError, KeyError, ValueError) as exc:
                stream.emit_error(qid, str(exc))
    finally:
        stream.close()
    return stream.exit_code(args.strict)


def cmd_eval(args) -> int:
    dataset = list(_read_jsonl(args.dataset))
    schemas = load_schemas_file(args.schemas) if args.schemas else None
    predictions = beams = None
    if args.pred:
        predictions = {r["question_id"]: r["sql"] for r in _read_jsonl(args.pred)}
    else:
        beams = {}
        for record in _read_jsonl(args.beams):
            beams[record["question_id"]] = Beam(
                question_id=record["question_id"],
                candidates=tuple(
                    (c["sql"], float(c.get("score", 0.0))) for c in record["candidates"]
                ),
            )
    report = evaluate_corpus(
        dataset,
        predictions=predictions,
        beams=beams,
        schemas=schemas,
        db_dir=args.db_dir,
        timeout_ms=args.timeout_ms,
        workers=args.workers,
    )
    with open(args.report, "w", encoding="utf-8") as handle:
        json.dump(report.to_dict(), handle, ensure_ascii=False, indent=2)
        handle.write("\n")
    if args.fig_dir:
        from .report import render_report_figures

        render_report_figures(report, args.fig_dir)
    failed = sum(1 for r in report.instances if r.error)
    return 1 if args.strict and failed else 0


def cmd_kernels(args) -> int:
    if args.action != "selfcheck":
        return _fatal("kernels", f"unknown action {args.action!r}")
    return 0 if _kernels_selfcheck() else 1


def _kernels_selfcheck() -> bool:
    import numpy as np

    rng = np.random.default_rng(20240817)
    ok = True

    def check(name: str, passed: bool) -> None:
        nonlocal ok
        ok = ok and passed
        print(f"{'PASS' if passed else 'FAIL'} {name}")

    params = kernels.FocalParams()
    import math

    expected = 0.75 * 0.25 * math.log(2.0)
    check("focal_loss closed form", abs(kernels.focal_loss(0.5, 1, params) - expected) < 1e-12)

    good = True
    for _ in range(200):
        n_tables = int(rng.integers(1, 6))
        sizes = [int(rng.integers(1, 7)) for _ in range(n_tables)]
        tp = rng.uniform(0.01, 0.99, n_tables)
        tl = rng.integers(0, 2, n_tables)
        cp = [rng.uniform(0.01, 0.99, s).tolist() for s in sizes]
        cl = [rng.integers(0, 2, s).tolist() for s in sizes]
        fast = kernels.multitask_loss(tp, tl, cp, cl, params)
        slow = sum(kernels.focal_loss(p, int(y), params) for p, y in zip(tp, tl)) / n_tables
        total = sum(sizes)
        slow += sum(
            kernels.focal_loss(p, int(y), params)
            for row_p, row_y in zip(cp, cl)
            for p, y in zip(row_p, row_y)
        ) / total
        good = good and abs(fast - slow) < 1e-12
    check("multitask_loss vs brute force", good)

    good = True
    for _ in range(200):
        size = int(rng.integers(4, 40))
        labels = rng.integers(0, 2, size)
        if labels.sum() in (0, size):
            labels[0], labels[-1] = 0, 1
        scores = np.round(rng.uniform(0, 1, size), 2)
        auc = kernels.roc_auc(labels, scores)
        pairs = concordant = 0.0
        for i in range(size):
            for j in range(size):
                if labels[i] == 1 and labels[j] == 0:
                    pairs += 1
                    if scores[i] > scores[j]:
                        concordant += 1
                    elif scores[i] == scores[j]:
                        concordant += 0.5
        good = good and abs(auc - concordant / pairs) < 1e-12
    check("roc_auc vs pair counting", good)

    good = True
    for _ in range(50):
        d, h = 8, 4
        weights = kernels.AttentionWeights(
            query=tuple(rng.standard_normal((d, d // h)) for _ in range(h)),
            key=tuple(rng.standard_normal((d, d // h)) for _ in range(h)),
            value=tuple(rng.standard_normal((d, d // h)) for _ in range(h)),
            output=rng.standard_normal((d, d)),
        )
        out = kernels.column_enhance(rng.standard_normal(d), rng.standard_normal((5, d)), weights)
        good = good and abs(np.linalg.norm(out) - 1.0) < 1e-9
    check("column_enhance unit norm", good)

    return ok


# --- argument parsing -----------------------------------------------------------

def _add_io(parser, dataset_help: str) -> None:
    parser.add_argument("--dataset", required=True, help=dataset_help)
    parser.add_argument("--output", required=True, help="output JSONL path")
    parser.add_argument("--strict", action="store_true", help="nonzero exit if any instance fails")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textsql",
        description="Deterministic preprocessing and evaluation for text-to-SQL pipelines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="normalize queries")
    _add_io(p, "JSONL of {question_id, query}")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("skeleton", help="extract skeletons and decoding targets")
    _add_io(p, "JSONL of {question_id, query}")
    p.set_defaults(func=cmd_skeleton)

    p = sub.add_parser("label", help="derive gold schema-item labels from queries")
    p.add_argument("--schemas", required=True, help="schema document (tables JSON)")
    _add_io(p, "JSONL of {question_id, db_id, query}")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("score", help="score schema items against questions (lexical stand-in)")
    p.add_argument("--schemas", required=True)
    p.add_argument("--db-dir", default=None, help="database directory for sample-value scans")
    p.add_argument("--max-cells", type=int, default=500, help="sample values kept per column")
    _add_io(p, "JSONL of {question_id, db_id, question}")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("rank", help="rank and filter schema items to top-k1/k2")
    p.add_argument("--schemas", required=True)
    p.add_argument("--scores", default=None, help="JSONL of external scores; lexical scorer if omitted")
    p.add_argument("--k1", type=int, default=4)
    p.add_argument("--k2", type=int, default=5)
    _add_io(p, "JSONL of {question_id, db_id, question}")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("prepare", help="build ranked input sequences and decoding targets")
    p.add_argument("--schemas", required=True)
    p.add_argument("--scores", default=None, help="JSONL of external scores; lexical scorer if omitted")
    p.add_argument("--db-dir", default=None, help="database directory for content enrichment")
    p.add_argument("--max-cells", type=int, default=500)
    p.add_argument("--k1", type=int, default=4)
    p.add_argument("--k2", type=int, default=5)
    p.add_argument("--fks", action="store_true", help="append foreign key relations")
    p.add_argument("--content", action="store_true", help="append matched cell values")
    _add_io(p, "JSONL of {question_id, db_id, question[, query]}")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("select", help="execution-guided selection over beams")
    p.add_argument("--beams", required=True, help="JSONL of {question_id, candidates[, db_id]}")
    p.add_argument("--dataset", default=None, help="JSONL used to resolve db_id per question_id")
    p.add_argument("--db-dir", required=True)
    p.add_argument("--timeout-ms", type=int, default=DEFAULT_TIMEOUT_MS)
    p.add_argument("--output", required=True)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="evaluate EM/EX over a corpus")
    p.add_argument("--dataset", required=True, help="JSONL of {question_id, db_id, question, query}")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pred", help="JSONL of {question_id, sql}")
    group.add_argument("--beams", help="JSONL of {question_id, candidates}")
    p.add_argument("--schemas", default=None)
    p.add_argument("--db-dir", required=True)
    p.add_argument("--report", required=True, help="output report JSON path")
    p.add_argument("--fig-dir", default=None, help="directory for rendered report figures")
    p.add_argument("--timeout-ms", type=int, default=DEFAULT_TIMEOUT_MS)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("kernels", help="numeric kernel self checks")
    p.add_argument("action", choices=["selfcheck"])
    p.set_defaults(func=cmd_kernels)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TextSqlError as exc:
        return _fatal(args.command, str(exc))
    except OSError as exc:
        return _fatal(args.command, str(exc))


if __name__ == "__main__":
    sys.exit(main())
