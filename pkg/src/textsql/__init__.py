"""Deterministic preprocessing, schema ranking, and evaluation toolkit for
text-to-SQL pipelines."""

from .dialect import ClauseTree, Condition, SelectItem, SqlToken, column_refs, parse, tokenize
from .errors import (
    CorpusError,
    LinkageError,
    NormalizeError,
    ParseError,
    SchemaError,
    TextSqlError,
    TokenizeError,
)
from .evaluation import (
    Beam,
    EvalReport,
    InstanceOutcome,
    SelectionOutcome,
    evaluate_corpus,
    exact_set_match,
    execution_accuracy,
    scan_sample_values,
    select_executable,
)
from .kernels import (
    AttentionWeights,
    FocalParams,
    HeadWeights,
    classify_head,
    column_enhance,
    focal_loss,
    multi_head_attention,
    multitask_loss,
    roc_auc,
)
from .linking import (
    LinkLabels,
    RankConfig,
    RankedSchema,
    SchemaScores,
    build_cross_encoder_input,
    build_ranked_input,
    derive_labels,
    ingest_scores,
    labels_as_scores,
    lexical_scores,
    match_cell_values,
    rank_and_filter,
)
from .normalize import NormalizedSql, normalize_sql, unparse
from .schema import (
    Column,
    DatabaseSchema,
    ForeignKey,
    Table,
    dump_schema,
    dump_schemas,
    load_schemas,
    load_schemas_file,
    with_sample_values,
)
from .skeleton import (
    Seq2seqSample,
    Skeleton,
    build_target,
    extract_skeleton,
    make_sample,
    split_output,
)

__version__ = "0.1.0"
