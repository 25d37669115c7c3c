"""Standalone numeric kernels: column-enhanced attention, classification
heads, focal loss, and ROC AUC.

All routines operate on supplied embeddings and weights in double precision;
nothing here trains anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NORM_EPSILON = 1e-12


def _as_2d(name: str, value, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got {arr.ndim} dimensions")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if rows is not None and arr.shape[0] != rows:
        raise ValueError(f"{name} must have {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise ValueError(f"{name} must have {cols} columns, got {arr.shape[1]}")
    return arr


def _softmax_row(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    exps = np.exp(shifted)
    return exps / exps.sum()


@dataclass(frozen=True)
class AttentionWeights:
    """Per-head query/key/value projections (d x d/h each) plus the d x d output projection."""

    query: tuple[np.ndarray, ...]
    key: tuple[np.ndarray, ...]
    value: tuple[np.ndarray, ...]
    output: np.ndarray

    @property
    def heads(self) -> int:
        return len(self.query)

    @property
    def model_dim(self) -> int:
        return self.output.shape[0]

    def __post_init__(self):
        if not self.query or not (len(self.query) == len(self.key) == len(self.value)):
            raise ValueError("query/key/value projections must list the same number of heads")
        output = _as_2d("output projection", self.output)
        if output.shape[0] != output.shape[1]:
            raise ValueError("output projection must be square")
        d = output.shape[0]
        h = len(self.query)
        if d % h != 0:
            raise ValueError(f"model dimension {d} not divisible by {h} heads")
        head_dim = d // h
        object.__setattr__(self, "output", output)
        for attr in ("query", "key", "value"):
            mats = tuple(
                _as_2d(f"{attr} projection (head {i})", m, rows=d, cols=head_dim)
                for i, m in enumerate(getattr(self, attr))
            )
            object.__setattr__(self, attr, mats)

    @classmethod
    def identity(cls, dim: int) -> "AttentionWeights":
        eye = np.eye(dim)
        return cls(query=(eye,), key=(eye,), value=(eye,), output=np.eye(dim))


@dataclass(frozen=True)
class HeadWeights:
    """Two-layer classification head: (e @ u1 + b1) @ u2 + b2 into two logits."""

    u1: np.ndarray
    b1: np.ndarray
    u2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        u1 = _as_2d("u1", self.u1)
        u2 = _as_2d("u2", self.u2, rows=u1.shape[1], cols=2)
        b1 = np.asarray(self.b1, dtype=np.float64).reshape(-1)
        b2 = np.asarray(self.b2, dtype=np.float64).reshape(-1)
        if b1.shape[0] != u1.shape[1]:
            raise ValueError("b1 length must match u1 width")
        if b2.shape[0] != 2:
            raise ValueError("b2 must have length 2")
        if not (np.all(np.isfinite(b1)) and np.all(np.isfinite(b2))):
            raise ValueError("bias vectors contain non-finite entries")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "b2", b2)


@dataclass(frozen=True)
class FocalParams:
    gamma: float = 2.0
    alpha: float = 0.75

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def multi_head_attention(
    query_emb, keys_values, weights: AttentionWeights
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Scaled dot-product attention with a single query row.

    Returns the projected context row (1 x d) and the per-head attention
    weight rows; each weight row sums to 1.
    """
    d = weights.model_dim
    q = _as_2d("query embedding", query_emb, rows=1, cols=d)
    kv = _as_2d("key/value block", keys_values, cols=d)
    if kv.shape[0] == 0:
        raise ValueError("attention over an empty key set is undefined")
    head_dim = d // weights.heads
    scale = math.sqrt(head_dim)
    contexts = []
    attention_rows = []
    for wq, wk, wv in zip(weights.query, weights.key, weights.value):
        scores = (q @ wq) @ (kv @ wk).T / scale  # 1 x n
        attn = _softmax_row(scores[0]).reshape(1, -1)
        attention_rows.append(attn[0])
        contexts.append(attn @ (kv @ wv))
    concat = np.concatenate(contexts, axis=1)
    return concat @ weights.output, attention_rows


def column_enhance(table_emb, column_block, weights: AttentionWeights) -> np.ndarray:
    """Fuse column information into a table embedding.

    The table row attends over its column rows, the context is added back,
    and the result is L2-normalized (epsilon-guarded at zero).
    """
    d = weights.model_dim
    table = _as_2d("table embedding", table_emb, rows=1, cols=d)
    context, _ = multi_head_attention(table, column_block, weights)
    fused = table + context
    norm = float(np.linalg.norm(fused))
    return fused / max(norm, NORM_EPSILON)


def classify_head(embedding, weights: HeadWeights) -> tuple[float, float]:
    """Two-class softmax head; returns (p0, p1) with p1 the referenced-class probability."""
    emb = _as_2d("embedding", embedding, rows=1, cols=weights.u1.shape[0])
    logits = (emb @ weights.u1 + weights.b1) @ weights.u2 + weights.b2
    probs = _softmax_row(logits[0])
    return float(probs[0]), float(probs[1])


def focal_loss(p1: float, y: int, params: FocalParams) -> float:
    """Class-weighted focal loss for a single binary prediction.

    With p_t the probability assigned to the true class and a_t the class
    weight (alpha for positives, 1-alpha for negatives), the loss is
    -a_t * (1 - p_t)**gamma * ln(p_t).
    """
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y!r}")
    if not 0.0 <= p1 <= 1.0:
        raise ValueError(f"probability {p1!r} outside [0, 1]")
    p_t = p1 if y == 1 else 1.0 - p1
    alpha_t = params.alpha if y == 1 else 1.0 - params.alpha
    if p_t == 0.0:
        raise ValueError("focal loss is unbounded at p_t = 0")
    if p_t == 1.0:
        return 0.0
    return -alpha_t * (1.0 - p_t) ** params.gamma * math.log(p_t)


def multitask_loss(
    table_probs, table_labels, column_probs, column_labels, params: FocalParams
) -> float:
    """Table-average plus column-average focal loss over one schema.

    The column average is taken over the total column count, not per table.
    """
    t_probs = np.asarray(table_probs, dtype=np.float64)
    t_labels = np.asarray(table_labels)
    if t_probs.shape != t_labels.shape or t_probs.ndim != 1 or t_probs.size == 0:
        raise ValueError("table probabilities and labels must be equal-length non-empty vectors")
    if len(column_probs) != t_probs.size or len(column_labels) != t_probs.size:
        raise ValueError("need one column row per table")
    flat_probs: list[float] = []
    flat_labels: list[int] = []
    for i, (row_p, row_y) in enumerate(zip(column_probs, column_labels)):
        if len(row_p) != len(row_y):
            raise ValueError(f"column probabilities and labels disagree for table {i}")
        flat_probs.extend(float(v) for v in row_p)
        flat_labels.extend(int(v) for v in row_y)
    if not flat_probs:
        raise ValueError("schema has no columns")

    def batch(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
        p_t = np.where(labels == 1, probs, 1.0 - probs)
        alpha_t = np.where(labels == 1, params.alpha, 1.0 - params.alpha)
        if np.any(p_t == 0.0):
            raise ValueError("focal loss is unbounded at p_t = 0")
        return np.where(p_t == 1.0, 0.0, -alpha_t * (1.0 - p_t) ** params.gamma * np.log(np.maximum(p_t, 1e-300)))

    table_term = batch(t_probs, t_labels.astype(np.int64)).mean()
    c_probs = np.asarray(flat_probs)
    c_labels = np.asarray(flat_labels)
    column_term = batch(c_probs, c_labels).sum() / c_probs.size
    return float(table_term + column_term)


def roc_auc(labels, scores) -> float:
    """Area under the ROC curve via tie-averaged ranks (Mann-Whitney)."""
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError("labels and scores must be equal-length vectors")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores contain non-finite entries")
    positives = int(np.sum(y == 1))
    negatives = int(np.sum(y == 0))
    if positives == 0 or negatives == 0:
        raise ValueError("AUC is undefined without both a positive and a negative label")
    ranks = _average_ranks(s)
    u_statistic = ranks[y == 1].sum() - positives * (positives + 1) / 2.0
    return float(u_statistic / (positives * negatives))


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0  # 1-based average rank over the tie group
        i = j + 1
    return ranks
