"""Hashtag relation graphs: direct co-occurrence and multi-hop closure.

The direct graph counts, for every unordered hashtag pair, the number of
posts whose hashtag set contains both.  Dividing by the maximum row sum
yields the normalized relation matrix ``N``; summing its powers
``N + N**2 + ... + N**k1`` adds indirect (multi-hop) relations.  The
infinite series has the closed form ``N (I - N)^{-1}`` but only
converges when the spectral radius of ``N`` is strictly below one, so
the truncated sum is the production path and the exact form is a
guarded oracle.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus

logger = logging.getLogger(__name__)

NORMALIZED_DIRECT = "normalized_direct"
ALL_RELATIONS_TRUNCATED = "all_relations_truncated"
ALL_RELATIONS_EXACT = "all_relations_exact"

MATRIX_FORMAT_HEADER = "# newstag-matrix v1"


class GraphError(ValueError):
    """Raised for graph construction or normalization failures."""


class SeriesDivergentError(GraphError):
    """Raised when the closure series cannot converge (spectral radius ~ 1)."""


@dataclass(frozen=True)
class HashtagGraph:
    """Interned vocabulary plus sparse symmetric co-occurrence counts.

    Only the strict upper triangle is stored; :meth:`full` mirrors it.
    Weights are positive integers (post co-occurrence counts), and the
    diagonal is zero: a hashtag has no relation with itself.
    """

    vocab: tuple[str, ...]
    upper: sp.csr_matrix  # strict upper triangle, int64

    @property
    def q(self) -> int:
        return len(self.vocab)

    @property
    def n_edges(self) -> int:
        return self.upper.nnz

    def full(self) -> sp.csr_matrix:
        """Symmetric adjacency with both triangles materialized."""
        return (self.upper + self.upper.T).tocsr()


@dataclass(frozen=True)
class RelationMatrix:
    """Sparse symmetric nonnegative relation matrix over a hashtag vocab."""

    kind: str
    values: sp.csr_matrix  # full symmetric, float64
    vocab: tuple[str, ...]
    k1: int | None = None

    @property
    def q(self) -> int:
        return len(self.vocab)


def build_direct_graph(corpus: Corpus, weighted: bool = True) -> HashtagGraph:
    """Count per-post hashtag co-occurrences over all news (transductive).

    Weighted mode counts one unit per post containing both hashtags;
    unweighted mode keeps only the 0/1 indicator.  Vocabulary indices
    follow first appearance in the corpus stream, so construction is
    deterministic.  A corpus with no multi-hashtag post yields an
    edgeless graph.
    """
    if not corpus.news:
        raise GraphError("cannot build a graph from an empty corpus")
    index = corpus.vocab_index
    q = len(corpus.vocabulary)
    counts: dict[tuple[int, int], int] = {}
    for item in corpus.news:
        for post in item.posts:
            ids = sorted({index[h] for h in post.hashtags})
            for a in range(len(ids)):
                for b in range(a + 1, len(ids)):
                    key = (ids[a], ids[b])
                    counts[key] = counts.get(key, 0) + 1
    if counts:
        keys = sorted(counts)
        rows = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
        cols = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
        data = np.fromiter((counts[k] for k in keys), dtype=np.int64, count=len(keys))
        if not weighted:
            data = np.ones_like(data)
        upper = sp.csr_matrix((data, (rows, cols)), shape=(q, q))
    else:
        upper = sp.csr_matrix((q, q), dtype=np.int64)
    return HashtagGraph(vocab=corpus.vocabulary, upper=upper)


def normalize(graph: HashtagGraph) -> RelationMatrix:
    """Divide the co-occurrence matrix by its maximum row sum.

    The result has maximum row sum exactly 1 and is invariant under any
    positive scaling of the counts (each entry is the IEEE rounding of
    the same exact ratio of integers).
    """
    W = graph.full()
    if W.nnz == 0:
        raise GraphError("cannot normalize edgeless graph")
    row_sums = np.asarray(W.sum(axis=1)).ravel()
    max_row = int(row_sums.max())
    N = W.astype(np.float64)
    N.data = N.data / float(max_row)
    return RelationMatrix(kind=NORMALIZED_DIRECT, values=N, vocab=graph.vocab)


def _frobenius(M: sp.spmatrix) -> float:
    return float(np.sqrt(np.sum(M.data * M.data))) if M.nnz else 0.0


def all_relations_truncated_with_trace(
    N: RelationMatrix,
    k1: int,
    drop_tolerance: float = 0.0,
    rel_tol: float | None = None,
) -> tuple[RelationMatrix, list[float]]:
    """Partial power sum N + N^2 + ... + N^k1 plus its accumulation trace.

    The trace holds, for each accumulated term, the Frobenius norm of
    the term relative to the accumulated sum; it is 1.0 for the first
    term and decays geometrically whenever the series converges.  With
    ``rel_tol`` set, accumulation stops early once the relative change
    drops below it (k1 then acts as a cap).  Entries smaller than
    ``drop_tolerance`` in magnitude are pruned after each accumulation;
    the default 0 keeps everything.
    """
    if N.kind != NORMALIZED_DIRECT:
        raise GraphError(f"closure expects a normalized_direct matrix, got {N.kind!r}")
    if k1 < 1:
        raise GraphError(f"k1 must be >= 1, got {k1}")
    if drop_tolerance < 0:
        raise GraphError("drop_tolerance must be >= 0")

    base = N.values
    power = base.copy()
    total = base.copy()
    trace: list[float] = [1.0 if total.nnz else 0.0]
    for _ in range(2, k1 + 1):
        if rel_tol is not None and trace[-1] < rel_tol:
            break
        power = (power @ base).tocsr()
        total = (total + power).tocsr()
        if drop_tolerance > 0.0:
            total.data[np.abs(total.data) < drop_tolerance] = 0.0
            total.eliminate_zeros()
        denom = _frobenius(total)
        trace.append(_frobenius(power) / denom if denom else 0.0)
    # k1 records the number of terms actually accumulated (rel_tol may
    # have stopped the loop before the cap)
    return (
        RelationMatrix(kind=ALL_RELATIONS_TRUNCATED, values=total, vocab=N.vocab, k1=len(trace)),
        trace,
    )


def all_relations_truncated(
    N: RelationMatrix,
    k1: int,
    drop_tolerance: float = 0.0,
    rel_tol: float | None = None,
) -> RelationMatrix:
    """Partial power sum N + N^2 + ... + N^k1 (see the trace variant)."""
    matrix, _ = all_relations_truncated_with_trace(N, k1, drop_tolerance, rel_tol)
    return matrix


def estimate_spectral_radius(M: sp.spmatrix, max_iter: int = 500, rtol: float = 1e-12) -> float:
    """Power-iteration estimate of the spectral radius of a symmetric matrix.

    Uses norm growth of M @ v, which for symmetric M converges to the
    largest eigenvalue magnitude from below.  The start vector is a
    slightly tilted all-ones vector: for nonnegative matrices it always
    overlaps the dominant (Perron) eigenvector.
    """
    q = M.shape[0]
    if q == 0 or M.nnz == 0:
        return 0.0
    v = np.ones(q) + np.arange(q) / (10.0 * q)
    v /= np.linalg.norm(v)
    ratio = 0.0
    for _ in range(max_iter):
        w = M @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        prev, ratio = ratio, norm
        v = w / norm
        if abs(ratio - prev) <= rtol * max(ratio, 1e-30):
            break
    return ratio


def all_relations_exact(N: RelationMatrix, dense_cap: int = 2000) -> RelationMatrix:
    """Exact series limit N (I - N)^{-1}, refused for divergent inputs.

    The spectral radius of N is estimated by power iteration; anything
    not safely below 1 raises :class:`SeriesDivergentError` (this can
    genuinely happen, e.g. for weight-regular components where every row
    sum equals the maximum).  Instances with q <= ``dense_cap`` use one
    dense multi-column solve; larger ones are factorized sparsely and
    solved column by column.  A residual check guards against a
    misleading radius estimate.
    """
    if N.kind != NORMALIZED_DIRECT:
        raise GraphError(f"exact closure expects a normalized_direct matrix, got {N.kind!r}")
    q = N.q
    radius = estimate_spectral_radius(N.values)
    if radius > 1.0 - 1e-6:
        raise SeriesDivergentError(
            f"series divergent: spectral radius estimate {radius:.9f} is not below 1"
        )
    if q <= dense_cap:
        dense_n = N.values.toarray()
        solved = np.linalg.solve(np.eye(q) - dense_n, dense_n)
        solved = (solved + solved.T) / 2.0
        residual = float(np.max(np.abs((np.eye(q) - dense_n) @ solved - dense_n)))
        result = sp.csr_matrix(solved)
    else:
        from scipy.sparse.linalg import splu

        lu = splu((sp.identity(q, format="csc") - N.values.tocsc()).tocsc())
        cols = np.empty((q, q))
        for j in range(q):
            rhs = np.asarray(N.values.getcol(j).todense()).ravel()
            cols[:, j] = lu.solve(rhs)
        solved = (cols + cols.T) / 2.0
        residual = float(
            np.max(np.abs((solved - N.values @ solved) - N.values.toarray()))
        )
        result = sp.csr_matrix(solved)
    if not np.isfinite(residual) or residual > 1e-6:
        raise GraphError(f"exact closure solve failed (residual {residual:.3e})")
    result.eliminate_zeros()
    return RelationMatrix(kind=ALL_RELATIONS_EXACT, values=result, vocab=N.vocab)


# ---------------------------------------------------------------------------
# Persistence and export
# ---------------------------------------------------------------------------

def save_matrix(matrix: RelationMatrix, path: str | Path) -> None:
    """Write a relation matrix in the triplet text cache format.

    Layout: a versioned comment header carrying kind, k1, q and the
    vocabulary (JSON-encoded), followed by one ``row<TAB>col<TAB>value``
    line per stored entry of the upper triangle (row <= col, row-major).
    Values use shortest round-trip float formatting, so save/load is
    bit-exact and byte-deterministic.
    """
    upper = sp.triu(matrix.values, k=0).tocoo()
    order = np.lexsort((upper.col, upper.row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{MATRIX_FORMAT_HEADER}\n")
        fh.write(f"# kind: {matrix.kind}\n")
        if matrix.k1 is not None:
            fh.write(f"# k1: {matrix.k1}\n")
        fh.write(f"# q: {matrix.q}\n")
        fh.write(f"# vocab: {json.dumps(list(matrix.vocab), ensure_ascii=True)}\n")
        for i in order:
            fh.write(f"{upper.row[i]}\t{upper.col[i]}\t{float(upper.data[i])!r}\n")


def load_matrix(path: str | Path) -> RelationMatrix:
    """Read a relation matrix written by :func:`save_matrix`."""
    kind = None
    k1 = None
    q = None
    vocab: tuple[str, ...] | None = None
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != MATRIX_FORMAT_HEADER:
            raise GraphError(f"{path}: not a newstag matrix file")
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                if key == "kind":
                    kind = value
                elif key == "k1":
                    k1 = int(value)
                elif key == "q":
                    q = int(value)
                elif key == "vocab":
                    vocab = tuple(json.loads(value))
                continue
            r_s, c_s, v_s = line.split("\t")
            rows.append(int(r_s))
            cols.append(int(c_s))
            vals.append(float(v_s))
    if kind is None or q is None or vocab is None:
        raise GraphError(f"{path}: missing matrix header fields")
    if len(vocab) != q:
        raise GraphError(f"{path}: vocab length {len(vocab)} does not match q={q}")
    upper = sp.coo_matrix((vals, (rows, cols)), shape=(q, q)).tocsr()
    strict = sp.triu(upper, k=1)
    full = (upper + strict.T).tocsr()
    return RelationMatrix(kind=kind, values=full, vocab=vocab, k1=k1)


def _color_class(score: float) -> str:
    if score >= 0.9:
        return "high"
    if score <= -0.9:
        return "low"
    return "mid"


def _dot_quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_graph(
    matrix: RelationMatrix,
    credibility=None,
    *,
    edges_path: str | Path,
    nodes_path: str | Path | None = None,
    dot_path: str | Path | None = None,
) -> None:
    """Write TSV edge-list and node-table artifacts (optionally DOT).

    The node table colors hashtags by credibility: "high" for scores at
    or above 0.9, "low" at or below -0.9, "mid" otherwise (or when no
    credibility vector is supplied).  Self-relations (diagonal entries
    of closure matrices) are omitted from the edge list.
    """
    scores = None
    if credibility is not None:
        scores = np.asarray(credibility.values, dtype=float)
        if scores.shape[0] != matrix.q:
            raise GraphError("credibility vector does not match matrix vocabulary")

    upper = sp.triu(matrix.values, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    with open(edges_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("hashtag_a\thashtag_b\tweight\n")
        for i in order:
            a, b = matrix.vocab[upper.row[i]], matrix.vocab[upper.col[i]]
            fh.write(f"{a}\t{b}\t{float(upper.data[i])!r}\n")

    if nodes_path is not None:
        with open(nodes_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("hashtag\tcredibility\tcolor_class\n")
            for k, name in enumerate(matrix.vocab):
                if scores is None:
                    fh.write(f"{name}\t\tmid\n")
                else:
                    fh.write(f"{name}\t{float(scores[k])!r}\t{_color_class(float(scores[k]))}\n")

    if dot_path is not None:
        with open(dot_path, "w", encoding="utf-8", newline="\n") as fh:
            _write_dot(fh, matrix, scores, upper, order)


def _write_dot(fh: TextIO, matrix: RelationMatrix, scores, upper, order: Iterable[int]) -> None:
    palette = {"high": "blue", "low": "red", "mid": "gray"}
    fh.write("graph hashtags {\n")
    for k, name in enumerate(matrix.vocab):
        color = palette["mid" if scores is None else _color_class(float(scores[k]))]
        fh.write(f"  {_dot_quote(name)} [color={color}];\n")
    for i in order:
        a, b = matrix.vocab[upper.row[i]], matrix.vocab[upper.col[i]]
        fh.write(f"  {_dot_quote(a)} -- {_dot_quote(b)} [weight={float(upper.data[i])!r}];\n")
    fh.write("}\n")
