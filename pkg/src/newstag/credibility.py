"""Per-hashtag credibility scores and graph-regularized propagation.

A hashtag starts with the weighted average label of the training news
whose posts carry it (zero when unseen in training).  Propagation then
balances smoothness over the relation graph against anchoring to those
initial scores, controlled by ``mu`` in (0, 1): the minimizer solves
``(I - mu * X) c = (1 - mu) * c0`` with X the symmetrically normalized
relation matrix, and the fixed-point iteration
``c <- mu * X c + (1 - mu) * c0`` contracts to it at rate mu.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus
from .graph import RelationMatrix

logger = logging.getLogger(__name__)

PROVENANCE_INITIAL = "initial_c0"
PROVENANCE_PROPAGATED = "propagated"
PROVENANCE_ALL_DATA = "all_data_c_star"

MODE_ITERATIVE = "iterative"
MODE_CLOSED_FORM = "closed_form"


class PropagationError(RuntimeError):
    """Raised when the linear solve fails; indicates a defect, not bad data."""


@dataclass(frozen=True)
class CredibilityVector:
    """Real score per vocabulary index, tagged with how it was obtained."""

    values: np.ndarray
    provenance: str
    mu: float | None = None


@dataclass(frozen=True)
class PropagationConfig:
    """Solver knobs.  tolerance=0 disables early stopping, so the
    iteration runs for exactly ``max_iterations`` steps (the published
    protocol fixes five iterations rather than a tolerance)."""

    mu: float = 0.4
    max_iterations: int = 100
    tolerance: float = 1e-9
    mode: str = MODE_ITERATIVE

    def validate(self) -> None:
        _check_mu(self.mu)
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.mode not in (MODE_ITERATIVE, MODE_CLOSED_FORM):
            raise ValueError(f"unknown propagation mode {self.mode!r}")


def _check_mu(mu: float) -> None:
    if not 0.0 < mu < 1.0:
        raise ValueError("mu must be in (0,1)")


def _values(c) -> np.ndarray:
    return np.asarray(c.values if isinstance(c, CredibilityVector) else c, dtype=np.float64)


def init_credibility(
    corpus: Corpus,
    train_ids,
    vocab: tuple[str, ...],
    per_post: bool = True,
) -> CredibilityVector:
    """Weighted average training label per hashtag (0 when unseen).

    With ``per_post`` each post of a training news votes once per
    hashtag it carries, so popular news weighs more; without it each
    news votes once per distinct hashtag (the unweighted variant's
    simplified form).  Every entry lies in [-1, 1] by construction.
    """
    index = {h: k for k, h in enumerate(vocab)}
    num = np.zeros(len(vocab), dtype=np.int64)
    den = np.zeros(len(vocab), dtype=np.int64)
    for news_id in train_ids:
        item = corpus.news_by_id[news_id]
        if item.label is None:
            raise ValueError(f"train id {news_id!r} is unlabeled")
        tags = (
            (h for post in item.posts for h in post.hashtags)
            if per_post
            else iter(item.hashtag_union)
        )
        for h in tags:
            try:
                k = index[h]
            except KeyError:
                raise ValueError(f"hashtag {h!r} missing from vocabulary") from None
            num[k] += item.label
            den[k] += 1
    values = np.where(den > 0, num / np.maximum(den, 1), 0.0)
    return CredibilityVector(values=values, provenance=PROVENANCE_INITIAL)


def symmetric_normalize(W: RelationMatrix) -> tuple[sp.csr_matrix, np.ndarray]:
    """Return X = D^{-1/2} W D^{-1/2} and the degree vector D.

    Rows and columns of zero-degree hashtags are left all-zero, which
    keeps I - mu*X well posed and pins isolated hashtags to
    (1 - mu) * c0 at the fixed point.
    """
    degrees = np.asarray(W.values.sum(axis=1)).ravel()
    inv_sqrt = np.where(degrees > 0, 1.0 / np.sqrt(np.maximum(degrees, 1e-300)), 0.0)
    scale = sp.diags(inv_sqrt)
    X = (scale @ W.values @ scale).tocsr()
    return X, degrees


def propagate_iterative(
    X: sp.spmatrix,
    c0: CredibilityVector,
    config: PropagationConfig,
) -> tuple[CredibilityVector, list[float]]:
    """Fixed-point iteration c <- mu*X c + (1-mu)*c0 starting from c0.

    Stops when the max-norm change drops below ``tolerance`` (if
    positive) or after ``max_iterations`` steps.  Returns the final
    vector and the per-iteration residual trace.
    """
    config.validate()
    start = _values(c0)
    anchor = (1.0 - config.mu) * start
    c = start.copy()
    residuals: list[float] = []
    for _ in range(config.max_iterations):
        c_next = config.mu * (X @ c) + anchor
        delta = float(np.max(np.abs(c_next - c))) if c.size else 0.0
        residuals.append(delta)
        c = c_next
        if config.tolerance > 0.0 and delta < config.tolerance:
            break
    return CredibilityVector(values=c, provenance=PROVENANCE_PROPAGATED, mu=config.mu), residuals


def propagate_closed_form(
    X: sp.spmatrix,
    c0: CredibilityVector,
    mu: float,
    dense_cap: int = 2000,
) -> CredibilityVector:
    """Direct solve of (I - mu*X) c = (1-mu) c0.

    Invertibility follows from the spectral radius of X being at most 1
    and mu < 1; a failure here is a defect signal, not a data error.
    """
    _check_mu(mu)
    start = _values(c0)
    q = start.shape[0]
    rhs = (1.0 - mu) * start
    if q == 0:
        return CredibilityVector(values=rhs, provenance=PROVENANCE_PROPAGATED, mu=mu)
    try:
        if q <= dense_cap:
            system = np.eye(q) - mu * X.toarray()
            solution = np.linalg.solve(system, rhs)
        else:
            from scipy.sparse.linalg import spsolve

            system = sp.identity(q, format="csc") - mu * X.tocsc()
            solution = spsolve(system, rhs)
    except Exception as exc:  # LinAlgError or UMFPACK failure
        raise PropagationError(f"closed-form propagation solve failed: {exc}") from exc
    if not np.all(np.isfinite(solution)):
        raise PropagationError("closed-form propagation produced non-finite values")
    return CredibilityVector(values=solution, provenance=PROVENANCE_PROPAGATED, mu=mu)


def cost_evaluate(W: RelationMatrix, D: np.ndarray, c, c0, mu: float) -> float:
    """Regularized cost whose minimizer is the propagated vector.

    Smoothness sums W_kl * (c_k/sqrt(D_k) - c_l/sqrt(D_l))^2 over each
    unordered pair once, plus (1-mu)-weighted anchoring to c0.
    Zero-degree coordinates use c_k/sqrt(D_k) := 0, consistent with
    :func:`symmetric_normalize`.
    """
    _check_mu(mu)
    cv = _values(c)
    c0v = _values(c0)
    inv_sqrt = np.where(D > 0, 1.0 / np.sqrt(np.maximum(D, 1e-300)), 0.0)
    scaled = cv * inv_sqrt
    upper = sp.triu(W.values, k=1).tocoo()
    diff = scaled[upper.row] - scaled[upper.col]
    smooth = float(np.sum(upper.data * diff * diff))
    anchor = float(np.sum((cv - c0v) ** 2))
    return mu * smooth + (1.0 - mu) * anchor


def score_news(
    corpus: Corpus,
    target_ids,
    c_hat: CredibilityVector,
    per_post: bool = True,
) -> dict[str, float]:
    """Sum propagated hashtag credibility over each news item's posts.

    With ``per_post`` a hashtag contributes once per post carrying it;
    otherwise once per news item.  Unknown news ids raise KeyError.
    """
    values = _values(c_hat)
    index = corpus.vocab_index
    if values.shape[0] != len(corpus.vocabulary):
        raise ValueError(
            f"credibility vector length {values.shape[0]} does not match "
            f"vocabulary size {len(corpus.vocabulary)}"
        )
    scores: dict[str, float] = {}
    for news_id in target_ids:
        item = corpus.news_by_id[news_id]
        total = 0.0
        if per_post:
            for post in item.posts:
                for h in post.hashtags:
                    total += values[index[h]]
        else:
            for h in item.hashtag_union:
                total += values[index[h]]
        scores[news_id] = float(total)
    return scores


def predict(
    corpus: Corpus,
    target_ids,
    c_hat: CredibilityVector,
    per_post: bool = True,
) -> dict[str, int]:
    """Sign rule over the credibility score: +1 if positive, else -1.

    A score of exactly zero (e.g. a hashtag-free news item) predicts
    fake: the tie goes to the "otherwise" branch.
    """
    scores = score_news(corpus, target_ids, c_hat, per_post=per_post)
    return {news_id: (1 if s > 0.0 else -1) for news_id, s in scores.items()}


def rescale_credibility(c_hat: CredibilityVector) -> CredibilityVector:
    """Divide by the maximum magnitude, mapping scores onto [-1, 1].

    Preserves signs, ordering, and therefore every prediction.  An
    all-zero vector is returned unchanged with a warning.
    """
    values = _values(c_hat)
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    if peak == 0.0:
        logger.warning("rescale: all-zero credibility vector left unchanged")
        return CredibilityVector(values=values.copy(), provenance=c_hat.provenance, mu=c_hat.mu)
    return CredibilityVector(values=values / peak, provenance=c_hat.provenance, mu=c_hat.mu)


def write_credibility(
    c: CredibilityVector, vocab: tuple[str, ...], path
) -> None:
    """Persist a credibility vector as TSV (hashtag, score, provenance)."""
    values = _values(c)
    if values.shape[0] != len(vocab):
        raise ValueError("credibility vector length does not match vocabulary")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("hashtag\tscore\tprovenance\n")
        for k, name in enumerate(vocab):
            fh.write(f"{name}\t{float(values[k])!r}\t{c.provenance}\n")
