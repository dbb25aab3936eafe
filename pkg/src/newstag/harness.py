"""End-to-end experiment orchestration: splits, pipelines, metrics, sweeps.

The pipeline is transductive: the hashtag graph is built over all news
(labels withheld), while the initial credibility comes from training
labels only.  Graph construction, normalization, closure and the
propagation operator are split-independent, so they are computed once
per corpus and reused across repetitions and grid points.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict, replace

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus, filter_by_time, split_corpus
from .credibility import (
    CredibilityVector,
    PropagationConfig,
    MODE_CLOSED_FORM,
    init_credibility,
    propagate_closed_form,
    propagate_iterative,
    score_news,
    symmetric_normalize,
)
from .graph import (
    ALL_RELATIONS_TRUNCATED,
    RelationMatrix,
    all_relations_truncated,
    build_direct_graph,
    normalize,
)

logger = logging.getLogger(__name__)

METHOD_NEWSTAG = "newstag"
METHOD_NO_INDIRECT = "newstag_no_indirect"
METHOD_UNWEIGHTED = "newstag_unweighted"
METHODS = (METHOD_NEWSTAG, METHOD_NO_INDIRECT, METHOD_UNWEIGHTED)

MAX_SPLIT_ATTEMPTS = 100
_RESAMPLE_STRIDE = 7919  # deterministic seed offset between split attempts


class HarnessError(RuntimeError):
    """Raised for unrecoverable experiment conditions (degenerate splits)."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol knobs; defaults mirror the published setup."""

    method: str = METHOD_NEWSTAG
    mu: float = 0.4
    k1: int = 10
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    train_fraction: float = 0.8
    time_horizon_hours: float | None = None
    seed: int = 0
    repetitions: int = 10
    drop_tolerance: float = 0.0

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0.0 < self.mu < 1.0:
            raise ValueError("mu must be in (0,1)")
        if self.k1 < 1:
            raise ValueError(f"k1 must be >= 1, got {self.k1}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0,1), got {self.train_fraction}")
        if self.time_horizon_hours is not None and self.time_horizon_hours <= 0:
            raise ValueError("time_horizon_hours must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        replace(self.propagation, mu=self.mu).validate()

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RepetitionResult:
    repetition: int
    split_seed: int
    n_train: int
    n_test_labeled: int
    n_test_empty: int
    macro_f1: float
    micro_f1: float
    confusion: dict[str, int]
    predictions: dict[str, tuple[int, float]] | None = None


@dataclass(frozen=True)
class MetricsReport:
    method: str
    config: dict
    repetitions: tuple[RepetitionResult, ...]
    macro_f1_mean: float
    macro_f1_std: float
    micro_f1_mean: float
    micro_f1_std: float
    confusion_total: dict[str, int]

    def to_dict(self, include_predictions: bool = False) -> dict:
        reps = []
        for rep in self.repetitions:
            entry = {
                "repetition": rep.repetition,
                "split_seed": rep.split_seed,
                "n_train": rep.n_train,
                "n_test_labeled": rep.n_test_labeled,
                "n_test_empty": rep.n_test_empty,
                "macro_f1": rep.macro_f1,
                "micro_f1": rep.micro_f1,
                "confusion": rep.confusion,
            }
            if include_predictions and rep.predictions is not None:
                entry["predictions"] = {
                    news_id: {"label": label, "score": score}
                    for news_id, (label, score) in rep.predictions.items()
                }
            reps.append(entry)
        return {
            "method": self.method,
            "config": self.config,
            "aggregate": {
                "macro_f1_mean": self.macro_f1_mean,
                "macro_f1_std": self.macro_f1_std,
                "micro_f1_mean": self.micro_f1_mean,
                "micro_f1_std": self.micro_f1_std,
                "confusion_total": self.confusion_total,
            },
            "repetitions": reps,
        }


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def confusion_counts(predictions, truths) -> dict[str, int]:
    """Binary confusion counts with +1 as the positive class."""
    tp = fp = tn = fn = 0
    for pred, truth in zip(predictions, truths):
        if truth == 1:
            if pred == 1:
                tp += 1
            else:
                fn += 1
        else:
            if pred == 1:
                fp += 1
            else:
                tn += 1
    return {"tp": tp, "fp": fp, "tn": tn, "fn": fn}


def _class_f1(tp: int, fp: int, fn: int) -> float:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def compute_f1(predictions, truths) -> tuple[float, float]:
    """(macro F1, micro F1) for labels in {-1, +1}.

    Macro averages the two per-class F1 scores; a class absent from both
    predictions and truths contributes 0.  Micro pools counts over both
    classes, which for single-label binary classification equals
    accuracy.
    """
    predictions = list(predictions)
    truths = list(truths)
    if not predictions or len(predictions) != len(truths):
        raise ValueError("predictions and truths must be equal-length and nonempty")
    for value in (*predictions, *truths):
        if value not in (-1, 1):
            raise ValueError(f"labels must be -1 or +1, got {value!r}")
    c = confusion_counts(predictions, truths)
    f1_pos = _class_f1(c["tp"], c["fp"], c["fn"])
    f1_neg = _class_f1(c["tn"], c["fn"], c["fp"])
    macro = (f1_pos + f1_neg) / 2.0
    # Pooled micro precision equals pooled recall here (every item gets
    # exactly one prediction), so micro F1 reduces to a single division.
    pooled_tp = c["tp"] + c["tn"]
    micro = pooled_tp / len(predictions)
    return macro, micro


# ---------------------------------------------------------------------------
# Pipeline plumbing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineOperators:
    """Split-independent artifacts shared across repetitions."""

    vocab: tuple[str, ...]
    relation: RelationMatrix
    X: sp.csr_matrix
    degrees: np.ndarray
    per_post: bool


def _zero_relation(vocab: tuple[str, ...]) -> RelationMatrix:
    q = len(vocab)
    return RelationMatrix(
        kind=ALL_RELATIONS_TRUNCATED,
        values=sp.csr_matrix((q, q), dtype=np.float64),
        vocab=vocab,
        k1=0,
    )


def build_pipeline(corpus: Corpus, config: ExperimentConfig) -> PipelineOperators:
    """Graph, closure, and propagation operator for one corpus.

    An edgeless graph (or an empty vocabulary) falls back to an all-zero
    relation matrix: propagation then anchors every hashtag at
    (1 - mu) * c0, and hashtag-free corpora stay predictable.
    """
    weighted = config.method != METHOD_UNWEIGHTED
    per_post = config.method != METHOD_UNWEIGHTED
    graph = build_direct_graph(corpus, weighted=weighted)
    if graph.n_edges == 0:
        relation = _zero_relation(graph.vocab)
    else:
        N = normalize(graph)
        if config.method == METHOD_NO_INDIRECT:
            relation = N
        else:
            relation = all_relations_truncated(N, config.k1, config.drop_tolerance)
    X, degrees = symmetric_normalize(relation)
    return PipelineOperators(
        vocab=graph.vocab, relation=relation, X=X, degrees=degrees, per_post=per_post
    )


def propagate(ops: PipelineOperators, c0: CredibilityVector, config: ExperimentConfig) -> CredibilityVector:
    prop = replace(config.propagation, mu=config.mu)
    if prop.mode == MODE_CLOSED_FORM:
        return propagate_closed_form(ops.X, c0, prop.mu)
    c_hat, _ = propagate_iterative(ops.X, c0, prop)
    return c_hat


def _split_with_retries(
    corpus: Corpus, train_fraction: float, seed: int
) -> tuple[tuple[str, ...], tuple[str, ...], int]:
    """Seeded split, resampled until train has labels and test has both classes."""
    by_id = corpus.news_by_id
    for attempt in range(MAX_SPLIT_ATTEMPTS):
        split_seed = seed + _RESAMPLE_STRIDE * attempt
        train, test = split_corpus(corpus, train_fraction, split_seed)
        test_labels = {by_id[i].label for i in test if by_id[i].label is not None}
        if train and test_labels == {-1, 1}:
            return train, test, split_seed
    raise HarnessError(
        f"no usable split after {MAX_SPLIT_ATTEMPTS} attempts "
        "(need labeled training items and both classes in test)"
    )


def _run_single(
    corpus: Corpus,
    ops: PipelineOperators,
    config: ExperimentConfig,
    train: tuple[str, ...],
    targets: tuple[str, ...],
) -> dict[str, tuple[int, float]]:
    """Train on ``train``, return {news_id: (predicted_label, score)} for targets."""
    c0 = init_credibility(corpus, train, ops.vocab, per_post=ops.per_post)
    c_hat = propagate(ops, c0, config)
    scores = score_news(corpus, targets, c_hat, per_post=ops.per_post)
    return {news_id: (1 if s > 0.0 else -1, s) for news_id, s in scores.items()}


def run_experiment(
    corpus: Corpus,
    config: ExperimentConfig,
    collect_predictions: bool = False,
) -> MetricsReport:
    """Repeated split/train/predict/score runs on one corpus.

    The optional time horizon filters the whole corpus (train and test
    alike) before graph construction.  Each repetition derives its split
    seed as ``seed ^ repetition`` and is resampled (deterministically)
    if the test side lacks a class.  Metrics cover labeled test items;
    news left without posts by the filter still get predicted (score 0,
    hence -1) and are additionally counted per repetition.
    """
    config.validate()
    working = (
        filter_by_time(corpus, config.time_horizon_hours)
        if config.time_horizon_hours is not None
        else corpus
    )
    ops = build_pipeline(working, config)
    by_id = working.news_by_id

    reps: list[RepetitionResult] = []
    total = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}
    for rep in range(config.repetitions):
        train, test, split_seed = _split_with_retries(
            working, config.train_fraction, config.seed ^ rep
        )
        outcome = _run_single(working, ops, config, train, test)
        labeled_test = [i for i in test if by_id[i].label is not None]
        preds = [outcome[i][0] for i in labeled_test]
        truths = [by_id[i].label for i in labeled_test]
        macro, micro = compute_f1(preds, truths)
        conf = confusion_counts(preds, truths)
        for key in total:
            total[key] += conf[key]
        reps.append(
            RepetitionResult(
                repetition=rep,
                split_seed=split_seed,
                n_train=len(train),
                n_test_labeled=len(labeled_test),
                n_test_empty=sum(1 for i in test if not by_id[i].posts),
                macro_f1=macro,
                micro_f1=micro,
                confusion=conf,
                predictions=outcome if collect_predictions else None,
            )
        )

    macros = [r.macro_f1 for r in reps]
    micros = [r.micro_f1 for r in reps]
    return MetricsReport(
        method=config.method,
        config=config.to_dict(),
        repetitions=tuple(reps),
        macro_f1_mean=_mean(macros),
        macro_f1_std=_sample_std(macros),
        micro_f1_mean=_mean(micros),
        micro_f1_std=_sample_std(micros),
        confusion_total=total,
    )


def _mean(xs) -> float:
    return float(sum(xs) / len(xs))


def _sample_std(xs) -> float:
    # Sample std over repetitions; a single repetition has no spread.
    if len(xs) < 2:
        return 0.0
    m = _mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


# ---------------------------------------------------------------------------
# Grid search and sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSearchResult:
    best_mu: float
    rows: tuple[dict, ...]  # per grid value: mu + validation F1 stats


def grid_search_mu(corpus: Corpus, config: ExperimentConfig, grid) -> GridSearchResult:
    """Pick mu by micro F1 on an inner validation split (10% of training).

    Grid values outside (0, 1) are dropped with a warning since the
    regularizer is only defined on the open interval.  Ties break toward
    the smaller mu.
    """
    config.validate()
    usable = sorted({float(g) for g in grid if 0.0 < float(g) < 1.0})
    dropped = sorted({float(g) for g in grid} - set(usable))
    if dropped:
        logger.warning("grid values outside (0,1) dropped: %s", dropped)
    if not usable:
        raise ValueError("mu grid is empty after restricting to (0,1)")

    working = (
        filter_by_time(corpus, config.time_horizon_hours)
        if config.time_horizon_hours is not None
        else corpus
    )
    by_id = working.news_by_id

    # Inner splits are shared across grid values so scores are comparable.
    folds: list[tuple[tuple[str, ...], tuple[str, ...]]] = []
    for rep in range(config.repetitions):
        train, _, split_seed = _split_with_retries(
            working, config.train_fraction, config.seed ^ rep
        )
        if len(train) < 2:
            raise HarnessError("training side too small for an inner validation split")
        rng = np.random.default_rng(split_seed + 104729)
        order = rng.permutation(len(train))
        n_val = max(1, int(0.1 * len(train)))
        val_set = {train[i] for i in order[:n_val]}
        inner_train = tuple(i for i in train if i not in val_set)
        val = tuple(i for i in train if i in val_set)
        folds.append((inner_train, val))

    # Pipeline operators do not depend on mu; build them once.
    ops = build_pipeline(working, config)

    rows = []
    best_mu = None
    best_score = -1.0
    for mu in usable:
        candidate = replace(config, mu=mu)
        macros, micros = [], []
        for inner_train, val in folds:
            outcome = _run_single(working, ops, candidate, inner_train, val)
            preds = [outcome[i][0] for i in val]
            truths = [by_id[i].label for i in val]
            macro, micro = compute_f1(preds, truths)
            macros.append(macro)
            micros.append(micro)
        row = {
            "mu": mu,
            "micro_f1_mean": _mean(micros),
            "micro_f1_std": _sample_std(micros),
            "macro_f1_mean": _mean(macros),
            "macro_f1_std": _sample_std(macros),
        }
        rows.append(row)
        if row["micro_f1_mean"] > best_score:
            best_score = row["micro_f1_mean"]
            best_mu = mu
    return GridSearchResult(best_mu=best_mu, rows=tuple(rows))


def sweep_training_fraction(
    corpus: Corpus, config: ExperimentConfig, fractions
) -> list[tuple[float, MetricsReport]]:
    """run_experiment per training fraction, with shared seeds."""
    fractions = list(fractions)
    if not fractions:
        raise ValueError("fraction list must not be empty")
    out = []
    for fraction in fractions:
        report = run_experiment(corpus, replace(config, train_fraction=float(fraction)))
        out.append((float(fraction), report))
    return out


def sweep_detection_time(
    corpus: Corpus, config: ExperimentConfig, horizons
) -> list[tuple[str, MetricsReport]]:
    """run_experiment per detection horizon, plus an unfiltered "all" row."""
    horizons = list(horizons)
    if not horizons:
        raise ValueError("horizon list must not be empty")
    out: list[tuple[str, MetricsReport]] = []
    for horizon in horizons:
        report = run_experiment(corpus, replace(config, time_horizon_hours=float(horizon)))
        out.append((repr(float(horizon)), report))
    report = run_experiment(corpus, replace(config, time_horizon_hours=None))
    out.append(("all", report))
    return out
