"""Empirical analyses: hashtag purity, news popularity, case studies,
and convergence traces for both accumulation loops."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .corpus import Corpus, normalize_hashtag
from .credibility import (
    CredibilityVector,
    PROVENANCE_ALL_DATA,
    init_credibility,
    propagate_iterative,
    rescale_credibility,
    symmetric_normalize,
)
from .graph import all_relations_truncated_with_trace, build_direct_graph, normalize
from .harness import (
    ExperimentConfig,
    METHOD_UNWEIGHTED,
    PipelineOperators,
    _split_with_retries,
    build_pipeline,
    propagate,
)

logger = logging.getLogger(__name__)

FAKE_ONLY = "fake_only"
TRUE_ONLY = "true_only"
MIXED = "mixed"


@dataclass(frozen=True)
class PurityRow:
    news_id: str
    label: int
    n_hashtags: int
    frac_fake_only: float
    frac_true_only: float
    frac_mixed: float


@dataclass(frozen=True)
class PurityReport:
    rows: tuple[PurityRow, ...]
    skipped_no_hashtags: int
    hashtag_classes: dict[str, int]  # class name -> number of hashtags


def purity_analysis(corpus: Corpus) -> PurityReport:
    """Per-news fractions of hashtags used only by fake, only by true,
    or by both credibility classes.

    A hashtag's class comes from the labels of the news items whose
    posts carry it; only labeled news enter the analysis.  News without
    hashtags have no defined proportion and are counted separately.
    The three fractions partition each news item's hashtag set.
    """
    usage: dict[str, set[int]] = {}
    for item in corpus.news:
        if item.label is None:
            continue
        for h in item.hashtag_union:
            usage.setdefault(h, set()).add(item.label)
    classes = {
        h: (MIXED if len(labels) == 2 else (FAKE_ONLY if -1 in labels else TRUE_ONLY))
        for h, labels in usage.items()
    }

    rows: list[PurityRow] = []
    skipped = 0
    for item in corpus.news:
        if item.label is None:
            continue
        tags = item.hashtag_union
        if not tags:
            skipped += 1
            continue
        counts = {FAKE_ONLY: 0, TRUE_ONLY: 0, MIXED: 0}
        for h in tags:
            counts[classes[h]] += 1
        n = len(tags)
        rows.append(
            PurityRow(
                news_id=item.id,
                label=item.label,
                n_hashtags=n,
                frac_fake_only=counts[FAKE_ONLY] / n,
                frac_true_only=counts[TRUE_ONLY] / n,
                frac_mixed=counts[MIXED] / n,
            )
        )
    tally = {FAKE_ONLY: 0, TRUE_ONLY: 0, MIXED: 0}
    for cls in classes.values():
        tally[cls] += 1
    return PurityReport(rows=tuple(rows), skipped_no_hashtags=skipped, hashtag_classes=tally)


@dataclass(frozen=True)
class PopularityReport:
    checkpoints: tuple[float, ...]
    per_news: tuple[dict, ...]  # news_id, label, counts per checkpoint
    summary: tuple[dict, ...]  # checkpoint, label, quartile statistics
    excluded_no_publish_time: int
    dropped_untimed_posts: int


def popularity_analysis(corpus: Corpus, checkpoints_hours) -> PopularityReport:
    """Cumulative post counts per labeled news at fixed hours after publish.

    News without a publish time (and posts without a creation time) are
    excluded and counted.  The summary carries boxplot-ready statistics
    per class and checkpoint.
    """
    checkpoints = tuple(sorted(float(c) for c in checkpoints_hours))
    if not checkpoints or checkpoints[0] <= 0:
        raise ValueError("checkpoints must be positive hours")
    per_news: list[dict] = []
    excluded = 0
    dropped_posts = 0
    for item in corpus.news:
        if item.label is None:
            continue
        if item.published_at is None:
            excluded += 1
            continue
        offsets = []
        for post in item.posts:
            if post.created_at is None:
                dropped_posts += 1
            else:
                offsets.append((post.created_at - item.published_at).total_seconds() / 3600.0)
        counts = [sum(1 for o in offsets if o <= cp) for cp in checkpoints]
        per_news.append({"news_id": item.id, "label": item.label, "counts": counts})

    summary: list[dict] = []
    for idx, cp in enumerate(checkpoints):
        for label in (-1, 1):
            values = [row["counts"][idx] for row in per_news if row["label"] == label]
            if values:
                arr = np.asarray(values, dtype=float)
                stats = {
                    "n": len(values),
                    "min": float(arr.min()),
                    "q1": float(np.percentile(arr, 25)),
                    "median": float(np.percentile(arr, 50)),
                    "q3": float(np.percentile(arr, 75)),
                    "max": float(arr.max()),
                    "mean": float(arr.mean()),
                }
            else:
                stats = {"n": 0, "min": 0.0, "q1": 0.0, "median": 0.0, "q3": 0.0, "max": 0.0, "mean": 0.0}
            summary.append({"checkpoint_hours": cp, "label": label, **stats})
    return PopularityReport(
        checkpoints=checkpoints,
        per_news=tuple(per_news),
        summary=tuple(summary),
        excluded_no_publish_time=excluded,
        dropped_untimed_posts=dropped_posts,
    )


@dataclass(frozen=True)
class CaseStudyRow:
    hashtag: str
    status: str  # "ok" or "absent"
    c_star: float | None
    c_hat_rescaled: float | None


def case_study(corpus: Corpus, config: ExperimentConfig, watchlist) -> tuple[CaseStudyRow, ...]:
    """All-data credibility versus trained-and-rescaled estimates for a
    watchlist of hashtags (e.g. conspiracy-theory tags).

    ``c_star`` averages labels over every labeled news item; the
    estimate comes from one trained pipeline run at ``config.seed`` and
    is rescaled to [-1, 1] for comparability.  Watchlist entries are
    normalized before lookup; absent hashtags are marked as such.
    """
    config.validate()
    ops = build_pipeline(corpus, config)
    index = {h: k for k, h in enumerate(ops.vocab)}

    raw_star = init_credibility(corpus, corpus.labeled_ids(), ops.vocab, per_post=ops.per_post)
    c_star = CredibilityVector(values=raw_star.values, provenance=PROVENANCE_ALL_DATA)

    train, _, _ = _split_with_retries(corpus, config.train_fraction, config.seed)
    c0 = init_credibility(corpus, train, ops.vocab, per_post=ops.per_post)
    c_hat = rescale_credibility(propagate(ops, c0, config))

    rows = []
    for raw in watchlist:
        name = normalize_hashtag(raw)
        if name is None or name not in index:
            rows.append(CaseStudyRow(hashtag=name or raw, status="absent", c_star=None, c_hat_rescaled=None))
            continue
        k = index[name]
        rows.append(
            CaseStudyRow(
                hashtag=name,
                status="ok",
                c_star=float(c_star.values[k]),
                c_hat_rescaled=float(c_hat.values[k]),
            )
        )
    return tuple(rows)


@dataclass(frozen=True)
class ConvergenceTrace:
    closure_residuals: tuple[float, ...]  # per accumulated power term
    propagation_residuals: tuple[float, ...]  # per fixed-point iteration


def convergence_trace(corpus: Corpus, config: ExperimentConfig) -> ConvergenceTrace:
    """Residual series for both loops of the full pipeline.

    The closure loop reports the Frobenius norm of each added power term
    relative to the accumulated sum; the propagation loop reports the
    max-norm change per iteration.  With tolerance 0 both series have
    exactly as many rows as their iteration caps.
    """
    config.validate()
    graph = build_direct_graph(corpus, weighted=config.method != METHOD_UNWEIGHTED)
    N = normalize(graph)
    relation, closure_residuals = all_relations_truncated_with_trace(
        N, config.k1, config.drop_tolerance
    )
    X, degrees = symmetric_normalize(relation)
    ops = PipelineOperators(
        vocab=graph.vocab,
        relation=relation,
        X=X,
        degrees=degrees,
        per_post=config.method != METHOD_UNWEIGHTED,
    )
    train, _, _ = _split_with_retries(corpus, config.train_fraction, config.seed)
    c0 = init_credibility(corpus, train, ops.vocab, per_post=ops.per_post)
    prop = replace(config.propagation, mu=config.mu)
    _, residuals = propagate_iterative(ops.X, c0, prop)
    return ConvergenceTrace(
        closure_residuals=tuple(closure_residuals),
        propagation_residuals=tuple(residuals),
    )
