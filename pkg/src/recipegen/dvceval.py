"""Event-level evaluation: tIoU, the multi-threshold dvc_eval harness, SODA
story alignment (including the tIoU-only variant), and event-count statistics.

Conventions, also recorded in report metadata:
  * dvc_eval keeps a (prediction, ground-truth) pair at threshold ``t`` only
    when tIoU is strictly greater than ``t``.
  * SODA is single-reference and reported as F-measure; corpus scores are the
    mean of per-video F1.
  * An empty prediction has precision 0 and F1 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import GroundTruthRecipe, PredictionRecipe, TimedEvent
from .textmetrics import CorpusDF, bleu4, build_df, cider_d, meteor_lite

DVC_EVAL_THRESHOLDS = (0.3, 0.5, 0.7, 0.9)
COUNT_STAT_ETAS = (0, 1, 2, 3)

SentenceMetric = Callable[[list[str], list[str]], float]


def tiou(a: TimedEvent, b: TimedEvent) -> float:
    """Temporal intersection over union of two intervals."""
    inter = max(0.0, min(a.end, b.end) - max(a.start, b.start))
    union = a.length + b.length - inter
    return inter / union if union > 0 else 0.0


def tiou_matrix(pred: Sequence[TimedEvent], gt: Sequence[TimedEvent]) -> np.ndarray:
    out = np.zeros((len(pred), len(gt)))
    for i, p in enumerate(pred):
        for j, g in enumerate(gt):
            out[i, j] = tiou(p, g)
    return out


@dataclass
class Alignment:
    """A monotone one-to-one matching between predictions and ground truth."""

    pairs: list[tuple[int, int]]  # strictly increasing in both coordinates
    total: float


def dp_alignment(scores: np.ndarray) -> Alignment:
    """Maximum-total order-preserving matching via dynamic programming.

    ``scores[i, j]`` is the value of pairing prediction i with ground-truth j;
    each row/column is used at most once and matched pairs keep their order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n_p, n_g = scores.shape
    m = np.zeros((n_p + 1, n_g + 1))
    for i in range(1, n_p + 1):
        for j in range(1, n_g + 1):
            m[i, j] = max(m[i - 1, j], m[i, j - 1], m[i - 1, j - 1] + scores[i - 1, j - 1])
    pairs: list[tuple[int, int]] = []
    i, j = n_p, n_g
    while i > 0 and j > 0:
        if m[i, j] == m[i - 1, j - 1] + scores[i - 1, j - 1] and scores[i - 1, j - 1] > 0:
            pairs.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif m[i, j] == m[i - 1, j]:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return Alignment(pairs=pairs, total=float(m[n_p, n_g]))


def soda_from_matrix(scores: np.ndarray) -> tuple[float, float, float]:
    """Precision, recall, F1 of the optimal monotone alignment of ``scores``."""
    n_p, n_g = scores.shape
    if n_p == 0 or n_g == 0:
        return 0.0, 0.0, 0.0
    total = dp_alignment(scores).total
    precision = total / n_p
    recall = total / n_g
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def soda(
    pred: PredictionRecipe,
    gt: GroundTruthRecipe,
    metric: SentenceMetric | None = None,
) -> tuple[float, float, float]:
    """SODA for one video.

    Pair scores are ``tiou * metric(pred_sentence, gt_sentence)``; with
    ``metric=None`` the score is tIoU alone (the SODA-tIoU variant).
    """
    mat = tiou_matrix(pred.intervals, [s.interval for s in gt.steps])
    if metric is not None:
        for i, sent in enumerate(pred.sentences):
            for j, step in enumerate(gt.steps):
                if mat[i, j] > 0.0:
                    mat[i, j] *= metric(sent, step.sentence) if sent else 0.0
    return soda_from_matrix(mat)


def dvc_eval(
    pred: PredictionRecipe,
    gt: GroundTruthRecipe,
    metric: SentenceMetric,
    thresholds: Sequence[float] = DVC_EVAL_THRESHOLDS,
) -> float:
    """dvc_eval score for one video: per threshold, average the sentence
    metric over all prediction x ground-truth pairs whose tIoU exceeds it
    (0 when none qualifies), then average over thresholds."""
    mat = tiou_matrix(pred.intervals, [s.interval for s in gt.steps])
    cache: dict[tuple[int, int], float] = {}

    def pair_score(i: int, j: int) -> float:
        if (i, j) not in cache:
            sent = pred.sentences[i]
            cache[(i, j)] = metric(sent, gt.steps[j].sentence) if sent else 0.0
        return cache[(i, j)]

    per_threshold = []
    for t in thresholds:
        qualifying = [
            pair_score(i, j)
            for i in range(mat.shape[0])
            for j in range(mat.shape[1])
            if mat[i, j] > t
        ]
        per_threshold.append(sum(qualifying) / len(qualifying) if qualifying else 0.0)
    return float(np.mean(per_threshold))


def event_count_stats(
    pairs: Sequence[tuple[int, int]], etas: Sequence[int] = COUNT_STAT_ETAS
) -> dict[int, float]:
    """Percentage of (predicted count, ground-truth count) pairs with
    ``|p - q| <= eta``, for each eta."""
    if not etas:
        raise ValueError("etas must be non-empty")
    if any(e < 0 for e in etas):
        raise ValueError("etas must be non-negative")
    if not pairs:
        return {e: 0.0 for e in etas}
    out = {}
    for eta in etas:
        hits = sum(1 for p, q in pairs if abs(p - q) <= eta)
        out[eta] = 100.0 * hits / len(pairs)
    return out


# ---------------------------------------------------------------------------
# Corpus-level reports
# ---------------------------------------------------------------------------

REPORT_METADATA = {
    "meteor_variant": "exact-lite",
    "bleu_smoothing": "add-one on n>=2 precisions",
    "dvc_eval_threshold_rule": "tiou strictly greater than threshold",
    "soda_reference_mode": "single-reference",
    "soda_tiou_statistic": "f1",
    "cider_sigma": 6.0,
}


def sentence_metrics(df: CorpusDF) -> dict[str, SentenceMetric]:
    """The three sentence scorers used by dvc_eval and SODA, with CIDEr-D
    bound to document frequencies from the evaluation references."""
    return {
        "bleu4": lambda c, r: bleu4(c, [r]) if c else 0.0,
        "meteor": lambda c, r: meteor_lite(c, r) if c else 0.0,
        "cider_d": lambda c, r: cider_d(c, [r], df),
    }


def reference_df(gts: Sequence[GroundTruthRecipe]) -> CorpusDF:
    return build_df([[s.sentence for s in gt.steps] for gt in gts])


def evaluate_corpus(
    preds: Sequence[PredictionRecipe],
    gts: Sequence[GroundTruthRecipe],
) -> dict:
    """Full metric report over aligned predictions and ground truths.

    Emits flat ``metrics`` keys ``dvc_eval.{bleu4,meteor,cider_d}``,
    ``soda.{meteor,cider_d,tiou}``, and ``count_stats.eta{0..3}``, plus a
    per-video breakdown.
    """
    pred_ids = [p.video_id for p in preds]
    gt_ids = [g.video_id for g in gts]
    if pred_ids != gt_ids:
        missing = sorted(set(gt_ids) - set(pred_ids))
        extra = sorted(set(pred_ids) - set(gt_ids))
        raise ValueError(
            f"prediction/dataset video_id mismatch: missing={missing} extra={extra}"
        )

    metrics = sentence_metrics(reference_df(gts))
    per_video = []
    for pred, gt in zip(preds, gts):
        row = {"video_id": pred.video_id}
        for name, fn in metrics.items():
            row[f"dvc_eval.{name}"] = dvc_eval(pred, gt, fn)
        for name in ("meteor", "cider_d"):
            row[f"soda.{name}"] = soda(pred, gt, metrics[name])[2]
        row["soda.tiou"] = soda(pred, gt, None)[2]
        row["n_predicted"] = len(pred.selections)
        row["n_ground_truth"] = len(gt.steps)
        per_video.append(row)

    flat: dict[str, float] = {}
    for key in (
        "dvc_eval.bleu4",
        "dvc_eval.meteor",
        "dvc_eval.cider_d",
        "soda.meteor",
        "soda.cider_d",
        "soda.tiou",
    ):
        flat[key] = float(np.mean([row[key] for row in per_video])) if per_video else 0.0
    count_pairs = [(row["n_predicted"], row["n_ground_truth"]) for row in per_video]
    for eta, pct in event_count_stats(count_pairs).items():
        flat[f"count_stats.eta{eta}"] = pct

    return {"metrics": flat, "per_video": per_video, "metadata": dict(REPORT_METADATA)}
