"""Scoring against gold labels, stratified two-fold cross-validation, and
the feature-ablation grid.

Accuracy counts unclassifiable outcomes as wrong.  "F-measure" is the
macro-averaged F1 over areas with gold support; per-area precision/recall
define 0/0 as 0.  Fold assignment is seeded-random so that identical seeds
reproduce identical folds.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import AreaId, AreaSet
from .features import ALL_FEATURES, AreaFeatureVector, FeatureMask
from .fusion import FusionModel, classify_features, train_weights


@dataclass
class AreaMetrics:
    area: str
    precision: float
    recall: float
    f1: float
    support: int
    predicted: int


@dataclass
class EvalReport:
    """Metrics over one evaluated set of papers.

    The confusion matrix is gold-by-predicted; unclassifiable papers are
    excluded from the matrix but counted (and held against accuracy and
    recall).  ``fold_reports`` carries per-fold sub-reports after
    cross-validation; the top-level numbers then pool both folds.
    """

    areas: tuple[str, ...]
    accuracy: float
    per_area: list[AreaMetrics]
    macro_f: float
    confusion: np.ndarray
    unclassifiable_count: int
    evaluated: int
    unclass_by_area: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    fold_reports: list["EvalReport"] = field(default_factory=list)

    @property
    def fold_mean_accuracy(self) -> float | None:
        if not self.fold_reports:
            return None
        return float(np.mean([r.accuracy for r in self.fold_reports]))

    @property
    def fold_mean_macro_f(self) -> float | None:
        if not self.fold_reports:
            return None
        return float(np.mean([r.macro_f for r in self.fold_reports]))

    def to_dict(self) -> dict:
        payload = {
            "areas": list(self.areas),
            "accuracy": self.accuracy,
            "macro_f": self.macro_f,
            "evaluated": self.evaluated,
            "unclassifiable": self.unclassifiable_count,
            "per_area": [
                {
                    "area": m.area,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                    "predicted": m.predicted,
                }
                for m in self.per_area
            ],
            "confusion": self.confusion.tolist(),
        }
        if self.fold_reports:
            payload["folds"] = [r.to_dict() for r in self.fold_reports]
            payload["fold_mean_accuracy"] = self.fold_mean_accuracy
            payload["fold_mean_macro_f"] = self.fold_mean_macro_f
        return payload


def _report_from_counts(
    areas: Sequence[str], confusion: np.ndarray, unclass_by_area: np.ndarray
) -> EvalReport:
    unclassifiable = int(unclass_by_area.sum())
    evaluated = int(confusion.sum()) + unclassifiable
    if evaluated == 0:
        raise ValueError("nothing to evaluate")
    accuracy = float(np.trace(confusion)) / evaluated
    per_area: list[AreaMetrics] = []
    f_values: list[float] = []
    gold_counts = confusion.sum(axis=1)
    pred_counts = confusion.sum(axis=0)
    for k, area in enumerate(areas):
        tp = float(confusion[k, k])
        support = int(gold_counts[k]) + int(unclass_by_area[k])
        predicted = int(pred_counts[k])
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_area.append(AreaMetrics(area, precision, recall, f1, support, predicted))
        if support:
            f_values.append(f1)
    macro_f = float(np.mean(f_values)) if f_values else 0.0
    return EvalReport(
        areas=tuple(areas),
        accuracy=accuracy,
        per_area=per_area,
        macro_f=macro_f,
        confusion=confusion,
        unclassifiable_count=unclassifiable,
        evaluated=evaluated,
        unclass_by_area=unclass_by_area,
    )


def score_predictions(
    gold: Mapping[str, str],
    predicted: Mapping[str, str | None],
    areas: AreaSet,
) -> EvalReport:
    """Score a predicted id -> area mapping against gold labels.

    ``None`` predictions are the unclassifiable outcome.  A prediction for
    an id without a gold label is a fatal error.
    """
    n = len(areas)
    confusion = np.zeros((n, n), dtype=np.int64)
    unclass_by_area = np.zeros(n, dtype=np.int64)
    unclassifiable = 0
    for pid, pred in predicted.items():
        if pid not in gold:
            raise ValueError(f"prediction for unknown paper id {pid!r}")
        gold_area = areas.by_id(gold[pid])
        if pred is None:
            unclassifiable += 1
            unclass_by_area[gold_area.index] += 1
            continue
        confusion[gold_area.index, areas.by_id(pred).index] += 1
    return _report_from_counts(areas.area_ids(), confusion, unclass_by_area)


@dataclass
class LabeledInstance:
    """A labeled paper with its precomputed feature vectors."""

    paper_id: str
    features: AreaFeatureVector
    gold: AreaId


def stratified_folds(
    instances: Sequence[LabeledInstance], areas: AreaSet, seed: int
) -> tuple[list[LabeledInstance], list[LabeledInstance]]:
    """Split each area's papers evenly into two folds with a seeded shuffle.

    Odd per-area counts put the extra paper in fold 0.  Every area needs at
    least two labeled papers so each fold gets one.
    """
    by_area: dict[int, list[LabeledInstance]] = {a.index: [] for a in areas}
    for inst in instances:
        by_area[inst.gold.index].append(inst)
    rng = random.Random(seed)
    fold0: list[LabeledInstance] = []
    fold1: list[LabeledInstance] = []
    for area in areas:
        group = by_area[area.index]
        if len(group) < 2:
            raise ValueError(
                f"area {area.id!r} has {len(group)} labeled paper(s); need at least 2 for two folds"
            )
        group = sorted(group, key=lambda inst: inst.paper_id)
        rng.shuffle(group)
        half = (len(group) + 1) // 2
        fold0.extend(group[:half])
        fold1.extend(group[half:])
    return fold0, fold1


def _evaluate_fold(
    train: Sequence[LabeledInstance],
    test: Sequence[LabeledInstance],
    areas: AreaSet,
    mask: FeatureMask,
    fingerprint: str,
) -> tuple[EvalReport, FusionModel]:
    model = train_weights(
        [(inst.features, inst.gold) for inst in train],
        fingerprint=fingerprint,
        area_ids=areas.area_ids(),
        mask=mask,
    )
    area_list = list(areas)
    gold = {inst.paper_id: inst.gold.id for inst in test}
    predicted: dict[str, str | None] = {}
    for inst in test:
        result = classify_features(inst.features, model, area_list, mask)
        predicted[inst.paper_id] = None if result.predicted is None else result.predicted.id
    return score_predictions(gold, predicted, areas), model


def cross_validate(
    instances: Sequence[LabeledInstance],
    areas: AreaSet,
    seed: int,
    mask: FeatureMask = ALL_FEATURES,
    fingerprint: str = "",
) -> EvalReport:
    """Stratified two-fold cross-validation.

    Trains the fusion weights on fold 0 and evaluates fold 1, then the
    reverse; every paper is tested exactly once.  The top-level report pools
    both folds (its confusion matrix covers all papers); the per-fold
    reports and their unweighted means ride along.
    """
    fold0, fold1 = stratified_folds(instances, areas, seed)
    report_on_1, _ = _evaluate_fold(fold0, fold1, areas, mask, fingerprint)
    report_on_0, _ = _evaluate_fold(fold1, fold0, areas, mask, fingerprint)
    pooled = report_on_0.confusion + report_on_1.confusion
    unclass_by_area = report_on_0.unclass_by_area + report_on_1.unclass_by_area
    combined = _report_from_counts(areas.area_ids(), pooled, unclass_by_area)
    combined.fold_reports = [report_on_0, report_on_1]
    return combined


def mask_grid() -> list[FeatureMask]:
    """The seven non-empty feature subsets, singles first, then pairs, then all."""
    return [
        FeatureMask(content=False, cites=True, cited_by=False),
        FeatureMask(content=False, cites=False, cited_by=True),
        FeatureMask(content=True, cites=False, cited_by=False),
        FeatureMask(content=False, cites=True, cited_by=True),
        FeatureMask(content=True, cites=True, cited_by=False),
        FeatureMask(content=True, cites=False, cited_by=True),
        FeatureMask(content=True, cites=True, cited_by=True),
    ]


def ablation_grid(
    instances: Sequence[LabeledInstance],
    areas: AreaSet,
    seed: int,
    fingerprint: str = "",
) -> dict[str, EvalReport]:
    """Cross-validate once per feature subset, reusing the same folds.

    The same seed feeds every mask, so each cell of the grid sees identical
    fold assignments and differences come from the features alone.
    """
    reports: dict[str, EvalReport] = {}
    for mask in mask_grid():
        reports[mask.label] = cross_validate(instances, areas, seed, mask, fingerprint)
    return reports


def format_ablation_table(reports: Mapping[str, EvalReport]) -> str:
    """Aligned plain-text grid: one row per feature subset."""
    label_width = max(len("features"), max(len(label) for label in reports))
    lines = [f"{'features':<{label_width}}  {'accuracy':>8}  {'macro_f':>8}"]
    for label, report in reports.items():
        lines.append(f"{label:<{label_width}}  {report.accuracy:8.4f}  {report.macro_f:8.4f}")
    return "\n".join(lines) + "\n"


def format_report(report: EvalReport) -> str:
    """Aligned plain-text summary of one evaluation."""
    width = max(len("area"), max((len(m.area) for m in report.per_area), default=4))
    lines = [
        f"evaluated      {report.evaluated}",
        f"accuracy       {report.accuracy:.4f}",
        f"macro_f        {report.macro_f:.4f}",
        f"unclassifiable {report.unclassifiable_count}",
        "",
        f"{'area':<{width}}  {'precision':>9}  {'recall':>9}  {'f1':>9}  {'support':>7}",
    ]
    for m in report.per_area:
        lines.append(
            f"{m.area:<{width}}  {m.precision:9.4f}  {m.recall:9.4f}  {m.f1:9.4f}  {m.support:7d}"
        )
    if report.fold_reports:
        lines.append("")
        for i, fold in enumerate(report.fold_reports):
            lines.append(
                f"fold {i}: evaluated {fold.evaluated}  accuracy {fold.accuracy:.4f}  macro_f {fold.macro_f:.4f}"
            )
        lines.append(
            f"fold mean: accuracy {report.fold_mean_accuracy:.4f}  macro_f {report.fold_mean_macro_f:.4f}"
        )
    return "\n".join(lines) + "\n"


def report_to_json(report: EvalReport, config: Mapping | None = None) -> str:
    payload = report.to_dict()
    if config is not None:
        payload["config"] = dict(config)
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
