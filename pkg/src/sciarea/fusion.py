"""Linear fusion of the three normalized features and argmax classification.

The three weights are fit by ordinary least squares between combined score
vectors and one-hot gold-area targets: every training paper contributes one
design row per area (its normalized feature triple for that area) with
target 1 on the gold area and 0 elsewhere.  Classification evaluates the
weighted sum per area and returns the area with the maximal score, ties
broken toward the lowest area index.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import AreaId, CitationGraph, Paper
from .features import ALL_FEATURES, AreaFeatureVector, FeatureMask, compute_features
from .textindex import SeedIndex

log = logging.getLogger(__name__)


class ConfigMismatchError(RuntimeError):
    """A model is being used against an index built with other settings."""


@dataclass(frozen=True)
class FusionModel:
    """The three trained weights plus the configuration they were fit under.

    ``config_fingerprint`` must match the runtime index before any
    classification; mixing models and indexes is a fatal error.
    """

    beta: tuple[float, float, float]
    trained_on: int
    config_fingerprint: str
    areas: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.beta) != 3:
            raise ValueError("beta must have exactly 3 entries")
        if not all(np.isfinite(self.beta)):
            raise ValueError("beta entries must be finite")

    def beta_array(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "beta": list(self.beta),
            "trained_on": self.trained_on,
            "config_fingerprint": self.config_fingerprint,
            "areas": list(self.areas),
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "FusionModel":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(
            beta=tuple(float(x) for x in payload["beta"]),
            trained_on=int(payload["trained_on"]),
            config_fingerprint=str(payload["config_fingerprint"]),
            areas=tuple(payload["areas"]),
        )


@dataclass
class ClassificationResult:
    """Per-area fused scores and the argmax decision.

    ``predicted`` is None for the explicit unclassifiable outcome: a paper
    whose three feature vectors are all degenerate carries no evidence, and
    defaulting to an arbitrary area would bias per-area metrics.
    """

    scores: np.ndarray
    predicted: AreaId | None
    tie_broken: bool

    @property
    def unclassifiable(self) -> bool:
        return self.predicted is None


def fuse(features: AreaFeatureVector, model: FusionModel, mask: FeatureMask = ALL_FEATURES) -> np.ndarray:
    """Weighted sum of the normalized features, one score per area."""
    fv = features.masked(mask)
    b1, b2, b3 = model.beta
    return b1 * fv.sim_norm + b2 * fv.cites_norm + b3 * fv.cited_by_norm


def decide(scores: np.ndarray) -> tuple[int, bool]:
    """Argmax with lowest-index tie break; reports whether a tie occurred."""
    winner = int(np.argmax(scores))
    ties = int(np.count_nonzero(scores == scores[winner]))
    return winner, ties > 1


def classify_features(
    features: AreaFeatureVector,
    model: FusionModel,
    areas: Sequence[AreaId],
    mask: FeatureMask = ALL_FEATURES,
) -> ClassificationResult:
    """Decision for a paper whose features are already computed."""
    fv = features.masked(mask)
    if fv.all_degenerate:
        return ClassificationResult(
            scores=np.zeros(len(areas), dtype=np.float64), predicted=None, tie_broken=False
        )
    scores = fuse(fv, model)
    winner, tie = decide(scores)
    return ClassificationResult(scores=scores, predicted=areas[winner], tie_broken=tie)


def classify(
    paper: Paper,
    index: SeedIndex,
    graph: CitationGraph,
    model: FusionModel,
    mask: FeatureMask = ALL_FEATURES,
    assignment: Mapping[str, AreaId] | None = None,
) -> ClassificationResult:
    """Run the full decision loop for one paper.

    Computes the per-area similarity averages and citation counts,
    normalizes each, fuses them under the trained weights, and takes the
    argmax.  Deterministic for fixed inputs.
    """
    check_fingerprint(model, index)
    features = compute_features(paper, index, graph, assignment)
    return classify_features(features, model, list(index.areas), mask)


def check_fingerprint(model: FusionModel, index: SeedIndex) -> None:
    if model.config_fingerprint != index.fingerprint:
        raise ConfigMismatchError(
            "model fingerprint "
            f"{model.config_fingerprint} does not match index fingerprint {index.fingerprint}"
        )


def train_weights(
    rows: Sequence[tuple[AreaFeatureVector, AreaId]],
    fingerprint: str = "",
    area_ids: Sequence[str] = (),
    mask: FeatureMask = ALL_FEATURES,
) -> FusionModel:
    """Fit the three weights by least squares against one-hot targets.

    Stacks one design row per (paper, area) pair and solves the normal
    equations; a singular Gram matrix falls back to the minimum-norm
    pseudo-inverse solution with a warning.  Masked-out features are zeroed
    before training and receive weight 0.
    """
    if not rows:
        raise ValueError("training requires at least one labeled instance")
    blocks = []
    targets = []
    for fv, gold in rows:
        fv = fv.masked(mask)
        blocks.append(fv.stacked())
        y = np.zeros(fv.n_areas, dtype=np.float64)
        y[gold.index] = 1.0
        targets.append(y)
    design = np.vstack(blocks)
    target = np.concatenate(targets)
    if not design.any():
        raise ValueError("every training row is degenerate; nothing to fit")

    active = [i for i, on in enumerate(mask.as_tuple()) if on]
    x = design[:, active]
    gram = x.T @ x
    rhs = x.T @ target
    if np.linalg.matrix_rank(gram) == len(active):
        solution = np.linalg.solve(gram, rhs)
    else:
        log.warning("singular Gram matrix; using minimum-norm least-squares solution")
        warnings.warn("singular Gram matrix; using minimum-norm solution", RuntimeWarning)
        solution = np.linalg.pinv(gram) @ rhs
    beta = np.zeros(3, dtype=np.float64)
    beta[active] = solution
    return FusionModel(
        beta=(float(beta[0]), float(beta[1]), float(beta[2])),
        trained_on=len(rows),
        config_fingerprint=fingerprint,
        areas=tuple(area_ids),
    )
