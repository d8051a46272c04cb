"""Per-area feature vectors: content similarity and citation counts.

Each paper gets three length-n arrays (n = number of areas): average
similarity to each area's seed papers, outgoing-citation counts into each
area's seeds, and incoming-citation counts from each area's seeds.  Each
array is normalized to sum to 1 across areas; an all-zero array stays
all-zero and is flagged degenerate so it contributes nothing downstream.

All functions here are pure over immutable inputs and safe to run for many
papers concurrently.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping, Sequence

import numpy as np

from .corpus import AreaId, AreaSet, CitationGraph, Paper
from .textindex import SeedIndex, query_terms

FEATURE_NAMES = ("content", "cites", "cited_by")


@dataclass(frozen=True)
class FeatureMask:
    """Which of the three features are active.  At least one must be on."""

    content: bool = True
    cites: bool = True
    cited_by: bool = True

    def __post_init__(self) -> None:
        if not (self.content or self.cites or self.cited_by):
            raise ValueError("feature mask must keep at least one feature")

    def as_tuple(self) -> tuple[bool, bool, bool]:
        return (self.content, self.cites, self.cited_by)

    @property
    def label(self) -> str:
        names = [n for n, on in zip(FEATURE_NAMES, self.as_tuple()) if on]
        if len(names) == 3:
            return "all"
        return "+".join(names)


ALL_FEATURES = FeatureMask()


@dataclass
class AreaFeatureVector:
    """Raw and normalized per-area features for one paper.

    ``degenerate`` flags, per feature, a raw vector that summed to zero
    (no text overlap with any seed, or no citations into/from the seed set).
    """

    sim_raw: np.ndarray
    cites_raw: np.ndarray
    cited_by_raw: np.ndarray
    sim_norm: np.ndarray
    cites_norm: np.ndarray
    cited_by_norm: np.ndarray
    degenerate: tuple[bool, bool, bool]

    @property
    def n_areas(self) -> int:
        return len(self.sim_norm)

    def normalized(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.sim_norm, self.cites_norm, self.cited_by_norm)

    def stacked(self) -> np.ndarray:
        """(n_areas, 3) design block: one row per area."""
        return np.column_stack(self.normalized())

    def masked(self, mask: FeatureMask) -> "AreaFeatureVector":
        """Zero out inactive features; zeroed features become degenerate."""
        if mask == ALL_FEATURES:
            return self
        zeros = np.zeros_like(self.sim_norm)
        keep = mask.as_tuple()
        raws = (self.sim_raw, self.cites_raw, self.cited_by_raw)
        norms = self.normalized()
        new_raws = [r if on else zeros for r, on in zip(raws, keep)]
        new_norms = [v if on else zeros for v, on in zip(norms, keep)]
        flags = tuple(d if on else True for d, on in zip(self.degenerate, keep))
        return AreaFeatureVector(
            sim_raw=new_raws[0],
            cites_raw=new_raws[1],
            cited_by_raw=new_raws[2],
            sim_norm=new_norms[0],
            cites_norm=new_norms[1],
            cited_by_norm=new_norms[2],
            degenerate=flags,  # type: ignore[arg-type]
        )

    @property
    def all_degenerate(self) -> bool:
        return all(self.degenerate)


def normalize(raw: np.ndarray) -> tuple[np.ndarray, bool]:
    """Proportional normalization across areas.

    Returns the vector divided by its sum (summing to 1), or the unchanged
    all-zero vector with the degenerate flag set when the sum is zero.
    Negative entries are a contract violation.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if np.any(raw < 0):
        raise ValueError("normalize expects nonnegative entries")
    total = float(raw.sum())
    if total == 0.0:
        return np.zeros_like(raw), True
    return raw / total, False


def area_similarity(paper: Paper, index: SeedIndex) -> np.ndarray:
    """Average similarity between a paper and each area's seed papers.

    Seeds sharing no term count as zero; an area with no seeds yields 0.
    """
    dense = index.score_dense(query_terms(paper.text(), index.tokenizer))
    sums = index.area_sums(dense)
    sizes = index.area_sizes.astype(np.float64)
    out = np.zeros(len(sums), dtype=np.float64)
    nonempty = sizes > 0
    out[nonempty] = sums[nonempty] / sizes[nonempty]
    return out


def citation_counts(
    paper: Paper,
    graph: CitationGraph,
    assignment: Mapping[str, AreaId],
    n_areas: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Outgoing and incoming citation counts against each area's seed set.

    ``cites[k]`` counts seeds of area k that the paper references;
    ``cited_by[k]`` counts seeds of area k referencing the paper.
    Non-seed neighbors are ignored.
    """
    cites = np.zeros(n_areas, dtype=np.int64)
    cited_by = np.zeros(n_areas, dtype=np.int64)
    for target in graph.outgoing.get(paper.id, ()):
        area = assignment.get(target)
        if area is not None:
            cites[area.index] += 1
    for source in graph.incoming.get(paper.id, ()):
        area = assignment.get(source)
        if area is not None:
            cited_by[area.index] += 1
    return cites, cited_by


def compute_features(
    paper: Paper,
    index: SeedIndex,
    graph: CitationGraph,
    assignment: Mapping[str, AreaId] | None = None,
) -> AreaFeatureVector:
    """The full feature triple for one paper against a built index/graph.

    ``assignment`` defaults to the index's own seed membership; pass it
    explicitly when classifying many papers to avoid rebuilding the map.
    """
    if assignment is None:
        assignment = index.seed_areas()
    sim_raw = area_similarity(paper, index)
    cites_raw, cited_by_raw = citation_counts(paper, graph, assignment, len(index.areas))
    sim_norm, sim_deg = normalize(sim_raw)
    cites_norm, cites_deg = normalize(cites_raw.astype(np.float64))
    cited_norm, cited_deg = normalize(cited_by_raw.astype(np.float64))
    return AreaFeatureVector(
        sim_raw=sim_raw,
        cites_raw=cites_raw,
        cited_by_raw=cited_by_raw,
        sim_norm=sim_norm,
        cites_norm=cites_norm,
        cited_by_norm=cited_norm,
        degenerate=(sim_deg, cites_deg, cited_deg),
    )


def write_feature_csv(
    rows: Sequence[tuple[str, AreaFeatureVector, AreaId | None]],
    areas: AreaSet,
    target: str | Path | IO,
) -> None:
    """Dump normalized features, one line per (paper, area) pair.

    Columns: paper_id, area_id, sim_norm, citing_norm, cited_norm, gold
    (gold is 1 on the gold area's row, 0 elsewhere, empty when unlabeled).
    """
    close = False
    if isinstance(target, (str, Path)):
        fh: IO = open(target, "w", encoding="utf-8", newline="")
        close = True
    else:
        fh = target
    try:
        writer = csv.writer(fh)
        writer.writerow(["paper_id", "area_id", "sim_norm", "citing_norm", "cited_norm", "gold"])
        for paper_id, fv, gold in rows:
            for area in areas:
                k = area.index
                writer.writerow(
                    [
                        paper_id,
                        area.id,
                        repr(float(fv.sim_norm[k])),
                        repr(float(fv.cites_norm[k])),
                        repr(float(fv.cited_by_norm[k])),
                        "" if gold is None else int(gold.index == k),
                    ]
                )
    finally:
        if close:
            fh.close()
