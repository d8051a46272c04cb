"""Paper metadata ingestion, research-area/venue mapping, and citation graph.

The corpus layer turns raw JSON-lines metadata files into validated
:class:`Paper` records, resolves venue strings against a fixed area list to
produce the seed assignment, and inverts reference lists into a bidirectional
citation graph.  Everything built here is immutable once constructed and safe
for concurrent reads.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence

log = logging.getLogger(__name__)

SCHEMAS = ("native", "dblp")

_WS_RE = re.compile(r"\s+")


def normalize_venue(venue: str) -> str:
    """Lowercase, trim, and collapse internal whitespace for venue matching."""
    return _WS_RE.sub(" ", venue.strip().lower())


@dataclass(frozen=True)
class AreaId:
    """One research area: stable slug, display name, and position in the
    area index space (0-based, contiguous)."""

    id: str
    display_name: str
    index: int


class AreaSet:
    """Ordered list of research areas plus the venue -> area lookup.

    Venue keys are normalized once at load time; each venue may map to
    exactly one area.
    """

    def __init__(self, areas: Sequence[AreaId], venue_map: Mapping[str, AreaId]):
        self._areas = list(areas)
        self._by_id = {a.id: a for a in self._areas}
        self._venues = dict(venue_map)
        if len(self._by_id) != len(self._areas):
            raise ValueError("duplicate area ids")
        for i, a in enumerate(self._areas):
            if a.index != i:
                raise ValueError(f"area index gap: {a.id} has index {a.index}, expected {i}")

    def __len__(self) -> int:
        return len(self._areas)

    def __iter__(self) -> Iterator[AreaId]:
        return iter(self._areas)

    def __getitem__(self, index: int) -> AreaId:
        return self._areas[index]

    def by_id(self, area_id: str) -> AreaId:
        return self._by_id[area_id]

    def __contains__(self, area_id: str) -> bool:
        return area_id in self._by_id

    def area_ids(self) -> list[str]:
        return [a.id for a in self._areas]

    def venue_area(self, venue: str) -> AreaId | None:
        """Area assigned to a venue string, or None for unmapped venues."""
        return self._venues.get(normalize_venue(venue))

    @property
    def venue_count(self) -> int:
        return len(self._venues)

    @classmethod
    def from_dict(cls, payload: Mapping) -> "AreaSet":
        areas: list[AreaId] = []
        venues: dict[str, AreaId] = {}
        entries = payload.get("areas")
        if not isinstance(entries, list) or not entries:
            raise ValueError("area file must contain a non-empty 'areas' list")
        for i, entry in enumerate(entries):
            area = AreaId(id=str(entry["id"]), display_name=str(entry.get("name", entry["id"])), index=i)
            areas.append(area)
            for raw in entry.get("venues", []):
                key = normalize_venue(str(raw))
                if not key:
                    continue
                if key in venues and venues[key].id != area.id:
                    raise ValueError(f"venue {raw!r} mapped to both {venues[key].id} and {area.id}")
                venues[key] = area
        return cls(areas, venues)

    @classmethod
    def from_file(cls, path: str | Path) -> "AreaSet":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_area_set() -> AreaSet:
    """The shipped 26-area CSRankings map (abbreviated and full venue names)."""
    data = resources.files("sciarea").joinpath("data/csrankings_areas.json").read_text("utf-8")
    return AreaSet.from_dict(json.loads(data))


@dataclass
class Paper:
    """Metadata record for one paper.

    ``references`` holds outgoing citation ids; after ingestion it contains
    no duplicates and never the paper's own id.  ``abstract`` may be empty.
    """

    id: str
    title: str
    abstract: str = ""
    venue: str = ""
    year: int = 0
    references: list[str] = field(default_factory=list)

    def text(self) -> str:
        """Title and abstract joined, the unit of indexing and querying."""
        if not self.abstract:
            return self.title
        return self.title + " " + self.abstract


@dataclass
class IngestResult:
    """Validated papers plus per-line ingestion diagnostics."""

    papers: list[Paper]
    errors: list[tuple[int, str]] = field(default_factory=list)

    @property
    def error_count(self) -> int:
        return len(self.errors)


def reconstruct_abstract(inverted: Mapping[str, Sequence[int]]) -> str:
    """Rebuild the token sequence of a position-indexed abstract.

    Input maps token -> list of positions; output is the tokens joined by
    single spaces in position order.
    """
    slots: list[tuple[int, str]] = []
    for token, positions in inverted.items():
        for pos in positions:
            slots.append((int(pos), str(token)))
    slots.sort(key=lambda item: item[0])
    return " ".join(token for _, token in slots)


def _clean_references(raw, own_id: str) -> list[str]:
    refs: list[str] = []
    seen: set[str] = set()
    for r in raw:
        rid = str(r)
        if rid and rid != own_id and rid not in seen:
            seen.add(rid)
            refs.append(rid)
    return refs


def _coerce_year(value) -> int:
    if value is None:
        return 0
    if isinstance(value, bool):
        raise ValueError("year must be an integer")
    if isinstance(value, int):
        return value
    if isinstance(value, str) and value.strip().lstrip("-").isdigit():
        return int(value.strip())
    raise ValueError(f"year {value!r} is not an integer")


def _abstract_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, dict):
        return reconstruct_abstract(value)
    raise ValueError("abstract must be text or a token-position map")


def _parse_native(obj: Mapping) -> Paper:
    pid = obj.get("id")
    title = obj.get("title")
    if not isinstance(pid, str) or not pid:
        raise ValueError("missing id")
    if not isinstance(title, str) or not title.strip():
        raise ValueError("missing title")
    refs = obj.get("references", [])
    if not isinstance(refs, list):
        raise ValueError("references must be a list")
    return Paper(
        id=pid,
        title=title,
        abstract=_abstract_text(obj.get("abstract")),
        venue=str(obj.get("venue", "") or ""),
        year=_coerce_year(obj.get("year")),
        references=_clean_references(refs, pid),
    )


def _parse_dblp(obj: Mapping) -> Paper:
    # Public citation-network dumps: ids may be integers, venue may be an
    # object with a "raw" name, abstract may arrive as indexed_abstract
    # {"IndexLength": n, "InvertedIndex": {token: [positions]}}.
    pid = obj.get("id")
    if pid is None or (isinstance(pid, str) and not pid):
        raise ValueError("missing id")
    pid = str(pid)
    title = obj.get("title")
    if not isinstance(title, str) or not title.strip():
        raise ValueError("missing title")
    venue = obj.get("venue", "")
    if isinstance(venue, dict):
        venue = venue.get("raw", "") or venue.get("name", "") or ""
    abstract = obj.get("abstract")
    if abstract is None and "indexed_abstract" in obj:
        indexed = obj["indexed_abstract"]
        if isinstance(indexed, dict):
            abstract = indexed.get("InvertedIndex", indexed)
    refs = obj.get("references", []) or []
    if not isinstance(refs, list):
        raise ValueError("references must be a list")
    return Paper(
        id=pid,
        title=title,
        abstract=_abstract_text(abstract),
        venue=str(venue or ""),
        year=_coerce_year(obj.get("year")),
        references=_clean_references(refs, pid),
    )


_PARSERS = {"native": _parse_native, "dblp": _parse_dblp}


def ingest_papers(source: str | Path | IO | Iterable[str], schema: str = "native") -> IngestResult:
    """Stream a JSON-lines paper file into validated :class:`Paper` records.

    Records missing id or title are dropped and recorded with their line
    number; malformed lines likewise.  Ingestion never aborts on a bad line.
    An unknown ``schema`` selector is a fatal error.
    """
    if schema not in _PARSERS:
        raise ValueError(f"unknown schema {schema!r}; expected one of {SCHEMAS}")
    parse = _PARSERS[schema]

    close = False
    if isinstance(source, (str, Path)):
        fh: Iterable[str] = open(source, encoding="utf-8")
        close = True
    else:
        fh = source

    papers: list[Paper] = []
    errors: list[tuple[int, str]] = []
    seen_ids: set[str] = set()
    try:
        for lineno, line in enumerate(fh, start=1):
            if isinstance(line, bytes):
                line = line.decode("utf-8")
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append((lineno, f"invalid JSON: {exc.msg}"))
                continue
            if not isinstance(obj, dict):
                errors.append((lineno, "record is not a JSON object"))
                continue
            try:
                paper = parse(obj)
            except (ValueError, KeyError, TypeError) as exc:
                errors.append((lineno, str(exc)))
                continue
            if paper.id in seen_ids:
                errors.append((lineno, f"duplicate paper id {paper.id!r}"))
                continue
            seen_ids.add(paper.id)
            papers.append(paper)
    finally:
        if close:
            fh.close()  # type: ignore[union-attr]
    return IngestResult(papers=papers, errors=errors)


def serialize_papers(papers: Iterable[Paper], target: str | Path | IO) -> None:
    """Write papers as native-schema JSON lines (inverse of ingest)."""
    close = False
    if isinstance(target, (str, Path)):
        fh: IO = open(target, "w", encoding="utf-8")
        close = True
    else:
        fh = target
    try:
        for p in papers:
            record = {
                "id": p.id,
                "title": p.title,
                "abstract": p.abstract,
                "venue": p.venue,
                "year": p.year,
                "references": list(p.references),
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    finally:
        if close:
            fh.close()


def build_seed_set(papers: Sequence[Paper], areas: AreaSet) -> dict[str, AreaId]:
    """Assign every paper whose venue is mapped to that venue's area.

    Papers with unmapped venues are non-seed and absent from the result.
    Empty areas are kept in the index space (they can never win under
    positive weights) but logged as degenerate.
    """
    if areas.venue_count == 0:
        raise ValueError("venue map is empty; cannot build a seed set")
    assignment: dict[str, AreaId] = {}
    for p in papers:
        area = areas.venue_area(p.venue)
        if area is not None:
            assignment[p.id] = area
    counts = seed_counts(assignment, areas)
    for area in areas:
        if counts[area.id] == 0:
            log.warning("area %s has zero seed papers", area.id)
    return assignment


def seed_counts(assignment: Mapping[str, AreaId], areas: AreaSet) -> dict[str, int]:
    counts = {a.id: 0 for a in areas}
    for area in assignment.values():
        counts[area.id] += 1
    return counts


@dataclass
class CitationGraph:
    """Outgoing and incoming adjacency over one corpus.

    ``incoming`` is the exact inversion of ``outgoing`` restricted to ids
    present in the corpus; both sides are deduplicated.  ``dangling_count``
    reports references pointing outside the corpus (dropped from the graph).
    """

    outgoing: dict[str, list[str]]
    incoming: dict[str, list[str]]
    dangling_count: int = 0


def build_citation_graph_from_refs(refs: Mapping[str, Sequence[str]]) -> CitationGraph:
    """Invert id -> reference-list adjacency into a bidirectional graph."""
    outgoing: dict[str, list[str]] = {pid: [] for pid in refs}
    incoming: dict[str, list[str]] = {pid: [] for pid in refs}
    dangling = 0
    for pid, targets in refs.items():
        seen: set[str] = set()
        for t in targets:
            if t == pid or t in seen:
                continue
            seen.add(t)
            if t in outgoing:
                outgoing[pid].append(t)
                incoming[t].append(pid)
            else:
                dangling += 1
    return CitationGraph(outgoing=outgoing, incoming=incoming, dangling_count=dangling)


def build_citation_graph(papers: Iterable[Paper]) -> CitationGraph:
    """Citation graph over the given papers, edges restricted to the corpus."""
    return build_citation_graph_from_refs({p.id: p.references for p in papers})


def load_labels(path: str | Path) -> dict[str, str]:
    """Read gold labels from TSV lines ``paper_id<TAB>area_id``."""
    labels: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ValueError(f"{path}:{lineno}: expected 'paper_id<TAB>area_id', got {line!r}")
            pid, area = parts
            if pid in labels and labels[pid] != area:
                raise ValueError(f"{path}:{lineno}: conflicting labels for {pid!r}")
            labels[pid] = area
    return labels


def write_labels(labels: Mapping[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pid, area in labels.items():
            fh.write(f"{pid}\t{area}\n")


def venue_seed_report(papers: Sequence[Paper], assignment: Mapping[str, AreaId], areas: AreaSet) -> dict:
    """Summary counts used by the index build report."""
    counts = seed_counts(assignment, areas)
    venue_hist = Counter(normalize_venue(p.venue) for p in papers if p.id in assignment)
    return {
        "papers": len(papers),
        "seeds": len(assignment),
        "seeds_per_area": counts,
        "seed_venues": dict(sorted(venue_hist.items())),
    }
