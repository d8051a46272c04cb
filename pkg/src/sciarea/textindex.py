"""Tokenization and the immutable inverted index over the seed collection.

Scoring follows the probabilistic ranked-retrieval formula with the +1 log
form of inverse document frequency and document-length normalization.  The
query side uses set semantics: duplicated query terms contribute once.

Construction is single-writer; a built :class:`SeedIndex` is immutable and
safe for unrestricted concurrent query evaluation.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from array import array
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping, Sequence

import numpy as np

from .corpus import AreaId, AreaSet, Paper

SNAPSHOT_FORMAT = "sciarea-index"
SNAPSHOT_VERSION = 1

# Classic minimal English stopword list used by many search engines.
STOPWORDS = frozenset(
    """a an and are as at be but by for if in into is it no not of on or such
    that the their then there these they this to was will with""".split()
)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class TokenizerConfig:
    """Analyzer switches.  ``stopwords=False`` keeps every token."""

    stopwords: bool = True


def tokenize(text: str, config: TokenizerConfig = TokenizerConfig()) -> list[str]:
    """Lowercase, split on any non-alphanumeric run, drop stopwords.

    No stemming; deterministic for a given config.
    """
    tokens = _TOKEN_RE.findall(text.lower())
    if config.stopwords:
        return [t for t in tokens if t not in STOPWORDS]
    return tokens


def query_terms(text: str, config: TokenizerConfig = TokenizerConfig()) -> list[str]:
    """Unique query terms in first-occurrence order (set semantics)."""
    return list(dict.fromkeys(tokenize(text, config)))


@dataclass(frozen=True)
class Bm25Params:
    """Length-normalization slope ``b`` in [0,1] and saturation ``k1`` >= 0."""

    b: float = 0.75
    k1: float = 1.2

    def __post_init__(self) -> None:
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0,1], got {self.b}")
        if self.k1 < 0.0:
            raise ValueError(f"k1 must be nonnegative, got {self.k1}")


def idf_value(doc_freq: int, corpus_size: int) -> float:
    """Inverse document frequency, natural log of 1 + (N - f + 0.5)/(f + 0.5).

    Strictly positive for every ``doc_freq`` in [0, N]; well defined at 0.
    """
    return math.log(1.0 + (corpus_size - doc_freq + 0.5) / (doc_freq + 0.5))


def config_fingerprint(params: Bm25Params, tokenizer: TokenizerConfig, area_ids: Sequence[str]) -> str:
    """Stable hash of everything a trained model depends on."""
    payload = json.dumps(
        {
            "b": params.b,
            "k1": params.k1,
            "stopwords": tokenizer.stopwords,
            "stopword_list": sorted(STOPWORDS) if tokenizer.stopwords else [],
            "areas": list(area_ids),
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


class SeedIndex:
    """Immutable inverted index over the seed papers with area membership.

    Postings are stored as contiguous numpy slices per term (document rows
    ascending), which keeps 100k-document indexes compact and makes query
    scoring a handful of vectorized operations per term.
    """

    def __init__(
        self,
        *,
        doc_ids: list[str],
        doc_lengths: np.ndarray,
        doc_areas: np.ndarray,
        term_to_tid: dict[str, int],
        post_offsets: np.ndarray,
        post_docs: np.ndarray,
        post_tfs: np.ndarray,
        areas: AreaSet,
        params: Bm25Params,
        tokenizer: TokenizerConfig,
    ):
        if len(doc_ids) == 0:
            raise ValueError("empty seed set: average document length is undefined")
        self._doc_ids = doc_ids
        self._id_to_row = {pid: i for i, pid in enumerate(doc_ids)}
        if len(self._id_to_row) != len(doc_ids):
            raise ValueError("duplicate document ids in seed set")
        self._doc_lengths = doc_lengths
        self._doc_areas = doc_areas
        self._term_to_tid = term_to_tid
        self._post_offsets = post_offsets
        self._post_docs = post_docs
        self._post_tfs = post_tfs
        self.areas = areas
        self.params = params
        self.tokenizer = tokenizer

        self.corpus_size = len(doc_ids)
        self.avg_doc_len = float(doc_lengths.sum()) / self.corpus_size
        self._area_sizes = np.bincount(doc_areas, minlength=len(areas)).astype(np.int64)
        # Per-document denominator constant k1*(1 - b + b*len/avg), fixed at build.
        b, k1 = params.b, params.k1
        self._len_norm = k1 * (1.0 - b + b * (doc_lengths.astype(np.float64) / self.avg_doc_len))
        self._idf_cache = None

    # -- lookups ---------------------------------------------------------

    @property
    def doc_ids(self) -> list[str]:
        return list(self._doc_ids)

    def doc_len(self, doc_id: str) -> int:
        return int(self._doc_lengths[self._id_to_row[doc_id]])

    def doc_freq(self, term: str) -> int:
        tid = self._term_to_tid.get(term)
        if tid is None:
            return 0
        return int(self._post_offsets[tid + 1] - self._post_offsets[tid])

    def postings(self, term: str) -> list[tuple[str, int]]:
        tid = self._term_to_tid.get(term)
        if tid is None:
            return []
        lo, hi = int(self._post_offsets[tid]), int(self._post_offsets[tid + 1])
        return [
            (self._doc_ids[d], int(tf))
            for d, tf in zip(self._post_docs[lo:hi], self._post_tfs[lo:hi])
        ]

    def terms(self) -> list[str]:
        return sorted(self._term_to_tid)

    def area_of(self, doc_id: str) -> AreaId:
        return self.areas[int(self._doc_areas[self._id_to_row[doc_id]])]

    def seed_areas(self) -> dict[str, AreaId]:
        """doc id -> area for every indexed seed."""
        return {pid: self.areas[int(k)] for pid, k in zip(self._doc_ids, self._doc_areas)}

    @property
    def area_sizes(self) -> np.ndarray:
        return self._area_sizes.copy()

    @property
    def fingerprint(self) -> str:
        return config_fingerprint(self.params, self.tokenizer, self.areas.area_ids())

    # -- scoring ---------------------------------------------------------

    def idf(self, term: str) -> float:
        return idf_value(self.doc_freq(term), self.corpus_size)

    def score_dense(self, terms: Sequence[str]) -> np.ndarray:
        """Similarity of a query term set against every seed document.

        Returns one float per document row; rows sharing no term stay 0.
        Terms are accumulated in the given order, so results are
        deterministic for a given query.
        """
        scores = np.zeros(self.corpus_size, dtype=np.float64)
        k1p1 = self.params.k1 + 1.0
        offsets = self._post_offsets
        for term in terms:
            tid = self._term_to_tid.get(term)
            if tid is None:
                continue
            lo, hi = offsets[tid], offsets[tid + 1]
            docs = self._post_docs[lo:hi]
            tfs = self._post_tfs[lo:hi]
            w = idf_value(hi - lo, self.corpus_size)
            scores[docs] += w * ((tfs * k1p1) / (tfs + self._len_norm[docs]))
        return scores

    def area_sums(self, dense_scores: np.ndarray) -> np.ndarray:
        """Sum the per-document score vector into one bucket per area."""
        return np.bincount(self._doc_areas, weights=dense_scores, minlength=len(self.areas))

    def row_id(self, row: int) -> str:
        return self._doc_ids[row]


def build_index(
    seed_papers: Sequence[Paper],
    assignment: Mapping[str, AreaId],
    areas: AreaSet,
    params: Bm25Params = Bm25Params(),
    tokenizer: TokenizerConfig = TokenizerConfig(),
) -> SeedIndex:
    """Index title+abstract of every seed paper under its assigned area.

    Every paper passed in must be present in ``assignment``; an empty seed
    list is a fatal error.
    """
    if not seed_papers:
        raise ValueError("empty seed set: nothing to index")

    doc_ids: list[str] = []
    lengths = array("l")
    doc_areas = array("l")
    term_to_tid: dict[str, int] = {}
    ent_tids = array("l")
    ent_docs = array("l")
    ent_tfs = array("l")

    for row, paper in enumerate(seed_papers):
        if paper.id not in assignment:
            raise ValueError(f"seed paper {paper.id!r} has no area assignment")
        tokens = tokenize(paper.text(), tokenizer)
        doc_ids.append(paper.id)
        lengths.append(len(tokens))
        doc_areas.append(assignment[paper.id].index)
        for term, tf in Counter(tokens).items():
            tid = term_to_tid.setdefault(term, len(term_to_tid))
            ent_tids.append(tid)
            ent_docs.append(row)
            ent_tfs.append(tf)

    tids = np.asarray(ent_tids, dtype=np.int64)
    docs = np.asarray(ent_docs, dtype=np.int64)
    tfs = np.asarray(ent_tfs, dtype=np.int64)

    order = np.lexsort((docs, tids))
    sorted_tids = tids[order]
    post_docs = docs[order].astype(np.int32)
    post_tfs = tfs[order].astype(np.float64)
    n_terms = len(term_to_tid)
    # offsets[t]..offsets[t+1] is term t's postings slice
    counts = np.bincount(sorted_tids, minlength=n_terms) if n_terms else np.zeros(0, np.int64)
    post_offsets = np.zeros(n_terms + 1, dtype=np.int64)
    np.cumsum(counts, out=post_offsets[1:])

    return SeedIndex(
        doc_ids=doc_ids,
        doc_lengths=np.asarray(lengths, dtype=np.int64),
        doc_areas=np.asarray(doc_areas, dtype=np.int64),
        term_to_tid=term_to_tid,
        post_offsets=post_offsets,
        post_docs=post_docs,
        post_tfs=post_tfs,
        areas=areas,
        params=params,
        tokenizer=tokenizer,
    )


def bm25_scores(paper: Paper, index: SeedIndex) -> dict[str, float]:
    """Score a query paper against every seed document sharing a term.

    Returns doc id -> similarity for documents with at least one shared
    term; absent documents have implicit score 0.
    """
    terms = query_terms(paper.text(), index.tokenizer)
    dense = index.score_dense(terms)
    rows = np.nonzero(dense)[0]
    return {index.row_id(int(r)): float(dense[r]) for r in rows}


def idf(term: str, index: SeedIndex) -> float:
    """Rarity weight of a term in the seed collection (0 for unseen terms)."""
    return index.idf(term)


# -- snapshots ------------------------------------------------------------


def save_snapshot(
    index: SeedIndex,
    target: str | Path | IO,
    seed_refs: Mapping[str, Sequence[str]] | None = None,
) -> None:
    """Write a line-oriented, self-describing snapshot of the index.

    ``seed_refs`` (seed id -> outgoing reference ids) rides along so that
    classification can count incoming citations without the original corpus
    file.  Output is byte-deterministic for identical inputs.
    """
    close = False
    if isinstance(target, (str, Path)):
        fh: IO = open(target, "w", encoding="utf-8")
        close = True
    else:
        fh = target
    refs = seed_refs or {}
    try:
        header = {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "b": index.params.b,
            "k1": index.params.k1,
            "stopwords": index.tokenizer.stopwords,
            "areas": [{"id": a.id, "name": a.display_name} for a in index.areas],
            "fingerprint": index.fingerprint,
            "docs": index.corpus_size,
        }
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for row, doc_id in enumerate(index._doc_ids):
            record = {
                "t": "d",
                "id": doc_id,
                "len": int(index._doc_lengths[row]),
                "area": int(index._doc_areas[row]),
                "refs": list(refs.get(doc_id, [])),
            }
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
        for term in sorted(index._term_to_tid):
            tid = index._term_to_tid[term]
            lo, hi = int(index._post_offsets[tid]), int(index._post_offsets[tid + 1])
            pairs = [
                [int(d), int(tf)]
                for d, tf in zip(index._post_docs[lo:hi], index._post_tfs[lo:hi])
            ]
            fh.write(
                json.dumps({"t": "t", "term": term, "p": pairs}, sort_keys=True, separators=(",", ":"))
                + "\n"
            )
    finally:
        if close:
            fh.close()


def load_snapshot(source: str | Path | IO) -> tuple[SeedIndex, dict[str, list[str]]]:
    """Rebuild an index (and the stored seed reference lists) from disk.

    Query scores against the loaded index are bit-identical to the index
    it was saved from.
    """
    close = False
    if isinstance(source, (str, Path)):
        fh: IO = open(source, encoding="utf-8")
        close = True
    else:
        fh = source
    try:
        header_line = fh.readline()
        header = json.loads(header_line)
        if header.get("format") != SNAPSHOT_FORMAT:
            raise ValueError("not an index snapshot file")
        if header.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {header.get('version')}")
        areas = AreaSet(
            [AreaId(a["id"], a.get("name", a["id"]), i) for i, a in enumerate(header["areas"])],
            {},
        )
        params = Bm25Params(b=header["b"], k1=header["k1"])
        tokenizer = TokenizerConfig(stopwords=header["stopwords"])

        doc_ids: list[str] = []
        lengths = array("l")
        doc_areas = array("l")
        refs: dict[str, list[str]] = {}
        term_to_tid: dict[str, int] = {}
        post_docs_parts: list[list[int]] = []
        post_tfs_parts: list[list[int]] = []
        counts = array("l")

        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["t"] == "d":
                doc_ids.append(rec["id"])
                lengths.append(rec["len"])
                doc_areas.append(rec["area"])
                refs[rec["id"]] = list(rec.get("refs", []))
            elif rec["t"] == "t":
                term_to_tid[rec["term"]] = len(term_to_tid)
                pairs = rec["p"]
                post_docs_parts.append([p[0] for p in pairs])
                post_tfs_parts.append([p[1] for p in pairs])
                counts.append(len(pairs))
            else:
                raise ValueError(f"unknown snapshot record type {rec['t']!r}")

        n_terms = len(term_to_tid)
        post_offsets = np.zeros(n_terms + 1, dtype=np.int64)
        np.cumsum(np.asarray(counts, dtype=np.int64), out=post_offsets[1:])
        flat_docs = [d for part in post_docs_parts for d in part]
        flat_tfs = [tf for part in post_tfs_parts for tf in part]

        index = SeedIndex(
            doc_ids=doc_ids,
            doc_lengths=np.asarray(lengths, dtype=np.int64),
            doc_areas=np.asarray(doc_areas, dtype=np.int64),
            term_to_tid=term_to_tid,
            post_offsets=post_offsets,
            post_docs=np.asarray(flat_docs, dtype=np.int32),
            post_tfs=np.asarray(flat_tfs, dtype=np.float64),
            areas=areas,
            params=params,
            tokenizer=tokenizer,
        )
        if header.get("fingerprint") and header["fingerprint"] != index.fingerprint:
            raise ValueError("snapshot fingerprint does not match its stored configuration")
        return index, refs
    finally:
        if close:
            fh.close()
