"""Deterministic synthetic benchmarks with planted, controllable signal.

Each area gets a private token vocabulary plus a shared pool.  Seed papers
draw mostly from their own vocabulary; test papers draw a configurable
fraction of tokens from their gold area's vocabulary and get citations
planted from/to gold-area seeds.  Signal placement is controlled by
``mode``:

* ``uniform``       - every area carries both text and citation signal,
* ``complementary`` - the first half of the areas carries text signal only,
                      the second half citation signal only,
* ``noise``         - no signal at all: test tokens are uniform over the
                      global vocabulary and citations hit random seeds.

Everything is a pure function of the config and the rng seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from pathlib import Path

from .corpus import AreaId, AreaSet, Paper, serialize_papers, write_labels

MODES = ("uniform", "complementary", "noise")


@dataclass(frozen=True)
class BenchmarkConfig:
    n_areas: int = 26
    seeds_per_area: int = 200
    tests_per_area: int = 20
    vocab_per_area: int = 40
    shared_vocab: int = 400
    seed_tokens: int = 100
    test_tokens: int = 60
    seed_purity: float = 0.7
    text_signal: float = 0.6
    cites_out: int = 3
    cites_in: int = 2
    noise_cites: int = 0
    mode: str = "uniform"

    def __post_init__(self) -> None:
        for name in ("n_areas", "seeds_per_area", "tests_per_area", "vocab_per_area", "seed_tokens", "test_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("seed_purity", "text_signal"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0,1]")
        if max(self.cites_out, self.cites_in) > self.seeds_per_area:
            raise ValueError("planted citation counts cannot exceed seeds per area")

    def has_text_signal(self, area_index: int) -> bool:
        if self.mode == "noise":
            return False
        if self.mode == "complementary":
            return area_index < (self.n_areas + 1) // 2
        return True

    def has_cite_signal(self, area_index: int) -> bool:
        if self.mode == "noise":
            return False
        if self.mode == "complementary":
            return area_index >= (self.n_areas + 1) // 2
        return True


@dataclass
class Benchmark:
    areas: AreaSet
    seed_papers: list[Paper]
    test_papers: list[Paper]
    gold: dict[str, str]
    config: BenchmarkConfig

    def seed_assignment(self) -> dict[str, AreaId]:
        out: dict[str, AreaId] = {}
        for p in self.seed_papers:
            area = self.areas.venue_area(p.venue)
            assert area is not None
            out[p.id] = area
        return out

    def write_files(self, directory: str | Path) -> dict[str, Path]:
        """Write papers.jsonl (seeds then tests), areas.json, labels.tsv."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        papers_path = directory / "papers.jsonl"
        areas_path = directory / "areas.json"
        labels_path = directory / "labels.tsv"
        serialize_papers(self.seed_papers + self.test_papers, papers_path)
        import json

        payload = {
            "areas": [
                {"id": a.id, "name": a.display_name, "venues": [f"venue-{a.index}"]}
                for a in self.areas
            ]
        }
        areas_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", "utf-8")
        write_labels(self.gold, labels_path)
        return {"papers": papers_path, "areas": areas_path, "labels": labels_path}


def _paper_from_tokens(pid: str, tokens: list[str], venue: str, year: int) -> Paper:
    title = " ".join(tokens[:6])
    abstract = " ".join(tokens[6:])
    return Paper(id=pid, title=title, abstract=abstract, venue=venue, year=year)


def generate_benchmark(config: BenchmarkConfig, rng_seed: int) -> Benchmark:
    """Build seed and test papers with the configured planted signals."""
    rng = random.Random(rng_seed)
    n = config.n_areas
    areas = AreaSet(
        [AreaId(f"area{k:02d}", f"Area {k:02d}", k) for k in range(n)],
        {},
    )
    venue_map = {f"venue-{k}": areas[k] for k in range(n)}
    areas = AreaSet(list(areas), venue_map)

    area_vocab = [[f"a{k}w{j}" for j in range(config.vocab_per_area)] for k in range(n)]
    shared = [f"x{j}" for j in range(config.shared_vocab)]
    global_vocab = [t for vocab in area_vocab for t in vocab] + shared

    seed_papers: list[Paper] = []
    seeds_by_area: list[list[Paper]] = []
    for k in range(n):
        group: list[Paper] = []
        for i in range(config.seeds_per_area):
            tokens = [
                rng.choice(area_vocab[k]) if rng.random() < config.seed_purity else rng.choice(shared)
                for _ in range(config.seed_tokens)
            ]
            paper = _paper_from_tokens(f"s{k:02d}_{i:04d}", tokens, f"venue-{k}", 2000 + (i % 20))
            group.append(paper)
            seed_papers.append(paper)
        seeds_by_area.append(group)
    all_seeds = seed_papers

    test_papers: list[Paper] = []
    gold: dict[str, str] = {}
    for k in range(n):
        for i in range(config.tests_per_area):
            pid = f"t{k:02d}_{i:04d}"
            if config.has_text_signal(k):
                tokens = [
                    rng.choice(area_vocab[k]) if rng.random() < config.text_signal else rng.choice(shared)
                    for _ in range(config.test_tokens)
                ]
            else:
                tokens = [rng.choice(global_vocab) for _ in range(config.test_tokens)]
            paper = _paper_from_tokens(pid, tokens, "", 2020)

            if config.has_cite_signal(k):
                if config.cites_out:
                    paper.references.extend(
                        s.id for s in rng.sample(seeds_by_area[k], config.cites_out)
                    )
                for citer in rng.sample(seeds_by_area[k], config.cites_in):
                    citer.references.append(pid)
            elif config.mode == "noise":
                if config.cites_out:
                    paper.references.extend(s.id for s in rng.sample(all_seeds, config.cites_out))
                for citer in rng.sample(all_seeds, config.cites_in):
                    citer.references.append(pid)
            if config.noise_cites:
                extra = [s.id for s in rng.sample(all_seeds, config.noise_cites)]
                paper.references.extend(t for t in extra if t not in paper.references)

            test_papers.append(paper)
            gold[pid] = areas[k].id
    return Benchmark(
        areas=areas,
        seed_papers=seed_papers,
        test_papers=test_papers,
        gold=gold,
        config=config,
    )


def noise_config(base: BenchmarkConfig | None = None) -> BenchmarkConfig:
    """A pure-noise variant of the given config (uniform text, random cites)."""
    cfg = base or BenchmarkConfig()
    return replace(cfg, mode="noise")
