"""Command-line entry point: reproducible batch workflows over paper files.

Commands: build-index, train, classify, evaluate, ablate, bench-gen.
Every command is a pure function of its input files and flags; reruns on
identical inputs produce byte-identical outputs, independent of the thread
count.  All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from .corpus import (
    AreaSet,
    Paper,
    build_citation_graph_from_refs,
    build_seed_set,
    default_area_set,
    ingest_papers,
    load_labels,
    seed_counts,
)
from .evaluation import (
    LabeledInstance,
    ablation_grid,
    cross_validate,
    format_ablation_table,
    format_report,
    report_to_json,
)
from .features import compute_features
from .fusion import ConfigMismatchError, FusionModel, check_fingerprint, classify_features, train_weights
from .synthbench import MODES, Benchmark, BenchmarkConfig, generate_benchmark
from .textindex import (
    Bm25Params,
    SeedIndex,
    TokenizerConfig,
    build_index,
    load_snapshot,
    save_snapshot,
)

log = logging.getLogger("sciarea")


class CliError(RuntimeError):
    pass


def _dump(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _params_from_args(args) -> Bm25Params:
    return Bm25Params(
        b=args.b if args.b is not None else 0.75,
        k1=args.k1 if args.k1 is not None else 1.2,
    )


def _check_overrides(args, index: SeedIndex) -> None:
    """Flags repeated on consuming commands must agree with the snapshot."""
    if args.b is not None and args.b != index.params.b:
        raise CliError(f"--b {args.b} does not match the snapshot (b={index.params.b})")
    if args.k1 is not None and args.k1 != index.params.k1:
        raise CliError(f"--k1 {args.k1} does not match the snapshot (k1={index.params.k1})")
    if args.no_stopwords and index.tokenizer.stopwords:
        raise CliError("--no-stopwords does not match the snapshot (stopwords were on)")


def _ingest_or_die(path: str, schema: str) -> list[Paper]:
    if not Path(path).exists():
        raise CliError(f"papers file not found: {path}")
    result = ingest_papers(path, schema=schema)
    for lineno, message in result.errors:
        log.warning("%s:%d: %s", path, lineno, message)
    return result.papers


def _resolved_config(args, index: SeedIndex | None = None) -> dict:
    cfg = {
        "b": index.params.b if index else (args.b if args.b is not None else 0.75),
        "k1": index.params.k1 if index else (args.k1 if args.k1 is not None else 1.2),
        "stopwords": index.tokenizer.stopwords if index else not args.no_stopwords,
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", 1),
        "schema": getattr(args, "schema", "native"),
    }
    if index is not None:
        cfg["fingerprint"] = index.fingerprint
    return cfg


def _map_features(papers, index, graph, assignment, threads: int):
    """Feature vectors for many papers, input order preserved."""

    def one(paper):
        return compute_features(paper, index, graph, assignment)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, papers))
    return [one(p) for p in papers]


def _load_area_file(path: str | None) -> AreaSet:
    if path is None:
        return default_area_set()
    if not Path(path).exists():
        raise CliError(f"venue map file not found: {path}")
    return AreaSet.from_file(path)


def _labeled_instances(args, index: SeedIndex, seed_refs) -> list[LabeledInstance]:
    papers = _ingest_or_die(args.papers, args.schema)
    labels = load_labels(args.labels)
    by_id = {p.id: p for p in papers}
    missing = sorted(pid for pid in labels if pid not in by_id)
    if missing:
        raise CliError(f"labels reference unknown paper ids: {', '.join(missing)}")
    unknown_areas = sorted({a for a in labels.values() if a not in index.areas})
    if unknown_areas:
        raise CliError(f"labels use unknown area ids: {', '.join(unknown_areas)}")
    labeled = [by_id[pid] for pid in labels]
    refs = dict(seed_refs)
    refs.update({p.id: p.references for p in labeled})
    graph = build_citation_graph_from_refs(refs)
    assignment = index.seed_areas()
    feats = _map_features(labeled, index, graph, assignment, args.threads)
    return [
        LabeledInstance(paper_id=p.id, features=fv, gold=index.areas.by_id(labels[p.id]))
        for p, fv in zip(labeled, feats)
    ]


# -- commands --------------------------------------------------------------


def cmd_build_index(args) -> int:
    papers_path = Path(args.papers)
    if not papers_path.exists():
        raise CliError(f"papers file not found: {args.papers}")
    areas = _load_area_file(args.venue_map)
    result = ingest_papers(papers_path, schema=args.schema)
    for lineno, message in result.errors:
        log.warning("%s:%d: %s", args.papers, lineno, message)
    assignment = build_seed_set(result.papers, areas)
    seeds = [p for p in result.papers if p.id in assignment]
    if not seeds:
        raise CliError("empty seed set: no paper matched a mapped venue")
    params = _params_from_args(args)
    tokenizer = TokenizerConfig(stopwords=not args.no_stopwords)
    index = build_index(seeds, assignment, areas, params, tokenizer)
    save_snapshot(index, args.index, {p.id: p.references for p in seeds})
    report = {
        "command": "build-index",
        "papers_read": len(result.papers),
        "dropped_records": result.error_count,
        "seeds": len(seeds),
        "seeds_per_area": seed_counts(assignment, areas),
        "config": _resolved_config(args, index),
    }
    sys.stdout.write(_dump(report))
    return 0


def cmd_train(args) -> int:
    index, seed_refs = load_snapshot(args.index)
    _check_overrides(args, index)
    instances = _labeled_instances(args, index, seed_refs)
    model = train_weights(
        [(inst.features, inst.gold) for inst in instances],
        fingerprint=index.fingerprint,
        area_ids=index.areas.area_ids(),
    )
    model.save(args.model)
    sys.stdout.write(
        _dump({"command": "train", "beta": list(model.beta), "trained_on": model.trained_on})
    )
    return 0


def cmd_classify(args) -> int:
    index, seed_refs = load_snapshot(args.index)
    _check_overrides(args, index)
    model = FusionModel.load(args.model)
    check_fingerprint(model, index)
    papers = _ingest_or_die(args.papers, args.schema)
    refs = dict(seed_refs)
    refs.update({p.id: p.references for p in papers})
    graph = build_citation_graph_from_refs(refs)
    assignment = index.seed_areas()
    feats = _map_features(papers, index, graph, assignment, args.threads)
    area_list = list(index.areas)
    lines = ["# " + json.dumps({"command": "classify", "config": _resolved_config(args, index)}, sort_keys=True)]
    for paper, fv in zip(papers, feats):
        result = classify_features(fv, model, area_list)
        if result.predicted is None:
            lines.append(f"{paper.id}\tUNCLASSIFIABLE\t0.0\tfalse")
        else:
            score = result.scores[result.predicted.index]
            flag = "true" if result.tie_broken else "false"
            lines.append(f"{paper.id}\t{result.predicted.id}\t{score!r}\t{flag}")
    Path(args.out).write_text("\n".join(lines) + "\n", "utf-8")
    return 0


def cmd_evaluate(args) -> int:
    index, seed_refs = load_snapshot(args.index)
    _check_overrides(args, index)
    instances = _labeled_instances(args, index, seed_refs)
    report = cross_validate(instances, index.areas, seed=args.seed, fingerprint=index.fingerprint)
    out = Path(args.out)
    out.with_suffix(".json").write_text(
        report_to_json(report, config=_resolved_config(args, index)), "utf-8"
    )
    table = format_report(report)
    out.with_suffix(".txt").write_text(table, "utf-8")
    sys.stdout.write(table)
    return 0


def cmd_ablate(args) -> int:
    index, seed_refs = load_snapshot(args.index)
    _check_overrides(args, index)
    instances = _labeled_instances(args, index, seed_refs)
    grid = ablation_grid(instances, index.areas, seed=args.seed, fingerprint=index.fingerprint)
    payload = {
        "config": _resolved_config(args, index),
        "grid": {label: report.to_dict() for label, report in grid.items()},
    }
    out = Path(args.out)
    out.with_suffix(".json").write_text(_dump(payload), "utf-8")
    table = format_ablation_table(grid)
    out.with_suffix(".txt").write_text(table, "utf-8")
    sys.stdout.write(table)
    return 0


def cmd_bench_gen(args) -> int:
    config = BenchmarkConfig(
        n_areas=args.areas,
        seeds_per_area=args.seeds_per_area,
        tests_per_area=args.tests_per_area,
        mode=args.mode,
    )
    bench = generate_benchmark(config, rng_seed=args.seed)
    paths = bench.write_files(args.out)
    sys.stdout.write(
        _dump(
            {
                "command": "bench-gen",
                "seeds": len(bench.seed_papers),
                "tests": len(bench.test_papers),
                "areas": len(bench.areas),
                "mode": config.mode,
                "files": {k: str(v) for k, v in paths.items()},
            }
        )
    )
    return 0


# -- parser ----------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--b", type=float, default=None, help="length-normalization slope (default 0.75)")
    parser.add_argument("--k1", type=float, default=None, help="term-frequency saturation (default 1.2)")
    parser.add_argument("--no-stopwords", action="store_true", help="keep stopwords when tokenizing")
    parser.add_argument("--schema", choices=("native", "dblp"), default="native", help="paper file schema")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for batch scoring")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sciarea", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="index seed papers by venue-mapped area")
    p.add_argument("--papers", required=True)
    p.add_argument("--venue-map", default=None, help="area/venue JSON (default: shipped 26-area map)")
    p.add_argument("--index", required=True, help="snapshot output path")
    _add_common(p)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("train", help="fit fusion weights from labeled papers")
    p.add_argument("--index", required=True)
    p.add_argument("--papers", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True, help="model JSON output path")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classify a batch of papers")
    p.add_argument("--index", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--papers", required=True)
    p.add_argument("--out", required=True, help="predictions TSV output path")
    _add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="stratified two-fold cross-validation")
    p.add_argument("--index", required=True)
    p.add_argument("--papers", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="report path prefix (.json/.txt)")
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="cross-validate every feature subset")
    p.add_argument("--index", required=True)
    p.add_argument("--papers", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="report path prefix (.json/.txt)")
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench-gen", help="generate a synthetic labeled benchmark")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--areas", type=int, default=26)
    p.add_argument("--seeds-per-area", type=int, default=200)
    p.add_argument("--tests-per-area", type=int, default=20)
    p.add_argument("--mode", choices=MODES, default="uniform")
    p.set_defaults(func=cmd_bench_gen)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigMismatchError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
