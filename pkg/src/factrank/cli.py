"""Command-line pipeline: synth, ingest, build-dataset, train, rank, baseline, evaluate.

Stages talk to each other only through files named in the config.
Exit codes: 0 success, 1 usage, 2 data error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import evaluation as ev
from .config import PipelineConfig, load_config, with_seed
from .enumeration import EnumConfig
from .errors import DataError, InvariantError
from .kg import KnowledgeGraph, load_graph
from .ranker import (RankerModel, Vocab, _prepare_split, load_model, save_model,
                     score_prepared, train)
from .supervision import (DatasetConfig, build_dataset, group_by_query, load_corpus,
                          read_dataset, write_dataset)
from .synth import generate_synthetic_world, write_world

log = logging.getLogger("factrank")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _graph(cfg: PipelineConfig) -> KnowledgeGraph:
    return load_graph(cfg.path("triples"), cfg.path("entities"))


def _dataset(cfg: PipelineConfig):
    path = cfg.path("dataset")
    if not path.is_file():
        raise DataError(f"no such dataset file: {path} (run build-dataset first)")
    return read_dataset(path)


# -- subcommands ---------------------------------------------------------------

def cmd_synth(cfg: PipelineConfig) -> dict:
    world = generate_synthetic_world(cfg.synth)
    paths = write_world(world, cfg.path("synth_dir"))
    summary = {
        "entities": len(world.graph.entities),
        "triples": world.graph.num_triples,
        "predicates": len(world.graph.predicates),
        "documents": len(world.corpus),
        "judgments": len(world.judgments()),
        "files": {k: str(v) for k, v in sorted(paths.items())},
    }
    print(json.dumps(summary, sort_keys=True))
    return summary


def cmd_ingest(cfg: PipelineConfig) -> dict:
    g = _graph(cfg)
    report = {"entities": len(g.entities), "predicates": len(g.predicates), "triples": g.num_triples}
    corpus_path = cfg.path("corpus")
    if corpus_path.is_file():
        corpus = load_corpus(corpus_path)
        unknown = corpus.unknown_entities(g)
        report["documents"] = len(corpus)
        report["unknown_corpus_entities"] = len(unknown)
        if unknown:
            log.warning("corpus mentions %d entities missing from the graph, e.g. %s",
                        len(unknown), ", ".join(unknown[:5]))
    else:
        log.warning("no corpus at %s; graph checked only", corpus_path)
    print(json.dumps(report, sort_keys=True))
    return report


def cmd_build_dataset(cfg: PipelineConfig) -> dict:
    g = _graph(cfg)
    corpus = load_corpus(cfg.path("corpus"))
    ds_cfg = DatasetConfig(seed=cfg.seed, max_queries_per_relationship=cfg.max_queries_per_relationship,
                           enum=cfg.enum, threads=cfg.threads)
    instances, stats = build_dataset(g, corpus, cfg.relationships, ds_cfg)
    if not instances:
        raise DataError("no query fact has a relevant candidate; nothing to write")
    cfg.path("dataset").parent.mkdir(parents=True, exist_ok=True)
    write_dataset(instances, cfg.path("dataset"))
    _write_json(cfg.path("stats"), stats)
    print(json.dumps({"instances": stats["instances"], "positive_rate": stats["positive_rate"]}, sort_keys=True))
    return stats


def cmd_train(cfg: PipelineConfig) -> list:
    g = _graph(cfg)
    dataset = _dataset(cfg)
    vocab = Vocab.from_graph(g, sorted(set(cfg.relationships)))
    model = RankerModel(cfg.ranker, vocab, cfg.enum)
    model, history = train(model, g, dataset, cfg.ranker, threads=cfg.threads)
    cfg.path("model").parent.mkdir(parents=True, exist_ok=True)
    save_model(model, cfg.path("model"))
    with open(cfg.path("train_log"), "w", encoding="utf-8", newline="\n") as fh:
        for h in history:
            fh.write(json.dumps(dataclasses.asdict(h), sort_keys=True) + "\n")
    best = max(history, key=lambda h: h.validation_ndcg5) if history else None
    print(json.dumps({"epochs": len(history), "best_epoch": best.epoch if best else None,
                      "best_validation_ndcg5": best.validation_ndcg5 if best else None}, sort_keys=True))
    return history


def cmd_rank(cfg: PipelineConfig, name: str | None = None) -> Path:
    model = load_model(cfg.path("model"))
    g = _graph(cfg)
    dataset = _dataset(cfg)
    prepared = _prepare_split(model, g, dataset, cfg.split, cfg.threads)
    if not prepared:
        raise DataError(f"dataset has no {cfg.split!r} queries")
    name = name or model.config.feature_mode.lower()
    out = cfg.path("runs") / f"{name}.tsv"
    out.parent.mkdir(parents=True, exist_ok=True)
    ranked = [(p.query, ev.rank_by_score(zip(p.candidates, score_prepared(model, g, p).tolist())))
              for p in prepared]
    ev.write_run(out, name, ranked)
    print(json.dumps({"run": str(out), "queries": len(ranked)}, sort_keys=True))
    return out


def cmd_baseline(cfg: PipelineConfig) -> list[Path]:
    g = _graph(cfg)
    grouped = group_by_query(_dataset(cfg), cfg.split)
    if not grouped:
        raise DataError(f"dataset has no {cfg.split!r} queries")
    runs_dir = cfg.path("runs")
    runs_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for method in ev.BASELINES:
        ranked = []
        for f_q, rows in grouped.items():
            cands = [r.candidate for r in rows]
            if method == "distsup":
                ranked.append((f_q, ev.distsup_ranking(cands, {r.candidate for r in rows if r.label})))
            else:
                ranked.append((f_q, ev.baseline_ranking(g, method, f_q, cands)))
        path = runs_dir / f"{method}.tsv"
        ev.write_run(path, method, ranked)
        written.append(path)
    print(json.dumps({"runs": [str(p) for p in written]}))
    return written


def cmd_evaluate(cfg: PipelineConfig, run_paths: list[Path] | None = None) -> dict:
    if not cfg.path("judgments").is_file():
        raise DataError(f"no such judgments file: {cfg.path('judgments')}")
    judgments = ev.read_judgments(cfg.path("judgments"))
    if run_paths is None:
        run_paths = sorted(cfg.path("runs").glob("*.tsv")) if cfg.path("runs").is_dir() else []
    if not run_paths:
        raise DataError(f"no run files found under {cfg.path('runs')}")
    runs = {}
    for p in run_paths:
        if not Path(p).is_file():
            raise DataError(f"no such run file: {p}")
        method, run = ev.read_run(p)
        if method in runs:
            raise DataError(f"two run files for method {method!r}")
        runs[method] = run
    report = ev.evaluation_report(runs, judgments)
    _write_json(cfg.path("report"), report)
    print(json.dumps({m: v["overall"] for m, v in report["methods"].items()}, sort_keys=True))
    return report


# -- argument handling -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML pipeline config")
    common.add_argument("--seed", type=int, help="root seed for every stochastic stage")
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    common.add_argument("--verbose", "-v", action="count", default=0)

    parser = _Parser(prog="factrank", description="Contextual fact ranking pipeline.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="write a seeded synthetic world")
    p.add_argument("--size", choices=["tiny", "small"])
    p.add_argument("--out-dir", type=Path)

    for name, helptext in (("ingest", "load and validate graph and corpus"),
                           ("build-dataset", "distant-supervision labels and splits")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--triples", type=Path)
        p.add_argument("--entities", type=Path)
        p.add_argument("--corpus", type=Path)
        if name == "build-dataset":
            p.add_argument("--dataset", type=Path)
            p.add_argument("--stats", type=Path)
            p.add_argument("--max-queries", type=int)
            p.add_argument("--relationship", action="append", dest="relationships")

    p = sub.add_parser("train", parents=[common], help="train the ranker")
    p.add_argument("--dataset", type=Path)
    p.add_argument("--model", type=Path)
    p.add_argument("--train-log", type=Path)
    p.add_argument("--feature-mode", choices=["LF", "HF", "NFCM"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)

    p = sub.add_parser("rank", parents=[common], help="score a dataset split with a checkpoint")
    p.add_argument("--dataset", type=Path)
    p.add_argument("--model", type=Path)
    p.add_argument("--runs", type=Path)
    p.add_argument("--split", choices=["train", "validation", "test"])
    p.add_argument("--name", help="method name and run file stem (default: feature mode)")

    p = sub.add_parser("baseline", parents=[common], help="write FI/APS/AES/DistSup runs")
    p.add_argument("--dataset", type=Path)
    p.add_argument("--runs", type=Path)
    p.add_argument("--split", choices=["train", "validation", "test"])

    p = sub.add_parser("evaluate", parents=[common], help="score runs against judgments")
    p.add_argument("--judgments", type=Path)
    p.add_argument("--runs", type=Path, help="directory of run files")
    p.add_argument("--run", type=Path, action="append", help="a specific run file (repeatable)")
    p.add_argument("--report", type=Path)
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    threads = args.threads if args.threads is not None else (cfg.threads if args.config else os.cpu_count() or 1)
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    cfg = dataclasses.replace(cfg, threads=threads)

    paths = dict(cfg.paths)
    for key in ("triples", "entities", "corpus", "dataset", "stats", "model",
                "train_log", "runs", "judgments", "report"):
        val = getattr(args, key, None)
        if val is not None:
            paths[key] = val
    if getattr(args, "out_dir", None) is not None:
        paths["synth_dir"] = args.out_dir
    cfg = dataclasses.replace(cfg, paths=paths)

    if getattr(args, "size", None):
        cfg = dataclasses.replace(cfg, synth=dataclasses.replace(cfg.synth, size=args.size))
    if getattr(args, "max_queries", None) is not None:
        cfg = dataclasses.replace(cfg, max_queries_per_relationship=args.max_queries)
    if getattr(args, "relationships", None):
        cfg = dataclasses.replace(cfg, relationships=args.relationships)
    if getattr(args, "split", None):
        cfg = dataclasses.replace(cfg, split=args.split)
    ranker_over = {k: v for k, v in (("feature_mode", getattr(args, "feature_mode", None)),
                                     ("epochs", getattr(args, "epochs", None)),
                                     ("learning_rate", getattr(args, "learning_rate", None)))
                   if v is not None}
    if ranker_over:
        try:
            cfg = dataclasses.replace(cfg, ranker=dataclasses.replace(cfg.ranker, **ranker_over))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return cfg


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    cfg = resolve_config(args)
    cmd = args.command
    if cmd == "synth":
        cmd_synth(cfg)
    elif cmd == "ingest":
        cmd_ingest(cfg)
    elif cmd == "build-dataset":
        cmd_build_dataset(cfg)
    elif cmd == "train":
        cmd_train(cfg)
    elif cmd == "rank":
        cmd_rank(cfg, args.name)
    elif cmd == "baseline":
        cmd_baseline(cfg)
    elif cmd == "evaluate":
        cmd_evaluate(cfg, args.run)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except SystemExit as exc:  # argparse: --help or a bad command line
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"factrank: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"factrank: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvariantError, AssertionError) as exc:
        print(f"factrank: internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
