import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from factrank.cli import main
from factrank.config import load_config
from factrank.evaluation import read_judgments, read_run
from factrank.facts import direct_facts_between
from factrank.supervision import read_dataset
from factrank.synth import generate_synthetic_world

TINY_CONFIG = """
seed = {seed}
threads = 1
split = "test"
relationships = ["founderOf", "boardMemberOf", "marriage|spouse", "parentOf",
                 "starredIn", "directorOf", "educatedAt", "employment|employer"]

[paths]
synth_dir = "world"
triples = "world/triples.tsv"
entities = "world/entities.tsv"
corpus = "world/corpus.jsonl"
judgments = "world/ground_truth.tsv"
dataset = "out/dataset.tsv"
stats = "out/stats.json"
model = "out/model.json"
train_log = "out/train_log.jsonl"
runs = "out/runs"
report = "out/report.json"

[synth]
size = "tiny"
{synth_extra}

[dataset]
max_queries_per_relationship = 8

[ranker]
d_z = 8
d_p = 8
rnn_size = 8
epochs = 2
"""


def write_config(root: Path, seed=0, synth_extra="") -> Path:
    root.mkdir(parents=True, exist_ok=True)
    path = root / "pipeline.toml"
    path.write_text(TINY_CONFIG.format(seed=seed, synth_extra=synth_extra))
    return path


def sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_stage(cfg: Path, *args) -> None:
    assert main([args[0], "--config", str(cfg), *args[1:]]) == 0


def full_pipeline(cfg: Path) -> None:
    run_stage(cfg, "synth")
    run_stage(cfg, "ingest")
    run_stage(cfg, "build-dataset")
    run_stage(cfg, "baseline")
    run_stage(cfg, "train")
    run_stage(cfg, "rank")
    run_stage(cfg, "evaluate")


def outputs(root: Path) -> dict[str, str]:
    return {str(p.relative_to(root)): sha(p) for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "pipeline.toml"}


def test_ingest_toy(toy_paths, capsys):
    triples, entities = toy_paths
    assert main(["ingest", "--triples", str(triples), "--entities", str(entities),
                 "--corpus", "/nonexistent/corpus.jsonl"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert (report["entities"], report["predicates"], report["triples"]) == (8, 6, 7)


def test_ingest_counts_unknown_corpus_entities(toy_paths, tmp_path, capsys):
    triples, entities = toy_paths
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(json.dumps({"source_entity": "BillGates",
                                  "sentences": [["BillGates", "Nobody", "MSFT"]]}) + "\n")
    assert main(["ingest", "--triples", str(triples), "--entities", str(entities),
                 "--corpus", str(corpus)]) == 0
    assert json.loads(capsys.readouterr().out)["unknown_corpus_entities"] == 1


def test_missing_file_is_a_data_error(tmp_path, capsys):
    missing = tmp_path / "nope.tsv"
    assert main(["ingest", "--triples", str(missing), "--entities", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_malformed_triples(tmp_path, toy_paths, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("BillGates\tfounderOf\n")
    assert main(["ingest", "--triples", str(bad), "--entities", str(toy_paths[1])]) == 2
    assert "bad.tsv" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main(["no-such-command"]) == 1
    assert main(["train", "--epochs", "many"]) == 1
    assert main(["ingest", "--threads", "0"]) == 1


def test_missing_checkpoint(tmp_path):
    cfg = write_config(tmp_path)
    run_stage(cfg, "synth")
    run_stage(cfg, "build-dataset")
    assert main(["rank", "--config", str(cfg)]) == 2


def test_schema_mismatched_dataset(tmp_path):
    cfg = write_config(tmp_path)
    run_stage(cfg, "synth")
    (tmp_path / "out").mkdir()
    (tmp_path / "out" / "dataset.tsv").write_text("query\tcandidate\n")
    assert main(["baseline", "--config", str(cfg)]) == 2


def test_evaluate_ideal_run(tmp_path, capsys):
    judg = tmp_path / "judgments.tsv"
    judg.write_text("founderOf\ta\tb\tparentOf\ta\tc\t2\n"
                    "founderOf\ta\tb\tparentOf\ta\td\t1\n")
    run = tmp_path / "ideal.tsv"
    run.write_text("founderOf\ta\tb\tparentOf\ta\tc\t1\t3.0\tideal\n"
                   "founderOf\ta\tb\tparentOf\ta\td\t2\t2.0\tideal\n"
                   "founderOf\ta\tb\tparentOf\ta\te\t3\t1.0\tideal\n")
    report = tmp_path / "report.json"
    assert main(["evaluate", "--judgments", str(judg), "--run", str(run), "--report", str(report)]) == 0
    out = json.loads(report.read_text())
    assert out["methods"]["ideal"]["overall"]["ndcg@5"] == 1.0


def test_pipeline_writes_declared_artifacts(tmp_path):
    cfg = write_config(tmp_path)
    full_pipeline(cfg)
    runs = sorted(p.name for p in (tmp_path / "out" / "runs").glob("*.tsv"))
    assert runs == ["aes.tsv", "aps.tsv", "distsup.tsv", "fi.tsv", "nfcm.tsv"]
    log_lines = (tmp_path / "out" / "train_log.jsonl").read_text().splitlines()
    assert len(log_lines) == 2
    assert all("validation_ndcg5" in json.loads(line) for line in log_lines)
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert set(report["methods"]) == {"aes", "aps", "distsup", "fi", "nfcm"}
    # every test query ranked by every method
    test_queries = {i.query.key() for i in read_dataset(tmp_path / "out" / "dataset.tsv")
                    if i.split == "test"}
    for name in runs:
        _, run = read_run(tmp_path / "out" / "runs" / name)
        assert set(run) == test_queries


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    full_pipeline(write_config(a))
    full_pipeline(write_config(b))
    assert outputs(a) == outputs(b)
    # and re-running a stage in place changes nothing
    before = outputs(a)
    run_stage(a / "pipeline.toml", "build-dataset")
    run_stage(a / "pipeline.toml", "train")
    assert outputs(a) == before


def test_deleting_intermediates_reproduces_report(tmp_path):
    cfg = write_config(tmp_path)
    full_pipeline(cfg)
    report = sha(tmp_path / "out" / "report.json")
    for p in (tmp_path / "out").rglob("*"):
        if p.is_file():
            p.unlink()
    for stage in ("build-dataset", "baseline", "train", "rank", "evaluate"):
        run_stage(cfg, stage)
    assert sha(tmp_path / "out" / "report.json") == report


def test_seed_change_keeps_schema(tmp_path):
    stats = []
    for seed in (0, 1):
        cfg = write_config(tmp_path / str(seed), seed=seed)
        run_stage(cfg, "synth")
        run_stage(cfg, "build-dataset")
        stats.append(json.loads((tmp_path / str(seed) / "out" / "stats.json").read_text()))
    assert set(stats[0]) == set(stats[1])
    assert stats[0] != stats[1]


def test_clean_world_positive_rate_matches_plant(tmp_path):
    extra = "noise = 0.0\nmention_prob = 1.0\nexpress_prob = 1.0\nclean = true"
    cfg = write_config(tmp_path, synth_extra=extra)
    run_stage(cfg, "synth")
    run_stage(cfg, "build-dataset", "--max-queries", "2000")
    stats = json.loads((tmp_path / "out" / "stats.json").read_text())
    instances = read_dataset(tmp_path / "out" / "dataset.tsv")

    # recoverable plant: expressed anchors that single out one fact, shared across
    # queries with the same endpoints since they share sentences
    conf = load_config(cfg)
    world = generate_synthetic_world(conf.synth)
    recoverable: dict[tuple[str, str], set] = {}
    for f_q, plants in world.expressed.items():
        bucket = recoverable.setdefault((f_q.source, f_q.target), set())
        bucket.update(p.fact for p in plants if len(direct_facts_between(world.graph, *p.anchor)) == 1)
    planted = sum(1 for i in instances
                  if i.candidate in recoverable.get((i.query.source, i.query.target), ()))
    assert stats["positive_rate"] == planted / len(instances)
    judged = read_judgments(tmp_path / "world" / "ground_truth.tsv")
    assert all((i.query.key(), i.candidate.key()) in judged for i in instances if i.label)


def test_module_entry_point(toy_paths):
    triples, entities = toy_paths
    proc = subprocess.run([sys.executable, "-m", "factrank", "ingest", "--threads", "1",
                           "--triples", str(triples), "--entities", str(entities)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["triples"] == 7
