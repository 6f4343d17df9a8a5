"""Pipeline configuration: one TOML file, overridable from the command line.

Relative paths inside a config file resolve against the file's directory;
paths given as flags resolve against the working directory.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .enumeration import EnumConfig
from .errors import DataError
from .ranker import RankerConfig
from .synth import QUERY_RELATIONSHIPS, WorldParams

PATH_KEYS = ("triples", "entities", "corpus", "judgments", "dataset", "stats",
             "model", "train_log", "runs", "report", "synth_dir")

DEFAULT_PATHS = {
    "synth_dir": "world",
    "triples": "world/triples.tsv",
    "entities": "world/entities.tsv",
    "corpus": "world/corpus.jsonl",
    "judgments": "world/ground_truth.tsv",
    "dataset": "out/dataset.tsv",
    "stats": "out/dataset_stats.json",
    "model": "out/model.json",
    "train_log": "out/train_log.jsonl",
    "runs": "out/runs",
    "report": "out/report.json",
}


@dataclass
class PipelineConfig:
    seed: int = 0
    threads: int = 1
    relationships: list[str] = field(default_factory=lambda: list(QUERY_RELATIONSHIPS))
    max_queries_per_relationship: int = 2000
    split: str = "test"
    paths: dict[str, Path] = field(default_factory=lambda: {k: Path(v) for k, v in DEFAULT_PATHS.items()})
    enum: EnumConfig = field(default_factory=EnumConfig)
    ranker: RankerConfig = field(default_factory=RankerConfig)
    synth: WorldParams = field(default_factory=WorldParams)

    def path(self, key: str) -> Path:
        return self.paths[key]


def _build(cls, section: dict, where: str, **extra):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(section) - known)
    if unknown:
        raise DataError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**{**section, **extra})
    except (TypeError, ValueError) as exc:
        raise DataError(f"{where}: {exc}") from None


def load_config(path: str | Path | None = None) -> PipelineConfig:
    """Read a TOML config; ``None`` gives the defaults rooted at the cwd."""
    if path is None:
        return PipelineConfig()
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such config file: {path}")
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise DataError(f"{path}: {exc}") from None

    base = path.parent
    doc = dict(doc)
    paths_in = doc.pop("paths", {})
    unknown = sorted(set(paths_in) - set(PATH_KEYS))
    if unknown:
        raise DataError(f"{path}: unknown [paths] keys {unknown}")
    paths = {k: base / v for k, v in DEFAULT_PATHS.items()}
    paths.update({k: base / v for k, v in paths_in.items()})

    seed = int(doc.pop("seed", 0))
    enum = _build(EnumConfig, doc.pop("enum", {}), f"{path} [enum]")
    ranker_sec = doc.pop("ranker", {})
    ranker = _build(RankerConfig, ranker_sec, f"{path} [ranker]", seed=ranker_sec.get("seed", seed))
    synth_sec = doc.pop("synth", {})
    synth = _build(WorldParams, synth_sec, f"{path} [synth]", seed=synth_sec.get("seed", seed))
    dataset_sec = doc.pop("dataset", {})
    cfg = PipelineConfig(
        seed=seed,
        threads=int(doc.pop("threads", 1)),
        relationships=list(doc.pop("relationships", QUERY_RELATIONSHIPS)),
        max_queries_per_relationship=int(dataset_sec.pop("max_queries_per_relationship", 2000)),
        split=str(doc.pop("split", "test")),
        paths=paths,
        enum=enum,
        ranker=ranker,
        synth=synth,
    )
    leftovers = sorted(set(doc) | set(dataset_sec))
    if leftovers:
        raise DataError(f"{path}: unknown keys {leftovers}")
    return cfg


def with_seed(cfg: PipelineConfig, seed: int) -> PipelineConfig:
    """Propagate a root seed to every stochastic component."""
    return dataclasses.replace(
        cfg,
        seed=seed,
        ranker=dataclasses.replace(cfg.ranker, seed=seed),
        synth=dataclasses.replace(cfg.synth, seed=seed),
    )
