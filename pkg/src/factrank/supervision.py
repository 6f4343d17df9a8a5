"""Noisy relevance labels from an entity-tagged corpus, and dataset assembly.

For a query fact ``r<s, t>`` only the document about ``s`` is read. Each of
its sentences that mentions ``t`` contributes the first 20 other mentioned
entities; every unordered pair drawn from those plus ``{s, t}`` that is
connected by exactly one fact makes that fact relevant. Pairs connected by
several facts are ambiguous and skipped.
"""

from __future__ import annotations

import itertools
import json
import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .enumeration import CandidateSet, EnumConfig, enumerate_candidates
from .errors import DataError
from .facts import Fact, direct_facts_between, facts_of_relationship, split_facts
from .kg import KnowledgeGraph
from .seeding import py_random

log = logging.getLogger(__name__)

MAX_CONTEXT_ENTITIES = 20
SPLITS = ("train", "validation", "test")


@dataclass(frozen=True)
class Document:
    source_entity: str
    sentences: tuple[tuple[str, ...], ...]


class Corpus:
    """Entity-linked documents keyed by their source entity."""

    def __init__(self, documents: Iterable[Document]) -> None:
        self.documents: list[Document] = []
        self._by_source: dict[str, list[Document]] = {}
        for doc in documents:
            self.documents.append(doc)
            self._by_source.setdefault(doc.source_entity, []).append(doc)

    def __len__(self) -> int:
        return len(self.documents)

    def sentences_of(self, entity: str) -> list[tuple[str, ...]]:
        return [s for d in self._by_source.get(entity, ()) for s in d.sentences]

    def unknown_entities(self, g: KnowledgeGraph) -> list[str]:
        seen = set()
        for d in self.documents:
            seen.add(d.source_entity)
            for s in d.sentences:
                seen.update(s)
        return sorted(e for e in seen if not g.has_entity(e))


def load_corpus(path: str | Path) -> Corpus:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                docs.append(Document(
                    str(rec["source_entity"]),
                    tuple(tuple(str(e) for e in sent) for sent in rec["sentences"]),
                ))
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed corpus line ({exc})") from None
    return Corpus(docs)


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in corpus.documents:
            fh.write(json.dumps({"source_entity": d.source_entity,
                                 "sentences": [list(s) for s in d.sentences]}) + "\n")


# -- labelling ----------------------------------------------------------------

def context_entities(sentence: Sequence[str], s: str, t: str, limit: int = MAX_CONTEXT_ENTITIES) -> list[str]:
    """Other entities of a sentence in first-mention order, at most ``limit``."""
    out: list[str] = []
    for e in sentence:
        if e in (s, t) or e in out:
            continue
        out.append(e)
        if len(out) == limit:
            break
    return out


def distant_matches(g: KnowledgeGraph, corpus: Corpus, f_q: Fact) -> set[Fact]:
    """Facts the corpus marks as relevant to ``f_q`` before restricting to candidates."""
    s, t = f_q.source, f_q.target
    found: set[Fact] = set()
    for sentence in corpus.sentences_of(s):
        if t not in sentence:
            continue
        pool = [s, t] + context_entities(sentence, s, t)
        pool = [e for e in pool if g.has_entity(e)]
        for e1, e2 in itertools.combinations(pool, 2):
            if e1 == e2:
                continue
            connecting = direct_facts_between(g, e1, e2)
            if len(connecting) == 1:
                found.update(connecting)
    found.discard(f_q)
    return found


def label_query_fact(g: KnowledgeGraph, corpus: Corpus, f_q: Fact, F: CandidateSet) -> frozenset[Fact]:
    """Candidates of ``F`` that distant supervision deems relevant to ``f_q``."""
    return frozenset(distant_matches(g, corpus, f_q) & set(F.candidates))


# -- dataset ----------------------------------------------------------------------

@dataclass(frozen=True)
class LabeledInstance:
    query: Fact
    candidate: Fact
    label: int
    split: str


@dataclass(frozen=True)
class DatasetConfig:
    seed: int = 0
    max_queries_per_relationship: int = 2000
    enum: EnumConfig = field(default_factory=EnumConfig)
    threads: int = 1


def split_sizes(n: int) -> tuple[int, int, int]:
    n_train = (7 * n) // 10
    n_val = n // 10
    return n_train, n_val, n - n_train - n_val


def _label_one(g, corpus, f_q, enum_cfg):
    cands = enumerate_candidates(g, f_q, enum_cfg)
    matches = distant_matches(g, corpus, f_q)
    cand_set = set(cands.candidates)
    relevant = matches & cand_set
    return cands, relevant, len(matches - cand_set)


def build_dataset(
    g: KnowledgeGraph,
    corpus: Corpus,
    relationships: Iterable[Sequence[str] | str],
    cfg: DatasetConfig | None = None,
) -> tuple[list[LabeledInstance], dict]:
    """Label, sample and split query facts for each relationship."""
    cfg = cfg or DatasetConfig()
    rels = sorted({tuple(r.split("|")) if isinstance(r, str) else tuple(r) for r in relationships})
    if not rels:
        raise DataError("no relationships given")

    instances: list[LabeledInstance] = []
    per_rel: dict[str, dict] = {}
    outside_total = 0
    for rel in rels:
        label = "|".join(rel)
        queries = facts_of_relationship(g, rel)
        if cfg.threads > 1:
            with ThreadPoolExecutor(cfg.threads) as pool:
                results = list(pool.map(lambda f: _label_one(g, corpus, f, cfg.enum), queries))
        else:
            results = [_label_one(g, corpus, f, cfg.enum) for f in queries]
        eligible = [(f, res) for f, res in zip(queries, results) if res[1]]
        outside_total += sum(res[2] for _, res in eligible)
        rng = py_random(cfg.seed, f"dataset:{label}")
        n = min(len(eligible), cfg.max_queries_per_relationship)
        chosen = rng.sample(eligible, n)
        n_train, n_val, _ = split_sizes(n)
        split_of = ["train"] * n_train + ["validation"] * n_val + ["test"] * (n - n_train - n_val)
        per_rel[label] = {"query_facts": len(queries), "eligible": len(eligible),
                          **{sp: split_of.count(sp) for sp in SPLITS}}
        for (f_q, (cands, relevant, _)), split in zip(chosen, split_of):
            for f_c in cands.candidates:
                instances.append(LabeledInstance(f_q, f_c, int(f_c in relevant), split))
        log.info("relationship %s: %d queries, %d eligible, %d kept", label, len(queries), len(eligible), n)

    stats = dataset_stats(instances)
    stats["per_relationship"] = per_rel
    stats["relevant_outside_candidates"] = outside_total
    return instances, stats


def dataset_stats(instances: Sequence[LabeledInstance]) -> dict:
    """Query and candidate counts per split, and the positive rate."""
    per_query: dict[tuple[str, Fact], int] = {}
    for inst in instances:
        key = (inst.split, inst.query)
        per_query[key] = per_query.get(key, 0) + 1
    splits = {}
    for sp in SPLITS:
        counts = [n for (s, _), n in per_query.items() if s == sp]
        splits[sp] = {
            "query_facts": len(counts),
            "candidates_average": statistics.fmean(counts) if counts else 0.0,
            "candidates_median": statistics.median(counts) if counts else 0.0,
            "candidates_max": max(counts) if counts else 0,
            "candidates_min": min(counts) if counts else 0,
        }
    positives = sum(inst.label for inst in instances)
    return {
        "splits": splits,
        "instances": len(instances),
        "relevant": positives,
        "positive_rate": positives / len(instances) if instances else 0.0,
    }


def write_dataset(instances: Iterable[LabeledInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            fh.write(f"{inst.split}\t{inst.label}\t{inst.query.key()}\t{inst.candidate.key()}\n")


def read_dataset(path: str | Path) -> list[LabeledInstance]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            try:
                split, label_s = fields[0], fields[1]
                (f_q, f_c), rest = split_facts(fields[2:], 2)
                if rest or split not in SPLITS or label_s not in ("0", "1"):
                    raise ValueError("bad split/label or trailing fields")
            except (ValueError, DataError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: malformed dataset row ({exc})") from None
            out.append(LabeledInstance(f_q, f_c, int(label_s), split))
    return out


def group_by_query(instances: Iterable[LabeledInstance], split: str | None = None) -> dict[Fact, list[LabeledInstance]]:
    """Instances per query fact, preserving file order."""
    grouped: dict[Fact, list[LabeledInstance]] = {}
    for inst in instances:
        if split is None or inst.split == split:
            grouped.setdefault(inst.query, []).append(inst)
    return grouped
