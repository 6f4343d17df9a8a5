"""Hand-crafted features for a (query fact, candidate fact) pair.

The vector has a fixed layout of ``33 + len(rel_vocab)`` slots: fact
importance (14), pair relevance (11) and miscellaneous flags plus a one-hot
of the query relationship (8 + |R|). :func:`feature_layout` names every slot.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .facts import Fact, is_attribute_fact, preds_of
from .kg import KnowledgeGraph

DEFAULT_MAX_DISTANCE = 4
NUM_FIXED_FEATURES = 33


class GraphStats:
    """Counts behind every feature formula, computed once per graph."""

    def __init__(self, g: KnowledgeGraph) -> None:
        self.num_triples = g.num_triples
        self.pred_count: Counter[str] = Counter()
        self.pred_entities: dict[str, set[str]] = {}
        self.subj_count: Counter[str] = Counter()
        self.obj_count: Counter[str] = Counter()
        self.ent_count: Counter[str] = Counter()
        self.subj_pred: Counter[tuple[str, str]] = Counter()
        self.obj_pred: Counter[tuple[str, str]] = Counter()
        for t in g.triples:
            self.pred_count[t.predicate] += 1
            self.pred_entities.setdefault(t.predicate, set()).update((t.subject, t.object))
            self.subj_count[t.subject] += 1
            self.obj_count[t.object] += 1
            self.ent_count[t.subject] += 1
            if t.object != t.subject:
                self.ent_count[t.object] += 1
            self.subj_pred[t.subject, t.predicate] += 1
            self.obj_pred[t.object, t.predicate] += 1

    def _require_triples(self) -> None:
        if self.num_triples == 0:
            raise DataError("feature statistics are undefined on an empty graph")

    def pred_freq(self, p: str) -> float:
        self._require_triples()
        return self.pred_count[p] / self.num_triples

    def ent_freq(self, e: str) -> float:
        self._require_triples()
        return self.ent_count[e] / self.num_triples

    def itf(self, p: str) -> float:
        self._require_triples()
        n = self.pred_count[p]
        return math.log(self.num_triples / n) if n else 0.0

    def pf_out(self, p: str, e: str) -> float:
        n = self.subj_count[e]
        return self.subj_pred[e, p] / n if n else 0.0

    def pf_in(self, p: str, e: str) -> float:
        n = self.obj_count[e]
        return self.obj_pred[e, p] / n if n else 0.0

    def pfitf(self, p: str, e: str, position: str) -> float:
        """PF of ``p`` at ``e`` (as ``"subject"`` or ``"object"``) times ITF of ``p``."""
        pf = self.pf_out(p, e) if position == "subject" else self.pf_in(p, e)
        return pf * self.itf(p)

    def informativeness(self, f: Fact) -> float:
        self._require_triples()
        total = 0.0
        for t in f.triples:
            total += self.pfitf(t.predicate, t.subject, "subject") + self.pfitf(t.predicate, t.object, "object")
        return total / (2 * len(f.triples))

    def pred_coocc_sim(self, p1: str, p2: str) -> float:
        return jaccard(self.pred_entities.get(p1, set()), self.pred_entities.get(p2, set()))


def graph_stats(g: KnowledgeGraph) -> GraphStats:
    memo = g.memo("graph_stats")
    if "stats" not in memo:
        memo["stats"] = GraphStats(g)
    return memo["stats"]


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    union = len(a | b)
    return len(a & b) / union if union else 0.0


# -- single formulas (graph-level entry points) ----------------------------

def pred_freq(g: KnowledgeGraph, p: str) -> float:
    return graph_stats(g).pred_freq(p)


def ent_freq(g: KnowledgeGraph, e: str) -> float:
    return graph_stats(g).ent_freq(e)


def informativeness(g: KnowledgeGraph, f: Fact) -> float:
    return graph_stats(g).informativeness(f)


def ent_type_sim(g: KnowledgeGraph, e1: str, e2: str) -> float:
    return jaccard(g.entity_types(e1), g.entity_types(e2))


def pred_coocc_sim(g: KnowledgeGraph, p1: str, p2: str) -> float:
    return graph_stats(g).pred_coocc_sim(p1, p2)


def pred_set_jaccard(f_q: Fact, f_c: Fact) -> float:
    return jaccard(preds_of(f_q), preds_of(f_c))


def distances_from(g: KnowledgeGraph, source: str, d_max: int = DEFAULT_MAX_DISTANCE) -> dict[str, int]:
    """BFS hop counts over the undirected graph, explored up to ``d_max``."""
    memo = g.memo(f"distances:{d_max}")
    hit = memo.get(source)
    if hit is not None:
        return hit
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if dist[u] >= d_max:
            continue
        for v in g.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    memo[source] = dist
    return dist


def entity_distance(g: KnowledgeGraph, e1: str, e2: str, d_max: int = DEFAULT_MAX_DISTANCE) -> int:
    """Shortest-path length; anything beyond ``d_max`` (or unreachable) is ``d_max + 1``."""
    if e1 == e2:
        return 0
    return distances_from(g, e1, d_max).get(e2, d_max + 1)


# -- the feature vector -----------------------------------------------------

def _mma(values: Sequence[float]) -> tuple[float, float, float]:
    if not values:
        return 0.0, 0.0, 0.0
    return min(values), max(values), sum(values) / len(values)


def _non_cvt(g: KnowledgeGraph, f: Fact) -> list[str]:
    return [e for e in f.entities if not g.is_cvt(e)]


def _date_slots(g: KnowledgeGraph, f: Fact) -> tuple[float, float, float]:
    attr_obj = float(g.is_date(f.target)) if is_attribute_fact(g, f) else 0.0
    return float(g.is_date(f.source)), float(g.is_date(f.target)), attr_obj


def feature_layout(rel_vocab: Sequence[str]) -> dict[str, list[int]]:
    """Slot name -> [start, stop) index range."""
    names: list[tuple[str, int]] = []
    for fam in ("pred_freq", "ent_freq"):
        for side in ("q", "c"):
            names.append((f"{fam}_{side}_min_max_avg", 3))
    names += [("informativeness_q", 1), ("informativeness_c", 1)]
    names += [
        ("ent_type_sim_min_max_avg", 3),
        ("entity_distance_min_max_avg", 3),
        ("pred_coocc_sim_min_max_avg", 3),
        ("pred_set_jaccard", 1),
        ("shares_cvt", 1),
        ("has_cvt_q", 1),
        ("has_cvt_c", 1),
        ("is_date_q_subject_tail_attr", 3),
        ("is_date_c_subject_tail_attr", 3),
        ("relationship_one_hot", len(rel_vocab)),
    ]
    layout, pos = {}, 0
    for name, width in names:
        layout[name] = [pos, pos + width]
        pos += width
    return layout


def extract_features(
    g: KnowledgeGraph,
    stats: GraphStats,
    f_q: Fact,
    f_c: Fact,
    rel_vocab: Mapping[str, int] | Sequence[str],
    d_max: int = DEFAULT_MAX_DISTANCE,
) -> np.ndarray:
    """Feature vector of length ``33 + len(rel_vocab)`` for the pair."""
    if stats.num_triples == 0:
        raise DataError("feature statistics are undefined on an empty graph")
    if not isinstance(rel_vocab, Mapping):
        rel_vocab = {r: i for i, r in enumerate(rel_vocab)}
    x = np.zeros(NUM_FIXED_FEATURES + len(rel_vocab), dtype=np.float64)

    ents_q, ents_c = _non_cvt(g, f_q), _non_cvt(g, f_c)
    preds_q, preds_c = list(f_q.relationship), list(f_c.relationship)

    # (i) importance
    x[0:3] = _mma([stats.pred_freq(p) for p in preds_q])
    x[3:6] = _mma([stats.pred_freq(p) for p in preds_c])
    x[6:9] = _mma([stats.ent_freq(e) for e in ents_q])
    x[9:12] = _mma([stats.ent_freq(e) for e in ents_c])
    x[12] = stats.informativeness(f_q)
    x[13] = stats.informativeness(f_c)

    # (ii) relevance
    x[14:17] = _mma([ent_type_sim(g, a, b) for a in ents_q for b in ents_c])
    x[17:20] = _mma([float(entity_distance(g, a, b, d_max)) for a in ents_q for b in ents_c])
    x[20:23] = _mma([stats.pred_coocc_sim(a, b) for a in preds_q for b in preds_c])
    x[23] = pred_set_jaccard(f_q, f_c)
    cvts_q = {e for e in f_q.entities if g.is_cvt(e)}
    x[24] = float(any(g.is_cvt(e) and e in cvts_q for e in f_c.entities))

    # (iii) miscellaneous
    x[25] = float(len(f_q.triples) == 2)
    x[26] = float(len(f_c.triples) == 2)
    x[27:30] = _date_slots(g, f_q)
    x[30:33] = _date_slots(g, f_c)
    idx = rel_vocab.get(f_q.label)
    if idx is not None:
        x[NUM_FIXED_FEATURES + idx] = 1.0
    return x


def write_feature_matrix(path, rows: Sequence[tuple[Fact, Fact, np.ndarray]], rel_vocab: Sequence[str]) -> None:
    """TSV of ``query, candidate, x...`` plus a ``.layout.json`` sidecar naming the slots."""
    import json
    from pathlib import Path

    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for f_q, f_c, x in rows:
            fh.write("\t".join([f_q.key(), f_c.key()] + [repr(float(v)) for v in x]) + "\n")
    sidecar = path.with_name(path.name + ".layout.json")
    with open(sidecar, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"length": NUM_FIXED_FEATURES + len(rel_vocab), "relationships": list(rel_vocab),
                   "slots": feature_layout(rel_vocab)}, fh, indent=2, sort_keys=True)
        fh.write("\n")
