"""Ranking metrics, significance testing, heuristic baselines and run files.

Graded metrics use gain ``2**grade - 1`` with a ``log2(rank + 1)`` discount.
MAP and MRR binarize grades (``grade >= 1`` is relevant). Queries without any
relevant judged candidate are left out of metric means.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from scipy import special

from .errors import DataError
from .facts import Fact, split_facts
from .features import ent_type_sim, graph_stats, informativeness
from .kg import KnowledgeGraph

METRICS = ("map", "ndcg@5", "ndcg@10", "mrr")
BASELINES = ("fi", "aps", "aes", "distsup")

Judgments = Mapping[tuple[str, str], int]


# -- per-list metrics -------------------------------------------------------

def dcg(grades: Sequence[float], k: int) -> float:
    return sum((2.0 ** g - 1.0) / math.log2(i + 2) for i, g in enumerate(grades[:k]))


def ndcg_at(grades: Sequence[float], k: int, ideal: Sequence[float] | None = None) -> float:
    """NDCG@k of grades listed in rank order.

    ``ideal`` is the full set of judged grades for the query; it defaults to
    ``grades`` itself.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    best = dcg(sorted(grades if ideal is None else ideal, reverse=True), k)
    if best <= 0:
        return 0.0
    return dcg(grades, k) / best


def average_precision(relevant: Sequence[bool], num_relevant: int | None = None) -> float:
    total = sum(1 for r in relevant if r) if num_relevant is None else num_relevant
    if total == 0:
        return 0.0
    hits, acc = 0, 0.0
    for i, r in enumerate(relevant, start=1):
        if r:
            hits += 1
            acc += hits / i
    return acc / total


def reciprocal_rank(relevant: Sequence[bool]) -> float:
    for i, r in enumerate(relevant, start=1):
        if r:
            return 1.0 / i
    return 0.0


# -- run-level metrics --------------------------------------------------------

Run = Mapping[str, Sequence[str]]  # query key -> candidate keys in rank order


def _judged_by_query(judgments: Judgments) -> dict[str, dict[str, int]]:
    by_q: dict[str, dict[str, int]] = defaultdict(dict)
    for (q, c), grade in judgments.items():
        if grade not in (0, 1, 2):
            raise DataError(f"grade must be 0, 1 or 2, got {grade!r}")
        by_q[q][c] = grade
    return by_q


def per_query_metrics(run: Run, judgments: Judgments) -> dict[str, dict[str, float]]:
    """Metric values for every query that has at least one relevant judgment."""
    if not run:
        raise DataError("empty run")
    by_q = _judged_by_query(judgments)
    out: dict[str, dict[str, float]] = {}
    for q in sorted(run):
        judged = by_q.get(q, {})
        n_rel = sum(1 for g in judged.values() if g >= 1)
        if n_rel == 0:
            continue
        grades = [judged.get(c, 0) for c in run[q]]
        rel = [g >= 1 for g in grades]
        ideal = list(judged.values())
        out[q] = {
            "map": average_precision(rel, n_rel),
            "ndcg@5": ndcg_at(grades, 5, ideal),
            "ndcg@10": ndcg_at(grades, 10, ideal),
            "mrr": reciprocal_rank(rel),
        }
    return out


def _mean_metric(run: Run, judgments: Judgments, name: str) -> float:
    values = [m[name] for m in per_query_metrics(run, judgments).values()]
    return sum(values) / len(values) if values else 0.0


def map_metric(run: Run, judgments: Judgments) -> float:
    return _mean_metric(run, judgments, "map")


def mrr_metric(run: Run, judgments: Judgments) -> float:
    return _mean_metric(run, judgments, "mrr")


def ndcg_metric(run: Run, judgments: Judgments, k: int) -> float:
    return _mean_metric(run, judgments, f"ndcg@{k}")


# -- significance ---------------------------------------------------------------

@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    p_value: float
    degenerate: bool = False


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Paired two-tailed t-test on per-query values in matching order."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least two queries")
    diffs = [x - y for x, y in zip(a, b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, True)
        return TTestResult(math.copysign(math.inf, mean), 0.0, True)
    t = mean / math.sqrt(var / n)
    p = 2.0 * special.stdtr(n - 1, -abs(t))
    return TTestResult(t, min(1.0, p))


# -- heuristic baselines --------------------------------------------------------

def baseline_fi(g: KnowledgeGraph, f_q: Fact, f_c: Fact) -> float:
    """Informativeness of the candidate; ignores the query."""
    return informativeness(g, f_c)


def baseline_aps(g: KnowledgeGraph, f_q: Fact, f_c: Fact) -> float:
    stats = graph_stats(g)
    sims = [stats.pred_coocc_sim(p1, p2) for p1 in f_q.relationship for p2 in f_c.relationship]
    return sum(sims) / len(sims)


def baseline_aes(g: KnowledgeGraph, f_q: Fact, f_c: Fact) -> float:
    ents_q = [e for e in f_q.entities if not g.is_cvt(e)]
    ents_c = [e for e in f_c.entities if not g.is_cvt(e)]
    sims = [ent_type_sim(g, a, b) for a in ents_q for b in ents_c]
    return sum(sims) / len(sims) if sims else 0.0


BASELINE_FUNCS = {"fi": baseline_fi, "aps": baseline_aps, "aes": baseline_aes}


def rank_by_score(scored: Iterable[tuple[Fact, float]]) -> list[tuple[Fact, float]]:
    """Sort by score descending, ties by serialized fact."""
    return sorted(scored, key=lambda fs: (-fs[1], fs[0].key()))


def baseline_ranking(g: KnowledgeGraph, method: str, f_q: Fact, candidates: Iterable[Fact]) -> list[tuple[Fact, float]]:
    fn = BASELINE_FUNCS[method]
    return rank_by_score((f_c, fn(g, f_q, f_c)) for f_c in candidates)


def distsup_ranking(candidates: Iterable[Fact], positives: set[Fact]) -> list[tuple[Fact, float]]:
    """Replay distant-supervision labels as a run: 1 for labelled positives, 0 otherwise."""
    return rank_by_score((f, 1.0 if f in positives else 0.0) for f in candidates)


# -- files ------------------------------------------------------------------------

@dataclass(frozen=True)
class RunRow:
    query: Fact
    candidate: Fact
    rank: int
    score: float
    method: str


def write_run(path: str | Path, method: str, ranked: Iterable[tuple[Fact, Sequence[tuple[Fact, float]]]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for f_q, ranking in ranked:
            for i, (f_c, score) in enumerate(ranking, start=1):
                fh.write(f"{f_q.key()}\t{f_c.key()}\t{i}\t{float(score)!r}\t{method}\n")


def read_run(path: str | Path) -> tuple[str, dict[str, list[str]]]:
    """Return ``(method, {query key: candidate keys in rank order})``."""
    rows: dict[str, list[tuple[int, str]]] = defaultdict(list)
    methods = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.rstrip("\n").split("\t")
            if not line.strip():
                continue
            try:
                (f_q, f_c), rest = split_facts(fields, 2)
                rank_s, score_s, method = rest
                rows[f_q.key()].append((int(rank_s), f_c.key()))
                float(score_s)
            except (ValueError, DataError) as exc:
                raise DataError(f"{path}:{lineno}: malformed run row ({exc})") from None
            methods.add(method)
    if len(methods) > 1:
        raise DataError(f"{path}: mixed methods {sorted(methods)}")
    run = {q: [c for _, c in sorted(v)] for q, v in rows.items()}
    return (methods.pop() if methods else Path(path).stem), run


def write_judgments(path: str | Path, judgments: Iterable[tuple[Fact, Fact, int]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for f_q, f_c, grade in judgments:
            fh.write(f"{f_q.key()}\t{f_c.key()}\t{grade}\n")


def read_judgments(path: str | Path) -> dict[tuple[str, str], int]:
    out: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            try:
                (f_q, f_c), rest = split_facts(fields, 2)
                (grade_s,) = rest
                grade = int(grade_s)
            except (ValueError, DataError) as exc:
                raise DataError(f"{path}:{lineno}: malformed judgment ({exc})") from None
            if grade not in (0, 1, 2):
                raise DataError(f"{path}:{lineno}: grade must be 0, 1 or 2")
            out[f_q.key(), f_c.key()] = grade
    return out


# -- report -------------------------------------------------------------------

def _relationship_of(query_key: str) -> str:
    return query_key.split("\t", 1)[0]


def evaluation_report(runs: Mapping[str, Run], judgments: Judgments) -> dict:
    """Overall and per-relationship means, per-query values and pairwise t-tests."""
    per_method = {m: per_query_metrics(run, judgments) for m, run in sorted(runs.items())}
    report: dict = {"metrics": list(METRICS), "methods": {}, "significance": {}}
    for m, pq in per_method.items():
        overall = {name: _mean([v[name] for v in pq.values()]) for name in METRICS}
        by_rel: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
        for q, vals in pq.items():
            for name in METRICS:
                by_rel[_relationship_of(q)][name].append(vals[name])
        report["methods"][m] = {
            "num_queries": len(pq),
            "overall": overall,
            "per_relationship": {
                r: {name: _mean(v) for name, v in sorted(d.items())} for r, d in sorted(by_rel.items())
            },
            "per_query": {q: pq[q] for q in sorted(pq)},
        }
    for a, b in itertools.combinations(sorted(per_method), 2):
        common = sorted(set(per_method[a]) & set(per_method[b]))
        entry = {}
        for name in METRICS:
            if len(common) < 2:
                entry[name] = None
                continue
            res = paired_ttest([per_method[a][q][name] for q in common], [per_method[b][q][name] for q in common])
            entry[name] = {"t": _finite(res.t_statistic), "p": res.p_value, "degenerate": res.degenerate}
        report["significance"][f"{a} vs {b}"] = entry
    return report


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _finite(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")
