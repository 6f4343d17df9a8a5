"""Candidate-fact enumeration around a query fact and connecting-path search.

A *hop* moves to a non-CVT entity; stepping onto a CVT entity is free, so a
2-triple fact through a CVT is a single hop. Entities of kind ``class`` are
never expanded as intermediate neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DataError
from .facts import Fact, Path, Step, attribute_facts, facts_of_entity
from .kg import KnowledgeGraph


@dataclass(frozen=True)
class EnumConfig:
    max_candidates: int = 0  # 0 = unlimited
    max_paths_per_pair: int = 25

    def __post_init__(self) -> None:
        if self.max_candidates < 0:
            raise ValueError("max_candidates must be >= 0")
        if self.max_paths_per_pair < 1:
            raise ValueError("max_paths_per_pair must be >= 1")


@dataclass(frozen=True)
class CandidateSet:
    query: Fact
    candidates: tuple[Fact, ...]

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)


@dataclass(frozen=True)
class PathSet:
    origin: str
    paths: tuple[Path, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.paths)


def hop_neighbors(g: KnowledgeGraph, x: str) -> list[str]:
    """Raw neighbours of ``x`` plus everything reachable through CVT chains.

    CVTs themselves are included; ``x`` is not.
    """
    memo = g.memo("hop_neighbors")
    hit = memo.get(x)
    if hit is not None:
        return hit
    seen = {x}
    frontier = [x]
    out: set[str] = set()
    while frontier:
        nxt = []
        for u in frontier:
            for n in g.neighbors(u):
                if n in seen:
                    continue
                seen.add(n)
                out.add(n)
                if g.is_cvt(n):
                    nxt.append(n)
        frontier = nxt
    result = sorted(out)
    memo[x] = result
    return result


def get_facts(g: KnowledgeGraph, x: str, y: str) -> set[Fact]:
    """Facts containing both ``x`` and ``y``, plus ``y``'s attribute facts when ``y`` is a CVT."""
    found = {f for f in facts_of_entity(g, x) if y in f.entities}
    if g.is_cvt(y):
        found.update(attribute_facts(g, y))
    return found


def enumerate_candidates(g: KnowledgeGraph, f_q: Fact, cfg: EnumConfig | None = None) -> CandidateSet:
    """Facts within two hops of either endpoint of ``f_q``, excluding ``f_q``."""
    cfg = cfg or EnumConfig()
    for t in f_q.triples:
        if t not in g:
            raise DataError(f"query fact {f_q} is not in the graph")
    found: set[Fact] = set()
    for e in dict.fromkeys((f_q.source, f_q.target)):
        for n in hop_neighbors(g, e):
            found |= get_facts(g, e, n)
            if g.is_class(n):
                continue
            for n2 in hop_neighbors(g, n):
                found |= get_facts(g, n, n2)
    found.discard(f_q)
    ordered = sorted(found, key=Fact.sort_key)
    if cfg.max_candidates:
        ordered = ordered[: cfg.max_candidates]
    return CandidateSet(f_q, tuple(ordered))


# -- connecting paths -------------------------------------------------------

def _walk(g: KnowledgeGraph, origin: str, max_hops: int = 2):
    """Yield every simple path from ``origin`` using at most ``max_hops`` hops."""
    stack: list[tuple[str, tuple[Step, ...], frozenset[str], int]] = [
        (origin, (), frozenset((origin,)), 0)
    ]
    while stack:
        node, steps, visited, hops = stack.pop()
        moves = [(t.predicate, False, t.object) for t in g.out_triples(node)]
        moves += [(t.predicate, True, t.subject) for t in g.in_triples(node)]
        for pred, inv, nxt in moves:
            if nxt in visited:
                continue
            cost = hops + (0 if g.is_cvt(nxt) else 1)
            if cost > max_hops:
                continue
            new_steps = steps + (Step(pred, inv, nxt),)
            yield Path(origin, new_steps)
            stack.append((nxt, new_steps, visited | {nxt}, cost))


def _path_order(p: Path) -> tuple:
    return (len(p.steps), p.key())


def paths_from(g: KnowledgeGraph, origin: str, cfg: EnumConfig | None = None) -> dict[str, tuple[Path, ...]]:
    """All capped connecting paths from ``origin``, grouped by destination."""
    cfg = cfg or EnumConfig()
    memo = g.memo(f"paths_from:{cfg.max_paths_per_pair}")
    hit = memo.get(origin)
    if hit is not None:
        return hit
    grouped: dict[str, list[Path]] = {}
    if g.has_entity(origin):
        for p in _walk(g, origin):
            grouped.setdefault(p.destination, []).append(p)
    result = {
        d: tuple(sorted(ps, key=_path_order)[: cfg.max_paths_per_pair])
        for d, ps in sorted(grouped.items())
    }
    memo[origin] = result
    return result


def connecting_paths(
    g: KnowledgeGraph, origin: str, destinations, cfg: EnumConfig | None = None
) -> PathSet:
    """Simple paths of at most two hops from ``origin`` to any of ``destinations``."""
    if not g.has_entity(origin):
        raise DataError(f"unknown origin entity {origin!r}")
    by_dest = paths_from(g, origin, cfg)
    paths: list[Path] = []
    for d in sorted(set(destinations)):
        if d != origin:
            paths.extend(by_dest.get(d, ()))
    return PathSet(origin, tuple(paths))
