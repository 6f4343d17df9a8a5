import random

import pytest
from hypothesis import given, settings, strategies as st

from factrank.enumeration import (EnumConfig, connecting_paths, enumerate_candidates, paths_from)
from factrank.errors import DataError
from factrank.facts import Fact, all_facts
from factrank.kg import EntityKind, KnowledgeGraph, Triple

from conftest import T1, T2, T3, T4, T5, T6, T7, fact
from oracles import random_raw_graph

R, C, CL = EntityKind.REGULAR, EntityKind.CVT, EntityKind.CLASS


def test_toy_founder_query(toy):
    cands = enumerate_candidates(toy, fact(T1))
    got = set(cands.candidates)
    assert {fact(T2), fact(T3, T4), fact(T5), fact(T6), fact(T7)} <= got
    assert fact(T1) not in got
    # the literal fact universe also holds the marriageDate 2-triple fact and the bare spouse leg
    assert got == {fact(T2), fact(T3, T4), fact(T3, T5), fact(T4), fact(T5), fact(T6), fact(T7)}


def test_candidates_are_sorted_and_unique(toy):
    cands = enumerate_candidates(toy, fact(T1)).candidates
    keys = [(f.relationship, f.source, f.target, f.key()) for f in cands]
    assert keys == sorted(keys) and len(set(cands)) == len(cands)


def test_isolated_pair_has_no_candidates():
    g = KnowledgeGraph({"a": (R, ()), "b": (R, ())}, [Triple("a", "p", "b")])
    assert enumerate_candidates(g, Fact((Triple("a", "p", "b"),))).candidates == ()


def test_class_neighbour_is_not_expanded():
    # s -p-> t ; t -q-> K (class) ; K <-q- x ; x -r-> y
    ents = {"s": (R, ()), "t": (R, ()), "K": (CL, ()), "x": (R, ()), "y": (R, ())}
    triples = [Triple("s", "p", "t"), Triple("t", "q", "K"), Triple("x", "q", "K"), Triple("x", "r", "y")]
    g = KnowledgeGraph(ents, triples)
    got = set(enumerate_candidates(g, Fact((triples[0],))).candidates)
    assert got == {Fact((triples[1],))}
    # same shape with K regular expands through it
    ents["K"] = (R, ())
    g2 = KnowledgeGraph(ents, triples)
    got2 = set(enumerate_candidates(g2, Fact((triples[0],))).candidates)
    assert got2 == {Fact((triples[1],)), Fact((triples[2],))}


def test_dangling_cvt_leg_is_no_fact():
    ents = {"a": (R, ()), "b": (R, ()), "m": (C, ())}
    g = KnowledgeGraph(ents, [Triple("a", "p", "b"), Triple("a", "q", "m")])
    assert enumerate_candidates(g, Fact((Triple("a", "p", "b"),))).candidates == ()


def test_truncation_keeps_the_sorted_prefix(toy):
    full = enumerate_candidates(toy, fact(T1)).candidates
    capped = enumerate_candidates(toy, fact(T1), EnumConfig(max_candidates=3)).candidates
    assert capped == full[:3]


def test_query_must_exist(toy):
    with pytest.raises(DataError):
        enumerate_candidates(toy, Fact((Triple("BillGates", "founderOf", "PaulAllen"),)))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_brute_force_materializer(seed):
    rng = random.Random(seed)
    raw = random_raw_graph(rng)
    g = raw.graph()
    facts = raw.all_facts()
    for f_q in rng.sample(sorted(facts), min(3, len(facts))):
        got = {f.triples for f in enumerate_candidates(g, Fact(f_q)).candidates}
        assert got == raw.enumerate(f_q, facts)


def _bfs_hops(g, src):
    """Hop distance where stepping onto a CVT is free (0-1 BFS)."""
    dist = {src: 0}
    dq = [src]
    while dq:
        node = dq.pop(0)
        for n in g.neighbors(node):
            w = 0 if g.is_cvt(n) else 1
            if n not in dist or dist[node] + w < dist[n]:
                dist[n] = dist[node] + w
                if w == 0:
                    dq.insert(0, n)
                else:
                    dq.append(n)
    return dist


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_candidate_entities_within_two_hops(seed):
    rng = random.Random(seed)
    g = random_raw_graph(rng).graph()
    facts = sorted(all_facts(g), key=Fact.sort_key)
    if not facts:
        return
    f_q = rng.choice(facts)
    d_s, d_t = _bfs_hops(g, f_q.source), _bfs_hops(g, f_q.target)
    for f in enumerate_candidates(g, f_q).candidates:
        for e in f.entities:
            # a CVT entity may sit one free step beyond a hop-2 entity
            assert min(d_s.get(e, 99), d_t.get(e, 99)) <= 3


def test_deterministic_across_triple_order():
    raw = random_raw_graph(random.Random(7))
    g1 = raw.graph()
    shuffled = list(raw.triples)
    random.Random(1).shuffle(shuffled)
    g2 = KnowledgeGraph(raw.entities, shuffled)
    for f in sorted(all_facts(g1), key=Fact.sort_key)[:10]:
        assert enumerate_candidates(g1, f) == enumerate_candidates(g2, f)


# -- connecting paths ---------------------------------------------------------

def test_toy_paths(toy):
    ps = connecting_paths(toy, "MSFT", {"PaulAllen"})
    assert [p.key() for p in ps.paths] == ["MSFT ^founderOf PaulAllen"]
    ps = connecting_paths(toy, "BillGates", {"MelindaGates"})
    assert "BillGates marriage M1 spouse MelindaGates" in [p.key() for p in ps.paths]
    assert connecting_paths(toy, "MSFT", {"MSFT"}).paths == ()


def _brute_paths(raw, origin, max_hops=2):
    kinds = {e: k for e, (k, _) in raw.entities.items()}
    moves = [(t.subject, t.predicate, False, t.object) for t in raw.triples]
    moves += [(t.object, t.predicate, True, t.subject) for t in raw.triples]
    out = set()
    frontier = [((origin,), (), 0)]
    while frontier:  # CVT steps are free, so run until no simple path extends
        nxt = []
        for ents, steps, hops in frontier:
            for a, p, inv, b in moves:
                if a != ents[-1] or b in ents:
                    continue
                cost = hops + (0 if kinds[b] == EntityKind.CVT else 1)
                if cost > max_hops:
                    continue
                item = (ents + (b,), steps + ((p, inv),), cost)
                out.add((item[0], item[1]))
                nxt.append(item)
        frontier = nxt
    return out


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_paths_match_brute_force_when_uncapped(seed):
    rng = random.Random(seed)
    raw = random_raw_graph(rng, max_triples=40)
    g = raw.graph()
    origin = rng.choice(sorted(raw.entities))
    got = paths_from(g, origin, EnumConfig(max_paths_per_pair=10**6))
    flat = {(p.entities, tuple((s.predicate, s.inverse) for s in p.steps))
            for ps in got.values() for p in ps}
    assert flat == _brute_paths(raw, origin)
    for ps in got.values():
        for p in ps:
            assert len(set(p.entities)) == len(p.entities)


def test_path_cap_per_destination():
    ents = {"o": (R, ()), "d": (R, ())}
    ents.update({f"m{i}": (R, ()) for i in range(6)})
    triples = [Triple("o", f"p{i}", "d") for i in range(4)]
    for i in range(6):
        triples += [Triple("o", "a", f"m{i}"), Triple(f"m{i}", "b", "d")]
    g = KnowledgeGraph(ents, triples)
    capped = connecting_paths(g, "o", {"d"}, EnumConfig(max_paths_per_pair=5)).paths
    full = connecting_paths(g, "o", {"d"}, EnumConfig(max_paths_per_pair=100)).paths
    assert len(full) == 10 and len(capped) == 5
    # shorter paths first, then lexicographic
    assert [p.key() for p in capped] == ["o p0 d", "o p1 d", "o p2 d", "o p3 d", "o a m0 b d"]
