import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from factrank.enumeration import enumerate_candidates
from factrank.errors import DataError
from factrank.facts import Fact
from factrank.kg import EntityKind, KnowledgeGraph, Triple
from factrank.supervision import (Corpus, DatasetConfig, Document, build_dataset, context_entities,
                                  distant_matches, label_query_fact, load_corpus, read_dataset,
                                  split_sizes, write_corpus, write_dataset)

from conftest import T1, T2, T6, fact

R = EntityKind.REGULAR


def corpus(source, *sentences):
    return Corpus([Document(source, tuple(tuple(s) for s in sentences))])


def with_triples(toy, *extra):
    ents = {e: (toy.kind(e), tuple(toy.declared_types(e))) for e in toy.entities}
    return KnowledgeGraph(ents, list(toy.triples) + list(extra))


# Hand-built fixtures with exact expected label sets.

def uniqueness_case(toy):
    c = corpus("BillGates", ["BillGates", "PaulAllen", "MSFT"])
    return toy, c, fact(T1), {fact(T2)}


def ambiguity_case(toy):
    g = with_triples(toy, Triple("PaulAllen", "boardMemberOf", "MSFT"))
    c = corpus("BillGates", ["BillGates", "PaulAllen", "MSFT"])
    return g, c, fact(T1), set()


def truncation_case():
    ents = {"s": (R, ()), "t": (R, ())}
    ents.update({f"e{i:02d}": (R, ()) for i in range(25)})
    triples = [Triple("s", "q", "t")] + [Triple("t", "r", f"e{i:02d}") for i in range(25)]
    g = KnowledgeGraph(ents, triples)
    # reverse mention order, s and t interleaved, one repeat
    mentions = ["e24", "s", "e23", "t"] + [f"e{i:02d}" for i in range(22, -1, -1)] + ["e24"]
    c = corpus("s", mentions)
    kept = [f"e{i:02d}" for i in range(24, 4, -1)]  # first 20 distinct others
    expected = {Fact((Triple("t", "r", e),)) for e in kept}
    return g, c, Fact((triples[0],)), expected


def test_uniqueness_rule(toy):
    g, c, f_q, expected = uniqueness_case(toy)
    F = enumerate_candidates(g, f_q)
    assert label_query_fact(g, c, f_q, F) == expected


def test_ambiguous_pair_is_skipped(toy):
    g, c, f_q, expected = ambiguity_case(toy)
    F = enumerate_candidates(g, f_q)
    assert label_query_fact(g, c, f_q, F) == expected


def test_context_is_truncated_to_twenty():
    g, c, f_q, expected = truncation_case()
    F = enumerate_candidates(g, f_q)
    got = label_query_fact(g, c, f_q, F)
    assert got == expected and len(got) == 20


def test_context_entities_order():
    sent = ["a", "s", "b", "a", "t", "c"]
    assert context_entities(sent, "s", "t") == ["a", "b", "c"]
    assert context_entities(sent, "s", "t", limit=2) == ["a", "b"]


def test_sentences_without_target_are_ignored(toy):
    c = corpus("BillGates", ["BillGates", "PaulAllen", "D1975"])
    assert label_query_fact(toy, c, fact(T1), enumerate_candidates(toy, fact(T1))) == frozenset()


def test_missing_document(toy):
    c = corpus("PaulAllen", ["PaulAllen", "MSFT", "D1975"])
    assert label_query_fact(toy, c, fact(T1), enumerate_candidates(toy, fact(T1))) == frozenset()


def test_query_fact_is_never_labelled(toy):
    c = corpus("BillGates", ["BillGates", "MSFT", "D1975"])
    got = distant_matches(toy, c, fact(T1))
    assert fact(T1) not in got and got == {fact(T6)}


def test_matches_outside_candidates_are_dropped(toy):
    # F restricted to a subset: the label set is intersected with it
    c = corpus("BillGates", ["BillGates", "PaulAllen", "MSFT", "D1975"])
    F = enumerate_candidates(toy, fact(T1))
    small = type(F)(F.query, tuple(f for f in F.candidates if f != fact(T6)))
    assert label_query_fact(toy, c, fact(T1), small) == {fact(T2)}


def test_split_sizes():
    assert split_sizes(3) == (2, 0, 1)
    assert split_sizes(10) == (7, 1, 2)
    assert split_sizes(0) == (0, 0, 0)


def filter_case(toy):
    """founderOf has two query facts, only BillGates's has a labelled candidate."""
    c = Corpus([Document("BillGates", (("BillGates", "MSFT", "D1975"),)),
                Document("PaulAllen", (("PaulAllen", "BillGates"),))])
    return toy, c


def test_queries_without_relevant_candidates_are_dropped(toy):
    g, c = filter_case(toy)
    inst, stats = build_dataset(g, c, ["founderOf"], DatasetConfig(seed=0))
    assert {i.query for i in inst} == {fact(T1)}
    assert {i.candidate for i in inst if i.label} == {fact(T6)}
    assert stats["per_relationship"]["founderOf"]["eligible"] == 1
    assert stats["relevant"] == 1 and stats["instances"] == len(enumerate_candidates(g, fact(T1)))


def test_relationship_without_eligible_queries_contributes_nothing(toy):
    g, c = filter_case(toy)
    inst, stats = build_dataset(g, c, ["founderOf", "parentOf"], DatasetConfig(seed=0))
    assert all(i.query.label == "founderOf" for i in inst)
    assert stats["per_relationship"]["parentOf"]["eligible"] == 0


def test_empty_relationship_set(toy):
    with pytest.raises(DataError):
        build_dataset(toy, Corpus([]), [], DatasetConfig())


def test_dataset_invariants_and_determinism(tmp_path):
    from factrank.synth import QUERY_RELATIONSHIPS, generate_synthetic_world
    world = generate_synthetic_world(seed=2, size="tiny")
    cfg = DatasetConfig(seed=11, max_queries_per_relationship=6)
    inst, stats = build_dataset(world.graph, world.corpus, QUERY_RELATIONSHIPS, cfg)
    inst2, _ = build_dataset(world.graph, world.corpus, QUERY_RELATIONSHIPS, cfg)
    write_dataset(inst, tmp_path / "a.tsv")
    write_dataset(inst2, tmp_path / "b.tsv")
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()
    assert read_dataset(tmp_path / "a.tsv") == inst
    cand_cache = {}
    for i in inst:
        if i.query not in cand_cache:
            cand_cache[i.query] = set(enumerate_candidates(world.graph, i.query).candidates)
        assert i.candidate in cand_cache[i.query]
    for rel, counts in stats["per_relationship"].items():
        kept = counts["train"] + counts["validation"] + counts["test"]
        assert kept == min(6, counts["eligible"])
        assert (counts["train"], counts["validation"], counts["test"]) == split_sizes(kept)
    assert stats["positive_rate"] == sum(i.label for i in inst) / len(inst)
    threaded, _ = build_dataset(world.graph, world.corpus, QUERY_RELATIONSHIPS,
                                DatasetConfig(seed=11, max_queries_per_relationship=6, threads=3))
    assert threaded == inst
    other, _ = build_dataset(world.graph, world.corpus, QUERY_RELATIONSHIPS,
                             DatasetConfig(seed=12, max_queries_per_relationship=6))
    assert {i.query for i in other} != {i.query for i in inst} or other != inst


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_adding_a_sentence_never_removes_labels(seed):
    rng = random.Random(seed)
    from oracles import random_raw_graph
    raw = random_raw_graph(rng, max_triples=60)
    g = raw.graph()
    facts = sorted(raw.all_facts())
    if not facts:
        return
    f_q = Fact(rng.choice(facts))
    s, t = f_q.source, f_q.target
    ents = sorted(raw.entities)
    sentences = [[t] + rng.sample(ents, min(4, len(ents))) for _ in range(rng.randint(1, 3))]
    extra = [t] + rng.sample(ents, min(5, len(ents)))
    before = distant_matches(g, corpus(s, *sentences), f_q)
    after = distant_matches(g, corpus(s, *sentences, extra), f_q)
    assert before <= after


def test_corpus_io(tmp_path):
    c = Corpus([Document("BillGates", (("BillGates", "MSFT"), ("PaulAllen",)))])
    write_corpus(c, tmp_path / "c.jsonl")
    back = load_corpus(tmp_path / "c.jsonl")
    assert back.documents == c.documents
    (tmp_path / "bad.jsonl").write_text('{"source_entity": "x"}\n')
    with pytest.raises(DataError, match="bad.jsonl:1"):
        load_corpus(tmp_path / "bad.jsonl")
    assert json.loads((tmp_path / "c.jsonl").read_text())["sentences"][1] == ["PaulAllen"]


def test_unknown_corpus_entities(toy):
    c = corpus("BillGates", ["BillGates", "Ghost"])
    assert c.unknown_entities(toy) == ["Ghost"]
