"""Facts (one triple, or two triples through a CVT) and traversal paths."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import DataError
from .kg import KnowledgeGraph, Triple


class FactError(DataError):
    pass


@dataclass(frozen=True)
class Fact:
    """A 1-triple fact or a 2-triple fact chained through a CVT entity.

    Construction only checks chaining; :func:`make_fact` additionally checks
    entity kinds against a graph.
    """

    triples: tuple[Triple, ...]

    def __post_init__(self) -> None:
        n = len(self.triples)
        if n not in (1, 2):
            raise FactError(f"a fact has 1 or 2 triples, got {n}")
        if n == 2 and self.triples[0].object != self.triples[1].subject:
            raise FactError(f"triples do not chain: {self.triples[0]} / {self.triples[1]}")

    @property
    def relationship(self) -> tuple[str, ...]:
        return tuple(t.predicate for t in self.triples)

    @property
    def label(self) -> str:
        return "|".join(self.relationship)

    @property
    def source(self) -> str:
        return self.triples[0].subject

    @property
    def target(self) -> str:
        return self.triples[-1].object

    @property
    def cvt(self) -> str | None:
        """The intermediate CVT of a 2-triple fact."""
        return self.triples[0].object if len(self.triples) == 2 else None

    @property
    def entities(self) -> tuple[str, ...]:
        """Entities in path order, CVT included, without repeats."""
        out: list[str] = []
        for t in self.triples:
            for e in (t.subject, t.object):
                if e not in out:
                    out.append(e)
        return tuple(out)

    def key(self) -> str:
        """Tab-separated serialization: ``p0[|p1] s0 [cvt] t_last``."""
        parts = [self.label, self.source]
        if self.cvt is not None:
            parts.append(self.cvt)
        parts.append(self.target)
        return "\t".join(parts)

    def sort_key(self) -> tuple:
        return (self.relationship, self.source, self.target, self.key())

    def __str__(self) -> str:
        return f"{self.label}<{self.source}, {self.target}>"

    def __lt__(self, other: "Fact") -> bool:
        return self.sort_key() < other.sort_key()


def make_fact(g: KnowledgeGraph, triples: Sequence[Triple]) -> Fact:
    """Build a fact and check it against the graph's entity kinds."""
    f = Fact(tuple(triples))
    for t in f.triples:
        if t not in g:
            raise FactError(f"triple {t} is not in the graph")
    if len(f.triples) == 1:
        if g.is_cvt(f.target):
            raise FactError(f"1-triple fact cannot end in CVT entity {f.target!r}")
    else:
        if not g.is_cvt(f.cvt):
            raise FactError(f"middle entity {f.cvt!r} of a 2-triple fact must be a CVT")
        if g.is_cvt(f.source) or g.is_cvt(f.target):
            raise FactError("endpoints of a 2-triple fact must be non-CVT entities")
    return f


def parse_fact(fields: Sequence[str]) -> Fact:
    """Inverse of :meth:`Fact.key` given its tab-split fields."""
    preds = fields[0].split("|")
    if len(preds) == 1 and len(fields) == 3:
        return Fact((Triple(fields[1], preds[0], fields[2]),))
    if len(preds) == 2 and len(fields) == 4:
        s, c, t = fields[1:]
        return Fact((Triple(s, preds[0], c), Triple(c, preds[1], t)))
    raise FactError(f"malformed fact serialization: {fields!r}")


def split_facts(fields: Sequence[str], count: int) -> tuple[list[Fact], list[str]]:
    """Consume ``count`` serialized facts from the front of ``fields``.

    Returns the facts and the remaining fields.
    """
    facts = []
    pos = 0
    for _ in range(count):
        if pos >= len(fields):
            raise FactError("truncated fact serialization")
        width = 4 if "|" in fields[pos] else 3
        facts.append(parse_fact(fields[pos:pos + width]))
        pos += width
    return facts, list(fields[pos:])


def fact_endpoints(f: Fact) -> tuple[str, str]:
    return f.source, f.target


def entities_of(f: Fact) -> frozenset[str]:
    return frozenset(f.entities)


def preds_of(f: Fact) -> frozenset[str]:
    return frozenset(f.relationship)


def is_attribute_fact(g: KnowledgeGraph, f: Fact) -> bool:
    return len(f.triples) == 1 and g.is_cvt(f.source)


def is_attribute_of(f_attr: Fact, f: Fact) -> bool:
    """True iff ``f_attr`` is a 1-triple fact hanging off ``f``'s CVT."""
    return len(f.triples) == 2 and len(f_attr.triples) == 1 and f_attr.source == f.cvt


# -- fact materialization over a graph ------------------------------------

def facts_of_entity(g: KnowledgeGraph, e: str) -> tuple[Fact, ...]:
    """Every fact whose entity set contains ``e`` (CVT position included)."""
    memo = g.memo("facts_of_entity")
    hit = memo.get(e)
    if hit is not None:
        return hit
    found: list[Fact] = []
    if g.is_cvt(e):
        for t in g.out_triples(e):
            if not g.is_cvt(t.object):
                found.append(Fact((t,)))
        for t_in in g.in_triples(e):
            if g.is_cvt(t_in.subject):
                continue
            for t_out in g.out_triples(e):
                if not g.is_cvt(t_out.object):
                    found.append(Fact((t_in, t_out)))
    else:
        for t in g.out_triples(e):
            if g.is_cvt(t.object):
                for t2 in g.out_triples(t.object):
                    if not g.is_cvt(t2.object):
                        found.append(Fact((t, t2)))
            else:
                found.append(Fact((t,)))
        for t in g.in_triples(e):
            if t.subject == e:
                continue  # self-loop already collected from the out side
            found.append(Fact((t,)))
            if g.is_cvt(t.subject):
                for t0 in g.in_triples(t.subject):
                    if not g.is_cvt(t0.subject):
                        f = Fact((t0, t))
                        if t0.subject != e:  # e->c->e counted once above
                            found.append(f)
    result = tuple(sorted(set(found), key=Fact.sort_key))
    memo[e] = result
    return result


def attribute_facts(g: KnowledgeGraph, cvt: str) -> tuple[Fact, ...]:
    """1-triple facts whose subject is the CVT ``cvt``."""
    if not g.is_cvt(cvt):
        return ()
    return tuple(Fact((t,)) for t in g.out_triples(cvt) if not g.is_cvt(t.object))


def direct_facts_between(g: KnowledgeGraph, a: str, b: str) -> frozenset[Fact]:
    """Facts whose endpoint pair is ``{a, b}`` in either orientation."""
    if a == b:
        raise ValueError("direct_facts_between needs two distinct entities")
    pair = {a, b}
    return frozenset(f for f in facts_of_entity(g, a) if {f.source, f.target} == pair)


def facts_of_relationship(g: KnowledgeGraph, relationship: Sequence[str]) -> list[Fact]:
    """All facts labelled with the given predicate sequence, sorted."""
    rel = tuple(relationship)
    found: list[Fact] = []
    if len(rel) == 1:
        for t in g.pred_triples(rel[0]):
            if not g.is_cvt(t.object):
                found.append(Fact((t,)))
    elif len(rel) == 2:
        for t in g.pred_triples(rel[0]):
            if not g.is_cvt(t.object) or g.is_cvt(t.subject):
                continue
            for t2 in g.out_triples(t.object):
                if t2.predicate == rel[1] and not g.is_cvt(t2.object):
                    found.append(Fact((t, t2)))
    else:
        raise ValueError(f"relationships have 1 or 2 predicates, got {rel!r}")
    return sorted(found, key=Fact.sort_key)


def all_facts(g: KnowledgeGraph) -> Iterator[Fact]:
    """Every fact of the graph, each exactly once, in triple order."""
    for t in g.triples:
        if not g.is_cvt(t.object):
            yield Fact((t,))
        elif not g.is_cvt(t.subject):
            for t2 in g.out_triples(t.object):
                if not g.is_cvt(t2.object):
                    yield Fact((t, t2))


def relationships_of(g: KnowledgeGraph) -> list[tuple[str, ...]]:
    return sorted({f.relationship for f in all_facts(g)})


def parse_relationship(label: str) -> tuple[str, ...]:
    return tuple(label.split("|"))


# -- paths ------------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    predicate: str
    inverse: bool
    target: str


@dataclass(frozen=True)
class Path:
    """A walk starting at ``origin``; inverse steps traverse object -> subject."""

    origin: str
    steps: tuple[Step, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise FactError("a path needs at least one step")

    @property
    def destination(self) -> str:
        return self.steps[-1].target

    @property
    def entities(self) -> tuple[str, ...]:
        return (self.origin,) + tuple(s.target for s in self.steps)

    def tokens(self) -> tuple[tuple[str, str], ...]:
        """Alternating ('E', entity) / ('P'|'I', predicate) tokens."""
        out: list[tuple[str, str]] = [("E", self.origin)]
        for s in self.steps:
            out.append(("I" if s.inverse else "P", s.predicate))
            out.append(("E", s.target))
        return tuple(out)

    def triples(self) -> tuple[Triple, ...]:
        out, src = [], self.origin
        for s in self.steps:
            out.append(Triple(s.target, s.predicate, src) if s.inverse else Triple(src, s.predicate, s.target))
            src = s.target
        return tuple(out)

    def key(self) -> str:
        parts = [self.origin]
        for s in self.steps:
            parts.append(("^" if s.inverse else "") + s.predicate)
            parts.append(s.target)
        return " ".join(parts)

    @classmethod
    def from_fact(cls, f: Fact) -> "Path":
        return cls(f.source, tuple(Step(t.predicate, False, t.object) for t in f.triples))

    @classmethod
    def chain(cls, origin: str, steps: Iterable[tuple[str, bool, str]]) -> "Path":
        return cls(origin, tuple(Step(p, inv, e) for p, inv, e in steps))
