"""Immutable, indexed knowledge-graph triple store.

Entities carry a kind (regular, CVT, date, class) and a set of declared
types. All indices are built once at construction; afterwards the graph is
read-only and safe to share between threads.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataError

CVT_TYPE = "__CVT__"
DATE_TYPE = "__DATE__"
UNK_TYPE = "__UNK__"
RESERVED_TYPES = (CVT_TYPE, DATE_TYPE, UNK_TYPE)


class EntityKind(enum.Enum):
    REGULAR = "regular"
    CVT = "cvt"
    DATE = "date"
    CLASS = "class"


@dataclass(frozen=True, order=True)
class Triple:
    subject: str
    predicate: str
    object: str

    def __str__(self) -> str:
        return f"<{self.subject}, {self.predicate}, {self.object}>"


class GraphError(DataError):
    """Malformed graph input (bad line, unknown entity, duplicate triple)."""


class KnowledgeGraph:
    """Typed triple store with subject, object and predicate indices.

    ``entities`` maps an entity id to ``(kind, declared_types)``. Triples keep
    their input order, which fixes every iteration order downstream.
    """

    def __init__(
        self,
        entities: Mapping[str, tuple[EntityKind, Iterable[str]]],
        triples: Iterable[Triple],
    ) -> None:
        self._kinds: dict[str, EntityKind] = {}
        self._declared: dict[str, frozenset[str]] = {}
        for eid, (kind, types) in entities.items():
            if not eid:
                raise GraphError("empty entity id")
            self._kinds[eid] = kind
            self._declared[eid] = frozenset(t for t in types if t)
        # dense integer handles, canonical identity stays the string id
        self._entity_ids = {e: i for i, e in enumerate(self._kinds)}

        seen: set[Triple] = set()
        ordered: list[Triple] = []
        for t in triples:
            for e in (t.subject, t.object):
                if e not in self._kinds:
                    raise GraphError(f"unknown entity {e!r} in triple {t}")
            if not t.predicate:
                raise GraphError(f"empty predicate in triple {t}")
            if t in seen:
                raise GraphError(f"duplicate triple {t}")
            seen.add(t)
            ordered.append(t)
        self._triples = tuple(ordered)
        self._triple_set = frozenset(seen)

        out_idx: dict[str, list[Triple]] = {}
        in_idx: dict[str, list[Triple]] = {}
        pred_idx: dict[str, list[Triple]] = {}
        for t in self._triples:
            out_idx.setdefault(t.subject, []).append(t)
            in_idx.setdefault(t.object, []).append(t)
            pred_idx.setdefault(t.predicate, []).append(t)
        self._out = {k: tuple(v) for k, v in out_idx.items()}
        self._in = {k: tuple(v) for k, v in in_idx.items()}
        self._pred = {k: tuple(v) for k, v in pred_idx.items()}
        self._predicate_ids = {p: i for i, p in enumerate(self._pred)}

        self._types = {e: self._with_reserved(e) for e in self._kinds}
        self._type_freq = Counter(z for zs in self._types.values() for z in zs)
        # derived-data memo for other modules (fact lists, statistics);
        # never holds anything that changes the graph's observable content
        self._memo: dict[str, dict] = {}

    def _with_reserved(self, e: str) -> frozenset[str]:
        kind = self._kinds[e]
        types = set(self._declared[e])
        if kind is EntityKind.CVT:
            types.add(CVT_TYPE)
        elif kind is EntityKind.DATE:
            types.add(DATE_TYPE)
        return frozenset(types)

    # -- sizes and vocabularies -------------------------------------------
    @property
    def triples(self) -> tuple[Triple, ...]:
        return self._triples

    @property
    def num_triples(self) -> int:
        return len(self._triples)

    @property
    def entities(self) -> tuple[str, ...]:
        return tuple(self._kinds)

    @property
    def predicates(self) -> tuple[str, ...]:
        """Predicates in order of first appearance."""
        return tuple(self._pred)

    @property
    def type_freq(self) -> Mapping[str, int]:
        return self._type_freq

    def all_types(self) -> list[str]:
        return sorted(self._type_freq)

    def entity_id(self, e: str) -> int:
        return self._entity_ids[e]

    def predicate_id(self, p: str) -> int:
        return self._predicate_ids[p]

    def __contains__(self, item: object) -> bool:
        if isinstance(item, Triple):
            return item in self._triple_set
        return item in self._kinds

    def has_entity(self, e: str) -> bool:
        return e in self._kinds

    # -- entity tables ----------------------------------------------------
    def kind(self, e: str) -> EntityKind:
        return self._kinds[e]

    def is_cvt(self, e: str) -> bool:
        return self._kinds.get(e) is EntityKind.CVT

    def is_date(self, e: str) -> bool:
        return self._kinds.get(e) is EntityKind.DATE

    def is_class(self, e: str) -> bool:
        return self._kinds.get(e) is EntityKind.CLASS

    def declared_types(self, e: str) -> frozenset[str]:
        return self._declared.get(e, frozenset())

    def entity_types(self, e: str) -> frozenset[str]:
        """Declared types plus ``__CVT__``/``__DATE__`` for CVT and date entities."""
        return self._types.get(e, frozenset())

    def top_k_types(self, e: str, k: int) -> list[str]:
        """The ``k`` most frequent types of ``e``; ties broken lexicographically."""
        if k < 1:
            raise ValueError("k must be >= 1")
        types = self.entity_types(e)
        return sorted(types, key=lambda z: (-self._type_freq[z], z))[:k]

    # -- triple lookups ---------------------------------------------------
    def out_triples(self, e: str) -> tuple[Triple, ...]:
        return self._out.get(e, ())

    def in_triples(self, e: str) -> tuple[Triple, ...]:
        return self._in.get(e, ())

    def pred_triples(self, p: str) -> tuple[Triple, ...]:
        return self._pred.get(p, ())

    def triples_pred(self, p: str) -> frozenset[Triple]:
        return frozenset(self.pred_triples(p))

    def triples_subj(self, e: str) -> frozenset[Triple]:
        return frozenset(self.out_triples(e))

    def triples_obj(self, e: str) -> frozenset[Triple]:
        return frozenset(self.in_triples(e))

    def triples_ent(self, e: str) -> frozenset[Triple]:
        return self.triples_subj(e) | self.triples_obj(e)

    def neighbors(self, e: str) -> list[str]:
        """Out- and in-neighbours of ``e`` (excluding ``e``), sorted."""
        nbrs = {t.object for t in self.out_triples(e)}
        nbrs.update(t.subject for t in self.in_triples(e))
        nbrs.discard(e)
        return sorted(nbrs)

    def memo(self, name: str) -> dict:
        return self._memo.setdefault(name, {})

    def __repr__(self) -> str:
        return (
            f"KnowledgeGraph(entities={len(self._kinds)}, "
            f"predicates={len(self._pred)}, triples={len(self._triples)})"
        )


# -- file IO ----------------------------------------------------------------

def _data_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line


def read_entities(path: str | Path) -> dict[str, tuple[EntityKind, tuple[str, ...]]]:
    path = Path(path)
    entities: dict[str, tuple[EntityKind, tuple[str, ...]]] = {}
    for lineno, line in _data_lines(path):
        fields = line.split("\t")
        if len(fields) == 2:
            fields.append("")
        if len(fields) != 3:
            raise GraphError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
        eid, kind_s, types_s = fields
        if not eid:
            raise GraphError(f"{path}:{lineno}: empty entity id")
        try:
            kind = EntityKind(kind_s)
        except ValueError:
            raise GraphError(f"{path}:{lineno}: unknown entity kind {kind_s!r}") from None
        if eid in entities:
            raise GraphError(f"{path}:{lineno}: entity {eid!r} declared twice")
        types = tuple(t.strip() for t in types_s.split(",") if t.strip())
        entities[eid] = (kind, types)
    return entities


def read_triples(path: str | Path, known: Mapping[str, object] | None = None) -> list[Triple]:
    path = Path(path)
    triples: list[Triple] = []
    seen: set[Triple] = set()
    for lineno, line in _data_lines(path):
        fields = line.split("\t")
        if len(fields) != 3 or not all(fields):
            raise GraphError(f"{path}:{lineno}: expected subject<TAB>predicate<TAB>object")
        t = Triple(*fields)
        if known is not None:
            for e in (t.subject, t.object):
                if e not in known:
                    raise GraphError(f"{path}:{lineno}: unknown entity {e!r}")
        if t in seen:
            raise GraphError(f"{path}:{lineno}: duplicate triple {t}")
        seen.add(t)
        triples.append(t)
    return triples


def load_graph(triples_path: str | Path, entities_path: str | Path) -> KnowledgeGraph:
    """Load a graph from a triples TSV and an entities TSV."""
    for p in (triples_path, entities_path):
        if not Path(p).is_file():
            raise DataError(f"no such file: {p}")
    entities = read_entities(entities_path)
    triples = read_triples(triples_path, known=entities)
    return KnowledgeGraph(entities, triples)


def write_graph(g: KnowledgeGraph, triples_path: str | Path, entities_path: str | Path) -> None:
    with open(entities_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# entity_id\tkind\ttypes\n")
        for e in g.entities:
            types = ",".join(sorted(g.declared_types(e)))
            fh.write(f"{e}\t{g.kind(e).value}\t{types}\n")
    with open(triples_path, "w", encoding="utf-8", newline="\n") as fh:
        for t in g.triples:
            fh.write(f"{t.subject}\t{t.predicate}\t{t.object}\n")
