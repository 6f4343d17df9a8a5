"""Seeded synthetic world: a people/company/film knowledge graph, an
entity-linked corpus, and planted ground-truth relevance.

Relevance is planted per query relationship by structural rules (e.g. for
``founderOf<p, c>`` the other founders of ``c`` and its founding date). The
corpus writes one sentence per query fact that co-mentions the query target
with the anchor entities of its planted facts, plus optional noise mentions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .facts import Fact, direct_facts_between, facts_of_relationship
from .kg import EntityKind, KnowledgeGraph, Triple, write_graph
from .seeding import py_random
from .supervision import Corpus, Document, write_corpus

log = logging.getLogger(__name__)

QUERY_RELATIONSHIPS = (
    "founderOf",
    "boardMemberOf",
    "marriage|spouse",
    "parentOf",
    "starredIn",
    "directorOf",
    "educatedAt",
    "employment|employer",
)

SIZES = {
    "tiny": dict(persons=40, companies=6, universities=4, films=8, cities=8, countries=3, awards=3),
    "small": dict(persons=180, companies=25, universities=12, films=35, cities=25, countries=6, awards=8),
}

ROLES = ("entrepreneur", "actor", "director", "academic", "politician")
ROLE_WEIGHTS = (0.25, 0.25, 0.12, 0.2, 0.18)
PROFESSIONS = {"entrepreneur": "Entrepreneur", "actor": "Actor", "director": "FilmDirector",
               "academic": "Scientist", "politician": "Politician"}
GENRES = ("Drama", "Comedy", "Thriller", "Documentary", "SciFi", "Romance")
INDUSTRIES = ("Software", "Finance", "Energy", "Retail", "Media", "Biotech")
PARTIES = ("PartyRed", "PartyBlue", "PartyGreen", "PartyGold")


@dataclass(frozen=True)
class WorldParams:
    seed: int = 0
    size: str = "small"
    noise: float = 0.3            # chance of one more stray mention, repeated
    mention_prob: float = 0.8      # chance a planted fact's anchor is mentioned
    express_prob: float = 0.9      # chance a query fact gets a sentence at all
    filler_sentences: int = 2
    clean: bool = False            # drop any mention that would label an unplanted fact


@dataclass
class Planted:
    fact: Fact
    grade: int
    anchor: tuple[str, str]  # mentioning both of these expresses ``fact``


@dataclass
class SyntheticWorld:
    graph: KnowledgeGraph
    corpus: Corpus
    planted: dict[Fact, list[Planted]]
    expressed: dict[Fact, list[Planted]] = field(default_factory=dict)
    relationships: tuple[str, ...] = QUERY_RELATIONSHIPS

    def judgments(self) -> list[tuple[Fact, Fact, int]]:
        out = []
        for f_q in sorted(self.planted, key=Fact.sort_key):
            for p in sorted(self.planted[f_q], key=lambda p: p.fact.sort_key()):
                out.append((f_q, p.fact, p.grade))
        return out


class _Builder:
    def __init__(self, rng):
        self.rng = rng
        self.entities: dict[str, tuple[EntityKind, tuple[str, ...]]] = {}
        self.triples: list[Triple] = []
        self._seen: set[Triple] = set()

    def entity(self, eid: str, kind: EntityKind = EntityKind.REGULAR, *types: str) -> str:
        if eid not in self.entities:
            self.entities[eid] = (kind, tuple(types))
        return eid

    def date(self, year: int) -> str:
        return self.entity(f"D{year}", EntityKind.DATE)

    def add(self, s: str, p: str, o: str) -> None:
        t = Triple(s, p, o)
        if t not in self._seen:
            self._seen.add(t)
            self.triples.append(t)


def _build_graph(params: WorldParams) -> KnowledgeGraph:
    n = SIZES[params.size]
    rng = py_random(params.seed, "synth:graph")
    b = _Builder(rng)

    countries = [b.entity(f"country_{i:02d}", EntityKind.REGULAR, "location", "country") for i in range(n["countries"])]
    cities = []
    for i in range(n["cities"]):
        c = b.entity(f"city_{i:02d}", EntityKind.REGULAR, "location", "city")
        b.add(c, "locatedIn", countries[i % len(countries)])
        cities.append(c)
    city_country = {t.subject: t.object for t in b.triples if t.predicate == "locatedIn"}
    professions = {r: b.entity(name, EntityKind.CLASS, "profession") for r, name in PROFESSIONS.items()}
    genres = [b.entity(gname, EntityKind.CLASS, "genre") for gname in GENRES]
    industries = [b.entity(iname, EntityKind.CLASS, "industry") for iname in INDUSTRIES]
    parties = [b.entity(pname, EntityKind.REGULAR, "organization", "political_party") for pname in PARTIES]
    awards = [b.entity(f"award_{i:02d}", EntityKind.REGULAR, "award") for i in range(n["awards"])]

    companies = []
    for i in range(n["companies"]):
        c = b.entity(f"company_{i:02d}", EntityKind.REGULAR, "organization", "company")
        b.add(c, "headquarteredIn", rng.choice(cities))
        b.add(c, "foundedIn", b.date(rng.randint(1950, 2010)))
        b.add(c, "industry", rng.choice(industries))
        companies.append(c)
    universities = []
    for i in range(n["universities"]):
        u = b.entity(f"university_{i:02d}", EntityKind.REGULAR, "organization", "university")
        b.add(u, "locatedIn", rng.choice(cities))
        b.add(u, "foundedIn", b.date(rng.randint(1800, 1950)))
        universities.append(u)
    films = []
    for i in range(n["films"]):
        f = b.entity(f"film_{i:02d}", EntityKind.REGULAR, "film", "creative_work")
        b.add(f, "releaseDate", b.date(rng.randint(1960, 2020)))
        b.add(f, "genre", rng.choice(genres))
        films.append(f)

    # people: birth years spread so that parents are older than children
    persons, role, born = [], {}, {}
    for i in range(n["persons"]):
        r = rng.choices(ROLES, ROLE_WEIGHTS)[0]
        extra = {"entrepreneur": "businessperson", "actor": "artist", "director": "artist",
                 "academic": "scholar", "politician": "public_figure"}[r]
        p = b.entity(f"person_{i:03d}", EntityKind.REGULAR, "person", r, extra)
        role[p], born[p] = r, rng.randint(1920, 1995)
        city = rng.choice(cities)
        b.add(p, "bornIn", city)
        b.add(p, "birthDate", b.date(born[p]))
        b.add(p, "nationality", city_country[city] if rng.random() < 0.85 else rng.choice(countries))
        b.add(p, "profession", professions[r])
        persons.append(p)
    by_age = sorted(persons, key=lambda p: (born[p], p))

    # marriages through CVTs, then children of each couple
    unmarried = list(by_age[: int(len(by_age) * 0.75)])
    rng.shuffle(unmarried)
    n_marriages = len(persons) // 6
    children_pool = [p for p in by_age[len(by_age) // 3:]]
    has_parents: set[str] = set()
    couples = []
    for i in range(n_marriages):
        if len(unmarried) < 2:
            break
        a, c = unmarried.pop(), unmarried.pop()
        m = b.entity(f"marriage_{i:03d}", EntityKind.CVT)
        b.add(a, "marriage", m)
        b.add(m, "spouse", c)
        b.add(m, "marriageDate", b.date(max(born[a], born[c]) + rng.randint(18, 40)))
        b.add(m, "marriagePlace", rng.choice(cities))
        couples.append((a, c))
        eligible = [k for k in children_pool
                    if k not in has_parents and born[k] > max(born[a], born[c]) + 18]
        for k in rng.sample(eligible, min(len(eligible), rng.randint(0, 3))):
            has_parents.add(k)
            b.add(a, "parentOf", k)
            b.add(c, "parentOf", k)
    # a few single parents
    for p in rng.sample(persons, len(persons) // 20):
        eligible = [k for k in children_pool if k not in has_parents and born[k] > born[p] + 18]
        if eligible:
            k = rng.choice(eligible)
            has_parents.add(k)
            b.add(p, "parentOf", k)

    for p in persons:
        r = role[p]
        if rng.random() < 0.7 or r == "academic":
            for u in rng.sample(universities, 2 if r == "academic" else 1):
                b.add(p, "educatedAt", u)
        if r == "politician":
            b.add(p, "memberOf", rng.choice(parties))
    entrepreneurs = [p for p in persons if role[p] == "entrepreneur"]
    for c in companies:
        for p in rng.sample(entrepreneurs, min(len(entrepreneurs), rng.randint(1, 3))):
            b.add(p, "founderOf", c)
    board_pool = [p for p in persons if role[p] in ("entrepreneur", "politician")]
    for c in companies:
        for p in rng.sample(board_pool, min(len(board_pool), rng.randint(0, 2))):
            b.add(p, "boardMemberOf", c)

    employment_id = 0
    for p in persons:
        r = role[p]
        if r in ("entrepreneur", "politician") and rng.random() < 0.5:
            org = rng.choice(companies)
        elif r == "academic":
            org = rng.choice(universities)
        else:
            continue
        e = b.entity(f"employment_{employment_id:03d}", EntityKind.CVT)
        employment_id += 1
        b.add(p, "employment", e)
        b.add(e, "employer", org)
        b.add(e, "startDate", b.date(born[p] + rng.randint(22, 35)))

    actors = [p for p in persons if role[p] == "actor"]
    directors = [p for p in persons if role[p] == "director"]
    for f in films:
        b.add(rng.choice(directors), "directorOf", f)
        for p in rng.sample(actors, min(len(actors), rng.randint(2, 4))):
            b.add(p, "starredIn", f)
        if rng.random() < 0.3:
            b.add(rng.choice(directors + entrepreneurs), "producerOf", f)

    award_id = 0
    winners = [p for p in persons if role[p] in ("actor", "director", "academic")]
    for p in rng.sample(winners, min(len(winners), len(persons) // 5)):
        a = b.entity(f"awarding_{award_id:03d}", EntityKind.CVT)
        award_id += 1
        b.add(p, "awardReceived", a)
        b.add(a, "award", rng.choice(awards))
        b.add(a, "awardYear", b.date(min(2020, born[p] + rng.randint(25, 60))))

    return KnowledgeGraph(b.entities, b.triples)


# -- planted relevance ----------------------------------------------------------

def _out(g, e, pred):
    return [t for t in g.out_triples(e) if t.predicate == pred]


def _in(g, e, pred):
    return [t for t in g.in_triples(e) if t.predicate == pred]


def _spouse_facts(g, a, b):
    return [f for f in direct_facts_between(g, a, b) if f.relationship == ("marriage", "spouse")]


def planted_relevance(g: KnowledgeGraph, f_q: Fact) -> list[Planted]:
    """Ground-truth relevant facts for ``f_q`` under the world's rules."""
    s, t = f_q.source, f_q.target
    out: dict[Fact, Planted] = {}

    def plant(fact: Fact, grade: int, a: str, b: str) -> None:
        if fact != f_q and fact not in out:
            out[fact] = Planted(fact, grade, (a, b))

    rel = f_q.label
    if rel == "founderOf":
        for tr in _in(g, t, "founderOf"):
            if tr.subject != s:
                plant(Fact((tr,)), 2, t, tr.subject)
        for tr in _out(g, t, "foundedIn"):
            plant(Fact((tr,)), 2, t, tr.object)
        for tr in _out(g, t, "headquarteredIn"):
            plant(Fact((tr,)), 1, t, tr.object)
    elif rel == "boardMemberOf":
        for tr in _in(g, t, "founderOf"):
            plant(Fact((tr,)), 2, t, tr.subject)
        for tr in _in(g, t, "boardMemberOf"):
            if tr.subject != s:
                plant(Fact((tr,)), 1, t, tr.subject)
        for tr in _out(g, t, "industry"):
            plant(Fact((tr,)), 1, t, tr.object)
    elif rel == "marriage|spouse":
        m = f_q.cvt
        leg = f_q.triples[0]
        for tr in _out(g, m, "marriageDate"):
            plant(Fact((leg, tr)), 2, s, tr.object)
        for tr in _out(g, m, "marriagePlace"):
            plant(Fact((leg, tr)), 1, s, tr.object)
        kids_t = {tr.object for tr in _out(g, t, "parentOf")}
        for tr in _out(g, s, "parentOf"):
            if tr.object in kids_t:
                plant(Fact((tr,)), 2, s, tr.object)
                plant(Fact((Triple(t, "parentOf", tr.object),)), 2, t, tr.object)
    elif rel == "parentOf":
        for tr in _in(g, t, "parentOf"):
            if tr.subject != s:
                plant(Fact((tr,)), 2, t, tr.subject)
                for f in _spouse_facts(g, s, tr.subject):
                    plant(f, 2, s, tr.subject)
        for tr in _out(g, t, "birthDate"):
            plant(Fact((tr,)), 2, t, tr.object)
        for tr in _out(g, t, "bornIn"):
            plant(Fact((tr,)), 1, t, tr.object)
    elif rel in ("starredIn", "directorOf"):
        for tr in _in(g, t, "directorOf"):
            if tr.subject != s:
                plant(Fact((tr,)), 2, t, tr.subject)
        for tr in _out(g, t, "releaseDate"):
            plant(Fact((tr,)), 2, t, tr.object)
        for tr in _in(g, t, "starredIn"):
            if tr.subject != s:
                plant(Fact((tr,)), 1 if rel == "starredIn" else 2, t, tr.subject)
        for tr in _out(g, t, "genre"):
            plant(Fact((tr,)), 1, t, tr.object)
    elif rel == "educatedAt":
        for tr in _out(g, t, "locatedIn"):
            plant(Fact((tr,)), 2, t, tr.object)
            for tr2 in _out(g, s, "bornIn"):
                if tr2.object == tr.object:
                    plant(Fact((tr2,)), 1, s, tr2.object)
        for tr in _out(g, t, "foundedIn"):
            plant(Fact((tr,)), 1, t, tr.object)
    elif rel == "employment|employer":
        e = f_q.cvt
        leg = f_q.triples[0]
        for tr in _out(g, e, "startDate"):
            plant(Fact((leg, tr)), 2, s, tr.object)
        for tr in _in(g, t, "founderOf"):
            plant(Fact((tr,)), 1, t, tr.subject)
        for tr in _out(g, t, "headquarteredIn"):
            plant(Fact((tr,)), 1, t, tr.object)
    return list(out.values())


# -- corpus -------------------------------------------------------------------

def _unlabeled_noise(g: KnowledgeGraph, s: str, t: str) -> list[str]:
    """Neighbours of the query entities that make plausible stray mentions."""
    pool = set()
    for e in (s, t):
        for n in g.neighbors(e):
            if not g.is_cvt(n) and not g.is_class(n):
                pool.add(n)
    pool.discard(s)
    pool.discard(t)
    return sorted(pool)


def _build_corpus(g: KnowledgeGraph, planted: dict[Fact, list[Planted]], params: WorldParams):
    rng = py_random(params.seed, "synth:corpus")
    by_source: dict[str, list[Fact]] = {}
    for f_q in sorted(planted, key=Fact.sort_key):
        by_source.setdefault(f_q.source, []).append(f_q)
    docs = []
    expressed: dict[Fact, list[Planted]] = {}
    for s in sorted(by_source):
        queries = by_source[s]
        targets = {f.target for f in queries}
        used_targets: set[str] = set()
        sentences = []
        for f_q in queries:
            t = f_q.target
            if rng.random() >= params.express_prob:
                continue
            if params.clean and t in used_targets:
                continue
            used_targets.add(t)
            plants = planted[f_q]
            planted_facts = {p.fact for p in plants}
            if params.clean:
                # the sentence also labels every other query sharing (s, t)
                for other in queries:
                    if other.target == t:
                        planted_facts &= {p.fact for p in planted[other]}
                plants = [p for p in plants if p.fact in planted_facts]
            sentence = [s, t]
            kept = []
            for p in plants:
                if rng.random() >= params.mention_prob:
                    continue
                mention = p.anchor[1]
                if mention in sentence:
                    kept.append(p)
                    continue
                if params.clean:
                    if mention in targets:
                        continue
                    bad = False
                    for x in sentence:
                        if x == mention:
                            continue
                        conn = direct_facts_between(g, x, mention)
                        if len(conn) == 1 and next(iter(conn)) not in planted_facts:
                            bad = True
                            break
                    if bad:
                        continue
                sentence.append(mention)
                kept.append(p)
            if not params.clean:
                pool = [n for n in _unlabeled_noise(g, s, t) if n not in sentence]
                while pool and rng.random() < params.noise:
                    sentence.append(pool.pop(rng.randrange(len(pool))))
            expressed[f_q] = kept
            body = sentence[1:]
            rng.shuffle(body)
            sentences.append([s] + body if rng.random() < 0.5 else body)
        if not params.clean:
            nbrs = [n for n in g.neighbors(s) if not g.is_cvt(n)]
            for _ in range(params.filler_sentences):
                if nbrs:
                    sentences.append([s] + rng.sample(nbrs, min(2, len(nbrs))))
        rng.shuffle(sentences)
        docs.append(Document(s, tuple(tuple(x) for x in sentences)))
    return Corpus(docs), expressed


def generate_synthetic_world(params: WorldParams | None = None, **overrides) -> SyntheticWorld:
    """Build the graph, plant relevance for every query fact, write the corpus."""
    params = params or WorldParams(**overrides)
    if params.size not in SIZES:
        raise ValueError(f"unknown size {params.size!r}; choose from {sorted(SIZES)}")
    g = _build_graph(params)
    planted: dict[Fact, list[Planted]] = {}
    for rel in QUERY_RELATIONSHIPS:
        for f_q in facts_of_relationship(g, rel.split("|")):
            planted[f_q] = planted_relevance(g, f_q)
    corpus, expressed = _build_corpus(g, planted, params)
    return SyntheticWorld(g, corpus, planted, expressed)


def write_world(world: SyntheticWorld, out_dir: str | Path) -> dict[str, Path]:
    from .evaluation import write_judgments

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "triples": out / "triples.tsv",
        "entities": out / "entities.tsv",
        "corpus": out / "corpus.jsonl",
        "judgments": out / "ground_truth.tsv",
    }
    write_graph(world.graph, paths["triples"], paths["entities"])
    write_corpus(world.corpus, paths["corpus"])
    write_judgments(paths["judgments"], world.judgments())
    return paths
