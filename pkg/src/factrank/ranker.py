"""Neural fact ranker: type-aggregated entity embeddings, a shared RNN over
facts and connecting paths, summed path sets, and an MLP scoring head.

Trained per query fact with a pairwise squared-error loss and Adam.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autograd as ag
from .enumeration import CandidateSet, EnumConfig, paths_from
from .errors import DataError
from .evaluation import ndcg_at, rank_by_score
from .facts import Fact, Path as KGPath
from .features import NUM_FIXED_FEATURES, extract_features, graph_stats
from .kg import UNK_TYPE, KnowledgeGraph
from .seeding import substream
from .supervision import LabeledInstance, group_by_query

log = logging.getLogger(__name__)

FEATURE_MODES = ("LF", "HF", "NFCM")
CHECKPOINT_FORMAT = "factrank-ranker"
CHECKPOINT_VERSION = 1


@dataclass
class RankerConfig:
    d_z: int = 32
    d_p: int = 32
    rnn_size: int = 32
    dropout_rate: float = 0.0
    alpha: int = 1
    beta: int = 50
    k: int = 10
    learning_rate: float = 1e-3
    l2_mlp_kernel: float = 0.0
    seed: int = 0
    epochs: int = 30
    feature_mode: str = "NFCM"
    max_types: int = 7
    init_scale: float = 0.05

    def __post_init__(self) -> None:
        if self.d_z != self.d_p:
            raise ValueError("d_z and d_p must be equal (one RNN input width)")
        for name in ("d_z", "d_p", "rnn_size", "beta", "k", "max_types"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(f"feature_mode must be one of {FEATURE_MODES}")


@dataclass
class Vocab:
    types: list[str]
    predicates: list[str]
    relationships: list[str] = field(default_factory=list)

    @classmethod
    def from_graph(cls, g: KnowledgeGraph, relationships: Sequence[str] = ()) -> "Vocab":
        types = sorted(set(g.all_types()) | {UNK_TYPE})
        return cls(types, sorted(g.predicates), sorted(set(relationships)))


class RankerModel:
    """Parameters plus the vocabularies they are indexed by."""

    def __init__(self, config: RankerConfig, vocab: Vocab, enum: EnumConfig | None = None,
                 params: dict[str, np.ndarray] | None = None) -> None:
        self.config = config
        self.vocab = vocab
        self.enum = enum or EnumConfig()
        self.type_index = {z: i for i, z in enumerate(vocab.types)}
        self.pred_index = {p: i for i, p in enumerate(vocab.predicates)}
        self.rel_index = {r: i for i, r in enumerate(vocab.relationships)}
        shapes = self.param_shapes()
        if params is None:
            rng = substream(config.seed, "init")
            a = config.init_scale
            params = {name: rng.uniform(-a, a, size=shape) for name, shape in shapes.items()}
        for name, shape in shapes.items():
            if name not in params or tuple(params[name].shape) != shape:
                raise DataError(f"parameter {name!r} missing or not of shape {shape}")
        self.params = {name: ag.Tensor(np.array(params[name], dtype=np.float64), requires_grad=True)
                       for name in shapes}

    @property
    def num_features(self) -> int:
        return NUM_FIXED_FEATURES + len(self.vocab.relationships)

    @property
    def input_dim(self) -> int:
        h = self.config.rnn_size
        mode = self.config.feature_mode
        return {"LF": 3 * h, "HF": self.num_features, "NFCM": 3 * h + self.num_features}[mode]

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        c = self.config
        n_z, n_p = len(self.vocab.types), len(self.vocab.predicates)
        shapes = {
            "W_z": (n_z, c.d_z),
            "W_p": (n_p, c.d_p),
            "W_pi": (n_p, c.d_p),
            # row-vector convention: h_i = tanh(h_{i-1} @ W_hh + x_i @ W_xh)
            "W_hh": (c.rnn_size, c.rnn_size),
            "W_xh": (c.d_z, c.rnn_size),
        }
        width = self.input_dim
        for i in range(c.alpha):
            shapes[f"mlp_W{i}"] = (width, c.beta)
            shapes[f"mlp_b{i}"] = (c.beta,)
            width = c.beta
        shapes["out_W"] = (width, 1)
        shapes["out_b"] = (1,)
        return shapes

    def kernel_names(self) -> list[str]:
        return [f"mlp_W{i}" for i in range(self.config.alpha)] + ["out_W"]

    def numpy_params(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.params.items()}

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        for k, v in params.items():
            self.params[k].data = np.array(v, dtype=np.float64)

    # -- vocab lookups ------------------------------------------------------
    def entity_type_rows(self, g: KnowledgeGraph) -> np.ndarray:
        """Entity (graph order) x type count matrix of the top-k types."""
        key = (tuple(self.vocab.types), self.config.max_types)
        memo = g.memo("entity_type_rows")
        hit = memo.get(key)
        if hit is not None:
            return hit
        mat = np.zeros((len(g.entities), len(self.vocab.types)))
        unk = self.type_index[UNK_TYPE]
        for i, e in enumerate(g.entities):
            idx = [self.type_index[z] for z in g.top_k_types(e, self.config.max_types) if z in self.type_index]
            if idx:
                mat[i, idx] = 1.0
            else:
                mat[i, unk] = 1.0
        memo[key] = mat
        return mat

    def sequence_ids(self, g: KnowledgeGraph, path: KGPath) -> tuple[int, ...]:
        """Entity tokens -> graph entity index; predicate tokens -> index (+|P| if inverse)."""
        n_p = len(self.vocab.predicates)
        out = []
        for kind, name in path.tokens():
            if kind == "E":
                out.append(g.entity_id(name))
            else:
                try:
                    p = self.pred_index[name]
                except KeyError:
                    raise DataError(f"predicate {name!r} is not in the model vocabulary") from None
                out.append(p + n_p if kind == "I" else p)
        return tuple(out)


# -- prepared inputs ----------------------------------------------------------

@dataclass
class PreparedQuery:
    """Everything the network needs for one query fact and its candidates."""

    query: Fact
    candidates: list[Fact]
    seqs: list[tuple[int, ...]]  # seqs[0] is the query fact itself
    from_s: list[list[int]]
    from_t: list[list[int]]
    features: np.ndarray
    labels: np.ndarray | None = None


def prepare_query(model: RankerModel, g: KnowledgeGraph, f_q: Fact, candidates: Sequence[Fact],
                  labels: Sequence[int] | None = None, features: np.ndarray | None = None) -> PreparedQuery:
    seq_index: dict[tuple[int, ...], int] = {}

    def intern(path: KGPath) -> int:
        ids = model.sequence_ids(g, path)
        return seq_index.setdefault(ids, len(seq_index))

    intern(KGPath.from_fact(f_q))
    by_s = paths_from(g, f_q.source, model.enum)
    by_t = paths_from(g, f_q.target, model.enum)
    from_s, from_t = [], []
    for f_c in candidates:
        dests = sorted(set(f_c.entities))
        from_s.append([intern(p) for d in dests if d != f_q.source for p in by_s.get(d, ())])
        from_t.append([intern(p) for d in dests if d != f_q.target for p in by_t.get(d, ())])
    if features is None:
        stats = graph_stats(g)
        features = np.zeros((len(candidates), model.num_features))
        for i, f_c in enumerate(candidates):
            features[i] = extract_features(g, stats, f_q, f_c, model.rel_index)
    features = np.asarray(features, dtype=np.float64).reshape(len(candidates), model.num_features)
    seqs = sorted(seq_index, key=seq_index.__getitem__)
    lab = None if labels is None else np.asarray(labels, dtype=np.float64)
    return PreparedQuery(f_q, list(candidates), seqs, from_s, from_t, features, lab)


# -- forward pass -------------------------------------------------------------

def encode_sequences(model: RankerModel, g: KnowledgeGraph, seqs: Sequence[Sequence[int]],
                     dropout_rng: np.random.Generator | None = None) -> ag.Tensor:
    """Final RNN state for each token sequence (rows), zero initial state."""
    if not seqs or any(len(s) == 0 for s in seqs):
        raise ValueError("cannot encode an empty sequence")
    P = model.params
    n, h_dim = len(seqs), model.config.rnn_size
    lengths = np.array([len(s) for s in seqs])
    T = int(lengths.max())
    ids = np.zeros((n, T), dtype=np.int64)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
    type_rows = model.entity_type_rows(g)
    n_p = len(model.vocab.predicates)

    h = ag.Tensor(np.zeros((n, h_dim)))
    for step in range(T):
        active = (lengths > step).astype(np.float64)[:, None]
        col = ids[:, step]
        if step % 2 == 0:
            x = ag.matmul(ag.Tensor(type_rows[col] * active), P["W_z"])
        else:
            inverse = col >= n_p
            fwd_mask = active * (~inverse)[:, None]
            inv_mask = active * inverse[:, None]
            x = ag.add(
                ag.mul(ag.rows(P["W_p"], np.where(inverse, 0, col)), fwd_mask),
                ag.mul(ag.rows(P["W_pi"], np.where(inverse, col - n_p, 0)), inv_mask),
            )
        pre = ag.add(ag.matmul(h, P["W_hh"]), ag.matmul(x, P["W_xh"]))
        h = ag.blend(ag.tanh(pre), h, active)
    rate = model.config.dropout_rate
    if dropout_rng is not None and rate > 0:
        keep = (dropout_rng.random(h.shape) >= rate) / (1.0 - rate)
        h = ag.mul(h, keep)
    return h


def _count_matrix(lists: Sequence[Sequence[int]], remap: dict[int, int], width: int) -> np.ndarray:
    m = np.zeros((len(lists), width))
    for r, seq_ids in enumerate(lists):
        for s in seq_ids:
            m[r, remap[s]] += 1.0
    return m


def forward(model: RankerModel, g: KnowledgeGraph, prep: PreparedQuery,
            select: Sequence[int] | None = None,
            dropout_rng: np.random.Generator | None = None) -> ag.Tensor:
    """Scores (column vector) for the selected candidates of ``prep``."""
    cfg = model.config
    rows_sel = list(range(len(prep.candidates))) if select is None else list(select)
    P = model.params
    parts: list[ag.Tensor] = []
    if cfg.feature_mode in ("LF", "NFCM"):
        used = {0}
        for r in rows_sel:
            used.update(prep.from_s[r])
            used.update(prep.from_t[r])
        order = sorted(used)
        remap = {s: i for i, s in enumerate(order)}
        H = encode_sequences(model, g, [prep.seqs[s] for s in order], dropout_rng)
        v_q = ag.rows(H, np.zeros(len(rows_sel), dtype=np.int64))
        A_s = _count_matrix([prep.from_s[r] for r in rows_sel], remap, len(order))
        A_t = _count_matrix([prep.from_t[r] for r in rows_sel], remap, len(order))
        parts += [v_q, ag.matmul(ag.Tensor(A_s), H), ag.matmul(ag.Tensor(A_t), H)]
    if cfg.feature_mode in ("HF", "NFCM"):
        parts.append(ag.Tensor(prep.features[rows_sel]))
    z = parts[0] if len(parts) == 1 else ag.concat(parts, axis=1)
    if z.shape[1] != model.input_dim:
        raise DataError(f"input width {z.shape[1]} does not match the model ({model.input_dim})")
    for i in range(cfg.alpha):
        z = ag.relu(ag.add(ag.matmul(z, P[f"mlp_W{i}"]), P[f"mlp_b{i}"]))
    return ag.sigmoid(ag.add(ag.matmul(z, P["out_W"]), P["out_b"]))


def pairwise_loss(scores: ag.Tensor, labels: np.ndarray) -> ag.Tensor:
    """(1/|B|) * sum over B x B of ((l1 - l2) - (u1 - u2))**2, self-pairs included."""
    n = scores.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    d = ag.sub(ag.Tensor(np.asarray(labels, dtype=np.float64).reshape(n, 1)), scores)
    diff = ag.sub(d, ag.transpose(d))  # diff[i, j] = d_i - d_j
    return ag.scale(ag.total(ag.square(diff)), 1.0 / n)


def l2_penalty(model: RankerModel) -> ag.Tensor:
    terms = [ag.total(ag.square(model.params[k])) for k in model.kernel_names()]
    acc = terms[0]
    for t in terms[1:]:
        acc = ag.add(acc, t)
    return ag.scale(acc, model.config.l2_mlp_kernel)


# -- public scoring API -------------------------------------------------------

def _single_query(batch: Sequence[tuple[Fact, Fact, int]]) -> Fact:
    if not batch:
        raise ValueError("empty batch")
    queries = {f_q for f_q, _, _ in batch}
    if len(queries) != 1:
        raise ValueError("a batch must hold candidates of a single query fact")
    return queries.pop()


def batch_loss(model: RankerModel, g: KnowledgeGraph, batch: Sequence[tuple[Fact, Fact, int]]) -> float:
    """Pairwise loss of a single-query batch of ``(f_q, f_c, label)`` triples."""
    f_q = _single_query(batch)
    prep = prepare_query(model, g, f_q, [c for _, c, _ in batch], [l for _, _, l in batch])
    return float(pairwise_loss(forward(model, g, prep), prep.labels).data)


def batch_loss_and_grads(model: RankerModel, g: KnowledgeGraph,
                         batch: Sequence[tuple[Fact, Fact, int]]) -> tuple[float, dict[str, np.ndarray]]:
    """Loss of ``batch`` and its gradient with respect to every parameter."""
    f_q = _single_query(batch)
    prep = prepare_query(model, g, f_q, [c for _, c, _ in batch], [l for _, _, l in batch])
    for p in model.params.values():
        p.grad = None
    loss = pairwise_loss(forward(model, g, prep), prep.labels)
    loss.backward()
    grads = {k: (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for k, p in model.params.items()}
    return float(loss.data), grads


def score(model: RankerModel, g: KnowledgeGraph, f_q: Fact, f_c: Fact, x: np.ndarray | None = None) -> float:
    """Relevance score in [0, 1] of ``f_c`` for ``f_q``."""
    prep = prepare_query(model, g, f_q, [f_c], features=None if x is None else np.asarray(x)[None, :])
    return float(forward(model, g, prep).data[0, 0])


def score_prepared(model: RankerModel, g: KnowledgeGraph, prep: PreparedQuery) -> np.ndarray:
    if not prep.candidates:
        return np.zeros(0)
    return forward(model, g, prep).data[:, 0].copy()


def rank(model: RankerModel, g: KnowledgeGraph, f_q: Fact, F: CandidateSet | Sequence[Fact]) -> list[tuple[Fact, float]]:
    """Candidates sorted by score, descending; ties by serialized fact."""
    candidates = list(F.candidates if isinstance(F, CandidateSet) else F)
    if not candidates:
        return []
    prep = prepare_query(model, g, f_q, candidates)
    return rank_by_score(zip(candidates, score_prepared(model, g, prep).tolist()))


# -- training ----------------------------------------------------------------

@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    validation_ndcg5: float


def _prepare_split(model, g, instances, split, threads):
    grouped = group_by_query(instances, split)

    def prep(item):
        f_q, rows = item
        return prepare_query(model, g, f_q, [r.candidate for r in rows], [r.label for r in rows])

    items = list(grouped.items())
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(prep, items))
    return [prep(it) for it in items]


def validation_ndcg(model: RankerModel, g: KnowledgeGraph, prepared: Sequence[PreparedQuery], k: int = 5) -> float:
    values = []
    for prep in prepared:
        if prep.labels is None or prep.labels.sum() == 0:
            continue
        scores = score_prepared(model, g, prep)
        order = sorted(range(len(scores)), key=lambda i: (-scores[i], prep.candidates[i].key()))
        values.append(ndcg_at([prep.labels[i] for i in order], k))
    return float(np.mean(values)) if values else 0.0


def sample_batch(rng: np.random.Generator, labels: np.ndarray, k: int) -> list[int] | None:
    """All positive rows plus ``k`` distinct negatives (all of them if fewer); None without positives."""
    pos = np.flatnonzero(labels > 0)
    if len(pos) == 0:
        return None
    neg = np.flatnonzero(labels == 0)
    take = min(k, len(neg))
    picked = rng.choice(neg, size=take, replace=False) if take else np.zeros(0, dtype=np.int64)
    return np.concatenate([pos, np.sort(picked)]).tolist()


def train_step(model: RankerModel, g: KnowledgeGraph, opt: ag.Adam, prep: PreparedQuery,
               select: Sequence[int], dropout_rng: np.random.Generator | None) -> float:
    opt.zero_grad()
    scores = forward(model, g, prep, select, dropout_rng)
    loss = pairwise_loss(scores, prep.labels[list(select)])
    objective = ag.add(loss, l2_penalty(model)) if model.config.l2_mlp_kernel > 0 else loss
    objective.backward()
    opt.step()
    return float(loss.data)


def train(model: RankerModel, g: KnowledgeGraph, dataset: Sequence[LabeledInstance],
          cfg: RankerConfig | None = None, threads: int = 1) -> tuple[RankerModel, list[EpochLog]]:
    """Fit ``model`` on the training split, keeping the best validation NDCG@5 epoch."""
    cfg = cfg or model.config
    train_q = [p for p in _prepare_split(model, g, dataset, "train", threads) if len(p.candidates)]
    if not any(p.labels.sum() > 0 for p in train_q):
        raise DataError("training split has no relevant instances")
    val_q = _prepare_split(model, g, dataset, "validation", threads)

    opt = ag.Adam(model.params, lr=cfg.learning_rate)
    sampler = substream(cfg.seed, "sampling")
    dropout_rng = substream(cfg.seed, "dropout") if cfg.dropout_rate > 0 else None
    history: list[EpochLog] = []
    best_score, best_params = -math.inf, model.numpy_params()
    for epoch in range(1, cfg.epochs + 1):
        losses = []
        for qi in sampler.permutation(len(train_q)):
            prep = train_q[qi]
            select = sample_batch(sampler, prep.labels, cfg.k)
            if select is None:
                continue
            losses.append(train_step(model, g, opt, prep, select, dropout_rng))
        val = validation_ndcg(model, g, val_q) if val_q else 0.0
        history.append(EpochLog(epoch, float(np.mean(losses)) if losses else 0.0, val))
        log.info("epoch %d loss %.5f val ndcg@5 %.4f", epoch, history[-1].train_loss, val)
        if val > best_score:
            best_score, best_params = val, model.numpy_params()
    model.set_params(best_params)
    return model, history


# -- checkpoints ---------------------------------------------------------------

def save_model(model: RankerModel, path: str | Path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "enum": asdict(model.enum),
        "vocab": asdict(model.vocab),
        "params": {k: {"shape": list(t.data.shape), "data": t.data.ravel().tolist()}
                   for k, t in sorted(model.params.items())},
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> RankerModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such checkpoint: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except ValueError as exc:
            raise DataError(f"{path}: not a JSON checkpoint ({exc})") from None
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint format/version")
    params = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in doc["params"].items()}
    return RankerModel(RankerConfig(**doc["config"]), Vocab(**doc["vocab"]), EnumConfig(**doc["enum"]), params)
