"""Unseen-object discovery: where is a missing object most likely to be?

Each (object label, room|receptacle label) pair is embedded with signed
feature hashing over role-tagged tokens. A filter network classifies pairs as
probable or implausible; a ranking network scores the probable ones. Search
order for an unseen object is its surviving candidates by descending score.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import spearmanr

from .checkpoint import load_checkpoint, save_checkpoint
from .gridworld import Receptacle
from .nn import MLP, Adam, sigmoid, softmax
from .vocab import PriorRow, load_prior_table, object_category

LOG_EPS = 1e-12
N_HASHES = 4
_SPLIT = re.compile(r"[|_\s\-]+")


class UodmError(ValueError):
    pass


class EmptyLabelError(UodmError):
    pass


class DegenerateTableError(UodmError):
    pass


def _tokens(label: str) -> list[str]:
    return [t for t in _SPLIT.split(label.strip().lower()) if t]


@lru_cache(maxsize=65536)
def _bucket(token: str, k: int, dim: int) -> tuple[int, float]:
    h = hashlib.blake2b(f"{k}:{token}".encode(), digest_size=8).digest()
    v = int.from_bytes(h, "little")
    return v % dim, 1.0 if (v >> 40) & 1 else -1.0


def hash_tokens(tokens: Sequence[str], dim: int) -> np.ndarray:
    vec = np.zeros(dim)
    for tok in tokens:
        for k in range(N_HASHES):
            b, s = _bucket(tok, k, dim)
            vec[b] += s
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def embed_label(label: str, dim: int = 16) -> np.ndarray:
    """Unit-norm hashed features of a single object label."""
    toks = _tokens(label)
    if not toks:
        raise EmptyLabelError("empty label")
    return hash_tokens(["o:" + t for t in toks], dim)


@lru_cache(maxsize=16384)
def _embed_orr_cached(object_label: str, rr_label: str, dim: int) -> np.ndarray:
    obj = _tokens(object_label)
    parts = [p for p in rr_label.split("|")]
    if not obj or not any(_tokens(p) for p in parts):
        raise EmptyLabelError(f"empty label in ({object_label!r}, {rr_label!r})")
    toks = ["o:" + t for t in obj]
    cat = object_category(object_label.strip().lower())
    if cat is not None:
        toks.append("k:" + cat)
    if len(parts) > 1:
        toks += ["r:" + t for t in _tokens(parts[0])]
        parts = parts[1:]
    toks += ["c:" + t for p in parts for t in _tokens(p)]
    vec = hash_tokens(toks, dim)
    vec.setflags(write=False)
    return vec


def embed_orr(object_label: str, rr_label: str, dim: int = 64) -> np.ndarray:
    """Deterministic unit-norm embedding of an object/room-receptacle pair."""
    return _embed_orr_cached(object_label, rr_label, dim)


def filter_loss(p: np.ndarray, y: np.ndarray) -> float:
    """Mean two-class cross-entropy; probabilities are clamped at 1e-12 before the log."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return float(-(y * np.log(np.maximum(p, LOG_EPS))).sum() / p.shape[0])


def rank_loss(pred: Sequence[float], true: Sequence[float]) -> float:
    pred = np.asarray(pred, dtype=float)
    true = np.asarray(true, dtype=float)
    if pred.shape != true.shape:
        raise UodmError(f"length mismatch {pred.shape} vs {true.shape}")
    return float(np.mean((pred - true) ** 2))


@dataclass(frozen=True)
class UodmConfig:
    embed_dim: int = 64
    hidden: tuple[int, ...] = (64, 64)
    epochs: int = 400
    lr: float = 3e-3
    holdout: float = 0.2
    seed: int = 0


@dataclass
class UodmReport:
    filter_accuracy: float
    rank_spearman: float
    filter_curve: list[float] = field(default_factory=list)
    rank_curve: list[float] = field(default_factory=list)
    n_train: int = 0
    n_heldout: int = 0


class UodmModel:
    PROBABLE, IMPLAUSIBLE = 0, 1

    def __init__(self, embed_dim: int = 64, hidden: Sequence[int] = (64, 64), rng: np.random.Generator | None = None):
        self.embed_dim = embed_dim
        self.hidden = tuple(hidden)
        rng = rng or np.random.default_rng(0)
        self.filter_net = MLP([embed_dim, *hidden, 2], rng)
        self.rank_net = MLP([embed_dim, *hidden, 1], rng)
        self._cache: dict[tuple[str, str], tuple[bool, float]] = {}

    def embed(self, pairs: Sequence[tuple[str, str]]) -> np.ndarray:
        return np.stack([embed_orr(o, r, self.embed_dim) for o, r in pairs]) if pairs else np.zeros((0, self.embed_dim))

    def filter_probs(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.filter_net(x))

    def rank_scores(self, x: np.ndarray) -> np.ndarray:
        return sigmoid(self.rank_net(x))[:, 0]

    def score(self, object_label: str, rr_labels: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        """(probable mask, ranking score) per room-receptacle label."""
        missing = [r for r in rr_labels if (object_label, r) not in self._cache]
        if missing:
            x = self.embed([(object_label, r) for r in missing])
            probable = self.filter_probs(x).argmax(axis=1) == self.PROBABLE
            scores = self.rank_scores(x)
            for r, p, s in zip(missing, probable, scores):
                self._cache[(object_label, r)] = (bool(p), float(s))
        vals = [self._cache[(object_label, r)] for r in rr_labels]
        return np.array([v[0] for v in vals], dtype=bool), np.array([v[1] for v in vals])

    # -- persistence

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name, net in (("filter", self.filter_net), ("rank", self.rank_net)):
            for i, p in enumerate(net.params):
                out[f"{name}.{i // 2}.{'W' if i % 2 == 0 else 'b'}"] = p
        return out

    def save(self, path: str | Path, step: int = 0, meta: dict | None = None) -> None:
        info = {"embed_dim": self.embed_dim, "hidden": list(self.hidden), **(meta or {})}
        save_checkpoint(path, "uodm", self.tensors(), info, step)

    @classmethod
    def load(cls, path: str | Path) -> "UodmModel":
        _, tensors, meta, _ = load_checkpoint(path, "uodm")
        model = cls(int(meta["embed_dim"]), tuple(meta["hidden"]))
        for name, net in (("filter", model.filter_net), ("rank", model.rank_net)):
            for i in range(len(net.params)):
                key = f"{name}.{i // 2}.{'W' if i % 2 == 0 else 'b'}"
                if tensors[key].shape != net.params[i].shape:
                    raise UodmError(f"shape mismatch for {key}")
                net.params[i] = tensors[key].copy()
        return model


def split_table(rows: Sequence[PriorRow], holdout: float, seed: int):
    """Deterministic train/held-out split, stratified by class."""
    rng = np.random.default_rng(seed)
    train, held = [], []
    for cls in (True, False):
        idx = [i for i, r in enumerate(rows) if r.probable == cls]
        idx = [idx[i] for i in rng.permutation(len(idx))]
        n_held = int(round(holdout * len(idx)))
        held += idx[:n_held]
        train += idx[n_held:]
    return [rows[i] for i in sorted(train)], [rows[i] for i in sorted(held)]


def train_uodm(rows: Sequence[PriorRow] | None = None, config: UodmConfig = UodmConfig()) -> tuple[UodmModel, UodmReport]:
    """Train the filter (cross-entropy, all pairs) and ranker (MSE, probable pairs) full-batch with Adam."""
    rows = list(load_prior_table() if rows is None else rows)
    if len({r.probable for r in rows}) < 2:
        raise DegenerateTableError("prior table needs both probable and implausible pairs")
    train, held = split_table(rows, config.holdout, config.seed) if config.holdout > 0 else (rows, [])
    rng = np.random.default_rng(config.seed)
    model = UodmModel(config.embed_dim, config.hidden, rng)

    x = model.embed([(r.object_label, r.room_receptacle_label) for r in train])
    y = np.zeros((len(train), 2))
    y[np.arange(len(train)), [0 if r.probable else 1 for r in train]] = 1.0
    opt = Adam(model.filter_net.params, lr=config.lr)
    filter_curve = []
    for _ in range(config.epochs):
        logits, cache = model.filter_net.forward(x)
        p = softmax(logits)
        filter_curve.append(filter_loss(p, y))
        grads, _ = model.filter_net.backward(cache, (p - y) / len(train))
        opt.step(model.filter_net.params, grads)

    prob = [r for r in train if r.probable]
    xr = model.embed([(r.object_label, r.room_receptacle_label) for r in prob])
    chi = np.array([r.score for r in prob])
    opt = Adam(model.rank_net.params, lr=config.lr)
    rank_curve = []
    for _ in range(config.epochs):
        z, cache = model.rank_net.forward(xr)
        s = sigmoid(z)[:, 0]
        rank_curve.append(rank_loss(s, chi))
        dz = (2.0 / len(prob)) * (s - chi) * s * (1 - s)
        grads, _ = model.rank_net.backward(cache, dz[:, None])
        opt.step(model.rank_net.params, grads)
    model._cache.clear()

    acc, rho = float("nan"), float("nan")
    if held:
        xh = model.embed([(r.object_label, r.room_receptacle_label) for r in held])
        pred = model.filter_probs(xh).argmax(axis=1) == UodmModel.PROBABLE
        acc = float(np.mean(pred == np.array([r.probable for r in held])))
        hp = [r for r in held if r.probable]
        if len(hp) > 1:
            s = model.rank_scores(model.embed([(r.object_label, r.room_receptacle_label) for r in hp]))
            rho = float(spearmanr(s, [r.score for r in hp]).statistic)
    report = UodmReport(acc, rho, filter_curve, rank_curve, len(train), len(held))
    return model, report


def rank_candidates(model: UodmModel, object_label: str, candidates: Sequence[Receptacle]) -> list[Receptacle]:
    """Probable candidates by descending score (ties by receptacle id).

    When the filter rejects every candidate, all of them are ranked instead.
    """
    if not candidates:
        return []
    probable, scores = model.score(object_label, [c.label for c in candidates])
    keep = [i for i in range(len(candidates)) if probable[i]] or list(range(len(candidates)))
    keep.sort(key=lambda i: (-scores[i], candidates[i].id))
    return [candidates[i] for i in keep]


def predict_locations(
    model: UodmModel, unseen_labels: dict[str, str], candidates: dict[str, Sequence[Receptacle]]
) -> dict[str, tuple[list[str], tuple[str, tuple[int, int]] | None]]:
    """Ordered candidate ids and the predicted (receptacle id, centroid) per unseen object."""
    out = {}
    for oid, label in unseen_labels.items():
        ranked = rank_candidates(model, label, candidates.get(oid, ()))
        out[oid] = ([r.id for r in ranked], (ranked[0].id, ranked[0].centroid) if ranked else None)
    return out


def apply_predictions(knowledge, model: UodmModel | None) -> None:
    """Refresh candidate order and predicted positions for every unseen object in ``knowledge``.

    With ``model=None`` the candidate lists keep their order (used by random search).
    """
    for oid in sorted(knowledge.unseen):
        cands = [knowledge.receptacle(r) for r in knowledge.candidate_receptacles.get(oid, [])]
        if model is not None:
            cands = rank_candidates(model, knowledge.goals[oid].label, cands)
            knowledge.candidate_receptacles[oid] = [r.id for r in cands]
        if cands:
            knowledge.predicted[oid] = (cands[0].id, cands[0].centroid)
        else:
            knowledge.predicted.pop(oid, None)
            knowledge.unfindable.add(oid)


def prune_candidate(knowledge, object_id: str, receptacle_id: str):
    """Drop a searched-and-empty receptacle from one object's candidates and count the attempt."""
    cands = knowledge.candidate_receptacles.get(object_id, [])
    if receptacle_id not in cands:
        raise UodmError(f"{receptacle_id} is not a candidate for {object_id}")
    cands.remove(receptacle_id)
    knowledge.discovery_attempts += 1
    if cands:
        knowledge.predicted[object_id] = (cands[0], knowledge.receptacle(cands[0]).centroid)
    else:
        knowledge.predicted.pop(object_id, None)
        knowledge.unfindable.add(object_id)
    return knowledge
