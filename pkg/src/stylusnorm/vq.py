"""Multi-section vector quantization with a channel-weighted distance.

Each user model holds one LBG codebook per temporal section of the
signature. A test signature is scored by the mean distance of its vectors to
the nearest centroid of the matching section, averaged over sections.
Scores are dissimilarities: lower means closer to the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .dataio import Signature, split_sections

UNIT_WEIGHTS = (1.0, 1.0, 1.0, 1.0, 1.0)


def as_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if np.any(~(w >= 0)):
        raise ValueError("weights must be non-negative")
    return w


def weighted_distance(a, b, w=UNIT_WEIGHTS) -> float:
    """``sqrt(sum((w_i * (a_i - b_i))**2))``."""
    d = as_weights(w) * (np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    return float(np.sqrt(np.dot(d, d)))


def _nearest(vectors: np.ndarray, centroids: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of and squared weighted distance to the nearest centroid.

    Ties go to the lowest centroid index.
    """
    d2 = cdist(vectors * w, centroids * w, "sqeuclidean")
    idx = np.argmin(d2, axis=1)
    return idx, d2[np.arange(len(vectors)), idx]


@dataclass(frozen=True, eq=False)
class Codebook:
    bits: int
    centroids: np.ndarray
    # mean squared weighted distortion of each k-means pass, one tuple per
    # codebook size visited while splitting
    history: tuple[tuple[float, ...], ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not 0 <= self.bits <= 8:
            raise ValueError(f"bits must lie in [0, 8], got {self.bits}")
        if len(self.centroids) != 2**self.bits:
            raise ValueError(f"{self.bits}-bit codebook needs {2**self.bits} centroids, got {len(self.centroids)}")


def lbg_train(
    vectors,
    bits: int,
    w=UNIT_WEIGHTS,
    *,
    seed: int = 0,
    rel_tol: float = 1e-4,
    max_iter: int = 50,
    split_scale: float = 0.01,
) -> Codebook:
    """Train a ``2**bits`` codebook by centroid splitting and weighted k-means.

    Starting from the global mean, every centroid is split into ``c +/- eps``
    (``eps`` is ``split_scale`` times the per-channel standard deviation) and
    refined by k-means until the relative distortion improvement falls below
    ``rel_tol``. An empty cell takes a random vector of the fullest cell.
    """
    X = np.asarray(vectors, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("vectors must be a non-empty 2-D array")
    if len(X) < 2**bits:
        raise ValueError(f"{len(X)} vectors cannot train a {bits}-bit codebook ({2**bits} centroids)")
    w = as_weights(w)
    rng = np.random.default_rng(seed)
    eps = split_scale * X.std(axis=0)
    codebook = X.mean(axis=0, keepdims=True)
    _, d2 = _nearest(X, codebook, w)
    history = [(float(d2.mean()),)]
    for _ in range(bits):
        codebook = np.concatenate([codebook + eps, codebook - eps])
        stage: list[float] = []
        codebook = _kmeans(X, codebook, w, rng, rel_tol, max_iter, stage)
        history.append(tuple(stage))
    return Codebook(bits, codebook, tuple(history))


def _kmeans(X, codebook, w, rng, rel_tol, max_iter, history) -> np.ndarray:
    codebook = codebook.copy()
    k = len(codebook)
    prev = np.inf
    for _ in range(max_iter):
        labels, d2 = _nearest(X, codebook, w)
        dist = float(d2.mean())
        history.append(dist)
        if dist == 0.0 or (np.isfinite(prev) and (prev - dist) <= rel_tol * prev):
            break
        prev = dist
        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts):
            codebook[j] = X[labels == j].mean(axis=0)
        for j in np.flatnonzero(counts == 0):
            fullest = int(np.argmax(counts))
            members = np.flatnonzero(labels == fullest)
            codebook[j] = X[members[rng.integers(len(members))]]
            counts[fullest] -= 1
            counts[j] = 1
    return codebook


def quantization_distortion(cb: Codebook | np.ndarray, vectors, w=UNIT_WEIGHTS) -> float:
    """Mean distance from each vector to its nearest centroid."""
    X = np.asarray(vectors, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("no vectors to quantize")
    centroids = cb.centroids if isinstance(cb, Codebook) else np.asarray(cb, dtype=float)
    _, d2 = _nearest(X, centroids, as_weights(w))
    return float(np.sqrt(d2).mean())


@dataclass(frozen=True, eq=False)
class MultiSectionModel:
    user_id: str
    codebooks: tuple[Codebook, ...]
    weights: np.ndarray
    # translate x/y so every signature starts at the origin
    recenter: bool = False

    def __post_init__(self):
        if not self.codebooks:
            raise ValueError("a model needs at least one codebook")
        if len({cb.bits for cb in self.codebooks}) != 1:
            raise ValueError("all section codebooks must have the same size")
        object.__setattr__(self, "weights", as_weights(self.weights))

    @property
    def s(self) -> int:
        return len(self.codebooks)

    @property
    def bits(self) -> int:
        return self.codebooks[0].bits


def _features(sig, recenter: bool = False) -> np.ndarray:
    X = sig.features if isinstance(sig, Signature) else np.asarray(sig, dtype=float)
    if recenter and len(X):
        X = X.copy()
        X[:, :2] -= X[0, :2]
    return X


def train_user_model(
    train: Sequence[Signature],
    s: int = 2,
    bits: int = 6,
    w=UNIT_WEIGHTS,
    *,
    user_id: str | None = None,
    seed: int = 0,
    recenter: bool = False,
) -> MultiSectionModel:
    """Pool section-k vectors of every training signature into codebook k.

    With ``recenter`` the x/y channels are translated so each signature
    starts at the origin; the flag is stored and applied again when scoring.
    """
    if not train:
        raise ValueError("need at least one training signature")
    pools = [[] for _ in range(s)]
    for sig in train:
        for k, part in enumerate(split_sections(_features(sig, recenter), s)):
            pools[k].append(part)
    codebooks = []
    for k, parts in enumerate(pools):
        X = np.concatenate(parts)
        if len(X) < 2**bits:
            raise ValueError(f"section {k + 1}: {len(X)} pooled vectors, need {2**bits} for {bits} bits")
        codebooks.append(lbg_train(X, bits, w, seed=seed + k))
    if user_id is None:
        user_id = train[0].user_id if isinstance(train[0], Signature) else ""
    return MultiSectionModel(user_id, tuple(codebooks), as_weights(w), recenter)


def score(model: MultiSectionModel, sig) -> float:
    """Mean over sections of the section's quantization distortion."""
    X = _features(sig, model.recenter)
    if len(X) < model.s:
        raise ValueError(f"signature of {len(X)} samples is shorter than {model.s} sections")
    parts = split_sections(X, model.s)
    return float(np.mean([quantization_distortion(cb, part, model.weights) for cb, part in zip(model.codebooks, parts)]))


def score_matrix(models: Sequence[MultiSectionModel], sigs: Sequence) -> np.ndarray:
    """``out[i, j] = score(models[j], sigs[i])``, batched per model section."""
    out = np.zeros((len(sigs), len(models)))
    if not len(sigs) or not models:
        return out
    s, recenter = models[0].s, models[0].recenter
    if any(m.s != s or m.recenter != recenter for m in models):
        raise ValueError("all models must use the same section count and recentering")
    feats = [_features(sig, recenter) for sig in sigs]
    for i, X in enumerate(feats):
        if len(X) < s:
            raise ValueError(f"signature {i} has {len(X)} samples, fewer than {s} sections")
    sections = [split_sections(X, s) for X in feats]
    for k in range(s):
        stacked = np.concatenate([sec[k] for sec in sections])
        owner = np.repeat(np.arange(len(feats)), [len(sec[k]) for sec in sections])
        counts = np.bincount(owner, minlength=len(feats))
        for j, model in enumerate(models):
            _, d2 = _nearest(stacked, model.codebooks[k].centroids, model.weights)
            out[:, j] += np.bincount(owner, weights=np.sqrt(d2), minlength=len(feats)) / counts
    return out / s


def format_model(model: MultiSectionModel) -> str:
    weights = ",".join(repr(float(v)) for v in model.weights)
    header = f"#VQMODEL v1 user={model.user_id} s={model.s} bits={model.bits} weights={weights}"
    if model.recenter:
        header += " recenter=1"
    lines = [header]
    for k, cb in enumerate(model.codebooks, 1):
        lines.append(f"#section {k}")
        lines += [" ".join(repr(float(v)) for v in row) for row in cb.centroids]
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> MultiSectionModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#VQMODEL v1"):
        raise ValueError("line 1: expected '#VQMODEL v1' header")
    fields = dict(item.split("=", 1) for item in lines[0].split()[2:])
    try:
        s, bits = int(fields["s"]), int(fields["bits"])
        weights = [float(v) for v in fields["weights"].split(",")]
        user = fields["user"]
        recenter = bool(int(fields.get("recenter", "0")))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"line 1: malformed model header ({exc})") from None
    blocks: list[list[list[float]]] = []
    for ln in lines[1:]:
        if ln.startswith("#section"):
            blocks.append([])
        elif not blocks:
            raise ValueError("centroid row before the first '#section' marker")
        else:
            blocks[-1].append([float(v) for v in ln.split()])
    if len(blocks) != s:
        raise ValueError(f"header declares {s} sections, found {len(blocks)}")
    codebooks = tuple(Codebook(bits, np.array(b)) for b in blocks)
    return MultiSectionModel(user, codebooks, np.array(weights), recenter)
