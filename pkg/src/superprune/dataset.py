"""Labeled datasets: construction, ClusterCentroids balancing, feature selection.

Everything here is deterministic given its seed, so a dataset CSV written
twice from the same corpus is byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._io import write_atomic
from .features import FEATURE_NAMES, FeatureConfig, extract_many
from .ir import Block
from .semantics import OracleConfig, Status, check_equivalence
from .synth import SynthConfig, enumerate_candidates

log = logging.getLogger(__name__)

N_FEATURES = len(FEATURE_NAMES)
CSV_HEADER = ("lhs_id", "rhs_id") + FEATURE_NAMES + ("label", "sampled")
CENTROID = "centroid"


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    sampled: np.ndarray
    lhs_ids: list[str]
    rhs_ids: list[str]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, N_FEATURES)
        self.y = np.asarray(self.y, dtype=int)
        self.sampled = np.asarray(self.sampled, dtype=bool)
        n = len(self.X)
        if not (len(self.y) == len(self.sampled) == len(self.lhs_ids) == len(self.rhs_ids) == n):
            raise ValueError("dataset columns have different lengths")
        if n and not set(np.unique(self.y)) <= {0, 1}:
            raise ValueError("labels must be 0 or 1")

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx) -> LabeledDataset:
        idx = np.asarray(idx, dtype=int)
        return LabeledDataset(self.X[idx], self.y[idx], self.sampled[idx],
                              [self.lhs_ids[i] for i in idx], [self.rhs_ids[i] for i in idx],
                              dict(self.provenance))

    def class_counts(self) -> tuple[int, int]:
        return int((self.y == 0).sum()), int((self.y == 1).sum())

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i in range(len(self)):
            w.writerow([self.lhs_ids[i], self.rhs_ids[i], *map(repr, self.X[i].tolist()),
                        int(self.y[i]), int(self.sampled[i])])
        text = buf.getvalue()
        if path is not None:
            write_atomic(path, text)
        return text

    @classmethod
    def from_csv(cls, path: str | Path) -> LabeledDataset:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected dataset header")
        body = rows[1:]
        X = np.array([[float(v) for v in r[2:2 + N_FEATURES]] for r in body], dtype=float)
        return cls(X, [int(r[-2]) for r in body], [r[-1] == "1" for r in body],
                   [r[0] for r in body], [r[1] for r in body], {"source": str(path)})


def _label(lhs_id: str, lhs: Block, cands: list[Block], oracle_cfg: OracleConfig,
           feature_cfg: FeatureConfig):
    keep, ys, flags, rids = [], [], [], []
    dropped = 0
    for k, c in enumerate(cands):
        v = check_equivalence(lhs, c, oracle_cfg)
        if v.status is Status.UNKNOWN:
            dropped += 1
            continue
        keep.append(c)
        ys.append(int(v.equivalent))
        flags.append(v.sampled)
        rids.append(f"{lhs_id}#{k}")
    return extract_many(lhs, keep, feature_cfg), ys, flags, rids, dropped


def build_dataset(corpus: dict[str, Block], synth_cfg: SynthConfig = SynthConfig(),
                  oracle_cfg: OracleConfig = OracleConfig(),
                  feature_cfg: FeatureConfig = FeatureConfig(), *,
                  candidates: dict[str, list[Block]] | None = None,
                  jobs: int = 1) -> LabeledDataset:
    """Enumerate, label and featurize candidates for every LHS in ``corpus``.

    ``candidates`` may supply already enumerated candidates per LHS id.
    Rows whose verdict is Unknown are dropped; their count is kept in
    ``provenance["dropped_unknown"]``.
    """
    ids = list(corpus)
    cands = [candidates[i] if candidates and i in candidates
             else enumerate_candidates(corpus[i], synth_cfg) for i in ids]
    args = [(i, corpus[i], c, oracle_cfg, feature_cfg) for i, c in zip(ids, cands)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            parts = list(pool.map(_label, *zip(*args)))
    else:
        parts = [_label(*a) for a in args]
    Xs, ys, flags, lids, rids = [], [], [], [], []
    dropped = 0
    for lhs_id, (X, y, f, r, d) in zip(ids, parts):
        Xs.append(X)
        ys += y
        flags += f
        rids += r
        lids += [lhs_id] * len(y)
        dropped += d
    if dropped:
        log.warning("dropped %d candidates with unknown verdicts", dropped)
    X = np.vstack(Xs) if Xs else np.zeros((0, N_FEATURES))
    cfg_hash = hashlib.blake2b(repr((synth_cfg, oracle_cfg.digest())).encode(),
                               digest_size=8).hexdigest()
    return LabeledDataset(X, ys, flags, lids, rids,
                          {"lhs_count": len(corpus), "config_hash": cfg_hash,
                           "dropped_unknown": dropped})


# ------------------------------------------------------------------ k-means

def _kmeans_pp(X: np.ndarray, w: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    first = rng.choice(n, p=w / w.sum())
    centers = [X[first]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        mass = w * d2
        total = mass.sum()
        i = rng.choice(n, p=mass / total if total > 0 else w / w.sum())
        centers.append(X[i])
        d2 = np.minimum(d2, ((X - X[i]) ** 2).sum(axis=1))
    return np.array(centers)


def kmeans(X: np.ndarray, k: int, seed: int, max_iter: int = 100,
           weights: np.ndarray | None = None) -> np.ndarray:
    """Lloyd's algorithm from a k-means++ start; empty clusters keep their center.

    ``weights`` counts how often each row occurs, so duplicated rows can be
    passed once.
    """
    X = np.asarray(X, dtype=float)
    w = np.ones(len(X)) if weights is None else np.asarray(weights, dtype=float)
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(X, w, k, rng)
    for _ in range(max_iter):
        # squared distances without materializing an (n, k, d) tensor
        d = (X ** 2).sum(axis=1)[:, None] - 2 * X @ centers.T + (centers ** 2).sum(axis=1)
        assign = d.argmin(axis=1)
        sums = np.zeros_like(centers)
        np.add.at(sums, assign, X * w[:, None])
        mass = np.bincount(assign, weights=w, minlength=k)
        new = centers.copy()
        hit = mass > 0
        new[hit] = sums[hit] / mass[hit, None]
        if np.array_equal(new, centers):
            break
        centers = new
    return centers


def cluster_centroids_balance(ds: LabeledDataset, seed: int = 0) -> LabeledDataset:
    """Replace the majority class by as many k-means centroids as there are minority rows.

    Clustering runs in standardized feature space; centroids are mapped
    back to raw feature units. Minority rows are kept verbatim.
    """
    n0, n1 = ds.class_counts()
    if min(n0, n1) == 0:
        raise ValueError("both classes must be present to balance")
    if n0 == n1:
        return ds
    major, minor = (0, 1) if n0 > n1 else (1, 0)
    k = min(n0, n1)
    mean = ds.X.mean(axis=0)
    std = ds.X.std(axis=0)
    std[std == 0] = 1.0
    Z = (ds.X[ds.y == major] - mean) / std
    rows, counts = np.unique(Z, axis=0, return_counts=True)
    centers = kmeans(rows, k, seed, weights=counts) * std + mean
    keep = np.flatnonzero(ds.y == minor)
    out_X = np.vstack([centers, ds.X[keep]])
    out_y = np.concatenate([np.full(k, major), ds.y[keep]])
    sampled = np.concatenate([np.zeros(k, bool), ds.sampled[keep]])
    lids = [CENTROID] * k + [ds.lhs_ids[i] for i in keep]
    rids = [f"{CENTROID}_{j}" for j in range(k)] + [ds.rhs_ids[i] for i in keep]
    return LabeledDataset(out_X, out_y, sampled, lids, rids,
                          dict(ds.provenance, balanced_seed=seed))


def split(ds: LabeledDataset, ratio: float = 0.8, seed: int = 0) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded shuffle, stratified by label."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in (0, 1):
        idx = np.flatnonzero(ds.y == label)
        rng.shuffle(idx)
        cut = int(round(ratio * len(idx)))
        train.extend(idx[:cut])
        test.extend(idx[cut:])
    train = np.array(sorted(train), dtype=int)
    test = np.array(sorted(test), dtype=int)
    return ds.subset(rng.permutation(train)), ds.subset(rng.permutation(test))


# -------------------------------------------------------- feature selection

def mutual_information(column, labels, bins: int = 10) -> float:
    """MI in nats between a column discretized into equal-width bins and the labels."""
    col = np.asarray(column, dtype=float)
    lab = np.asarray(labels)
    lo, hi = col.min(), col.max()
    if hi == lo:
        return 0.0
    b = np.minimum(((col - lo) / (hi - lo) * bins).astype(int), bins - 1)
    _, lab_idx = np.unique(lab, return_inverse=True)
    joint = np.zeros((bins, lab_idx.max() + 1))
    np.add.at(joint, (b, lab_idx), 1)
    joint /= joint.sum()
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(max(0.0, (joint[nz] * np.log(joint[nz] / (px @ py)[nz])).sum()))


def feature_scores(ds: LabeledDataset) -> np.ndarray:
    return np.array([mutual_information(ds.X[:, j], ds.y) for j in range(N_FEATURES)])


@dataclass(frozen=True)
class FeatureMask:
    indices: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("mask indices must be distinct")
        if any(not 0 <= i < N_FEATURES for i in self.indices):
            raise ValueError("mask index out of range")

    @property
    def k(self) -> int:
        return len(self.indices)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(FEATURE_NAMES[i] for i in self.indices)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X)[..., list(self.indices)]


def select_k_best(ds: LabeledDataset, k: int = 14, scores: np.ndarray | None = None) -> FeatureMask:
    """The ``k`` highest-scoring features; ties go to the earlier feature."""
    if not 1 <= k <= N_FEATURES:
        raise ValueError(f"k must lie in [1, {N_FEATURES}]")
    if scores is None:
        scores = feature_scores(ds)
    order = sorted(range(N_FEATURES), key=lambda j: (-scores[j], j))
    return FeatureMask(tuple(sorted(order[:k])))


# ---------------------------------------------------------- standardization

@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray


def standardize_fit(X: np.ndarray) -> Scaler:
    # sorting first makes the statistics bit-identical under row permutation
    X = np.sort(np.asarray(X, dtype=float), axis=0)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return Scaler(mean, np.where(std == 0, 1.0, std))


def standardize_apply(scaler: Scaler, X: np.ndarray) -> np.ndarray:
    return (np.asarray(X, dtype=float) - scaler.mean) / scaler.std
