"""Geometry kernels over embedding mini-batches.

Pure float64 numpy functions: pairwise squared distances, class centers,
the k largest intra-class ranges, and the closest pair of class centers.
Ties are broken lexicographically so every result is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DegenerateGroupError",
    "EmbeddingBatch",
    "RangeStat",
    "CenterPair",
    "pairwise_sq_distances",
    "class_center",
    "top_k_ranges",
    "min_center_pair",
]


class DegenerateGroupError(ValueError):
    """A group has fewer than two samples, so no range exists."""


def _as_matrix(vectors) -> np.ndarray:
    try:
        arr = np.asarray(vectors, dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise ValueError("vectors must share one dimension") from exc
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty list of equal-length vectors, got shape {arr.shape}")
    return arr


@dataclass
class EmbeddingBatch:
    """A mini-batch of embedding vectors with identity labels.

    ``groups`` maps each identity to the ascending sample indices holding
    that label; it is derived from ``labels`` on construction, so every
    sample belongs to exactly one group.
    """

    embeddings: np.ndarray
    labels: list[int]
    groups: dict[int, list[int]] = field(init=False, repr=False)

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        if self.embeddings.ndim != 2 or self.embeddings.shape[1] < 1:
            raise ValueError(f"embeddings must be a 2-d array, got shape {self.embeddings.shape}")
        self.labels = [int(lab) for lab in self.labels]
        if len(self.labels) != self.embeddings.shape[0]:
            raise ValueError(
                f"{len(self.labels)} labels for {self.embeddings.shape[0]} embeddings"
            )
        by_id: dict[int, list[int]] = {}
        for idx, lab in enumerate(self.labels):
            by_id.setdefault(lab, []).append(idx)
        self.groups = {lab: by_id[lab] for lab in sorted(by_id)}

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def identities(self) -> list[int]:
        return list(self.groups)


@dataclass
class RangeStat:
    """Top ranges of one identity: squared distances, largest first,
    with the index pair realizing each one."""

    identity: int | None
    ranges: list[float]
    pairs: list[tuple[int, int]]

    def __post_init__(self):
        if len(self.ranges) != len(self.pairs):
            raise ValueError("ranges and pairs must align")
        if any(b < a for a, b in zip(self.ranges[1:], self.ranges)):
            raise ValueError("ranges must be non-increasing")


@dataclass
class CenterPair:
    """The two identities whose class centers are closest in the batch."""

    identity_a: int
    identity_b: int
    sq_distance: float
    center_a: np.ndarray
    center_b: np.ndarray


def pairwise_sq_distances(vectors) -> np.ndarray:
    """Symmetric matrix of squared Euclidean distances, zero diagonal."""
    v = _as_matrix(vectors)
    diff = v[:, None, :] - v[None, :, :]
    return np.einsum("ijc,ijc->ij", diff, diff)


def class_center(vectors) -> np.ndarray:
    """Component-wise arithmetic mean of the vectors."""
    return _as_matrix(vectors).mean(axis=0)


def top_k_ranges(group, k: int, identity: int | None = None) -> RangeStat:
    """The ``min(k, n_pairs)`` largest squared pairwise distances in a group.

    Equal distances are ordered by their lexicographically smallest index
    pair. Groups with a single sample raise DegenerateGroupError; the
    caller decides whether that is an error.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    v = _as_matrix(group)
    n = v.shape[0]
    if n < 2:
        raise DegenerateGroupError("need at least two samples to form a range")
    dmat = pairwise_sq_distances(v)
    iu, ju = np.triu_indices(n, 1)
    dists = dmat[iu, ju]
    # stable sort on the negated distances keeps the lexicographic pair
    # order (the triu enumeration order) among exact ties
    order = np.argsort(-dists, kind="stable")[: min(k, dists.shape[0])]
    return RangeStat(
        identity=identity,
        ranges=[float(dists[t]) for t in order],
        pairs=[(int(iu[t]), int(ju[t])) for t in order],
    )


def min_center_pair(batch: EmbeddingBatch) -> CenterPair:
    """The identity pair with the minimal squared distance between class
    centers, ties broken by the smaller identity-id pair."""
    ids = batch.identities
    if len(ids) < 2:
        raise ValueError("need at least two identities to compare centers")
    centers = {i: batch.embeddings[batch.groups[i]].mean(axis=0) for i in ids}
    best = None
    for a_pos, a in enumerate(ids):
        for b in ids[a_pos + 1 :]:
            d = centers[a] - centers[b]
            sq = float(d @ d)
            if best is None or sq < best[0]:
                best = (sq, a, b)
    sq, a, b = best
    return CenterPair(
        identity_a=a,
        identity_b=b,
        sq_distance=sq,
        center_a=centers[a],
        center_b=centers[b],
    )
