"""Synthetic long-tailed datasets and identity-balanced batch sampling.

Identities are Gaussian prototypes in input space; samples are prototype
plus isotropic noise. A small head of rich identities carries most of the
samples while the tail identities hold only a handful each, which is the
frequency profile all the training comparisons are about. Also here:
tail truncation, the P identities x K samples batch sampler, verification
pair construction, and a line-oriented text export of a dataset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "POOR_THRESHOLD",
    "LongTailDataset",
    "DatasetSpec",
    "BatchSpec",
    "generate",
    "truncate_tail",
    "heldout_resample",
    "fresh_population",
    "pk_batches",
    "verification_pairs",
    "save_dataset",
    "load_dataset",
    "DatasetFormatError",
]

# identities with fewer samples than this are "poor" (tail) classes
POOR_THRESHOLD = 20


class DatasetFormatError(ValueError):
    """A dataset text file failed to parse; the message carries the line."""


@dataclass
class LongTailDataset:
    """Labeled input vectors with per-identity bookkeeping.

    ``prototypes`` maps each identity to the ground-truth vector its
    samples scatter around; it is None for datasets loaded from text,
    where only the samples survive. ``counts`` always matches the actual
    per-identity tallies.
    """

    inputs: np.ndarray
    labels: np.ndarray
    prototypes: dict[int, np.ndarray] | None
    counts: dict[int, int]
    poor_threshold: int = POOR_THRESHOLD
    _index: dict[int, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise ValueError(f"inputs must be 2-d, got shape {self.inputs.shape}")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ValueError("one label per input row required")
        self._index = {}
        for ident in np.unique(self.labels):
            self._index[int(ident)] = np.flatnonzero(self.labels == ident)
        tally = {ident: len(rows) for ident, rows in self._index.items()}
        if dict(self.counts) != tally:
            raise ValueError("counts do not match the per-identity tallies")
        if self.prototypes is not None:
            missing = [i for i in tally if i not in self.prototypes]
            if missing:
                raise ValueError(f"identities without a prototype: {missing}")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def d_in(self) -> int:
        return self.inputs.shape[1]

    @property
    def identities(self) -> list[int]:
        return sorted(self._index)

    @property
    def poor_identities(self) -> list[int]:
        return [i for i in self.identities if self.counts[i] < self.poor_threshold]

    @property
    def rich_identities(self) -> list[int]:
        return [i for i in self.identities if self.counts[i] >= self.poor_threshold]

    def indices_of(self, identity: int) -> np.ndarray:
        return self._index[int(identity)]


@dataclass
class DatasetSpec:
    """Recipe for a synthetic long-tailed dataset.

    The first round(head_fraction * n_identities) identities are rich and
    get head_count samples each; the rest draw a count uniformly from
    [2, tail_count_max]. Everything is deterministic given the seed.
    """

    n_identities: int = 50
    head_fraction: float = 0.1
    head_count: int = 200
    tail_count_max: int = 15
    noise_sigma: float = 0.6
    d_in: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.n_identities < 2:
            raise ValueError("need at least two identities")
        if not 0.0 < self.head_fraction < 1.0:
            raise ValueError("head_fraction must lie strictly between 0 and 1")
        if not self.tail_count_max < POOR_THRESHOLD <= self.head_count:
            raise ValueError(
                f"need tail_count_max < {POOR_THRESHOLD} <= head_count, "
                f"got {self.tail_count_max} and {self.head_count}"
            )
        if self.tail_count_max < 2:
            raise ValueError("tail identities need at least 2 samples")
        if not self.noise_sigma > 0:
            raise ValueError("noise_sigma must be > 0")
        if self.d_in < 1:
            raise ValueError("d_in must be >= 1")

    @property
    def n_rich(self) -> int:
        return int(np.floor(self.head_fraction * self.n_identities + 0.5))


@dataclass
class BatchSpec:
    """P distinct identities with K samples each per mini-batch."""

    p: int = 4
    k: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("p must be >= 2 (the inter part needs two identities)")
        if self.k < 2:
            raise ValueError("k must be >= 2 (the intra part needs two samples)")


def generate(spec: DatasetSpec) -> LongTailDataset:
    """Draw a long-tailed dataset from the spec, sample order by identity."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_identities
    prototypes = rng.standard_normal((n, spec.d_in))
    n_rich = spec.n_rich
    if n_rich < 1 or n - n_rich < 1:
        raise ValueError("head_fraction leaves no rich or no poor identities")
    counts = {}
    for ident in range(n_rich):
        counts[ident] = spec.head_count
    tail_draws = rng.integers(2, spec.tail_count_max + 1, size=n - n_rich)
    for ident, c in zip(range(n_rich, n), tail_draws):
        counts[ident] = int(c)
    blocks = []
    labels = []
    for ident in range(n):
        noise = rng.standard_normal((counts[ident], spec.d_in))
        blocks.append(prototypes[ident] + spec.noise_sigma * noise)
        labels.extend([ident] * counts[ident])
    return LongTailDataset(
        inputs=np.vstack(blocks),
        labels=np.asarray(labels),
        prototypes={i: prototypes[i].copy() for i in range(n)},
        counts=counts,
    )


def truncate_tail(dataset: LongTailDataset, cut_ratio: float, seed: int) -> LongTailDataset:
    """Drop round(cut_ratio * n_poor) poor identities, chosen at random.

    Rich identities are never touched. cut_ratio 0 returns an identical
    copy; 1 removes every poor identity.
    """
    if not 0.0 <= cut_ratio <= 1.0:
        raise ValueError("cut_ratio must lie in [0, 1]")
    poor = dataset.poor_identities
    n_cut = int(np.floor(cut_ratio * len(poor) + 0.5))
    rng = np.random.default_rng(seed)
    removed = set(rng.choice(poor, size=n_cut, replace=False).tolist()) if n_cut else set()
    keep = ~np.isin(dataset.labels, sorted(removed))
    kept_ids = [i for i in dataset.identities if i not in removed]
    return LongTailDataset(
        inputs=dataset.inputs[keep],
        labels=dataset.labels[keep],
        prototypes=(
            None
            if dataset.prototypes is None
            else {i: dataset.prototypes[i].copy() for i in kept_ids}
        ),
        counts={i: dataset.counts[i] for i in kept_ids},
        poor_threshold=dataset.poor_threshold,
    )


def heldout_resample(
    dataset: LongTailDataset,
    samples_per_identity: int,
    noise_sigma: float,
    seed: int,
) -> LongTailDataset:
    """Fresh noise draws around the same prototypes: unseen samples of the
    known identities, used as the evaluation split."""
    if dataset.prototypes is None:
        raise ValueError("dataset has no prototypes to resample from")
    if samples_per_identity < 1:
        raise ValueError("samples_per_identity must be >= 1")
    if not noise_sigma > 0:
        raise ValueError("noise_sigma must be > 0")
    rng = np.random.default_rng(seed)
    blocks = []
    labels = []
    for ident in dataset.identities:
        noise = rng.standard_normal((samples_per_identity, dataset.d_in))
        blocks.append(dataset.prototypes[ident] + noise_sigma * noise)
        labels.extend([ident] * samples_per_identity)
    return LongTailDataset(
        inputs=np.vstack(blocks),
        labels=np.asarray(labels),
        prototypes={i: dataset.prototypes[i].copy() for i in dataset.identities},
        counts={i: samples_per_identity for i in dataset.identities},
        poor_threshold=dataset.poor_threshold,
    )


def fresh_population(
    d_in: int,
    n_identities: int,
    samples_per_identity: int,
    noise_sigma: float,
    seed: int,
) -> LongTailDataset:
    """A uniform population of brand-new identities from the same
    generative family: Gaussian prototypes plus isotropic noise.

    Used as the evaluation split, mirroring verification benchmarks whose
    identities are disjoint from training.
    """
    if n_identities < 2:
        raise ValueError("need at least two identities")
    if samples_per_identity < 1:
        raise ValueError("samples_per_identity must be >= 1")
    if not noise_sigma > 0:
        raise ValueError("noise_sigma must be > 0")
    rng = np.random.default_rng(seed)
    prototypes = rng.standard_normal((n_identities, d_in))
    blocks = []
    labels = []
    for ident in range(n_identities):
        noise = rng.standard_normal((samples_per_identity, d_in))
        blocks.append(prototypes[ident] + noise_sigma * noise)
        labels.extend([ident] * samples_per_identity)
    return LongTailDataset(
        inputs=np.vstack(blocks),
        labels=np.asarray(labels),
        prototypes={i: prototypes[i].copy() for i in range(n_identities)},
        counts={i: samples_per_identity for i in range(n_identities)},
    )


def pk_batches(
    dataset: LongTailDataset, spec: BatchSpec, n_batches: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Identity-balanced mini-batches: P identities, K slots each.

    Identities are drawn uniformly without replacement per batch, so tail
    identities surface as often as rich ones. An identity with fewer than
    K samples fills its slots by drawing with replacement; excluding it
    would silently drop the tail.
    """
    ids = dataset.identities
    if len(ids) < spec.p:
        raise ValueError(f"dataset has {len(ids)} identities, batch needs {spec.p}")
    rng = np.random.default_rng(spec.seed)
    batches = []
    for _ in range(n_batches):
        chosen = rng.choice(ids, size=spec.p, replace=False)
        rows = []
        for ident in chosen:
            pool = dataset.indices_of(int(ident))
            rows.append(rng.choice(pool, size=spec.k, replace=len(pool) < spec.k))
        idx = np.concatenate(rows)
        batches.append((dataset.inputs[idx], dataset.labels[idx]))
    return batches


def verification_pairs(
    dataset: LongTailDataset, n_pos: int, n_neg: int, seed: int
) -> list[tuple[np.ndarray, np.ndarray, bool]]:
    """Sample same-identity and different-identity input pairs.

    Pairs are drawn uniformly without replacement from all candidate
    sample pairs, so no pair repeats. Raises when the dataset cannot
    supply the requested counts.
    """
    if n_pos < 0 or n_neg < 0:
        raise ValueError("pair counts must be >= 0")
    n = dataset.n_samples
    iu, ju = np.triu_indices(n, 1)
    same = dataset.labels[iu] == dataset.labels[ju]
    pos_cand = np.flatnonzero(same)
    neg_cand = np.flatnonzero(~same)
    if n_pos > pos_cand.size:
        raise ValueError(f"requested {n_pos} positive pairs, only {pos_cand.size} exist")
    if n_neg > neg_cand.size:
        raise ValueError(f"requested {n_neg} negative pairs, only {neg_cand.size} exist")
    rng = np.random.default_rng(seed)
    picked_pos = rng.choice(pos_cand, size=n_pos, replace=False)
    picked_neg = rng.choice(neg_cand, size=n_neg, replace=False)
    pairs = [(dataset.inputs[iu[t]], dataset.inputs[ju[t]], True) for t in picked_pos]
    pairs += [(dataset.inputs[iu[t]], dataset.inputs[ju[t]], False) for t in picked_neg]
    return pairs


def save_dataset(dataset: LongTailDataset, path) -> None:
    """Write the samples as text: header "d_in n_samples", then one line
    per sample holding the identity id and d_in decimal floats."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{dataset.d_in} {dataset.n_samples}\n")
        for row, lab in zip(dataset.inputs, dataset.labels):
            fh.write(f"{int(lab)} " + " ".join(repr(float(v)) for v in row) + "\n")


def load_dataset(path) -> LongTailDataset:
    """Read a dataset written by save_dataset.

    Prototypes are not part of the format, so the result carries None
    there; counts come from the sample tallies.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError("line 1: empty file")
    head = lines[0].split()
    if len(head) != 2:
        raise DatasetFormatError("line 1: header must be 'd_in n_samples'")
    try:
        d_in, n_samples = int(head[0]), int(head[1])
    except ValueError as exc:
        raise DatasetFormatError(f"line 1: bad header: {exc}") from exc
    if len(lines) - 1 != n_samples:
        raise DatasetFormatError(
            f"line {len(lines)}: header promises {n_samples} samples, file has {len(lines) - 1}"
        )
    rows = np.empty((n_samples, d_in))
    labels = np.empty(n_samples, dtype=np.int64)
    for i, line in enumerate(lines[1:], start=2):
        fields = line.split()
        if len(fields) != d_in + 1:
            raise DatasetFormatError(
                f"line {i}: expected identity plus {d_in} floats, got {len(fields)} fields"
            )
        try:
            labels[i - 2] = int(fields[0])
            rows[i - 2] = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise DatasetFormatError(f"line {i}: {exc}") from exc
    counts: dict[int, int] = {}
    for lab in labels:
        counts[int(lab)] = counts.get(int(lab), 0) + 1
    return LongTailDataset(inputs=rows, labels=labels, prototypes=None, counts=counts)
