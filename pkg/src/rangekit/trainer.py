"""Training loop for the joint softmax + metric-loss objective.

Each step embeds an identity-balanced batch, computes softmax
cross-entropy on the logits plus the selected auxiliary loss on the
embeddings, pushes both gradients through the network, and applies one
momentum-SGD update. Metrics are recorded on a fixed cadence against a
held-out population of identities never seen in training, so runs with
different tail truncations stay comparable and scores reflect feature
quality rather than identity coverage.

The hinge margin of the inter part has no scale-free default; when left
unset it is auto-calibrated to the median squared distance between class
centers measured at iteration 0 and logged.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import (
    BatchSpec,
    DatasetSpec,
    LongTailDataset,
    fresh_population,
    generate,
    pk_batches,
    truncate_tail,
    verification_pairs,
)
from .geometry import EmbeddingBatch, min_center_pair, top_k_ranges
from .losses import (
    RangeLossConfig,
    contrastive_loss,
    intra_range_loss,
    inter_range_loss,
    softmax_xent,
    triplet_loss,
)
from .network import (
    MlpParams,
    MlpShape,
    SgdConfig,
    forward,
    backward,
    init_params,
    learning_rate,
    sgd_step,
)

__all__ = [
    "LOSS_MODES",
    "TrainConfig",
    "MetricsRecord",
    "StepLosses",
    "TrainResult",
    "TrainingAborted",
    "CheckpointError",
    "train_step",
    "train",
    "evaluate_verification",
    "geometry_metrics",
    "save_checkpoint",
    "load_checkpoint",
    "config_to_dict",
    "config_from_dict",
    "METRICS_FIELDS",
]

log = logging.getLogger("rangekit.trainer")

LOSS_MODES = ("softmax", "softmax+contrastive", "softmax+triplet", "softmax+range")

METRICS_FIELDS = (
    "iteration",
    "total_loss",
    "softmax_loss",
    "intra_loss",
    "inter_loss",
    "mean_intra_range",
    "min_center_sqdist",
    "verification_accuracy",
    "lr",
)


class TrainingAborted(RuntimeError):
    """The loss went non-finite; carries a diagnostic of the failing step."""

    def __init__(self, iteration: int, diagnostic: dict):
        super().__init__(f"non-finite loss at iteration {iteration}: {diagnostic}")
        self.iteration = iteration
        self.diagnostic = diagnostic
        self.records: list[MetricsRecord] = []


class CheckpointError(ValueError):
    """A checkpoint file failed to parse; the message carries the line."""


@dataclass
class TrainConfig:
    """Everything one experiment needs, seeds included."""

    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    cut_ratio: float = 0.0
    truncate_seed: int = 101
    batch: BatchSpec = field(default_factory=BatchSpec)
    hidden: tuple[int, ...] = (64, 64)
    d_emb: int = 16
    loss_mode: str = "softmax+range"
    range_cfg: RangeLossConfig = field(default_factory=RangeLossConfig)
    contrastive_margin: float | None = None
    triplet_margin: float | None = None
    aux_weight: float = 1e-3
    sgd: SgdConfig = field(default_factory=lambda: SgdConfig(base_lr=0.02, halve_every=500, momentum=0.9))
    iterations: int = 2000
    eval_every: int = 250
    init_seed: int = 7
    eval_seed: int = 11
    eval_identities: int = 50
    eval_samples_per_identity: int = 6
    eval_pos_pairs: int = 300
    eval_neg_pairs: int = 300
    eval_thresholds: int = 64
    checkpoint_path: str | None = None

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        if not 0.0 <= self.cut_ratio <= 1.0:
            raise ValueError("cut_ratio must lie in [0, 1]")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.d_emb < 1:
            raise ValueError("d_emb must be >= 1")
        if self.eval_identities < 2:
            raise ValueError("eval needs at least 2 identities")
        if self.eval_samples_per_identity < 2:
            raise ValueError("eval needs at least 2 samples per identity")
        if self.contrastive_margin is not None and not self.contrastive_margin > 0:
            raise ValueError("contrastive_margin must be > 0")
        if self.triplet_margin is not None and not self.triplet_margin > 0:
            raise ValueError("triplet_margin must be > 0")
        if self.aux_weight < 0:
            raise ValueError("aux_weight must be >= 0")
        if self.eval_thresholds < 1:
            raise ValueError("eval_thresholds must be >= 1")


@dataclass
class MetricsRecord:
    """One row of the training log."""

    iteration: int
    total_loss: float
    softmax_loss: float
    intra_loss: float
    inter_loss: float
    mean_intra_range: float
    min_center_sqdist: float
    verification_accuracy: float
    lr: float

    def __post_init__(self):
        for name in METRICS_FIELDS[1:]:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not 0.0 <= self.verification_accuracy <= 1.0:
            raise ValueError("verification_accuracy must lie in [0, 1]")


@dataclass
class StepLosses:
    """Loss breakdown of a single step, before any evaluation pass.

    intra/inter are the unweighted range-loss parts (zero outside range
    mode); aux is the weighted auxiliary term added to the softmax value.
    batch_min_center_sqdist is the quantity the inter hinge compared
    against the margin on this batch.
    """

    total: float
    softmax: float
    intra: float
    inter: float
    aux: float
    batch_min_center_sqdist: float


@dataclass
class TrainResult:
    """Final parameters plus the metric history and resolved margins."""

    params: MlpParams
    records: list[MetricsRecord]
    n_classes: int
    resolved_margin: float | None = None
    resolved_contrastive_margin: float | None = None
    resolved_triplet_margin: float | None = None
    wall_time_s: float = 0.0


def _batch_pairs(groups: list[list[int]]) -> list[tuple[int, int, bool]]:
    """Deterministic pair plan for the contrastive baseline.

    Positives ring through each identity's slots; negatives align slot i
    of each identity with slot i of the next identity in batch order.
    """
    pairs = []
    for g in groups:
        if len(g) == 2:
            pairs.append((g[0], g[1], True))
        else:
            pairs.extend((g[i], g[(i + 1) % len(g)], True) for i in range(len(g)))
    for gi, g in enumerate(groups):
        h = groups[(gi + 1) % len(groups)]
        pairs.extend((g[i], h[i % len(h)], False) for i in range(len(g)))
    return pairs


def _batch_triplets(groups: list[list[int]]) -> list[tuple[int, int, int]]:
    """Deterministic (anchor, positive, negative) plan: positive is the
    next slot in the anchor's identity, negative the matching slot of the
    next identity."""
    triplets = []
    for gi, g in enumerate(groups):
        if len(g) < 2:
            continue
        h = groups[(gi + 1) % len(groups)]
        for i in range(len(g)):
            triplets.append((g[i], g[(i + 1) % len(g)], h[i % len(h)]))
    return triplets


def train_step(
    params: MlpParams,
    inputs: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    *,
    iteration: int = 0,
    velocity: MlpParams | None = None,
    range_margin: float | None = None,
    contrastive_margin: float | None = None,
    triplet_margin: float | None = None,
) -> tuple[MlpParams, MlpParams, StepLosses]:
    """One joint-objective update; labels are class indices.

    Returns (params, velocity, losses). Margins must already be resolved
    for the active mode. Raises TrainingAborted when the total loss is
    not finite, leaving the inputs untouched.
    """
    cache, emb, logits = forward(params, inputs)
    sm_value, dlogits = softmax_xent(logits, labels)
    batch = EmbeddingBatch(emb, [int(l) for l in labels])
    groups = [batch.groups[i] for i in batch.identities]
    demb = np.zeros_like(emb)
    intra_val = inter_val = aux_val = 0.0

    if config.loss_mode == "softmax+range":
        rc = config.range_cfg
        margin = rc.margin if rc.margin is not None else range_margin
        if margin is None:
            raise ValueError("range margin unresolved")
        intra = intra_range_loss(batch, rc.k, rc.eps)
        inter = inter_range_loss(batch, margin)
        intra_val, inter_val = intra.value, inter.value
        aux_val = rc.w_intra * intra_val + rc.w_inter * inter_val
        demb = rc.w_intra * intra.grads + rc.w_inter * inter.grads
    elif config.loss_mode == "softmax+contrastive":
        margin = config.contrastive_margin if config.contrastive_margin is not None else contrastive_margin
        if margin is None:
            raise ValueError("contrastive margin unresolved")
        plan = _batch_pairs(groups)
        res = contrastive_loss([(emb[a], emb[b], same) for a, b, same in plan], margin)
        aux_val = config.aux_weight * res.value
        for row, (a, b, _) in enumerate(plan):
            demb[a] += config.aux_weight * res.grads[2 * row]
            demb[b] += config.aux_weight * res.grads[2 * row + 1]
    elif config.loss_mode == "softmax+triplet":
        margin = config.triplet_margin if config.triplet_margin is not None else triplet_margin
        if margin is None:
            raise ValueError("triplet margin unresolved")
        plan = _batch_triplets(groups)
        res = triplet_loss([(emb[a], emb[p], emb[n]) for a, p, n in plan], margin)
        aux_val = config.aux_weight * res.value
        for row, (a, p, n) in enumerate(plan):
            demb[a] += config.aux_weight * res.grads[3 * row]
            demb[p] += config.aux_weight * res.grads[3 * row + 1]
            demb[n] += config.aux_weight * res.grads[3 * row + 2]

    total = sm_value + aux_val
    if len(batch.groups) >= 2:
        batch_min_center = min_center_pair(batch).sq_distance
    else:
        batch_min_center = math.nan
    if not math.isfinite(total):
        raise TrainingAborted(
            iteration,
            {
                "total": total,
                "softmax": sm_value,
                "intra": intra_val,
                "inter": inter_val,
                "aux": aux_val,
            },
        )
    grads = backward(params, cache, demb, dlogits)
    params, velocity = sgd_step(params, grads, iteration, config.sgd, velocity)
    return params, velocity, StepLosses(
        total=total,
        softmax=sm_value,
        intra=intra_val,
        inter=inter_val,
        aux=aux_val,
        batch_min_center_sqdist=batch_min_center,
    )


def _median_center_sqdist(params: MlpParams, dataset: LongTailDataset) -> float:
    """Median squared distance over all class-center pairs of the dataset
    under the current network."""
    _, emb, _ = forward(params, dataset.inputs)
    batch = EmbeddingBatch(emb, [int(l) for l in dataset.labels])
    centers = [batch.embeddings[batch.groups[i]].mean(axis=0) for i in batch.identities]
    dists = []
    for a in range(len(centers)):
        for b in range(a + 1, len(centers)):
            d = centers[a] - centers[b]
            dists.append(float(d @ d))
    return float(np.median(dists))


def evaluate_verification(params: MlpParams, pairs, n_thresholds: int = 64) -> float:
    """Best same/different accuracy over a sweep of distance thresholds.

    Pairs are (input, input, same_flag); distances are squared embedding
    distances; thresholds are equally spaced between the smallest and
    largest observed distance. The trivial predict-nothing-same
    classifier is always included, so constant embeddings score exactly
    the larger class prior.
    """
    if not pairs:
        raise ValueError("need at least one pair")
    if n_thresholds < 1:
        raise ValueError("n_thresholds must be >= 1")
    a = np.stack([np.asarray(x, dtype=np.float64) for x, _, _ in pairs])
    b = np.stack([np.asarray(y, dtype=np.float64) for _, y, _ in pairs])
    flags = np.array([bool(s) for _, _, s in pairs])
    _, ea, _ = forward(params, a)
    _, eb, _ = forward(params, b)
    dists = ((ea - eb) ** 2).sum(axis=1)
    best = float((~flags).mean())  # threshold below every distance
    for tau in np.linspace(dists.min(), dists.max(), n_thresholds):
        acc = float(((dists <= tau) == flags).mean())
        if acc > best:
            best = acc
    return best


def geometry_metrics(params: MlpParams, dataset: LongTailDataset) -> tuple[float, float]:
    """(mean largest intra-class squared range, min inter-center squared
    distance) of the dataset's embeddings."""
    ids = dataset.identities
    if len(ids) < 2:
        raise ValueError("need at least two identities")
    if any(dataset.counts[i] < 2 for i in ids):
        raise ValueError("every identity needs at least two samples")
    _, emb, _ = forward(params, dataset.inputs)
    batch = EmbeddingBatch(emb, [int(l) for l in dataset.labels])
    tops = [
        top_k_ranges(batch.embeddings[batch.groups[i]], 1, identity=i).ranges[0]
        for i in batch.identities
    ]
    return float(np.mean(tops)), float(min_center_pair(batch).sq_distance)


def train(config: TrainConfig) -> TrainResult:
    """Run the full experiment described by the config.

    Deterministic given the config: data generation, truncation, batch
    order, initialization, and evaluation all flow from its seeds.
    """
    t0 = time.perf_counter()
    base = generate(config.dataset)
    train_ds = truncate_tail(base, config.cut_ratio, config.truncate_seed)
    ids = train_ds.identities
    class_of = {ident: c for c, ident in enumerate(ids)}
    shape = MlpShape(config.dataset.d_in, config.hidden, config.d_emb, len(ids))
    params = init_params(shape, config.init_seed)

    # evaluation uses identities disjoint from training, so runs with
    # different truncations are measured on the same footing and the
    # score reflects feature quality rather than identity coverage
    eval_ds = fresh_population(
        config.dataset.d_in,
        config.eval_identities,
        config.eval_samples_per_identity,
        config.dataset.noise_sigma,
        config.eval_seed,
    )
    n = eval_ds.n_samples
    iu, ju = np.triu_indices(n, 1)
    same = eval_ds.labels[iu] == eval_ds.labels[ju]
    n_pos = min(config.eval_pos_pairs, int(same.sum()))
    n_neg = min(config.eval_neg_pairs, int((~same).sum()))
    eval_pairs = verification_pairs(eval_ds, n_pos, n_neg, seed=config.eval_seed + 1)

    resolved_margin = resolved_cmargin = resolved_tmargin = None
    auto_margin = False
    if config.loss_mode == "softmax+range":
        resolved_margin = config.range_cfg.margin
        if resolved_margin is None:
            # a fixed margin goes stale as the embedding scale inflates
            # during training, so the auto mode re-measures it every
            # eval_every iterations; an explicitly configured margin is
            # honored as-is
            auto_margin = True
            resolved_margin = max(_median_center_sqdist(params, eval_ds), 1e-12)
            log.info("auto-calibrated range margin to %.6g", resolved_margin)
    elif config.loss_mode == "softmax+contrastive":
        resolved_cmargin = config.contrastive_margin
        if resolved_cmargin is None:
            resolved_cmargin = max(math.sqrt(_median_center_sqdist(params, eval_ds)), 1e-12)
            log.info("auto-calibrated contrastive margin to %.6g", resolved_cmargin)
    elif config.loss_mode == "softmax+triplet":
        resolved_tmargin = config.triplet_margin
        if resolved_tmargin is None:
            resolved_tmargin = max(_median_center_sqdist(params, eval_ds), 1e-12)
            log.info("auto-calibrated triplet margin to %.6g", resolved_tmargin)

    batches = pk_batches(train_ds, config.batch, config.iterations)
    velocity = None
    records: list[MetricsRecord] = []
    for t, (bx, blabels) in enumerate(batches):
        classes = np.array([class_of[int(l)] for l in blabels])
        try:
            params, velocity, step = train_step(
                params,
                bx,
                classes,
                config,
                iteration=t,
                velocity=velocity,
                range_margin=resolved_margin,
                contrastive_margin=resolved_cmargin,
                triplet_margin=resolved_tmargin,
            )
        except TrainingAborted as exc:
            exc.records = records
            raise
        if (t + 1) % config.eval_every == 0:
            mean_range, min_center = geometry_metrics(params, eval_ds)
            acc = evaluate_verification(params, eval_pairs, config.eval_thresholds)
            records.append(
                MetricsRecord(
                    iteration=t + 1,
                    total_loss=step.total,
                    softmax_loss=step.softmax,
                    intra_loss=step.intra,
                    inter_loss=step.inter,
                    mean_intra_range=mean_range,
                    min_center_sqdist=min_center,
                    verification_accuracy=acc,
                    lr=learning_rate(t, config.sgd),
                )
            )
            if auto_margin and t + 1 < config.iterations:
                resolved_margin = max(_median_center_sqdist(params, eval_ds), 1e-12)
                log.debug("iteration %d: range margin re-calibrated to %.6g", t + 1, resolved_margin)
    if config.checkpoint_path:
        save_checkpoint(params, config.checkpoint_path)
    return TrainResult(
        params=params,
        records=records,
        n_classes=len(ids),
        resolved_margin=resolved_margin,
        resolved_contrastive_margin=resolved_cmargin,
        resolved_triplet_margin=resolved_tmargin,
        wall_time_s=time.perf_counter() - t0,
    )


def save_checkpoint(params: MlpParams, path) -> None:
    """Text checkpoint: every value with 17 significant digits, so a load
    reproduces the parameters bit-exactly."""

    def fmt(arr):
        if arr.ndim == 1:
            return [" ".join(f"{v:.17g}" for v in arr)]
        return [" ".join(f"{v:.17g}" for v in row) for row in arr]

    lines = ["rangekit-checkpoint 1", f"layers {len(params.weights)}"]
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        lines.append(f"weight {l} {w.shape[0]} {w.shape[1]}")
        lines.extend(fmt(w))
        lines.append(f"bias {l} {b.shape[0]}")
        lines.extend(fmt(b))
    lines.append(f"classifier {params.clf_weight.shape[0]} {params.clf_weight.shape[1]}")
    lines.extend(fmt(params.clf_weight))
    lines.extend(fmt(params.clf_bias))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


class _LineReader:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise CheckpointError(f"line {self.pos + 1}: unexpected end of file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def floats(self, count: int) -> np.ndarray:
        where = self.pos + 1
        vals = self.next().split()
        if len(vals) != count:
            raise CheckpointError(f"line {where}: expected {count} values, got {len(vals)}")
        try:
            return np.array([float(v) for v in vals])
        except ValueError as exc:
            raise CheckpointError(f"line {where}: {exc}") from exc


def load_checkpoint(path) -> MlpParams:
    """Read a checkpoint written by save_checkpoint; raises
    CheckpointError with the offending line on any corruption."""
    with open(path, "r", encoding="ascii") as fh:
        reader = _LineReader(fh.read().splitlines())
    if reader.next() != "rangekit-checkpoint 1":
        raise CheckpointError("line 1: not a rangekit checkpoint")
    head = reader.next().split()
    if len(head) != 2 or head[0] != "layers":
        raise CheckpointError("line 2: expected 'layers <count>'")
    try:
        n_layers = int(head[1])
    except ValueError as exc:
        raise CheckpointError(f"line 2: {exc}") from exc
    if n_layers < 1:
        raise CheckpointError("line 2: layer count must be >= 1")
    weights, biases = [], []
    for l in range(n_layers):
        where = reader.pos + 1
        head = reader.next().split()
        if len(head) != 4 or head[0] != "weight" or head[1] != str(l):
            raise CheckpointError(f"line {where}: expected 'weight {l} <rows> <cols>'")
        rows, cols = int(head[2]), int(head[3])
        weights.append(np.vstack([reader.floats(cols) for _ in range(rows)]))
        where = reader.pos + 1
        head = reader.next().split()
        if len(head) != 3 or head[0] != "bias" or head[1] != str(l):
            raise CheckpointError(f"line {where}: expected 'bias {l} <size>'")
        biases.append(reader.floats(int(head[2])))
    where = reader.pos + 1
    head = reader.next().split()
    if len(head) != 3 or head[0] != "classifier":
        raise CheckpointError(f"line {where}: expected 'classifier <classes> <dim>'")
    n_cls, d = int(head[1]), int(head[2])
    clf_weight = np.vstack([reader.floats(d) for _ in range(n_cls)])
    clf_bias = reader.floats(n_cls)
    if reader.pos != len(reader.lines):
        raise CheckpointError(f"line {reader.pos + 1}: trailing content after checkpoint")
    params = MlpParams(weights, biases, clf_weight, clf_bias)
    for name, arr in params.arrays():
        if not np.isfinite(arr).all():
            raise CheckpointError(f"{name} holds non-finite values")
    return params


def config_to_dict(config: TrainConfig) -> dict:
    """Plain-dict form of a config, suitable for JSON echo."""
    d = asdict(config)
    d["hidden"] = list(config.hidden)
    return d


def config_from_dict(data: dict) -> TrainConfig:
    """Build a TrainConfig from nested dicts, collecting every bad field.

    Raises ValueError whose message lists all offending fields at once.
    """
    errors: list[str] = []
    kwargs: dict = {}
    nested = {
        "dataset": DatasetSpec,
        "batch": BatchSpec,
        "range_cfg": RangeLossConfig,
        "sgd": SgdConfig,
    }
    known = {f for f in TrainConfig.__dataclass_fields__}
    for key in data:
        if key not in known:
            errors.append(f"unknown field {key!r}")
    for key, cls in nested.items():
        if key in data:
            sub = data[key]
            if not isinstance(sub, dict):
                errors.append(f"{key}: expected an object")
                continue
            unknown = [k for k in sub if k not in cls.__dataclass_fields__]
            if unknown:
                errors.append(f"{key}: unknown fields {unknown}")
                continue
            try:
                kwargs[key] = cls(**sub)
            except (TypeError, ValueError) as exc:
                errors.append(f"{key}: {exc}")
    for key, value in data.items():
        if key in nested or key not in known:
            continue
        kwargs[key] = tuple(value) if key == "hidden" else value
    if not errors:
        try:
            return TrainConfig(**kwargs)
        except (TypeError, ValueError) as exc:
            errors.append(str(exc))
    raise ValueError("invalid config: " + "; ".join(errors))
