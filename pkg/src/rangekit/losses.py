"""Loss heads over embedding batches, with exact analytic gradients.

Every loss returns its scalar value plus the gradient of that value with
respect to each embedding, ready to feed into a network backward pass.
The intra part penalizes the harmonic mean of the k largest squared
ranges per identity; the inter part is a hinge on the squared distance
between the two closest class centers. Softmax cross-entropy plus
contrastive and triplet baselines round out the set, and a central
finite-difference estimator serves as the reference every analytic
gradient is validated against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import EmbeddingBatch, min_center_pair, top_k_ranges

__all__ = [
    "LossResult",
    "RangeLossConfig",
    "intra_range_loss",
    "inter_range_loss",
    "range_loss",
    "softmax_xent",
    "contrastive_loss",
    "triplet_loss",
    "finite_difference_grad",
    "relative_gradient_error",
    "set_intra_grad_test_offset",
]

# Self-check hook: a nonzero offset is added to one intra gradient entry so
# the validation CLI can prove it catches a wrong gradient. Never set in
# normal operation.
_INTRA_GRAD_TEST_OFFSET = 0.0


def set_intra_grad_test_offset(offset: float) -> None:
    global _INTRA_GRAD_TEST_OFFSET
    _INTRA_GRAD_TEST_OFFSET = float(offset)


@dataclass
class LossResult:
    """Scalar loss plus one gradient vector per batch embedding.

    ``degenerate`` is set when the batch cannot express the term (for the
    inter part: fewer than two identities); the value and gradients are
    then zero.
    """

    value: float
    grads: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        self.value = float(self.value)
        self.grads = np.asarray(self.grads, dtype=np.float64)
        if not math.isfinite(self.value):
            raise ValueError(f"loss value must be finite, got {self.value}")
        if self.value < 0.0:
            raise ValueError(f"loss value must be non-negative, got {self.value}")


@dataclass
class RangeLossConfig:
    """Knobs of the combined range loss.

    ``margin=None`` means "not resolved yet": the trainer measures a
    desk-scale margin at iteration 0 and fills it in. ``range_loss``
    refuses to run until it holds a positive number.
    """

    k: int = 2
    margin: float | None = None
    w_intra: float = 1e-5
    w_inter: float = 1e-4
    eps: float = 1e-12

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.margin is not None and not self.margin > 0:
            raise ValueError("margin must be > 0")
        if self.w_intra < 0 or self.w_inter < 0:
            raise ValueError("loss weights must be >= 0")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")


def intra_range_loss(batch: EmbeddingBatch, k: int = 2, eps: float = 1e-12) -> LossResult:
    """Sum over identities of the harmonic mean of the k largest ranges.

    Each identity with at least two samples contributes k'/sum(1/D_j)
    where D_1 >= ... >= D_k' are its largest squared pairwise distances
    (k' = min(k, available pairs)) floored at eps. Only samples sitting on
    a selected pair receive gradient: for the pair (a, b) realizing D_j,

        d/dx_a = (2 k' / (D_j S)^2) (x_a - x_b),    S = sum_j 1/D_j,

    and the negation for x_b. Identities with one sample contribute
    nothing.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not eps > 0:
        raise ValueError("eps must be > 0")
    x = batch.embeddings
    grads = np.zeros_like(x)
    total = 0.0
    for ident, idxs in batch.groups.items():
        if len(idxs) < 2:
            continue
        stat = top_k_ranges(x[idxs], k, identity=ident)
        floored = [max(r, eps) for r in stat.ranges]
        kk = len(floored)
        s = sum(1.0 / f for f in floored)
        total += kk / s
        for (la, lb), raw, f in zip(stat.pairs, stat.ranges, floored):
            if raw < eps:
                continue  # flat branch of max(D, eps): no gradient
            a, b = idxs[la], idxs[lb]
            coeff = 2.0 * kk / (f * s) ** 2
            diff = x[a] - x[b]
            grads[a] += coeff * diff
            grads[b] -= coeff * diff
    if _INTRA_GRAD_TEST_OFFSET and grads.size:
        grads[0, 0] += _INTRA_GRAD_TEST_OFFSET
    return LossResult(value=total, grads=grads)


def inter_range_loss(batch: EmbeddingBatch, margin: float) -> LossResult:
    """Hinge max(margin - D, 0) on the closest-center squared distance D.

    While active, samples of the two closest identities Q and R are pushed
    apart through their centers: d/dx_i = (2/n_Q)(c_R - c_Q) for i in Q
    and symmetrically for R; everything else gets zero. A batch with fewer
    than two identities yields zero with the degenerate flag set.
    """
    if not margin > 0:
        raise ValueError("margin must be > 0")
    x = batch.embeddings
    grads = np.zeros_like(x)
    if len(batch.groups) < 2:
        return LossResult(0.0, grads, degenerate=True)
    cp = min_center_pair(batch)
    gap = margin - cp.sq_distance
    if gap <= 0.0:
        return LossResult(0.0, grads)
    rows_a = batch.groups[cp.identity_a]
    rows_b = batch.groups[cp.identity_b]
    pull = 2.0 * (cp.center_b - cp.center_a)
    grads[rows_a] = pull / len(rows_a)
    grads[rows_b] = -pull / len(rows_b)
    return LossResult(gap, grads)


def range_loss(batch: EmbeddingBatch, config: RangeLossConfig) -> LossResult:
    """Weighted combination of the intra and inter parts."""
    if config.margin is None:
        raise ValueError("margin is unresolved; set RangeLossConfig.margin first")
    intra = intra_range_loss(batch, config.k, config.eps)
    inter = inter_range_loss(batch, config.margin)
    return LossResult(
        value=config.w_intra * intra.value + config.w_inter * inter.value,
        grads=config.w_intra * intra.grads + config.w_inter * inter.grads,
        degenerate=inter.degenerate,
    )


def softmax_xent(logits, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch, with gradient w.r.t. logits.

    Stabilized by max-subtraction. Returns (value, dlogits) where
    dlogits = (softmax - onehot) / batch_size.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError(f"logits must be 2-d, got shape {z.shape}")
    m, n = z.shape
    labs = np.asarray(labels, dtype=np.int64)
    if labs.shape != (m,):
        raise ValueError(f"{labs.shape} labels for {m} rows of logits")
    if labs.size and (labs.min() < 0 or labs.max() >= n):
        raise ValueError(f"labels must lie in [0, {n})")
    shifted = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(m)
    value = float(-(shifted[rows, labs] - lse).mean())
    dlogits = np.exp(shifted - lse[:, None])
    dlogits[rows, labs] -= 1.0
    dlogits /= m
    return value, dlogits


def contrastive_loss(pairs, margin: float) -> LossResult:
    """Pair loss: positives pay their squared distance, negatives pay
    max(margin - d, 0)^2 with the raw Euclidean distance d.

    ``pairs`` is a list of (x, y, same_identity). Gradients come back as
    one row per pair member, ordered (x_0, y_0, x_1, y_1, ...).
    """
    if not margin > 0:
        raise ValueError("margin must be > 0")
    value = 0.0
    rows = []
    for xa, xb, same in pairs:
        xa = np.asarray(xa, dtype=np.float64)
        xb = np.asarray(xb, dtype=np.float64)
        diff = xa - xb
        if same:
            value += float(diff @ diff)
            rows.append(2.0 * diff)
            rows.append(-2.0 * diff)
        else:
            d = math.sqrt(float(diff @ diff))
            if 0.0 < d < margin:
                value += (margin - d) ** 2
                g = (-2.0 * (margin - d) / d) * diff
                rows.append(g)
                rows.append(-g)
            else:
                if d == 0.0:
                    value += margin**2  # coincident points: kink of the norm, subgradient 0
                rows.append(np.zeros_like(diff))
                rows.append(np.zeros_like(diff))
    grads = np.array(rows, dtype=np.float64) if rows else np.zeros((0, 0))
    return LossResult(value=value, grads=grads)


def triplet_loss(triplets, margin: float) -> LossResult:
    """Sum of max(|a-p|^2 - |a-n|^2 + margin, 0) over (a, p, n) triplets.

    Gradients come back as one row per member, ordered
    (a_0, p_0, n_0, a_1, ...).
    """
    if not margin > 0:
        raise ValueError("margin must be > 0")
    value = 0.0
    rows = []
    for a, p, n in triplets:
        a = np.asarray(a, dtype=np.float64)
        p = np.asarray(p, dtype=np.float64)
        n = np.asarray(n, dtype=np.float64)
        dap = a - p
        dan = a - n
        slack = float(dap @ dap) - float(dan @ dan) + margin
        if slack > 0.0:
            value += slack
            rows.append(2.0 * (n - p))
            rows.append(-2.0 * dap)
            rows.append(2.0 * dan)
        else:
            z = np.zeros_like(a)
            rows.extend((z, z.copy(), z.copy()))
    grads = np.array(rows, dtype=np.float64) if rows else np.zeros((0, 0))
    return LossResult(value=value, grads=grads)


def finite_difference_grad(loss_fn, batch: EmbeddingBatch, step: float = 1e-5) -> np.ndarray:
    """Central-difference estimate of d loss_fn(batch) / d embeddings.

    ``loss_fn`` must be a deterministic map from a batch to a scalar. The
    input batch is never modified.
    """
    if not step > 0:
        raise ValueError("step must be > 0")
    work = EmbeddingBatch(batch.embeddings.copy(), list(batch.labels))
    x = work.embeddings
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        for c in range(x.shape[1]):
            orig = x[i, c]
            x[i, c] = orig + step
            up = loss_fn(work)
            x[i, c] = orig - step
            down = loss_fn(work)
            x[i, c] = orig
            out[i, c] = (up - down) / (2.0 * step)
    return out


def relative_gradient_error(analytic, numeric) -> float:
    """Max per-coordinate relative error between two gradient arrays.

    The denominator is floored at 1e-4 of the largest magnitude present,
    so coordinates that are exactly zero analytically are judged against
    the gradient's own scale instead of dividing rounding noise by itself.
    """
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0))
    if scale == 0.0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-4 * scale)
    return float((np.abs(a - b) / denom).max())
