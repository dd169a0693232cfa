"""A small fully-connected embedding network with hand-written backprop.

The stack is d_in -> hidden ... -> d_emb with ReLU between hidden layers
and a linear embedding layer, topped by a linear classifier head that
produces one logit per class. Weights start Gaussian(0, 0.05), biases at
zero. The optimizer is SGD with momentum and a learning rate that halves
on a fixed iteration schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WEIGHT_SIGMA",
    "MlpShape",
    "MlpParams",
    "ForwardCache",
    "SgdConfig",
    "init_params",
    "forward",
    "backward",
    "learning_rate",
    "sgd_step",
    "finite_difference_param_grads",
]

WEIGHT_SIGMA = 0.05


@dataclass
class MlpShape:
    """Layer widths: input -> hidden stack -> embedding, plus class count."""

    d_in: int
    hidden: tuple[int, ...]
    d_emb: int
    n_classes: int

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        dims = (self.d_in, *self.hidden, self.d_emb, self.n_classes)
        if any(int(d) < 1 for d in dims):
            raise ValueError(f"all layer sizes must be >= 1, got {dims}")

    @property
    def layer_dims(self) -> list[int]:
        return [self.d_in, *self.hidden, self.d_emb]


@dataclass
class MlpParams:
    """Weights and biases of the embedding stack plus the classifier head.

    ``weights[l]`` has shape (out, in); the last entry is the linear
    embedding layer. The same container doubles as gradient and velocity
    storage since those share the structure.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    clf_weight: np.ndarray
    clf_bias: np.ndarray

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("one bias vector per weight matrix required")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"bias shape {b.shape} does not match weight {w.shape}")
        for prev, nxt in zip(self.weights, self.weights[1:]):
            if nxt.shape[1] != prev.shape[0]:
                raise ValueError(
                    f"layer shapes do not chain: {prev.shape} then {nxt.shape}"
                )
        if self.clf_weight.shape[1] != self.weights[-1].shape[0]:
            raise ValueError("classifier input must match embedding dim")
        if self.clf_bias.shape != (self.clf_weight.shape[0],):
            raise ValueError("classifier bias must match class count")

    @property
    def d_in(self) -> int:
        return self.weights[0].shape[1]

    @property
    def d_emb(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def n_classes(self) -> int:
        return self.clf_weight.shape[0]

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        """All parameter arrays with stable names, in a canonical order."""
        out = []
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            out.append((f"weight{l}", w))
            out.append((f"bias{l}", b))
        out.append(("clf_weight", self.clf_weight))
        out.append(("clf_bias", self.clf_bias))
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            clf_weight=self.clf_weight.copy(),
            clf_bias=self.clf_bias.copy(),
        )

    def zeros_like(self) -> "MlpParams":
        return MlpParams(
            weights=[np.zeros_like(w) for w in self.weights],
            biases=[np.zeros_like(b) for b in self.biases],
            clf_weight=np.zeros_like(self.clf_weight),
            clf_bias=np.zeros_like(self.clf_bias),
        )

    def allclose(self, other: "MlpParams", rtol: float = 0.0, atol: float = 0.0) -> bool:
        mine = self.arrays()
        theirs = other.arrays()
        if len(mine) != len(theirs):
            return False
        return all(
            a.shape == b.shape and np.allclose(a, b, rtol=rtol, atol=atol)
            for (_, a), (_, b) in zip(mine, theirs)
        )


@dataclass
class ForwardCache:
    """Everything backward needs from a forward pass."""

    inputs: np.ndarray
    pre_acts: list[np.ndarray] = field(repr=False, default_factory=list)
    acts: list[np.ndarray] = field(repr=False, default_factory=list)
    embeddings: np.ndarray | None = None


@dataclass
class SgdConfig:
    base_lr: float = 0.1
    halve_every: int = 20000
    momentum: float = 0.9

    def __post_init__(self):
        if not self.base_lr > 0:
            raise ValueError("base_lr must be > 0")
        if int(self.halve_every) < 1:
            raise ValueError("halve_every must be a positive integer")
        self.halve_every = int(self.halve_every)
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")


def init_params(shape: MlpShape, seed: int) -> MlpParams:
    """Gaussian(0, 0.05) weights and zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    dims = shape.layer_dims
    weights = [
        rng.normal(0.0, WEIGHT_SIGMA, size=(dims[l + 1], dims[l]))
        for l in range(len(dims) - 1)
    ]
    biases = [np.zeros(dims[l + 1]) for l in range(len(dims) - 1)]
    clf_weight = rng.normal(0.0, WEIGHT_SIGMA, size=(shape.n_classes, shape.d_emb))
    clf_bias = np.zeros(shape.n_classes)
    return MlpParams(weights, biases, clf_weight, clf_bias)


def forward(params: MlpParams, inputs) -> tuple[ForwardCache, np.ndarray, np.ndarray]:
    """Run the net; returns (cache, embeddings, logits).

    Hidden layers apply ReLU, the embedding layer stays linear, and the
    classifier head maps embeddings to one logit per class.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.d_in:
        raise ValueError(f"inputs must have shape (M, {params.d_in}), got {x.shape}")
    cache = ForwardCache(inputs=x)
    a = x
    cache.acts.append(a)
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        z = a @ w.T + b
        cache.pre_acts.append(z)
        a = np.maximum(z, 0.0)
        cache.acts.append(a)
    emb = a @ params.weights[-1].T + params.biases[-1]
    cache.embeddings = emb
    logits = emb @ params.clf_weight.T + params.clf_bias
    return cache, emb, logits


def backward(
    params: MlpParams,
    cache: ForwardCache,
    dembeddings: np.ndarray,
    dlogits: np.ndarray,
) -> MlpParams:
    """Exact reverse-mode gradients for every parameter array.

    ``dembeddings`` carries the loss gradient applied directly to the
    embeddings (the metric-loss route) and ``dlogits`` the gradient on the
    classifier logits; the total embedding gradient is their sum after the
    head is peeled off.
    """
    emb = cache.embeddings
    m = cache.inputs.shape[0]
    demb = np.asarray(dembeddings, dtype=np.float64)
    dlog = np.asarray(dlogits, dtype=np.float64)
    if demb.shape != emb.shape:
        raise ValueError(f"dembeddings shape {demb.shape} != embeddings {emb.shape}")
    if dlog.shape != (m, params.n_classes):
        raise ValueError(f"dlogits shape {dlog.shape} != (M, n_classes)")
    d_clf_w = dlog.T @ emb
    d_clf_b = dlog.sum(axis=0)
    dz = demb + dlog @ params.clf_weight
    n_layers = len(params.weights)
    gw: list[np.ndarray] = [np.empty(0)] * n_layers
    gb: list[np.ndarray] = [np.empty(0)] * n_layers
    for l in range(n_layers - 1, -1, -1):
        gw[l] = dz.T @ cache.acts[l]
        gb[l] = dz.sum(axis=0)
        if l > 0:
            dz = (dz @ params.weights[l]) * (cache.pre_acts[l - 1] > 0.0)
    return MlpParams(gw, gb, d_clf_w, d_clf_b)


def learning_rate(iteration: int, cfg: SgdConfig) -> float:
    """base_lr halved once per completed halve_every block of iterations."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    return cfg.base_lr * 0.5 ** (iteration // cfg.halve_every)


def sgd_step(
    params: MlpParams,
    grads: MlpParams,
    iteration: int,
    cfg: SgdConfig,
    velocity: MlpParams | None = None,
) -> tuple[MlpParams, MlpParams]:
    """One momentum-SGD update: v <- momentum v - lr g, p <- p + v.

    Returns (new params, new velocity); pass the velocity back in on the
    next call, or None to start from rest. Inputs are left untouched.
    """
    lr = learning_rate(iteration, cfg)
    if velocity is None:
        velocity = params.zeros_like()
    new_w, new_b, vel_w, vel_b = [], [], [], []
    for p, g, v in zip(params.weights, grads.weights, velocity.weights):
        nv = cfg.momentum * v - lr * g
        vel_w.append(nv)
        new_w.append(p + nv)
    for p, g, v in zip(params.biases, grads.biases, velocity.biases):
        nv = cfg.momentum * v - lr * g
        vel_b.append(nv)
        new_b.append(p + nv)
    nv_cw = cfg.momentum * velocity.clf_weight - lr * grads.clf_weight
    nv_cb = cfg.momentum * velocity.clf_bias - lr * grads.clf_bias
    return (
        MlpParams(new_w, new_b, params.clf_weight + nv_cw, params.clf_bias + nv_cb),
        MlpParams(vel_w, vel_b, nv_cw, nv_cb),
    )


def finite_difference_param_grads(loss_fn, params: MlpParams, step: float = 1e-4) -> MlpParams:
    """Central-difference gradients of a scalar loss over every parameter.

    ``loss_fn`` maps an MlpParams to a float and must be deterministic.
    """
    if not step > 0:
        raise ValueError("step must be > 0")
    work = params.copy()
    out = params.zeros_like()
    for (_, arr), (_, dst) in zip(work.arrays(), out.arrays()):
        flat = arr.reshape(-1)
        dflat = dst.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn(work)
            flat[i] = orig - step
            down = loss_fn(work)
            flat[i] = orig
            dflat[i] = (up - down) / (2.0 * step)
    return out
