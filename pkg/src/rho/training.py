"""Losses, hand-written gradients, Adam, and the training loop.

Gradients come from the reverse-mode tape in autodiff.py; nothing here calls
an external autodiff framework. Centers are stop-gradient constants,
recomputed once per epoch from a full forward pass. Each epoch takes one
Adam step per alignment mini-batch, with the full one-class loss attached to
every batch scaled by 1/(number of batches) so every step sees both
objectives.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .exceptions import DivergenceError, InputError, NonFiniteError
from .graph import laplacian_operator
from .model import ForwardState, ModelConfig, ModelParams, forward, init_params
from .seeding import derive_seed

NORM_FLOOR_SQ = 1e-24  # floors squared row norms; equals a 1e-12 floor on norms


@dataclass(frozen=True)
class LossBreakdown:
    """Per-epoch loss components; total = 0.5 * (l_ccr + l_cwr) + alpha * l_gna."""

    l_ccr: float
    l_cwr: float
    l_gna: float
    total: float


@dataclass
class TrainConfig:
    """Optimization hyperparameters kept separate from the model shape.

    ``freeze_filters`` pins every filter coefficient at 1.0 and excludes it
    from updates; combined with alpha=0 this is the fixed-filter baseline.
    """

    learning_rate: float = 5e-3
    epochs: int = 200
    freeze_filters: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InputError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise InputError(f"epochs must be nonnegative, got {self.epochs}")


def loss_one_class(h, center, labeled, weights, penalty: float):
    """Mean squared distance of labeled rows to the center, plus a Frobenius
    penalty on the propagation weight matrices.

    ``center`` is a constant: gradients flow through ``h`` and ``weights``
    only. Accepts Vars or ndarrays.
    """
    labeled = np.asarray(labeled, dtype=np.int64)
    if labeled.size == 0:
        raise InputError("labeled node set is empty")
    diff = ad.gather_rows(h, labeled) - np.asarray(ad.value_of(center), dtype=np.float64)
    value = ad.total(diff * diff) * (1.0 / labeled.size)
    for w in weights:
        value = value + penalty * ad.total(w * w)
    return value


def _row_normalize(z):
    # floor inside the sqrt keeps the sqrt gradient finite for zero rows
    sq = ad.total(z * z, axis=1, keepdims=True)
    return z / ad.sqrt(ad.maximum(sq, NORM_FLOOR_SQ))


def loss_gna(z_ccr, z_cwr, batch, temperature: float,
             include_positive: bool = False):
    """Cross-view alignment loss over one mini-batch.

    Each node's two projections form the positive pair; negatives are the
    other batch members seen cross-view and within the anchor's own view.
    Cosine similarities are temperature-scaled and the per-anchor losses of
    both anchor roles are averaged, so swapping the views leaves the value
    unchanged. Row norms are floored at 1e-12 and the denominator uses a
    max-subtracted log-sum-exp, so large magnitudes and small temperatures
    stay finite.

    With ``include_positive`` the positive pair also appears in the
    denominator (the common InfoNCE variant); by default it does not.
    """
    batch = np.asarray(batch, dtype=np.int64)
    b = batch.size
    if b < 2:
        raise InputError(f"alignment batch needs at least 2 nodes, got {b}")
    inv_t = 1.0 / float(temperature)

    nc = _row_normalize(ad.gather_rows(z_ccr, batch))
    nw = _row_normalize(ad.gather_rows(z_cwr, batch))
    s_cw = (nc @ ad.transpose(nw)) * inv_t   # [i, j] = sim(ccr_i, cwr_j) / t
    s_cc = (nc @ ad.transpose(nc)) * inv_t
    s_ww = (nw @ ad.transpose(nw)) * inv_t
    s_wc = ad.transpose(s_cw)                # [i, j] = sim(cwr_i, ccr_j) / t
    positive = ad.total(nc * nw, axis=1) * inv_t

    offdiag = ~np.eye(b, dtype=bool)
    cross_mask = np.ones((b, b), dtype=bool) if include_positive else offdiag
    mask = np.concatenate([cross_mask, offdiag], axis=1)

    den_ccr = ad.row_logsumexp(ad.hstack(s_cw, s_cc), mask)
    den_cwr = ad.row_logsumexp(ad.hstack(s_wc, s_ww), mask)
    per_anchor = (den_ccr - positive) + (den_cwr - positive)
    return ad.total(per_anchor) * (1.0 / (2.0 * b))


def total_loss(l_ccr, l_cwr, l_gna, alpha: float) -> LossBreakdown:
    """Combine the three components into the training objective."""
    a = float(ad.value_of(l_ccr))
    b = float(ad.value_of(l_cwr))
    c = float(ad.value_of(l_gna))
    return LossBreakdown(l_ccr=a, l_cwr=b, l_gna=c,
                         total=0.5 * (a + b) + alpha * c)


_STATE_TENSORS = ("h0", "h_ccr", "h_cwr", "z_ccr", "z_cwr")


def _check_finite(state: ForwardState) -> None:
    for name in _STATE_TENSORS:
        if not np.isfinite(ad.value_of(getattr(state, name))).all():
            raise NonFiniteError(f"{name} contains non-finite values")


def _loss_and_grads(op, params: ModelParams, x, labeled, cfg: ModelConfig,
                    batch, centers, one_class_scale: float = 1.0):
    """Taped forward + losses; returns (gradient dict, LossBreakdown).

    The gradient is of one_class_scale * 0.5 * (l_ccr + l_cwr) + alpha *
    l_gna; the returned breakdown always reports the unscaled total.
    Parameters off the objective's computation path get exact zeros.
    """
    leaves = {name: ad.Var(np.asarray(value, dtype=np.float64), name=name)
              for name, value in params.as_dict().items()}
    vparams = ModelParams.from_dict(leaves)
    state = forward(op, vparams, x, cfg, centers=centers)
    _check_finite(state)

    l_ccr = loss_one_class(state.h_ccr, state.c_ccr, labeled, vparams.w_ccr,
                           cfg.weight_penalty)
    l_cwr = loss_one_class(state.h_cwr, state.c_cwr, labeled, vparams.w_cwr,
                           cfg.weight_penalty)
    if cfg.alpha != 0.0:
        l_gna = loss_gna(state.z_ccr, state.z_cwr, batch, cfg.temperature,
                         cfg.include_positive_in_denominator)
        objective = one_class_scale * 0.5 * (l_ccr + l_cwr) + cfg.alpha * l_gna
        gna_value = float(ad.value_of(l_gna))
    else:
        # alpha 0 keeps the alignment term off the tape entirely, so its
        # parameters receive exact zeros; the value is still logged
        gna_value = float(loss_gna(ad.value_of(state.z_ccr),
                                   ad.value_of(state.z_cwr),
                                   batch, cfg.temperature,
                                   cfg.include_positive_in_denominator))
        objective = one_class_scale * 0.5 * (l_ccr + l_cwr)
    if not np.isfinite(objective.value).all():
        raise NonFiniteError("loss contains non-finite values")
    objective.backward()

    grads = {name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value))
             for name, leaf in leaves.items()}
    breakdown = total_loss(l_ccr, l_cwr, gna_value, cfg.alpha)
    return grads, breakdown


def backward(params: ModelParams, dataset, cfg: ModelConfig, batch=None,
             centers=None):
    """Gradients of the total loss with respect to every parameter tensor.

    ``batch`` defaults to all nodes; ``centers`` defaults to fresh column
    means of this forward pass (stop-gradient either way). Returns a
    (gradients, LossBreakdown) pair, where gradients maps every name in
    ``params.as_dict()`` to an array of the same shape.
    """
    if dataset.split is None:
        raise InputError("dataset has no split; sample one before training")
    op = laplacian_operator(dataset.graph)
    if batch is None:
        batch = np.arange(dataset.graph.n)
    return _loss_and_grads(op, params, dataset.features, dataset.split.labeled,
                           cfg, batch, centers)


@dataclass
class OptimizerState:
    """Adam moment estimates plus hyperparameters; no weight decay (the
    Frobenius penalty lives inside the loss)."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def init_optimizer(params: ModelParams, learning_rate: float) -> OptimizerState:
    state = OptimizerState(learning_rate=learning_rate)
    for name, value in params.as_dict().items():
        state.m[name] = np.zeros_like(ad.value_of(value))
        state.v[name] = np.zeros_like(ad.value_of(value))
    return state


def adam_step(state: OptimizerState, params: ModelParams, grads: dict):
    """One bias-corrected Adam update; returns (new params, new state)."""
    t = state.step + 1
    mc = 1.0 - state.beta1 ** t
    vc = 1.0 - state.beta2 ** t
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.as_dict().items():
        g = grads[name]
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        new_params[name] = p - state.learning_rate * (m / mc) / (np.sqrt(v / vc) + state.eps)
        new_m[name] = m
        new_v[name] = v
    return (ModelParams.from_dict(new_params),
            replace(state, step=t, m=new_m, v=new_v))


def _partition(order: np.ndarray, batch_size: int) -> list:
    """Chunk a node permutation into batches; 0 means one full-graph batch.

    A trailing chunk of size 1 merges into its predecessor so every batch
    supports contrastive pairs while the chunks still partition the nodes.
    """
    n = order.size
    if batch_size <= 0 or batch_size >= n:
        return [order]
    chunks = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(chunks) > 1 and chunks[-1].size < 2:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


@dataclass
class TrainingLog:
    """Per-epoch loss breakdowns and wall-clock seconds."""

    breakdowns: list
    epoch_seconds: list

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,l_ccr,l_cwr,l_gna,total\n")
            for i, bd in enumerate(self.breakdowns):
                fh.write(f"{i},{bd.l_ccr:.17g},{bd.l_cwr:.17g},"
                         f"{bd.l_gna:.17g},{bd.total:.17g}\n")


def fit(dataset, cfg: ModelConfig, train: TrainConfig | None = None):
    """Train the detector; returns (trained ModelParams, TrainingLog).

    Epoch structure: one full untaped forward pass recomputes the centers
    and the logged one-class losses; the seeded node permutation is chunked
    into batches; each batch takes one Adam step on the gradient of
    (1/num_batches) * 0.5 * (l_ccr + l_cwr) + alpha * l_gna(batch) at the
    current parameters with the epoch's centers held fixed. The logged
    alignment loss is the mean of the per-batch values. Runs with the same
    seed and config produce identical logs and parameters.
    """
    train = TrainConfig() if train is None else train
    if dataset.split is None:
        raise InputError("dataset has no split; sample one before training")
    labeled = np.asarray(dataset.split.labeled, dtype=np.int64)
    if labeled.size == 0:
        raise InputError("labeled node set is empty")
    n = dataset.graph.n
    if n < 2:
        raise InputError(f"training needs at least 2 nodes, got {n}")

    params = init_params(cfg, derive_seed(cfg.seed, "init"))
    if train.freeze_filters:
        params.k_ccr = np.ones_like(params.k_ccr)
        params.k_cwr = np.ones_like(params.k_cwr)
    optimizer = init_optimizer(params, train.learning_rate)
    rng = np.random.default_rng(derive_seed(cfg.seed, "batches"))
    op = laplacian_operator(dataset.graph)
    x = np.asarray(dataset.features, dtype=np.float64)

    breakdowns, seconds = [], []
    for epoch in range(train.epochs):
        started = time.perf_counter()
        try:
            state = forward(op, params, x, cfg)
            centers = (state.c_ccr, state.c_cwr)
            l_ccr = float(ad.value_of(loss_one_class(
                state.h_ccr, centers[0], labeled, params.w_ccr, cfg.weight_penalty)))
            l_cwr = float(ad.value_of(loss_one_class(
                state.h_cwr, centers[1], labeled, params.w_cwr, cfg.weight_penalty)))

            batches = _partition(rng.permutation(n), cfg.batch_size)
            scale = 1.0 / len(batches)
            gna_values = []
            for batch in batches:
                grads, bd = _loss_and_grads(op, params, x, labeled, cfg, batch,
                                            centers, one_class_scale=scale)
                if train.freeze_filters:
                    grads["k_ccr"] = np.zeros_like(grads["k_ccr"])
                    grads["k_cwr"] = np.zeros_like(grads["k_cwr"])
                params, optimizer = adam_step(optimizer, params, grads)
                gna_values.append(bd.l_gna)
        except NonFiniteError as exc:
            raise DivergenceError(f"training diverged at epoch {epoch}: {exc}") from exc

        l_gna = float(np.mean(gna_values))
        bd = LossBreakdown(l_ccr=l_ccr, l_cwr=l_cwr, l_gna=l_gna,
                           total=0.5 * (l_ccr + l_cwr) + cfg.alpha * l_gna)
        if not np.isfinite(bd.total):
            raise DivergenceError(f"non-finite loss at epoch {epoch}")
        breakdowns.append(bd)
        seconds.append(time.perf_counter() - started)

    return params, TrainingLog(breakdowns=breakdowns, epoch_seconds=seconds)
