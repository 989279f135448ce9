"""The two-view detector model: a shared encoder, adaptive frequency-response
propagation in a cross-channel and a channel-wise view, and projection heads.

Per propagation layer the cross-channel view applies (I - k_t L) with one
trainable coefficient per layer, while the channel-wise view applies
(I - K_{t,j} L) to each hidden channel j separately. A coefficient of 0 is
the all-pass filter (features pass through untouched); 1 is aggressive
low-pass smoothing. Coefficients are unconstrained so training can choose
high-pass behavior where the neighborhood structure calls for it.

The forward pass is written over autodiff-compatible ops, so the same code
runs untaped on ndarrays for scoring and taped on Vars for training.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .exceptions import InputError
from .graph import SparseSymOp
from .seeding import derive_seed

CHECKPOINT_MAGIC = "rho-checkpoint"
CHECKPOINT_VERSION = 1

ACTIVATIONS = {
    "relu": ad.relu,
    "tanh": ad.tanh,
    "identity": lambda x: x,
}

CWR_FORMULAS = ("per-channel", "hadamard")


@dataclass
class ModelConfig:
    """Architecture and loss-shape configuration.

    ``batch_size`` of 0 means full-graph alignment batches; otherwise it must
    be at least 2 so every batch supports contrastive pairs. ``alpha`` weighs
    the cross-view alignment loss against the one-class objectives.
    """

    input_dim: int
    hidden_dim: int = 64
    layers: int = 2
    temperature: float = 0.5
    alpha: float = 1.0
    weight_penalty: float = 5e-5
    batch_size: int = 512
    activation: str = "relu"
    cwr_formula: str = "per-channel"
    include_positive_in_denominator: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1:
            raise InputError(f"input_dim must be positive, got {self.input_dim}")
        if self.hidden_dim < 1:
            raise InputError(f"hidden_dim must be positive, got {self.hidden_dim}")
        if self.layers < 1:
            raise InputError(f"layers must be at least 1, got {self.layers}")
        if not self.temperature > 0:
            raise InputError(f"temperature must be positive, got {self.temperature}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InputError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.weight_penalty < 0:
            raise InputError(f"weight_penalty must be nonnegative, got {self.weight_penalty}")
        if self.batch_size != 0 and self.batch_size < 2:
            raise InputError("batch_size must be 0 (full graph) or at least 2, "
                             f"got {self.batch_size}")
        if self.activation not in ACTIVATIONS:
            raise InputError(f"unknown activation {self.activation!r}; "
                             f"choose from {sorted(ACTIVATIONS)}")
        if self.cwr_formula not in CWR_FORMULAS:
            raise InputError(f"unknown cwr_formula {self.cwr_formula!r}; "
                             f"choose from {list(CWR_FORMULAS)}")

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "layers": self.layers,
            "temperature": self.temperature,
            "alpha": self.alpha,
            "weight_penalty": self.weight_penalty,
            "batch_size": self.batch_size,
            "activation": self.activation,
            "cwr_formula": self.cwr_formula,
            "include_positive_in_denominator": self.include_positive_in_denominator,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class ModelParams:
    """All trainable tensors. Entries may be ndarrays or autodiff Vars."""

    enc_w1: object
    enc_b1: object
    enc_w2: object
    enc_b2: object
    w_ccr: list          # layers x (d, d)
    w_cwr: list          # layers x (d, d)
    k_ccr: object        # (layers,) per-layer cross-channel coefficients
    k_cwr: object        # (layers, d) per-layer per-channel coefficients
    proj_ccr_w1: object
    proj_ccr_b1: object
    proj_ccr_w2: object
    proj_ccr_b2: object
    proj_cwr_w1: object
    proj_cwr_b1: object
    proj_cwr_w2: object
    proj_cwr_b2: object

    def as_dict(self) -> dict:
        """Flat name -> tensor mapping in a stable order."""
        out = {"enc_w1": self.enc_w1, "enc_b1": self.enc_b1,
               "enc_w2": self.enc_w2, "enc_b2": self.enc_b2}
        for t, w in enumerate(self.w_ccr):
            out[f"w_ccr_{t}"] = w
        for t, w in enumerate(self.w_cwr):
            out[f"w_cwr_{t}"] = w
        out["k_ccr"] = self.k_ccr
        out["k_cwr"] = self.k_cwr
        for name in ("proj_ccr_w1", "proj_ccr_b1", "proj_ccr_w2", "proj_ccr_b2",
                     "proj_cwr_w1", "proj_cwr_b1", "proj_cwr_w2", "proj_cwr_b2"):
            out[name] = getattr(self, name)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        layers = sum(1 for name in d if name.startswith("w_ccr_"))
        return cls(
            enc_w1=d["enc_w1"], enc_b1=d["enc_b1"],
            enc_w2=d["enc_w2"], enc_b2=d["enc_b2"],
            w_ccr=[d[f"w_ccr_{t}"] for t in range(layers)],
            w_cwr=[d[f"w_cwr_{t}"] for t in range(layers)],
            k_ccr=d["k_ccr"], k_cwr=d["k_cwr"],
            proj_ccr_w1=d["proj_ccr_w1"], proj_ccr_b1=d["proj_ccr_b1"],
            proj_ccr_w2=d["proj_ccr_w2"], proj_ccr_b2=d["proj_ccr_b2"],
            proj_cwr_w1=d["proj_cwr_w1"], proj_cwr_b1=d["proj_cwr_b1"],
            proj_cwr_w2=d["proj_cwr_w2"], proj_cwr_b2=d["proj_cwr_b2"],
        )

    def copy(self) -> "ModelParams":
        return ModelParams.from_dict({k: np.array(v, dtype=np.float64, copy=True)
                                      for k, v in self.as_dict().items()})


def init_params(cfg: ModelConfig, seed: int | None = None) -> ModelParams:
    """Initialize parameters reproducibly from a seed.

    Weights are uniform in +-1/sqrt(fan_in), biases start at zero, and every
    filter coefficient starts at 0.5 (halfway between all-pass and full
    smoothing).
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    m, d, layers = cfg.input_dim, cfg.hidden_dim, cfg.layers

    def uniform(fan_in, shape):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    return ModelParams(
        enc_w1=uniform(m, (m, d)), enc_b1=np.zeros(d),
        enc_w2=uniform(d, (d, d)), enc_b2=np.zeros(d),
        w_ccr=[uniform(d, (d, d)) for _ in range(layers)],
        w_cwr=[uniform(d, (d, d)) for _ in range(layers)],
        k_ccr=np.full(layers, 0.5),
        k_cwr=np.full((layers, d), 0.5),
        proj_ccr_w1=uniform(d, (d, d)), proj_ccr_b1=np.zeros(d),
        proj_ccr_w2=uniform(d, (d, d)), proj_ccr_b2=np.zeros(d),
        proj_cwr_w1=uniform(d, (d, d)), proj_cwr_b1=np.zeros(d),
        proj_cwr_w2=uniform(d, (d, d)), proj_cwr_b2=np.zeros(d),
    )


def encode(params: ModelParams, x, cfg: ModelConfig):
    """Shared two-layer encoder mapping raw features to the hidden width."""
    act = ACTIVATIONS[cfg.activation]
    h = act(x @ params.enc_w1 + params.enc_b1)
    return act(h @ params.enc_w2 + params.enc_b2)


def propagate_ccr(op: SparseSymOp, params: ModelParams, h0, cfg: ModelConfig):
    """Cross-channel view: per layer, h <- act((I - k_t L) h W_t)."""
    act = ACTIVATIONS[cfg.activation]
    h = h0
    for t, w in enumerate(params.w_ccr):
        k_t = ad.gather_rows(params.k_ccr, np.array([t]))  # shape (1,)
        filtered = h - k_t * ad.laplacian(op, h)
        h = act(filtered @ w)
    return h


def propagate_cwr(op: SparseSymOp, params: ModelParams, h0, cfg: ModelConfig,
                  formula: str | None = None):
    """Channel-wise view with per-channel filter coefficients.

    per-channel (default): column j of the pre-weight matrix is
    (I - K_{t,j} L) h_j, assembled as h - (L h) * K_t row-broadcast, then
    multiplied by W_t and passed through the activation.

    hadamard: act((I - L)(h * K_t) W_t). The two forms agree when every
    K_{t,j} equals 1 and disagree in general.
    """
    formula = cfg.cwr_formula if formula is None else formula
    if formula not in CWR_FORMULAS:
        raise InputError(f"unknown cwr_formula {formula!r}")
    act = ACTIVATIONS[cfg.activation]
    h = h0
    for t, w in enumerate(params.w_cwr):
        k_t = ad.gather_rows(params.k_cwr, np.array([t]))  # shape (1, d)
        if formula == "per-channel":
            filtered = h - ad.laplacian(op, h) * k_t
        else:
            scaled = h * k_t
            filtered = scaled - ad.laplacian(op, scaled)
        h = act(filtered @ w)
    return h


def project(params: ModelParams, h, view: str, cfg: ModelConfig):
    """Two-layer projection head with a linear output layer."""
    if view == "ccr":
        w1, b1, w2, b2 = (params.proj_ccr_w1, params.proj_ccr_b1,
                          params.proj_ccr_w2, params.proj_ccr_b2)
    elif view == "cwr":
        w1, b1, w2, b2 = (params.proj_cwr_w1, params.proj_cwr_b1,
                          params.proj_cwr_w2, params.proj_cwr_b2)
    else:
        raise InputError(f"unknown view {view!r}; expected 'ccr' or 'cwr'")
    act = ACTIVATIONS[cfg.activation]
    return act(h @ w1 + b1) @ w2 + b2


def compute_centers(h_ccr: np.ndarray, h_cwr: np.ndarray):
    """Column means of both views over all nodes.

    Centers act as constants in every loss (stop-gradient); training
    recomputes them once per epoch from a full forward pass.
    """
    h_ccr = ad.value_of(h_ccr)
    h_cwr = ad.value_of(h_cwr)
    if h_ccr.shape[0] == 0 or h_cwr.shape[0] == 0:
        raise InputError("cannot compute centers of an empty representation matrix")
    return h_ccr.mean(axis=0), h_cwr.mean(axis=0)


@dataclass
class ForwardState:
    """Everything the losses and the scorer need from one forward pass."""

    h0: object
    h_ccr: object
    h_cwr: object
    z_ccr: object
    z_cwr: object
    c_ccr: np.ndarray
    c_cwr: np.ndarray


def forward(op: SparseSymOp, params: ModelParams, x, cfg: ModelConfig,
            centers=None) -> ForwardState:
    """Run encoder, both propagation views, and both projection heads.

    When ``centers`` is None the centers are computed fresh from this pass
    (always on raw values, never on the tape).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.input_dim:
        raise InputError(f"features of shape {x.shape} do not match input_dim={cfg.input_dim}")
    if x.shape[0] != op.graph.n:
        raise InputError(f"features have {x.shape[0]} rows, graph has {op.graph.n} nodes")
    h0 = encode(params, x, cfg)
    h_ccr = propagate_ccr(op, params, h0, cfg)
    h_cwr = propagate_cwr(op, params, h0, cfg)
    z_ccr = project(params, h_ccr, "ccr", cfg)
    z_cwr = project(params, h_cwr, "cwr", cfg)
    if centers is None:
        c_ccr, c_cwr = compute_centers(h_ccr, h_cwr)
    else:
        c_ccr, c_cwr = centers
    return ForwardState(h0=h0, h_ccr=h_ccr, h_cwr=h_cwr,
                        z_ccr=z_ccr, z_cwr=z_cwr,
                        c_ccr=np.asarray(c_ccr, dtype=np.float64),
                        c_cwr=np.asarray(c_cwr, dtype=np.float64))


def _encode_array(arr: np.ndarray) -> dict:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii")}


def _decode_array(entry: dict) -> np.ndarray:
    raw = base64.b64decode(entry["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).copy()


def save_checkpoint(path, cfg: ModelConfig, params: ModelParams) -> None:
    """Write config and parameters to a single versioned JSON file.

    Format: {"magic": "rho-checkpoint", "version": 1, "config": {...},
    "params": {name: {"shape": [...], "data": base64 little-endian float64}}}.
    """
    payload = {
        "magic": CHECKPOINT_MAGIC,
        "version": CHECKPOINT_VERSION,
        "config": cfg.to_dict(),
        "params": {name: _encode_array(ad.value_of(t))
                   for name, t in params.as_dict().items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path):
    """Read a checkpoint back; returns (ModelConfig, ModelParams)."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("magic") != CHECKPOINT_MAGIC:
        raise InputError(f"{path} is not a model checkpoint (bad magic)")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise InputError(f"unsupported checkpoint version {payload.get('version')}")
    cfg = ModelConfig.from_dict(payload["config"])
    params = ModelParams.from_dict({name: _decode_array(entry)
                                    for name, entry in payload["params"].items()})
    return cfg, params
