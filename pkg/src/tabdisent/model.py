"""The attention autoencoder and its training loop.

Each sample is an M-attribute row lifted to shape (M, channels_in). A
three-layer MLP shared across attributes encodes every attribute into C
latent channels; H independent attention heads (full C->C q/k/v
projections, row-softmax of q.k^T / sqrt(C)) each produce an M x M
attention map and a re-mixed latent; a decoder symmetric to the encoder
reconstructs the input once per head.

Training pulls the heads' attention maps apart with a batch-mean cosine
penalty while pushing both reconstructions toward the input; the anomaly
score of a sample is the raw sum of squared reconstruction error over
heads and elements (no normalizer, by design: scores are compared, never
interpreted as means).

Ablation switches:
  - one_head_one_subset: single head, single reconstruction, no map
    penalty.
  - complement_mask: single head; the second map is the elementwise
    complement 1 - w of the first and re-mixes the same head's values.
  - no_disentangle: all heads, both reconstructions, map penalty dropped
    (reported as 0 in the loss breakdown).
"""

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ShapeMismatchError, TrainingDivergedError
from .optim import adam_init, adam_step

ABLATIONS = ("full", "one_head_one_subset", "complement_mask", "no_disentangle")
PRECISIONS = ("float64", "float32")

_SCORE_CHUNK = 4096


@dataclass(frozen=True)
class ModelConfig:
    num_attributes: int
    latent_channels: int
    channels_in: int = 1
    num_heads: int = 2
    leaky_slope: float = 0.01
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-4
    seed: int = 0
    ablation: str = "full"
    precision: str = "float64"

    def validate(self):
        problems = []
        for name in ("num_attributes", "latent_channels", "channels_in", "num_heads", "batch_size"):
            if int(getattr(self, name)) < 1:
                problems.append(f"{name}: must be a positive integer")
        if self.epochs < 0:
            problems.append("epochs: must be nonnegative")
        if not self.learning_rate > 0:
            problems.append("learning_rate: must be positive")
        if not 0.0 < self.leaky_slope < 1.0:
            problems.append("leaky_slope: must lie in (0, 1)")
        if self.seed < 0:
            problems.append("seed: must be nonnegative")
        if self.ablation not in ABLATIONS:
            problems.append(f"ablation: unknown variant {self.ablation!r}")
        if self.ablation in ("one_head_one_subset", "complement_mask") and self.num_heads != 1:
            problems.append(f"num_heads: ablation {self.ablation} requires exactly 1 head, got {self.num_heads}")
        if self.num_heads > 2 and self.ablation != "full":
            problems.append(f"num_heads: more than 2 heads requires ablation 'full', got {self.ablation!r}")
        if self.precision not in PRECISIONS:
            problems.append(f"precision: must be one of {PRECISIONS}")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    @property
    def dtype(self):
        return np.float64 if self.precision == "float64" else np.float32


def _layer_shapes(config):
    """(name, fan_in, fan_out) for every linear layer, in storage order."""
    c, cin = config.latent_channels, config.channels_in
    layers = [("encoder.0", cin, c), ("encoder.1", c, c), ("encoder.2", c, c)]
    for h in range(config.num_heads):
        for proj in ("query", "key", "value"):
            layers.append((f"head{h}.{proj}", c, c))
    layers += [("decoder.0", c, c), ("decoder.1", c, c), ("decoder.2", c, cin)]
    return layers


@dataclass
class ModelParams:
    """All learnable weights, as named autodiff tensors in a fixed order."""

    config: ModelConfig
    tensors: dict

    def layer(self, name):
        return self.tensors[f"{name}.weight"], self.tensors[f"{name}.bias"]


def init_params(config):
    """Fan-in-scaled uniform weights, zero biases, deterministic per seed."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    dt = config.dtype
    tensors = {}
    for name, fan_in, fan_out in _layer_shapes(config):
        bound = 1.0 / sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dt)
        tensors[f"{name}.weight"] = ad.tensor(w, requires_grad=True)
        tensors[f"{name}.bias"] = ad.tensor(np.zeros(fan_out, dtype=dt), requires_grad=True)
    return ModelParams(config=config, tensors=tensors)


@dataclass
class ForwardArtifacts:
    """One batch's attention maps, reconstructions and loss breakdown.

    attention_maps holds one (B, M, M) tensor per reconstruction path.
    Softmax-produced maps are row-stochastic; the complement_mask
    variant's derived second map (1 - w) is the one exception, its rows
    summing to M - 1 instead. loss_d is the optimized map penalty: zero
    whenever the variant omits it, so loss_overall == loss_d + loss_r
    holds unconditionally.
    """

    attention_maps: list
    reconstructions: list
    loss_d: "ad.Tensor"
    loss_r: "ad.Tensor"
    loss_overall: "ad.Tensor"


def encode(params, x):
    """(B, M, channels_in) -> (B, M, C); the MLP acts on the channel axis."""
    cfg = params.config
    if x.shape[-1] != cfg.channels_in or x.shape[-2] != cfg.num_attributes:
        raise ShapeMismatchError(
            f"input shape {x.shape} does not match (M={cfg.num_attributes}, channels_in={cfg.channels_in})"
        )
    w0, b0 = params.layer("encoder.0")
    w1, b1 = params.layer("encoder.1")
    w2, b2 = params.layer("encoder.2")
    h = ad.leaky_relu(ad.linear(x, w0, b0), cfg.leaky_slope)
    h = ad.leaky_relu(ad.linear(h, w1, b1), cfg.leaky_slope)
    return ad.linear(h, w2, b2)


def decode(params, zhat):
    """(B, M, C) -> (B, M, channels_in), mirroring the encoder."""
    cfg = params.config
    w0, b0 = params.layer("decoder.0")
    w1, b1 = params.layer("decoder.1")
    w2, b2 = params.layer("decoder.2")
    h = ad.leaky_relu(ad.linear(zhat, w0, b0), cfg.leaky_slope)
    h = ad.leaky_relu(ad.linear(h, w1, b1), cfg.leaky_slope)
    return ad.linear(h, w2, b2)


def _head_projections(params, z, h):
    q_w, q_b = params.layer(f"head{h}.query")
    k_w, k_b = params.layer(f"head{h}.key")
    v_w, v_b = params.layer(f"head{h}.value")
    return ad.linear(z, q_w, q_b), ad.linear(z, k_w, k_b), ad.linear(z, v_w, v_b)


def attention_head(params, z, h):
    """Map and re-mixed latent for head h: w = softmax(q.k^T/sqrt(C)), zhat = w.v."""
    if h >= params.config.num_heads:
        raise ConfigError(f"head index {h} out of range for {params.config.num_heads} heads")
    q, k, v = _head_projections(params, z, h)
    scores = ad.scale(ad.matmul(q, k, transpose_b=True), 1.0 / sqrt(params.config.latent_channels))
    w = ad.softmax_rows(scores)
    return w, ad.matmul(w, v)


def disentangling_loss(maps):
    """Mean over unordered head pairs of the batch-mean map cosine.

    A single map contributes nothing (there is no pair to pull apart);
    the result is then a constant zero scalar.
    """
    if len(maps) < 2:
        ref = maps[0].data if maps else np.zeros(())
        return ad.tensor(np.zeros((), dtype=ref.dtype))
    pair_fn = ad.batch_cosine_mean if maps[0].ndim == 3 else ad.cosine_sim
    acc = None
    count = 0
    for i in range(len(maps)):
        for j in range(i + 1, len(maps)):
            term = pair_fn(maps[i], maps[j])
            acc = term if acc is None else ad.add(acc, term)
            count += 1
    return ad.scale(acc, 1.0 / count) if count > 1 else acc


def reconstruction_loss(x, reconstructions):
    """Sum over heads of whole-tensor MSE against the input."""
    acc = None
    for recon in reconstructions:
        term = ad.mse(x, recon)
        acc = term if acc is None else ad.add(acc, term)
    return acc


def forward_batch(params, x):
    """Full forward pass for one batch, honoring the ablation switch."""
    cfg = params.config
    z = encode(params, x)
    if cfg.ablation == "complement_mask":
        q, k, v = _head_projections(params, z, 0)
        scores = ad.scale(ad.matmul(q, k, transpose_b=True), 1.0 / sqrt(cfg.latent_channels))
        w = ad.softmax_rows(scores)
        w_comp = ad.one_minus(w)
        maps = [w, w_comp]
        recons = [decode(params, ad.matmul(w, v)), decode(params, ad.matmul(w_comp, v))]
        loss_d = ad.tensor(np.zeros((), dtype=x.dtype))
    else:
        maps, recons = [], []
        for h in range(cfg.num_heads):
            w, zhat = attention_head(params, z, h)
            maps.append(w)
            recons.append(decode(params, zhat))
        if cfg.ablation in ("no_disentangle", "one_head_one_subset") or cfg.num_heads == 1:
            loss_d = ad.tensor(np.zeros((), dtype=x.dtype))
        else:
            loss_d = disentangling_loss(maps)
    loss_r = reconstruction_loss(x, recons)
    return ForwardArtifacts(
        attention_maps=maps,
        reconstructions=recons,
        loss_d=loss_d,
        loss_r=loss_r,
        loss_overall=ad.add(loss_d, loss_r),
    )


@dataclass
class TrainingTrace:
    """Per-epoch sample-weighted mean losses."""

    loss_d: list = field(default_factory=list)
    loss_r: list = field(default_factory=list)
    loss_overall: list = field(default_factory=list)


def as_model_input(x_matrix, config):
    """(N, M) or (N, M, channels_in) array -> contiguous (N, M, channels_in)."""
    arr = np.asarray(x_matrix)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[1] != config.num_attributes or arr.shape[2] != config.channels_in:
        raise ShapeMismatchError(
            f"training matrix shape {np.asarray(x_matrix).shape} does not match "
            f"(M={config.num_attributes}, channels_in={config.channels_in})"
        )
    return np.ascontiguousarray(arr, dtype=config.dtype)


def fit(config, train_matrix):
    """Train on (N, M[, channels_in]) normals; returns (params, trace).

    Bitwise deterministic for a fixed seed on one platform: parameter
    init consumes default_rng(seed), epoch shuffling consumes
    default_rng([seed, 1]).
    """
    config.validate()
    x_all = as_model_input(train_matrix, config)
    n = x_all.shape[0]
    if n < 1:
        raise ConfigError("fit needs at least one training row")
    params = init_params(config)
    state = adam_init(params.tensors, config.learning_rate)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    trace = TrainingTrace()
    for epoch in range(config.epochs):
        perm = shuffle_rng.permutation(n)
        sums = np.zeros(3)
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            art = forward_batch(params, ad.Tensor(x_all[idx]))
            overall = float(art.loss_overall.data)
            if not np.isfinite(overall):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, step {start // config.batch_size}: {overall}"
                )
            sums += len(idx) * np.array([float(art.loss_d.data), float(art.loss_r.data), overall])
            art.loss_overall.backward()
            adam_step(params.tensors, state)
        trace.loss_d.append(float(sums[0] / n))
        trace.loss_r.append(float(sums[1] / n))
        trace.loss_overall.append(float(sums[2] / n))
    return params, trace


def score_from_reconstructions(x, reconstructions):
    """Per-sample sum over heads and elements of squared error.

    x is (N, M, c); each reconstruction matches. Raw sums, not means:
    scores only ever get ranked."""
    total = np.zeros(x.shape[0])
    for recon in reconstructions:
        diff = x - recon
        total += (diff * diff).sum(axis=(1, 2))
    return total


def anomaly_scores(params, x_matrix):
    """Anomaly score per row of (N, M[, channels_in]); higher = more anomalous."""
    x_all = as_model_input(x_matrix, params.config)
    out = np.empty(x_all.shape[0])
    with ad.no_grad():
        for start in range(0, x_all.shape[0], _SCORE_CHUNK):
            xb = x_all[start : start + _SCORE_CHUNK]
            art = forward_batch(params, ad.Tensor(xb))
            out[start : start + _SCORE_CHUNK] = score_from_reconstructions(
                xb, [r.data for r in art.reconstructions]
            )
    return out


def mean_attention_maps(params, x_matrix, batch_size=1024):
    """Per-head M x M attention maps averaged over all given samples."""
    x_all = as_model_input(x_matrix, params.config)
    n = x_all.shape[0]
    cfg = params.config
    n_maps = 2 if cfg.ablation == "complement_mask" else cfg.num_heads
    acc = [np.zeros((cfg.num_attributes, cfg.num_attributes)) for _ in range(n_maps)]
    with ad.no_grad():
        for start in range(0, n, batch_size):
            art = forward_batch(params, ad.Tensor(x_all[start : start + batch_size]))
            for h, w in enumerate(art.attention_maps):
                acc[h] += w.data.sum(axis=0)
    return [a / n for a in acc]
