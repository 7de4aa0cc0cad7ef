"""Network building blocks: MLP, GRU cell, embeddings, transformer encoder.

The encoder keeps per-layer token activations and attention maps around so the
attribution pass can read them back after a backward sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, ShapeMismatch, Tensor


class SequenceTooLong(Exception):
    pass


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


_ACTIVATIONS = {
    "tanh": ad.tanh,
    "relu": ad.relu,
    "sigmoid": ad.sigmoid,
    "linear": lambda t: t,
}


@dataclass
class MlpConfig:
    widths: list[int]
    hidden_act: str = "tanh"
    out_act: str = "linear"

    def __post_init__(self):
        if not self.widths or any(w <= 0 for w in self.widths):
            raise ValueError(f"layer widths must be positive, got {self.widths}")


class Mlp:
    """Affine + activation chain; parameters live in the given store."""

    def __init__(self, store: ParamStore, name: str, in_dim: int, config: MlpConfig,
                 rng: np.random.Generator):
        self.config = config
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        prev = in_dim
        for i, width in enumerate(config.widths):
            self.weights.append(store.add(f"{name}/w{i}", _glorot(rng, prev, width)))
            self.biases.append(store.add(f"{name}/b{i}", np.zeros(width)))
            prev = width

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.weights[0].data.shape[0]:
            raise ShapeMismatch(
                f"mlp input {x.data.shape} vs first layer {self.weights[0].data.shape}"
            )
        hidden = _ACTIVATIONS[self.config.hidden_act]
        out_act = _ACTIVATIONS[self.config.out_act]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.add(ad.matmul(h, w), b)
            h = out_act(h) if i == last else hidden(h)
        return h


class GruCell:
    """Standard GRU gates plus a linear delta head on the next hidden state."""

    def __init__(self, store: ParamStore, name: str, in_dim: int, hidden_dim: int,
                 rng: np.random.Generator, delta_dim: int | None = None):
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        joint = in_dim + hidden_dim
        self.w_z = store.add(f"{name}/wz", _glorot(rng, joint, hidden_dim))
        self.b_z = store.add(f"{name}/bz", np.zeros(hidden_dim))
        self.w_r = store.add(f"{name}/wr", _glorot(rng, joint, hidden_dim))
        self.b_r = store.add(f"{name}/br", np.zeros(hidden_dim))
        self.w_h = store.add(f"{name}/wh", _glorot(rng, joint, hidden_dim))
        self.b_h = store.add(f"{name}/bh", np.zeros(hidden_dim))
        if delta_dim is not None:
            self.w_d = store.add(f"{name}/wd", np.zeros((hidden_dim, delta_dim)))
            self.b_d = store.add(f"{name}/bd", np.zeros(delta_dim))
        else:
            self.w_d = self.b_d = None

    def step(self, x: Tensor, h: Tensor) -> tuple[Tensor | None, Tensor]:
        """One gate update; returns (delta from the head or None, next hidden)."""
        squeeze = x.data.ndim == 1
        if squeeze:
            x = ad.reshape(x, (1, -1))
            h = ad.reshape(h, (1, -1))
        if x.data.shape[1] != self.in_dim or h.data.shape[1] != self.hidden_dim:
            raise ShapeMismatch(
                f"gru step got x {x.data.shape}, h {h.data.shape}; "
                f"cell expects ({self.in_dim}, {self.hidden_dim})"
            )
        xh = ad.concat([x, h], axis=1)
        z = ad.sigmoid(ad.add(ad.matmul(xh, self.w_z), self.b_z))
        r = ad.sigmoid(ad.add(ad.matmul(xh, self.w_r), self.b_r))
        xrh = ad.concat([x, ad.mul(r, h)], axis=1)
        cand = ad.tanh(ad.add(ad.matmul(xrh, self.w_h), self.b_h))
        one_minus_z = ad.sub(ad.const(np.ones_like(z.data)), z)
        h_next = ad.add(ad.mul(one_minus_z, h), ad.mul(z, cand))
        delta = None
        if self.w_d is not None:
            delta = ad.add(ad.matmul(h_next, self.w_d), self.b_d)
            if squeeze:
                delta = ad.reshape(delta, (-1,))
        if squeeze:
            h_next = ad.reshape(h_next, (-1,))
        return delta, h_next


def sinusoidal_positions(max_len: int, dim: int) -> np.ndarray:
    """Frequency-based positional embedding table (not learned)."""
    pos = np.arange(max_len)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    table = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return table.astype(np.float64)


@dataclass
class TransformerConfig:
    layers: int = 2
    dim: int = 32
    heads: int = 4
    mlp_hidden: int = 64
    max_len: int = 24
    vocab_size: int = 16
    ln_eps: float = 1e-5
    final_ln: bool = True
    pool: str = "mean"  # or "cls"
    pad_id: int = 0

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ValueError(f"dim {self.dim} must be divisible by heads {self.heads}")


@dataclass
class EncoderOutput:
    tokens: Tensor            # max_len x dim, output of the final block (+LN)
    pooled: Tensor            # dim, masked mean (or CLS row)
    attention: list[list[Tensor]]   # per layer, per head, max_len x max_len
    activations: list[Tensor]       # per layer, token matrix X_l
    nonpad: np.ndarray              # indices of non-PAD positions

    def attention_arrays(self, layer: int) -> np.ndarray:
        return np.stack([a.data for a in self.attention[layer]])


class TransformerEncoder:
    """Pre-norm residual blocks; embeddings plus sinusoidal positions in."""

    def __init__(self, store: ParamStore, config: TransformerConfig,
                 rng: np.random.Generator, name: str = "enc"):
        self.config = config
        self.embed = store.add(
            f"{name}/embed", rng.normal(scale=0.5, size=(config.vocab_size, config.dim))
        )
        self.positions = sinusoidal_positions(config.max_len, config.dim)
        d = config.dim
        self.layers = []
        for l in range(config.layers):
            p = f"{name}/l{l}"
            layer = {
                "ln1_g": store.add(f"{p}/ln1_g", np.ones(d)),
                "ln1_b": store.add(f"{p}/ln1_b", np.zeros(d)),
                "wq": store.add(f"{p}/wq", _glorot(rng, d, d)),
                "wk": store.add(f"{p}/wk", _glorot(rng, d, d)),
                "wv": store.add(f"{p}/wv", _glorot(rng, d, d)),
                "wo": store.add(f"{p}/wo", _glorot(rng, d, d)),
                "bo": store.add(f"{p}/bo", np.zeros(d)),
                "ln2_g": store.add(f"{p}/ln2_g", np.ones(d)),
                "ln2_b": store.add(f"{p}/ln2_b", np.zeros(d)),
                "mlp_w1": store.add(f"{p}/mlp_w1", _glorot(rng, d, config.mlp_hidden)),
                "mlp_b1": store.add(f"{p}/mlp_b1", np.zeros(config.mlp_hidden)),
                "mlp_w2": store.add(f"{p}/mlp_w2", _glorot(rng, config.mlp_hidden, d)),
                "mlp_b2": store.add(f"{p}/mlp_b2", np.zeros(d)),
            }
            self.layers.append(layer)
        if config.final_ln:
            self.final_g = store.add(f"{name}/final_g", np.ones(d))
            self.final_b = store.add(f"{name}/final_b", np.zeros(d))

    def encode(self, token_ids, layer_offsets=None) -> EncoderOutput:
        """layer_offsets: optional per-layer arrays added to each block output;
        lets callers probe d(output)/d(activation) without touching weights."""
        cfg = self.config
        ids = np.asarray(token_ids, dtype=np.int64)
        if ids.shape[0] > cfg.max_len:
            raise SequenceTooLong(f"{ids.shape[0]} tokens, limit {cfg.max_len}")
        if np.any(ids >= cfg.vocab_size) or np.any(ids < 0):
            raise ValueError("token id out of vocabulary range")
        m = ids.shape[0]
        nonpad = np.flatnonzero(ids != cfg.pad_id)
        # PAD keys are masked out of every attention row pre-softmax.
        key_mask = np.zeros((m, m))
        key_mask[:, ids == cfg.pad_id] = -1e30

        x = ad.add(ad.gather(self.embed, ids), ad.const(self.positions[:m]))
        dh = cfg.dim // cfg.heads
        inv_sqrt = 1.0 / np.sqrt(dh)
        attention: list[list[Tensor]] = []
        activations: list[Tensor] = []
        for l, layer in enumerate(self.layers):
            normed = ad.layernorm(x, layer["ln1_g"], layer["ln1_b"], cfg.ln_eps)
            q = ad.matmul(normed, layer["wq"])
            k = ad.matmul(normed, layer["wk"])
            v = ad.matmul(normed, layer["wv"])
            heads = []
            head_attn = []
            for h in range(cfg.heads):
                cols = (slice(None), slice(h * dh, (h + 1) * dh))
                qh, kh, vh = ad.slice_(q, cols), ad.slice_(k, cols), ad.slice_(v, cols)
                scores = ad.add(
                    ad.scale(ad.matmul(qh, ad.transpose(kh)), inv_sqrt),
                    ad.const(key_mask),
                )
                attn = ad.softmax(scores, axis=-1)
                head_attn.append(attn)
                heads.append(ad.matmul(attn, vh))
            msa = ad.add(ad.matmul(ad.concat(heads, axis=1), layer["wo"]), layer["bo"])
            x_mid = ad.add(msa, x)
            normed2 = ad.layernorm(x_mid, layer["ln2_g"], layer["ln2_b"], cfg.ln_eps)
            hidden = ad.relu(ad.add(ad.matmul(normed2, layer["mlp_w1"]), layer["mlp_b1"]))
            mlp_out = ad.add(ad.matmul(hidden, layer["mlp_w2"]), layer["mlp_b2"])
            x = ad.add(mlp_out, x_mid)
            if layer_offsets is not None:
                x = ad.add(x, ad.const(layer_offsets[l]))
            attention.append(head_attn)
            activations.append(x)
        y = (
            ad.layernorm(x, self.final_g, self.final_b, cfg.ln_eps)
            if cfg.final_ln
            else x
        )
        if cfg.pool == "cls":
            pooled = ad.reshape(ad.slice_(y, (slice(0, 1), slice(None))), (-1,))
        else:
            pooled = ad.mean(ad.gather(y, nonpad), axis=0)
        return EncoderOutput(y, pooled, attention, activations, nonpad)
