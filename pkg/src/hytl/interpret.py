"""Per-token impact scores for encoded formulas: gradient x activation terms,
attention-weighted and summed over layers, plus the next-subgoal probe that
provides the class outputs being attributed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .ltl import Assignment, Formula, FormulaTable, TokenVocab, progress_step, tokenize
from .nn import TransformerEncoder


class InvalidClass(Exception):
    pass


class UntrainedModel(Exception):
    pass


class ProbeHead:
    """Linear map from the pooled task embedding to proposition classes.

    Bias defaults off so a zero-weight probe is exactly the zero function
    (keeps the completeness identity available).
    """

    def __init__(self, store: ParamStore, dim: int, n_classes: int,
                 rng: np.random.Generator, bias: bool = False, name: str = "probe"):
        self.n_classes = n_classes
        self.weight = store.add(f"{name}/w", rng.normal(scale=0.1, size=(dim, n_classes)))
        self.bias = store.add(f"{name}/b", np.zeros(n_classes)) if bias else None

    def logits(self, pooled: Tensor) -> Tensor:
        """pooled: (D,) vector or (B, D) matrix -> (B, n_classes) logits."""
        mat = ad.reshape(pooled, (1, -1)) if pooled.data.ndim == 1 else pooled
        out = ad.matmul(mat, self.weight)
        if self.bias is not None:
            out = ad.add(out, self.bias)
        return out


def probe_loss(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy over rows of (B, C) logits."""
    targets = np.asarray(targets, dtype=np.int64)
    n_classes = logits.data.shape[1]
    if np.any(targets < 0) or np.any(targets >= n_classes):
        raise InvalidClass(f"targets {targets} out of range for {n_classes} classes")
    ls = ad.log_softmax(logits, axis=-1)
    onehot = np.zeros_like(ls.data)
    onehot[np.arange(len(targets)), targets] = 1.0
    return ad.neg(ad.mean(ad.sum_(ad.mul(ls, ad.const(onehot)), axis=1)))


def next_subgoal_id(table: FormulaTable, fid: int, n_props: int) -> int | None:
    """The lowest-id proposition whose truth alone strictly progresses fid."""
    if fid in (FormulaTable.TRUE_ID, FormulaTable.FALSE_ID):
        return None
    for pid in range(n_props):
        sigma = Assignment(1 << pid, n_props)
        if progress_step(table, sigma, fid).next_id != fid:
            return pid
    return None


@dataclass
class ImpactScores:
    tokens: list[str]          # non-PAD token names, in sequence order
    raw: np.ndarray            # (n_tokens,) signed impact per token
    per_layer: np.ndarray      # (layers, n_tokens)
    class_name: str

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.raw)

    @property
    def normalized(self) -> np.ndarray:
        peak = np.max(np.abs(self.raw))
        return self.raw / peak if peak > 0 else np.zeros_like(self.raw)


def attcat_scores(
    encoder: TransformerEncoder,
    probe: ProbeHead,
    phi: Formula,
    class_id: int,
    vocab: TokenVocab,
    unit_attention: bool = False,
    final_layer_only: bool = False,
    attention_mode: str = "received",
) -> ImpactScores:
    """Gradient x activation per token, attention-weighted, summed over layers.

    `unit_attention` + `final_layer_only` is the configuration in which the
    scores of a bias-free linear class output sum exactly to that output.
    """
    if class_id >= probe.n_classes:
        raise InvalidClass(f"class {class_id} out of range")
    if not np.any(encoder.embed.data):
        raise UntrainedModel("encoder weights are uninitialized")
    ids = tokenize(phi, vocab)
    out = encoder.encode(ids)
    logits = probe.logits(out.pooled)
    y_c = ad.slice_(logits, (0, class_id))
    nodes = ad.backward(y_c)

    nonpad = out.nonpad
    n_layers = len(out.activations)
    layers = range(n_layers - 1, n_layers) if final_layer_only else range(n_layers)
    per_layer = np.zeros((n_layers, len(nonpad)))
    for l in layers:
        act = out.activations[l]
        grad = act.grad if act.grad is not None else np.zeros_like(act.data)
        dotted = (grad * act.data).sum(axis=1)  # <dy/dx_i, x_i> per position
        if unit_attention:
            weights = np.ones(len(ids))
        else:
            stacked = out.attention_arrays(l)  # (H, M, M)
            if attention_mode == "received":
                weights = stacked[:, nonpad, :].mean(axis=(0, 1))
            elif attention_mode == "sent":
                # row-mean over non-PAD keys; uniform by construction, which
                # reduces the weighting to a constant (attention off)
                weights = stacked[:, :, nonpad].mean(axis=(0, 2))
            else:
                raise ValueError(f"unknown attention mode {attention_mode!r}")
        per_layer[l] = dotted[nonpad] * weights[nonpad]
    ad.clear_graph(nodes)
    tokens = [vocab.name_of(ids[i]) for i in nonpad]
    raw = per_layer.sum(axis=0)
    return ImpactScores(tokens, raw, per_layer, vocab.name_of(vocab.prop_id(class_id)))


def emit_heatmap(scores: ImpactScores, path) -> None:
    """CSV: token, layer_0..layer_{L-1}, total, magnitude, normalized_total."""
    n_layers = scores.per_layer.shape[0]
    header = (
        ["token"]
        + [f"layer_{l}" for l in range(n_layers)]
        + ["total", "magnitude", "normalized_total"]
    )
    normalized = scores.normalized
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, token in enumerate(scores.tokens):
            writer.writerow(
                [token]
                + [repr(float(scores.per_layer[l, i])) for l in range(n_layers)]
                + [
                    repr(float(scores.raw[i])),
                    repr(float(scores.magnitude[i])),
                    repr(float(normalized[i])),
                ]
            )


def parse_heatmap(path) -> ImpactScores:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_layers = sum(1 for col in header if col.startswith("layer_"))
        tokens, raws, per_layer = [], [], []
        for row in reader:
            tokens.append(row[0])
            per_layer.append([float(v) for v in row[1 : 1 + n_layers]])
            raws.append(float(row[1 + n_layers]))
    return ImpactScores(
        tokens, np.array(raws), np.array(per_layer).T, class_name=""
    )


def train_probe(
    encoder: TransformerEncoder,
    encoder_store: ParamStore,
    probe: ProbeHead,
    probe_store: ParamStore,
    examples: list[tuple[list[int], int]],
    steps: int,
    rng: np.random.Generator,
    lr: float = 1e-3,
    update_encoder: bool = True,
    batch_size: int = 16,
) -> float:
    """Supervised next-subgoal training; returns the final batch loss."""
    last = float("nan")
    for _ in range(steps):
        idx = rng.integers(0, len(examples), size=min(batch_size, len(examples)))
        pooled_rows = [
            ad.reshape(encoder.encode(examples[i][0]).pooled, (1, -1)) for i in idx
        ]
        targets = np.array([examples[i][1] for i in idx])
        loss = probe_loss(probe.logits(ad.concat(pooled_rows, axis=0)), targets)
        nodes = ad.backward(loss)
        ad.adam_step(probe_store, lr=lr)
        if update_encoder:
            ad.adam_step(encoder_store, lr=lr)
        else:
            encoder_store.zero_grads()
        ad.clear_graph(nodes)
        last = float(loss.data)
    return last


def probe_accuracy(encoder, probe, examples) -> float:
    hits = 0
    for ids, target in examples:
        logits = probe.logits(encoder.encode(ids).pooled)
        hits += int(np.argmax(logits.data[0]) == target)
    return hits / len(examples)
