import numpy as np
import pytest

from hytl import autodiff as ad
from hytl.nn import (
    EncoderOutput,
    GruCell,
    Mlp,
    MlpConfig,
    SequenceTooLong,
    TransformerConfig,
    TransformerEncoder,
    sinusoidal_positions,
)
from hytl.ltl import Alphabet, TokenVocab, parse, tokenize
from oracles import assert_grads_close, finite_difference_grads

AB = Alphabet(["a", "b"])


def small_encoder(seed=0, **overrides):
    cfg = TransformerConfig(
        layers=overrides.pop("layers", 1),
        dim=overrides.pop("dim", 4),
        heads=overrides.pop("heads", 2),
        mlp_hidden=overrides.pop("mlp_hidden", 3),
        max_len=overrides.pop("max_len", 6),
        vocab_size=overrides.pop("vocab_size", 12),
        **overrides,
    )
    store = ad.ParamStore()
    enc = TransformerEncoder(store, cfg, np.random.default_rng(seed))
    return enc, store, cfg


class TestMlp:
    def test_identity_weights_pass_through(self):
        store = ad.ParamStore()
        mlp = Mlp(store, "m", 3, MlpConfig([3]), np.random.default_rng(0))
        store["m/w0"].data[:] = np.eye(3)
        store["m/b0"].data[:] = 0.0
        x = np.random.default_rng(1).normal(size=(4, 3))
        assert np.allclose(mlp(ad.const(x)).data, x)

    def test_zero_weights_yield_bias(self):
        store = ad.ParamStore()
        mlp = Mlp(store, "m", 3, MlpConfig([2]), np.random.default_rng(0))
        store["m/w0"].data[:] = 0.0
        store["m/b0"].data[:] = [1.5, -2.0]
        out = mlp(ad.const(np.ones((5, 3))))
        assert np.allclose(out.data, np.tile([1.5, -2.0], (5, 1)))

    def test_gradients_match_finite_differences(self):
        store = ad.ParamStore()
        mlp = Mlp(store, "m", 4, MlpConfig([5, 3], hidden_act="tanh"), np.random.default_rng(2))
        x = np.random.default_rng(3).normal(size=(2, 4))
        arrays = {name: p.data for name, p in store.items()}

        def f():
            return float(ad.mean(ad.square(mlp(ad.const(x)))).data)

        loss = ad.mean(ad.square(mlp(ad.const(x))))
        ad.backward(loss)
        ad_grads = store.grads()
        assert_grads_close(ad_grads, finite_difference_grads(f, arrays))

    def test_input_width_checked(self):
        store = ad.ParamStore()
        mlp = Mlp(store, "m", 4, MlpConfig([2]), np.random.default_rng(0))
        with pytest.raises(ad.ShapeMismatch):
            mlp(ad.const(np.zeros((1, 5))))


class TestGruCell:
    def _cell(self, seed=0):
        store = ad.ParamStore()
        cell = GruCell(store, "gru", 3, 5, np.random.default_rng(seed), delta_dim=3)
        return cell, store

    def test_delta_head_initialized_to_zero(self):
        cell, _ = self._cell()
        delta, _ = cell.step(ad.const(np.ones(3)), ad.const(np.ones(5)))
        assert np.array_equal(delta.data, np.zeros(3))

    def test_closed_update_gate_keeps_hidden_state(self):
        cell, store = self._cell()
        store["gru/bz"].data[:] = -40.0  # z ~ 0 -> h_next == h
        h = np.random.default_rng(4).normal(size=5)
        _, h_next = cell.step(ad.const(np.zeros(3)), ad.const(h))
        assert np.allclose(h_next.data, h, atol=1e-12)

    def test_delta_gradient_wrt_input_matches_finite_differences(self):
        cell, store = self._cell(seed=6)
        store["gru/wd"].data[:] = np.random.default_rng(7).normal(size=(5, 3)) * 0.3
        x0 = np.random.default_rng(8).normal(size=3)
        h0 = np.random.default_rng(9).normal(size=5)
        params = {"x": x0, "h": h0}
        holder = {"x": ad.Tensor(x0), "h": ad.Tensor(h0)}

        def build():
            delta, _ = cell.step(holder["x"], holder["h"])
            return ad.mean(ad.square(delta))

        loss = build()
        ad.backward(loss)
        grads = {"x": holder["x"].grad, "h": holder["h"].grad}

        def f():
            return float(build().data)

        assert_grads_close(grads, finite_difference_grads(f, params))

    def test_shape_mismatch(self):
        cell, _ = self._cell()
        with pytest.raises(ad.ShapeMismatch):
            cell.step(ad.const(np.zeros(4)), ad.const(np.zeros(5)))


def _manual_encode(store, cfg, ids):
    """Independent numpy re-implementation of the encoder block ordering."""
    p = {name: t.data for name, t in store.items()}

    def ln(x, g, b):
        mu = x.mean(-1, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(-1, keepdims=True)
        return (xc / np.sqrt(var + cfg.ln_eps)) * g + b

    def softmax(x):
        e = np.exp(x - x.max(-1, keepdims=True))
        return e / e.sum(-1, keepdims=True)

    m = len(ids)
    x = p["enc/embed"][ids] + sinusoidal_positions(cfg.max_len, cfg.dim)[:m]
    mask = np.zeros((m, m))
    mask[:, np.asarray(ids) == cfg.pad_id] = -1e30
    dh = cfg.dim // cfg.heads
    for l in range(cfg.layers):
        n = ln(x, p[f"enc/l{l}/ln1_g"], p[f"enc/l{l}/ln1_b"])
        q, k, v = n @ p[f"enc/l{l}/wq"], n @ p[f"enc/l{l}/wk"], n @ p[f"enc/l{l}/wv"]
        heads = []
        for h in range(cfg.heads):
            sl = slice(h * dh, (h + 1) * dh)
            scores = q[:, sl] @ k[:, sl].T / np.sqrt(dh) + mask
            heads.append(softmax(scores) @ v[:, sl])
        msa = np.concatenate(heads, axis=1) @ p[f"enc/l{l}/wo"] + p[f"enc/l{l}/bo"]
        x_mid = msa + x
        n2 = ln(x_mid, p[f"enc/l{l}/ln2_g"], p[f"enc/l{l}/ln2_b"])
        hidden = np.maximum(n2 @ p[f"enc/l{l}/mlp_w1"] + p[f"enc/l{l}/mlp_b1"], 0.0)
        x = hidden @ p[f"enc/l{l}/mlp_w2"] + p[f"enc/l{l}/mlp_b2"] + x_mid
    y = ln(x, p["enc/final_g"], p["enc/final_b"]) if cfg.final_ln else x
    pooled = y[np.asarray(ids) != cfg.pad_id].mean(axis=0)
    return y, pooled


class TestEncoder:
    def test_matches_independent_numpy_implementation(self):
        enc, store, cfg = small_encoder(seed=5, layers=2)
        ids = [1, 9, 5, 10, 0, 0]
        out = enc.encode(ids)
        y_ref, pooled_ref = _manual_encode(store, cfg, ids)
        assert np.allclose(out.tokens.data, y_ref, atol=1e-12)
        assert np.allclose(out.pooled.data, pooled_ref, atol=1e-12)

    def test_attention_rows_sum_to_one(self):
        enc, _, cfg = small_encoder(seed=1)
        out = enc.encode([1, 9, 5, 10, 0, 0])
        for layer in range(cfg.layers):
            stacked = out.attention_arrays(layer)
            assert np.all(np.abs(stacked.sum(axis=-1) - 1.0) <= 1e-9)

    def test_all_pad_after_cls_pools_to_cls_row(self):
        enc, _, _ = small_encoder(seed=2)
        out = enc.encode([1, 0, 0, 0, 0, 0])
        assert np.allclose(out.pooled.data, out.tokens.data[0], atol=1e-15)

    def test_pad_embedding_perturbation_cannot_leak_into_pooled(self):
        enc, store, _ = small_encoder(seed=3)
        ids = [1, 9, 10, 0, 0, 0]
        before = enc.encode(ids).pooled.data.copy()
        store["enc/embed"].data[0] += 123.456  # PAD embedding row
        after = enc.encode(ids).pooled.data
        assert np.max(np.abs(after - before)) < 1e-12

    def test_token_order_changes_pooled_output(self):
        vocab = TokenVocab.for_alphabet(AB, max_len=8)
        enc, store, cfg = small_encoder(seed=4, max_len=8, vocab_size=len(vocab))
        ab = tokenize(parse("F (a & F b)", AB), vocab)
        ba = tokenize(parse("F (b & F a)", AB), vocab)
        pooled_ab = enc.encode(ab).pooled.data
        pooled_ba = enc.encode(ba).pooled.data
        assert np.linalg.norm(pooled_ab - pooled_ba) > 1e-6

    def test_deterministic_for_fixed_weights(self):
        enc, _, _ = small_encoder(seed=6)
        ids = [1, 9, 5, 10, 11, 0]
        a = enc.encode(ids)
        b = enc.encode(ids)
        assert a.tokens.data.tobytes() == b.tokens.data.tobytes()
        assert a.pooled.data.tobytes() == b.pooled.data.tobytes()

    def test_sequence_too_long_rejected(self):
        enc, _, _ = small_encoder()
        with pytest.raises(SequenceTooLong):
            enc.encode([1] * 7)

    def test_gradients_match_finite_differences(self):
        enc, store, _ = small_encoder(seed=7)
        ids = [1, 9, 5, 10, 11, 0]
        arrays = {name: p.data for name, p in store.items()}

        def f():
            return float(ad.mean(ad.square(enc.encode(ids).pooled)).data)

        ad.backward(ad.mean(ad.square(enc.encode(ids).pooled)))
        assert_grads_close(store.grads(), finite_difference_grads(f, arrays), rtol=2e-4)
        store.zero_grads()

    def test_cls_pooling_switch(self):
        enc, _, _ = small_encoder(seed=8, pool="cls")
        out = enc.encode([1, 9, 10, 0, 0, 0])
        assert np.array_equal(out.pooled.data, out.tokens.data[0])


def test_sinusoidal_positions_formula():
    table = sinusoidal_positions(4, 6)
    assert table.shape == (4, 6)
    assert np.allclose(table[0, 0::2], 0.0)
    assert np.allclose(table[0, 1::2], 1.0)
    assert table[1, 0] == pytest.approx(np.sin(1.0))
    assert table[2, 1] == pytest.approx(np.cos(2.0))
    assert table[1, 2] == pytest.approx(np.sin(1.0 / 10000.0 ** (2 / 6)))
