"""Multi-head attention and the pre-norm encoder block."""

import numpy as np
import pytest

from serlab.errors import ConfigError, ShapeError
from serlab.nn import (AttentionConfig, MultiHeadSelfAttention, SequencePool,
                       Tensor, TransformerEncoderLayer,
                       finite_difference_check, multi_head_self_attention)


def _reference_mhsa(x, layer):
    """Unvectorized scaled-dot-product attention, one head at a time."""
    cfg = layer.cfg
    n, d = x.shape
    hd = cfg.head_dim
    q = x @ layer.wq.weight.data + layer.wq.bias.data
    k = x @ layer.wk.weight.data
    v = x @ layer.wv.weight.data + layer.wv.bias.data
    ctx = np.zeros((n, d))
    for h in range(cfg.num_heads):
        sl = slice(h * hd, (h + 1) * hd)
        qh, kh, vh = q[:, sl], k[:, sl], v[:, sl]
        for i in range(n):
            scores = np.array([qh[i] @ kh[j] / np.sqrt(hd) for j in range(n)])
            scores -= scores.max()
            w = np.exp(scores)
            w /= w.sum()
            ctx[i, sl] = sum(w[j] * vh[j] for j in range(n))
    return ctx @ layer.wo.weight.data + layer.wo.bias.data


def _identity_projections(layer):
    d = layer.cfg.model_dim
    for lin in (layer.wq, layer.wk, layer.wv, layer.wo):
        lin.weight.data[:] = np.eye(d)
        if lin.bias is not None:
            lin.bias.data[:] = 0.0


class TestMultiHeadSelfAttention:
    def test_single_token_weight_is_one(self):
        cfg = AttentionConfig(model_dim=8, num_heads=2)
        layer = MultiHeadSelfAttention(cfg, np.random.default_rng(0))
        layer(Tensor(np.random.default_rng(1).normal(size=(1, 1, 8))))
        assert layer.last_attn.shape == (1, 2, 1, 1)
        assert np.allclose(layer.last_attn, 1.0, atol=0)

    def test_identical_tokens_identity_projections(self):
        cfg = AttentionConfig(model_dim=4, num_heads=1)
        layer = MultiHeadSelfAttention(cfg, np.random.default_rng(2))
        _identity_projections(layer)
        tok = np.array([0.3, -1.0, 0.2, 0.8])
        out = layer(Tensor(np.stack([tok, tok])[None])).data[0]
        assert np.allclose(out[0], out[1], atol=1e-12)

    def test_matches_loop_reference(self):
        rng = np.random.default_rng(3)
        cfg = AttentionConfig(model_dim=6, num_heads=2)
        layer = MultiHeadSelfAttention(cfg, rng)
        x = rng.normal(size=(3, 6))
        got = layer(Tensor(x[None])).data[0]
        want = _reference_mhsa(x, layer)
        assert np.allclose(got, want, atol=1e-10)

    def test_rows_stochastic_every_head(self):
        rng = np.random.default_rng(4)
        cfg = AttentionConfig(model_dim=8, num_heads=4)
        layer = MultiHeadSelfAttention(cfg, rng)
        layer(Tensor(rng.normal(size=(2, 5, 8))))
        sums = layer.last_attn.sum(axis=-1)
        assert np.allclose(sums, 1.0, atol=1e-9)

    def test_dim_mismatch(self):
        cfg = AttentionConfig(model_dim=8, num_heads=2)
        layer = MultiHeadSelfAttention(cfg, np.random.default_rng(5))
        with pytest.raises(ShapeError):
            layer(Tensor(np.zeros((1, 3, 6))))

    def test_output_shape_preserved(self):
        cfg = AttentionConfig(model_dim=8, num_heads=2)
        layer = MultiHeadSelfAttention(cfg, np.random.default_rng(6))
        out = layer(Tensor(np.random.default_rng(7).normal(size=(2, 5, 8))))
        assert out.shape == (2, 5, 8)

    def test_functional_wrapper_checks_config(self):
        cfg = AttentionConfig(model_dim=8, num_heads=2)
        layer = MultiHeadSelfAttention(cfg, np.random.default_rng(8))
        with pytest.raises(ConfigError):
            multi_head_self_attention(Tensor(np.zeros((1, 2, 8))),
                                      AttentionConfig(8, 4), layer)

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            AttentionConfig(model_dim=10, num_heads=3)


class TestEncoderLayer:
    def _layer(self, dim=8, heads=2, seed=0):
        return TransformerEncoderLayer(AttentionConfig(dim, heads),
                                       np.random.default_rng(seed))

    def test_zero_weights_residual_identity(self):
        layer = self._layer()
        for name, p in layer.parameters().items():
            if "ln" not in name:
                p.data[:] = 0.0
        x = np.random.default_rng(1).normal(size=(2, 4, 8))
        out = layer(Tensor(x)).data
        assert np.allclose(out, x, atol=0)

    def test_shape_preservation(self):
        layer = self._layer(dim=64, heads=4, seed=2)
        out = layer(Tensor(np.random.default_rng(3).normal(size=(1, 5, 64))))
        assert out.shape == (1, 5, 64)

    def test_permutation_equivariance(self):
        layer = self._layer(dim=8, heads=2, seed=4)
        rng = np.random.default_rng(5)
        x = rng.normal(size=(1, 6, 8))
        perm = rng.permutation(6)
        out = layer(Tensor(x)).data[0]
        out_perm = layer(Tensor(x[:, perm])).data[0]
        assert np.allclose(out[perm], out_perm, atol=1e-9)

    def test_full_gradient_check(self):
        layer = self._layer(dim=6, heads=2, seed=6)
        rng = np.random.default_rng(7)
        x = Tensor(rng.normal(size=(1, 3, 6)))
        m = rng.normal(size=(1, 3, 6))

        def loss():
            return (layer(x) * Tensor(m)).sum()

        report = finite_difference_check(loss, layer.parameters(), h=1e-5,
                                         tol=1e-4)
        assert report.passed, str(report)


class TestSequencePool:
    def test_weights_sum_to_one(self):
        pool = SequencePool(8, np.random.default_rng(0))
        out = pool(Tensor(np.random.default_rng(1).normal(size=(3, 5, 8))))
        assert out.shape == (3, 8)
        assert np.allclose(pool.last_weights.sum(axis=1), 1.0, atol=1e-9)

    def test_uniform_scores_average_tokens(self):
        pool = SequencePool(4, np.random.default_rng(2))
        pool.proj.weight.data[:] = 0.0
        x = np.random.default_rng(3).normal(size=(1, 5, 4))
        out = pool(Tensor(x)).data
        assert np.allclose(out, x.mean(axis=1), atol=1e-12)

    def test_gradient(self):
        pool = SequencePool(4, np.random.default_rng(4))
        rng = np.random.default_rng(5)
        x = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
        m = rng.normal(size=(2, 4))

        def loss():
            return (pool(x) * Tensor(m)).sum()

        params = dict(pool.parameters(), x=x)
        report = finite_difference_check(loss, params)
        assert report.passed, str(report)
