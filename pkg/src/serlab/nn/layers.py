"""Layers the compact convolutional transformer is assembled from.

Every layer owns its parameters as ``Tensor`` objects and exposes them
through ``parameters(prefix)`` as a flat ``{path: Tensor}`` dict, which is
what the optimizer, the checkpoint archive and the gradient checker all
operate on. Initialization is uniform in +-sqrt(6/(fan_in+fan_out)) from
the generator handed in, so runs are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ShapeError
from . import tensor as T
from .tensor import Tensor


@dataclass(frozen=True)
class AttentionConfig:
    model_dim: int
    num_heads: int

    def __post_init__(self):
        if self.model_dim <= 0 or self.num_heads <= 0:
            raise ConfigError("model_dim and num_heads must be positive")
        if self.model_dim % self.num_heads:
            raise ConfigError(
                f"model_dim {self.model_dim} not divisible by "
                f"num_heads {self.num_heads}")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int,
                   fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """Minimal parameter container; subclasses register fields in _params
    and child modules in _children."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._children: dict[str, "Module"] = {}

    def parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out = {}
        for name, p in self._params.items():
            out[f"{prefix}{name}"] = p
        for name, child in self._children.items():
            out.update(child.parameters(f"{prefix}{name}."))
        return out

    def zero_grad(self):
        for p in self.parameters().values():
            p.zero_grad()

    def _add_param(self, name: str, data: np.ndarray) -> Tensor:
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def _add_child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 bias: bool = True):
        super().__init__()
        self.in_dim, self.out_dim = in_dim, out_dim
        self.weight = self._add_param(
            "weight", glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim))
        self.bias = self._add_param("bias", np.zeros(out_dim)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"Linear expected last dim {self.in_dim}, "
                             f"got {x.shape}")
        y = T.matmul(x, self.weight)
        return y if self.bias is None else T.add(y, self.bias)

    __call__ = forward


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.dim, self.eps = dim, eps
        self.gamma = self._add_param("gamma", np.ones(dim))
        self.beta = self._add_param("beta", np.zeros(dim))

    def forward(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gamma, self.beta, self.eps)

    __call__ = forward


class Conv2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int,
                 rng: np.random.Generator, stride: int = 1, padding: int = 0):
        super().__init__()
        self.stride, self.padding = stride, padding
        fan_in = in_ch * kernel * kernel
        fan_out = out_ch * kernel * kernel
        self.weight = self._add_param(
            "weight",
            glorot_uniform(rng, (out_ch, in_ch, kernel, kernel),
                           fan_in, fan_out))
        self.bias = self._add_param("bias", np.zeros(out_ch))

    def forward(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.weight, self.bias,
                        stride=self.stride, padding=self.padding)

    __call__ = forward


class MaxPool2d(Module):
    def __init__(self, kernel: int = 3, stride: int = 2, padding: int = 1):
        super().__init__()
        self.kernel, self.stride, self.padding = kernel, stride, padding

    def forward(self, x: Tensor) -> Tensor:
        return T.max_pool2d(x, self.kernel, self.stride, self.padding)

    __call__ = forward


class MultiHeadSelfAttention(Module):
    """Scaled dot-product self-attention with learned Q/K/V/output maps.

    After a forward pass ``last_attn`` holds the [batch, heads, n, n]
    attention weights (detached), for diagnostics and tests.
    """

    def __init__(self, cfg: AttentionConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        d = cfg.model_dim
        self.wq = self._add_child("q", Linear(d, d, rng))
        # a key bias shifts every score of a query by the same amount and
        # cancels in the softmax; it would be a dead parameter
        self.wk = self._add_child("k", Linear(d, d, rng, bias=False))
        self.wv = self._add_child("v", Linear(d, d, rng))
        self.wo = self._add_child("out", Linear(d, d, rng))
        self.last_attn: np.ndarray | None = None

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[-1] != self.cfg.model_dim:
            raise ShapeError(f"attention expected [batch, n, "
                             f"{self.cfg.model_dim}], got {x.shape}")
        batch, n, d = x.shape
        heads, hd = self.cfg.num_heads, self.cfg.head_dim

        def split(t: Tensor) -> Tensor:
            return T.transpose(T.reshape(t, (batch, n, heads, hd)),
                               (0, 2, 1, 3))

        q, k, v = split(self.wq(x)), split(self.wk(x)), split(self.wv(x))
        scores = T.mul(T.matmul(q, T.transpose(k, (0, 1, 3, 2))),
                       Tensor(1.0 / np.sqrt(hd)))
        attn = T.softmax(scores, axis=-1)
        self.last_attn = attn.data.copy()
        ctx = T.matmul(attn, v)                            # [B, H, n, hd]
        ctx = T.reshape(T.transpose(ctx, (0, 2, 1, 3)), (batch, n, d))
        return self.wo(ctx)

    __call__ = forward


class Mlp(Module):
    """linear -> GELU -> linear with a configurable expansion ratio."""

    def __init__(self, dim: int, ratio: int, rng: np.random.Generator):
        super().__init__()
        hidden = dim * ratio
        self.fc1 = self._add_child("fc1", Linear(dim, hidden, rng))
        self.fc2 = self._add_child("fc2", Linear(hidden, dim, rng))

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(T.gelu(self.fc1(x)))

    __call__ = forward


class TransformerEncoderLayer(Module):
    """Pre-norm residual block: x + MHSA(LN(x)), then + MLP(LN(.))."""

    def __init__(self, cfg: AttentionConfig, rng: np.random.Generator,
                 mlp_ratio: int = 2):
        super().__init__()
        self.ln1 = self._add_child("ln1", LayerNorm(cfg.model_dim))
        self.attn = self._add_child("attn",
                                    MultiHeadSelfAttention(cfg, rng))
        self.ln2 = self._add_child("ln2", LayerNorm(cfg.model_dim))
        self.mlp = self._add_child("mlp", Mlp(cfg.model_dim, mlp_ratio, rng))

    def forward(self, x: Tensor) -> Tensor:
        x = T.add(x, self.attn(self.ln1(x)))
        return T.add(x, self.mlp(self.ln2(x)))

    __call__ = forward


class SequencePool(Module):
    """Attention-weighted token average: softmax of a learned scalar score.

    ``last_weights`` keeps the [batch, n] pooling weights of the most
    recent forward pass.
    """

    def __init__(self, dim: int, rng: np.random.Generator):
        super().__init__()
        self.proj = self._add_child("proj", Linear(dim, 1, rng))
        self.last_weights: np.ndarray | None = None

    def forward(self, x: Tensor) -> Tensor:
        batch, n, d = x.shape
        scores = T.transpose(self.proj(x), (0, 2, 1))      # [B, 1, n]
        weights = T.softmax(scores, axis=-1)
        self.last_weights = weights.data.reshape(batch, n).copy()
        pooled = T.matmul(weights, x)                      # [B, 1, d]
        return T.reshape(pooled, (batch, d))

    __call__ = forward


def multi_head_self_attention(x: Tensor, cfg: AttentionConfig,
                              params: MultiHeadSelfAttention) -> Tensor:
    """Functional veneer over MultiHeadSelfAttention for one-off calls."""
    if params.cfg != cfg:
        raise ConfigError("attention layer was built with a different config")
    return params(x)
