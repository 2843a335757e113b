from .tensor import (Tensor, no_grad, add, mul, matmul, reshape, transpose,
                     concat, getitem, tsum, tmean, texp, tlog, relu, gelu,
                     softmax, layer_norm, conv2d, max_pool2d,
                     cross_entropy_loss)
from .layers import (AttentionConfig, Module, Linear, LayerNorm, Conv2d,
                     MaxPool2d, MultiHeadSelfAttention, Mlp,
                     TransformerEncoderLayer, SequencePool, glorot_uniform,
                     multi_head_self_attention)
from .optim import Adam, AdamState, adam_step
from .gradcheck import GradCheckReport, finite_difference_check
from .checkpoint import save_checkpoint, load_checkpoint, config_hash

__all__ = [
    "Tensor", "no_grad", "add", "mul", "matmul", "reshape", "transpose",
    "concat", "getitem", "tsum", "tmean", "texp", "tlog", "relu", "gelu",
    "softmax", "layer_norm", "conv2d", "max_pool2d", "cross_entropy_loss",
    "AttentionConfig", "Module", "Linear", "LayerNorm", "Conv2d", "MaxPool2d",
    "MultiHeadSelfAttention", "Mlp", "TransformerEncoderLayer", "SequencePool",
    "glorot_uniform", "multi_head_self_attention",
    "Adam", "AdamState", "adam_step",
    "GradCheckReport", "finite_difference_check",
    "save_checkpoint", "load_checkpoint", "config_hash",
]
