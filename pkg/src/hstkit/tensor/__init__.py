"""Minimal tensor engine with reverse-mode autodiff."""

from .core import (
    GraphError,
    ShapeError,
    Tensor,
    absolute,
    add,
    backward,
    concat,
    crop,
    div,
    matmul,
    mean,
    mul,
    no_grad,
    pad,
    reshape,
    roll,
    sqrt,
    square,
    sub,
    take,
    transpose,
    tsum,
    zero_grad,
)
from .functional import (
    ConfigError,
    conv2d,
    cyclic_shift,
    gelu,
    layer_norm,
    linear,
    multi_head_attention,
    pixel_shuffle,
    pixel_unshuffle,
    relative_position_index,
    shifted_window_mask,
    softmax,
    window_partition,
    window_reverse,
)
