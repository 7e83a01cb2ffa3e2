"""Dense tensors with reverse-mode differentiation, sized for this project.

Forward ops cover 1-d/2-d convolution and transposed convolution, batch
normalization, the usual activations, linear layers, single-head attention
and average pooling; ``backward`` fills gradients from a scalar loss and
``adam_step`` applies the update rule.
"""

from .core import (
    NonFiniteError,
    Tensor,
    add,
    as_tensor,
    backward,
    broadcast_to,
    clip,
    concat,
    constant,
    div,
    exp,
    frobenius_norm,
    linear,
    log,
    matmul,
    mul,
    pow_scalar,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    set_check_finite,
    sigmoid,
    softmax,
    sqrt,
    sub,
    take,
    transpose,
)
from .ops import (
    ShapeError,
    attention,
    avg_pool1d,
    batch_norm,
    conv1d,
    conv2d,
    conv_transpose1d,
    conv_transpose2d,
    global_avg_pool,
)
from .store import (
    Param,
    ParamStore,
    adam_step,
    kaiming_uniform,
    load_checkpoint,
    save_checkpoint,
)
