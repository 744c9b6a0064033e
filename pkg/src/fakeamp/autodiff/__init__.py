from .tensor import (
    Tensor,
    no_grad,
    sigmoid,
    softplus,
    softmax,
    mish,
    tanh,
    exp,
    log,
)
from .functional import (
    conv2d,
    depthwise_conv2d,
    maxpool2d,
    nearest_upsample,
    global_avg_pool,
    batchnorm2d,
    l1_loss,
    bce_loss,
)
from .params import ParamStore, he_normal, normal
from .gradcheck import grad_check
from .optim import OptimizerState, RAdamLookahead, optimizer_step, cosine_lr
from .checkpoint import CheckpointError, save_checkpoint, load_checkpoint, load_into

__all__ = [
    "Tensor", "no_grad", "sigmoid", "softplus", "softmax", "mish", "tanh", "exp", "log",
    "conv2d", "depthwise_conv2d", "maxpool2d", "nearest_upsample", "global_avg_pool",
    "batchnorm2d", "l1_loss", "bce_loss",
    "ParamStore", "he_normal", "normal", "grad_check",
    "OptimizerState", "RAdamLookahead", "optimizer_step", "cosine_lr",
    "CheckpointError", "save_checkpoint", "load_checkpoint", "load_into",
]
