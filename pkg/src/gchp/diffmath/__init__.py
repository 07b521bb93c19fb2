"""Dense tensors, reverse-mode gradients, Adam and special functions."""

from gchp.diffmath.optim import (
    AdamConfig,
    AdamState,
    adam_step,
    check_gradients,
    finite_difference_gradients,
    gradients,
    relative_error,
    sgd_step,
)
from gchp.diffmath.special import (
    chi2_cdf,
    chi2_quantile,
    digamma,
    log_gamma,
    log_normal_cdf,
    normal_cdf,
    reg_upper_gamma,
)
from gchp.diffmath.tensor import (
    GradientTape,
    Tensor,
    absolute,
    add,
    concat_cols,
    div,
    exp,
    flatten_rows,
    lgamma,
    log,
    log_softmax,
    matmul,
    mean_pool_rows,
    mul,
    neg,
    pick,
    relu,
    reshape,
    softplus,
    square,
    sub,
    total,
    value,
)
