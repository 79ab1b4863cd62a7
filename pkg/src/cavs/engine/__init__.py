from .tensor import ConvSpec, GradPair, as_tensor, default_dtype, precision, set_default_dtype
from .functional import *
from .optim import sgd_step, adam_step, decay_penalty
from .gradcheck import gradcheck, gradcheck_errors, run_op_suite
