"""Dense tensor type, differentiable primitives, and the gradient checker."""

from . import ops
from .gradcheck import grad_check
from .params import ParamStore
from .tensor import SINGLE, WIDE, Parameter, Tensor, as_tensor4, constant

__all__ = [
    "ops",
    "grad_check",
    "ParamStore",
    "Parameter",
    "Tensor",
    "constant",
    "as_tensor4",
    "SINGLE",
    "WIDE",
]
