"""Minimal dense-tensor kernel with reverse-mode differentiation."""

from reldetr.numkit.freeze import FrozenValues, detach
from reldetr.numkit.gradcheck import GradcheckReport, ParameterCheck, gradcheck
from reldetr.numkit.tensor import Parameter, ParameterSet, Tensor, as_tensor

__all__ = [
    "FrozenValues",
    "GradcheckReport",
    "Parameter",
    "ParameterCheck",
    "ParameterSet",
    "Tensor",
    "as_tensor",
    "detach",
    "gradcheck",
]
