"""Dense float64 tensors with define-by-run reverse-mode differentiation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from reldetr.errors import DimensionError

ArrayLike = np.ndarray | float | int | Sequence[float] | Sequence[Sequence[float]]
BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


def _frozen_array(data: ArrayLike) -> np.ndarray:
    """Return a read-only float64 copy of the input."""
    array = np.array(data, dtype=np.float64, copy=True)
    array.flags.writeable = False
    return array


class Tensor:
    """Row-major float64 tensor that records how it was produced.

    Forward values are read-only once constructed. ``grad`` is filled by
    :meth:`backward` for every tensor in the graph that requires a gradient.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(
        self,
        data: ArrayLike,
        *,
        requires_grad: bool = False,
        _parents: tuple[Tensor, ...] = (),
        _backward: BackwardFn | None = None,
        op: str = "leaf",
    ) -> None:
        self.data = _frozen_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        """Return the value of a single-element tensor as a float."""
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Return a writable copy of the forward value."""
        return np.array(self.data, copy=True)

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """Add a gradient contribution, allocating the buffer on first use."""
        if grad.shape != self.data.shape:
            raise DimensionError(
                f"gradient shape {grad.shape} does not match tensor shape {self.shape}"
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Propagate gradients from this tensor to every ancestor requiring one."""
        if grad is None:
            if self.data.size != 1:
                raise DimensionError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topological_order(self)
        self.accumulate_grad(np.asarray(grad, dtype=np.float64))
        for node in order:
            if node._backward is None or node.grad is None:
                continue
            parent_grads = node._backward(node.grad)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                parent.accumulate_grad(parent_grad)
            if not node.is_leaf:
                # Interior buffers are only needed while propagating.
                node.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    # Operator sugar; the rules live in reldetr.numkit.ops.
    def __add__(self, other: Tensor | ArrayLike) -> Tensor:
        from reldetr.numkit import ops

        return ops.add(self, other)

    def __radd__(self, other: Tensor | ArrayLike) -> Tensor:
        from reldetr.numkit import ops

        return ops.add(other, self)

    def __sub__(self, other: Tensor | ArrayLike) -> Tensor:
        from reldetr.numkit import ops

        return ops.sub(self, other)

    def __rsub__(self, other: Tensor | ArrayLike) -> Tensor:
        from reldetr.numkit import ops

        return ops.sub(other, self)

    def __mul__(self, other: Tensor | ArrayLike) -> Tensor:
        from reldetr.numkit import ops

        return ops.mul(self, other)

    def __rmul__(self, other: Tensor | ArrayLike) -> Tensor:
        from reldetr.numkit import ops

        return ops.mul(other, self)

    def __truediv__(self, other: Tensor | ArrayLike) -> Tensor:
        from reldetr.numkit import ops

        return ops.div(self, other)

    def __rtruediv__(self, other: Tensor | ArrayLike) -> Tensor:
        from reldetr.numkit import ops

        return ops.div(other, self)

    def __neg__(self) -> Tensor:
        from reldetr.numkit import ops

        return ops.neg(self)

    def __matmul__(self, other: Tensor) -> Tensor:
        from reldetr.numkit import ops

        return ops.matmul(self, other)


def _topological_order(root: Tensor) -> list[Tensor]:
    """Return graph nodes with every node before its parents (iterative DFS)."""
    visited: set[int] = set()
    order: list[Tensor] = []
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited and parent.requires_grad:
                stack.append((parent, False))
    order.reverse()
    return order


def as_tensor(value: Tensor | ArrayLike) -> Tensor:
    """Wrap plain values as constant tensors; pass tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


@dataclass
class Parameter:
    """Named learnable tensor."""

    name: str
    value: Tensor

    @classmethod
    def create(cls, name: str, data: ArrayLike) -> Parameter:
        return cls(name=name, value=Tensor(data, requires_grad=True, op="parameter"))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def grad(self) -> np.ndarray:
        """Return the accumulated gradient (zeros when nothing reached it)."""
        if self.value.grad is None:
            return np.zeros_like(self.value.data)
        return self.value.grad

    def assign(self, data: ArrayLike) -> None:
        """Replace the value in place, keeping the parameter identity."""
        array = np.asarray(data, dtype=np.float64)
        if array.shape != self.value.shape:
            raise DimensionError(
                f"cannot assign shape {array.shape} to parameter {self.name} {self.shape}"
            )
        self.value = Tensor(array, requires_grad=True, op="parameter")


class ParameterSet:
    """Ordered collection of uniquely named parameters."""

    def __init__(self, parameters: Iterable[Parameter] = ()) -> None:
        self._params: dict[str, Parameter] = {}
        for parameter in parameters:
            self.register(parameter)

    def register(self, parameter: Parameter) -> Parameter:
        if parameter.name in self._params:
            raise ValueError(f"Duplicate parameter name: {parameter.name}")
        self._params[parameter.name] = parameter
        return parameter

    def add(self, name: str, data: ArrayLike) -> Parameter:
        return self.register(Parameter.create(name, data))

    def __getitem__(self, name: str) -> Parameter:
        try:
            return self._params[name]
        except KeyError as exc:
            raise KeyError(f"Unknown parameter: {name}") from exc

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def tensor(self, name: str) -> Tensor:
        return self[name].value

    def num_elements(self) -> int:
        return sum(parameter.value.size for parameter in self)

    def zero_grad(self) -> None:
        for parameter in self:
            parameter.value.zero_grad()

    def state(self) -> dict[str, np.ndarray]:
        """Return copies of all parameter values keyed by name."""
        return {parameter.name: parameter.value.numpy() for parameter in self}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = [name for name in self._params if name not in state]
        if missing:
            raise KeyError(f"Missing parameters in state: {', '.join(missing)}")
        for name, parameter in self._params.items():
            parameter.assign(state[name])

    def copy(self) -> ParameterSet:
        """Return an independent copy (no shared buffers)."""
        return ParameterSet(Parameter.create(p.name, p.value.data) for p in self)

    def subset(self, prefix: str) -> list[Parameter]:
        return [parameter for parameter in self if parameter.name.startswith(prefix)]
