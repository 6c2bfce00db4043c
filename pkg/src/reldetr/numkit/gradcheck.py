"""Central finite-difference gradient checker."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from reldetr.errors import GradcheckError
from reldetr.numkit.freeze import FrozenValues
from reldetr.numkit.tensor import Parameter, ParameterSet, Tensor

LOGGER = logging.getLogger("reldetr.numkit.gradcheck")


@dataclass(frozen=True)
class ParameterCheck:
    """Worst analytic vs numeric disagreement for one parameter."""

    name: str
    max_rel_error: float
    worst_index: tuple[int, ...]
    analytic: float
    numeric: float
    checked_entries: int


@dataclass(frozen=True)
class GradcheckReport:
    """Per-parameter results of a gradient check."""

    checks: tuple[ParameterCheck, ...]
    step: float
    tol: float

    @property
    def max_rel_error(self) -> float:
        return max((check.max_rel_error for check in self.checks), default=0.0)

    @property
    def passed(self) -> bool:
        return all(check.max_rel_error < self.tol for check in self.checks)

    def failures(self) -> list[ParameterCheck]:
        return [check for check in self.checks if check.max_rel_error >= self.tol]

    def as_dict(self) -> dict[str, object]:
        return {
            "passed": self.passed,
            "step": self.step,
            "tol": self.tol,
            "max_rel_error": self.max_rel_error,
            "parameters": {
                check.name: {
                    "max_rel_error": check.max_rel_error,
                    "worst_index": list(check.worst_index),
                    "checked_entries": check.checked_entries,
                }
                for check in self.checks
            },
        }


def relative_error(analytic: float, numeric: float, *, min_scale: float) -> float:
    """Return ``|a - n| / max(|a|, |n|, min_scale)``."""
    scale = max(abs(analytic), abs(numeric), min_scale)
    return abs(analytic - numeric) / scale


def _evaluate(f: Callable[[], Tensor], location: str) -> float:
    value = f().item()
    if not np.isfinite(value):
        raise GradcheckError("non-finite loss", location=location)
    return value


def _entries(
    parameter: Parameter,
    max_entries: int | None,
    rng: np.random.Generator,
) -> list[tuple[int, ...]]:
    indices = list(np.ndindex(*parameter.shape))
    if max_entries is None or len(indices) <= max_entries:
        return indices
    chosen = rng.choice(len(indices), size=max_entries, replace=False)
    return [indices[i] for i in sorted(chosen)]


def gradcheck(
    f: Callable[[], Tensor],
    params: ParameterSet | Iterable[Parameter],
    *,
    step: float = 1e-5,
    tol: float = 1e-4,
    min_scale: float = 1e-4,
    max_entries: int | None = None,
    seed: int = 0,
) -> GradcheckReport:
    """Compare backward-pass gradients with central differences.

    ``f`` must rebuild the scalar loss from the current parameter values on
    every call. Values cut with :func:`reldetr.numkit.freeze.detach` during the
    base evaluation are held fixed while perturbing. ``max_entries`` limits the
    number of perturbed coordinates per parameter (sampled with ``seed``).
    """
    if step <= 0:
        raise ValueError("gradcheck step must be > 0")
    parameters = list(params)
    tape = FrozenValues()
    for parameter in parameters:
        parameter.value.zero_grad()
    with tape.recording():
        loss = f()
    if not np.isfinite(loss.item()):
        raise GradcheckError("non-finite loss", location="base point")
    loss.backward()
    analytic = {parameter.name: parameter.grad.copy() for parameter in parameters}

    rng = np.random.default_rng(seed)
    checks: list[ParameterCheck] = []
    for parameter in parameters:
        worst = ParameterCheck(parameter.name, 0.0, (), 0.0, 0.0, 0)
        entries = _entries(parameter, max_entries, rng)
        base = parameter.value.numpy()
        for index in entries:
            location = f"{parameter.name}{list(index)}"
            shifted = base.copy()
            shifted[index] = base[index] + step
            parameter.assign(shifted)
            with tape.replaying():
                upper = _evaluate(f, location)
            shifted[index] = base[index] - step
            parameter.assign(shifted)
            with tape.replaying():
                lower = _evaluate(f, location)
            parameter.assign(base)
            numeric = (upper - lower) / (2.0 * step)
            grad_value = float(analytic[parameter.name][index])
            error = relative_error(grad_value, numeric, min_scale=min_scale)
            if error >= worst.max_rel_error:
                worst = ParameterCheck(
                    parameter.name, error, tuple(int(i) for i in index), grad_value, numeric, 0
                )
        checks.append(
            ParameterCheck(
                worst.name,
                worst.max_rel_error,
                worst.worst_index,
                worst.analytic,
                worst.numeric,
                len(entries),
            )
        )
        LOGGER.debug(
            "gradcheck %s: max rel error %.3e over %s entries",
            parameter.name,
            worst.max_rel_error,
            len(entries),
        )
    return GradcheckReport(checks=tuple(checks), step=step, tol=tol)
