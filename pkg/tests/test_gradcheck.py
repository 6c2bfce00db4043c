from __future__ import annotations

import numpy as np
import pytest

from reldetr.errors import GradcheckError
from reldetr.numkit import ParameterSet, Tensor, detach, gradcheck, ops
from reldetr.numkit.gradcheck import relative_error
from reldetr.verify import GRADCHECK_TOL, OP_BUILDERS, op_gradcheck


def test_relative_error_uses_floor() -> None:
    assert relative_error(0.0, 0.0, min_scale=1e-4) == 0.0
    assert relative_error(1e-9, 0.0, min_scale=1e-4) == pytest.approx(1e-5)
    assert relative_error(2.0, 1.0, min_scale=1e-4) == pytest.approx(0.5)


def test_gradcheck_passes_for_smooth_function() -> None:
    params = ParameterSet()
    params.add("w", np.array([[0.3, -0.2], [0.1, 0.5]]))
    x = Tensor(np.array([[1.0, 2.0]]))

    def loss() -> Tensor:
        return ops.sum(ops.sigmoid(ops.matmul(x, params.tensor("w"))))

    report = gradcheck(loss, params)
    assert report.passed
    assert report.checks[0].checked_entries == 4
    assert report.as_dict()["parameters"]["w"]["checked_entries"] == 4


def test_gradcheck_detects_wrong_gradient() -> None:
    params = ParameterSet()
    params.add("w", np.array([0.7]))

    def loss() -> Tensor:
        w = params.tensor("w")
        # Plain constant copy: the analytic gradient misses a factor of two.
        return ops.sum(ops.mul(w, Tensor(w.data)))

    report = gradcheck(loss, params)
    assert not report.passed
    assert report.failures()[0].name == "w"


def test_gradcheck_holds_detached_values_fixed() -> None:
    params = ParameterSet()
    params.add("w", np.array([0.7, -0.4]))

    def loss() -> Tensor:
        w = params.tensor("w")
        return ops.sum(ops.mul(w, detach(w)))

    report = gradcheck(loss, params)
    assert report.passed


def test_gradcheck_samples_entries() -> None:
    params = ParameterSet()
    params.add("w", np.linspace(-1.0, 1.0, 20))

    def loss() -> Tensor:
        return ops.sum(ops.sin(params.tensor("w")))

    report = gradcheck(loss, params, max_entries=5, seed=1)
    assert report.checks[0].checked_entries == 5
    assert report.passed


def test_gradcheck_rejects_non_finite_loss() -> None:
    params = ParameterSet()
    params.add("w", np.array([1.0]))

    def loss() -> Tensor:
        return ops.sum(ops.mul(params.tensor("w"), np.inf))

    with pytest.raises(GradcheckError, match="non-finite"):
        gradcheck(loss, params)


def test_gradcheck_rejects_bad_step() -> None:
    with pytest.raises(ValueError, match="step"):
        gradcheck(lambda: Tensor(0.0), [], step=0.0)


@pytest.mark.parametrize("name", sorted(OP_BUILDERS))
def test_every_op_matches_finite_differences(name: str) -> None:
    for seed in range(3):
        assert op_gradcheck(name, seed) < GRADCHECK_TOL
