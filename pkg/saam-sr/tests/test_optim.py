import numpy as np
import pytest

from saam_sr.errors import ConfigError, DimensionError
from saam_sr.optim import AdamHyper, AdamState, adam_step, gradients, zero_grads
from saam_sr.tensor import Tensor, parameter


def test_missing_gradient_leaves_parameter_alone() -> None:
    p = parameter(np.ones(3))
    adam_step({"p": p}, {"p": None}, AdamState(), AdamHyper())
    np.testing.assert_array_equal(p.data, 1.0)


def test_first_step_moves_by_learning_rate() -> None:
    p = parameter(np.zeros(4), dtype=np.float64)
    grad = np.array([3.0, -0.2, 1e-3, -50.0])
    state = AdamState()
    adam_step({"p": p}, {"p": grad}, state, AdamHyper(lr=0.01))
    np.testing.assert_allclose(p.data, -0.01 * np.sign(grad), rtol=1e-4)
    assert state.step == 1
    np.testing.assert_allclose(state.m["p"], 0.1 * grad)


def test_steps_are_deterministic() -> None:
    def run() -> np.ndarray:
        p = parameter(np.linspace(-1, 1, 5))
        state = AdamState()
        for i in range(5):
            adam_step({"p": p}, {"p": np.cos(p.data + i)}, state, AdamHyper())
        return p.data

    np.testing.assert_array_equal(run(), run())


def test_gradient_shape_must_match() -> None:
    with pytest.raises(DimensionError, match="'w'"):
        adam_step({"w": parameter(np.zeros(3))}, {"w": np.zeros(4)}, AdamState(), AdamHyper())


@pytest.mark.parametrize(
    ("kwargs", "field"),
    [({"lr": 0.0}, "lr"), ({"beta1": 1.0}, "beta1"), ({"beta2": -0.1}, "beta2"), ({"eps": 0.0}, "eps")],
)
def test_bad_hyperparameters(kwargs: dict[str, float], field: str) -> None:
    with pytest.raises(ConfigError) as err:
        AdamHyper(**kwargs)
    assert err.value.field == field


def test_gradients_and_zeroing() -> None:
    p = parameter(np.array([1.0, 2.0]))
    (p * p).sum().backward()
    grads = gradients({"p": p})
    np.testing.assert_allclose(grads["p"], [2.0, 4.0])  # type: ignore[arg-type]
    zero_grads({"p": p})
    assert p.grad is None or not p.grad.any()
    assert gradients({"q": Tensor(np.ones(2))})["q"] is None
