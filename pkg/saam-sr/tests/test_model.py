import dataclasses

import numpy as np
import pytest

from saam_sr.errors import ConfigError, DimensionError
from saam_sr.model import (
    ABLATION_PRESETS,
    ModelConfig,
    build_model,
    forward,
    named_buffers,
    named_parameters,
    param_count,
    set_training,
)
from saam_sr.saam_block import ScalePair
from saam_sr.tensor import Tensor


def test_default_parameter_audit() -> None:
    count = param_count(build_model(ModelConfig()))
    assert count.breakdown == {
        "backbone": 19008,
        "saam_hourglass": 3634,
        "saam_expert_bank": 3200,
        "saam_pointwise": 544,
        "upsampler": 899,
        "simam": 0,
    }
    assert count.total == 27285
    assert count.format().splitlines()[-1].split() == ["total", "27,285"]


def test_presets_order_by_expert_storage() -> None:
    counts = {
        name: param_count(build_model(ModelConfig(**preset)))
        for name, preset in ABLATION_PRESETS.items()
    }
    bank = {name: c.breakdown["saam_expert_bank"] for name, c in counts.items()}
    assert bank["SA-4"] < bank["SA-16"] < bank["SA-64"]
    assert bank["SA-16"] < bank["SA-16-no-dense"]
    # two batch-norm slots per hourglass, gamma and beta per channel
    assert counts["BN-4"].total - counts["SA-4"].total == 2 * 2 * 2 * 8


def test_large_variant_is_bigger() -> None:
    tiny = param_count(build_model(ModelConfig())).total
    large = param_count(build_model(ModelConfig(variant="large"))).total
    assert large > tiny


def test_fresh_model_ignores_saam_blocks(small_cfg: ModelConfig, rng: np.random.Generator) -> None:
    model = build_model(small_cfg, np.float64)
    lr = Tensor(rng.uniform(size=(2, 3, 8, 8)), dtype=np.float64)
    for scale in (ScalePair(2, 2), ScalePair(1.3, 3.7)):
        with_saam = forward(model, lr, scale).data
        without = forward(model, lr, scale, bypass_saam=True).data
        np.testing.assert_array_equal(with_saam, without)


def test_seeded_build_is_deterministic(small_cfg: ModelConfig) -> None:
    a = dict(named_parameters(build_model(small_cfg)))
    b = dict(named_parameters(build_model(small_cfg)))
    assert a.keys() == b.keys()
    for name in a:
        np.testing.assert_array_equal(a[name].data, b[name].data)
    other = named_parameters(build_model(dataclasses.replace(small_cfg, seed=1)))
    assert not np.array_equal(other["head.kernel"].data, a["head.kernel"].data)


def test_anisotropic_output_size(small_cfg: ModelConfig, rng: np.random.Generator) -> None:
    model = build_model(small_cfg)
    out = forward(model, Tensor(rng.uniform(size=(1, 3, 8, 9)), dtype=np.float32), ScalePair(2, 3))
    assert out.shape == (1, 3, 16, 27)
    assert out.dtype == np.float32


def test_forward_rejects_non_rgb(small_cfg: ModelConfig) -> None:
    with pytest.raises(DimensionError):
        forward(build_model(small_cfg), Tensor(np.zeros((1, 1, 8, 8))), ScalePair(2, 2))


@pytest.mark.parametrize(
    ("overrides", "field"),
    [
        ({"channels": 2}, "channels"),
        ({"num_blocks": 0}, "num_blocks"),
        ({"insertion_period": 5}, "insertion_period"),
        ({"experts": 0}, "experts"),
        ({"norm_kind": "layernorm"}, "norm_kind"),
        ({"variant": "huge"}, "variant"),
        ({"guidance_channels": 3}, "guidance_channels"),
        ({"round_mode": "ceil"}, "round_mode"),
        ({"d_u": 0}, "d_u"),
        ({"simam_lambda": 0.0}, "simam_lambda"),
        ({"experts": 1}, "dense_layer"),
    ],
)
def test_invalid_config_names_the_field(overrides: dict[str, object], field: str) -> None:
    cfg = dataclasses.replace(ModelConfig(), **overrides)  # type: ignore[arg-type]
    with pytest.raises(ConfigError) as err:
        build_model(cfg)
    assert err.value.field == field


def test_from_dict_round_trip_and_unknown_key() -> None:
    cfg = ModelConfig(experts=4, norm_kind="batchnorm")
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError) as err:
        ModelConfig.from_dict({**cfg.to_dict(), "heads": 2})
    assert err.value.field == "heads"


def test_batchnorm_buffers_and_training_switch(rng: np.random.Generator) -> None:
    cfg = ModelConfig(channels=4, num_blocks=2, experts=4, d_u=8, norm_kind="batchnorm")
    model = build_model(cfg)
    buffers = named_buffers(model)
    assert set(buffers) == {
        "saam_blocks.0.hourglass.norm_down.running_mean",
        "saam_blocks.0.hourglass.norm_down.running_var",
        "saam_blocks.0.hourglass.norm_bottleneck.running_mean",
        "saam_blocks.0.hourglass.norm_bottleneck.running_var",
    }
    set_training(model, False)
    assert not model.saam_blocks[0].hourglass.norm_down.training  # type: ignore[union-attr]
    before = buffers["saam_blocks.0.hourglass.norm_down.running_mean"].data.copy()
    forward(model, Tensor(rng.uniform(size=(1, 3, 8, 8)), dtype=np.float32), ScalePair(2, 2))
    np.testing.assert_array_equal(
        buffers["saam_blocks.0.hourglass.norm_down.running_mean"].data, before
    )


def test_simam_model_has_no_buffers(small_cfg: ModelConfig) -> None:
    assert named_buffers(build_model(small_cfg)) == {}


@pytest.mark.parametrize("norm_kind", ["simam", "batchnorm"])
def test_batch_items_are_independent(
    small_cfg: ModelConfig, rng: np.random.Generator, norm_kind: str
) -> None:
    model = build_model(dataclasses.replace(small_cfg, norm_kind=norm_kind), np.float64)  # type: ignore[arg-type]
    for block in model.saam_blocks:
        assert block.pointwise is not None
        block.pointwise.kernel.data[...] = rng.normal(0.0, 0.1, block.pointwise.kernel.shape)
    set_training(model, False)
    lr = rng.uniform(size=(2, 3, 8, 8))
    scale = ScalePair(2.5, 1.5)
    both = forward(model, Tensor(lr, dtype=np.float64), scale).data
    one_by_one = np.concatenate(
        [forward(model, Tensor(lr[i : i + 1], dtype=np.float64), scale).data for i in range(2)]
    )
    np.testing.assert_allclose(both, one_by_one, rtol=0, atol=1e-6)


def test_doubling_experts_grows_only_the_bank() -> None:
    small = param_count(build_model(ModelConfig(experts=8))).breakdown
    large = param_count(build_model(ModelConfig(experts=16))).breakdown
    changed = {name for name in small if small[name] != large[name]}
    assert changed == {"saam_expert_bank"}
    assert large["saam_expert_bank"] > small["saam_expert_bank"]
