from pathlib import Path

import pytest

from saam_sr.config import (
    get_thread_count,
    load_config_file,
    parse_bool,
    parse_int,
    parse_scale,
    parse_scale_list,
)
from saam_sr.errors import ConfigError
from saam_sr.saam_block import ScalePair
from saam_sr.threads import NATIVE_THREAD_VARS, THREADS_ENV, cap_native_threads


def test_config_file(tmp_path: Path) -> None:
    path = tmp_path / "train.cfg"
    path.write_text("# comment\n\ndata_dir = /data/div2k\nsteps=10  # inline\nscales = 2, 3x4\n")
    assert load_config_file(path) == {
        "data_dir": "/data/div2k",
        "steps": "10",
        "scales": "2, 3x4",
    }


def test_duplicate_key(tmp_path: Path) -> None:
    path = tmp_path / "dup.cfg"
    path.write_text("steps=1\nsteps=2\n")
    with pytest.raises(ConfigError) as err:
        load_config_file(path)
    assert err.value.field == "steps"


@pytest.mark.parametrize("text", ["steps 10\n", " = 3\n"])
def test_malformed_lines(tmp_path: Path, text: str) -> None:
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError, match="line 1"):
        load_config_file(path)


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigError) as err:
        load_config_file(tmp_path / "nope.cfg")
    assert err.value.field == "config"


@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ("2", ScalePair(2, 2)),
        ("2.5", ScalePair(2.5, 2.5)),
        ("2x3", ScalePair(2, 3)),
        (" 1.5 X 4 ", ScalePair(1.5, 4)),
    ],
)
def test_parse_scale(text: str, expected: ScalePair) -> None:
    assert parse_scale(text) == expected


@pytest.mark.parametrize("text", ["", "x2", "2x", "two", "-2", "2x3x4"])
def test_parse_scale_rejects(text: str) -> None:
    with pytest.raises(ConfigError) as err:
        parse_scale(text)
    assert err.value.field == "scale"


def test_scale_list() -> None:
    assert parse_scale_list("2, 3,4x2") == [ScalePair(2, 2), ScalePair(3, 3), ScalePair(4, 2)]
    with pytest.raises(ConfigError):
        parse_scale_list(" , ")


def test_scalar_parsers() -> None:
    assert parse_bool("dense_layer", "Yes") is True
    assert parse_bool("dense_layer", "off") is False
    with pytest.raises(ConfigError, match="dense_layer"):
        parse_bool("dense_layer", "maybe")
    with pytest.raises(ConfigError, match="steps"):
        parse_int("steps", "1.5")


def test_thread_count(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv(THREADS_ENV, "3")
    assert get_thread_count() == 3
    monkeypatch.delenv(THREADS_ENV)
    assert get_thread_count() >= 1
    for bad in ("0", "many"):
        monkeypatch.setenv(THREADS_ENV, bad)
        with pytest.raises(ConfigError):
            get_thread_count()


def test_hash_inside_a_value_is_kept(tmp_path: Path) -> None:
    path = tmp_path / "train.cfg"
    path.write_text("data_dir = runs/#3/hr\ncheckpoint_path = out/a#b.ckpt # trailing note\n\t# indented comment\n")
    assert load_config_file(path) == {"data_dir": "runs/#3/hr", "checkpoint_path": "out/a#b.ckpt"}


def test_thread_env_caps_native_pools() -> None:
    env = {THREADS_ENV: "1", "OMP_NUM_THREADS": "4"}
    applied = cap_native_threads(env)
    assert "OMP_NUM_THREADS" not in applied
    assert env["OMP_NUM_THREADS"] == "4"
    assert all(env[var] == "1" for var in applied)
    assert set(applied) | {"OMP_NUM_THREADS"} == set(NATIVE_THREAD_VARS)


@pytest.mark.parametrize("raw", ["", "0", "many", "-2"])
def test_unusable_thread_env_leaves_pools_alone(raw: str) -> None:
    env = {THREADS_ENV: raw}
    assert cap_native_threads(env) == []
    assert env == {THREADS_ENV: raw}
