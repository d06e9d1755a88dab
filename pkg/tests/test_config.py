"""Tests for run-document validation and the builder settings."""
import math

import pytest
import voluptuous as vol

from pointsbp import (
    SAMPLER_SCHEMA,
    SbpBuilder,
    ensure_resolution,
    ensure_tau,
    parse_config,
    sampler_from_config,
)
from pointsbp.const import DEFAULT_DISSIPATION, STUDY_BUILD, TAU_AUTO, TAU_SMALL
from pointsbp.exceptions import ConfigError

MINIMAL = {"geometry": {"kind": "annulus", "resolution": 4}}


def test_defaults():
    config = parse_config(MINIMAL)
    assert config["p"] == 2
    assert config["tau"] == TAU_AUTO
    assert config["study"] == STUDY_BUILD
    assert config["seeds"] == [0]
    assert config["dissipation"] == DEFAULT_DISSIPATION
    assert config["final_time"] == pytest.approx(2 * math.pi)
    assert config["regimes"] == [TAU_SMALL]
    assert "min_cut_size" not in config
    assert config["geometry"]["jitter"] == 0.25


def test_scalars_become_lists():
    config = parse_config({**MINIMAL, "seeds": 3, "resolutions": 8, "degrees": 2})
    assert config["seeds"] == [3]
    assert config["resolutions"] == [8]
    assert config["degrees"] == [2]


@pytest.mark.parametrize(
    "change",
    [
        {"p": 0},
        {"p": 5},
        {"tau": "medium"},
        {"tau": -1.0},
        {"seeds": []},
        {"study": "everything"},
        {"threads": 0},
        {"min_cut_size": 0.0},
        {"dissipation": -0.1},
        {"geometry": {"kind": "torus", "resolution": 4}},
        {"geometry": {"kind": "box", "resolution": 1}},
        {"geometry": {"kind": "box", "resolution": [4, 4, 4]}},
        {"geometry": {"kind": "box", "resolution": 4, "jitter": 0.7}},
        {"extra": True},
    ],
)
def test_invalid_documents(change):
    with pytest.raises(ConfigError):
        parse_config({**MINIMAL, **change})


def test_resolution_forms():
    assert ensure_resolution("6") == 6
    assert ensure_resolution([4, 24]) == (4, 24)
    with pytest.raises(vol.Invalid):
        ensure_resolution([4])


def test_tau_forms():
    assert ensure_tau("tiny") == "tiny"
    assert ensure_tau("0.001") == pytest.approx(1e-3)
    with pytest.raises(vol.Invalid):
        ensure_tau(None)


def test_sampler_overrides():
    geometry = SAMPLER_SCHEMA({"kind": "box", "resolution": 6, "seed": 4})
    sampler = sampler_from_config(geometry)
    assert sampler.seed == 4 and sampler.resolution == 6
    sampler = sampler_from_config(geometry, seed=9, resolution=10)
    assert sampler.seed == 9 and sampler.resolution == 10


def test_builder_from_config():
    config = parse_config({**MINIMAL, "p": 3, "tau": 0.01, "min_cut_size": 0.05, "threads": 2})
    builder = SbpBuilder.from_config(config)
    assert builder.p == 3 and builder.tau == 0.01
    assert builder.min_cut_size == 0.05 and builder.threads == 2
    assert SbpBuilder.from_config(config, p=1, tau=TAU_SMALL).p == 1
