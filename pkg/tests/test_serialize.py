"""File formats: bitwise round-trips and config validation."""

import json
import math

import numpy as np
import pytest

from widepaths.errors import ParseError
from widepaths.netcore import Architecture
from widepaths.paths import CompositePath, PathSegment
from widepaths.serialize import (load_config, load_dataset, load_params,
                                 load_path, save_dataset_csv, save_params,
                                 save_path)

from conftest import random_params


def test_params_roundtrip_bitwise(rng, tmp_path):
    arch = Architecture((3, 7, 2), ("sigmoid",))
    params = random_params(arch, rng)
    f = tmp_path / "params.json"
    save_params(params, str(f))
    back = load_params(str(f))
    for M, N in zip(params.matrices, back.matrices):
        np.testing.assert_array_equal(M, N)


def test_path_roundtrip_bitwise(rng, tmp_path):
    arch = Architecture((2, 4, 1), ("relu",))
    a, b = random_params(arch, rng), random_params(arch, rng)
    path = CompositePath((PathSegment(a, b, "constant"),
                          PathSegment(b, a, "convex", scale=0.25)))
    f = tmp_path / "path.json"
    save_path(path, str(f))
    back = load_path(str(f))
    assert len(back) == 2
    assert back.segments[1].scale == 0.25
    assert back.segments[1].kind == "convex"
    for seg, orig in zip(back.segments, path.segments):
        for M, N in zip(seg.start.matrices, orig.start.matrices):
            np.testing.assert_array_equal(M, N)


def test_dataset_roundtrip_bitwise(rng, tmp_path):
    X = rng.normal(size=(3, 5))
    Y = rng.normal(size=(2, 5))
    save_dataset_csv(X, str(tmp_path / "X.csv"))
    save_dataset_csv(Y, str(tmp_path / "Y.csv"))
    data = load_dataset(str(tmp_path / "X.csv"), str(tmp_path / "Y.csv"))
    np.testing.assert_array_equal(data.X, X)
    np.testing.assert_array_equal(data.Y, Y)


def _write_config(tmp_path, rng, **overrides):
    X = rng.normal(size=(2, 3))
    Y = rng.normal(size=(1, 3))
    save_dataset_csv(X, str(tmp_path / "X.csv"))
    save_dataset_csv(Y, str(tmp_path / "Y.csv"))
    obj = {
        "dims": [2, 8, 1],
        "activations": ["relu"],
        "loss": "squared",
        "constraint": {"a_r": 0.5, "b_r": 0.25, "q": "inf"},
        "data": {"x": "X.csv", "y": "Y.csv"},
        "seed": 7,
        "grid": 101,
    }
    obj.update(overrides)
    f = tmp_path / "config.json"
    f.write_text(json.dumps(obj))
    return str(f)


def test_config_loads(rng, tmp_path):
    cfg = load_config(_write_config(tmp_path, rng))
    assert cfg.arch.dims == (2, 8, 1)
    assert cfg.loss.value == "squared"
    assert math.isinf(cfg.constraint.q)
    assert cfg.constraint.a_r == 0.5
    assert cfg.seed == 7
    assert cfg.data.n_samples == 3


def test_config_rejects_unknown_keys(rng, tmp_path):
    f = _write_config(tmp_path, rng, extra_field=1)
    with pytest.raises(ParseError, match="unknown config keys"):
        load_config(f)


def test_config_rejects_missing_data_file(rng, tmp_path):
    f = _write_config(tmp_path, rng, data={"x": "nope.csv", "y": "Y.csv"})
    with pytest.raises(ParseError, match="does not exist"):
        load_config(f)


def test_config_rejects_shape_mismatch(rng, tmp_path):
    f = _write_config(tmp_path, rng, dims=[3, 8, 1])
    with pytest.raises(ParseError, match="do not match"):
        load_config(f)


def test_config_parametrized_activation(rng, tmp_path):
    f = _write_config(tmp_path, rng,
                      activations=[{"kind": "leaky_relu", "c": 0.1}])
    cfg = load_config(f)
    assert cfg.arch.activations[0].name == "leaky_relu"
    assert cfg.arch.activations[0].c == 0.1


def test_malformed_json_is_parse_error(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text("{not json")
    with pytest.raises(ParseError):
        load_params(str(f))


def test_params_shape_declaration_must_match(tmp_path):
    f = tmp_path / "p.json"
    f.write_text(json.dumps({"shapes": [[1, 2]], "matrices": [[[1.0]]]}))
    with pytest.raises(ParseError):
        load_params(str(f))


def test_ragged_csv_rejected(tmp_path):
    f = tmp_path / "X.csv"
    f.write_text("1.0,2.0\n3.0\n")
    g = tmp_path / "Y.csv"
    g.write_text("1.0,2.0\n")
    with pytest.raises(ParseError):
        load_dataset(str(f), str(g))
