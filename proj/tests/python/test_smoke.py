# Copyright 2026 The kvedit Authors
# SPDX-License-Identifier: Apache-2.0
"""Smoke tests for the Python bindings."""

import json
import math

import numpy as np
import pytest

import kvedit

SHORT = {"sampler": {"steps": 6}}


def test_default_config_keys():
    c = kvedit.default_config()
    assert c["sampler"]["steps"] == 50
    assert c["model"]["num_layers"] == 8
    assert set(c) >= {"model", "sampler", "decoder", "edit", "probe", "seed", "workers"}


def test_scalar_formulas():
    assert kvedit.rescale_attention(0.05) == pytest.approx(math.log(1.5) / math.log(2.0))
    assert kvedit.rescale_attention(0.5) == 1.0
    assert kvedit.pearson([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]) == pytest.approx(0.8)
    assert kvedit.prominence(0.7, 0.2) == pytest.approx(0.2 * 0.3)
    with pytest.raises(kvedit.KveditError):
        kvedit.pearson([1, 1, 1], [1, 2, 3])


def test_delta_tokens():
    indices, words = kvedit.delta_tokens("a cat on a sofa", "a cat with a hat on a sofa")
    assert indices == [2, 3, 4]
    assert words == ["with", "a", "hat"]


def test_sample_shapes_and_determinism():
    p = kvedit.Pipeline(SHORT)
    assert p.steps == 6 and p.num_layers == 8
    video, latent = p.sample("a red ball", seed=1)
    assert video.shape == (5, 32, 32, 3)
    assert latent.shape == (5, 8, 8, 8)
    again, _ = p.sample("a red ball", seed=1)
    np.testing.assert_array_equal(video, again)


def test_tensor_round_trip(tmp_path):
    a = np.random.default_rng(0).standard_normal((2, 3, 4)).astype(np.float32)
    path = str(tmp_path / "a.tvlv")
    kvedit.write_tensor(path, a)
    np.testing.assert_array_equal(kvedit.read_tensor(path), a)


def test_object_addition():
    cfg = {"sampler": {"steps": 8}, "edit": {"t_i": 4, "t_e": 6}}
    r = kvedit.object_addition("a cat on a sofa", "a cat with a hat on a sofa", cfg)
    assert r["target_video"].shape == (5, 32, 32, 3)
    assert r["mask"].shape == (5, 8, 8)
    assert set(np.unique(r["mask"])) <= {0.0, 1.0}
    assert r["delta_words"] == ["with", "a", "hat"]


def test_run_command_generate(tmp_path):
    out = tmp_path / "gen"
    directory, manifest = kvedit.run_command("generate", {"prompt": "a red ball"}, SHORT, out)
    assert manifest["command"] == "generate"
    assert (out / "manifest.json").exists()
    on_disk = json.loads((out / "manifest.json").read_text())
    assert on_disk["id"] == manifest["id"]
    assert directory.endswith("gen")


def test_error_message_carries_class():
    with pytest.raises(kvedit.KveditError, match=r"^config-error: config: unknown key 'colour'"):
        kvedit.Pipeline({"colour": 1})
