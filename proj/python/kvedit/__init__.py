# Copyright 2026 The kvedit Authors
# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the kvedit core.

Configs are plain dicts with the same keys as the CLI's config file; missing
keys take their defaults.
"""

import json

from . import _core
from ._core import (
    KveditError,
    Pipeline as _Pipeline,
    clip_img,
    delta_tokens,
    normalized_similarity,
    overall_score,
    pearson,
    prominence,
    psnr_region,
    read_tensor,
    rescale_attention,
    write_tensor,
)

__all__ = [
    "KveditError",
    "Pipeline",
    "clip_img",
    "default_config",
    "delta_tokens",
    "non_rigid_edit",
    "normalized_similarity",
    "object_addition",
    "overall_score",
    "pearson",
    "prominence",
    "psnr_region",
    "read_tensor",
    "rescale_attention",
    "run_command",
    "vitality_sweep",
    "write_tensor",
]


def _dump(config):
    return json.dumps(config or {})


def default_config():
    return json.loads(_core.default_config())


def Pipeline(config=None):
    return _Pipeline(_dump(config))


def object_addition(src, trg, config=None):
    return _core.object_addition(_dump(config), src, trg)


def non_rigid_edit(src, trg, config=None):
    return _core.non_rigid_edit(_dump(config), src, trg)


def vitality_sweep(config=None):
    return json.loads(_core.vitality_sweep(_dump(config)))


def run_command(command, inputs=None, config=None, out=""):
    """Runs a harness command; returns (directory, manifest dict)."""
    directory, manifest = _core.run_command(command, _dump(config), json.dumps(inputs or {}), str(out))
    return directory, json.loads(manifest)
