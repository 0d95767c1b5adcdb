# SPDX-License-Identifier: Apache-2.0
"""Koopman mode decomposition of training trajectories and Koopman-based pruning."""

from ._core import (
    KoopmanDecomposition,
    KoopmanTriplet,
    KpruneError,
    __version__,
    decaying_modes,
    decompose,
    extrapolate,
    fixed_point,
    global_mask,
    kgp_scores,
    mask_overlap,
    pseudoinverse,
    reduced_svd,
    run_experiment,
)

__all__ = [
    "KoopmanDecomposition",
    "KoopmanTriplet",
    "KpruneError",
    "decaying_modes",
    "decompose",
    "extrapolate",
    "fixed_point",
    "global_mask",
    "kgp_scores",
    "mask_overlap",
    "pseudoinverse",
    "reduced_svd",
    "run_experiment",
]
