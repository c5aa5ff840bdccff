#!/usr/bin/env python
"""Regenerate the checked-in test extractor weights.

Two conv+relu blocks with average pooling between, channels 3 -> 8 -> 16.
Kernels are rows of a seeded orthonormal basis scaled for roughly
unit-variance activations; biases are small positive so zero input still
activates. Deterministic: rerunning recreates identical files.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from stylebasis.network import ConvSpec, Extractor, PoolSpec, ReluSpec, save_weights


def orthogonal_kernel(rng: np.random.Generator, out_ch: int, in_ch: int, gain: float) -> np.ndarray:
    flat = rng.standard_normal((in_ch * 9, in_ch * 9))
    q, _ = np.linalg.qr(flat)
    return (gain * q[:out_ch]).reshape(out_ch, in_ch, 3, 3).astype(np.float32)


def main() -> None:
    rng = np.random.default_rng(20240710)
    layers = [
        ConvSpec("conv1_1", orthogonal_kernel(rng, 8, 3, 1.6), np.full(8, 0.05, dtype=np.float32)),
        ReluSpec("relu1_1"),
        PoolSpec("pool1", "avg"),
        ConvSpec("conv2_1", orthogonal_kernel(rng, 16, 8, 1.6), np.full(16, 0.05, dtype=np.float32)),
        ReluSpec("relu2_1"),
    ]
    ex = Extractor(layers, center_mean=(0.5, 0.5, 0.5))
    out = Path(__file__).resolve().parent.parent / "src" / "stylebasis" / "data" / "builtin_weights"
    save_weights(ex, out)
    print(f"wrote builtin weights to {out}")


if __name__ == "__main__":
    main()
