"""A small differentiable convolutional feature extractor.

Layers are 3x3 stride-1 zero-padded convolutions (cross-correlation), ReLU,
and 2x2 stride-2 pooling (average by default, max for imported networks that
use it). Forward and input-gradient passes are explicit; weights are fixed,
never trained. Weights live on disk as a directory of SFT1 tensors plus a
flat-text manifest (conv lines carry the in/out channel counts):

    format sft-weights-v1
    pooling avg
    center_mean 0.5 0.5 0.5
    layer conv1_1 conv 3 8 conv1_1.kernel.sft conv1_1.bias.sft
    layer relu1_1 relu
    layer pool1 pool
    ...

Kernels are stored (out_ch, in_ch, 3, 3); biases (out_ch,). center_mean is the
per-channel preprocessing mean subtracted from unit-range images before the
forward pass.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import BadWeights, UnknownLayer, UsageError
from .tensors import FeatureMap, ImageTensor, read_array, write_array


@dataclass(frozen=True)
class ConvSpec:
    name: str
    kernel: np.ndarray  # (out, in, 3, 3)
    bias: np.ndarray    # (out,)


@dataclass(frozen=True)
class ReluSpec:
    name: str


@dataclass(frozen=True)
class PoolSpec:
    name: str
    mode: str = "avg"


LayerSpec = ConvSpec | ReluSpec | PoolSpec


def _im2col3(x: np.ndarray) -> np.ndarray:
    # x (h, w, cin) -> columns (h, w, cin*9), feature order (cin, ky, kx)
    h, w, cin = x.shape
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(0, 1))
    return win.reshape(h, w, cin * 9)


class Extractor:
    """Fixed-weight feature pipeline with named layers."""

    def __init__(self, layers: list[LayerSpec], center_mean=(0.5, 0.5, 0.5), in_channels: int = 3):
        names = [l.name for l in layers]
        if len(set(names)) != len(names):
            raise BadWeights("duplicate layer names")
        checked: list[LayerSpec] = []
        ch = in_channels
        for l in layers:
            if isinstance(l, ConvSpec):
                k = np.asarray(l.kernel, dtype=np.float64)
                if k.ndim != 4 or k.shape[2:] != (3, 3):
                    raise BadWeights(f"{l.name}: kernel must be (out, in, 3, 3), got {k.shape}")
                if k.shape[1] != ch:
                    raise BadWeights(f"{l.name}: expects {k.shape[1]} input channels, pipeline carries {ch}")
                b = np.asarray(l.bias, dtype=np.float64)
                if b.shape != (k.shape[0],):
                    raise BadWeights(f"{l.name}: bias shape {b.shape} does not match {k.shape[0]} filters")
                l = replace(l, kernel=k, bias=b)
                ch = k.shape[0]
            elif isinstance(l, PoolSpec) and l.mode not in ("avg", "max"):
                raise BadWeights(f"{l.name}: unknown pool mode {l.mode!r}")
            checked.append(l)
        self.layers = checked
        self.center_mean = np.asarray(center_mean, dtype=np.float64).reshape(3)
        self.in_channels = in_channels

    @property
    def layer_names(self) -> list[str]:
        return [l.name for l in self.layers]

    def _check_taps(self, taps) -> set[str]:
        taps = set(taps)
        known = set(self.layer_names)
        for t in taps:
            if t not in known:
                raise UnknownLayer(f"layer {t!r} not in extractor (has: {', '.join(self.layer_names)})")
        return taps

    # --- raw float64 passes ----------------------------------------------------

    def forward_arrays(self, x: np.ndarray, taps) -> tuple[dict[str, np.ndarray], list]:
        """Run the pipeline on a centered (h, w, in) float64 array.

        Returns tapped activations plus the per-layer cache consumed by
        backward_arrays.
        """
        taps = self._check_taps(taps)
        x = np.asarray(x, dtype=np.float64)
        acts: dict[str, np.ndarray] = {}
        cache = []
        for l in self.layers:
            if isinstance(l, ConvSpec):
                cols = _im2col3(x)
                x = cols @ l.kernel.reshape(l.kernel.shape[0], -1).T + l.bias
                cache.append(("conv", l, None))
            elif isinstance(l, ReluSpec):
                mask = x > 0
                x = x * mask
                cache.append(("relu", l, mask))
            else:
                in_shape = x.shape
                h2, w2 = in_shape[0] // 2, in_shape[1] // 2
                blocks = x[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2, in_shape[2])
                if l.mode == "avg":
                    x = blocks.mean(axis=(1, 3))
                    cache.append(("pool_avg", l, in_shape))
                else:
                    flat = blocks.transpose(0, 2, 4, 1, 3).reshape(h2, w2, in_shape[2], 4)
                    idx = flat.argmax(axis=3)
                    x = np.take_along_axis(flat, idx[..., None], axis=3)[..., 0]
                    cache.append(("pool_max", l, (idx, in_shape)))
            if l.name in taps:
                acts[l.name] = x
        return acts, cache

    def backward_arrays(self, tap_grads: dict[str, np.ndarray], cache: list) -> np.ndarray:
        """Gradient of the summed tapped losses with respect to the input array."""
        self._check_taps(tap_grads.keys())
        grad: np.ndarray | None = None
        for kind, l, aux in reversed(cache):
            if l.name in tap_grads:
                g = np.asarray(tap_grads[l.name], dtype=np.float64)
                grad = g.copy() if grad is None else grad + g
            if grad is None:
                continue
            if kind == "conv":
                h, w, _ = grad.shape
                out_ch, cin = l.kernel.shape[:2]
                dcols = (grad.reshape(h * w, out_ch) @ l.kernel.reshape(out_ch, -1)).reshape(h, w, cin, 3, 3)
                dxp = np.zeros((h + 2, w + 2, cin))
                for ky in range(3):
                    for kx in range(3):
                        dxp[ky : ky + h, kx : kx + w, :] += dcols[:, :, :, ky, kx]
                grad = dxp[1 : h + 1, 1 : w + 1, :]
            elif kind == "relu":
                grad = grad * aux
            elif kind == "pool_avg":
                h2, w2, ch = grad.shape
                spread = np.broadcast_to(grad[:, None, :, None, :] / 4.0, (h2, 2, w2, 2, ch))
                grad = _embed_pool_grad(spread.reshape(2 * h2, 2 * w2, ch), aux)
            else:
                idx, in_shape = aux
                h2, w2, ch = grad.shape
                dflat = np.zeros((h2, w2, ch, 4))
                np.put_along_axis(dflat, idx[..., None], grad[..., None], axis=3)
                spread = dflat.reshape(h2, w2, ch, 2, 2).transpose(0, 3, 1, 4, 2)
                grad = _embed_pool_grad(spread.reshape(2 * h2, 2 * w2, ch), in_shape)
        if grad is None:
            raise UsageError("no tap gradients supplied")
        return grad

    # --- typed surface -----------------------------------------------------------

    def forward(self, img: ImageTensor, taps) -> dict[str, FeatureMap]:
        """Activations at the tapped layers for a centered image."""
        if img.range_tag != "centered":
            raise UsageError("extractor input must be a centered image; subtract center_mean first")
        acts, _ = self.forward_arrays(img.data.astype(np.float64), taps)
        return {name: FeatureMap(a.astype(np.float32), name) for name, a in acts.items()}

    def center(self, img: ImageTensor) -> ImageTensor:
        if img.range_tag != "unit":
            raise UsageError("center expects a unit-range image")
        return img.centered(self.center_mean)


def _embed_pool_grad(covered: np.ndarray, in_shape) -> np.ndarray:
    # pooling floor-crops the input; rows/cols past the crop get zero gradient
    if covered.shape == tuple(in_shape):
        return covered
    out = np.zeros(in_shape)
    out[: covered.shape[0], : covered.shape[1], :] = covered
    return out


# --- weights on disk ------------------------------------------------------------


def save_weights(ex: Extractor, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pool_modes = {l.mode for l in ex.layers if isinstance(l, PoolSpec)}
    pooling = pool_modes.pop() if len(pool_modes) == 1 else "avg"
    lines = ["format sft-weights-v1", f"pooling {pooling}",
             "center_mean " + " ".join(f"{v:.8g}" for v in ex.center_mean)]
    for l in ex.layers:
        if isinstance(l, ConvSpec):
            kf = f"{l.name}.kernel.sft"
            bf = f"{l.name}.bias.sft"
            write_array(l.kernel.astype(np.float32), out / kf)
            write_array(l.bias.astype(np.float32), out / bf)
            out_ch, in_ch = l.kernel.shape[:2]
            lines.append(f"layer {l.name} conv {in_ch} {out_ch} {kf} {bf}")
        elif isinstance(l, ReluSpec):
            lines.append(f"layer {l.name} relu")
        else:
            lines.append(f"layer {l.name} pool")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def load_weights(weights_dir, pooling_override: str | None = None) -> Extractor:
    wdir = Path(weights_dir)
    manifest = wdir / "manifest.txt"
    if not manifest.is_file():
        raise BadWeights(f"{wdir}: no manifest.txt")
    pooling = "avg"
    center_mean = (0.5, 0.5, 0.5)
    entries: list[tuple] = []
    for ln, raw in enumerate(manifest.read_text().splitlines(), 1):
        parts = raw.split()
        if not parts or raw.startswith("#"):
            continue
        key = parts[0]
        if key == "format":
            if parts[1] != "sft-weights-v1":
                raise BadWeights(f"unsupported weights format {parts[1]!r}")
        elif key == "pooling":
            pooling = parts[1]
        elif key == "center_mean":
            center_mean = tuple(float(v) for v in parts[1:4])
        elif key == "layer":
            entries.append((ln, parts[1:]))
        else:
            raise BadWeights(f"manifest line {ln}: unknown entry {key!r}")
    if pooling_override and pooling_override != pooling:
        warnings.warn(
            f"{wdir}: manifest declares {pooling} pooling, running with {pooling_override} instead"
        )
    layers: list[LayerSpec] = []
    for ln, parts in entries:
        name, kind = parts[0], parts[1]
        if kind == "conv":
            in_ch, out_ch = int(parts[2]), int(parts[3])
            kernel = read_array(wdir / parts[4])
            if kernel.shape[:2] != (out_ch, in_ch):
                raise BadWeights(
                    f"manifest line {ln}: {name} declares {in_ch}->{out_ch} but kernel is {kernel.shape}"
                )
            layers.append(ConvSpec(name, kernel, read_array(wdir / parts[5])))
        elif kind == "relu":
            layers.append(ReluSpec(name))
        elif kind == "pool":
            layers.append(PoolSpec(name, pooling_override or pooling))
        else:
            raise BadWeights(f"manifest line {ln}: unknown layer kind {kind!r}")
    if not layers:
        raise BadWeights(f"{wdir}: manifest lists no layers")
    return Extractor(layers, center_mean)


def builtin_weights_dir() -> Path:
    return Path(__file__).parent / "data" / "builtin_weights"


def builtin_extractor() -> Extractor:
    """The checked-in two-block test extractor (3 -> 8 -> 16 channels)."""
    return load_weights(builtin_weights_dir())
