"""VGG-19 activation and weight export into SFT1 tensor directories.

Preprocessing is fixed and fully recorded in every manifest so the consumer
never guesses: RGB channel order, pixel values scaled to [0, 1], bilinear
resize to the requested square size, then per-channel mean subtraction
(0.485, 0.456, 0.406). No standard-deviation division. Activations are
saved channel-last (h, w, c) float32; conv kernels as (out, in, 3, 3) with
separate (out,) biases. VGG-19 pools with max, and the weights manifest says
so, so a consumer defaulting to average pooling can match it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

MEAN_RGB = (0.485, 0.456, 0.406)

# torchvision vgg19().features indices by conventional layer name
_CFG = [2, 2, 4, 4, 4]  # convs per block
LAYER_INDEX: dict[str, int] = {}
_i = 0
for _b, _n in enumerate(_CFG, start=1):
    for _c in range(1, _n + 1):
        LAYER_INDEX[f"conv{_b}_{_c}"] = _i
        LAYER_INDEX[f"relu{_b}_{_c}"] = _i + 1
        _i += 2
    LAYER_INDEX[f"pool{_b}"] = _i
    _i += 1


class ModelUnavailable(RuntimeError):
    pass


class UnknownLayer(ValueError):
    pass


def layer_names() -> list[str]:
    return sorted(LAYER_INDEX, key=LAYER_INDEX.get)


def load_vgg19(random_seed: int | None = None) -> tuple[torch.nn.Module, str]:
    """The pretrained feature stack, or a seeded random-init one for dev/test.

    Returns (features module, source tag). Raises ModelUnavailable when
    pretrained weights cannot be loaded and no seed was given.
    """
    from torchvision.models import VGG19_Weights, vgg19

    if random_seed is None:
        try:
            model = vgg19(weights=VGG19_Weights.IMAGENET1K_V1)
            tag = "vgg19-imagenet"
        except Exception as e:
            raise ModelUnavailable(
                f"pretrained VGG-19 weights not available locally ({e}); "
                "pass a random seed for a dev/test network"
            ) from e
    else:
        torch.manual_seed(random_seed)
        model = vgg19(weights=None)
        tag = f"vgg19-random-{random_seed}"
    features = model.features.eval()
    for p in features.parameters():
        p.requires_grad_(False)
    return features, tag


def preprocess(image_path, size: int) -> np.ndarray:
    """Image file -> centered (h, w, 3) float32 array, as recorded in manifests."""
    with Image.open(image_path) as im:
        rgb = im.convert("RGB")
        if rgb.size != (size, size):
            rgb = rgb.resize((size, size), Image.BILINEAR)
        arr = np.asarray(rgb, dtype=np.float32) / 255.0
    return arr - np.asarray(MEAN_RGB, dtype=np.float32)[None, None, :]


def _check_layers(layers) -> list[str]:
    names = list(layers)
    for name in names:
        if name not in LAYER_INDEX:
            raise UnknownLayer(f"unknown VGG-19 layer {name!r}")
    return names


def export_features(
    image_path,
    layers,
    out_dir,
    size: int = 224,
    random_seed: int | None = None,
) -> Path:
    """Save the requested layer activations plus a manifest; returns the manifest path."""
    names = _check_layers(layers)
    features, tag = load_vgg19(random_seed)
    centered = preprocess(image_path, size)
    x = torch.from_numpy(centered).permute(2, 0, 1).unsqueeze(0)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .sft import write_sft

    wanted = {LAYER_INDEX[n]: n for n in names}
    lines = [
        f"source_model {tag}",
        f"preprocess_resize {size} {size} bilinear",
        "preprocess_scale 1/255",
        "preprocess_mean " + " ".join(f"{v:g}" for v in MEAN_RGB),
        "preprocess_channel_order rgb",
        "pooling max",
    ]
    last = max(wanted)
    with torch.no_grad():
        for idx, module in enumerate(features):
            x = module(x)
            if idx in wanted:
                act = x[0].permute(1, 2, 0).numpy().astype(np.float32)
                fname = f"{wanted[idx]}.sft"
                write_sft(act, out / fname)
                h, w, c = act.shape
                lines.append(f"tensor {wanted[idx]} {fname} {h} {w} {c}")
            if idx == last:
                break
    (out / "export.txt").write_text("\n".join(lines) + "\n")
    return out / "export.txt"


def export_weights(cut_layer: str, out_dir, random_seed: int | None = None) -> Path:
    """Save conv kernels/biases up to the cut layer in the consumer's weights layout."""
    _check_layers([cut_layer])
    features, tag = load_vgg19(random_seed)
    cut = LAYER_INDEX[cut_layer]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .sft import write_sft

    lines = [
        "format sft-weights-v1",
        "pooling max",
        "center_mean " + " ".join(f"{v:g}" for v in MEAN_RGB),
        f"# source_model {tag}",
    ]
    block, conv_in_block = 1, 0
    for idx, module in enumerate(features):
        if idx > cut:
            break
        if isinstance(module, torch.nn.Conv2d):
            conv_in_block += 1
            name = f"conv{block}_{conv_in_block}"
            kernel = module.weight.detach().numpy().astype(np.float32)  # (out, in, 3, 3)
            bias = module.bias.detach().numpy().astype(np.float32)
            write_sft(kernel, out / f"{name}.kernel.sft")
            write_sft(bias, out / f"{name}.bias.sft")
            out_ch, in_ch = kernel.shape[:2]
            lines.append(f"layer {name} conv {in_ch} {out_ch} {name}.kernel.sft {name}.bias.sft")
        elif isinstance(module, torch.nn.ReLU):
            lines.append(f"layer relu{block}_{conv_in_block} relu")
        elif isinstance(module, torch.nn.MaxPool2d):
            lines.append(f"layer pool{block} pool")
            block += 1
            conv_in_block = 0
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")
    return out / "manifest.txt"


def read_manifest(path) -> dict:
    """Parse an export.txt manifest into preprocessing fields and tensor entries."""
    info: dict = {"tensors": {}}
    for raw in Path(path).read_text().splitlines():
        parts = raw.split()
        if not parts:
            continue
        key = parts[0]
        if key == "tensor":
            info["tensors"][parts[1]] = {"file": parts[2], "shape": tuple(int(v) for v in parts[3:6])}
        elif key == "preprocess_mean":
            info["mean"] = tuple(float(v) for v in parts[1:4])
        elif key == "preprocess_resize":
            info["resize"] = (int(parts[1]), int(parts[2]))
        else:
            info[key] = " ".join(parts[1:])
    return info
