#!/usr/bin/env python
"""End-to-end demo on synthetic images: decompose, control, transfer, sketch.

Writes everything under out/demo/. No external data needed; runs in well
under a minute with the built-in extractor.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from stylebasis.cli import main
from stylebasis.tensors import ImageTensor, save_image


def synthetic_pair(out_dir: Path, n: int = 48) -> tuple[Path, Path, Path]:
    yy, xx = np.mgrid[0:n, 0:n] / n
    content = np.stack(
        [
            0.55 + 0.35 * np.sin(2 * np.pi * xx),
            0.55 + 0.35 * np.cos(2 * np.pi * yy),
            0.5 + 0.3 * np.sin(2 * np.pi * (xx + yy)),
        ],
        axis=2,
    ).clip(0, 1)
    waves = 0.5 + 0.45 * np.sin(10 * np.pi * (xx + 0.35 * np.sin(2 * np.pi * yy)))
    style1 = np.stack([0.2 + 0.5 * waves, 0.3 + 0.4 * waves, 0.6 + 0.35 * waves], axis=2).clip(0, 1)
    blobs = 0.5 + 0.5 * np.sin(6 * np.pi * xx) * np.cos(6 * np.pi * yy)
    style2 = np.stack([0.7 + 0.25 * blobs, 0.45 * blobs + 0.2, 0.25 * blobs + 0.1], axis=2).clip(0, 1)
    paths = []
    for name, arr in (("content", content), ("style_waves", style1), ("style_blobs", style2)):
        p = out_dir / f"{name}.png"
        save_image(ImageTensor(arr.astype(np.float32)), p)
        paths.append(p)
    return tuple(paths)


def run(*argv: str) -> None:
    print("$ stylebasis " + " ".join(argv))
    code = main(list(argv))
    if code != 0:
        raise SystemExit(f"demo step failed with exit code {code}")


def main_demo() -> None:
    out = Path("out/demo")
    out.mkdir(parents=True, exist_ok=True)
    content, waves, blobs = synthetic_pair(out)
    common = ["--layer", "relu2_1", "--size", "48", "--iters", "120", "--seed", "7", "--init", "noise"]

    run("transfer", "--content", str(content), "--style", str(waves),
        "--out", str(out / "plain.png"), *common)
    run("transfer", "--content", str(content), "--style", str(waves),
        "--control", "fft: keep=dc", "--out", str(out / "color_only.png"), *common)
    run("transfer", "--content", str(content), "--style", str(waves),
        "--control", "fft: keep=rest scale=2.0", "--out", str(out / "stroke_x2.png"), *common)
    run("mix", "--content", str(content), "--stroke-from", str(waves), "--color-from", str(blobs),
        "--method", "fft", "--I", "1.0,1.5,2.0", "--out", str(out / "mix.png"), *common)
    run("mix", "--content", str(content), "--stroke-from", str(waves), "--color-from", str(blobs),
        "--interpolate", "0.5,0.5", "--out", str(out / "interp.png"), *common)
    run("sketch", "--content", str(content), "--style", str(waves),
        "--I", "1.5", "--binarize", "otsu", "--out", str(out / "sketch.png"), *common)
    print(f"\ndemo outputs in {out}/")


if __name__ == "__main__":
    main_demo()
