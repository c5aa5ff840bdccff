#!/usr/bin/env python
"""Style-atlas demo: embed and cluster three synthetic style families.

Builds label-structured feature tensors, runs the atlas command, and prints
the clustering verdict. Outputs land in out/atlas/.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from stylebasis.cli import main
from stylebasis.tensors import FeatureMap, write_tensor


def make_styles(style_dir: Path, labels_csv: Path, seed: int = 0) -> None:
    import shutil

    rng = np.random.default_rng(seed)
    if style_dir.exists():
        shutil.rmtree(style_dir)
    style_dir.mkdir(parents=True)
    # group sizes stay at the neighbor count so the k-NN graph connects
    base = {"chinese": 1.0, "pen": 1.4, "oil": 10.0}
    freq = {"chinese": 1, "pen": 2, "oil": 3}
    counts = {"chinese": 4, "pen": 4, "oil": 2}
    _, xx = np.mgrid[0:8, 0:8]
    rows = ["style_id,label"]
    for label, n in counts.items():
        for i in range(n):
            arr = np.zeros((8, 8, 6))
            for ch in range(6):
                mean = base[label] + 0.1 * ch + 0.05 * rng.standard_normal()
                arr[:, :, ch] = mean + 0.3 * np.sin(2 * np.pi * freq[label] * xx / 8 + ch)
                arr[:, :, ch] += 0.02 * rng.standard_normal((8, 8))
            sid = f"{label}{i}"
            write_tensor(FeatureMap(arr.astype(np.float32)), style_dir / f"{sid}.sft")
            rows.append(f"{sid},{label}")
    labels_csv.write_text("\n".join(rows) + "\n")


def main_demo() -> None:
    out = Path("out/atlas")
    out.mkdir(parents=True, exist_ok=True)
    make_styles(out / "styles", out / "labels.csv")
    code = main([
        "atlas", "--styles", str(out / "styles"), "--labels", str(out / "labels.csv"),
        "--out", str(out / "result"), "--k", "3", "--k-neighbors", "4", "--seed", "1",
    ])
    if code != 0:
        raise SystemExit(f"atlas failed with exit code {code}")
    print(f"see {out / 'result' / 'atlas.csv'} and the SVG scatter next to it")


if __name__ == "__main__":
    main_demo()
