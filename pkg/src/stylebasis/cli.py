"""Command-line surface wiring the pipeline into reproducible runs.

Commands: decompose, recompose, transfer, mix, atlas, sketch. Every run
resolves its parameters from defaults, then an optional flat key=value config
file (--config), then explicit flags, and writes the resolved config next to
its outputs so the run can be replayed bit for bit. All randomness derives
from one 64-bit --seed through numpy's SeedSequence with a fixed purpose
index per consumer (0 decomposition, 1 optimizer init, 2 clustering,
3 channel search).

Exit codes: 0 success, 1 usage, 2 data/format, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import atlas as atlas_mod
from .control import ControlParams, Mix
from .errors import StyleBasisError, UsageError
from .latent import IcaRep, PcaRep, ica_decompose, ica_project_back, pca_decompose, pca_project_back
from .network import builtin_weights_dir, load_weights
from .pipeline import (
    parse_control_spec,
    run_interpolate_transfer,
    run_mix_transfer,
    run_transfer,
)
from .spectral import SpectrumRep, dct_forward, dct_inverse, fft_forward, fft_inverse
from .tensors import load_image, read_array, read_tensor, save_image, write_array
from .transfer import LossConfig, OptOptions, binarize

SEED_PURPOSES = {"decompose": 0, "optimizer": 1, "clustering": 2, "channel_search": 3}


def derive_seed(master: int, purpose: str) -> int:
    """Split one master seed into per-purpose child seeds, reproducibly."""
    idx = SEED_PURPOSES[purpose]
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(idx,))
    return int(ss.generate_state(1, np.uint64)[0] & 0x7FFFFFFFFFFFFFFF)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2; usage errors are exit 1
        raise UsageError(f"{message}\n{self.format_usage()}")


# --- flat key=value run configs -------------------------------------------------


def read_config(path) -> dict[str, str]:
    conf = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{ln}: expected key=value, got {raw!r}")
        k, _, v = line.partition("=")
        conf[k.strip()] = v.strip()
    return conf


def write_config(path, values: dict) -> None:
    lines = [f"{k}={values[k]}" for k in sorted(values) if values[k] is not None]
    Path(path).write_text("\n".join(lines) + "\n")


def _resolve(args, schema: dict[str, tuple]) -> dict:
    """defaults < config file < explicit flags, with typed parsing."""
    conf = read_config(args.config) if getattr(args, "config", None) else {}
    out = {}
    for key, (typ, default) in schema.items():
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            out[key] = flag_val
        elif key in conf:
            raw = conf[key]
            if typ is bool:
                out[key] = raw.lower() in ("1", "true", "yes")
            else:
                out[key] = typ(raw)
        else:
            out[key] = default
    return out


def _parse_size(text: str) -> tuple[int, int]:
    try:
        if "x" in text:
            h, w = text.lower().split("x")
            return int(h), int(w)
        n = int(text)
        return n, n
    except ValueError as e:
        raise UsageError(f"cannot parse size {text!r} (want N or HxW)") from e


def _load_extractor(weights: str | None, pooling: str | None = None):
    wdir = Path(weights) if weights else builtin_weights_dir()
    return load_weights(wdir, pooling_override=pooling)


def _resolved_loss_config(r, ex) -> LossConfig:
    style_layers = tuple(s.strip() for s in r["layer"].split(",") if s.strip())
    if not style_layers:
        raise UsageError("--layer names no layers")
    cfg = LossConfig(
        alpha=r["alpha"],
        beta=r["beta"],
        content_layer=r["content_layer"] or style_layers[0],
        style_layers=style_layers,
    )
    cfg.validate_against(ex)
    return cfg


def _opt_options(r) -> OptOptions:
    return OptOptions(
        iters=r["iters"],
        step=r["step"],
        seed=derive_seed(r["seed"], "optimizer"),
        init=r["init"],
    )


def _write_loss_csv(path, history) -> None:
    lines = ["step,total,content,style"]
    for i, (total, closs, sloss) in enumerate(history):
        lines.append(f"{i},{total:.9g},{closs:.9g},{sloss:.9g}")
    Path(path).write_text("\n".join(lines) + "\n")


# --- decompose / recompose -------------------------------------------------------

_LATENT_MANIFEST = "latent.txt"


def cmd_decompose(args) -> int:
    schema = {
        "input": (str, None), "method": (str, None), "out": (str, None),
        "n": (int, 8), "rank": (int, None), "seed": (int, 0), "layer_name": (str, ""),
    }
    r = _resolve(args, schema)
    if not r["input"] or not r["out"]:
        raise UsageError("decompose needs --input and --out")
    method = (r["method"] or "").lower()
    if method not in ("fft", "dct", "pca", "ica"):
        raise UsageError(f"unknown method {r['method']!r} (fft, dct, pca, ica)")
    fmap = read_tensor(r["input"], layer_name=r["layer_name"])
    out = Path(r["out"])
    out.mkdir(parents=True, exist_ok=True)

    manifest = {
        "method": method, "h": fmap.h, "w": fmap.w, "c": fmap.c,
        "layer_name": fmap.layer_name, "seed": r["seed"],
    }
    if method in ("fft", "dct"):
        spec = fft_forward(fmap) if method == "fft" else dct_forward(fmap)
        write_array(spec.coeffs, out / "coeffs.sft")
    elif method == "pca":
        rep = pca_decompose(fmap, k=r["rank"])
        for name in ("U", "D", "V", "H", "mean"):
            write_array(getattr(rep, name), out / f"{name}.sft")
        manifest["k"] = rep.k
    else:
        rep = ica_decompose(fmap, n_extreme=r["n"], seed=derive_seed(r["seed"], "decompose"))
        for name in ("S", "A", "mean"):
            write_array(getattr(rep, name), out / f"{name}.sft")
        manifest["n_extreme"] = rep.n_extreme
        manifest["converged"] = rep.converged
        manifest["ica_seed"] = rep.seed
    write_config(out / _LATENT_MANIFEST, manifest)
    write_config(out / "run.config", r)
    print(f"wrote {method} latent to {out}")
    return 0


def _load_latent(latent_dir: Path):
    man = read_config(latent_dir / _LATENT_MANIFEST)
    method = man["method"]
    h, w, c = int(man["h"]), int(man["w"]), int(man["c"])
    layer = man.get("layer_name", "")
    if method in ("fft", "dct"):
        return SpectrumRep(method, read_array(latent_dir / "coeffs.sft"), layer)
    if method == "pca":
        return PcaRep(
            U=read_array(latent_dir / "U.sft"), D=read_array(latent_dir / "D.sft"),
            V=read_array(latent_dir / "V.sft"), H=read_array(latent_dir / "H.sft"),
            mean=read_array(latent_dir / "mean.sft"), h=h, w=w, c=c, k=int(man["k"]),
        )
    if method == "ica":
        return IcaRep(
            S=read_array(latent_dir / "S.sft"), A=read_array(latent_dir / "A.sft"),
            mean=read_array(latent_dir / "mean.sft"), h=h, w=w, c=c,
            n_extreme=int(man["n_extreme"]), seed=int(man.get("ica_seed", 0)),
            converged=man.get("converged", "True") == "True",
        )
    raise UsageError(f"latent manifest names unknown method {method!r}")


def cmd_recompose(args) -> int:
    schema = {"latent": (str, None), "out": (str, None)}
    r = _resolve(args, schema)
    if not r["latent"] or not r["out"]:
        raise UsageError("recompose needs --latent and --out")
    rep = _load_latent(Path(r["latent"]))
    if isinstance(rep, SpectrumRep):
        fmap = fft_inverse(rep) if rep.kind == "fft" else dct_inverse(rep)
    elif isinstance(rep, PcaRep):
        fmap = pca_project_back(rep, rep.H)
    else:
        fmap = ica_project_back(rep)
    write_array(fmap.data, r["out"])
    write_config(str(r["out"]) + ".config", r)
    print(f"recomposed {r['latent']} -> {r['out']}")
    return 0


# --- transfer ---------------------------------------------------------------------

_TRANSFER_SCHEMA = {
    "content": (str, None), "style": (str, None), "out": (str, None),
    "layer": (str, "relu4_1"), "content_layer": (str, None),
    "alpha": (float, 1.0), "beta": (float, 1e3),
    "iters": (int, 500), "step": (float, 0.02), "init": (str, "content"),
    "seed": (int, 0), "size": (str, "256"), "control": (str, None),
    "weights": (str, None), "pooling": (str, None),
}


def cmd_transfer(args) -> int:
    r = _resolve(args, _TRANSFER_SCHEMA)
    if not (r["content"] and r["style"] and r["out"]):
        raise UsageError("transfer needs --content, --style, and --out")
    size = _parse_size(r["size"])
    ex = _load_extractor(r["weights"], r["pooling"])
    cfg = _resolved_loss_config(r, ex)
    parsed = parse_control_spec(r["control"])
    control = parsed.spec if parsed else None
    if control and any(isinstance(op, Mix) for op in control.ops):
        raise UsageError("mix ops need the mix command (it takes two style images)")
    content = load_image(r["content"], size)
    style = load_image(r["style"], size)
    img, history = run_transfer(content, style, ex, cfg, _opt_options(r), control)
    save_image(img, r["out"])
    _write_loss_csv(str(r["out"]) + ".loss.csv", history)
    write_config(str(r["out"]) + ".config", r)
    print(f"wrote {r['out']} ({len(history)} iterations)")
    return 0


def cmd_mix(args) -> int:
    schema = dict(_TRANSFER_SCHEMA)
    del schema["style"], schema["control"]
    schema.update({
        "stroke_from": (str, None), "color_from": (str, None),
        "method": (str, "fft"), "I": (str, "1.0"),
        "interpolate": (str, None), "n": (int, 8),
    })
    r = _resolve(args, schema)
    if not (r["content"] and r["stroke_from"] and r["color_from"] and r["out"]):
        raise UsageError("mix needs --content, --stroke-from, --color-from, and --out")
    method = r["method"].lower()
    if method not in ("fft", "dct", "ica"):
        raise UsageError(f"mix method must be fft, dct, or ica, got {r['method']!r}")
    size = _parse_size(r["size"])
    ex = _load_extractor(r["weights"], r["pooling"])
    cfg = _resolved_loss_config(r, ex)
    opt = _opt_options(r)
    content = load_image(r["content"], size)
    stroke_img = load_image(r["stroke_from"], size)
    color_img = load_image(r["color_from"], size)

    out = Path(r["out"])
    if r["interpolate"]:
        try:
            weights = [float(x) for x in r["interpolate"].split(",")]
        except ValueError as e:
            raise UsageError(f"cannot parse --interpolate weights {r['interpolate']!r}") from e
        img, history = run_interpolate_transfer(content, [stroke_img, color_img], weights, ex, cfg, opt)
        save_image(img, out)
        _write_loss_csv(str(out) + ".loss.csv", history)
        write_config(str(out) + ".config", r)
        print(f"wrote {out} (interpolation {weights})")
        return 0

    try:
        factors = [float(x) for x in str(r["I"]).split(",")]
    except ValueError as e:
        raise UsageError(f"cannot parse --I value(s) {r['I']!r}") from e
    params = ControlParams(n_extreme=r["n"], seed=derive_seed(r["seed"], "decompose"))
    multi = len(factors) > 1
    for factor in factors:
        suffix = "_I" + f"{factor:g}".replace(".", "x")
        target = out if not multi else out.with_stem(out.stem + suffix)
        img, history = run_mix_transfer(
            content, stroke_img, color_img, ex, cfg, opt, method, factor, params
        )
        save_image(img, target)
        _write_loss_csv(str(target) + ".loss.csv", history)
        resolved = dict(r)
        resolved["I"] = f"{factor:g}"
        write_config(str(target) + ".config", resolved)
        print(f"wrote {target} (I={factor:g})")
    return 0


def cmd_sketch(args) -> int:
    schema = dict(_TRANSFER_SCHEMA)
    schema.update({"binarize": (str, "otsu"), "I": (float, 1.0)})
    del schema["control"]
    r = _resolve(args, schema)
    if not (r["content"] and r["style"] and r["out"]):
        raise UsageError("sketch needs --content, --style, and --out")
    size = _parse_size(r["size"])
    ex = _load_extractor(r["weights"], r["pooling"])
    cfg = _resolved_loss_config(r, ex)
    content = load_image(r["content"], size)
    style = load_image(r["style"], size)
    control = None
    if r["I"] != 1.0:
        # bare scale applies to the stroke (non-dc) cells, color untouched
        control = parse_control_spec(f"fft: scale={r['I']}").spec
    img, history = run_transfer(content, style, ex, cfg, _opt_options(r), control)
    thr = r["binarize"]
    if thr.startswith("fixed:"):
        sketch = binarize(img, float(thr[6:]))
    elif thr == "otsu":
        sketch = binarize(img, "otsu")
    else:
        raise UsageError(f"--binarize must be 'otsu' or 'fixed:<t>', got {thr!r}")
    save_image(sketch, r["out"])
    _write_loss_csv(str(r["out"]) + ".loss.csv", history)
    write_config(str(r["out"]) + ".config", r)
    print(f"wrote {r['out']}")
    return 0


# --- atlas -------------------------------------------------------------------------


def cmd_atlas(args) -> int:
    schema = {
        "styles": (str, None), "labels": (str, None), "out": (str, None),
        "k": (int, 3), "k_neighbors": (int, 5), "seed": (int, 0),
        "layer": (str, "relu2_1"), "weights": (str, None), "size": (str, "64"),
        "full_vectors": (bool, False),
    }
    r = _resolve(args, schema)
    if not (r["styles"] and r["labels"] and r["out"]):
        raise UsageError("atlas needs --styles, --labels, and --out")
    labels = {}
    for ln, raw in enumerate(Path(r["labels"]).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("style_id,"):
            continue
        sid, _, lab = line.partition(",")
        labels[sid.strip()] = lab.strip()

    style_dir = Path(r["styles"])
    specs = {}
    ex = None
    size = _parse_size(r["size"])
    for p in sorted(style_dir.iterdir()):
        if p.suffix == ".sft":
            specs[p.stem] = fft_forward(read_tensor(p))
        elif p.suffix in (".png", ".ppm"):
            if ex is None:
                ex = _load_extractor(r["weights"])
            img = load_image(p, size)
            fmap = ex.forward(ex.center(img), [r["layer"]])[r["layer"]]
            specs[p.stem] = fft_forward(fmap)
    if len(specs) < r["k"]:
        raise UsageError(f"need at least k={r['k']} styles, found {len(specs)}")

    std = atlas_mod.ClusteringStandard(k=r["k"])
    points, report = atlas_mod.build_atlas(
        specs, labels, std, k_neighbors=r["k_neighbors"],
        seed=derive_seed(r["seed"], "clustering"), full_vectors=r["full_vectors"],
    )
    out = Path(r["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "atlas.csv").write_text(atlas_mod.atlas_csv(points))
    (out / "atlas.svg").write_text(atlas_mod.atlas_svg(points))
    write_config(out / "run.config", r)
    verdict = "passes" if report.passed else "fails"
    print(f"clustering standard {verdict}" + (f": {'; '.join(report.violations)}" if report.violations else ""))
    print(f"wrote {out / 'atlas.csv'} and {out / 'atlas.svg'}")
    return 0


# --- entry point ---------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="stylebasis", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    d = sub.add_parser("decompose", help="decompose a feature tensor into a latent directory")
    d.add_argument("--input")
    d.add_argument("--method")
    d.add_argument("--out")
    d.add_argument("--n", type=int)
    d.add_argument("--rank", type=int)
    d.add_argument("--seed", type=int)
    d.add_argument("--layer-name", dest="layer_name")
    d.add_argument("--config")
    d.set_defaults(func=cmd_decompose)

    rc = sub.add_parser("recompose", help="invert a latent directory back to a feature tensor")
    rc.add_argument("--latent")
    rc.add_argument("--out")
    rc.add_argument("--config")
    rc.set_defaults(func=cmd_recompose)

    t = sub.add_parser("transfer", help="iterative style transfer with optional latent control")
    for flag, kw in _transfer_flags():
        t.add_argument(flag, **kw)
    t.add_argument("--control")
    t.set_defaults(func=cmd_transfer)

    mx = sub.add_parser("mix", help="transfer a compound style mixed from two style images")
    for flag, kw in _transfer_flags():
        if flag != "--style":
            mx.add_argument(flag, **kw)
    mx.add_argument("--stroke-from", dest="stroke_from")
    mx.add_argument("--color-from", dest="color_from")
    mx.add_argument("--method")
    mx.add_argument("--I", dest="I")
    mx.add_argument("--interpolate")
    mx.add_argument("--n", type=int)
    mx.set_defaults(func=cmd_mix)

    sk = sub.add_parser("sketch", help="style transfer followed by binarization")
    for flag, kw in _transfer_flags():
        sk.add_argument(flag, **kw)
    sk.add_argument("--binarize")
    sk.add_argument("--I", dest="I", type=float)
    sk.set_defaults(func=cmd_sketch)

    a = sub.add_parser("atlas", help="embed and cluster a directory of styles")
    a.add_argument("--styles")
    a.add_argument("--labels")
    a.add_argument("--out")
    a.add_argument("--k", type=int)
    a.add_argument("--k-neighbors", dest="k_neighbors", type=int)
    a.add_argument("--seed", type=int)
    a.add_argument("--layer")
    a.add_argument("--weights")
    a.add_argument("--size")
    a.add_argument("--full-vectors", dest="full_vectors", action="store_const", const=True)
    a.add_argument("--config")
    a.set_defaults(func=cmd_atlas)
    return p


def _transfer_flags():
    return [
        ("--content", {}),
        ("--style", {}),
        ("--out", {}),
        ("--layer", {}),
        ("--content-layer", {"dest": "content_layer"}),
        ("--alpha", {"type": float}),
        ("--beta", {"type": float}),
        ("--iters", {"type": int}),
        ("--step", {"type": float}),
        ("--init", {"choices": ["content", "noise"]}),
        ("--seed", {"type": int}),
        ("--size", {}),
        ("--weights", {}),
        ("--pooling", {"choices": ["avg", "max"]}),
        ("--config", {}),
    ]


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError(parser.format_usage())
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except StyleBasisError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.category
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
