"""End-to-end orchestration: decompose a style's features, edit, transfer.

Also owns the canonical text form of a control spec:

    method[(key=value, ...)]: op [op ...]

with ops
    keep=dc|rest|stroke|color|all|<comma ints>   keep only those bases
    scale=<I>                                    rescale (the preceding keep
                                                 selection, or the stroke set)
    mix stroke@<style_id> color@<style_id> [I=<x>]

"identity" (or an empty string) means no edit at all and bypasses the
decomposition round trip.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .control import (
    ControlParams,
    ControlSpec,
    Intervene,
    Mix,
    SingleBasis,
    StyleBank,
    apply_control,
    interpolate,
    mix,
)
from .errors import UsageError
from .network import Extractor
from .tensors import FeatureMap, ImageTensor
from .transfer import LossConfig, OptOptions, transfer


@dataclass(frozen=True)
class ParsedControl:
    """A parsed control string: the ControlSpec plus, for mix ops, whose stroke leads."""

    spec: ControlSpec
    stroke_source: str | None = None


def parse_control_spec(text: str | None) -> ParsedControl | None:
    """Parse the control mini-grammar; None/"identity" mean no edits."""
    if text is None:
        return None
    text = text.strip()
    if not text or text.lower() == "identity":
        return None
    head, sep, tail = text.partition(":")
    if not sep:
        raise UsageError(f"control spec {text!r} needs 'method: op ...'")
    m = re.fullmatch(r"\s*(\w+)\s*(?:\(([^)]*)\))?\s*", head)
    if not m:
        raise UsageError(f"cannot parse control method from {head!r}")
    method = m.group(1).lower()
    params_kw = {}
    if m.group(2):
        for item in m.group(2).split(","):
            k, _, v = item.partition("=")
            k = k.strip().lower()
            v = v.strip()
            if k in ("n", "n_extreme"):
                params_kw["n_extreme"] = int(v)
            elif k in ("k", "rank"):
                params_kw["rank"] = int(v)
            elif k == "seed":
                params_kw["seed"] = int(v)
            else:
                raise UsageError(f"unknown control parameter {k!r}")
    params = ControlParams(**params_kw)

    ops: list = []
    stroke_source = None
    tokens = tail.split()
    last_keep = None
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.startswith("keep="):
            sel = _parse_selector(tok[5:])
            ops.append(SingleBasis(sel))
            last_keep = sel
            i += 1
        elif tok.startswith("scale="):
            factor = _parse_float(tok[6:], "scale")
            ops.append(Intervene(last_keep if last_keep is not None else "stroke", factor))
            i += 1
        elif tok == "mix":
            color_src = None
            factor = 1.0
            i += 1
            while i < len(tokens):
                t = tokens[i]
                if t.startswith("stroke@"):
                    stroke_source = t[7:]
                elif t.startswith("color@"):
                    color_src = t[6:]
                elif t.startswith("I="):
                    factor = _parse_float(t[2:], "I")
                else:
                    break
                i += 1
            if stroke_source is None or color_src is None:
                raise UsageError("mix op needs both stroke@<id> and color@<id>")
            ops.append(Mix(color_src, ids_from_other="color", take_mean=True))
            if factor != 1.0:
                ops.append(Intervene("stroke", factor))
        else:
            raise UsageError(f"unknown control op {tok!r}")
    return ParsedControl(ControlSpec(method, tuple(ops), params), stroke_source)


def _parse_selector(text: str):
    name = text.strip().lower()
    if name in ("dc", "rest", "stroke", "color", "all", "principal"):
        return name
    try:
        return tuple(int(x) for x in name.split(","))
    except ValueError as e:
        raise UsageError(f"cannot parse basis selector {text!r}") from e


def _parse_float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError as e:
        raise UsageError(f"cannot parse {what} value {text!r}") from e


def style_feature_maps(ex: Extractor, style: ImageTensor, layers) -> dict[str, FeatureMap]:
    return ex.forward(ex.center(style), set(layers))


def controlled_style_targets(
    ex: Extractor,
    style: ImageTensor,
    cfg: LossConfig,
    control: ControlSpec | None,
    extra_styles: dict[str, ImageTensor] | None = None,
) -> dict[str, FeatureMap]:
    """Style feature maps per style layer, run through the control pipeline.

    With no control (None) the raw feature maps pass through untouched, which
    reproduces the plain transfer algorithm exactly.
    """
    raw = style_feature_maps(ex, style, cfg.style_layers)
    if control is None:
        return raw
    targets = {}
    for layer in cfg.style_layers:
        bank = StyleBank(control.method, control.params)
        bank.add("style", raw[layer])
        for sid, img in (extra_styles or {}).items():
            bank.add(sid, style_feature_maps(ex, img, [layer])[layer])
        targets[layer] = apply_control(bank, "style", control)
    return targets


def run_transfer(
    content: ImageTensor,
    style: ImageTensor,
    ex: Extractor,
    cfg: LossConfig,
    opt: OptOptions,
    control: ControlSpec | None = None,
    extra_styles: dict[str, ImageTensor] | None = None,
):
    """Full pipeline: extract style features, apply control, optimize the image."""
    targets = controlled_style_targets(ex, style, cfg, control, extra_styles)
    return transfer(content, targets, ex, cfg, opt)


def run_mix_transfer(
    content: ImageTensor,
    stroke_style: ImageTensor,
    color_style: ImageTensor,
    ex: Extractor,
    cfg: LossConfig,
    opt: OptOptions,
    method: str,
    stroke_I: float = 1.0,
    params: ControlParams | None = None,
):
    """Transfer with a compound style: stroke bases of one image, color of another."""
    targets = {}
    for layer in cfg.style_layers:
        bank = StyleBank(method, params or ControlParams())
        bank.add("stroke_src", style_feature_maps(ex, stroke_style, [layer])[layer])
        bank.add("color_src", style_feature_maps(ex, color_style, [layer])[layer])
        targets[layer] = mix(bank, "stroke_src", "color_src", stroke_I)
    return transfer(content, targets, ex, cfg, opt)


def run_interpolate_transfer(
    content: ImageTensor,
    styles: list[ImageTensor],
    weights,
    ex: Extractor,
    cfg: LossConfig,
    opt: OptOptions,
):
    """Baseline mixing: pointwise interpolation of the style feature maps."""
    targets = {}
    for layer in cfg.style_layers:
        maps = [style_feature_maps(ex, s, [layer])[layer] for s in styles]
        targets[layer] = interpolate(maps, weights)
    return transfer(content, targets, ex, cfg, opt)
