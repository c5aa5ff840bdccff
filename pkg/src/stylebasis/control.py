"""Latent-space control of decomposed styles and the decompose/edit/invert pipeline.

A ControlSpec names a decomposition method plus an ordered list of edits:
keep a subset of bases, rescale a subset, or pull a subset over from another
style in the same bank. Basis ids are flattened (u*w + v) frequency cells for
the spectrum methods, projection rows for the SVD method, and signal indices
for ICA. Symbolic selectors: "dc"/"color" and "rest"/"stroke" name the
zero-frequency cell and its complement for spectrum methods, the top
projection direction and the rest for the SVD method, and the mixing-sum
split for ICA. An empty op list is the identity and skips the decomposition
round trip entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadWeights,
    IndexOutOfRange,
    MethodMismatch,
    ShapeMismatch,
    UnknownStyleId,
    UsageError,
)
from .latent import (
    IcaRep,
    PcaRep,
    ica_decompose,
    ica_project_back,
    pca_decompose,
    pca_project_back,
    split_basis,
    with_signals,
)
from .spectral import SpectrumRep, dct_forward, fft_forward, fft_inverse, symmetrize, dct_inverse
from .tensors import FeatureMap

METHODS = ("fft", "dct", "pca", "ica")

LatentStyle = SpectrumRep | PcaRep | IcaRep

Selector = str | tuple[int, ...]


@dataclass(frozen=True)
class ControlParams:
    """Method-specific decomposition knobs shared across a bank."""

    n_extreme: int = 8
    rank: int | None = None
    seed: int = 0
    center_pca: bool = False
    ica_row_semantics: bool = False


@dataclass(frozen=True)
class SingleBasis:
    """Keep only the selected bases, zeroing the rest."""

    ids: Selector


@dataclass(frozen=True)
class Intervene:
    """Scale the selected bases by a nonnegative factor; 1.0 is the identity."""

    ids: Selector
    factor: float

    def __post_init__(self):
        f = float(self.factor)
        if not np.isfinite(f) or f < 0.0:
            raise UsageError(f"intervention factor must be finite and >= 0, got {self.factor}")
        object.__setattr__(self, "factor", f)


@dataclass(frozen=True)
class Mix:
    """Replace the selected bases with the same selection from another style.

    Symbolic selectors resolve on each side separately and map positionally,
    so "color" pulls the other style's color bases into this style's color
    slots. For ICA the matching mixing-matrix columns move with the signals
    (rows instead when the bank's params request row semantics) and take_mean
    additionally adopts the source's centering mean.
    """

    source_style_id: str
    ids_from_other: Selector
    ids_from_self: Selector | None = None
    take_mean: bool = False


ControlOp = SingleBasis | Intervene | Mix


@dataclass(frozen=True)
class ControlSpec:
    method: str
    ops: tuple[ControlOp, ...] = ()
    params: ControlParams = field(default_factory=ControlParams)

    def __post_init__(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}, expected one of {METHODS}")
        object.__setattr__(self, "ops", tuple(self.ops))


class StyleBank:
    """Feature maps of the styles taking part in a control run, plus cached latents.

    All entries must share (h, w, c); latents are computed lazily with the
    bank's method and params and cached read-only.
    """

    def __init__(self, method: str, params: ControlParams | None = None):
        if method not in METHODS:
            raise UsageError(f"unknown method {method!r}")
        self.method = method
        self.params = params or ControlParams()
        self._maps: dict[str, FeatureMap] = {}
        self._latents: dict[str, LatentStyle] = {}

    def add(self, style_id: str, fmap: FeatureMap) -> None:
        if self._maps:
            ref = next(iter(self._maps.values()))
            if (fmap.h, fmap.w, fmap.c) != (ref.h, ref.w, ref.c):
                raise ShapeMismatch(
                    f"style {style_id!r} is {fmap.h}x{fmap.w}x{fmap.c}, bank holds {ref.h}x{ref.w}x{ref.c}"
                )
        self._maps[style_id] = fmap

    def feature(self, style_id: str) -> FeatureMap:
        if style_id not in self._maps:
            raise UnknownStyleId(f"style {style_id!r} not in bank")
        return self._maps[style_id]

    def latent(self, style_id: str) -> LatentStyle:
        if style_id not in self._latents:
            self._latents[style_id] = decompose(self.feature(style_id), self.method, self.params)
        return self._latents[style_id]


def decompose(fmap: FeatureMap, method: str, params: ControlParams | None = None) -> LatentStyle:
    params = params or ControlParams()
    if method == "fft":
        return fft_forward(fmap)
    if method == "dct":
        return dct_forward(fmap)
    if method == "pca":
        return pca_decompose(fmap, k=params.rank, center=params.center_pca)
    if method == "ica":
        return ica_decompose(fmap, n_extreme=params.n_extreme, seed=params.seed)
    raise UsageError(f"unknown method {method!r}")


def project_back(latent: LatentStyle) -> FeatureMap:
    """Invert a latent back to feature-map space.

    Edited Fourier spectra are conjugate-symmetrized first as a safety net;
    edits made through this module preserve the symmetry anyway.
    """
    if isinstance(latent, SpectrumRep):
        return fft_inverse(symmetrize(latent)) if latent.kind == "fft" else dct_inverse(latent)
    if isinstance(latent, PcaRep):
        return pca_project_back(latent, latent.H)
    if isinstance(latent, IcaRep):
        return ica_project_back(latent)
    raise UsageError(f"unknown latent type {type(latent).__name__}")


def basis_count(latent: LatentStyle) -> int:
    if isinstance(latent, SpectrumRep):
        return latent.h * latent.w
    if isinstance(latent, PcaRep):
        return latent.k
    return latent.c


def resolve_ids(latent: LatentStyle, sel: Selector) -> np.ndarray:
    """Turn a selector into a sorted array of concrete basis indices."""
    n = basis_count(latent)
    if isinstance(sel, str):
        name = sel.lower()
        if name == "all":
            return np.arange(n)
        if isinstance(latent, SpectrumRep):
            if name in ("dc", "color"):
                return np.array([0])
            if name in ("rest", "stroke"):
                return np.arange(1, n)
        elif isinstance(latent, PcaRep):
            if name in ("principal", "color", "dc"):
                return np.array([0])
            if name in ("rest", "stroke"):
                return np.arange(1, n)
        else:
            # rank order is kept so that cross-style selections pair by rank
            split = split_basis(latent)
            if name == "stroke":
                return np.array(split.stroke_ids, dtype=int)
            if name == "color":
                return np.array(split.color_ids, dtype=int)
        raise UsageError(f"selector {sel!r} undefined for {type(latent).__name__}")
    ids = np.array(sorted(int(i) for i in sel), dtype=int)
    if ids.size and (ids[0] < 0 or ids[-1] >= n):
        raise IndexOutOfRange(f"basis ids {sel} outside [0, {n})")
    if ids.size != np.unique(ids).size:
        raise UsageError(f"duplicate basis ids in {sel}")
    return ids


def _scale_ids(latent: LatentStyle, ids: np.ndarray, factor: float) -> LatentStyle:
    if isinstance(latent, SpectrumRep):
        co = latent.coeffs.copy()
        flat = co.reshape(latent.h * latent.w, latent.c)
        flat[ids, :] = flat[ids, :] * factor
        return SpectrumRep(latent.kind, co, latent.source_layer)
    if isinstance(latent, PcaRep):
        H = latent.H.copy()
        H[ids, :] *= np.float32(factor)
        return PcaRep(U=latent.U, D=latent.D, V=latent.V, H=H, mean=latent.mean,
                      h=latent.h, w=latent.w, c=latent.c, k=latent.k)
    S = latent.S.copy()
    S[ids, :] *= np.float32(factor)
    return with_signals(latent, S=S)


def intervene(latent: LatentStyle, ids: Selector, factor: float) -> LatentStyle:
    """Scale the selected bases by factor, leaving the others untouched."""
    op = Intervene(ids, factor)  # validates the factor
    return _scale_ids(latent, resolve_ids(latent, ids), op.factor)


def single_basis(latent: LatentStyle, ids: Selector) -> LatentStyle:
    """Keep only the selected bases; equivalent to zero-scaling the complement."""
    keep = resolve_ids(latent, ids)
    other = np.setdiff1d(np.arange(basis_count(latent)), keep)
    return _scale_ids(latent, other, 0.0)


def _mix_latent(latent: LatentStyle, source: LatentStyle, op: Mix, params: ControlParams) -> LatentStyle:
    ids_self = resolve_ids(latent, op.ids_from_other)
    ids_src = resolve_ids(source, op.ids_from_other)
    if len(ids_self) != len(ids_src):
        raise ShapeMismatch(
            f"selection sizes differ between styles: {len(ids_self)} vs {len(ids_src)}"
        )
    if op.ids_from_self is not None:
        kept = set(resolve_ids(latent, op.ids_from_self).tolist())
        if kept & set(ids_self.tolist()):
            raise UsageError("mix op keeps and replaces overlapping basis ids")
    if isinstance(latent, SpectrumRep):
        if not isinstance(source, SpectrumRep) or source.kind != latent.kind:
            raise MethodMismatch("mix sources must share the decomposition method")
        co = latent.coeffs.copy()
        flat = co.reshape(latent.h * latent.w, latent.c)
        flat[ids_self, :] = source.coeffs.reshape(source.h * source.w, source.c)[ids_src, :]
        return SpectrumRep(latent.kind, co, latent.source_layer)
    if isinstance(latent, IcaRep):
        if not isinstance(source, IcaRep):
            raise MethodMismatch("mix sources must share the decomposition method")
        S = latent.S.copy()
        A = latent.A.copy()
        S[ids_self, :] = source.S[ids_src, :]
        if params.ica_row_semantics:
            A[ids_self, :] = source.A[ids_src, :]
        else:
            A[:, ids_self] = source.A[:, ids_src]
        mean = source.mean if op.take_mean else latent.mean
        return with_signals(latent, S=S, A=A, mean=mean)
    raise MethodMismatch("mixing is defined for the spectrum and ICA methods only")


def apply_control(bank: StyleBank, primary_style: str, spec: ControlSpec) -> FeatureMap:
    """Run the decompose -> edit -> invert pipeline for one style.

    An empty op list returns the stored feature map unchanged, bit for bit,
    without any decomposition round trip.
    """
    if spec.method != bank.method:
        raise MethodMismatch(f"spec method {spec.method!r} differs from bank method {bank.method!r}")
    fmap = bank.feature(primary_style)
    if not spec.ops:
        return fmap
    latent = bank.latent(primary_style)
    for op in spec.ops:
        if isinstance(op, SingleBasis):
            latent = single_basis(latent, op.ids)
        elif isinstance(op, Intervene):
            latent = _scale_ids(latent, resolve_ids(latent, op.ids), op.factor)
        elif isinstance(op, Mix):
            source = bank.latent(op.source_style_id)
            latent = _mix_latent(latent, source, op, bank.params)
        else:
            raise UsageError(f"unknown control op {op!r}")
    return project_back(latent)


def mix(bank: StyleBank, stroke_from: str, color_from: str, stroke_I: float = 1.0) -> FeatureMap:
    """Compound style: color bases of one style, stroke bases of another.

    Spectrum methods take the zero-frequency cell from color_from and the
    remaining frequencies from stroke_from scaled by stroke_I. ICA replaces
    the stroke style's color-id signals (and their mixing-matrix vectors, and
    the centering mean) with the color style's, then scales the kept stroke
    signals by stroke_I.
    """
    if bank.method == "pca":
        raise MethodMismatch("mixing is not defined for the pca method")
    base = bank.latent(stroke_from)
    # pin the stroke ids up front: for ICA the mixing-sum order can shift
    # once the color columns are replaced
    stroke_ids = tuple(int(i) for i in resolve_ids(base, "stroke"))
    ops = (
        Mix(color_from, ids_from_other="color", ids_from_self=stroke_ids, take_mean=True),
        Intervene(stroke_ids, stroke_I),
    )
    return apply_control(bank, stroke_from, ControlSpec(bank.method, ops, bank.params))


def interpolate(fmaps: list[FeatureMap], weights) -> FeatureMap:
    """Pointwise convex combination of equally shaped feature maps."""
    if not fmaps:
        raise UsageError("interpolate needs at least one feature map")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 1 or len(weights) != len(fmaps):
        raise BadWeights(f"{len(weights)} weights for {len(fmaps)} maps")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-6:
        raise BadWeights(f"weights must be >= 0 and sum to 1, got {weights.tolist()}")
    shape = fmaps[0].data.shape
    for fm in fmaps[1:]:
        if fm.data.shape != shape:
            raise ShapeMismatch(f"feature maps differ in shape: {fm.data.shape} vs {shape}")
    if weights[0] == 1.0 and np.all(weights[1:] == 0.0):
        return fmaps[0]
    acc = np.zeros(shape, dtype=np.float64)
    for wgt, fm in zip(weights, fmaps):
        acc += wgt * fm.data.astype(np.float64)
    return FeatureMap(acc.astype(np.float32), fmaps[0].layer_name)


def region_intervene(fmap: FeatureMap, rect: tuple[int, int, int, int], factor: float) -> FeatureMap:
    """Scale a spatial rectangle (y0, x0, y1, x1), end-exclusive, in every channel."""
    y0, x0, y1, x1 = (int(v) for v in rect)
    if not (0 <= y0 < y1 <= fmap.h and 0 <= x0 < x1 <= fmap.w):
        raise IndexOutOfRange(f"rect {rect} outside {fmap.h}x{fmap.w} grid")
    if not np.isfinite(factor) or factor < 0:
        raise UsageError(f"factor must be finite and >= 0, got {factor}")
    out = fmap.data.copy()
    out[y0:y1, x0:x1, :] *= np.float32(factor)
    return FeatureMap(out, fmap.layer_name)


def channel_subset(fmap: FeatureMap, keep) -> FeatureMap:
    """Zero every channel outside keep; shape is preserved so Gram sizes match."""
    ids = sorted(int(i) for i in keep)
    if ids and (ids[0] < 0 or ids[-1] >= fmap.c):
        raise IndexOutOfRange(f"channel ids {ids} outside [0, {fmap.c})")
    out = np.zeros_like(fmap.data)
    if ids:
        out[:, :, ids] = fmap.data[:, :, ids]
    return FeatureMap(out, fmap.layer_name)
