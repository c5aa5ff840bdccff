"""Per-channel 2-D spectrum transforms of a feature map, plus coefficient masks.

Each channel of a feature map is transformed independently as a 2-D grid.
The Fourier path puts the 1/(h*w) factor on the forward transform, so the
zero-frequency coefficient of a channel equals that channel's mean and the
inverse carries no normalization. The cosine path is the orthonormal DCT-II,
which is exactly its own stated inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import IndexOutOfRange, MethodMismatch, NonNegligibleImaginary, RangeViolation, ShapeMismatch, UsageError
from .tensors import FeatureMap, _freeze

KIND_FFT = "fft"
KIND_DCT = "dct"


@dataclass(frozen=True)
class SpectrumRep:
    """Spectrum coefficients of a feature map, shaped like the source (h, w, c).

    kind "fft" holds complex64 coefficients, kind "dct" float32.
    """

    kind: str
    coeffs: np.ndarray
    source_layer: str = ""

    def __post_init__(self):
        if self.kind not in (KIND_FFT, KIND_DCT):
            raise UsageError(f"unknown spectrum kind {self.kind!r}")
        want = np.complex64 if self.kind == KIND_FFT else np.float32
        arr = np.asarray(self.coeffs, dtype=want)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ShapeMismatch(f"spectrum must be (h, w, c), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise RangeViolation("spectrum contains NaN or Inf")
        object.__setattr__(self, "coeffs", _freeze(arr))

    @property
    def h(self) -> int:
        return self.coeffs.shape[0]

    @property
    def w(self) -> int:
        return self.coeffs.shape[1]

    @property
    def c(self) -> int:
        return self.coeffs.shape[2]


@dataclass(frozen=True)
class FrequencyMask:
    """Keep-mask over the (u, v) frequency grid.

    The selected set is the union of the zero-frequency cell (keep_dc), all
    other cells (keep_rest), and any explicit (u, v) indices.
    """

    keep_dc: bool = False
    keep_rest: bool = False
    indices: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        idx = tuple((int(u), int(v)) for u, v in self.indices)
        object.__setattr__(self, "indices", idx)
        if not (self.keep_dc or self.keep_rest or idx):
            raise UsageError("mask selects nothing")

    def grid(self, h: int, w: int) -> np.ndarray:
        keep = np.zeros((h, w), dtype=bool)
        if self.keep_dc:
            keep[0, 0] = True
        if self.keep_rest:
            keep[:, :] = True
            keep[0, 0] = self.keep_dc
        for u, v in self.indices:
            if not (0 <= u < h and 0 <= v < w):
                raise IndexOutOfRange(f"mask index ({u}, {v}) outside {h}x{w} grid")
            keep[u, v] = True
        return keep


MASK_DC = FrequencyMask(keep_dc=True)
MASK_REST = FrequencyMask(keep_rest=True)
MASK_ALL = FrequencyMask(keep_dc=True, keep_rest=True)


def fft_forward(fmap: FeatureMap) -> SpectrumRep:
    """Per-channel 2-D DFT with the 1/(h*w) factor on the forward pass."""
    arr = fmap.data.astype(np.float64)
    co = np.fft.fft2(arr, axes=(0, 1)) / (fmap.h * fmap.w)
    return SpectrumRep(KIND_FFT, co.astype(np.complex64), fmap.layer_name)


def fft_inverse(spec: SpectrumRep, max_imag: float = 1e-3) -> FeatureMap:
    """Invert a Fourier spectrum, discarding the imaginary residue.

    A residue above max_imag signals a malformed (asymmetric) edited spectrum;
    run symmetrize first when inverting hand-edited coefficients.
    """
    if spec.kind != KIND_FFT:
        raise MethodMismatch(f"fft_inverse got a {spec.kind} spectrum")
    raw = np.fft.ifft2(spec.coeffs.astype(np.complex128), axes=(0, 1)) * (spec.h * spec.w)
    residue = float(np.abs(raw.imag).max())
    if residue > max_imag:
        raise NonNegligibleImaginary(
            f"imaginary residue {residue:.3g} exceeds {max_imag:g}; spectrum breaks conjugate symmetry"
        )
    return FeatureMap(raw.real.astype(np.float32), spec.source_layer)


def symmetrize(spec: SpectrumRep) -> SpectrumRep:
    """Project a Fourier spectrum onto the conjugate-symmetric subspace.

    Averages H(u, v) with conj(H(-u mod h, -v mod w)); a no-op (up to float
    rounding) for spectra that already satisfy the symmetry. DCT spectra are
    returned unchanged.
    """
    if spec.kind != KIND_FFT:
        return spec
    rev = np.roll(spec.coeffs[::-1, ::-1, :], shift=(1, 1), axis=(0, 1))
    sym = (spec.coeffs + np.conj(rev)) * 0.5
    return SpectrumRep(KIND_FFT, sym.astype(np.complex64), spec.source_layer)


def dct_forward(fmap: FeatureMap) -> SpectrumRep:
    """Per-channel orthonormal 2-D DCT-II."""
    arr = fmap.data.astype(np.float64)
    co = scipy.fft.dctn(arr, type=2, norm="ortho", axes=(0, 1))
    return SpectrumRep(KIND_DCT, co.astype(np.float32), fmap.layer_name)


def dct_inverse(spec: SpectrumRep) -> FeatureMap:
    if spec.kind != KIND_DCT:
        raise MethodMismatch(f"dct_inverse got a {spec.kind} spectrum")
    arr = scipy.fft.idctn(spec.coeffs.astype(np.float64), type=2, norm="ortho", axes=(0, 1))
    return FeatureMap(arr.astype(np.float32), spec.source_layer)


def spectrum_inverse(spec: SpectrumRep) -> FeatureMap:
    return fft_inverse(spec) if spec.kind == KIND_FFT else dct_inverse(spec)


def apply_mask(spec: SpectrumRep, mask: FrequencyMask, scale: float = 1.0) -> SpectrumRep:
    """Multiply selected coefficients by scale and zero the unselected ones.

    A full mask with scale 1.0 is the identity. Real scales applied to
    symmetric selections preserve Fourier conjugate symmetry.
    """
    if not np.isfinite(scale):
        raise UsageError(f"scale must be finite, got {scale}")
    keep = mask.grid(spec.h, spec.w)
    out = np.where(keep[:, :, None], spec.coeffs, 0)
    if scale != 1.0:
        out = np.where(keep[:, :, None], out * scale, out)
    return SpectrumRep(spec.kind, out.astype(spec.coeffs.dtype), spec.source_layer)
