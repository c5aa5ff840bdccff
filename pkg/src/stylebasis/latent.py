"""Linear-factor decompositions of a feature map: thin-SVD projection and fastICA.

A feature map is matricized row-major to (h*w, c); each channel is one column.
The SVD path factorizes that matrix and projects onto the left singular basis.
The ICA path treats the transposed matrix's rows (channels) as observed
mixtures and unmixes them into independent signals; the per-signal column
sums of the mixing matrix, sorted ascending, rank the signals so that the
extreme-ranked ones form the stroke basis and the middle ones the color basis.

Internals accumulate in float64; stored factors are float32.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceFailure, DegenerateInput, ShapeMismatch, UsageError
from .tensors import FeatureMap, _freeze


@dataclass(frozen=True)
class PcaRep:
    """Thin SVD factors of the matricized map plus projected coefficients.

    U is (h*w, k) orthonormal, D the k singular values descending, V (c, k)
    orthonormal, H = U^T M the (k, c) coefficients. The optional per-channel
    mean removed before factorization is re-added exactly once on projection.
    """

    U: np.ndarray
    D: np.ndarray
    V: np.ndarray
    H: np.ndarray
    mean: np.ndarray
    h: int
    w: int
    c: int
    k: int

    def __post_init__(self):
        for name in ("U", "D", "V", "H", "mean"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name), dtype=np.float32)))


@dataclass(frozen=True)
class IcaRep:
    """fastICA factors: signals S (c, h*w), mixing matrix A (c, c).

    A_sum holds per-signal column sums of A (signed by default), arg the
    ascending argsort of A_sum with ties broken by lower signal index.
    n_extreme signals from each end of that order form the stroke basis.
    """

    S: np.ndarray
    A: np.ndarray
    mean: np.ndarray
    h: int
    w: int
    c: int
    n_extreme: int
    seed: int = 0
    converged: bool = True
    use_abs_sums: bool = False
    A_sum: np.ndarray | None = None
    arg: np.ndarray | None = None

    def __post_init__(self):
        for name in ("S", "A", "mean"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name), dtype=np.float32)))
        if self.S.shape != (self.c, self.h * self.w) or self.A.shape != (self.c, self.c):
            raise ShapeMismatch(
                f"signals {self.S.shape} / mixing {self.A.shape} inconsistent with h*w={self.h * self.w}, c={self.c}"
            )
        if not (0 <= self.n_extreme <= self.c // 2):
            raise UsageError(f"n_extreme must lie in [0, c/2], got {self.n_extreme} for c={self.c}")
        a64 = self.A.astype(np.float64)
        sums = np.abs(a64).sum(axis=0) if self.use_abs_sums else a64.sum(axis=0)
        order = np.argsort(sums, kind="stable")
        object.__setattr__(self, "A_sum", _freeze(sums))
        object.__setattr__(self, "arg", _freeze(order.astype(np.int64)))


@dataclass(frozen=True)
class BasisSplit:
    """Disjoint stroke/color signal index sets covering 0..c-1."""

    stroke_ids: tuple[int, ...]
    color_ids: tuple[int, ...]


def matricize(fmap: FeatureMap) -> np.ndarray:
    return fmap.matrix().astype(np.float64)


def pca_decompose(fmap: FeatureMap, k: int | None = None, center: bool = False) -> PcaRep:
    """Thin SVD of the (h*w, c) matricization, keeping the top k directions.

    Channels are used as-is by default; with center=True the per-channel mean
    is removed first and stored for the projection back.
    """
    M = matricize(fmap)
    hw, c = M.shape
    kmax = min(hw, c)
    if k is None:
        k = kmax
    if not (1 <= k <= kmax):
        raise UsageError(f"rank k must lie in [1, {kmax}], got {k}")
    mean = M.mean(axis=0) if center else np.zeros(c)
    Mc = M - mean
    try:
        U, s, Vt = np.linalg.svd(Mc, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise ConvergenceFailure(f"SVD did not converge: {e}") from e
    H = U[:, :k].T @ Mc
    return PcaRep(
        U=U[:, :k], D=s[:k], V=Vt[:k].T, H=H, mean=mean,
        h=fmap.h, w=fmap.w, c=c, k=k,
    )


def pca_project_back(rep: PcaRep, H_mod: np.ndarray) -> FeatureMap:
    """Reconstruct a feature map from (possibly edited) projection coefficients."""
    H_mod = np.asarray(H_mod, dtype=np.float64)
    if H_mod.shape != (rep.k, rep.c):
        raise ShapeMismatch(f"coefficients must be ({rep.k}, {rep.c}), got {H_mod.shape}")
    M = rep.U.astype(np.float64) @ H_mod + rep.mean.astype(np.float64)
    return FeatureMap(M.reshape(rep.h, rep.w, rep.c).astype(np.float32))


def _sym_decorrelate(W: np.ndarray) -> np.ndarray:
    # W <- (W W^T)^(-1/2) W via the eigendecomposition of W W^T
    vals, vecs = np.linalg.eigh(W @ W.T)
    if vals.min() <= 0:
        raise DegenerateInput("unmixing iterate lost rank during decorrelation")
    return (vecs * (1.0 / np.sqrt(vals))) @ vecs.T @ W


def ica_decompose(
    fmap: FeatureMap,
    n_extreme: int = 8,
    seed: int = 0,
    max_iter: int = 400,
    tol: float = 1e-4,
    strict: bool = False,
    use_abs_sums: bool = False,
) -> IcaRep:
    """fastICA over the channels of a feature map.

    Channels (rows of the transposed matricization) are the observed mixtures;
    whitening, tanh contrast, and symmetric decorrelation recover c independent
    signals of length h*w. Deterministic for a fixed seed. When the fixed-point
    iteration has not met tol after max_iter sweeps the factorization is still
    returned (it is exact regardless) with converged=False; strict=True raises
    ConvergenceFailure instead.
    """
    M = matricize(fmap)
    hw, c = M.shape
    if c < 2:
        raise UsageError(f"ICA needs at least 2 channels, got {c}")
    if hw <= c:
        raise UsageError(f"ICA needs more samples than channels, got h*w={hw} <= c={c}")
    if not (0 <= n_extreme <= c // 2):
        raise UsageError(f"n_extreme must lie in [0, c/2], got {n_extreme}")

    mean = M.mean(axis=0)
    X = (M - mean).T  # (c, hw) centered mixtures

    cov = X @ X.T / hw
    evals, evecs = np.linalg.eigh(cov)
    if evals.min() <= max(evals.max(), 1e-30) * 1e-10:
        raise DegenerateInput("degenerate input: channel covariance is rank deficient")
    K = (evecs * (1.0 / np.sqrt(evals))).T  # whitening, rows are scaled eigvecs
    Xw = K @ X

    rng = np.random.default_rng(seed)
    W = _sym_decorrelate(rng.standard_normal((c, c)))
    converged = False
    for _ in range(max_iter):
        WX = W @ Xw
        G = np.tanh(WX)
        W_new = (G @ Xw.T) / hw - (1.0 - G**2).mean(axis=1)[:, None] * W
        W_new = _sym_decorrelate(W_new)
        if not np.all(np.isfinite(W_new)):
            raise ConvergenceFailure("unmixing iterate became non-finite")
        lim = float(np.abs(np.abs(np.einsum("ij,ij->i", W_new, W)) - 1.0).max())
        W = W_new
        if lim < tol:
            converged = True
            break
    if not converged:
        if strict:
            raise ConvergenceFailure(f"fastICA did not meet tol {tol:g} within {max_iter} iterations")
        warnings.warn("fastICA hit the iteration cap; returning the exact factorization of the last iterate")

    W_full = W @ K
    S = W_full @ X
    A = np.linalg.inv(W_full)
    return IcaRep(
        S=S, A=A, mean=mean, h=fmap.h, w=fmap.w, c=c,
        n_extreme=n_extreme, seed=seed, converged=converged, use_abs_sums=use_abs_sums,
    )


def ica_project_back(rep: IcaRep, S_mod: np.ndarray | None = None, A_mod: np.ndarray | None = None) -> FeatureMap:
    """Remix (possibly edited) signals, re-add the channel means, reshape."""
    S_mod = rep.S if S_mod is None else np.asarray(S_mod)
    A_mod = rep.A if A_mod is None else np.asarray(A_mod)
    if S_mod.shape != (rep.c, rep.h * rep.w):
        raise ShapeMismatch(f"signals must be ({rep.c}, {rep.h * rep.w}), got {S_mod.shape}")
    if A_mod.shape != (rep.c, rep.c):
        raise ShapeMismatch(f"mixing matrix must be ({rep.c}, {rep.c}), got {A_mod.shape}")
    M = (A_mod.astype(np.float64) @ S_mod.astype(np.float64)).T + rep.mean.astype(np.float64)
    return FeatureMap(M.reshape(rep.h, rep.w, rep.c).astype(np.float32))


def split_basis(rep: IcaRep) -> BasisSplit:
    """Stroke ids are the n_extreme lowest- and highest-ranked signals."""
    n, c = rep.n_extreme, rep.c
    order = [int(i) for i in rep.arg]
    stroke = tuple(order[:n] + order[c - n:]) if n > 0 else ()
    color = tuple(order[n:c - n])
    return BasisSplit(stroke_ids=stroke, color_ids=color)


def with_signals(rep: IcaRep, S=None, A=None, mean=None) -> IcaRep:
    """Copy of an ICA rep with edited factors; sum ordering is recomputed."""
    kw = {}
    if S is not None:
        kw["S"] = S
    if A is not None:
        kw["A"] = A
    if mean is not None:
        kw["mean"] = mean
    return replace(rep, **kw)
