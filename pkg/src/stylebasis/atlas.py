"""Style-space analysis: spectrum vectorization, embedding, clustering, channel search.

A style's spectrum is summarized by a color vector (the per-channel magnitude
of the zero-frequency cell) and a stroke vector (all remaining coefficient
magnitudes in fixed u, v, channel order). Styles are embedded to scalars via
classical Isomap (k-NN graph, Dijkstra geodesics, metric MDS) and grouped by
k-means with plus-plus seeding and restarts. The clustering standard encodes
two checks: oil never shares a cluster with chinese or pen, and some cluster
holds only one or two points. The channel search greedily drops channels
until the standard passes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph as csgraph

from .errors import DisconnectedGraph, NotFound, ShapeMismatch, UsageError
from .spectral import SpectrumRep, fft_forward
from .tensors import FeatureMap

LABELS = ("chinese", "oil", "pen", "other")


@dataclass
class StylePoint:
    """Per-style analysis record: vectors, scalar embeddings, cluster id."""

    style_id: str
    label: str
    v_color: np.ndarray
    v_stroke: np.ndarray
    u_color: float = 0.0
    u_stroke: float = 0.0
    cluster: int = -1


@dataclass(frozen=True)
class ClusteringStandard:
    """k and the two admissibility rules applied to a clustering."""

    k: int = 3
    forbid_oil_mixing: bool = True
    require_small_cluster: bool = True

    def __post_init__(self):
        if self.k < 2:
            raise UsageError(f"cluster count must be >= 2, got {self.k}")


@dataclass(frozen=True)
class StandardReport:
    passed: bool
    rule1_ok: bool
    rule2_ok: bool
    violations: tuple[str, ...] = ()


def spectrum_vectors(spec: SpectrumRep) -> tuple[np.ndarray, np.ndarray]:
    """Color vector (c,) of zero-frequency magnitudes and stroke vector ((h*w-1)*c,).

    Stroke entries follow row-major (u, v) order with channels innermost.
    """
    mags = np.abs(spec.coeffs.astype(np.complex128 if spec.kind == "fft" else np.float64))
    flat = mags.reshape(spec.h * spec.w, spec.c)
    return flat[0].astype(np.float64).copy(), flat[1:].ravel().astype(np.float64)


def _radial_band_index(h: int, w: int, n_bands: int) -> np.ndarray:
    # log-spaced radial bands over the folded frequency grid; cell (0, 0) gets -1
    u = np.minimum(np.arange(h), h - np.arange(h)) / h
    v = np.minimum(np.arange(w), w - np.arange(w)) / w
    r = np.sqrt(u[:, None] ** 2 + v[None, :] ** 2)
    rmin = r[r > 0].min()
    rmax = r.max()
    if rmax <= rmin:
        bands = np.zeros((h, w), dtype=int)
    else:
        edges = np.geomspace(rmin, rmax, n_bands + 1)
        bands = np.clip(np.searchsorted(edges, r, side="right") - 1, 0, n_bands - 1)
    bands[0, 0] = -1
    return bands


def summary_vector(spec: SpectrumRep, channels=None, n_bands: int = 16, full: bool = False) -> np.ndarray:
    """Per-style clustering vector over a channel subset.

    Default form concatenates the color vector with per-band stroke energies
    (n_bands log-spaced radial bands); full=True uses the raw concatenation of
    color and stroke vectors instead.
    """
    idx = np.arange(spec.c) if channels is None else np.array(sorted(int(i) for i in channels), dtype=int)
    if idx.size == 0:
        raise UsageError("channel subset is empty")
    if idx[0] < 0 or idx[-1] >= spec.c:
        raise UsageError(f"channel ids outside [0, {spec.c})")
    mags = np.abs(spec.coeffs[:, :, idx].astype(np.complex128 if spec.kind == "fft" else np.float64))
    color = mags[0, 0, :].astype(np.float64)
    if full:
        flat = mags.reshape(spec.h * spec.w, idx.size)
        return np.concatenate([color, flat[1:].ravel()])
    bands = _radial_band_index(spec.h, spec.w, n_bands)
    power = (mags**2).sum(axis=2)
    energies = np.zeros(n_bands)
    for b in range(n_bands):
        sel = bands == b
        if np.any(sel):
            energies[b] = np.sqrt(power[sel].sum())
    return np.concatenate([color, energies])


def isomap_embed(points, k_neighbors: int = 5, out_dim: int = 2) -> np.ndarray:
    """Classical Isomap: k-NN graph, all-pairs Dijkstra, metric MDS.

    Output is centered; orientation is fixed deterministically. Raises
    DisconnectedGraph when the neighborhood graph has several components.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch(f"points must be (n, d), got {X.shape}")
    n = X.shape[0]
    if out_dim not in (1, 2):
        raise UsageError(f"out_dim must be 1 or 2, got {out_dim}")
    if n < k_neighbors + 1:
        raise UsageError(f"need at least k_neighbors+1 = {k_neighbors + 1} points, got {n}")

    sq = (X * X).sum(axis=1)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    D = np.sqrt(D2)
    order = np.argsort(D, axis=1, kind="stable")
    rows, cols, vals = [], [], []
    for i in range(n):
        for j in order[i, 1 : k_neighbors + 1]:
            rows.append(i)
            cols.append(int(j))
            vals.append(D[i, j])
    graph = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    ncomp, _ = csgraph.connected_components(graph, directed=False)
    if ncomp > 1:
        raise DisconnectedGraph(
            f"neighborhood graph splits into {ncomp} components; raise k_neighbors"
        )
    geo = csgraph.shortest_path(graph, method="D", directed=False)

    G2 = geo**2
    row_mean = G2.mean(axis=1)
    B = -0.5 * (G2 - row_mean[:, None] - row_mean[None, :] + G2.mean())
    evals, evecs = np.linalg.eigh(B)
    top = np.argsort(evals)[::-1][:out_dim]
    coords = evecs[:, top] * np.sqrt(np.maximum(evals[top], 0.0))
    coords = coords - coords.mean(axis=0)
    for d in range(coords.shape[1]):
        pivot = int(np.argmax(np.abs(coords[:, d])))
        if coords[pivot, d] < 0:
            coords[:, d] = -coords[:, d]
    return coords


def _kmeans_once(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int) -> tuple[np.ndarray, np.ndarray, float]:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[j] = X[rng.integers(n)]
        else:
            centroids[j] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((X - centroids[j]) ** 2).sum(axis=1))
    assign = np.full(n, -1)
    for _ in range(max_iter):
        dists = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = dists.argmin(axis=1)
        for j in range(k):
            members = new_assign == j
            if not np.any(members):
                # repair: reseed the empty cluster at the point farthest from
                # every current centroid
                far = int(np.argmax(dists.min(axis=1)))
                centroids[j] = X[far]
                new_assign[far] = j
                members = new_assign == j
            centroids[j] = X[members].mean(axis=0)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    wcss = float(((X - centroids[assign]) ** 2).sum())
    return assign, centroids, wcss


def kmeans(points, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 300
           ) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iterations with plus-plus seeding; best of restarts by WCSS."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch(f"points must be (n, d), got {X.shape}")
    if X.shape[0] < k:
        raise UsageError(f"need at least k={k} points, got {X.shape[0]}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(restarts, 1)):
        assign, cents, wcss = _kmeans_once(X, k, rng, max_iter)
        if best is None or wcss < best[2]:
            best = (assign, cents, wcss)
    return best[0], best[1]


def check_standard(assignments, labels, std: ClusteringStandard | None = None) -> StandardReport:
    """Apply the two clustering rules to an assignment/label pairing."""
    std = std or ClusteringStandard()
    assignments = np.asarray(assignments)
    labels = list(labels)
    if len(assignments) != len(labels):
        raise ShapeMismatch(f"{len(assignments)} assignments for {len(labels)} labels")
    rule1_ok = True
    violations: list[str] = []
    clusters = {}
    for cl, lab in zip(assignments, labels):
        clusters.setdefault(int(cl), []).append(lab)
    if std.forbid_oil_mixing:
        for cl, labs in sorted(clusters.items()):
            has_oil = "oil" in labs
            has_other = any(l in ("chinese", "pen") for l in labs)
            if has_oil and has_other:
                rule1_ok = False
                violations.append(f"cluster {cl} mixes oil with chinese/pen")
    rule2_ok = True
    if std.require_small_cluster:
        sizes = [len(v) for v in clusters.values()]
        rule2_ok = any(s in (1, 2) for s in sizes)
        if not rule2_ok:
            violations.append(f"no cluster of size 1 or 2 (sizes: {sorted(sizes)})")
    return StandardReport(rule1_ok and rule2_ok, rule1_ok, rule2_ok, tuple(violations))


def _violation_score(assignments, labels, std: ClusteringStandard) -> int:
    # rule-violating same-cluster pairs, plus one when no small cluster exists
    assignments = np.asarray(assignments)
    score = 0
    if std.forbid_oil_mixing:
        for cl in np.unique(assignments):
            labs = [labels[i] for i in np.flatnonzero(assignments == cl)]
            n_oil = sum(1 for l in labs if l == "oil")
            n_cp = sum(1 for l in labs if l in ("chinese", "pen"))
            score += n_oil * n_cp
    if std.require_small_cluster:
        _, counts = np.unique(assignments, return_counts=True)
        if not any(int(s) in (1, 2) for s in counts):
            score += 1
    return score


def find_cmax(
    style_maps: dict[str, FeatureMap],
    labels: dict[str, str],
    std: ClusteringStandard | None = None,
    seed: int = 0,
    max_rounds: int = 64,
    n_bands: int = 16,
) -> tuple[int, ...]:
    """Largest channel subset whose k-means clustering satisfies the standard.

    Greedy backward elimination from the full channel set: while the standard
    fails, drop the channel whose removal minimizes the violation score (ties
    to the lowest channel id). Raises NotFound when the budget runs out.
    """
    std = std or ClusteringStandard()
    ids = sorted(style_maps)
    if len(ids) < 3:
        raise UsageError(f"need at least 3 styles, got {len(ids)}")
    lab_list = [labels[s] for s in ids]
    specs = {s: fft_forward(style_maps[s]) for s in ids}
    c = specs[ids[0]].c

    def cluster_with(channels: tuple[int, ...]) -> np.ndarray:
        vecs = np.stack([summary_vector(specs[s], channels, n_bands=n_bands) for s in ids])
        assign, _ = kmeans(vecs, std.k, seed=seed)
        return assign

    current = tuple(range(c))
    for _ in range(max_rounds):
        assign = cluster_with(current)
        if check_standard(assign, lab_list, std).passed:
            return current
        if len(current) <= 1:
            break
        best_score, best_channel = None, None
        for ch in current:
            cand = tuple(x for x in current if x != ch)
            score = _violation_score(cluster_with(cand), lab_list, std)
            if best_score is None or score < best_score:
                best_score, best_channel = score, ch
        current = tuple(x for x in current if x != best_channel)
    assign = cluster_with(current)
    if check_standard(assign, lab_list, std).passed:
        return current
    raise NotFound("no channel subset satisfying the clustering standard within the search budget")


def build_atlas(
    spec_by_style: dict[str, SpectrumRep],
    labels: dict[str, str],
    std: ClusteringStandard | None = None,
    k_neighbors: int = 5,
    seed: int = 0,
    full_vectors: bool = False,
    n_bands: int = 16,
) -> tuple[list[StylePoint], StandardReport]:
    """Embed every style to (u_color, u_stroke) scalars and cluster the spectra."""
    std = std or ClusteringStandard()
    ids = sorted(spec_by_style)
    if len(ids) < std.k:
        raise UsageError(f"need at least k={std.k} styles, got {len(ids)}")
    points = []
    for s in ids:
        vc, vs = spectrum_vectors(spec_by_style[s])
        points.append(StylePoint(style_id=s, label=labels.get(s, "other"), v_color=vc, v_stroke=vs))
    u_color = isomap_embed([p.v_color for p in points], k_neighbors, out_dim=1)[:, 0]
    u_stroke = isomap_embed([p.v_stroke for p in points], k_neighbors, out_dim=1)[:, 0]
    vecs = np.stack([
        summary_vector(spec_by_style[s], full=full_vectors, n_bands=n_bands) for s in ids
    ])
    assign, _ = kmeans(vecs, std.k, seed=seed)
    for p, uc, us, cl in zip(points, u_color, u_stroke, assign):
        p.u_color = float(uc)
        p.u_stroke = float(us)
        p.cluster = int(cl)
    report = check_standard(assign, [p.label for p in points], std)
    return points, report


# --- table / figure emission ---------------------------------------------------


def atlas_csv(points: list[StylePoint]) -> str:
    lines = ["style_id,label,u_color,u_stroke,cluster"]
    for p in points:
        lines.append(f"{p.style_id},{p.label},{p.u_color:.9g},{p.u_stroke:.9g},{p.cluster}")
    return "\n".join(lines) + "\n"


_SVG_COLORS = {"chinese": "#c0392b", "oil": "#2980b9", "pen": "#27ae60", "other": "#7f8c8d"}


def atlas_svg(points: list[StylePoint], size: int = 480, pad: int = 40) -> str:
    """Scatter of the (u_color, u_stroke) plane, one dot per style."""
    xs = np.array([p.u_color for p in points])
    ys = np.array([p.u_stroke for p in points])
    span_x = max(xs.max() - xs.min(), 1e-12)
    span_y = max(ys.max() - ys.min(), 1e-12)
    inner = size - 2 * pad
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="{pad}" y1="{size - pad}" x2="{size - pad}" y2="{size - pad}" stroke="#333"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{size - pad}" stroke="#333"/>',
        f'<text x="{size // 2}" y="{size - 8}" font-size="12" text-anchor="middle">u_color</text>',
        f'<text x="14" y="{size // 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {size // 2})">u_stroke</text>',
    ]
    for p in points:
        cx = pad + (p.u_color - xs.min()) / span_x * inner
        cy = size - pad - (p.u_stroke - ys.min()) / span_y * inner
        color = _SVG_COLORS.get(p.label, _SVG_COLORS["other"])
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="5" fill="{color}" opacity="0.85">'
                     f"<title>{p.style_id} ({p.label}, cluster {p.cluster})</title></circle>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
