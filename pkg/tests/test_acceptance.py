"""Acceptance gate: one test per release criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Tolerances are pinned here and nowhere else.
"""

import itertools
import time
import warnings

import numpy as np
from scipy.stats import spearmanr

from oracles import direct_dft2, match_sources, planted_style_maps, synthetic_sources
from stylebasis.atlas import check_standard, find_cmax, isomap_embed, kmeans, summary_vector
from stylebasis.control import (
    ControlParams,
    ControlSpec,
    Intervene,
    SingleBasis,
    StyleBank,
    apply_control,
    interpolate,
    mix,
)
from stylebasis.latent import ica_decompose, ica_project_back, pca_decompose, pca_project_back
from stylebasis.network import builtin_extractor
from stylebasis.pipeline import run_transfer
from stylebasis.spectral import dct_forward, dct_inverse, fft_forward, fft_inverse
from stylebasis.tensors import FeatureMap, ImageTensor, read_array, write_array
from stylebasis.transfer import (
    LossConfig,
    OptOptions,
    gram,
    gram_targets_for_image,
    objective_and_grad,
    transfer,
)


def verdict(name: str, ok: bool, detail: str = "") -> None:
    line = f"[acceptance] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def seeded_maps(count=20):
    sizes = list(itertools.product((5, 8, 17, 32), (5, 8, 17, 32), (3, 8, 16)))
    rng = np.random.default_rng(2024)
    picks = [sizes[i % len(sizes)] for i in range(0, count * 2, 2)]
    return [FeatureMap(rng.standard_normal(s).astype(np.float32)) for s in picks[:count]]


def test_round_trip_all_methods():
    t0 = time.perf_counter()
    maps = seeded_maps(20)
    worst = {"fft": 0.0, "dct": 0.0, "pca": 0.0, "ica": 0.0}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for fm in maps:
            worst["fft"] = max(worst["fft"], float(np.abs(fft_inverse(fft_forward(fm)).data - fm.data).max()))
            worst["dct"] = max(worst["dct"], float(np.abs(dct_inverse(dct_forward(fm)).data - fm.data).max()))
            rep = pca_decompose(fm)
            worst["pca"] = max(worst["pca"], float(np.abs(pca_project_back(rep, rep.H).data - fm.data).max()))
            irep = ica_decompose(fm, n_extreme=1, seed=17)
            rel = float(
                np.linalg.norm(ica_project_back(irep).data - fm.data) / np.linalg.norm(fm.data)
            )
            worst["ica"] = max(worst["ica"], rel)
    elapsed = time.perf_counter() - t0
    ok = (
        worst["fft"] <= 1e-4 and worst["dct"] <= 1e-4 and worst["pca"] <= 1e-4
        and worst["ica"] <= 1e-2 and elapsed < 30.0
    )
    verdict(
        "round-trip f_inv(f(F))",
        ok,
        f"fft {worst['fft']:.2e}, dct {worst['dct']:.2e}, pca {worst['pca']:.2e}, "
        f"ica rel {worst['ica']:.2e}, {elapsed:.1f}s",
    )


def test_spectral_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for h in range(1, 18):
        for w in range(1, 18):
            fm = FeatureMap(rng.standard_normal((h, w, 2)).astype(np.float32))
            spec = fft_forward(fm)
            for ch in range(2):
                oracle = direct_dft2(fm.data[:, :, ch].astype(np.float64))
                worst = max(worst, float(np.abs(spec.coeffs[:, :, ch] - oracle).max()))
    parseval_worst = 0.0
    for h, w in ((5, 8), (17, 17), (32, 5)):
        fm = FeatureMap(rng.standard_normal((h, w, 3)).astype(np.float32))
        spec = dct_forward(fm)
        for ch in range(3):
            a = np.linalg.norm(fm.data[:, :, ch].astype(np.float64))
            b = np.linalg.norm(spec.coeffs[:, :, ch].astype(np.float64))
            parseval_worst = max(parseval_worst, abs(a - b) / max(a, 1.0))
    ok = worst <= 1e-4 and parseval_worst <= 1e-3
    verdict("spectral oracle (direct DFT + Parseval)", ok,
            f"dft diff {worst:.2e}, parseval {parseval_worst:.2e}")


def test_ica_recovery():
    t0 = time.perf_counter()
    worst = 1.0
    for seed in (101, 202, 303):
        rng = np.random.default_rng(seed)
        truth = synthetic_sources(4, 4096, rng)
        A = rng.standard_normal((8, 4))
        mixed = A @ truth + 0.01 * rng.standard_normal((8, 4096))
        fm = FeatureMap(mixed.T.reshape(64, 64, 8).astype(np.float32))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = ica_decompose(fm, n_extreme=2, seed=seed)
        scores = match_sources(rep.S.astype(np.float64), truth)
        worst = min(worst, min(scores))
    elapsed = time.perf_counter() - t0
    ok = worst >= 0.95 and elapsed < 10.0
    verdict("ica source recovery", ok, f"min |pearson| {worst:.3f}, {elapsed:.1f}s")


def test_gradient_suite():
    ex = builtin_extractor()
    rng = np.random.default_rng(11)
    sample = 30
    worst = {"content": 0.0, "style": 0.0, "total": 0.0}
    for _ in range(10):
        x = rng.standard_normal((16, 16, 3)) * 0.3
        ct = ex.forward_arrays(rng.standard_normal((16, 16, 3)) * 0.3, ["relu1_1"])[0]["relu1_1"]
        gt = {
            "relu2_1": gram(
                ex.forward_arrays(rng.standard_normal((16, 16, 3)) * 0.3, ["relu2_1"])[0]["relu2_1"]
            )
        }
        cases = {
            "content": LossConfig(alpha=1.0, beta=0.0, content_layer="relu1_1", style_layers=("relu2_1",)),
            "style": LossConfig(alpha=0.0, beta=1.0, content_layer="relu1_1", style_layers=("relu2_1",)),
            "total": LossConfig(alpha=1.0, beta=1e3, content_layer="relu1_1", style_layers=("relu2_1",)),
        }
        coords = [tuple(rng.integers(0, s) for s in x.shape) for _ in range(sample)]
        h = 1e-5
        for name, cfg in cases.items():
            _, _, _, grad = objective_and_grad(ex, x, cfg, ct, gt)
            fd = np.zeros(sample)
            an = np.zeros(sample)
            for i, idx in enumerate(coords):
                xp, xm = x.copy(), x.copy()
                xp[idx] += h
                xm[idx] -= h
                lp = objective_and_grad(ex, xp, cfg, ct, gt)[0]
                lm = objective_and_grad(ex, xm, cfg, ct, gt)[0]
                fd[i] = (lp - lm) / (2 * h)
                an[i] = grad[idx]
            rel = float(np.linalg.norm(an - fd) / max(np.linalg.norm(fd), 1e-12))
            worst[name] = max(worst[name], rel)
    ok = all(v <= 1e-3 for v in worst.values())
    verdict("gradient suite vs central differences", ok,
            f"content {worst['content']:.1e}, style {worst['style']:.1e}, total {worst['total']:.1e}")


def test_degeneration_bit_identical():
    rng = np.random.default_rng(31)
    ex = builtin_extractor()
    content = ImageTensor(rng.random((32, 32, 3)).astype(np.float32))
    style = ImageTensor(rng.random((32, 32, 3)).astype(np.float32))
    cfg = LossConfig(alpha=1.0, beta=1e3, content_layer="relu2_1", style_layers=("relu2_1",))
    opt = OptOptions(iters=50, init="noise", seed=77)
    baseline, hist_a = run_transfer(content, style, ex, cfg, opt, control=None)
    via_pipeline, hist_b = run_transfer(content, style, ex, cfg, opt, control=ControlSpec("fft"))
    ok = baseline.data.tobytes() == via_pipeline.data.tobytes() and hist_a == hist_b
    verdict("degeneration to plain transfer is bit-identical", ok)


def test_control_identities():
    rng = np.random.default_rng(5)
    fails = []
    tol = {"fft": 1e-4, "dct": 1e-4, "pca": 1e-4, "ica": 1e-2}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for method in ("fft", "dct", "pca", "ica"):
            bank = StyleBank(method, ControlParams(n_extreme=2, seed=9))
            fm = FeatureMap(rng.standard_normal((12, 12, 6)).astype(np.float32))
            bank.add("s", fm)
            out = apply_control(bank, "s", ControlSpec(method, (Intervene("all", 1.0),), bank.params))
            if method == "ica":
                err = float(np.linalg.norm(out.data - fm.data) / np.linalg.norm(fm.data))
            else:
                err = float(np.abs(out.data - fm.data).max())
            if err > tol[method]:
                fails.append(f"{method} intervene(1) {err:.2e}")

        bank = StyleBank("fft")
        fm = FeatureMap(rng.standard_normal((10, 14, 5)).astype(np.float32))
        bank.add("s", fm)
        dc_map = apply_control(bank, "s", ControlSpec("fft", (SingleBasis("dc"),)))
        means = fm.data.astype(np.float64).mean(axis=(0, 1))
        if float(np.abs(dc_map.data - means[None, None, :]).max()) > 1e-4:
            fails.append("single-basis dc vs channel means")

        for method in ("fft", "dct", "ica"):
            bank = StyleBank(method, ControlParams(n_extreme=2, seed=3))
            fm = FeatureMap(rng.standard_normal((12, 12, 6)).astype(np.float32))
            bank.add("s", fm)
            out = mix(bank, "s", "s", 1.0)
            if method == "ica":
                err = float(np.linalg.norm(out.data - fm.data) / np.linalg.norm(fm.data))
            else:
                err = float(np.abs(out.data - fm.data).max())
            if err > tol[method]:
                fails.append(f"{method} self-mix {err:.2e}")

        a = FeatureMap(rng.standard_normal((6, 6, 3)).astype(np.float32))
        b = FeatureMap(rng.standard_normal((6, 6, 3)).astype(np.float32))
        if interpolate([a, b], [1.0, 0.0]).data.tobytes() != a.data.tobytes():
            fails.append("interpolate (1,0) not exact")
    verdict("control identities", not fails, "; ".join(fails))


def test_convergence():
    ex = builtin_extractor()
    rng = np.random.default_rng(13)
    content = ImageTensor(rng.random((32, 32, 3)).astype(np.float32))
    cfg = LossConfig(alpha=1.0, beta=0.0, content_layer="relu2_1", style_layers=("relu2_1",))
    targets = {"relu2_1": ex.forward(ex.center(content), ["relu2_1"])["relu2_1"]}
    _, hist = transfer(content, targets, ex, cfg, OptOptions(iters=500, init="noise", seed=21))
    content_ratio = hist[-1][1] / hist[0][1]

    cfg0 = LossConfig(alpha=0.0, beta=1e3, content_layer="relu2_1", style_layers=("relu2_1",))
    gt = gram_targets_for_image(ex, content, cfg0)
    _, hist0 = transfer(content, None, ex, cfg0, OptOptions(iters=100, init="content"), gram_targets=gt)
    stays_zero = all(h[0] == 0.0 for h in hist0)
    ok = content_ratio < 0.01 and stays_zero
    verdict("optimizer convergence", ok,
            f"content ratio {content_ratio:.4f}, zero-style stays zero: {stays_zero}")


def test_atlas_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(55)
    maps, labels = planted_style_maps(rng)
    ids = sorted(maps)
    vecs = np.stack([summary_vector(fft_forward(maps[s]), None) for s in ids])
    assign, _ = kmeans(vecs, 3, seed=1)
    groups_ok = True
    for label in ("chinese", "pen", "oil"):
        members = {int(assign[i]) for i, s in enumerate(ids) if labels[s] == label}
        groups_ok = groups_ok and len(members) == 1
    groups_ok = groups_ok and len(set(assign.tolist())) == 3
    report = check_standard(assign, [labels[s] for s in ids])
    cmax = find_cmax(maps, labels, seed=1)
    cvecs = np.stack([summary_vector(fft_forward(maps[s]), cmax) for s in ids])
    cassign, _ = kmeans(cvecs, 3, seed=1)
    cmax_ok = check_standard(cassign, [labels[s] for s in ids]).passed

    arc_rng = np.random.default_rng(66)
    t = np.linspace(0, np.pi / 2, 50)
    pts = np.stack([np.cos(t), np.sin(t)], axis=1) + 0.002 * arc_rng.standard_normal((50, 2))
    emb = isomap_embed(pts, k_neighbors=5, out_dim=1)[:, 0]
    rho = float(abs(spearmanr(emb, t).statistic))
    elapsed = time.perf_counter() - t0
    ok = groups_ok and report.passed and cmax_ok and rho >= 0.99 and elapsed < 20.0
    verdict("atlas suite", ok,
            f"groups exact: {groups_ok}, standard: {report.passed}, cmax passes: {cmax_ok}, "
            f"spearman {rho:.4f}, {elapsed:.1f}s")


def test_format_round_trips(tmp_path):
    rng = np.random.default_rng(99)
    failures = 0
    for i in range(1000):
        ndim = int(rng.integers(1, 5))
        dims = [int(rng.integers(1, 6)) for _ in range(ndim)]
        if rng.random() < 0.5:
            arr = rng.standard_normal(dims).astype(np.float32)
        else:
            arr = (rng.standard_normal(dims) + 1j * rng.standard_normal(dims)).astype(np.complex64)
        p = tmp_path / "t.sft"
        write_array(arr, p)
        first = p.read_bytes()
        back = read_array(p)
        write_array(back, p)
        if back.tobytes() != arr.tobytes() or p.read_bytes() != first:
            failures += 1
    verdict("tensor format 1000x bit-exact round trip", failures == 0, f"{failures} failures")
