"""Acceptance gate: one PASS/FAIL line per criterion (see the terminal summary)."""

import math
import time

import numpy as np
from scipy.special import ndtri

from fmixcert.augment import FourierMixConfig, fouriermix
from fmixcert.benchgen import BenchmarkSpec, default_grid, generate_f_image
from fmixcert.certify import (CertConfig, acr_from_results, certified_radius, certify_dataset,
                              sample_counts, smoothed_certify)
from fmixcert.cli import main
from fmixcert.datasets import synth_shapes
from fmixcert.model import MlpClassifier
from fmixcert.numerics import (Rng, clopper_pearson_lower, fft2, hermitian_residual,
                               ifft2_with_residual, std_normal_cdf)
from fmixcert.spectral import fourier_basis
from fmixcert.train import HcrConfig, TrainConfig, total_loss, train

NO_AFFINE = dict(rotation=0.0, translate=0.0, scale=(1.0, 1.0), shear=0.0)


def test_cp_all_successes(acceptance):
    t0 = time.perf_counter()
    got = clopper_pearson_lower(100, 100, 0.001)
    dt = time.perf_counter() - t0
    err = abs(got - 0.001 ** (1 / 100))
    acceptance("cp_all_successes", err < 1e-6 and dt < 1.0,
               f"lower={got:.10f} err={err:.2e} ({dt:.3f}s)")


def test_radius_formula(acceptance):
    t0 = time.perf_counter()
    ps = np.round(np.arange(0.51, 1.0, 0.01), 2).tolist() + [0.995, 0.999]
    worst = 0.0
    for sigma in (0.12, 0.25, 0.5, 1.0):
        for p in ps:
            worst = max(worst, abs(certified_radius(sigma, p, 1 - p) - sigma * ndtri(p)))
    zero = certified_radius(0.25, 0.5, 0.5)
    dt = time.perf_counter() - t0
    acceptance("radius_formula", worst < 1e-7 and zero == 0.0 and dt < 1.0,
               f"max err={worst:.2e} over {len(ps)} p values, radius(0.5,0.5)={zero} ({dt:.3f}s)")


def test_certification_soundness(acceptance):
    d = 0.3

    def halfplane(batch):
        # class 0 iff the first coordinate stays below d; the clean point is the origin
        return (batch[:, 0] >= d).astype(np.int64)

    cfg = CertConfig(sigma=0.25, n0=100, n=10_000, alpha=0.05)
    t0 = time.perf_counter()
    radii = [smoothed_certify(halfplane, np.zeros(2), cfg, Rng(seed)).radius for seed in range(200)]
    dt = time.perf_counter() - t0
    frac = np.mean(np.array(radii) <= d)
    acceptance("certification_soundness", frac >= 0.93 and dt < 120,
               f"{frac:.1%} of 200 radii <= {d} (max {max(radii):.4f}) ({dt:.1f}s)")


def test_bruteforce_oracle(acceptance):
    sigma, n = 0.25, 10_000
    ta, tb = 0.5, 0.3

    def threshold(batch):
        return ((batch[:, 0, 0] > ta) & (batch[:, 1, 1] > tb)).astype(np.int64)

    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        x = np.random.default_rng(seed).uniform(size=(2, 2))
        # independent pixels: the class-1 region is a product of two half-lines
        p1 = float((1 - std_normal_cdf((ta - x[0, 0]) / sigma)) * (1 - std_normal_cdf((tb - x[1, 1]) / sigma)))
        counts = np.pad(sample_counts(threshold, x, n, sigma, Rng(seed)), (0, 2))
        p_a = max(p1, 1 - p1)
        p_hat = counts[int(p1 >= 0.5)] / n
        band = 4 * math.sqrt(p_a * (1 - p_a) / n)
        worst = max(worst, abs(p_hat - p_a) / band)
    dt = time.perf_counter() - t0
    acceptance("bruteforce_oracle", worst <= 1.0 and dt < 60,
               f"worst |p_hat - p_A| = {worst:.2f} of the 4-sigma band over 50 seeds ({dt:.1f}s)")


def test_fourier_basis(acceptance):
    d = 8
    worst_norm, bad = 0.0, []
    for i in range(-(d // 2), d // 2):
        for j in range(-(d // 2), d // 2):
            u = fourier_basis(i, j, d).pixels
            worst_norm = max(worst_norm, abs(np.linalg.norm(u) - 1))
            coeffs = np.fft.fft2(u)
            support = {tuple(c) for c in np.argwhere(np.abs(coeffs) > 1e-9)}
            if support != {(i % d, j % d), ((-i) % d, (-j) % d)}:
                bad.append((i, j))
    acceptance("fourier_basis", worst_norm < 1e-9 and not bad,
               f"max |norm-1|={worst_norm:.1e}, support mismatches={bad} over {d * d} coords")


def test_fouriermix_identity_limit(acceptance):
    cfg = FourierMixConfig(amp_severities=(1e-12,), phase_severities=(1e-12,), **NO_AFFINE)
    g = np.random.default_rng(7)
    worst = worst_res = 0.0
    for i in range(100):
        x = g.uniform(size=(16, 16, 3))
        worst = max(worst, np.max(np.abs(fouriermix(x, cfg, Rng(i)) - x)))
        worst_res = max(worst_res, ifft2_with_residual(fft2(x))[1], hermitian_residual(fft2(x).coeffs))
    for i in range(100):
        # residue of the default (non-limit) augmentation's spectra
        y = fouriermix(g.uniform(size=(16, 16, 3)), FourierMixConfig(), Rng(1000 + i))
        worst_res = max(worst_res, hermitian_residual(fft2(y).coeffs))
    acceptance("fouriermix_identity_limit", worst < 1e-5 and worst_res < 1e-9,
               f"max |out-in|={worst:.1e}, max Hermitian residue={worst_res:.1e} (100 images)")


def test_benchmark_norm_contract(acceptance):
    grid = default_grid()
    images = synth_shapes(5, 32, 4, Rng(21)).images
    worst = 0.0
    for ci, spec in enumerate(grid):
        for ii, x in enumerate(images):
            _, achieved = generate_f_image(x, spec, Rng(0).derive(ci).derive(ii))
            worst = max(worst, abs(achieved - spec.eps))
    acceptance("benchmark_norm_contract", len(grid) == 192 and worst < 1e-4,
               f"{len(grid)} cells x {len(images)} images, max |norm-eps|={worst:.1e}")


def test_gradient_fidelity(acceptance):
    g = np.random.default_rng(0)
    model = MlpClassifier(g.normal(size=(2, 2)), g.normal(size=2) * 0.1,
                          g.normal(size=(2, 2)), g.normal(size=2) * 0.1)
    n_params = sum(p.size for p in model.params())
    x0 = np.array([[[0.3], [0.8]]])
    cfg = HcrConfig(k=2, s=2, lam=40.0, eta=10.0)
    ev = total_loss(model, x0, 1, cfg, Rng(3))
    grads = model.backward(ev.inputs, ev.dlogits)
    worst, h = 0.0, 1e-5
    for param, grad in zip(model.params(), grads.arrays()):
        for idx in np.ndindex(param.shape):
            old = param[idx]
            param[idx] = old + h
            up = total_loss(model, x0, 1, cfg, Rng(3)).total
            param[idx] = old - h
            down = total_loss(model, x0, 1, cfg, Rng(3)).total
            param[idx] = old
            fd = (up - down) / (2 * h)
            worst = max(worst, abs(fd - grad[idx]) / max(abs(fd), abs(grad[idx]), 1e-6))
    acceptance("gradient_fidelity", n_params == 12 and worst < 1e-4,
               f"{n_params} params, max relative error={worst:.1e}")


TREND_EPOCHS = 20
TREND_CERT = CertConfig(sigma=0.25, n0=100, n=10_000, alpha=0.001)


def test_directional_trend(acceptance):
    t0 = time.perf_counter()
    tr = synth_shapes(100, 32, 4, Rng(101), split="train")
    te = synth_shapes(10, 32, 4, Rng(202), split="test")
    low = BenchmarkSpec(2, 2.0, 8.0)
    corrupted = np.stack([generate_f_image(x, low, Rng(303).derive(i))[0]
                          for i, x in enumerate(te.images)])
    per_seed = []
    for seed in range(3):
        acrs = {}
        for mode in ("none", "hcr"):
            init = MlpClassifier.init(32 * 32 * 3, 4, 128, Rng(seed, 1))
            model, _ = train(init, tr.images, tr.labels,
                             TrainConfig(epochs=TREND_EPOCHS, seed=seed, mode=mode))
            res = certify_dataset(model, corrupted, TREND_CERT, Rng(seed, 2))
            acrs[mode] = acr_from_results(res, te.labels)
        per_seed.append((acrs["none"], acrs["hcr"]))
        print(f"  seed {seed}: gaussian ACR={acrs['none']:.4f}  fouriermix+hcr ACR={acrs['hcr']:.4f}")
    dt = time.perf_counter() - t0
    gauss, hcr = np.mean(per_seed, axis=0)
    all_worse = all(b < a for a, b in per_seed)
    seeds = " ".join(f"[{a:.3f} vs {b:.3f}]" for a, b in per_seed)
    acceptance("directional_trend", not all_worse and dt < 1800,
               f"mean gaussian={gauss:.4f} fouriermix+hcr={hcr:.4f}; per seed {seeds} ({dt:.0f}s)")


def run_cli(argv):
    assert main(argv) == 0


def test_thread_determinism(acceptance, tmp_path):
    ckpt = tmp_path / "m.mlpc"
    synth = ["--synth", "3", "--synth-size", "32", "--synth-classes", "4"]
    run_cli(["train", *synth, "--out", str(ckpt), "--seed", "0", "--epochs", "2",
             "--hidden", "16", "--quiet", "--threads", "1"])
    outputs = {}
    for threads in ("1", "8"):
        cert = tmp_path / f"cert{threads}.csv"
        run_cli(["certify", "--checkpoint", str(ckpt), *synth, "--n", "2000", "--out", str(cert),
                 "--seed", "5", "--threads", threads])
        bench = tmp_path / f"bench{threads}"
        run_cli(["genbench", *synth, "--limit", "4", "--out", str(bench), "--seed", "5",
                 "--threads", threads])
        files = {p.name: p.read_bytes() for p in sorted(bench.iterdir())}
        outputs[threads] = (cert.read_bytes(), files)
    same_cert = outputs["1"][0] == outputs["8"][0]
    same_bench = outputs["1"][1] == outputs["8"][1]
    acceptance("thread_determinism", same_cert and same_bench,
               f"certify identical={same_cert}, genbench identical={same_bench} "
               f"({len(outputs['1'][1])} files)")
