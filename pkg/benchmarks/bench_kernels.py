"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 200]

Also times one full local GMM fit and one decomposition under whichever
path IRGS_NUMBA selects, since those are what training actually calls.
"""
import argparse
import time

import numpy as np

from irgs import _accel, kernels, pipeline, recon
from irgs.local_gmm import GmmParams, fit_lgmm
from irgs.localization import ButterworthParams


def best_of(fn, repeat):
    fn()  # warm up (and compile)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times), float(np.median(times))


def row(name, np_t, nb_t):
    speedup = np_t[1] / nb_t[1] if nb_t[1] > 0 else float("inf")
    print(f"{name:<28}{np_t[1] * 1e6:>12.1f}{nb_t[1] * 1e6:>12.1f}{speedup:>9.2f}x")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--size", type=int, default=32)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    n = args.size

    plane = rng.uniform(size=(n, n))
    feats = rng.uniform(size=(150, 5))   # a typical active window
    means = rng.uniform(size=(2, 5))
    variances = rng.uniform(0.01, 1.0, size=(2, 5))
    resp, _ = kernels.gmm_e_step_np(feats, means, variances)

    print(f"median microseconds over {args.repeat} runs (numba {'on' if _accel.USE_NUMBA else 'off'})")
    print(f"{'kernel':<28}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for k in (3, 5, 9):
        row(f"box_sum k={k} {n}x{n}",
            best_of(lambda: kernels.box_sum_np(plane, k), args.repeat),
            best_of(lambda: kernels.box_sum_nb(plane, k), args.repeat))
    row("gmm_e_step 150x5",
        best_of(lambda: kernels.gmm_e_step_np(feats, means, variances), args.repeat),
        best_of(lambda: kernels.gmm_e_step_nb(feats, means, variances), args.repeat))
    row("gmm_m_step 150x5",
        best_of(lambda: kernels.gmm_m_step_np(feats, resp, 1e-4), args.repeat),
        best_of(lambda: kernels.gmm_m_step_nb(feats, resp, 1e-4), args.repeat))
    row("gmm_em 20 iters 150x5",
        best_of(lambda: kernels.gmm_em_np(feats, resp, 20, 1e-4), args.repeat),
        best_of(lambda: kernels.gmm_em_nb(feats, resp, 20, 1e-4), args.repeat))
    size = 64 * 4 * n * n
    prm, grad = rng.normal(size=size), rng.normal(size=size)
    mom, var = np.zeros(size), np.zeros(size)
    adam_args = (1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)
    row(f"adam_update {size}",
        best_of(lambda: kernels.adam_update_np(prm, grad, mom, var, *adam_args), args.repeat),
        best_of(lambda: kernels.adam_update_nb(prm, grad, mom, var, *adam_args), args.repeat))

    img = rng.uniform(size=(n, n, 3))
    t = best_of(lambda: fit_lgmm(img, (n // 2, n // 2), ButterworthParams(), GmmParams()),
                max(1, args.repeat // 10))
    print(f"\nfit_lgmm 20 EM iterations    {t[1] * 1e3:.2f} ms (dispatched path)")
    model = recon.init_model(n, n, 64, 8, "autoencoder")
    cfg = pipeline.PipelineConfig(K=3)
    t = best_of(lambda: pipeline.decompose(model, img, cfg), max(1, args.repeat // 10))
    print(f"decompose K=3                {t[1] * 1e3:.2f} ms (dispatched path)")


if __name__ == "__main__":
    main()
