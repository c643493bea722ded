#!/usr/bin/env python3
"""Time the compiled convolution kernels against the numpy fallback.

Run after installing:  python3 benchmarks/bench_backends.py
"""
import time

import numpy as np

from waveanom.backend import _convkernels_py as pyk

try:
    from waveanom.backend import _convkernels as cyk
except ImportError:
    cyk = None


def timeit(fn, *args, repeat=200):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_kernels():
    rng = np.random.default_rng(0)
    cases = [
        ("tiny grid (GAN step)", (32, 1, 12, 4), (1, 3, 4, 4)),
        ("ecg grid", (32, 12, 12, 4), (3, 3, 4, 4)),
        ("wider channels", (16, 8, 16, 8), (3, 3, 8, 8)),
    ]
    print(f"{'case':24} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for name, xs, ks in cases:
        x = rng.normal(size=xs)
        k = rng.normal(size=ks)
        t_py = timeit(pyk.conv2d_forward, x, k, 1, 1)
        if cyk is None:
            print(f"{name:24} {t_py * 1e6:10.1f}us {'n/a':>12} {'n/a':>9}")
            continue
        t_cy = timeit(cyk.conv2d_forward, x, k, 1, 1)
        print(f"{name:24} {t_py * 1e6:10.1f}us {t_cy * 1e6:10.1f}us {t_py / t_cy:8.2f}x")


def bench_convlstm_step():
    import waveanom.backend as backend
    from waveanom import tensor as T
    from waveanom.recurrent import ConvLstmCell, ConvLstmParams

    rng = np.random.default_rng(1)
    params = ConvLstmParams.init((1, 12), 1, 8, (1, 3), rng)
    cell = ConvLstmCell(params)
    x = T.Tensor(rng.normal(size=(32, 1, 12, 1)))

    def step():
        state = cell.step(x, cell.initial_state(x))
        loss = T.mean(T.mul(state.h, state.h))
        T.gradients(loss, params.tensors())

    t = timeit(step, repeat=50)
    print(f"\nconvlstm step fwd+bwd (batch 32, 1x12 grid, 8 ch) "
          f"[{backend.backend_name()} backend]: {t * 1e3:.2f} ms")


if __name__ == "__main__":
    if cyk is None:
        print("compiled kernels unavailable; showing the python backend only\n")
    bench_kernels()
    bench_convlstm_step()
