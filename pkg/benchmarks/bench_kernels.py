#!/usr/bin/env python3
"""Benchmark the compiled kernel extension against the numpy fallback.

Kernel mode times each hot kernel on attention-shaped inputs; train mode
times whole optimizer steps on the backend this process imported (set
MMFUSION_BACKEND=pure|compiled and rerun to compare end to end).
"""

import argparse
import time

import numpy as np

from mmfusion import _kernels_numpy as pure

try:
    from mmfusion import _ckernels as compiled
except ImportError:
    compiled = None


def best_of(fn, repeats=7, inner=20):
    fn()  # warmup
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - started) / inner)
    return best


def kernel_cases(rng):
    rows = np.ascontiguousarray(rng.normal(size=(2048, 64)))
    rows_g = np.ascontiguousarray(rng.normal(size=(2048, 64)))
    narrow = np.ascontiguousarray(rng.normal(size=(4096, 9)))
    gain = rng.normal(size=64)
    bias = rng.normal(size=64)
    flat = np.ascontiguousarray(rng.normal(size=262_144))
    flat_g = np.ascontiguousarray(rng.normal(size=262_144))

    def adamw(impl):
        p = np.ascontiguousarray(rng.normal(size=262_144))
        m = np.zeros_like(p)
        v = np.zeros_like(p)
        return lambda: impl.adamw_update(p, flat_g, m, v, 1e-3, 0.9, 0.999, 1e-8,
                                         0.01, 0.1, 0.001)

    ln_out = pure.layer_norm_fwd(rows, gain, bias, 1e-5)
    xhat = np.ascontiguousarray(ln_out[1])
    inv_std = ln_out[2]
    soft = np.ascontiguousarray(pure.softmax_fwd(rows))

    return [
        ("softmax_fwd 2048x64", lambda impl: lambda: impl.softmax_fwd(rows)),
        ("softmax_bwd 2048x64", lambda impl: lambda: impl.softmax_bwd(soft, rows_g)),
        ("log_softmax_fwd 4096x9", lambda impl: lambda: impl.log_softmax_fwd(narrow)),
        ("layer_norm_fwd 2048x64", lambda impl: lambda: impl.layer_norm_fwd(rows, gain, bias, 1e-5)),
        ("layer_norm_bwd 2048x64", lambda impl: lambda: impl.layer_norm_bwd(rows_g, xhat, inv_std, gain)),
        ("gelu_fwd 262144", lambda impl: lambda: impl.gelu_fwd(flat)),
        ("gelu_bwd 262144", lambda impl: lambda: impl.gelu_bwd(flat, flat_g)),
        ("adamw_update 262144", adamw),
    ]


def run_kernels():
    rng = np.random.default_rng(0)
    print(f"{'kernel':26s} {'numpy':>12s} {'compiled':>12s} {'speedup':>9s}")
    for name, make in kernel_cases(rng):
        t_pure = best_of(make(pure))
        if compiled is None:
            print(f"{name:26s} {t_pure * 1e6:10.1f}us {'n/a':>12s} {'n/a':>9s}")
            continue
        t_comp = best_of(make(compiled))
        print(
            f"{name:26s} {t_pure * 1e6:10.1f}us {t_comp * 1e6:10.1f}us "
            f"{t_pure / t_comp:8.2f}x"
        )


def run_train_steps(steps):
    from mmfusion import backend_name
    from mmfusion.data import batch_from_samples, generate_synthetic
    from mmfusion.models import ModelConfig, build_model
    from mmfusion.optim import AdamW
    from mmfusion.tensor import Tape

    dataset = generate_synthetic(0, 256)
    batch = batch_from_samples(dataset.samples[:64], 9)
    config = ModelConfig(
        family="single_stream_bitransformer",
        num_classes=9,
        vocab_size=len(dataset.vocab),
        encoder_layers=2,
        heads=4,
        model_dim=64,
        ff_dim=128,
        max_text_len=12,
        num_regions=4,
        region_feature_dim=16,
        dropout=0.0,
    )
    model = build_model(config, seed=0)
    opt = AdamW(model.parameters())

    def step():
        with Tape() as tape:
            tape.backward(model.training_loss(batch))
        opt.step(1e-3)
        opt.zero_grad()

    step()  # warmup
    started = time.perf_counter()
    for _ in range(steps):
        step()
    elapsed = time.perf_counter() - started
    print(
        f"backend={backend_name()}: {steps} optimizer steps in {elapsed:.2f}s "
        f"({steps / elapsed:.1f} steps/s, batch 64)"
    )


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--train-steps", type=int, default=0,
                        help="also time N whole training steps on the active backend")
    args = parser.parse_args()
    run_kernels()
    if args.train_steps:
        run_train_steps(args.train_steps)
