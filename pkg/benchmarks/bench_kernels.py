"""Compare the compiled LSTM-cell kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--batch 128] [--width 128] [--repeat 200]

Reports per-call times for the forward and backward kernels, the largest
absolute difference between the two backends, and the time of one full
training-step gradient on a synthetic batch under each backend.
"""

import argparse
import time
import timeit

import numpy as np

from hmtl import _kernels_py, kernels


def _compiled():
    try:
        from hmtl import _kernels
    except ImportError:
        return None
    return _kernels


def bench_cell(impl, gates, c_prev, dh, dc, repeat):
    fwd = min(timeit.repeat(lambda: impl.lstm_cell_forward(gates, c_prev), number=repeat, repeat=3)) / repeat
    _, _, act, tc = impl.lstm_cell_forward(gates, c_prev)
    bwd = min(timeit.repeat(lambda: impl.lstm_cell_backward(dh, dc, c_prev, act, tc), number=repeat, repeat=3)) / repeat
    return fwd, bwd


def bench_step(impl, n_subjects, seed):
    from hmtl.cohort import SynthConfig, generate_synthetic_cohort, select_cohort
    from hmtl.data import collate, prepare_cohort
    from hmtl.model import ModelConfig, init_params
    from hmtl.preprocess import fit_scaler
    from hmtl.training import LossWeights, batch_gradients

    cohort = select_cohort(generate_synthetic_cohort(SynthConfig(n_subjects=n_subjects, seed=seed)))
    items = prepare_cohort(cohort, fit_scaler(cohort))
    batch = collate(items[:128])
    cfg = ModelConfig(seed=seed)
    params = init_params(cfg)
    saved = kernels.lstm_cell_forward, kernels.lstm_cell_backward
    kernels.lstm_cell_forward, kernels.lstm_cell_backward = impl.lstm_cell_forward, impl.lstm_cell_backward
    try:
        t0 = time.perf_counter()
        batch_gradients(batch, params, cfg, LossWeights(), rng=np.random.default_rng(seed))
        return time.perf_counter() - t0
    finally:
        kernels.lstm_cell_forward, kernels.lstm_cell_backward = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=128)
    ap.add_argument("--width", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--skip-step", action="store_true", help="only time the cell kernels")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    B, H = args.batch, args.width
    gates = rng.normal(size=(B, 4 * H))
    c_prev = rng.normal(size=(B, H))
    dh, dc = rng.normal(size=(B, H)), rng.normal(size=(B, H))

    backends = [("python", _kernels_py)]
    compiled = _compiled()
    if compiled is not None:
        backends.append(("cython", compiled))
    else:
        print("compiled extension not built; timing the fallback only")

    print(f"LSTM cell, batch={B} width={H}")
    print(f"{'backend':<8} {'forward us':>11} {'backward us':>12} {'step s':>8}")
    for name, impl in backends:
        fwd, bwd = bench_cell(impl, gates, c_prev, dh, dc, args.repeat)
        step = float("nan") if args.skip_step else bench_step(impl, 200, args.seed)
        print(f"{name:<8} {fwd * 1e6:>11.1f} {bwd * 1e6:>12.1f} {step:>8.3f}")

    if compiled is not None:
        a = _kernels_py.lstm_cell_forward(gates, c_prev)
        b = compiled.lstm_cell_forward(gates, c_prev)
        fdiff = max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))
        ga = _kernels_py.lstm_cell_backward(dh, dc, c_prev, a[2], a[3])
        gb = compiled.lstm_cell_backward(dh, dc, c_prev, b[2], b[3])
        bdiff = max(float(np.max(np.abs(x - y))) for x, y in zip(ga, gb))
        print(f"max |python - cython|: forward {fdiff:.2e}, backward {bdiff:.2e}")


if __name__ == "__main__":
    main()
