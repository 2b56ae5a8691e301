"""Compare the compiled kernels with the numpy fallback.

Run ``python3 benchmarks/bench_kernels.py``.  Reports the raw grid kernels
and end-to-end measurements (component cache cleared between runs) for every
available backend, plus the largest relative difference between backends.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from isomass import _backend
from isomass.metrics import MetricModel
from isomass.quadrature import QuadratureConfig, annulus_volume, ball_volume, sphere_area

MODELS = {
    "schwarzschild": MetricModel.schwarzschild(-2.0),
    "conformal": MetricModel.conformal(0.5, 1.0),
    "diagonal": MetricModel.diagonal((0.3, -0.2, 0.1), 0.8),
}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_grids(repeat):
    rho = np.linspace(0.1, 5.0, 48)
    mu = np.linspace(-0.99, 0.99, 48)
    frame = np.eye(3)
    center = np.array([0.0, 0.0, 20.0])
    rows = []
    for name, model in MODELS.items():
        for kernel in ("ball_grid", "sphere_grid"):
            res = {}
            for bname, mod in _backend.BACKENDS.items():
                if kernel == "ball_grid":
                    call = lambda: mod.ball_grid(model.kernel_code, model.kernel_params,
                                                 center, frame, rho, mu, 64)
                else:
                    call = lambda: mod.sphere_grid(model.kernel_code, model.kernel_params,
                                                   center, frame, 5.0, mu, 256, True)
                res[bname] = best_of(call, repeat)
            rows.append((f"{kernel}[{name}]", res))
    return rows


def bench_end_to_end(repeat):
    cfg = QuadratureConfig(rel_tol=1e-10)
    rows = []
    for name, model in MODELS.items():
        cases = {
            "ball_volume": lambda b: ball_volume(model, (30, 10, -5), 12.0, cfg, backend=b).value,
            "sphere_area": lambda b: sphere_area(model, (30, 10, -5), 12.0, cfg,
                                                 method="general", backend=b).value,
            "annulus_volume": lambda b: annulus_volume(model, 500.0, cfg, backend=b).value,
        }
        for label, fn in cases.items():
            res = {b: best_of(lambda b=b: fn(b), repeat) for b in _backend.BACKENDS}
            rows.append((f"{label}[{name}]", res))
    return rows


def show(title, rows):
    names = list(_backend.BACKENDS)
    print(f"\n{title}")
    print(f"{'case':32s}" + "".join(f"{n + ' [ms]':>14s}" for n in names)
          + ("   speedup   max rel diff" if len(names) > 1 else ""))
    for label, res in rows:
        line = f"{label:32s}" + "".join(f"{res[n][0] * 1e3:14.3f}" for n in names)
        if len(names) > 1:
            a, b = (np.asarray(res[n][1], dtype=float) for n in ("python", "cython"))
            diff = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)))
            line += f"{res['python'][0] / res['cython'][0]:10.1f}x   {diff:.2e}"
        print(line)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    print(f"default backend: {_backend.NAME}; available: {', '.join(_backend.BACKENDS)}")
    show("grid kernels", bench_grids(args.repeat))
    show("end-to-end measures (rel_tol 1e-10)", bench_end_to_end(max(1, args.repeat // 2)))


if __name__ == "__main__":
    main()
