"""Compare the numba and pure-numpy backends of the hot kernels.

Run with ``python3 benchmarks/bench_kernels.py``.  Both backends produce
bitwise-identical output; the script checks that before timing.
"""
import argparse
import time

import numpy as np

from atlasfluct import rng as _rng
from atlasfluct._accel import HAVE_NUMBA
from atlasfluct.dynamics import integrate
from atlasfluct.model import ModelParams
from atlasfluct.rng import RngSpec
from atlasfluct.samplers import nu_batch


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_integrator(n, replicas, steps, repeat):
    p = ModelParams(a=1.0, gamma=0.5, n_particles=n, dt=1e-3, horizon=steps * 1e-3)
    spec = RngSpec(1)
    reps = np.arange(replicas)
    x0 = nu_batch(p, n, spec, reps)
    keys = spec.noise_keys(reps, n)
    rec = np.array([0, steps])
    out = {}
    for backend in ("numba", "numpy"):
        if backend == "numba" and not HAVE_NUMBA:
            continue
        call = lambda: integrate(x0, keys, steps, p.dt, p.gamma, rec, ranks=[0, 100], backend=backend)
        call()  # compile / warm caches
        out[backend] = _best(call, repeat) / (n * replicas * steps)
    if len(out) == 2:
        a = integrate(x0, keys, steps, p.dt, p.gamma, rec, backend="numba")[0]
        b = integrate(x0, keys, steps, p.dt, p.gamma, rec, backend="numpy")[0]
        assert np.array_equal(a, b), "backends disagree"
    return out


def bench_normals(count, repeat):
    keys = RngSpec(2).keys(0, np.arange(count, dtype=np.uint64), 0)
    out = {"numpy": _best(lambda: _rng.normals(keys, np.uint64(7)), repeat) / count}
    if HAVE_NUMBA:
        import numba

        @numba.njit
        def loop(keys, out):
            for i in range(keys.size):
                out[i] = _rng.stream_normal(keys[i], np.uint64(7))

        buf = np.empty(count)
        loop(keys, buf)
        out["numba"] = _best(lambda: loop(keys, buf), repeat) / count
        assert np.array_equal(buf, _rng.normals(keys, np.uint64(7)))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--replicas", type=int, default=8)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':<28}{'backend':<10}{'ns / unit':>12}")
    for name, res in (("euler step (particle-step)", bench_integrator(args.n, args.replicas,
                                                                     args.steps, args.repeat)),
                      ("ziggurat normal (draw)", bench_normals(10 ** 6, args.repeat))):
        for backend, sec in res.items():
            print(f"{name:<28}{backend:<10}{sec * 1e9:>12.2f}")
        if len(res) == 2:
            print(f"{'':<28}{'speedup':<10}{res['numpy'] / res['numba']:>11.1f}x")


if __name__ == "__main__":
    main()
