"""Compare the compiled flux kernel with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 64 128 256 512] [--repeat 20]

Prints per-call time for each backend, the speedup and the max deviation.
"""
import argparse
import timeit

import numpy as np

from thinfilm import _kernels_py

try:
    from thinfilm import _core
except ImportError:
    _core = None


def field(nx, seed=0):
    rng = np.random.default_rng(seed)
    x = np.linspace(0, 2 * np.pi, nx, endpoint=False)
    u = 1.0 + 0.3 * np.sin(x)[None, :] * np.cos(x)[:, None]
    return u + 0.01 * rng.standard_normal((nx, nx))


def bench(nx, n, repeat):
    u = field(nx)
    h = 1.0 / nx
    eps = 1e-10
    t_py = min(timeit.repeat(lambda: _kernels_py.tendency(u, h, n, eps), number=1, repeat=repeat))
    row = {"nx": nx, "n": n, "python_ms": 1e3 * t_py}
    if _core is not None:
        t_c = min(timeit.repeat(lambda: _core.tendency(u, h, n, eps), number=1, repeat=repeat))
        a, ma = _kernels_py.tendency(u, h, n, eps)
        b, mb = _core.tendency(u, h, n, eps)
        row.update(cython_ms=1e3 * t_c, speedup=t_py / t_c,
                   max_rel_dev=float(np.abs(a - b).max() / np.abs(a).max()))
    return row


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512])
    p.add_argument("--exponents", type=float, nargs="+", default=[1.0, 2.0, 2.5])
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args(argv)
    if _core is None:
        print("compiled core not importable; timing the numpy fallback only")
    print(f"{'nx':>5} {'n':>4} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8} {'max rel dev':>12}")
    for nx in args.sizes:
        for n in args.exponents:
            r = bench(nx, n, args.repeat)
            if "cython_ms" in r:
                print(f"{nx:5d} {n:4g} {r['python_ms']:10.3f} {r['cython_ms']:10.3f} "
                      f"{r['speedup']:8.2f} {r['max_rel_dev']:12.2e}")
            else:
                print(f"{nx:5d} {n:4g} {r['python_ms']:10.3f}")


if __name__ == "__main__":
    main()
