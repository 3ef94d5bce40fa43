"""Compare the compiled and numpy kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--sizes 8 16 24] [--repeat 5]

Both backends are imported directly, so the environment switch is not needed.
Timings are the best of ``repeat`` runs, in milliseconds per call.
"""

import argparse
import timeit

import numpy as np

from yamabe_lab import BackgroundSpec, build_background
from yamabe_lab import _kernels_py

try:
    from yamabe_lab import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _cases(bg, u):
    ip, ix, w, vol, r0 = bg.kernel_arrays
    law = bg.law
    p, c, k, m = law.curvature_exponent, law.coupling, law.flow_rate, law.volume_exponent
    return {
        "laplacian_apply": lambda mod: mod.laplacian_apply(ip, ix, w, vol, u),
        "curvature": lambda mod: mod.curvature(ip, ix, w, vol, r0, u, p, c),
        "rk4_step": lambda mod: mod.rk4_step(ip, ix, w, vol, r0, u, 1e-4, p, c, k, m, True),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 24])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = {"python": _kernels_py}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    print(f"{'kernel':<16}{'N^3':>8}" + "".join(f"{b + ' ms':>14}" for b in backends) + f"{'speedup':>10}")
    for N in args.sizes:
        bg = build_background(BackgroundSpec(kind="synthetic", N=N, r0=-6.0, r0_bump_amplitude=2.0))
        u = 1.0 + 0.1 * np.random.default_rng(0).random(bg.num_vertices)
        for name, fn in _cases(bg, u).items():
            ref = fn(_kernels_py)
            times = {}
            for b, mod in backends.items():
                out = fn(mod)
                a, r = (out[0], ref[0]) if isinstance(out, tuple) else (out, ref)
                assert np.allclose(a, r, rtol=1e-12, atol=1e-12), f"{b} disagrees on {name}"
                number = max(1, int(2000 / N))
                best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat))
                times[b] = 1e3 * best / number
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{name:<16}{N**3:>8}" + "".join(f"{times[b]:>14.4f}" for b in backends)
                  + f"{speed:>10.1f}")


if __name__ == "__main__":
    main()
