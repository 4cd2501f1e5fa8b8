"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so the comparison does not depend on
HRNAV_PURE_PYTHON. Each kernel is checked for bit-identical output before it
is timed.
"""

import argparse
import math
import sys
import timeit

import numpy as np

from hrnav import _kernels_py as py

try:
    from hrnav import _kernels as cy
except ImportError:
    sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation` first")

BOUNDS = np.array([0.0, 0.0, 10.0, 10.0])
CIRCLES = np.array([[3.5, 3.0, 0.8], [6.5, 6.5, 1.0], [2.0, 8.0, 0.5]])
RECTS = np.array([[5.0, 1.5, 6.0, 4.0], [2.0, 6.0, 4.0, 7.0]])


def cases(n_params: int):
    rng = np.random.default_rng(0)
    params = rng.normal(size=n_params)
    grad = rng.normal(size=n_params)
    online = rng.normal(size=n_params)

    def adam(mod):
        p, m, v = params.copy(), np.zeros(n_params), np.zeros(n_params)
        return lambda: mod.adam_update(p, grad, m, v, 0.9, 0.999, 1e-3, 1e-8)

    def soft(mod):
        t = params.copy()
        return lambda: mod.soft_update(t, online, 0.005)

    return {
        "raycast (20 beams)": lambda mod: (lambda: mod.raycast(1.0, 1.0, 0.7, BOUNDS, CIRCLES, RECTS, 20, math.pi, 7.0)),
        "surface_distance": lambda mod: (lambda: mod.surface_distance(4.4, 3.1, BOUNDS, CIRCLES, RECTS)),
        f"adam_update ({n_params} params)": adam,
        f"soft_update ({n_params} params)": soft,
    }


def check_identical():
    a = py.raycast(1.0, 1.0, 0.7, BOUNDS, CIRCLES, RECTS, 20, math.pi, 7.0)
    b = cy.raycast(1.0, 1.0, 0.7, BOUNDS, CIRCLES, RECTS, 20, math.pi, 7.0)
    assert np.asarray(a).tobytes() == np.asarray(b).tobytes(), "raycast backends disagree"
    assert py.surface_distance(4.4, 3.1, BOUNDS, CIRCLES, RECTS) == cy.surface_distance(4.4, 3.1, BOUNDS, CIRCLES, RECTS)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--params", type=int, default=20_000, help="parameter vector length for the optimizer kernels")
    args = ap.parse_args(argv)
    check_identical()
    print(f"{'kernel':32s} {'python us':>11s} {'cython us':>11s} {'speedup':>8s}")
    for name, make in cases(args.params).items():
        t = {}
        for label, mod in (("py", py), ("cy", cy)):
            fn = make(mod)
            number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
            t[label] = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number * 1e6
        print(f"{name:32s} {t['py']:11.2f} {t['cy']:11.2f} {t['py'] / t['cy']:7.1f}x")


if __name__ == "__main__":
    main()
