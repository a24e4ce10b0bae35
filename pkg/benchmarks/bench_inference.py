"""Time coordinate-descent inference with the compiled and numpy kernels.

    python3 benchmarks/bench_inference.py --batch 50 --repeat 5
"""

import argparse
import time

import numpy as np

from liftnet._backend import get_kernels
from liftnet.inference import solve
from liftnet.netspec import NetworkSpec, init_weights


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--layers", default="784-64-64-10")
    p.add_argument("--nonlin", default="relu")
    p.add_argument("--batch", type=int, nargs="+", default=[1, 50, 500])
    p.add_argument("--sweeps", type=int, default=15)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    spec = NetworkSpec.build(args.layers, args.nonlin, 0.125)
    w = init_weights(spec, seed=0)
    rng = np.random.default_rng(0)
    try:
        get_kernels("cython")
        backends = ("python", "cython")
    except ImportError:
        print("compiled kernels not built; timing the numpy kernels only")
        backends = ("python",)

    print(f"{spec.describe()}, {args.sweeps} sweeps, best of {args.repeat}")
    print(f"{'batch':>6} {'mode':>8} " + " ".join(f"{b:>12}" for b in backends) + "  speedup  max|diff|")
    for n in args.batch:
        x = rng.uniform(0, 1, (n, spec.layer_dims[0]))
        y = np.eye(spec.layer_dims[-1])[rng.integers(0, spec.layer_dims[-1], n)]
        for mode, target in (("free", None), ("clamped", y)):
            times, outs = [], []
            for b in backends:
                times.append(best_time(lambda: solve(spec, w, x, target, args.sweeps, backend=b),
                                       args.repeat))
                outs.append(solve(spec, w, x, target, args.sweeps, backend=b)[0])
            diff = 0.0
            if len(outs) == 2:
                diff = max(float(np.max(np.abs(a - b))) for a, b in zip(outs[0].z, outs[1].z))
            speed = f"{times[0] / times[-1]:7.1f}x" if len(times) == 2 else "      -"
            print(f"{n:>6} {mode:>8} " + " ".join(f"{t * 1e3:10.2f}ms" for t in times)
                  + f"  {speed}  {diff:.1e}")


if __name__ == "__main__":
    main()
