"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Every case is run on both backends with the same inputs; results are checked
for agreement before timings are reported.
"""
import argparse
import json
import timeit

import numpy as np

from wasstime._backend import KERNEL_BOUNDED, KERNEL_LINEAR, implementations


def cases(rng):
    for n in (16, 64, 256):
        C = rng.uniform(size=(n, n))
        yield f"lsap n={n}", "lsap", (C,), lambda out, C=C: float(C[np.arange(C.shape[0]), np.asarray(out)].sum())
    for m, n in ((16, 12), (64, 48), (128, 96)):
        a, b, C = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(n)), rng.uniform(size=(m, n))
        yield (f"simplex {m}x{n}", "transport_simplex", (a, b, C),
               lambda out, C=C: float(np.sum(out[2] * C[np.asarray(out[0]), np.asarray(out[1])])))
    for n in (64, 512):
        x, w = rng.normal(size=(n, 2)), np.full(n, 1.0 / n)
        for code, name in ((KERNEL_LINEAR, "linear"), (KERNEL_BOUNDED, "bounded")):
            yield f"interaction {name} n={n}", "interaction_sum", (x, x, w, code), lambda out: np.asarray(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write timings here")
    args = ap.parse_args()
    impls = implementations()
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'case':<28}" + "".join(f"{k:>14}" for k in impls) + f"{'speedup':>10}")
    for label, fn, inputs, summary in cases(rng):
        results, times = {}, {}
        for name, mod in impls.items():
            f = getattr(mod, fn)
            results[name] = summary(f(*inputs))
            times[name] = min(timeit.repeat(lambda f=f: f(*inputs), number=1, repeat=args.repeat))
        ref = results["python"]
        for name, val in results.items():
            if not np.allclose(val, ref, atol=1e-10):
                raise SystemExit(f"{label}: backend {name} disagrees with the fallback")
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{label:<28}" + "".join(f"{times[k] * 1e3:>12.3f}ms" for k in impls) + f"{speed:>9.1f}x")
        rows.append({"case": label, "seconds": times, "speedup": speed})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
