"""Compare the compiled kernels with the pure-Python fallback.

Run from the repository root::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best wall time over ``--repeat`` runs and the largest
difference between the two backends' outputs relative to the output peak.
"""
import argparse
import timeit

import numpy as np

from difftomo import kernels


def cases(rng):
    for batch, m in ((168, 7), (960, 16), (1280, 36)):
        # jittered roots of unity keep the systems well conditioned, so the
        # backend difference measures the kernels and not the problem
        z = np.exp(2j * np.pi * (np.arange(m) + rng.uniform(-0.2, 0.2, (batch, m))) / m)
        b = rng.standard_normal((batch, m)) + 1j * rng.standard_normal((batch, m))
        yield f"bjorck_pereyra batch={batch} m={m}", "bjorck_pereyra", (z, b)
    for n in (7, 16, 24):
        p = 2 * n - 1
        g = rng.standard_normal((n, n, n)) + 1j * rng.standard_normal((n, n, n))
        yield f"dirichlet_line_sums n={n} p={p}", "dirichlet_line_sums", (g, 0.37, -0.61, p)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled extension not built; only the Python backend is available")
    rng = np.random.default_rng(0)
    names = sorted(impls)
    print(f"{'case':42s}" + "".join(f"{n:>12s}" for n in names) + f"{'speedup':>10s}{'rel diff':>11s}")
    for label, fn, data in cases(rng):
        times, outs = {}, {}
        for name in names:
            f = getattr(impls[name], fn)
            outs[name] = f(*data)
            number = 1 if name == "python" else 10
            times[name] = min(timeit.repeat(lambda: f(*data), number=number, repeat=args.repeat)) / number
        speed = times["python"] / times["cython"] if "cython" in times else 1.0
        ref = outs["python"]
        diff = max(float(np.abs(outs[a] - ref).max() / np.abs(ref).max()) for a in names)
        print(f"{label:42s}" + "".join(f"{times[n] * 1e3:10.3f}ms" for n in names) + f"{speed:9.1f}x{diff:11.1e}")


if __name__ == "__main__":
    main()
