"""Compare the compiled and pure-numpy kernel backends.

Times each elementwise kernel on arrays sized like the padded grid, then a
full stochastic step and one diagnostic sample at m = 64.

    python benchmarks/bench_kernels.py [--m 64] [--repeat 5] [--json out.json]
"""

import argparse
import json
import timeit

import numpy as np

from nlsflux import diagnostics as dg, integrator as it, kernels, model as md
from nlsflux.verify import random_band_field


def _best(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def kernel_cases(n, rng):
    z = rng.normal(size=n) + 1j * rng.normal(size=n)
    y = rng.normal(size=n) + 1j * rng.normal(size=n)
    w = rng.random(n)
    out = np.empty_like(z)
    idx = np.arange(0, n, 2, dtype=np.intp)
    return {
        "cubic": lambda: kernels.cubic(z, out),
        "scatter": lambda: kernels.scatter(z, idx, idx, 0.5, out),
        "weighted_norm2": lambda: kernels.weighted_norm2(z, w),
        "weighted_im_inner": lambda: kernels.weighted_im_inner(z, y, w),
        "weighted_re_inner": lambda: kernels.weighted_re_inner(z, y, w),
        "axpy": lambda: kernels.axpy(0.3 - 0.1j, z, y, out),
    }


def end_to_end_cases(m):
    p = md.SimParams(nu=0.1, sigma=0.5, m=m, dt=0.01)
    ens = md.build_forcing(p.grid)
    st = it.Stepper(p, ens)
    diag = dg.ShellDiagnostics(ens, p.sigma)
    u = random_band_field(p.grid, np.random.default_rng(0), decay=4.0, amp=0.2)
    s = it.TrajectoryState(u, 0.0, np.random.default_rng(1), p)
    return {"stochastic_step": lambda: st.stochastic(s), "diagnostic_sample": lambda: diag.sample(s.u.coeff)}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    n = (2 * args.m) ** 2
    results = {}
    original = kernels.BACKEND
    for b in backends:
        kernels.use_backend(b)
        rng = np.random.default_rng(0)
        res = {k: _best(f, 200, args.repeat) for k, f in kernel_cases(n, rng).items()}
        res.update({k: _best(f, 20, args.repeat) for k, f in end_to_end_cases(args.m).items()})
        results[b] = res
    kernels.use_backend(original)

    names = list(results[backends[0]])
    print(f"m = {args.m}, kernel arrays of {n} complex entries; best of {args.repeat}, microseconds")
    header = f"{'operation':<20}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for k in names:
        row = f"{k:<20}" + "".join(f"{results[b][k] * 1e6:>12.1f}" for b in backends)
        if len(backends) == 2:
            row += f"{results['numpy'][k] / results['cython'][k]:>9.2f}x"
        print(row)
    if len(backends) == 1:
        print("compiled backend not built; only the numpy fallback was timed")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"m": args.m, "results": results}, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
