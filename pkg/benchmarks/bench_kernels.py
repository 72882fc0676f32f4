"""Time the compiled and pure-Python kernels on the same inputs.

    python benchmarks/bench_kernels.py [--events 20000] [--points 400] [--repeat 3]

Prints one line per (kernel, backend) with the best wall time and the speed-up
over the Python fallback, and checks that both backends return identical output.
"""

import argparse
import time

import numpy as np

from culturemap.kernels import backends
from culturemap.poptics import core_distances


def gibbs_inputs(n_events, n_users=200, n_times=168, n_cats=40, K=6, seed=0):
    rng = np.random.default_rng(seed)
    users = np.sort(rng.integers(n_users, size=n_events)).astype(np.int32)
    times = rng.integers(n_times, size=n_events).astype(np.int32)
    cats = rng.integers(n_cats, size=n_events).astype(np.int32)
    z = rng.integers(K, size=n_events).astype(np.int32)
    n_uz = np.zeros((n_users, K), np.int32)
    n_tz = np.zeros((n_times, K), np.int32)
    n_zv = np.zeros((K, n_cats), np.int32)
    np.add.at(n_uz, (users, z), 1)
    np.add.at(n_tz, (times, z), 1)
    np.add.at(n_zv, (z, cats), 1)
    n_z = np.bincount(z, minlength=K).astype(np.int32)
    return users, times, cats, z, n_uz, n_tz, n_zv, n_z, rng.random(n_events)


def run_gibbs(mod, inputs, K=6):
    users, times, cats, z, n_uz, n_tz, n_zv, n_z, u = inputs
    state = [a.copy() for a in (z, n_uz, n_tz, n_zv, n_z)]
    start = time.perf_counter()
    mod.gibbs_sweep(users, times, cats, *state, 50.0 / K, 0.01, 50.0 / K, True, u)
    return time.perf_counter() - start, state


def run_optics(mod, xy, core):
    start = time.perf_counter()
    out = mod.optics_order(xy, core, np.inf)
    return time.perf_counter() - start, out


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t, out = fn()
        times.append(t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=20000)
    ap.add_argument("--points", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    mods = backends()
    if "cython" not in mods:
        print("compiled extension not built; timing the Python fallback only")

    gin = gibbs_inputs(args.events)
    rng = np.random.default_rng(1)
    xy = rng.normal(0, 500, (args.points, 2))
    core = np.ascontiguousarray(core_distances(xy, 0.1))

    cases = {
        f"gibbs_sweep ({args.events} events, K=6)": lambda m: best_of(lambda: run_gibbs(m, gin), args.repeat),
        f"optics_order ({args.points} points)": lambda m: best_of(lambda: run_optics(m, xy, core), args.repeat),
    }
    for name, case in cases.items():
        results = {b: case(m) for b, m in mods.items()}
        base = results["python"][0]
        outs = [r[1] for r in results.values()]
        same = all(all(np.array_equal(a, b) for a, b in zip(outs[0], o)) for o in outs[1:])
        for b, (t, _) in results.items():
            print(f"{name:36s} {b:7s} {t * 1e3:10.2f} ms   x{base / t:7.1f}")
        print(f"{name:36s} outputs identical across backends: {same}")


if __name__ == "__main__":
    main()
