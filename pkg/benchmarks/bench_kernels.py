"""Compare the compiled and numpy kernel backends on identical inputs.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is timed on
both backends (best of ``--repeat`` runs) and the outputs are checked for
agreement before timings are reported.
"""

import argparse
import time

import numpy as np

from hpcycle import kernels
from hpcycle.hadamard import group_elements, pack_columns, pack_weights
from hpcycle.simulator import NoiseModel, bloch_rotation, build_sequence, pulse_angles
from hpcycle.schemes import build_hpc


def census_case(n):
    cols = group_elements(n)
    dim = cols.shape[1]
    wpos, wneg, wsum = pack_weights(np.ones(dim, dtype=np.int64))
    return (pack_columns(cols), wpos, wneg, wsum, dim)


def count_case(n, q):
    return census_case(n) + (q,)


def propagate_case(m, ensemble):
    seq = build_sequence("CPMG", m, tau=1e-6)
    noise = NoiseModel(t1=1e-2, t2=1e-4, detuning_sigma=1e6, flip_error=0.05, seed=1)
    beta, phi = pulse_angles(seq, noise, np.asarray(build_hpc(m).rows))
    rot = np.ascontiguousarray(bloch_rotation(beta, phi))
    readout = seq.readout_times()
    return (rot, np.ascontiguousarray(seq.times), readout, noise.detunings(ensemble), 1e2, 1e4)


CASES = {
    "census n=4": ("subset_sum_census", lambda: census_case(4)),
    "census n=5": ("subset_sum_census", lambda: census_case(5)),
    "count n=5 q=6": ("subset_sum_count", lambda: count_case(5, 6)),
    "propagate hpc m=16 E=200": ("propagate", lambda: propagate_case(16, 200)),
}


def best_time(fn, args, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--quick", action="store_true", help="skip the n=5 census")
    args = parser.parse_args()

    available = kernels.backends()
    print(f"backends: {', '.join(available)}")
    print(f"{'case':<28}" + "".join(f"{name:>14}" for name in available) + f"{'speedup':>10}")
    for label, (kernel, make) in CASES.items():
        if args.quick and label == "census n=5":
            continue
        inputs = make()
        times, outputs = {}, {}
        for name, ns in available.items():
            times[name], outputs[name] = best_time(getattr(ns, kernel), inputs, args.repeat)
        ref = np.asarray(outputs["python"])
        for name, out in outputs.items():
            if not np.allclose(np.asarray(out), ref, rtol=1e-12, atol=1e-12):
                raise SystemExit(f"{label}: backend {name} disagrees with python")
        speedup = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{label:<28}" + "".join(f"{times[n]:>13.4f}s" for n in available) + f"{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
