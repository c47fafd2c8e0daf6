"""Time the bundled scenarios under the numba and pure-numpy backends.

The backend is fixed at import time, so each one runs in its own interpreter.

    python benchmarks/bench_backends.py [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from mlsync import BACKEND
from mlsync.config import bundled_scenario
from mlsync.harness import run_coupled, run_single

repeat = int(sys.argv[1])
out = {"backend": BACKEND}
for name, runner in (("paper-set-10", run_single), ("paper-set-11", run_coupled)):
    cfg = bundled_scenario(name)
    t0 = time.perf_counter()
    result = runner(cfg)
    first = time.perf_counter() - t0
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = runner(cfg)
        best = min(best, time.perf_counter() - t0)
    traj = result[0] if isinstance(result, tuple) else result
    out[name] = {"first": first, "best": best, "final": traj.final_state.tolist()}
print(json.dumps(out))
"""


def run_backend(backend, repeat):
    env = dict(os.environ, MLSYNC_BACKEND=backend)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    results = [run_backend(b, args.repeat) for b in ("numba", "numpy")]
    print(f"{'scenario':<14}{'backend':<9}{'first call [s]':>16}{'best [s]':>12}")
    for name in ("paper-set-10", "paper-set-11"):
        for res in results:
            r = res[name]
            print(f"{name:<14}{res['backend']:<9}{r['first']:>16.4f}{r['best']:>12.4f}")
        a, b = (res[name]["final"] for res in results)
        diff = max(abs(x - y) for x, y in zip(a, b))
        speedup = results[1][name]["best"] / results[0][name]["best"]
        print(f"{'':<14}speed-up {speedup:.1f}x, max final-state difference {diff:.3g}")


if __name__ == "__main__":
    main()
