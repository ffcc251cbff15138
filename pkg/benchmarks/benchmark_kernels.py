"""Timing comparison of the compiled and pure-numpy kernel paths.

The kernel path is fixed at import, so each side runs in its own
subprocess with ``ATR_PURE_NUMPY`` set accordingly.  Run from the
repository root:

    python3 benchmarks/benchmark_kernels.py [--seconds 2.0]

Reported: control steps per second for a full riding scene (contacts,
PD torques, transporter and rider integration at 10 substeps per
control tick), plus a contact-kernel microbenchmark.
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, os, time
import numpy as np
from atr.env import EnvConfig, RidingEnv
from atr.kernels import USING_NUMBA, compute_contacts
from atr.rider import robot_preset, stance_state
from atr.transporter import deck_preset

seconds = float(os.environ["BENCH_SECONDS"])
env = RidingEnv(EnvConfig(dr_mode="off", seed=3))
action = np.zeros(12)

# warm-up triggers compilation on the numba path
for _ in range(20):
    result = env.step(action)
    if result.done:
        env.reset()

start = time.perf_counter()
steps = 0
while time.perf_counter() - start < seconds:
    result = env.step(action)
    if result.done:
        env.reset()
    steps += 1
env_rate = steps / (time.perf_counter() - start)

deck = deck_preset("small").packed()
rider = robot_preset("a1")
rider_state = stance_state(rider)
rider_packed = rider.packed()
deck_state = np.zeros(15)
deck_state[2] = 0.15
out_force = np.zeros((4, 3))
out_flag = np.zeros(4)
out_foot_world = np.zeros((4, 3))
out_foot_body = np.zeros((4, 3))
out_jac = np.zeros((4, 3, 3))

start = time.perf_counter()
calls = 0
while time.perf_counter() - start < seconds / 2:
    compute_contacts(deck_state, deck, rider_state, rider_packed, 0.002,
                     out_force, out_flag, out_foot_world, out_foot_body,
                     out_jac)
    calls += 1
contact_rate = calls / (time.perf_counter() - start)

print(json.dumps({"numba": USING_NUMBA, "control_steps_per_s": env_rate,
                  "contact_calls_per_s": contact_rate}))
"""


def run_side(pure_numpy, seconds):
    env = dict(os.environ)
    env["ATR_PURE_NUMPY"] = "1" if pure_numpy else "0"
    env["BENCH_SECONDS"] = str(seconds)
    out = subprocess.run([sys.executable, "-c", WORKER], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seconds", type=float, default=2.0,
                        help="measurement window per benchmark")
    args = parser.parse_args()

    results = {}
    for label, pure in (("numba", False), ("pure numpy", True)):
        print(f"running {label} side...", file=sys.stderr)
        results[label] = run_side(pure, args.seconds)

    print(f"{'path':<12}{'control steps/s':>18}{'contact calls/s':>18}")
    for label, r in results.items():
        print(f"{label:<12}{r['control_steps_per_s']:>18.0f}"
              f"{r['contact_calls_per_s']:>18.0f}")
    speedup = (results["numba"]["control_steps_per_s"]
               / results["pure numpy"]["control_steps_per_s"])
    print(f"numba speedup on the full control step: {speedup:.1f}x")


if __name__ == "__main__":
    main()
