#!/usr/bin/env python3
"""Benchmark the kinematics kernels: compiled extension vs NumPy fallback.

Usage: python benchmarks/bench_kinematics.py [--repeats N]

Times forward kinematics, the geometric Jacobian, damped-least-squares
velocity resolution, and full IK solves on both bundled arms, for every
importable backend. The workloads mirror the hot paths: per-tick control
(fk + dls_qdot at 100 Hz) and the IK round-trip sweep from the acceptance
suite.
"""

import argparse
import time

import numpy as np

import reconcell.kinematics as K
from reconcell.robot import ArmModel


def time_op(fn, repeats):
    # warm up once, then best-of-3 batches
    fn()
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def bench_backend(name, mod, dh, lo, hi, repeats):
    rng = np.random.default_rng(7)
    qs = rng.uniform(-1.5, 1.5, size=(64, dh.shape[0]))
    twist = np.array([0.05, -0.02, 0.03, 0.0, 0.0, 0.1])

    results = {}
    idx = {"i": 0}

    def next_q():
        idx["i"] = (idx["i"] + 1) % len(qs)
        return qs[idx["i"]]

    results["fk"] = time_op(lambda: mod.fk(dh, next_q()), repeats)
    results["jacobian"] = time_op(lambda: mod.jacobian(dh, next_q()), repeats)
    results["dls_qdot"] = time_op(lambda: mod.dls_qdot(dh, next_q(), twist, 0.002), repeats)

    def ik_once():
        q0 = next_q()
        target = mod.fk(dh, np.clip(q0 + 0.02, lo, hi))
        mod.ik_solve(dh, q0, target, lo, hi)

    results["ik_solve"] = time_op(ik_once, max(1, repeats // 10))
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    backends = K.available_backends()
    print(f"backends available: {', '.join(backends)} (active: {K.BACKEND})\n")

    for arm_name in ("desk6", "desk7"):
        model = ArmModel.bundled(arm_name)
        dh = model.dh_array()
        lo, hi = model.lower(), model.upper()
        print(f"== {arm_name} ({model.dof} DOF), {args.repeats} reps ==")
        rows = {}
        for bname, mod in backends.items():
            rows[bname] = bench_backend(bname, mod, dh, lo, hi, args.repeats)
        ops = ["fk", "jacobian", "dls_qdot", "ik_solve"]
        header = f"{'op':<10}" + "".join(f"{b:>14}" for b in rows)
        if len(rows) == 2:
            header += f"{'speedup':>10}"
        print(header)
        for op in ops:
            line = f"{op:<10}"
            vals = []
            for bname in rows:
                v = rows[bname][op]
                vals.append(v)
                line += f"{v * 1e6:>12.2f}us"
            if len(vals) == 2:
                slow, fast = max(vals), min(vals)
                line += f"{slow / fast:>9.1f}x"
            print(line)
        print()


if __name__ == "__main__":
    main()
