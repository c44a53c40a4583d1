#!/usr/bin/env python3
"""Benchmark the sequential propagation kernels: numba vs pure numpy.

The workload is the neutron-scale rotating-field model stepped with
midpoint exponentials over one full field rotation, the same inner loop
the propagator and the million-step stability test run. Reports steps/s
per backend and cross-checks that both produce the same final state.

Usage:
    python benchmarks/bench_propagation.py [--steps N] [--runs R] [--json]
"""

import argparse
import json
import time

import numpy as np

from qgplab import kernels
from qgplab.models import RotatingFieldParams, rotating_field

WARMUP_RUNS = 1


def prepare(steps):
    p = RotatingFieldParams.from_frequencies(721e3, 7.21e3, 5.0)
    model = rotating_field(p)
    edges = np.linspace(0.0, p.period, steps + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    hs = model.h_stack(mids)
    su2 = (
        np.ascontiguousarray(0.5 * (hs[:, 0, 0].real + hs[:, 1, 1].real)),
        np.ascontiguousarray(hs[:, 0, 1].real),
        np.ascontiguousarray(-hs[:, 0, 1].imag),
        np.ascontiguousarray(0.5 * (hs[:, 0, 0].real - hs[:, 1, 1].real)),
        np.diff(edges),
    )
    evals, evecs = np.linalg.eigh(hs)
    _, f0 = model.eig_at(0.0)
    psi0 = np.ascontiguousarray(f0[:, 1])
    return su2, (evals, evecs, np.diff(edges)), psi0


def time_kernel(fn, args, runs):
    for _ in range(WARMUP_RUNS):
        out = fn(*args)
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=1_000_000)
    parser.add_argument("--runs", type=int, default=3)
    parser.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    args = parser.parse_args()

    su2_args, eig_args, psi0 = prepare(args.steps)
    results = {"steps": args.steps, "runs": args.runs, "backends": {}}
    finals = {}

    for backend in ("numpy", "numba"):
        if kernels.set_backend(backend) != backend:
            results["backends"][backend] = {"available": False}
            continue
        best_su2, out_su2 = time_kernel(
            kernels.evolve_su2, (*su2_args, psi0), args.runs
        )
        best_eig, out_eig = time_kernel(
            kernels.evolve_eig, (*eig_args, psi0), args.runs
        )
        finals[backend] = out_su2[-1]
        drift = float(np.abs(np.linalg.norm(out_su2, axis=1) - 1.0).max())
        results["backends"][backend] = {
            "available": True,
            "su2_seconds": best_su2,
            "su2_steps_per_s": args.steps / best_su2,
            "eig_seconds": best_eig,
            "eig_steps_per_s": args.steps / best_eig,
            "norm_drift": drift,
            "su2_vs_eig_final": float(np.abs(out_su2[-1] - out_eig[-1]).max()),
        }

    if len(finals) == 2:
        results["cross_backend_final_diff"] = float(
            np.abs(finals["numpy"] - finals["numba"]).max()
        )

    kernels.set_backend("auto")

    if args.json:
        print(json.dumps(results, indent=2))
        return

    print(f"propagation kernels, {args.steps:,} steps (best of {args.runs})")
    print(f"{'backend':<8} {'su2 [s]':>10} {'su2 steps/s':>14} {'eig [s]':>10} {'eig steps/s':>14} {'norm drift':>12}")
    for backend, rec in results["backends"].items():
        if not rec.get("available"):
            print(f"{backend:<8} {'unavailable':>10}")
            continue
        print(
            f"{backend:<8} {rec['su2_seconds']:>10.3f} {rec['su2_steps_per_s']:>14,.0f} "
            f"{rec['eig_seconds']:>10.3f} {rec['eig_steps_per_s']:>14,.0f} "
            f"{rec['norm_drift']:>12.2e}"
        )
    if "cross_backend_final_diff" in results:
        print(f"cross-backend final-state difference: {results['cross_backend_final_diff']:.2e}")


if __name__ == "__main__":
    main()
