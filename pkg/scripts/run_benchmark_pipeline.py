#!/usr/bin/env python3
"""Full benchmark pipeline at desk scale: probe, extract, validate, synthesize.

Runs the stock 18-points-per-axis cross sweep (5832 triplets x 12 amplitude
vectors) against the third-order multiplier cascade, then checks extracted
kernels against the closed-form oracle and the pulse response against
direct transient simulation.  Expect minutes of runtime; pass --ci for the
6-point reduction used by the test suite.

Artifacts land in --out (default runs/benchmark): plan.json, dataset.json,
archive.json, waveform.csv, validation_report.json.
"""

import argparse
import os
import sys
import time

import numpy as np

from volkit.extraction import extract
from volkit.probing import simulate_dataset, transient
from volkit.storage import (
    save_archive,
    save_dataset,
    save_plan,
    save_report,
    save_waveform_csv,
)
from volkit.sweeps import standard_sweep_plan
from volkit.synthesis import (
    TrapezoidPulse,
    nrmse,
    spectrum_of,
    synthesize_total,
)
from volkit.systems import MultiplierCascade, kernel_oracle


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/benchmark")
    ap.add_argument("--points-per-axis", type=int, default=18)
    ap.add_argument("--ci", action="store_true",
                    help="6 points per axis (test-suite scale)")
    ap.add_argument("--skip-dataset-file", action="store_true",
                    help="do not write dataset.json (large at full scale)")
    args = ap.parse_args()
    points = 6 if args.ci else args.points_per_axis
    os.makedirs(args.out, exist_ok=True)

    plan = standard_sweep_plan(points_per_axis=points,
                               plan_id=f"benchmark-{points}pt")
    system = MultiplierCascade()
    print(f"plan: {points} points/axis -> {plan.n_triplets} triplets x "
          f"{len(plan.schedule)} amplitude vectors")
    save_plan(os.path.join(args.out, "plan.json"), plan)

    t0 = time.time()
    dataset = simulate_dataset(system, plan)
    print(f"probe: {time.time() - t0:.1f} s "
          f"({dataset.n_runs} operating points)")
    if not args.skip_dataset_file:
        t0 = time.time()
        save_dataset(os.path.join(args.out, "dataset.json"), dataset)
        print(f"dataset.json written in {time.time() - t0:.1f} s")

    t0 = time.time()
    archive, report = extract(dataset, plan)
    print(f"extract: {time.time() - t0:.1f} s, points per order "
          f"{report.points_per_order}, max residual "
          f"{report.max_relative_residual:.2e}")
    save_archive(os.path.join(args.out, "archive.json"), archive)

    # kernel accuracy against the closed-form oracle
    kernel_stats = {}
    for order in (1, 2, 3):
        errs = np.array([
            abs(val - kernel_oracle(system, args_hz, order))
            / abs(kernel_oracle(system, args_hz, order))
            for args_hz, val in archive.grid(order).items()
        ])
        kernel_stats[order] = {"n": int(errs.size),
                               "max_rel": float(errs.max()),
                               "median_rel": float(np.median(errs))}
        print(f"H{order}: {errs.size} points, max rel err {errs.max():.2e}, "
              f"median {np.median(errs):.2e}")

    # pulse response vs direct transient
    pulse = TrapezoidPulse(v0=1.0)
    period, window, dt = 28e-9, 27e-9, 5e-12
    t0 = time.time()
    reference = transient(system, pulse, window, dt)
    spectrum, spec_info = spectrum_of(pulse, period)
    response = synthesize_total(archive, spectrum, window, dt)
    total_err = nrmse(response.total.samples, reference.samples)
    linear_err = nrmse(response.per_order[1].samples, reference.samples)
    print(f"synthesis+reference: {time.time() - t0:.1f} s")
    print(f"pulse NRMSE: total {total_err:.4f}, linear-only {linear_err:.4f} "
          f"({linear_err / total_err:.0f}x)")
    save_waveform_csv(os.path.join(args.out, "waveform.csv"),
                      response.total, response.per_order)
    save_report(os.path.join(args.out, "validation_report.json"),
                "validation-report", {
                    "points_per_axis": points,
                    "kernel_errors": {str(k): v
                                      for k, v in kernel_stats.items()},
                    "pulse_total_nrmse": total_err,
                    "pulse_linear_only_nrmse": linear_err,
                    "input_bins": spec_info.n_bins,
                })
    ok = total_err <= 0.05 and all(v["max_rel"] <= 0.05
                                   for v in kernel_stats.values())
    print("PASS" if ok else "FAIL")
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
