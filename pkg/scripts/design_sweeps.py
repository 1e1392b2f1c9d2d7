"""Tilt-angle and joint-space design sweeps written as CSV files."""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from tiltlink.design import (DEFAULT_BETA_GRID, envelope, form_margins, is_valid_form,
                             optimize_tilt, torque_convex)
from tiltlink.errors import DegenerateConvex, SingularForm
from tiltlink.model import RobotSpec, allocation

NOMINAL = (math.pi / 2, math.pi / 2)


def _write(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows([[format(float(v), ".10g") for v in r] for r in rows])
    print(f"wrote {path} ({len(rows)} rows)")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/design")
    ap.add_argument("--n", type=int, default=61, help="joint grid points per axis")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = RobotSpec()

    rows = []
    for beta in DEFAULT_BETA_GRID[::2]:
        s = spec.with_tilt(beta)
        hov, env = envelope(s, NOMINAL)
        tmin = torque_convex(allocation(s, NOMINAL), s.u_max).tau_min
        rows.append([beta, hov.u_s_min, hov.u_s_max, env.tau_z_min, env.tau_z_max,
                     env.f_xy_norm, env.l_air, tmin])
    _write(out / "beta_sweep.csv", ["beta", "u_s_min", "u_s_max", "tau_z_min", "tau_z_max",
                                   "f_xy_norm", "l_air", "tau_min"], rows)

    opt = optimize_tilt(spec)
    print(f"tilt optimum with default weights: {opt.beta_opt:.4f} rad")

    grid = np.linspace(-math.pi / 2, math.pi / 2, args.n)
    rows = []
    for q1 in grid:
        for q2 in grid:
            try:
                lo, hi, tmin = form_margins(spec, (q1, q2))
            except (SingularForm, DegenerateConvex):
                lo = hi = tmin = math.nan
            rows.append([q1, q2, lo, hi, tmin, is_valid_form(spec, (q1, q2))])
    _write(out / "joint_map.csv", ["q1", "q2", "u_s_min", "u_s_max", "tau_min", "valid"], rows)
    frac = np.mean([r[-1] for r in rows])
    print(f"valid fraction of the joint square: {frac:.3f}")


if __name__ == "__main__":
    main()
