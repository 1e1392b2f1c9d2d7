"""Circle tracking with and without centripetal compensation of the attitude filter."""

import argparse

from tiltlink.sim.runner import EstimatorConfig, run_scenario
from tiltlink.sim.scenario import load_builtin

FIELDS = ("max_horizontal_err_at_top_speed", "max_z_err", "max_z_err_est", "max_yaw_err")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sc = load_builtin("circle")
    for label, est in (("plain", EstimatorConfig()),
                       ("compensated", EstimatorConfig(accel_compensation=True))):
        s = run_scenario(sc, estimator=est, seed=args.seed).summary
        print(label.ljust(12) + "  ".join(f"{f}={s[f]:.3f}" for f in FIELDS))


if __name__ == "__main__":
    main()
