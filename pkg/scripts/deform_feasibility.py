"""Hover-thrust feasibility along the deformation path and a feasible variant.

The stretched form (-pi/4, pi/2) needs more than the rotor limit on one
rotor, so the commanded deformation cannot be flown at this mass. This
script locates where the path leaves the feasible thrust box and flies a
variant whose middle form stops inside it.
"""

import argparse
import math
from dataclasses import replace

import numpy as np

from tiltlink.design import form_margins
from tiltlink.errors import NonFiniteState, SingularForm
from tiltlink.model import RobotSpec
from tiltlink.sim.runner import run_scenario
from tiltlink.sim.scenario import JointPath, load_builtin


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--margin", type=float, default=0.5, help="thrust margin to the limits [N]")
    args = ap.parse_args()
    spec = RobotSpec()
    sc = load_builtin("deform")
    first_bad = None
    print("    t      q1      q2   u_s_min  u_s_max   tau_min")
    for t in np.arange(0.0, sc.duration + 1e-9, 1.0):
        q = sc.joints(t)
        try:
            lo, hi, tmin = form_margins(spec, q)
        except SingularForm:
            print(f"{t:5.1f} {q[0]:7.3f} {q[1]:7.3f}  singular")
            continue
        bad = lo < 0 or hi > spec.u_max
        if bad and first_bad is None:
            first_bad = t
        print(f"{t:5.1f} {q[0]:7.3f} {q[1]:7.3f} {lo:9.3f} {hi:8.3f} {tmin:9.4f}"
              + ("  infeasible" if bad else ""))
    print(f"first infeasible sample: t = {first_bad}")

    # smallest q1 on the q2 = pi/2 line that keeps the thrust box margin
    q1s = np.linspace(math.pi / 2, -math.pi / 4, 301)
    ok = [q1 for q1 in q1s
          if (lambda m: m[0] >= args.margin and m[1] <= spec.u_max - args.margin)(
              form_margins(spec, (q1, math.pi / 2)))]
    q_mid = (min(ok), math.pi / 2)
    print(f"most stretched feasible form on q2 = pi/2: q1 = {q_mid[0]:.3f}")

    a, c = sc.joints(0.0), sc.joints(sc.duration)
    table = ((0.0, *a), (3.0, *a), (13.0, *q_mid), (17.0, *q_mid), (27.0, *c), (30.0, *c))
    variant = replace(sc, name="deform_feasible", joints=JointPath(table))
    try:
        s = run_scenario(variant).summary
        print(f"feasible variant: max |e_r| = {s['max_err']:.4f} m, "
              f"saturation fraction = {s['saturation_fraction']:.3f}")
    except NonFiniteState as exc:
        print(f"feasible variant diverged at t = {exc.t:.2f}")


if __name__ == "__main__":
    main()
