"""Run every built-in scenario over a few seeds and tabulate the summaries."""

import argparse
import json
from pathlib import Path

from tiltlink.errors import NonFiniteState
from tiltlink.sim.runner import run_scenario
from tiltlink.sim.scenario import BUILTINS, load_builtin

FIELDS = ("max_err", "steady_err", "max_horizontal_err", "max_z_err", "max_yaw_err",
          "saturation_fraction")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/scenarios")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--scenario", nargs="+", default=list(BUILTINS))
    args = ap.parse_args()
    out = Path(args.out)
    print("scenario seed " + " ".join(f"{f:>20s}" for f in FIELDS))
    for name in args.scenario:
        for seed in args.seeds:
            try:
                log = run_scenario(load_builtin(name), seed=seed)
            except NonFiniteState as exc:
                print(f"{name} {seed} diverged at t={exc.t:.3f}")
                continue
            log.write(out, f"{name}_seed{seed}")
            s = log.summary
            print(f"{name} {seed} " + " ".join(f"{s[f]:20.4g}" for f in FIELDS))
    (out / "index.json").write_text(json.dumps(sorted(p.name for p in out.glob("*.json")
                                                      if p.name != "index.json")) + "\n")


if __name__ == "__main__":
    main()
