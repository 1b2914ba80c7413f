"""Record primal grid-oracle solutions for the standard instance set.

The acceptance suite compares the solver against these frozen values, so
they must be produced by the oracle alone, before any solver output is
looked at. Re-run only when the instance generator changes.

    python3 scripts/freeze_oracle_refs.py [--out tests/data/oracle_refs.json]
"""

import argparse
import json
import time
from pathlib import Path

from dualfb.oracles import primal_grid_oracle
from dualfb.verify import instance_grid, standard_instances


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "data" / "oracle_refs.json"))
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--step", type=float, default=1e-3)
    args = ap.parse_args()
    records = []
    for name, P in standard_instances(args.count, args.seed):
        t0 = time.perf_counter()
        x = primal_grid_oracle(P, instance_grid(P, args.step))
        records.append({"name": name, "x": [float(v) for v in x.ravel()]})
        print(f"{name}: {x.ravel()} ({time.perf_counter() - t0:.2f} s)")
    doc = {"seed": args.seed, "count": args.count, "step": args.step, "instances": records}
    Path(args.out).write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
