"""Iterations to convergence versus step size and relaxation on the standard instances.

For every (gamma / beta, lambda) pair the solver is run on each standard
instance; the script reports the median iteration count and the largest
distance to the frozen grid-oracle solution, and writes a CSV table.

    python3 scripts/step_size_study.py --out runs/step_size.csv
"""

import argparse
import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dualfb.solver import DualFBConfig, solve_dual_fb
from dualfb.verify import standard_instances

REFS = Path(__file__).resolve().parents[1] / "tests" / "data" / "oracle_refs.json"


@dataclass
class StudyConfig:
    step_fractions: tuple = (0.25, 0.5, 1.0, 1.5, 1.9)
    relaxations: tuple = (0.5, 0.8, 1.0)
    tol: float = 1e-10
    max_iter: int = 100000
    out: str = "runs/step_size.csv"
    refs: str = field(default=str(REFS))


def run(cfg: StudyConfig):
    doc = json.loads(Path(cfg.refs).read_text())
    instances = standard_instances(doc["count"], doc["seed"])
    rows = []
    for frac in cfg.step_fractions:
        for lam in cfg.relaxations:
            iters, errs = [], []
            for (_, P), rec in zip(instances, doc["instances"]):
                res = solve_dual_fb(P, DualFBConfig(gamma=frac * P.beta, lam=lam, tol_iterate=cfg.tol, max_iter=cfg.max_iter))
                iters.append(res.iterations)
                errs.append(float(np.linalg.norm(res.x.ravel() - np.asarray(rec["x"]))))
            rows.append({"gamma_over_beta": frac, "lambda": lam, "median_iterations": float(np.median(iters)),
                         "max_iterations": int(np.max(iters)), "max_oracle_distance": max(errs)})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=StudyConfig.out)
    ap.add_argument("--tol", type=float, default=StudyConfig.tol)
    args = ap.parse_args()
    cfg = StudyConfig(out=args.out, tol=args.tol)
    rows = run(cfg)
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"{'gamma/beta':>10} {'lambda':>6} {'median it':>9} {'max it':>7} {'max dist':>9}")
    for r in rows:
        print(f"{r['gamma_over_beta']:>10} {r['lambda']:>6} {r['median_iterations']:>9.0f} {r['max_iterations']:>7d} "
              f"{r['max_oracle_distance']:>9.2e}")
    print(f"wrote {cfg.out}")


if __name__ == "__main__":
    main()
