"""All three schemes at desk scale over several seeds.

Reports IPG-IGG agreement near the sender and awareness, per seed and
pooled. Takes about a minute per seed.

    python3 scripts/desk_suite.py [--seeds 0,1,2,3,4] [--csv out.csv]
"""

import argparse
import csv
import sys

import numpy as np

from vamsim.engine import desk_scenario, generations_per_station, run_repetition
from vamsim.metrics import compute_awareness, evaluation_times, ipg_igg_by_bin

SCHEMES = ("standalone", "implicitCluster", "etsiCluster")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--csv")
    args = ap.parse_args(argv)
    rows = []
    for seed in (int(s) for s in args.seeds.split(",")):
        for scheme in SCHEMES:
            r = run_repetition(desk_scenario(scheme, seed=seed))
            _, ipg, igg = ipg_igg_by_bin(r.log)[0]
            aw = float(np.mean(compute_awareness(r.log, evaluation_times(r.log, r.config.awareness_step))))
            rows.append(dict(seed=seed, scheme=scheme, generations=generations_per_station(r),
                             ipg=ipg, igg=igg, gap=abs(ipg - igg), awareness=aw))
            print(f"seed {seed} {scheme:<16} gen/station {rows[-1]['generations']:7.3f}  "
                  f"|IPG-IGG| 0-100 m {1000 * abs(ipg - igg):6.2f} ms  awareness {aw:.4f}", flush=True)
    print("pooled")
    for scheme in SCHEMES:
        mine = [r for r in rows if r["scheme"] == scheme]
        print(f"  {scheme:<16} |IPG-IGG| {1000 * np.mean([r['gap'] for r in mine]):6.2f} ms  "
              f"awareness {np.mean([r['awareness'] for r in mine]):.4f}")
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
