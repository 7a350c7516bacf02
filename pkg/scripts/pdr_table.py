"""Analytical PDR per scheme next to a packet-level check of the model.

    python3 scripts/pdr_table.py [--separations 4,2] [--cluster-sizes 12,20] [--seeds 3]
"""

import argparse
import math
import sys

import numpy as np

from vamsim.channel import PhyConfig, airtime, analytical_pdr, clustered_senders, simulate_pdr
from vamsim.cli import pdr_text
from vamsim.config import ScenarioConfig
from vamsim.mobility import pedestrian_count


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--separations", default="4,2")
    ap.add_argument("--cluster-sizes", default="12,20")
    ap.add_argument("--rate", type=float, default=10.0)
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args(argv)
    seps = [float(x) for x in args.separations.split(",")]
    sizes = [int(x) for x in args.cluster_sizes.split(",")]
    print(pdr_text(seps, sizes, args.rate))
    size = ScenarioConfig().base_vam_bytes
    print(f"model vs simulation, standalone {size} B, Poisson arrivals at {args.rate:g} Hz")
    for sep in seps:
        n = pedestrian_count(50.0, separation=sep)
        model = analytical_pdr(n, args.rate, airtime(size))
        no_capture = [simulate_pdr(n, args.rate, size, seed=s, phy=PhyConfig(capture_margin_db=math.inf))
                      for s in range(args.seeds)]
        capture = [simulate_pdr(n, args.rate, size, seed=s) for s in range(args.seeds)]
        # the model counts every overlap as a loss, so compare it to the run without capture
        print(f"  d={sep:g} m, {n} senders: model {100 * model:.2f} %, "
              f"simulated {100 * np.mean(no_capture):.2f} % without capture, {100 * np.mean(capture):.2f} % with")
    return 0


if __name__ == "__main__":
    sys.exit(main())
