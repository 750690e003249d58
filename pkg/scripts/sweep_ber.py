"""BER waterfall for the three schemes and three scenarios, written as CSV."""

import argparse

from qrfol.harness import SweepSpec, reports_to_csv, sweep

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--out", default="ber_sweep.csv")
ap.add_argument("--bits", type=int, default=100_000)
ap.add_argument("--stop", type=float, default=10.0)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--workers", type=int, default=4)
args = ap.parse_args()

spec = SweepSpec(start=0.0, stop=args.stop, step=0.5, bits_per_point=args.bits,
                 schemes=("bpsk", "bfsk", "bask"), scenarios=("classical", "entangled", "thermal"),
                 master_seed=args.seed)
reports = sweep(spec, workers=args.workers)
with open(args.out, "w") as f:
    f.write(reports_to_csv(reports))
print(f"wrote {len(reports)} points to {args.out}")
