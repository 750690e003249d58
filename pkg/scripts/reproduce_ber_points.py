"""Monte Carlo of the six measured BER operating points; prints the comparison table."""

import argparse
import sys

from qrfol.harness import reproduce_measured_points


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bits", type=int, default=100_000)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--seeds", type=int, default=1, help="repeat over this many consecutive seeds")
    args = ap.parse_args()
    passes = 0
    for seed in range(args.seed, args.seed + args.seeds):
        rep = reproduce_measured_points(seed, n_bits=args.bits, n_trials=args.trials, workers=args.workers)
        passes += rep.passed
        print(f"# seed {seed}")
        print(rep.to_text())
    if args.seeds > 1:
        print(f"all six points inside their bands for {passes}/{args.seeds} seeds")
    return 0


if __name__ == "__main__":
    sys.exit(main())
