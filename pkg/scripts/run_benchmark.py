"""Run the synthetic benchmark and write per-seed reports to results/benchmark.json."""
import argparse
import json
import logging
from dataclasses import replace
from pathlib import Path

from firstbreak.benchmark import BenchConfig, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--noise", type=float, help="noise sigma relative to the wavelet peak")
    ap.add_argument("--n-train", type=int)
    ap.add_argument("--max-iterations", type=int)
    ap.add_argument("--out", default="results/benchmark.json")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    bc = BenchConfig()
    if args.noise is not None:
        bc = replace(bc, synth=replace(bc.synth, noise_sigma=args.noise))
    if args.n_train is not None:
        bc = replace(bc, n_train=args.n_train)
    if args.max_iterations is not None:
        bc = replace(bc, overrides={**bc.overrides, "max_iterations": args.max_iterations})
    res = run(bc, log=lambda m: print(m, flush=True))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(res, indent=2, sort_keys=True, default=str) + "\n")
    print(f"total {res['seconds']:.0f}s")


if __name__ == "__main__":
    main()
