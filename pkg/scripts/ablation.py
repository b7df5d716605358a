"""Inference-time ablations on the synthetic benchmark test set.

Trains the benchmark model pair (or loads it with --csn/--rsn), then scores
one test seed under each variant: full pipeline, no post-processing, flat
window, several deviation thresholds and no probability floor.
"""
import argparse
import json
from dataclasses import replace
from pathlib import Path

from firstbreak.benchmark import BenchConfig, score, test_set, train_models
from firstbreak.config import PipelineConfig, with_overrides
from firstbreak.segnet.checkpoint import load_checkpoint, save_checkpoint


def variants(cfg):
    yield "full", cfg
    yield "no_postprocess", replace(cfg, use_postprocess=False)
    yield "no_lmo", replace(cfg, use_lmo=False)
    yield "no_prob_floor", replace(cfg, prob_floor=None)
    for td in (1, 2, 10, 20):
        yield f"td={td}", replace(cfg, td=td)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--csn")
    ap.add_argument("--rsn")
    ap.add_argument("--save-dir", default="results", help="where freshly trained checkpoints go")
    ap.add_argument("--seed", type=int, default=0, help="test seed")
    ap.add_argument("--out", default="results/ablation.json")
    args = ap.parse_args()
    bc = BenchConfig()
    cfg = with_overrides(PipelineConfig(), bc.overrides)
    if args.csn and args.rsn:
        csn, rsn = load_checkpoint(args.csn), load_checkpoint(args.rsn)
    else:
        csn, rsn, _, _ = train_models(bc, cfg, log=lambda m: print(m, flush=True))
        Path(args.save_dir).mkdir(parents=True, exist_ok=True)
        save_checkpoint(csn, Path(args.save_dir) / "bench_csn.ck")
        save_checkpoint(rsn, Path(args.save_dir) / "bench_rsn.ck")
    gathers = test_set(bc, args.seed)
    rows = {}
    for name, c in variants(cfg):
        rows[name] = score(csn, rsn, c, gathers)
        r = rows[name]
        print(f"{name:15s} acc@1 {r['acc@1']:.4f} acc@3 {r['acc@3']:.4f} mae {r['mae']:.3f} "
              f"rmse {r['rmse']:.3f} picked {r['n_auto']}", flush=True)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
