"""Command line entry point: ``firstbreak {train,predict,evaluate,synth}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import metrics
from .config import PipelineConfig, load_config, with_overrides
from .errors import ConfigError, DataError, FirstBreakError, NumericError
from .gather import Gather, PickSet, load_gather, load_picks, save_gather, save_picks
from .pipeline import predict, train_stage
from .segnet.checkpoint import load_checkpoint, save_checkpoint
from .synthetic import SynthConfig, generate, sample_configs

log = logging.getLogger("firstbreak")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_pipeline_flags(p):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--no-stalta-channel", action="store_true", help="RSN sees the waveform window only")
    p.add_argument("--no-lmo", action="store_true", help="flat window instead of moveout-following window")
    p.add_argument("--no-postprocess", action="store_true", help="keep raw column maxima")
    p.add_argument("--no-pick-correction", action="store_true", help="train on labels without snapping")
    p.add_argument("--loss", choices=("bce", "mixed"), help="RSN training loss")
    p.add_argument("--td", type=int, help="deviation threshold in samples")
    p.add_argument("--threshold", type=float, help="credible-point probability threshold")
    p.add_argument("--vmin", type=float)
    p.add_argument("--vmax", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="firstbreak", description="Seismic first-arrival picking")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train the coarse or the fine network")
    _add_pipeline_flags(t)
    t.add_argument("--stage", choices=("csn", "rsn"), required=True)
    t.add_argument("--data", required=True, help="directory of NAME.fbg + NAME.csv pairs")
    t.add_argument("--out", required=True, help="checkpoint to write")
    t.add_argument("--resume", help="checkpoint to continue from")
    t.add_argument("--csn", help="trained CSN checkpoint used to place RSN training windows")

    p = sub.add_parser("predict", help="pick first arrivals")
    _add_pipeline_flags(p)
    p.add_argument("--csn", required=True)
    p.add_argument("--rsn", required=True)
    p.add_argument("--gather", required=True, nargs="+")
    p.add_argument("--out", required=True, help="pick CSV (one gather) or output directory")
    p.add_argument("--plot", help="PNG path (one gather) or directory")

    e = sub.add_parser("evaluate", help="compare automatic picks with manual picks")
    e.add_argument("--manual", required=True, help="pick CSV or directory")
    e.add_argument("--auto", required=True, help="pick CSV or directory")
    e.add_argument("--out", help="write the JSON report here as well")
    e.add_argument("--all-traces", action="store_true", help="MAE/RMSE over all traces")

    s = sub.add_parser("synth", help="write synthetic gathers with truth picks")
    s.add_argument("--config", help="key = value file of synthetic settings")
    s.add_argument("--out", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    return ap


def pipeline_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    over = {}
    flags = {
        "seed": args.seed, "rsn_loss": args.loss, "td": args.td, "split_threshold": args.threshold,
        "v_min": args.vmin, "v_max": args.vmax,
    }
    over.update({k: v for k, v in flags.items() if v is not None})
    for flag, key in (("no_stalta_channel", "use_stalta_channel"), ("no_lmo", "use_lmo"),
                      ("no_postprocess", "use_postprocess"), ("no_pick_correction", "pick_correction")):
        if getattr(args, flag):
            over[key] = False
    return with_overrides(cfg, over)


def load_pairs(data_dir):
    d = Path(data_dir)
    if not d.is_dir():
        raise DataError(f"{d} is not a directory")
    pairs = []
    for f in sorted(d.glob("*.fbg")):
        csv = f.with_suffix(".csv")
        if not csv.exists():
            log.warning("no picks for %s, skipping", f.name)
            continue
        g = load_gather(f)
        p = load_picks(csv, g.n_samples).validate(g.n_samples, g.n_traces)
        if not np.any(p.picked):
            log.warning("%s has no picked traces, skipping", f.name)
            continue
        pairs.append((g, p))
    if not pairs:
        raise DataError(f"no labelled gathers in {d}")
    return pairs


def cmd_train(args) -> int:
    cfg = pipeline_config(args)
    pairs = load_pairs(args.data)
    resume = load_checkpoint(args.resume) if args.resume else None
    csn = load_checkpoint(args.csn) if args.csn else None
    ck, result = train_stage(args.stage, pairs, cfg, resume, csn)
    save_checkpoint(ck, args.out)
    history = [{"iteration": e.iteration, "train_loss": e.train_loss, "val_loss": e.val_loss}
               for e in result.history]
    Path(str(args.out) + ".log.json").write_text(
        json.dumps({"history": history, **ck.meta}, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    log.info("trained %s to iteration %d (best %s)", args.stage, ck.iteration, result.best_iteration)
    return EXIT_OK


def plot_picks(g: Gather, picks: PickSet, path) -> None:
    """Grayscale gather with picks overlaid; failures are logged, never raised."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 8))
        amps = g.amplitudes
        lim = float(np.max(np.abs(amps))) or 1.0
        ax.imshow(amps, cmap="gray", aspect="auto", vmin=-lim, vmax=lim, interpolation="nearest")
        m = picks.picked
        ax.plot(np.flatnonzero(m), picks.picks[m], "r.", markersize=4)
        ax.set_xlabel("trace")
        ax.set_ylabel("sample")
        fig.savefig(path, dpi=100, metadata={"Software": None})
        plt.close(fig)
    except Exception as exc:  # plotting is cosmetic
        log.warning("plot %s failed: %s", path, exc)


def _check_compat(cfg: PipelineConfig, csn, rsn):
    if csn.config != cfg.csn_unet():
        raise ConfigError(f"CSN checkpoint is {csn.config}, configuration wants {cfg.csn_unet()}")
    if rsn.config != cfg.rsn_unet():
        raise ConfigError(f"RSN checkpoint is {rsn.config}, configuration wants {cfg.rsn_unet()}")


def cmd_predict(args) -> int:
    cfg = pipeline_config(args)
    csn, rsn = load_checkpoint(args.csn), load_checkpoint(args.rsn)
    _check_compat(cfg, csn, rsn)
    many = len(args.gather) > 1
    out = Path(args.out)
    if many:
        out.mkdir(parents=True, exist_ok=True)
    for path in args.gather:
        g = load_gather(path)
        res = predict(g, csn, rsn, cfg)
        target = out / (Path(path).stem + ".csv") if many else out
        save_picks(res.picks, target)
        info = {
            "gather": Path(path).name,
            "flagged": res.flagged,
            "notes": res.notes,
            "v": None if res.model is None else res.model.v,
            "t0": None if res.model is None else res.model.t0,
            "n_picked": int(np.count_nonzero(res.picks.picked)),
        }
        Path(str(target) + ".json").write_text(json.dumps(info, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        if args.plot:
            plot = Path(args.plot)
            if many:
                plot.mkdir(parents=True, exist_ok=True)
                plot = plot / (Path(path).stem + ".png")
            plot_picks(g, res.picks, plot)
    return EXIT_OK


def _pick_files(path):
    p = Path(path)
    if p.is_dir():
        return {f.stem: f for f in sorted(p.glob("*.csv"))}
    return {p.stem: p}


def cmd_evaluate(args) -> int:
    manual, auto = _pick_files(args.manual), _pick_files(args.auto)
    if len(manual) == 1 and len(auto) == 1:
        names = [(next(iter(manual)), next(iter(manual.values())), next(iter(auto.values())))]
    else:
        missing = sorted(set(manual) ^ set(auto))
        if missing:
            raise DataError(f"pick files without a counterpart: {', '.join(missing)}")
        names = [(k, manual[k], auto[k]) for k in sorted(manual)]
    per, pairs = {}, []
    for name, mf, af in names:
        m, a = load_picks(mf), load_picks(af)
        per[name] = metrics.report(m, a, args.all_traces)
        pairs.append((m, a))
    text = metrics.dumps_report(per, metrics.aggregate(pairs, args.all_traces))
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


_SYNTH_RANGES = ("v_range", "t0_range")


def parse_synth_config(text: str):
    """SynthConfig fields plus ``v_range``/``t0_range = lo, hi`` and ``exclude_v = v, half_width``."""
    known = {f.name: f.type for f in fields(SynthConfig)}
    base, extra = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in body.split("=", 1))
        try:
            if key in known:
                base[key] = int(value) if known[key] == "int" else float(value)
            elif key in _SYNTH_RANGES or key == "exclude_v":
                lo, hi = (float(x) for x in value.split(","))
                extra[key] = (lo, hi)
            else:
                raise ConfigError(f"line {lineno}: unknown synthetic key {key!r}")
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None
    return SynthConfig(**base), extra


def cmd_synth(args) -> int:
    if args.count < 0:
        raise ConfigError("count must be >= 0")
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from None
        base, extra = parse_synth_config(text)
    else:
        base, extra = SynthConfig(), {}
    cfgs = sample_configs(base, args.count, args.seed, extra.get("v_range", (base.v, base.v)),
                          extra.get("t0_range", (base.t0, base.t0)), extra.get("exclude_v"))
    # generate everything first so an out-of-record arrival aborts before any write
    data = [generate(c) for c in cfgs]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i, (c, (g, p)) in enumerate(zip(cfgs, data)):
        name = f"synth_{i:05d}"
        save_gather(g, out / f"{name}.fbg")
        save_picks(p, out / f"{name}.csv")
        manifest.append({"name": name, "rng_seed": c.rng_seed, "v": c.v, "t0": c.t0})
    doc = {"seed": args.seed, "count": args.count, "base": {f.name: getattr(base, f.name) for f in fields(base)},
           "gathers": manifest}
    (out / "manifest.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate, "synth": cmd_synth}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"firstbreak: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        code, msg = EXIT_CONFIG, exc
    except NumericError as exc:
        code, msg = EXIT_NUMERIC, exc
    except (DataError, OSError, FirstBreakError) as exc:
        code, msg = EXIT_DATA, exc
    print(f"firstbreak: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
