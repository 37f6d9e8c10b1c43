"""``bdseg`` command line: data generation, training, inference and reports.

Every failure prints one line ``error: <code>: <detail>`` to stderr and
exits 2 (usage/config), 3 (data) or 4 (numeric).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import distance_map as dm
from . import experiments, metrics, raster, synth, tps
from .config import RunConfig, keys_help
from .contour import reconstruct_mask
from .errors import BdsegError, ConfigError, UsageError
from .nets import SegNet, train
from .nets.train import predict_distance, predict_mask

log = logging.getLogger("bdseg")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _out(path):
    """Create the parent folder of an output file; returns ``path``."""
    raster.ensure_dir(os.path.dirname(os.path.abspath(path)))
    return path


def _write_text(path, text: str) -> None:
    with open(_out(path), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value)
    return cfg


# --- subcommands ------------------------------------------------------------------

def cmd_synth_gen(args):
    cfg = _config(args)
    for key in ("seed", "size"):
        if getattr(args, key) is not None:
            cfg.set("data_seed" if key == "seed" else key, str(getattr(args, key)))
    items = synth.gen_dataset(args.n, cfg.shape_params(), start=args.start)
    path = synth.write_dataset(items, args.out)
    print(f"wrote {len(items)} pairs, manifest {path}")


def cmd_augment(args):
    items = synth.read_manifest(args.input)
    out = tps.augment_dataset(items)
    path = synth.write_dataset(out, args.out)
    print(f"wrote {len(out)} pairs ({len(items)} originals), manifest {path}")


def cmd_encode_dist(args):
    mask = raster.load_mask(args.mask)
    d = dm.encode_mask(mask, args.lam)
    dm.save_dmap(d, _out(args.out))
    if args.heatmap:
        raster.save_pgm(dm.heatmap(d), _out(args.heatmap))


def _trace_csv(trace) -> str:
    lines = ["step,ld,ls,w_dist,w_cls,loss"]
    lines += [f"{r.step},{r.ld!r},{r.ls!r},{r.w_dist!r},{r.w_cls!r},{r.loss!r}" for r in trace]
    return "\n".join(lines) + "\n"


def cmd_train(args):
    cfg = _config(args)
    train_items, test_items = experiments.datasets(cfg)
    tc = cfg.train_config()
    log.info("training on %d images for %d steps", len(train_items), tc.steps)
    res = train(tc, train_items, test_items if tc.eval_every else None)
    res.net.save(_out(args.out))
    if args.trace:
        _write_text(args.trace, _trace_csv(res.trace))
    print(f"saved {args.out} ({res.net.n_params()} parameters, {res.seconds:.1f} s)")


def cmd_predict(args):
    net = SegNet.load(args.model)
    image = raster.load_pgm(args.image)
    d = predict_distance(net, image, args.lam)
    dm.save_dmap(d, _out(args.out))
    if args.mask_out:
        raster.save_mask(predict_mask(net, image), _out(args.mask_out))


def cmd_reconstruct(args):
    d = dm.load_dmap(args.input)
    if args.lam is not None:
        d = dm.DistanceMap(d.values, args.lam)
    raster.save_mask(reconstruct_mask(d, args.neighbors or None), _out(args.out))


def cmd_eval(args):
    rows, summary = metrics.batch_report(args.pred, args.truth)
    _write_text(args.out, metrics.report_csv(rows, summary))
    print(f"dice {summary['dice']}")


def cmd_compare(args):
    _write_text(args.out, metrics.compare_reports(args.a, args.b))


def cmd_ablate_lambda(args):
    cfg = _config(args)
    train_items, test_items = experiments.datasets(cfg)

    def progress(row):
        log.info("lambda %g: dice %.4f", row.lam, row.dice_mean)

    rows = experiments.ablate_lambda(cfg, train_items, test_items, args.jobs, progress)
    _write_text(args.out, experiments.ablation_csv(rows))


def cmd_compare_paths(args):
    cfg = _config(args)
    model = args.model or cfg["model"]
    if not model:
        raise ConfigError("compare-paths needs --model or the model key")
    net = SegNet.load(model)
    _, test_items = experiments.datasets(cfg, augment=False)
    results = experiments.compare_paths(net, test_items, cfg["lambda"], cfg["neighbors"], args.jobs)
    _write_text(args.out, experiments.paths_csv(results))
    if args.masks_out:
        raster.ensure_dir(args.masks_out)
        for r in results:
            raster.save_mask(r.mask_end_to_end, os.path.join(args.masks_out, f"{r.name}_e2e.pgm"))
            raster.save_mask(r.mask_postprocess, os.path.join(args.masks_out, f"{r.name}_post.pgm"))
    if args.timing_out:
        rows = experiments.time_paths(net, experiments.timing_images(cfg), cfg["lambda"], cfg["neighbors"])
        _write_text(args.timing_out, experiments.timing_csv(rows))


def cmd_heatmap(args):
    raster.save_pgm(dm.heatmap(dm.load_dmap(args.input)), _out(args.out))


# --- parser -----------------------------------------------------------------------

def _add_config(p):
    p.add_argument("--config", help="run configuration file (key = value lines)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    p.epilog = keys_help()
    p.formatter_class = argparse.RawDescriptionHelpFormatter


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bdseg", description="Boundary-distance regression segmentation toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth-gen", help="generate synthetic image/mask pairs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, help="generator seed (config key data_seed)")
    p.add_argument("--size", type=int)
    p.add_argument("--start", type=int, default=0, help="first sample index")
    p.add_argument("--out", required=True)
    _add_config(p)
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("augment", help="shape-registration augmentation of a manifest")
    p.add_argument("--in", dest="input", required=True, help="input manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("encode-dist", help="mask PGM -> DMAP distance map")
    p.add_argument("--mask", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--heatmap", help="also write a heatmap PGM")
    p.set_defaults(func=cmd_encode_dist)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--trace", help="per-step loss trace CSV")
    _add_config(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="run a model on one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True, help="predicted DMAP")
    p.add_argument("--mask-out", help="end-to-end mask PGM")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="lambda stored in the DMAP")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("reconstruct", help="DMAP -> filled mask via spanning-tree contour")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", dest="lam", type=float, help="override the embedded lambda")
    p.add_argument("--neighbors", type=int, default=0, help="k-NN candidate edges (0: complete graph)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="metrics of predicted masks against truth masks")
    p.add_argument("--pred", required=True, help="folder of predicted mask PGMs")
    p.add_argument("--truth", required=True, help="folder of same-named truth mask PGMs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="Wilcoxon signed-rank tests between two metric CSVs")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ablate-lambda", help="boundary-net lambda sweep")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for reconstruction")
    _add_config(p)
    p.set_defaults(func=cmd_ablate_lambda)

    p = sub.add_parser("compare-paths", help="end-to-end masks vs post-processed masks")
    p.add_argument("--model")
    p.add_argument("--out", required=True, help="per-image Dice CSV")
    p.add_argument("--timing-out", help="per-image timing CSV at the timing size")
    p.add_argument("--masks-out", help="folder for both paths' masks")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for reconstruction")
    _add_config(p)
    p.set_defaults(func=cmd_compare_paths)

    p = sub.add_parser("heatmap", help="DMAP -> round(255*d) PGM")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(message)s", stream=sys.stderr)
        args.func(args)
    except BdsegError as exc:
        print(exc.message(), file=sys.stderr)
        return exc.exit_status
    except FileNotFoundError as exc:
        print(f"error: io: {exc.filename}: no such file", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 3
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
