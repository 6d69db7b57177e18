"""Command line entry point: ``irgs gen | train | segment | eval``.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from irgs import checkpoint, metrics, pipeline, recon, synthdata
from irgs._accel import set_threads_from_env
from irgs.config import ConfigError, RunConfig, format_config, load_config
from irgs.imgcore import ShapeError

log = logging.getLogger("irgs")

EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def _run_config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for key in ("seed", "epochs", "data", "out"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "model", None):
        overrides["model"] = args.model
    return cfg.updated(**overrides)


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def cmd_gen(args):
    if args.out is None:
        raise UsageError("gen needs --out")
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    spec = synthdata.SceneSpec(
        height=args.size, width=args.size, seed=args.seed or 0,
        min_objects=args.min_objects, max_objects=args.max_objects,
        min_size=args.min_size, max_size=args.max_size,
        allow_occlusion=args.occlusion)
    scenes = synthdata.generate(spec, args.count)
    synthdata.write_dataset(args.out, scenes, spec)
    print(f"wrote {len(scenes)} scenes to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _load_images(directory, cfg):
    if not directory:
        raise UsageError("no dataset given (--data or data = ...)")
    if not Path(directory).is_dir():
        raise UsageError(f"dataset directory {directory} does not exist")
    images = synthdata.load_dataset(directory)
    for img in images:
        if img.shape[:2] != (cfg.height, cfg.width):
            raise ConfigError("height", f"dataset image {img.shape[:2]} does not match "
                                        f"configured {(cfg.height, cfg.width)}")
    return images


def train_model(cfg, images, log_rows=None):
    """Initialize and train a model from a :class:`RunConfig`."""
    model = recon.init_model(cfg.height, cfg.width, cfg.hidden, cfg.latent, cfg.mode, cfg.seed)
    if cfg.epochs == 0:
        return model, []
    if not images:
        raise UsageError("dataset is empty")

    def report(epoch, value):
        log.info("epoch %d mean loss %.6f", epoch, value)
        if log_rows is not None:
            log_rows.append((epoch, value))

    return pipeline.train(model, images, cfg.pipeline_config(), cfg.epochs, seed=cfg.seed,
                          lr=cfg.lr, optimizer=cfg.optimizer, callback=report)


def cmd_train(args):
    cfg = _run_config(args)
    if not cfg.out:
        raise UsageError("train needs --out")
    images = _load_images(cfg.data, cfg) if cfg.epochs > 0 else []
    rows = []
    model, _ = train_model(cfg, images, rows)
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    checkpoint.save(out, model)
    with open(loss_log_path(out), "w") as fh:
        fh.write("epoch,mean_loss\n")
        for epoch, value in rows:
            fh.write(f"{epoch},{value:.10g}\n")
    out.with_name(out.name + ".cfg").write_text(format_config(cfg))
    print(f"wrote {out}")
    return 0


def loss_log_path(ckpt_path):
    p = Path(ckpt_path)
    return p.with_name(p.name + ".loss.csv")


# ---------------------------------------------------------------------------
# segment
# ---------------------------------------------------------------------------

def _load_model(cfg):
    if not cfg.model:
        raise UsageError("no checkpoint given (--model or model = ...)")
    try:
        return checkpoint.load(cfg.model)
    except FileNotFoundError:
        raise UsageError(f"checkpoint {cfg.model} not found") from None


def location_report(d):
    """``slot,y,x`` lines; slots without a GMM (background) show ``---``."""
    lines = ["slot,y,x"]
    for k, sl in enumerate(d.slots, start=1):
        loc = sl.object_location()
        if loc is None:
            lines.append(f"{k},---,---")
        else:
            lines.append(f"{k},{loc[0]:.3f},{loc[1]:.3f}")
    return "\n".join(lines) + "\n"


def write_segmentation(out_dir, stem, d):
    out_dir = Path(out_dir)
    for k, sl in enumerate(d.slots, start=1):
        synthdata.save_png(out_dir / f"{stem}.slot{k}.mask.png", synthdata.to_uint8(sl.mask))
        synthdata.save_png(out_dir / f"{stem}.slot{k}.recon.png", synthdata.to_uint8(sl.recon))
    synthdata.save_png(out_dir / f"{stem}.assign.png",
                       pipeline.hard_assignment(d).astype(np.uint8))
    (out_dir / f"{stem}.locations.txt").write_text(location_report(d))


def _input_images(path):
    p = Path(path)
    if p.is_dir():
        return synthdata.image_paths(p)
    if p.is_file():
        return [p]
    raise UsageError(f"{path} does not exist")


def _check_dims(model, img, name):
    if img.shape[:2] != (model.height, model.width):
        raise ShapeError(f"{name}: image {img.shape[:2]} does not match checkpoint "
                         f"{(model.height, model.width)}")


def cmd_segment(args):
    cfg = _run_config(args)
    if not cfg.out or not cfg.data:
        raise UsageError("segment needs --data and --out")
    model = _load_model(cfg)
    pcfg = cfg.pipeline_config()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = _input_images(cfg.data)
    for path in paths:
        img = synthdata.load_image(path)
        _check_dims(model, img, path.name)
        d = pipeline.segment(model, img, pcfg, seed=cfg.seed)
        for w in d.warnings:
            log.warning("%s: %s", path.name, w)
        write_segmentation(out, path.stem, d)
    print(f"segmented {len(paths)} image(s) into {out}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

METRICS = (
    ("ari_fg", lambda p, t: metrics.ari(p, t, foreground_only=True)),
    ("ari_all", lambda p, t: metrics.ari(p, t, foreground_only=False)),
    ("ami_all", lambda p, t: metrics.ami(p, t, foreground_only=False)),
    ("ami_fg", lambda p, t: metrics.ami(p, t, foreground_only=True)),
)


def evaluate(images, labels, predict):
    """Score ``predict(image) -> label plane`` on a labeled set.

    Returns ``{metric: (mean, std, n)}``. Foreground-only metrics skip scenes
    without foreground pixels.
    """
    scores = {name: [] for name, _ in METRICS}
    for img, truth in zip(images, labels):
        pred = predict(img)
        for name, fn in METRICS:
            try:
                scores[name].append(fn(pred, truth))
            except metrics.EmptySelectionError:
                continue
    out = {}
    for name, vals in scores.items():
        arr = np.asarray(vals, dtype=np.float64)
        out[name] = (float(arr.mean()) if arr.size else float("nan"),
                     float(arr.std()) if arr.size else float("nan"), int(arr.size))
    return out


def format_scores(scores):
    lines = ["metric,mean,std"]
    for name, (mean, std, _) in scores.items():
        lines.append(f"{name},{mean:.6f},{std:.6f}")
    return "\n".join(lines) + "\n"


def cmd_eval(args):
    cfg = _run_config(args)
    if not cfg.data:
        raise UsageError("eval needs --data")
    try:
        images, labels = synthdata.load_dataset(cfg.data, with_labels=True)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    model = _load_model(cfg)
    pcfg = cfg.pipeline_config()
    for p, img in zip(synthdata.image_paths(cfg.data), images):
        _check_dims(model, img, p.name)

    def predict(img):
        return pipeline.hard_assignment(pipeline.segment(model, img, pcfg, seed=cfg.seed))

    sys.stdout.write(format_scores(evaluate(images, labels, predict)))
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="irgs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *flags):
        if "config" in flags:
            p.add_argument("--config", help="flat key = value config file")
        if "data" in flags:
            p.add_argument("--data")
        if "model" in flags:
            p.add_argument("--model", help="checkpoint path")
        p.add_argument("--out")
        p.add_argument("--seed", type=int)

    g = sub.add_parser("gen", help="generate a synthetic labeled dataset")
    common(g)
    g.add_argument("--count", type=int, default=64)
    g.add_argument("--size", type=int, default=32)
    g.add_argument("--min-objects", type=int, default=1)
    g.add_argument("--max-objects", type=int, default=2)
    g.add_argument("--min-size", type=int, default=6)
    g.add_argument("--max-size", type=int, default=10)
    g.add_argument("--occlusion", action="store_true")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a reconstructor")
    common(t, "config", "data")
    t.add_argument("--epochs", type=int)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("segment", help="decompose images into slot masks")
    common(s, "config", "data", "model")
    s.set_defaults(func=cmd_segment)

    e = sub.add_parser("eval", help="ARI / AMI against ground-truth labels")
    common(e, "config", "data", "model")
    e.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    set_threads_from_env()
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ShapeError, checkpoint.CheckpointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FloatingPointError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
