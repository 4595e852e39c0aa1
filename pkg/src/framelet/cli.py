"""Command-line front end.

Exit status: 0 on success, 2 on usage or parameter errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, FrameletError
from .hankel import hankel_lift, hankel_svd, singular_energy
from .imageio import DatasetSpec, load_image, save_image
from .metrics import NoiseSpec, SsimParams, add_noise, psnr, ssim
from .network import StageConfig, build_network, denoise_image, load_model, save_model
from .report import evaluate, write_report
from .training import TrainHistory, TrainPlan, train

NOISE_CHOICES = {"gaussian": "additive-gaussian", "speckle": "speckle"}

TRAIN_KEYS = {
    "config": str,
    "base_channels": int,
    "residual": "bool",
    "epochs": int,
    "steps_per_epoch": int,
    "batch_size": int,
    "patch_size": int,
    "lr": float,
    "halve_every": int,
    "noise": str,
    "sigma": float,
    "clip": "bool",
    "seed": int,
    "data": "path",
    "val_data": "path",
    "out": "path",
}


class UsageError(Exception):
    pass


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment.

    Relative paths are resolved against the config file's directory.
    """
    path = Path(path)
    base = path.parent
    cfg: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        kind = TRAIN_KEYS.get(key)
        if kind is None:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            if kind == "bool":
                cfg[key] = _parse_bool(value)
            elif kind == "path":
                cfg[key] = base / value
            else:
                cfg[key] = kind(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return cfg


def _provenance(**items) -> str:
    return " ".join([f"tool=framelet {__version__}"] + [f"{k}={v}" for k, v in items.items()])


def cmd_train(args) -> int:
    cfg = read_config(args.config)
    for key in ("config", "data", "out"):
        if key not in cfg:
            raise ConfigError(f"{args.config}: missing required key {key!r}")
    stage = StageConfig(cfg["config"], cfg.get("base_channels", 64), residual=cfg.get("residual", False))
    model = NOISE_CHOICES.get(cfg.get("noise", "gaussian"), cfg.get("noise"))
    seed = cfg.get("seed", 0)
    noise = NoiseSpec(model, cfg.get("sigma", 30.0), seed, cfg.get("clip", True))
    plan = TrainPlan(
        base_lr=cfg.get("lr", 1e-4),
        halve_every=cfg.get("halve_every", 25),
        epochs=cfg.get("epochs", 100),
        batch_size=cfg.get("batch_size", 8),
        patch_size=cfg.get("patch_size", 64),
        noise=noise,
        seed=seed,
        steps_per_epoch=cfg.get("steps_per_epoch"),
    )
    images = [im for _, im in DatasetSpec.from_dir(cfg["data"]).load()]
    val = None
    if "val_data" in cfg:
        val = [im for _, im in DatasetSpec.from_dir(cfg["val_data"]).load()]
    net = build_network(stage, seed=seed)

    def progress(rec):
        print(
            f"epoch {rec.epoch:4d} lr={rec.lr:.3g} loss={rec.loss:.6f} psnr={rec.psnr:.4f} ssim={rec.ssim:.4f}",
            file=sys.stderr,
        )

    net, history = train(net, images, plan, val_images=val, callback=progress)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    save_model(net, out / "model.frmlt")
    prov = _provenance(config=stage.digits, seed=seed, sigma=repr(float(noise.sigma)), noise=noise.model)
    (out / "history.csv").write_text(history.to_csv(prov))
    print(f"wrote {out / 'model.frmlt'} and {out / 'history.csv'}")
    return 0


def cmd_denoise(args) -> int:
    net = load_model(args.model)
    save_image(denoise_image(net, load_image(args.input)), args.output)
    return 0


def _resolve_models(spec: str, base_channels: int, seed: int):
    models, histories = {}, {}
    for entry in (e.strip() for e in spec.split(",")):
        if not entry:
            continue
        path = Path(entry)
        if path.is_file():
            net = load_model(path)
            name = net.config.digits if net.config.digits not in models else path.stem
            hist = path.parent / "history.csv"
            if hist.is_file():
                histories[name] = TrainHistory.from_csv(hist.read_text())
        elif entry and set(entry) <= set("24"):
            net = build_network(StageConfig(entry, base_channels), seed=seed)
            name = entry
        else:
            raise OSError(f"{entry}: model file not found and not a stage config string")
        if name in models:
            raise UsageError(f"duplicate model variant {name!r}")
        models[name] = net
    return models, histories


def cmd_eval(args) -> int:
    specs = [DatasetSpec.from_dir(d) for d in args.dataset]
    for s in specs:
        s.files()
    models, histories = _resolve_models(args.models, args.base_channels, args.seed)
    noise = NoiseSpec(NOISE_CHOICES[args.noise], args.sigma, args.seed, not args.no_clip)
    datasets = [(s.label, s.load()) for s in specs]
    report = evaluate(datasets, models, noise, args.seed, SsimParams(mode=args.ssim_mode))
    for path in write_report(report, args.out, histories):
        print(f"wrote {path}")
    for ds in report.datasets:
        cells = " ".join(
            f"{v}={report.mean(ds, v, 'psnr'):.4f}/{report.mean(ds, v, 'ssim'):.4f}" for v in report.columns
        )
        print(f"{ds}: {cells}")
    return 0


def cmd_noise(args) -> int:
    spec = NoiseSpec(NOISE_CHOICES[args.model], args.sigma, args.seed, not args.no_clip)
    save_image(add_noise(load_image(args.input), spec), args.output)
    return 0


def cmd_metrics(args) -> int:
    ref, test = load_image(args.ref), load_image(args.test)
    print(f"psnr={psnr(ref, test):.4f} ssim={ssim(ref, test, SsimParams(mode=args.mode)):.6f}")
    return 0


def read_signal(path) -> np.ndarray:
    text = Path(path).read_text()
    values = [
        tok
        for line in text.splitlines()
        if not line.lstrip().startswith("#")
        for tok in line.replace(",", " ").split()
    ]
    try:
        return np.array([float(v) for v in values])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric signal value ({exc})") from None


def cmd_decompose(args) -> int:
    svd = hankel_svd(hankel_lift(read_signal(args.signal), args.patch), args.rank_tol)
    energy = singular_energy(svd)
    print("rank,singular_value,energy,cumulative_energy")
    for i, (s, e, c) in enumerate(zip(svd.S, energy, np.cumsum(energy)), 1):
        print(f"{i},{float(s)!r},{float(e)!r},{float(c)!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="framelet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"framelet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network from a key=value config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("denoise", help="denoise one image with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("eval", help="evaluate models on dataset directories")
    p.add_argument("--dataset", required=True, action="append", help="image directory (repeatable)")
    p.add_argument("--models", required=True, help="comma-separated model files or stage strings")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--noise", choices=sorted(NOISE_CHOICES), default="gaussian")
    p.add_argument("--no-clip", action="store_true")
    p.add_argument("--base-channels", type=int, default=64, help="width of freshly built models")
    p.add_argument("--ssim-mode", choices=("windowed", "global"), default="windowed")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("noise", help="inject speckle or additive Gaussian noise")
    p.add_argument("--model", choices=sorted(NOISE_CHOICES), required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--no-clip", action="store_true")
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("metrics", help="PSNR and SSIM between two images")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--mode", choices=("windowed", "global"), default="windowed")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("decompose", help="singular values of a signal's Hankel lift")
    p.add_argument("--signal", required=True, help="file of comma- or whitespace-separated values")
    p.add_argument("--patch", type=int, required=True)
    p.add_argument("--rank-tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_decompose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    sigma = getattr(args, "sigma", None)
    if sigma is not None and not sigma >= 0:
        print(f"framelet {args.command}: error: sigma must be non-negative, got {sigma}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"framelet {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (FrameletError, OSError) as exc:
        print(f"framelet {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
