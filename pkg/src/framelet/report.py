"""Dataset evaluation and CSV report emission."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .metrics import NoiseSpec, SsimParams, add_noise, psnr, ssim
from .network import Network, denoise_image
from .training import TrainHistory

INPUT = "input"


@dataclass(frozen=True)
class ImageRow:
    dataset: str
    image: str
    variant: str
    psnr: float
    ssim: float


@dataclass
class EvalReport:
    variants: list[str] = field(default_factory=list)
    rows: list[ImageRow] = field(default_factory=list)
    provenance: dict[str, str] = field(default_factory=dict)

    @property
    def datasets(self) -> list[str]:
        return list(dict.fromkeys(r.dataset for r in self.rows))

    @property
    def columns(self) -> list[str]:
        return [INPUT, *self.variants]

    def mean(self, dataset: str, variant: str, metric: str) -> float:
        vals = [getattr(r, metric) for r in self.rows if r.dataset == dataset and r.variant == variant]
        return float(np.mean(vals)) if vals else float("nan")


def noise_seed(seed: int, dataset_index: int, image_index: int) -> int:
    return int(np.random.SeedSequence([seed, dataset_index, image_index]).generate_state(1)[0])


def evaluate(
    datasets: list[tuple[str, list[tuple[str, np.ndarray]]]],
    models: dict[str, Network],
    noise: NoiseSpec,
    seed: int = 0,
    ssim_params: SsimParams | None = None,
) -> EvalReport:
    """Score the noisy input and every model on each image of each dataset."""
    ssim_params = ssim_params or SsimParams()
    report = EvalReport(variants=list(models))
    for di, (label, images) in enumerate(datasets):
        for ii, (name, clean) in enumerate(sorted(images, key=lambda t: t[0])):
            noisy = add_noise(clean, replace(noise, seed=noise_seed(seed, di, ii)))
            outputs = {INPUT: noisy}
            outputs.update({v: denoise_image(net, noisy) for v, net in models.items()})
            for variant, out in outputs.items():
                report.rows.append(
                    ImageRow(label, name, variant, psnr(clean, out), ssim(clean, out, ssim_params))
                )
    report.provenance = {
        "tool": f"framelet {__version__}",
        "config": ",".join(models) or "-",
        "seed": str(seed),
        "sigma": repr(float(noise.sigma)),
        "noise": noise.model,
    }
    return report


def _comment(report: EvalReport) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in report.provenance.items()) + "\n"


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"{path}: cannot write report ({exc})") from exc


def write_report(report: EvalReport, out_dir, histories: dict[str, TrainHistory] | None = None) -> list[Path]:
    """Emit the PSNR/SSIM tables, per-image rows and training histories as CSV."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: cannot create report directory ({exc})") from exc
    head = _comment(report)
    written = []
    for metric, fname in (("psnr", "table_psnr.csv"), ("ssim", "table_ssim.csv")):
        lines = [",".join(["dataset", *report.columns])]
        for ds in report.datasets:
            vals = [repr(report.mean(ds, v, metric)) for v in report.columns]
            lines.append(",".join([ds, *vals]))
        written.append(out / fname)
        _write(written[-1], head + "\n".join(lines) + "\n")

    lines = ["dataset,image,variant,psnr,ssim"]
    lines += [f"{r.dataset},{r.image},{r.variant},{r.psnr!r},{r.ssim!r}" for r in report.rows]
    written.append(out / "per_image.csv")
    _write(written[-1], head + "\n".join(lines) + "\n")

    for variant, hist in (histories or {}).items():
        written.append(out / f"history_{variant}.csv")
        _write(written[-1], hist.to_csv(head[2:].strip() + f" variant={variant}"))
    return written
