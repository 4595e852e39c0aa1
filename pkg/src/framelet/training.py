"""Adam training loop with step-halving learning rate and random patch crops."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NumericError, ParameterError, ShapeError
from .graph import ValueGraph
from .metrics import NoiseSpec, SsimParams, add_noise, psnr, ssim
from .network import Network, backward, denoise_image, forward


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray], **hyper) -> "AdamState":
        return cls(
            {k: np.zeros_like(p) for k, p in params.items()},
            {k: np.zeros_like(p) for k, p in params.items()},
            **hyper,
        )


@dataclass(frozen=True)
class TrainPlan:
    base_lr: float = 1e-4
    halve_every: int = 25
    epochs: int = 100
    batch_size: int = 8
    patch_size: int = 64
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    # None: one crop per training image per epoch
    steps_per_epoch: int | None = None

    def __post_init__(self):
        if not self.base_lr > 0:
            raise ConfigError("base_lr must be positive")
        if self.halve_every < 1 or self.epochs < 0 or self.batch_size < 1 or self.patch_size < 1:
            raise ConfigError("halve_every, batch_size and patch_size must be positive; epochs >= 0")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    loss: float
    psnr: float
    ssim: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def to_csv(self, header_comment: str | None = None) -> str:
        lines = [f"# {header_comment}"] if header_comment else []
        lines.append("epoch,lr,loss,psnr,ssim")
        for r in self.records:
            lines.append(f"{r.epoch},{r.lr!r},{r.loss!r},{r.psnr!r},{r.ssim!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "TrainHistory":
        rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")][1:]
        records = []
        for ln in rows:
            e, lr, loss, p, s = ln.split(",")
            records.append(EpochRecord(int(e), float(lr), float(loss), float(p), float(s)))
        return cls(records)


def lr_schedule(epoch: int, plan: TrainPlan) -> float:
    if epoch < 0:
        raise ParameterError("epoch must be non-negative")
    return plan.base_lr / 2 ** (epoch // plan.halve_every)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState, lr: float):
    """Bias-corrected Adam update, applied in place.

    Gradients are screened first so a non-finite entry leaves both the
    parameters and the optimizer state untouched.
    """
    if not lr > 0:
        raise ParameterError("learning rate must be positive")
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.t
    corr2 = 1.0 - b2**state.t
    for name, g in grads.items():
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        step = (lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)).astype(params[name].dtype)
        params[name] -= step
    return params, state


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    diff = pred - target.astype(pred.dtype, copy=False)
    return float(np.mean(diff.astype(np.float64) ** 2)), (2.0 / diff.size) * diff


def sample_batch(images, plan: TrainPlan, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random crops and their noisy versions, both in ``[0, 255]``."""
    p = plan.patch_size
    clean = np.empty((plan.batch_size, p, p))
    for i in range(plan.batch_size):
        img = images[int(rng.integers(len(images)))]
        y = int(rng.integers(img.shape[0] - p + 1))
        x = int(rng.integers(img.shape[1] - p + 1))
        clean[i] = img[y : y + p, x : x + p]
    noise_seed = int(rng.integers(2**63))
    noisy = add_noise(clean, replace(plan.noise, seed=noise_seed))
    return clean, noisy


def train_step(net: Network, state: AdamState, noisy: np.ndarray, clean: np.ndarray, lr: float) -> float:
    """One Adam step on a batch scaled to ``[0, 1]``; returns the pre-update loss."""
    graph = ValueGraph()
    pred = forward(net, noisy / 255.0, graph)
    loss, grad = mse_loss(pred, clean / 255.0)
    if not math.isfinite(loss):
        raise NumericError(f"non-finite training loss at optimizer step {state.t + 1}")
    adam_step(net.params, backward(net, graph, grad), state, lr)
    return loss


def validate(net: Network, clean_images, noisy_images) -> tuple[float, float]:
    ps, ss = [], []
    for clean, noisy in zip(clean_images, noisy_images):
        out = denoise_image(net, noisy)
        ps.append(psnr(clean, out))
        ss.append(ssim(clean, out, SsimParams()))
    return float(np.mean(ps)), float(np.mean(ss))


def train(
    net: Network,
    images,
    plan: TrainPlan,
    val_images=None,
    callback=None,
) -> tuple[Network, TrainHistory]:
    """Train a copy of ``net`` and return it with the per-epoch history.

    Every batch draws crops and noise from its own substream of ``plan.seed``
    keyed by (epoch, step), so runs are reproducible and noise is never
    reused.  Validation uses a fixed noisy copy of ``val_images`` (defaults
    to the training images).
    """
    images = [np.asarray(im, dtype=np.float64) for im in images]
    if not images:
        raise ConfigError("training set is empty")
    m = net.config.input_multiple
    if plan.patch_size % m:
        raise ConfigError(f"patch size {plan.patch_size} is not a multiple of {m}")
    for im in images:
        if im.ndim != 2 or min(im.shape) < plan.patch_size:
            raise ConfigError(f"image of shape {im.shape} cannot yield a {plan.patch_size} patch")
    net = net.copy()
    history = TrainHistory()
    if plan.epochs == 0:
        return net, history

    val_clean = images if val_images is None else [np.asarray(v, dtype=np.float64) for v in val_images]
    val_seed = np.random.SeedSequence([plan.seed, 2**31 - 1]).generate_state(1)[0]
    val_noisy = [add_noise(v, replace(plan.noise, seed=int(val_seed) + i)) for i, v in enumerate(val_clean)]

    steps = plan.steps_per_epoch or math.ceil(len(images) / plan.batch_size)
    state = AdamState.zeros_like(net.params)
    for epoch in range(plan.epochs):
        lr = lr_schedule(epoch, plan)
        losses = []
        for step in range(steps):
            rng = np.random.default_rng([plan.seed, epoch, step])
            clean, noisy = sample_batch(images, plan, rng)
            losses.append(train_step(net, state, noisy, clean, lr))
        vp, vs = validate(net, val_clean, val_noisy)
        rec = EpochRecord(epoch, lr, float(np.mean(losses)), vp, vs)
        history.records.append(rec)
        if callback is not None:
            callback(rec)
    return net, history
