"""Mixed-wavelet encoder-decoder network.

The architecture is a U shape driven by a digit string such as ``"4422"``:
one encoder stage per digit, each running two 3x3 conv + ReLU layers and then
wavelet pooling with the digit's bank ('2' Haar/stride 2, '4' D4/stride 4).
The LL band goes one stage deeper; the LH/HL/HH bands skip across and are
stacked with the decoder's low band before wavelet unpooling.  A final 1x1
convolution maps back to one channel.
"""

from __future__ import annotations

import copy
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, CorruptModelError, NumericError, ShapeError, StateError
from .graph import OPS, ValueGraph
from .layers import pool_wavelet, unpool_wavelet  # noqa: F401  (re-exported)
from .wavelets import FilterBank2D, bank_from_digit, to_2d

MAGIC = b"FRMLT1"
FORMAT_VERSION = 1
RESIDUAL_SUFFIX = ";residual"


@dataclass(frozen=True)
class StageConfig:
    digits: str
    base_channels: int = 64
    conv_kernel: int = 3
    residual: bool = False

    def __post_init__(self):
        if not self.digits:
            raise ConfigError("stage config needs at least one digit")
        for ch in self.digits:
            if ch not in "24":
                raise ConfigError(f"invalid stage digit {ch!r} in {self.digits!r}")
        if self.base_channels < 1:
            raise ConfigError("base_channels must be positive")
        if self.conv_kernel != 3:
            raise ConfigError("only 3x3 convolutions are supported")

    @property
    def strides(self) -> list[int]:
        return [int(ch) for ch in self.digits]

    @property
    def input_multiple(self) -> int:
        return math.prod(self.strides)

    @property
    def depth(self) -> int:
        return len(self.digits)

    def channels(self) -> list[int]:
        return [self.base_channels * 2**i for i in range(self.depth)]


@dataclass(frozen=True)
class NetworkStage:
    name: str
    bank: FilterBank2D
    channels_in: int
    channels_out: int

    @property
    def conv_in(self) -> str:
        return f"{self.name}.conv1"

    @property
    def conv_out(self) -> str:
        return f"{self.name}.conv2"


@dataclass
class Network:
    config: StageConfig
    encoder: list[NetworkStage]
    bottleneck: NetworkStage
    decoder: list[NetworkStage]
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.params.values())).dtype

    def astype(self, dtype) -> "Network":
        out = copy.copy(self)
        out.params = {k: v.astype(dtype) for k, v in self.params.items()}
        return out

    def copy(self) -> "Network":
        return self.astype(self.dtype)

    def num_parameters(self) -> int:
        return sum(v.size for v in self.params.values())


def _layout(config: StageConfig) -> tuple[list[NetworkStage], NetworkStage, list[NetworkStage]]:
    chans = config.channels()
    banks = [to_2d(bank_from_digit(d)) for d in config.digits]
    encoder = [
        NetworkStage(f"enc{i}", banks[i], 1 if i == 0 else chans[i - 1], chans[i])
        for i in range(config.depth)
    ]
    deepest = chans[-1]
    bottleneck = NetworkStage("bottleneck", banks[-1], deepest, deepest)
    decoder = [
        NetworkStage(f"dec{i}", banks[i], chans[i], chans[i - 1] if i > 0 else chans[0])
        for i in reversed(range(config.depth))
    ]
    return encoder, bottleneck, decoder


def _param_shapes(net_layout, config: StageConfig) -> dict[str, tuple[int, ...]]:
    encoder, bottleneck, decoder = net_layout
    k = config.conv_kernel
    shapes: dict[str, tuple[int, ...]] = {}

    def block(stage: NetworkStage, mid: int) -> None:
        shapes[f"{stage.conv_in}.weight"] = (mid, stage.channels_in, k, k)
        shapes[f"{stage.conv_in}.bias"] = (mid,)
        shapes[f"{stage.conv_out}.weight"] = (stage.channels_out, mid, k, k)
        shapes[f"{stage.conv_out}.bias"] = (stage.channels_out,)

    for st in encoder:
        block(st, st.channels_out)
    # bottleneck widens then returns to the deepest encoder width
    block(bottleneck, 2 * bottleneck.channels_in)
    for st in decoder:
        block(st, st.channels_out)
    shapes["head.weight"] = (1, config.base_channels, 1, 1)
    shapes["head.bias"] = (1,)
    return shapes


def build_network(config: StageConfig | str, seed: int = 0, dtype=np.float32) -> Network:
    """Fresh network with Glorot-uniform weights and zero biases drawn from ``seed``."""
    if isinstance(config, str):
        config = StageConfig(config)
    layout = _layout(config)
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in _param_shapes(layout, config).items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape, dtype=dtype)
            continue
        field_size = shape[2] * shape[3]
        limit = math.sqrt(6.0 / (shape[0] * field_size + shape[1] * field_size))
        params[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
    return Network(config, *layout, params=params)


class _Eager:
    """Graph stand-in that evaluates ops immediately and records nothing."""

    def constant(self, value):
        return value

    def param(self, name, value):
        return value

    def value(self, v):
        return v

    def apply(self, op, *inputs, **attrs):
        outs, _ = OPS[op][0](attrs, *inputs)
        return outs if len(outs) > 1 else outs[0]


def _conv_relu(g, net: Network, name: str, x):
    y = g.apply("conv", x, g.param(f"{name}.weight", net.params[f"{name}.weight"]))
    y = g.apply("bias_add", y, g.param(f"{name}.bias", net.params[f"{name}.bias"]))
    return g.apply("relu", y)


def _block(g, net: Network, stage: NetworkStage, x):
    return _conv_relu(g, net, stage.conv_out, _conv_relu(g, net, stage.conv_in, x))


def _as_nchw(batch: np.ndarray) -> np.ndarray:
    if batch.ndim == 2:
        return batch[None, None]
    if batch.ndim == 3:
        return batch[:, None]
    if batch.ndim == 4 and batch.shape[1] == 1:
        return batch
    raise ShapeError(f"expected (H, W), (N, H, W) or (N, 1, H, W) input, got {batch.shape}")


def forward(net: Network, batch, graph: ValueGraph | None = None) -> np.ndarray:
    """Run the network; records into ``graph`` when one is given.

    Output has the same shape as ``batch``.
    """
    batch = np.asarray(batch)
    x = _as_nchw(batch).astype(net.dtype, copy=False)
    m = net.config.input_multiple
    if x.shape[2] % m or x.shape[3] % m:
        raise ShapeError(
            f"input {x.shape[2]}x{x.shape[3]} is not divisible by {m} for config {net.config.digits!r}"
        )
    g = graph if graph is not None else _Eager()
    inp = g.constant(x)
    h = inp
    skips = []
    for stage in net.encoder:
        h = _block(g, net, stage, h)
        h, highs = g.apply("wavelet_analysis", h, bank=stage.bank)
        skips.append(highs)
    h = _block(g, net, net.bottleneck, h)
    for stage, highs in zip(net.decoder, reversed(skips)):
        h = g.apply("wavelet_synthesis", h, highs, bank=stage.bank)
        h = _block(g, net, stage, h)
    y = g.apply("conv", h, g.param("head.weight", net.params["head.weight"]))
    y = g.apply("bias_add", y, g.param("head.bias", net.params["head.bias"]))
    if net.config.residual:
        y = g.apply("add", y, inp)
    out = g.value(y)
    if not np.all(np.isfinite(out)):
        raise NumericError("network produced non-finite activations")
    if graph is not None:
        graph.output = y
        graph.input_shape = batch.shape
    return out.reshape(batch.shape)


def backward(net: Network, graph: ValueGraph, output_grad) -> dict[str, np.ndarray]:
    """Parameter gradients for the computation recorded by :func:`forward`."""
    if graph.output is None:
        raise StateError("backward called before forward")
    output_grad = np.asarray(output_grad)
    if output_grad.shape != graph.input_shape:
        raise ShapeError(f"output gradient {output_grad.shape} does not match output {graph.input_shape}")
    grads = graph.backward(graph.output, _as_nchw(output_grad))
    return {name: grads.get(name, np.zeros_like(p)) for name, p in net.params.items()}


def denoise_image(net: Network, img, scale: float = 255.0) -> np.ndarray:
    """Denoise a 2-D image with intensities in ``[0, scale]``.

    Sides that are not a multiple of the network's input multiple are covered
    by two overlapping crops per axis (flush to each border) whose outputs are
    averaged, so no pixels are ever fabricated by padding.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeError(f"expected a 2-D image, got {img.shape}")
    m = net.config.input_multiple
    h, w = img.shape
    ch, cw = (h // m) * m, (w // m) * m
    if ch == 0 or cw == 0:
        raise ShapeError(f"image {h}x{w} is smaller than the input multiple {m}")
    offs_y = sorted({0, h - ch})
    offs_x = sorted({0, w - cw})
    crops = [(oy, ox) for oy in offs_y for ox in offs_x]
    batch = np.stack([img[oy : oy + ch, ox : ox + cw] for oy, ox in crops]) / scale
    pred = forward(net, batch).astype(np.float64) * scale
    total = np.zeros_like(img)
    count = np.zeros_like(img)
    for (oy, ox), p in zip(crops, pred):
        total[oy : oy + ch, ox : ox + cw] += p
        count[oy : oy + ch, ox : ox + cw] += 1
    return np.clip(total / count, 0.0, scale)


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def save_model(net: Network, path) -> None:
    """Write the ``FRMLT1`` container; tensors are stored as little-endian float32."""
    cfg = net.config.digits + (RESIDUAL_SUFFIX if net.config.residual else "")
    parts = [MAGIC, struct.pack("<H", FORMAT_VERSION), _pack_str(cfg), struct.pack("<I", len(net.params))]
    for name, arr in net.params.items():
        parts.append(_pack_str(name))
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptModelError("model file is truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (n,) = self.unpack("<I")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptModelError("model file has an undecodable string") from exc


def load_model(path) -> Network:
    data = Path(path).read_bytes()
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise CorruptModelError(f"{path}: bad magic bytes")
    (version,) = r.unpack("<H")
    if version != FORMAT_VERSION:
        raise CorruptModelError(f"{path}: unsupported format version {version}")
    cfg = r.string()
    residual = cfg.endswith(RESIDUAL_SUFFIX)
    digits = cfg[: -len(RESIDUAL_SUFFIX)] if residual else cfg
    (count,) = r.unpack("<I")
    params = {}
    for _ in range(count):
        name = r.string()
        (ndim,) = r.unpack("<I")
        shape = r.unpack(f"<{ndim}I")
        n = math.prod(shape)
        params[name] = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(shape).astype(np.float32)
    if r.pos != len(data):
        raise CorruptModelError(f"{path}: trailing bytes after last tensor")
    if "enc0.conv1.weight" not in params:
        raise CorruptModelError(f"{path}: missing first encoder weights")
    try:
        config = StageConfig(digits, base_channels=params["enc0.conv1.weight"].shape[0], residual=residual)
    except ConfigError as exc:
        raise CorruptModelError(f"{path}: {exc}") from exc
    layout = _layout(config)
    expected = _param_shapes(layout, config)
    if {k: v.shape for k, v in params.items()} != expected:
        raise CorruptModelError(f"{path}: tensor table does not match config {digits!r}")
    return Network(config, *layout, params={k: params[k] for k in expected})
