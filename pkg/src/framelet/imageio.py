"""Raster I/O and dataset directories."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
KNOWN_DATASETS = ("set12", "set14", "bsd68")
DEFAULT_PATTERNS = ("*.png", "*.pgm", "*.PNG", "*.PGM", "*.jpg", "*.jpeg", "*.bmp", "*.tif", "*.tiff")


def load_image(path) -> np.ndarray:
    """Read a raster as float64 luminance in ``[0, 255]``."""
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            im.load()
            if im.mode == "L":
                return np.asarray(im, dtype=np.float64)
            if im.mode in ("I;16", "I;16B", "I"):
                raise OSError(f"{path}: only 8-bit rasters are supported (mode {im.mode})")
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    except FileNotFoundError as exc:
        raise OSError(f"{path}: no such file") from exc
    except (UnidentifiedImageError, ValueError) as exc:
        raise OSError(f"{path}: cannot decode image ({exc})") from exc
    return rgb @ LUMA_WEIGHTS


def save_image(img, path) -> None:
    """Write an 8-bit grayscale PNG/PGM (format from the suffix)."""
    arr = np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)
    try:
        PILImage.fromarray(arr, mode="L").save(path)
    except (OSError, ValueError, KeyError) as exc:
        raise OSError(f"{path}: cannot write image ({exc})") from exc


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    root: Path
    pattern: str | None = None
    grayscale: bool = True

    @classmethod
    def from_dir(cls, root, pattern: str | None = None) -> "DatasetSpec":
        root = Path(root)
        name = root.name.lower()
        return cls(name if name in KNOWN_DATASETS else "custom", root, pattern)

    @property
    def label(self) -> str:
        return self.name if self.name != "custom" else self.root.name

    def files(self) -> list[Path]:
        if not self.root.is_dir():
            raise OSError(f"{self.root}: dataset directory does not exist")
        patterns = (self.pattern,) if self.pattern else DEFAULT_PATTERNS
        found = {p for pat in patterns for p in self.root.glob(pat) if p.is_file()}
        files = sorted(found, key=lambda p: p.name)
        if not files:
            raise OSError(f"{self.root}: no images found")
        return files

    def load(self) -> list[tuple[str, np.ndarray]]:
        """``(filename, luminance image)`` pairs sorted by filename."""
        return [(p.name, load_image(p)) for p in self.files()]
