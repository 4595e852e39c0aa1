"""Deterministic piecewise-smooth test images standing in for natural photos."""

import numpy as np


def synthetic_image(size=64, seed=0, shape=None):
    h, w = shape if shape is not None else (size, size)
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    img = 60 + 80 * (rng.uniform(-1, 1) * xx + rng.uniform(-1, 1) * yy)
    for _ in range(4):
        y0, y1 = np.sort(rng.uniform(0, 1, 2))
        x0, x1 = np.sort(rng.uniform(0, 1, 2))
        img[(yy >= y0) & (yy < y1) & (xx >= x0) & (xx < x1)] += rng.uniform(-70, 70)
    for _ in range(3):
        cy, cx, r = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.08, 0.3)
        img[(yy - cy) ** 2 + (xx - cx) ** 2 < r * r] = rng.uniform(20, 235)
    img += 10 * np.sin(2 * np.pi * rng.uniform(2, 5) * xx)
    return np.clip(img, 0, 255)


def synthetic_set(n=3, size=64, seed=0):
    return [synthetic_image(size, seed + i) for i in range(n)]
