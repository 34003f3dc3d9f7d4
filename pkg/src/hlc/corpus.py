"""Deterministic synthetic images for testing and calibration.

Two corpora are generated: a mixed set (gradients, band-limited noise,
soft patterns, sparse text) whose images stay rate-controllable across the
codec's operating range, and a dense glyph-page set that plays to the
palette's strengths for the ablation study.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import Frame, make_frame
from .imageio import store_image

DEFAULT_SEED = 20260808


def _to_frame(arr: np.ndarray) -> Frame:
    arr = np.clip(np.rint(arr), 0, 255).astype(np.int32)
    return make_frame((arr[..., 0], arr[..., 1], arr[..., 2]), bit_depth=8)


def gradient_image(width: int, height: int, rng, min_slope: float = 0.7,
                   max_slope: float = 1.05) -> Frame:
    """Affine color ramp with a guaranteed per-component slope.

    The slope floor keeps every 16x4 block's color span large enough that
    the clustering threshold sweep actually changes the cluster count, so
    rate control can trade rate for distortion on these images.
    """
    arr = np.empty((height, width, 3), dtype=np.float64)
    ys = np.arange(height)[:, None]
    xs = np.arange(width)[None, :]
    for c in range(3):
        slope = rng.uniform(min_slope, max_slope)
        theta = rng.uniform(0, 2 * np.pi)
        sx, sy = slope * np.cos(theta), slope * np.sin(theta)
        ramp = sx * xs + sy * ys
        lo, hi = ramp.min(), ramp.max()
        span = hi - lo
        if span > 200.0:
            ramp *= 200.0 / span
            lo, hi = ramp.min(), ramp.max()
        base = rng.uniform(25 - lo, 230 - hi)
        arr[:, :, c] = base + ramp
    return _to_frame(arr)


def posterized_image(width: int, height: int, rng, spacing: float = 24.0) -> Frame:
    """Gradient quantized to flat color regions with steps of `spacing`.

    Region interiors are single colors and boundaries hold a few exact
    colors, which plays to the palette's strengths at every threshold.
    """
    base = gradient_image(width, height, rng, min_slope=0.9, max_slope=1.3)
    arr = np.stack(base.planes, axis=-1).astype(np.float64)
    arr = np.floor(arr / spacing) * spacing + spacing / 2
    return _to_frame(arr)


def _smooth_noise(width: int, height: int, rng, amplitude: float, scale: int):
    """Band-limited noise: low-res uniform noise upsampled bilinearly."""
    gh = max(2, height // scale)
    gw = max(2, width // scale)
    grid = rng.uniform(-amplitude, amplitude, size=(gh, gw, 3))
    ys = np.linspace(0, gh - 1, height)
    xs = np.linspace(0, gw - 1, width)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, gh - 1)
    x1 = np.minimum(x0 + 1, gw - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    a = grid[y0][:, x0] * (1 - fx) + grid[y0][:, x1] * fx
    b = grid[y1][:, x0] * (1 - fx) + grid[y1][:, x1] * fx
    return a * (1 - fy) + b * fy


def noisy_gradient_image(width: int, height: int, rng,
                         smooth_amp: float = 12.0, fine_amp: float = 3.0) -> Frame:
    base = gradient_image(width, height, rng)
    arr = np.stack(base.planes, axis=-1).astype(np.float64)
    arr += _smooth_noise(width, height, rng, smooth_amp, scale=24)
    if fine_amp > 0:
        arr += rng.uniform(-fine_amp, fine_amp, size=arr.shape)
    return _to_frame(arr)


def blob_image(width: int, height: int, rng, blobs: int = 4) -> Frame:
    """Soft radial blobs over a gradient background."""
    base = gradient_image(width, height, rng, min_slope=0.5, max_slope=0.8)
    arr = np.stack(base.planes, axis=-1).astype(np.float64)
    ys = np.arange(height)[:, None]
    xs = np.arange(width)[None, :]
    for _ in range(blobs):
        cx = rng.uniform(0, width)
        cy = rng.uniform(0, height)
        radius = rng.uniform(0.25, 0.45) * min(width, height)
        color = rng.uniform(-45, 45, size=3)
        d2 = ((xs - cx) ** 2 + (ys - cy) ** 2) / (radius * radius)
        mask = np.exp(-d2)[:, :, None]
        arr += mask * color
    return _to_frame(arr)


def wave_image(width: int, height: int, rng, contrast: float = 20.0) -> Frame:
    """Low-contrast, long-wavelength sinusoidal interference pattern."""
    base = rng.uniform(90, 170, size=3)
    fy = rng.uniform(0.008, 0.02)
    fx = rng.uniform(0.008, 0.02)
    ys = np.arange(height)[:, None]
    xs = np.arange(width)[None, :]
    wave = np.sin(2 * np.pi * (fx * xs + fy * ys)) + np.sin(2 * np.pi * (fx * xs - fy * ys))
    arr = base[None, None, :] + contrast * 0.5 * wave[:, :, None] * rng.uniform(0.5, 1.0, size=3)
    return _to_frame(arr)


def _glyph_font(rng, count: int = 48, gw: int = 6, gh: int = 8) -> np.ndarray:
    return rng.random(size=(count, gh, gw)) < 0.45


def _box_blur(arr: np.ndarray) -> np.ndarray:
    """Separable [1,2,1]/4 blur along both image axes."""
    out = arr.copy()
    out[1:-1] = (arr[:-2] + 2 * arr[1:-1] + arr[2:]) / 4.0
    arr = out
    out = arr.copy()
    out[:, 1:-1] = (arr[:, :-2] + 2 * arr[:, 1:-1] + arr[:, 2:]) / 4.0
    return out


def text_image(width: int, height: int, rng, coverage: float = 0.6,
               fg_colors=((20, 20, 24),), bg=(235, 235, 230),
               bg_slope: float = 0.05, antialias: float = 0.0,
               glyph_scale: int = 1) -> Frame:
    """Glyph-like page: random pseudo-glyphs blitted on a near-flat page.

    coverage is the probability that a glyph cell on a text line is drawn;
    line pitch leaves one blank cell row between lines.  antialias in
    (0, 1] blends in a blurred copy, softening glyph edges the way
    rendered screen text looks while stroke interiors stay flat when
    glyph_scale > 1.
    """
    arr = np.empty((height, width, 3), dtype=np.float64)
    ramp = (np.arange(height)[:, None] + np.arange(width)[None, :]) * bg_slope
    for c in range(3):
        arr[:, :, c] = bg[c] - ramp  # page darkens away from the corner
    _blit_glyph_lines(arr, rng, coverage, fg_colors, glyph_scale)
    if antialias > 0:
        arr = (1.0 - antialias) * arr + antialias * _box_blur(arr)
    return _to_frame(arr)


def _blit_glyph_lines(arr, rng, coverage, fg_colors, glyph_scale=1):
    height, width = arr.shape[:2]
    font = _glyph_font(rng)
    if glyph_scale > 1:
        font = np.repeat(np.repeat(font, glyph_scale, axis=1), glyph_scale, axis=2)
    gh, gw = font.shape[1:]
    cell_h, cell_w = gh + 4, gw + 2
    fg_colors = [np.array(c, dtype=np.float64) for c in fg_colors]
    for row in range(0, height - cell_h, cell_h):
        color = fg_colors[int(rng.integers(len(fg_colors)))]
        for col in range(2, width - cell_w, cell_w):
            if rng.random() >= coverage:
                continue
            glyph = font[int(rng.integers(len(font)))]
            region = arr[row + 2 : row + 2 + gh, col : col + gw]
            region[glyph] = color


def make_test_corpus(directory, seed: int = DEFAULT_SEED, size: int = 256):
    """Write the mixed 20-image test corpus; returns sorted paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    images = []
    for i in range(6):
        images.append((f"gradient_{i}", gradient_image(size, size, rng)))
    for i, amp in enumerate((8.0, 10.0, 12.0, 16.0, 20.0)):
        images.append((f"noise_{i}", noisy_gradient_image(size, size, rng, smooth_amp=amp)))
    for i in range(4):
        images.append((f"blobs_{i}", blob_image(size, size, rng)))
    for i, cov in enumerate((0.015, 0.03)):
        images.append(
            (
                f"text_sparse_{i}",
                text_image(size, size, rng, coverage=cov,
                           fg_colors=((25, 25, 30), (120, 40, 40)),
                           bg_slope=0.35),
            )
        )
    images.append(("noise_fine", noisy_gradient_image(size, size, rng, smooth_amp=6.0, fine_amp=4.0)))
    images.append(("noise_coarse", noisy_gradient_image(size, size, rng, smooth_amp=24.0, fine_amp=2.0)))
    images.append(("gradient_steep", gradient_image(size, size, rng, min_slope=1.1, max_slope=1.4)))
    paths = []
    for i, (name, frame) in enumerate(images):
        ext = ".png" if i % 5 == 0 else ".ppm"
        path = directory / f"{name}{ext}"
        store_image(frame, path)
        paths.append(path)
    return sorted(paths)


def make_text_corpus(directory, count: int = 8, seed: int = DEFAULT_SEED,
                     size: int = 256):
    """Write the dense glyph-page corpus used for the palette ablation.

    Crisp dark glyphs over a lightly textured page: the text is exactly
    representable by a small palette while the background keeps the rate
    responsive to the quantization parameter.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed + 1)
    palettes = [
        ((15, 15, 20),),
        ((15, 15, 20), (150, 30, 30)),
        ((30, 30, 120), (15, 15, 20)),
        ((15, 15, 20), (20, 110, 40), (150, 30, 30)),
    ]
    paths = []
    for i in range(count):
        bg = noisy_gradient_image(size, size, rng, smooth_amp=10.0, fine_amp=2.0)
        arr = np.stack(bg.planes, axis=-1).astype(np.float64)
        arr = np.clip(arr, 120.0, 255.0)  # keep the page light under dark ink
        _blit_glyph_lines(arr, rng, coverage=0.8,
                          fg_colors=palettes[i % len(palettes)])
        path = directory / f"text_page_{i}.ppm"
        store_image(_to_frame(arr), path)
        paths.append(path)
    return sorted(paths)
