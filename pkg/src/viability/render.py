"""Lossless raster images of fields and learning snapshots.

Rows are state cells (first state axis top to bottom), columns are action
cells.  Each cell is drawn as a ``scale x scale`` block.  Colors:

* background: white
* measure heatmap: white to green, linear in value / max value
* optimistic set: light blue (150, 200, 255), blended 50% over the heatmap
* cautious set: dark blue (20, 60, 160), blended 60%
* sample: red (220, 0, 0) filled square in the sample's cell
* failed sample: red diagonal cross in the cell

Only 2-D grids (one state axis, one action axis) are supported.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from viability.grids import ProductGrid

WHITE = np.array([255, 255, 255], dtype=float)
GREEN = np.array([30, 150, 60], dtype=float)
OPT_BLUE = np.array([150, 200, 255], dtype=float)
CAUT_BLUE = np.array([20, 60, 160], dtype=float)
RED = np.array([220, 0, 0], dtype=np.uint8)


class RenderError(ValueError):
    pass


def _check_2d(grid: ProductGrid):
    if grid.n_state_dims != 1 or grid.n_action_dims != 1:
        raise RenderError("rendering supports one state axis and one action axis only")


def heatmap(values, vmax=None) -> np.ndarray:
    """``(rows, cols, 3)`` float image, white (0) to green (vmax)."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    top = float(np.max(values)) if vmax is None else float(vmax)
    frac = np.clip(values / top, 0.0, 1.0) if top > 0 else np.zeros_like(values)
    return WHITE + frac[..., None] * (GREEN - WHITE)


def overlay(image, mask, color, alpha) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)[..., None]
    return np.where(mask, (1 - alpha) * image + alpha * color, image)


def upscale(image, scale: int) -> np.ndarray:
    return np.repeat(np.repeat(image, scale, axis=0), scale, axis=1)


def draw_markers(pixels, cells, failed, scale: int) -> int:
    """Draw sample markers in place; returns the number drawn."""
    count = 0
    for (r, c), f in zip(cells, failed):
        r0, c0 = r * scale, c * scale
        if f:
            for k in range(scale):
                pixels[r0 + k, c0 + k] = RED
                pixels[r0 + k, c0 + scale - 1 - k] = RED
        else:
            lo, hi = scale // 4, scale - scale // 4
            pixels[r0 + lo:r0 + hi, c0 + lo:c0 + hi] = RED
        count += 1
    return count


def render_field(field_, scale: int = 8, vmax=None) -> Image.Image:
    """Image of a single field: sets in cautious blue, scalars as a green heatmap."""
    values = np.asarray(field_.values)
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2:
        raise RenderError("only 2-D fields can be rendered")
    if values.dtype == bool:
        img = overlay(np.broadcast_to(WHITE, values.shape + (3,)), values, CAUT_BLUE, 1.0)
    else:
        img = heatmap(values, vmax)
    return Image.fromarray(upscale(np.rint(img).astype(np.uint8), scale))


def render_snapshot(grid: ProductGrid, q_estimate, opt, caut, samples=(), scale: int = 8, vmax=None):
    """Composite image; ``samples`` is a list of ``(state, action, failed)``.

    Returns ``(image, markers_drawn)``.
    """
    _check_2d(grid)
    img = heatmap(q_estimate, vmax)
    img = overlay(img, opt, OPT_BLUE, 0.5)
    img = overlay(img, caut, CAUT_BLUE, 0.6)
    pixels = upscale(np.rint(img).astype(np.uint8), scale)
    s_ax, a_ax = grid.state_axes[0], grid.action_axes[0]
    cells, failed = [], []
    for s, a, f in samples:
        cells.append((s_ax.snap(s)[0], a_ax.snap(a)[0]))
        failed.append(bool(f))
    drawn = draw_markers(pixels, cells, failed, scale)
    return Image.fromarray(pixels), drawn


def _read_csv_values(path, shape):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, -1].reshape(shape)


def render_run(learn_dir, out_dir=None, scale: int = 8) -> list:
    """One PNG per snapshot of a learn run directory.

    Returns a list of ``{"image", "iteration", "markers", "failures"}``.
    """
    from viability.config import ExperimentConfig

    learn_dir = Path(learn_dir)
    cfg_path, trace_path = learn_dir / "config.yaml", learn_dir / "trace.jsonl"
    for p in (cfg_path, trace_path):
        if not p.exists():
            raise RenderError(f"missing {p}")
    grid = ExperimentConfig.load(cfg_path).make_grid()
    _check_2d(grid)
    records = []
    with open(trace_path) as fh:
        for line_no, line in enumerate(fh, 1):
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise RenderError(f"{trace_path}:{line_no}: corrupt trace line") from exc
    out_dir = Path(out_dir) if out_dir is not None else learn_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    snaps = sorted(learn_dir.glob("snapshot_*_opt.csv"))
    if not snaps:
        raise RenderError(f"no snapshots in {learn_dir}")
    results = []
    for opt_path in snaps:
        k = int(opt_path.name.split("_")[1])
        stem = learn_dir / f"snapshot_{k:04d}"
        try:
            opt = _read_csv_values(f"{stem}_opt.csv", grid.shape).astype(bool)
            caut = _read_csv_values(f"{stem}_caut.csv", grid.shape).astype(bool)
            mean = _read_csv_values(f"{stem}_mean.csv", grid.shape)
        except (OSError, ValueError) as exc:
            raise RenderError(f"corrupt snapshot {stem}: {exc}") from exc
        upto = records[:k]
        samples = [(r["state"][0], r["action"][0], r["failed"]) for r in upto]
        vmax = grid.n_actions * grid.action_cell_volume
        image, drawn = render_snapshot(grid, np.clip(mean, 0, None), opt, caut, samples, scale, vmax)
        path = out_dir / f"snapshot_{k:04d}.png"
        image.save(path)
        results.append({"image": str(path), "iteration": k, "markers": drawn,
                        "failures": sum(1 for r in upto if r["failed"])})
    return results
