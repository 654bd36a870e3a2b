"""Memory-bounded overlap-save inference.

The image is split into a grid of destination rectangles that partition it
exactly.  Each tile's source rectangle is the destination dilated by the
overlap pad and clipped to the image; running the network on the source and
keeping only the destination region reproduces whole-image output, because
the pad covers the network's receptive field and tile edges that coincide
with the image border see the same zero padding the whole-image pass does.
"""

from dataclasses import dataclass

import numpy as np

from .nn import conv_layer_count, network_forward


def effective_kernel_size(cfg):
    """Receptive-field extent of the stacked convolutions: (k-1)*l + 1."""
    return (cfg.kernel - 1) * conv_layer_count(cfg) + 1


def overlap_pad(effective):
    """Per-side pad in pixels; (E+1)/2, rounded up for hypothetical even E."""
    return (effective + 2) // 2


@dataclass
class Rect:
    top: int
    left: int
    height: int
    width: int

    @property
    def bottom(self):
        return self.top + self.height

    @property
    def right(self):
        return self.left + self.width


@dataclass
class Tile:
    src: Rect
    dst: Rect
    # how much of the pad on each side came from real pixels; the remainder
    # up to `pad` fell off the image boundary and is handled by zero padding
    real_pad: tuple


@dataclass
class TilePlan:
    grid_rows: int
    grid_cols: int
    pad: int
    tiles: list


def _splits(extent, parts):
    """Near-equal split: the first extent % parts cells get one extra pixel."""
    base, rem = divmod(extent, parts)
    sizes = [base + 1 if i < rem else base for i in range(parts)]
    starts = np.cumsum([0] + sizes[:-1]).tolist()
    return list(zip(starts, sizes))


def plan_tiles(height, width, grid_rows, grid_cols, effective):
    if height < 1 or width < 1:
        raise ValueError("image must be at least 1x1")
    if grid_rows < 1 or grid_cols < 1:
        raise ValueError("grid cells must be >= 1")
    pad = overlap_pad(effective)
    tiles = []
    for top, th in _splits(height, grid_rows):
        for left, tw in _splits(width, grid_cols):
            dst = Rect(top, left, th, tw)
            src_top = max(0, top - pad)
            src_left = max(0, left - pad)
            src_bottom = min(height, top + th + pad)
            src_right = min(width, left + tw + pad)
            src = Rect(src_top, src_left, src_bottom - src_top, src_right - src_left)
            real = (
                top - src_top,
                src_bottom - (top + th),
                left - src_left,
                src_right - (left + tw),
            )
            tiles.append(Tile(src, dst, real))
    return TilePlan(grid_rows, grid_cols, pad, tiles)


def tiled_forward(img, m, grid=(2, 2), exact=False, tile_hook=None):
    """Run the network tile by tile; output matches the whole-image pass.

    `tile_hook(tile, padded_shape)` is called before each tile runs, for
    working-set accounting in tests.
    """
    rows, cols = grid
    _, height, width = img.shape
    plan = plan_tiles(height, width, rows, cols, effective_kernel_size(m.config))
    out = np.empty_like(img)
    for tile in plan.tiles:
        s, d = tile.src, tile.dst
        src = img[:, s.top:s.bottom, s.left:s.right]
        if tile_hook is not None:
            tile_hook(tile, src.shape)
        res = network_forward(src, m, exact)
        oy = d.top - s.top
        ox = d.left - s.left
        out[:, d.top:d.bottom, d.left:d.right] = res[
            :, oy:oy + d.height, ox:ox + d.width
        ]
    return out


def working_set_estimate(height, width, grid, cfg, bytes_per_value=4):
    """Rough peak bytes for one padded tile: two activation buffers of n maps."""
    rows, cols = grid
    pad = overlap_pad(effective_kernel_size(cfg))
    tile_h = -(-height // rows) + 2 * pad
    tile_w = -(-width // cols) + 2 * pad
    return 2 * cfg.feature_maps * tile_h * tile_w * bytes_per_value


def grid_for_budget(height, width, cfg, budget_bytes, max_cells=16):
    """Smallest grid (fewest tiles) whose working-set estimate fits the budget."""
    candidates = sorted(
        ((r, c) for r in range(1, max_cells + 1) for c in range(1, max_cells + 1)),
        key=lambda rc: (rc[0] * rc[1], abs(rc[0] - rc[1]), rc),
    )
    for grid in candidates:
        if working_set_estimate(height, width, grid, cfg) <= budget_bytes:
            return grid
    raise ValueError(
        f"no grid up to {max_cells}x{max_cells} fits a {budget_bytes}-byte budget"
    )
