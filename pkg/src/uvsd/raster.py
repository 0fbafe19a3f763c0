"""Grid cutting, clockwise diffusion and frame rendering."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .seeding import derive_rng

MIN_EXTENT = 1.0


class CanvasOverflow(ValueError):
    def __init__(self, cols: int, rows: int, canvas: int):
        self.required = max(cols, rows)
        super().__init__(f"grid {cols}x{rows} does not fit a {canvas}x{canvas} canvas; need canvas >= {self.required}")


@dataclass(frozen=True)
class RasterConfig:
    gamma: float = 1.3
    canvas: int = 64
    brightness_cap: float = 5.0
    min_visible: float = 0.15

    def __post_init__(self):
        if self.gamma <= 0 or self.canvas < 1 or self.brightness_cap <= 0:
            raise ValueError("gamma, canvas and brightness_cap must be positive")
        # a zero floor would let dim users vanish into the background
        if not 0 < self.min_visible <= 1:
            raise ValueError("min_visible must lie in (0, 1]")


@dataclass
class GridLayout:
    """Cell occupancy over a cols x rows grid; cells are (col, row)."""

    cell_size: float
    origin: tuple
    cols: int
    rows: int
    occupancy: dict = field(default_factory=dict)  # (col, row) -> list of node ids

    def counts(self) -> dict:
        return {cell: len(ids) for cell, ids in self.occupancy.items()}

    def node_cells(self) -> dict:
        return {nid: cell for cell, ids in self.occupancy.items() for nid in ids}

    def is_injective(self) -> bool:
        return all(len(ids) == 1 for ids in self.occupancy.values())

    def node_multiset(self) -> list:
        return sorted((nid for ids in self.occupancy.values() for nid in ids), key=repr)


def cut_distance(h_dis: float, v_dis: float, node_count: int, gamma: float) -> float:
    """Cell edge length so the bounding box holds about node_count * gamma cells.

    Flat axes are widened to ``MIN_EXTENT`` first.
    """
    if node_count < 1 or gamma <= 0:
        raise ValueError("node_count must be >= 1 and gamma > 0")
    if h_dis < 0 or v_dis < 0:
        raise ValueError("extents must be non-negative")
    h_dis = h_dis if h_dis > 0 else MIN_EXTENT
    v_dis = v_dis if v_dis > 0 else MIN_EXTENT
    return math.sqrt(h_dis * v_dis / (node_count * gamma))


def _as_arrays(coords):
    if isinstance(coords, dict):
        ids = list(coords)
        xy = np.array([coords[i] for i in ids], dtype=np.float64).reshape(len(ids), 2)
    else:
        ids, xy = list(coords.ids), np.asarray(coords.xy, dtype=np.float64)
    return ids, xy


def assign_grid(coords, cell_size: float) -> GridLayout:
    """Bin nodes to cells by flooring offsets from the bounding-box minimum."""
    ids, xy = _as_arrays(coords)
    if not ids:
        raise ValueError("no coordinates to grid")
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    if not np.all(np.isfinite(xy)):
        raise ValueError("coordinates must be finite")
    lo = xy.min(axis=0)
    ext = xy.max(axis=0) - lo
    idx = np.floor((xy - lo) / cell_size).astype(np.int64)
    cols = int(math.floor(ext[0] / cell_size)) + 1
    rows = int(math.floor(ext[1] / cell_size)) + 1
    # floor of the max coordinate can land one past the extent through rounding
    idx[:, 0] = np.minimum(idx[:, 0], cols - 1)
    idx[:, 1] = np.minimum(idx[:, 1], rows - 1)
    occ: dict = {}
    for nid, (c, r) in zip(ids, idx):
        occ.setdefault((int(c), int(r)), []).append(nid)
    return GridLayout(float(cell_size), (float(lo[0]), float(lo[1])), cols, rows, occ)


def grid_for(coords, node_count: int | None = None, gamma: float = 1.3) -> GridLayout:
    """Cut distance from the coordinates' bounding box, then binning."""
    ids, xy = _as_arrays(coords)
    if not ids:
        raise ValueError("no coordinates to grid")
    ext = xy.max(axis=0) - xy.min(axis=0)
    cell = cut_distance(float(ext[0]), float(ext[1]), node_count or len(ids), gamma)
    return assign_grid(coords, cell)


def ring_offsets(r: int) -> list:
    """Offsets (dcol, drow) at Chebyshev distance r, clockwise from north.

    Row indices grow southwards, so north is drow = -1.
    """
    if r == 0:
        return [(0, 0)]
    out = [(dc, -r) for dc in range(0, r + 1)]  # north to north-east corner
    out += [(r, dr) for dr in range(-r + 1, r + 1)]  # east side, down to south-east
    out += [(dc, r) for dc in range(r - 1, -r - 1, -1)]  # south side, west to south-west
    out += [(-r, dr) for dr in range(r - 1, -r - 1, -1)]  # west side, up to north-west
    out += [(dc, -r) for dc in range(-r + 1, 0)]  # back along the top to just before north
    return out


def _probe(origin_cell, occupied, cols, rows):
    c0, r0 = origin_cell
    max_r = max(c0, cols - 1 - c0, r0, rows - 1 - r0)
    for r in range(1, max_r + 1):
        for dc, dr in ring_offsets(r):
            c, rr = c0 + dc, r0 + dr
            if 0 <= c < cols and 0 <= rr < rows and (c, rr) not in occupied:
                return (c, rr)
    return None


def diffuse(layout: GridLayout, seed: int = 0) -> GridLayout:
    """Keep one randomly chosen node per crowded cell and spill the rest clockwise.

    Crowded cells are handled in row-major order. Each spilled node takes the
    first free cell met while probing rings outward, each ring clockwise from
    its north cell. A full grid gains one ring of cells on every side.
    """
    cols, rows = layout.cols, layout.rows
    shift = 0  # accumulated growth offset applied to original cell indices
    origin = layout.origin
    occupied: dict = {}
    crowded = []
    for cell in sorted(layout.occupancy, key=lambda cr: (cr[1], cr[0])):
        ids = layout.occupancy[cell]
        if len(ids) == 1:
            occupied[cell] = ids[0]
        elif ids:
            crowded.append((cell, list(ids)))
    # retained nodes are fixed first so spills never land on an unprocessed crowded cell
    spills = []
    for cell, ids in crowded:
        keep = int(derive_rng(seed, "diffuse", cell[0], cell[1]).integers(len(ids)))
        occupied[cell] = ids[keep]
        spills.append((cell, ids[:keep] + ids[keep + 1:]))
    for cell, rest in spills:
        for nid in rest:
            here = (cell[0] + shift, cell[1] + shift)
            spot = _probe(here, occupied, cols, rows)
            while spot is None:
                occupied = {(c + 1, r + 1): v for (c, r), v in occupied.items()}
                shift += 1
                cols += 2
                rows += 2
                origin = (origin[0] - layout.cell_size, origin[1] - layout.cell_size)
                here = (cell[0] + shift, cell[1] + shift)
                spot = _probe(here, occupied, cols, rows)
            occupied[spot] = nid
    occ = {cell: [nid] for cell, nid in sorted(occupied.items(), key=lambda kv: (kv[0][1], kv[0][0]))}
    return GridLayout(layout.cell_size, origin, cols, rows, occ)


@dataclass(frozen=True)
class FrameImage:
    """H x W x 3 float32 raster with values in [0, 1]."""

    pixels: np.ndarray

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def lit_count(self) -> int:
        return int(np.count_nonzero(self.pixels.max(axis=2) > 0))

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.rint(self.pixels * 255.0), 0, 255).astype(np.uint8)


def pixel_value(rgb, brightness: float, config: RasterConfig) -> np.ndarray:
    level = min(max(brightness / config.brightness_cap, config.min_visible), 1.0)
    return np.asarray(rgb, dtype=np.float64) / 255.0 * level


def render_frame(layout: GridLayout, pixels: dict, config: RasterConfig = RasterConfig()) -> FrameImage:
    """Paint one canvas pixel per occupied cell, grid centered on the canvas."""
    R = config.canvas
    img = np.zeros((R, R, 3), dtype=np.float32)
    if not layout.occupancy:
        return FrameImage(img)
    if layout.cols > R or layout.rows > R:
        raise CanvasOverflow(layout.cols, layout.rows, R)
    off_c = (R - layout.cols) // 2
    off_r = (R - layout.rows) // 2
    for (c, r), ids in layout.occupancy.items():
        if len(ids) != 1:
            raise ValueError(f"cell {(c, r)} holds {len(ids)} nodes; diffuse first")
        px = pixels[ids[0]]
        img[off_r + r, off_c + c] = pixel_value(px.rgb, px.brightness, config)
    return FrameImage(img)


def rasterize(coords, pixels: dict, config: RasterConfig = RasterConfig(), seed: int = 0) -> FrameImage:
    layout = diffuse(grid_for(coords, gamma=config.gamma), seed)
    return render_frame(layout, pixels, config)


# ---------------------------------------------------------------------------
# export


def save_frame(frame: FrameImage, path) -> None:
    """8-bit RGB export; format from the suffix (.ppm writes binary P6, .png)."""
    Image.fromarray(frame.to_uint8(), mode="RGB").save(path)


def load_frame_uint8(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))
