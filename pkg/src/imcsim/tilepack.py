"""Full-network tile & pack: cut weight matrices into crossbar-sized tiles and
bin-pack them onto the fewest crossbars.

Tiling never merges or subdivides rectangles during packing; a layer is split
only because it does not fit a single array.  Packing uses the maximal
rectangles heuristic with best-short-side-fit scoring, no rotation (rows and
columns have fixed electrical meaning on a crossbar), and fully pinned tie
breaking so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .nnspec import LayerKind, NetworkSpec, weight_matrix_dims


class UnpackableError(ValueError):
    """A tile is larger than the bin; cannot be placed."""


@dataclass(frozen=True)
class Tile:
    name: str
    h: int
    w: int

    @property
    def area(self) -> int:
        return self.h * self.w


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    def contains(self, other: "Rect") -> bool:
        return (self.x <= other.x and self.y <= other.y
                and self.x + self.w >= other.x + other.w
                and self.y + self.h >= other.y + other.h)

    def overlaps(self, other: "Rect") -> bool:
        return not (self.x >= other.x + other.w or other.x >= self.x + self.w
                    or self.y >= other.y + other.h or other.y >= self.y + self.h)


@dataclass(frozen=True)
class Placement:
    tile: Tile
    x: int
    y: int

    @property
    def rect(self) -> Rect:
        return Rect(self.x, self.y, self.tile.w, self.tile.h)


@dataclass
class Bin:
    index: int
    size: int
    free_rects: list[Rect] = field(default_factory=list)
    placements: list[Placement] = field(default_factory=list)

    def __post_init__(self):
        if not self.free_rects and not self.placements:
            self.free_rects = [Rect(0, 0, self.size, self.size)]

    @property
    def used_area(self) -> int:
        return sum(p.tile.area for p in self.placements)

    @property
    def utilization(self) -> float:
        return self.used_area / (self.size * self.size)

    def _place(self, tile: Tile, target: Rect) -> None:
        placed = Rect(target.x, target.y, tile.w, tile.h)
        self.placements.append(Placement(tile, target.x, target.y))
        # maximal-rectangles split: carve every overlapping free rect into the
        # up-to-four maximal leftovers, then prune rects contained in others
        new_free: list[Rect] = []
        for fr in self.free_rects:
            if not fr.overlaps(placed):
                new_free.append(fr)
                continue
            if placed.x > fr.x:
                new_free.append(Rect(fr.x, fr.y, placed.x - fr.x, fr.h))
            if placed.x + placed.w < fr.x + fr.w:
                new_free.append(Rect(placed.x + placed.w, fr.y,
                                     fr.x + fr.w - placed.x - placed.w, fr.h))
            if placed.y > fr.y:
                new_free.append(Rect(fr.x, fr.y, fr.w, placed.y - fr.y))
            if placed.y + placed.h < fr.y + fr.h:
                new_free.append(Rect(fr.x, placed.y + placed.h,
                                     fr.w, fr.y + fr.h - placed.y - placed.h))
        pruned: list[Rect] = []
        for i, r in enumerate(new_free):
            redundant = any(
                o.contains(r) and (o != r or j < i)
                for j, o in enumerate(new_free) if j != i)
            if not redundant:
                pruned.append(r)
        self.free_rects = pruned


@dataclass(frozen=True)
class Packing:
    bins: tuple[Bin, ...]
    bin_size: int
    shortfall: int = 0   # bins needed beyond the available crossbars, 0 if none

    @property
    def n_ima_required(self) -> int:
        return sum(1 for b in self.bins if b.placements)

    @property
    def per_bin_utilization(self) -> tuple[float, ...]:
        return tuple(b.utilization for b in self.bins)


def tile_layer(name: str, h: int, w: int, side: int) -> list[Tile]:
    """Cut an h x w weight matrix into <= side x side tiles (zero tiles removed)."""
    if h < 1 or w < 1 or side < 1:
        raise ValueError("dimensions must be positive")
    n_h, h_rem = divmod(h, side)
    n_w, w_rem = divmod(w, side)
    tiles = []
    for i in range(n_h):
        for j in range(n_w):
            tiles.append(Tile(f"{name}_tile{i}_{j}", side, side))
    for j in range(n_w):
        tiles.append(Tile(f"{name}_tile{n_h}_{j}", h_rem, side))
    for i in range(n_h):
        tiles.append(Tile(f"{name}_tile{i}_{n_w}", side, w_rem))
    tiles.append(Tile(f"{name}_tile{n_h}_{n_w}", h_rem, w_rem))
    return remove_zero_tiles(tiles)


def remove_zero_tiles(tiles: list[Tile]) -> list[Tile]:
    """Drop degenerate tiles, preserving the order of survivors."""
    return [t for t in tiles if t.h > 0 and t.w > 0]


def _best_target(bins: list[Bin], tile: Tile):
    """Free rectangle minimizing (leftover short side, leftover long side,
    bin index, y, x) among all rects the tile fits."""
    best = None
    best_key = None
    for b in bins:
        for fr in b.free_rects:
            if tile.w > fr.w or tile.h > fr.h:
                continue
            leftover_w = fr.w - tile.w
            leftover_h = fr.h - tile.h
            key = (min(leftover_w, leftover_h), max(leftover_w, leftover_h),
                   b.index, fr.y, fr.x)
            if best_key is None or key < best_key:
                best_key = key
                best = (b, fr)
    return best


def maxrects_bssf_pack(tiles: list[Tile], side: int) -> Packing:
    """MaxRects best-short-side-fit packing with online bin opening.

    Tiles are processed in descending short side, ties broken by descending
    area then ascending name; this keeps full-width strips together so bin
    waste concentrates in the tail bins instead of spreading.  A new bin
    opens only when no free rectangle in any open bin fits the tile.
    """
    for t in tiles:
        if t.h > side or t.w > side:
            raise UnpackableError(f"tile {t.name} ({t.h}x{t.w}) larger than bin {side}x{side}")
    order = sorted(tiles, key=lambda t: (-min(t.h, t.w), -t.area, t.name))
    bins: list[Bin] = []
    for tile in order:
        target = _best_target(bins, tile)
        if target is None:
            bins.append(Bin(index=len(bins), size=side))
            target = _best_target(bins[-1:], tile)
            if target is None:   # cannot happen after the size check above
                raise UnpackableError(f"tile {tile.name} does not fit an empty bin")
        b, fr = target
        b._place(tile, fr)
    return Packing(tuple(bins), side)


def pack_network(net: NetworkSpec, side: int = 256, n_ima_available: int | None = None,
                 include_first_conv: bool = True, include_classifier: bool = False,
                 include_depthwise: bool = False) -> Packing:
    """Tile and pack every dense-weight layer of a network.

    Depth-wise layers default to excluded (routed to the dedicated digital
    accelerator); the leading full convolution and the final linear classifier
    can be toggled, matching the crossbar budget actually provisioned.
    """
    tiles: list[Tile] = []
    first_conv_seen = False
    for layer in net.layers:
        if layer.kind == LayerKind.RESIDUAL:
            continue
        if layer.kind == LayerKind.DEPTHWISE:
            if not include_depthwise:
                continue
            k2 = layer.kernel * layer.kernel
            h, w = k2 * layer.in_channels, layer.out_channels
        else:
            h, w = weight_matrix_dims(layer)
        if layer.kind == LayerKind.CONV2D and not first_conv_seen:
            first_conv_seen = True
            if not include_first_conv:
                continue
        if layer.kind == LayerKind.LINEAR and not include_classifier:
            continue
        tiles.extend(tile_layer(layer.name, h, w, side))
    packing = maxrects_bssf_pack(tiles, side)
    if n_ima_available is not None and packing.n_ima_required > n_ima_available:
        packing = Packing(packing.bins, side,
                          shortfall=packing.n_ima_required - n_ima_available)
    return packing
