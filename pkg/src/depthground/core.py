"""Depth maps, patch grids and nearest-neighbour resizing.

All indices are 0-based and arrays are row-major ``(row, col)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True, eq=False)
class DepthMap:
    """A depth image in meters with a per-pixel validity mask.

    Invalid pixels store ``0.0``. If ``valid`` is omitted it is inferred as
    ``isfinite(values) & (values > 0)``.
    """

    values: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ShapeError(f"depth map must be a non-empty 2D grid, got shape {values.shape}")
        if self.valid is None:
            with np.errstate(invalid="ignore"):
                valid = np.isfinite(values) & (values > 0)
        else:
            valid = np.array(self.valid, dtype=bool)
            if valid.shape != values.shape:
                raise ShapeError(f"validity shape {valid.shape} != values shape {values.shape}")
            with np.errstate(invalid="ignore"):
                bad = valid & ~(np.isfinite(values) & (values > 0))
            if bad.any():
                raise ValueError("valid pixels must hold finite positive depth")
        values = np.where(valid, values, 0.0)
        values.flags.writeable = False
        valid.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @classmethod
    def dense(cls, values) -> DepthMap:
        """Wrap an everywhere-valid depth grid."""
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.ones(values.shape, dtype=bool))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())

    def as_nan(self) -> np.ndarray:
        """Values with invalid pixels replaced by NaN."""
        return np.where(self.valid, self.values, np.nan)

    def __eq__(self, other):
        if not isinstance(other, DepthMap):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.valid, other.valid)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.shape, self.values.tobytes(), self.valid.tobytes()))


def floor_to_multiple(x: int, m: int) -> int:
    """Largest multiple of ``m`` not exceeding ``x``."""
    if m < 1:
        raise ValueError("patch size must be >= 1")
    if x < m:
        raise ShapeError(f"image smaller than one patch ({x} < {m})")
    return (x // m) * m


def _nearest_index(src: int, dst: int) -> np.ndarray:
    # floor((i + 0.5) * src / dst) in exact integer arithmetic
    idx = ((2 * np.arange(dst, dtype=np.int64) + 1) * src) // (2 * dst)
    return np.minimum(idx, src - 1)


def resize_nearest(depth: DepthMap, out_h: int, out_w: int) -> DepthMap:
    """Nearest-neighbour resize with pixel-centre alignment.

    Output pixel ``(r, c)`` copies value and validity from input pixel
    ``(floor((r + .5) H / out_h), floor((c + .5) W / out_w))``. No value is
    ever interpolated.
    """
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"invalid output size {out_h}x{out_w}")
    if (out_h, out_w) == depth.shape:
        return depth
    rows = _nearest_index(depth.height, out_h)
    cols = _nearest_index(depth.width, out_w)
    ix = np.ix_(rows, cols)
    return DepthMap(depth.values[ix], depth.valid[ix])


def resize_mask(mask: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour resize of a boolean grid, same index rule as depth maps."""
    mask = np.asarray(mask, dtype=bool)
    rows = _nearest_index(mask.shape[0], out_h)
    cols = _nearest_index(mask.shape[1], out_w)
    return mask[np.ix_(rows, cols)]


@dataclass(frozen=True)
class PatchGrid:
    """Regular partition of an ``height x width`` domain into equal patches.

    Patches are normally square (``patch_h == patch_w == patch_size``). A
    single patch spanning the whole domain is allowed for the global variant.
    """

    height: int
    width: int
    patch_h: int
    patch_w: int
    rows: int = field(init=False)
    cols: int = field(init=False)

    def __post_init__(self):
        if self.patch_h < 1 or self.patch_w < 1:
            raise ValueError("patch size must be >= 1")
        if self.height % self.patch_h or self.width % self.patch_w:
            raise ShapeError(
                f"domain {self.height}x{self.width} is not a multiple of "
                f"patch {self.patch_h}x{self.patch_w}"
            )
        object.__setattr__(self, "rows", self.height // self.patch_h)
        object.__setattr__(self, "cols", self.width // self.patch_w)

    @property
    def patch_size(self) -> int:
        if self.patch_h != self.patch_w:
            raise AttributeError("grid patches are not square")
        return self.patch_h

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def n(self) -> int:
        return self.rows * self.cols

    @property
    def num_pixels(self) -> int:
        return self.height * self.width

    @cached_property
    def centers(self) -> np.ndarray:
        """``(n, 2)`` array of patch midpoints in continuous pixel coordinates."""
        r, c = np.divmod(np.arange(self.n), self.cols)
        return np.stack(
            [(r + 0.5) * self.patch_h - 0.5, (c + 0.5) * self.patch_w - 0.5], axis=1
        ).astype(np.float64)

    @cached_property
    def pixel_patch(self) -> np.ndarray:
        """``(height, width)`` grid of patch indices."""
        pr = np.arange(self.height) // self.patch_h
        pc = np.arange(self.width) // self.patch_w
        return pr[:, None] * self.cols + pc[None, :]

    def patch_of(self, row: int, col: int) -> int:
        return (row // self.patch_h) * self.cols + col // self.patch_w

    def patch_slice(self, i: int) -> tuple[slice, slice]:
        r, c = divmod(i, self.cols)
        return (
            slice(r * self.patch_h, (r + 1) * self.patch_h),
            slice(c * self.patch_w, (c + 1) * self.patch_w),
        )


def build_patch_grid(h_prime: int, w_prime: int, m: int) -> PatchGrid:
    return PatchGrid(h_prime, w_prime, m, m)


def single_patch_grid(height: int, width: int) -> PatchGrid:
    """One patch covering the entire domain."""
    return PatchGrid(height, width, height, width)


def neighbor_pairs(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Flat indices ``(p, q)`` of every unordered 4-connected pixel pair.

    Horizontal pairs come first (``q`` right of ``p``), then vertical
    pairs (``q`` below ``p``).
    """
    idx = np.arange(height * width).reshape(height, width)
    p = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    q = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return p, q
