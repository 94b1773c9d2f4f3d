"""Depth map file formats and the dataset directory layout.

PNG16
    single-channel 16-bit PNG holding integer millimeters; 0 marks a
    missing measurement.
raw-f32 (``.f32``)
    little-endian: magic ``b"ADPF"``, ``u32`` version (1), ``u32`` height,
    ``u32`` width, then ``height * width`` float32 values row-major; NaN
    marks an invalid pixel.

A dataset directory holds, per frame stem, ``<stem>.sensor.png``,
``<stem>.mde.png``, ``<stem>.gt.png`` and optionally ``<stem>.mask.png``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .core import DepthMap
from .errors import FormatError, InputMissingError

MM_PER_M = 1000.0
PNG16_MAX_M = 65535 / MM_PER_M
F32_MAGIC = b"ADPF"
F32_VERSION = 1
_F32_HEADER = struct.Struct("<4sIII")


def _open_image(path) -> Image.Image:
    path = Path(path)
    if not path.is_file():
        raise InputMissingError(f"{path}")
    try:
        img = Image.open(path)
        img.load()
    except OSError as exc:
        raise FormatError(f"cannot decode image {path}: {exc}") from exc
    return img


def load_depth_png16(path) -> DepthMap:
    img = _open_image(path)
    if img.mode not in ("I;16", "I;16L", "I;16B", "I"):
        bands = len(img.getbands())
        raise FormatError(
            f"{path}: expected a 16-bit single-channel image, got mode {img.mode!r} "
            f"({bands} channel(s), {'8' if img.mode in ('L', 'P', 'RGB', 'RGBA', 'LA') else 'unknown'}-bit)"
        )
    arr = np.array(img)
    if img.mode == "I" and (arr.min() < 0 or arr.max() > 65535):
        raise FormatError(f"{path}: values outside the 16-bit range")
    mm = arr.astype(np.float64)
    valid = mm > 0
    return DepthMap(mm / MM_PER_M, valid)


def depth_to_mm(depth: DepthMap) -> np.ndarray:
    if depth.valid.any():
        vmax = float(depth.values[depth.valid].max())
        if vmax > PNG16_MAX_M + 0.5 / MM_PER_M:
            raise FormatError(f"depth {vmax:.4f} m exceeds PNG16 range (max {PNG16_MAX_M} m)")
    mm = np.rint(depth.values * MM_PER_M)
    mm = np.where(depth.valid, np.clip(mm, 1, 65535), 0)
    return mm.astype(np.uint16)


def save_depth_png16(depth: DepthMap, path) -> None:
    Image.fromarray(depth_to_mm(depth)).save(Path(path), format="PNG")


def save_raw_f32(depth: DepthMap, path) -> None:
    h, w = depth.shape
    payload = np.where(depth.valid, depth.values, np.nan).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(_F32_HEADER.pack(F32_MAGIC, F32_VERSION, h, w))
        fh.write(payload.tobytes())


def load_raw_f32(path) -> DepthMap:
    path = Path(path)
    if not path.is_file():
        raise InputMissingError(f"{path}")
    data = path.read_bytes()
    if len(data) < _F32_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, h, w = _F32_HEADER.unpack_from(data)
    if magic != F32_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != F32_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if len(data) != _F32_HEADER.size + 4 * h * w:
        raise FormatError(f"{path}: size mismatch for {h}x{w} payload")
    vals = np.frombuffer(data, dtype="<f4", offset=_F32_HEADER.size).reshape(h, w)
    valid = np.isfinite(vals) & (vals > 0)
    return DepthMap(np.where(valid, vals, 0).astype(np.float64), valid)


def load_depth(path) -> DepthMap:
    """Dispatch on extension: ``.f32`` is raw float, anything else PNG16."""
    return load_raw_f32(path) if str(path).endswith(".f32") else load_depth_png16(path)


def save_depth(depth: DepthMap, path) -> None:
    if str(path).endswith(".f32"):
        save_raw_f32(depth, path)
    else:
        save_depth_png16(depth, path)


def load_mask(path) -> np.ndarray:
    """Boolean object mask; any non-zero pixel belongs to an object."""
    img = _open_image(path)
    arr = np.array(img)
    if arr.ndim == 3:
        arr = arr[..., 0]
    return arr != 0


def save_mask(mask: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(mask, dtype=np.uint8) * 255).save(Path(path), format="PNG")


def dataset_frames(directory):
    """Frames of a dataset directory, sorted by stem."""
    from .evalkit import Frame

    directory = Path(directory)
    if not directory.is_dir():
        raise InputMissingError(f"{directory}")
    stems = sorted(p.name[: -len(".sensor.png")] for p in directory.glob("*.sensor.png"))
    if not stems:
        raise InputMissingError(f"no *.sensor.png frames in {directory}")
    frames = []
    for stem in stems:
        mask_path = directory / f"{stem}.mask.png"
        frames.append(
            Frame(
                stem,
                load_depth_png16(directory / f"{stem}.sensor.png"),
                load_depth_png16(directory / f"{stem}.mde.png"),
                load_depth_png16(directory / f"{stem}.gt.png"),
                load_mask(mask_path) if mask_path.is_file() else None,
            )
        )
    return frames


def write_frame(directory, stem: str, sensor: DepthMap, mde: DepthMap, gt: DepthMap, mask=None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_depth_png16(sensor, directory / f"{stem}.sensor.png")
    save_depth_png16(mde, directory / f"{stem}.mde.png")
    save_depth_png16(gt, directory / f"{stem}.gt.png")
    if mask is not None:
        save_mask(mask, directory / f"{stem}.mask.png")
