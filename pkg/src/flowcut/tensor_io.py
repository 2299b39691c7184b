"""Array file I/O and dataset layout resolution.

Feature grids, flow fields and masks travel between tools as single-array
binary files in the de-facto standard format (magic ``\\x93NUMPY``, version
1.0 ASCII header). The reader/writer here is self-contained so that files
written by any mainstream serializer parse identically, and files written
here round-trip bit-exactly.

Supported payloads:

* features / flow fields: little-endian float32, C-order
* masks: uint8 with values in {0, 1}
"""

from __future__ import annotations

import ast
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, ManifestError, UnsupportedDtype

_MAGIC = b"\x93NUMPY"
_HEADER_ALIGN = 64

APPEARANCE = "appearance"
FLOW = "flow"

MASK_SOURCES = ("graphcut", "crf", "probe", "ensemble")


# ---------------------------------------------------------------------------
# domain types


@dataclass
class FeatureGrid:
    """A patch-feature array plus the geometry that maps it back to pixels.

    ``data`` has shape (rows, cols, channels), float32, C-order. ``rows`` and
    ``cols`` must tile the stated image extent with square patches of
    ``patch_size`` pixels (partial patches at the right/bottom edge count).
    """

    data: np.ndarray
    patch_size: int
    image_height: int
    image_width: int
    kind: str = APPEARANCE

    def __post_init__(self):
        if self.data.ndim != 3:
            raise FormatError(f"feature grid must be 3-d, got {self.data.ndim}-d")
        if self.data.dtype != np.float32:
            raise UnsupportedDtype(f"feature grid must be float32, got {self.data.dtype}")
        if self.kind not in (APPEARANCE, FLOW):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.rows != math.ceil(self.image_height / self.patch_size):
            raise FormatError(
                f"{self.rows} rows cannot tile height {self.image_height} "
                f"with patch size {self.patch_size}"
            )
        if self.cols != math.ceil(self.image_width / self.patch_size):
            raise FormatError(
                f"{self.cols} cols cannot tile width {self.image_width} "
                f"with patch size {self.patch_size}"
            )

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def n_patches(self) -> int:
        return self.rows * self.cols

    def vectors(self) -> np.ndarray:
        """Patch feature matrix of shape (rows*cols, channels), row-major."""
        return self.data.reshape(self.n_patches, self.channels)


@dataclass
class PixelMask:
    """Binary pixel mask with a tag recording which stage produced it."""

    data: np.ndarray
    source: str = "graphcut"

    def __post_init__(self):
        if self.data.ndim != 2:
            raise FormatError(f"mask must be 2-d, got {self.data.ndim}-d")
        if self.data.dtype != np.uint8:
            raise UnsupportedDtype(f"mask must be uint8, got {self.data.dtype}")
        bad = (self.data > 1).sum()
        if bad:
            raise FormatError(f"mask contains {bad} values outside {{0,1}}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# array format


def _format_header(descr: str, shape: tuple[int, ...]) -> bytes:
    # Mirrors the reference serializer byte for byte: sorted keys, trailing
    # comma, space-padded so magic+length+header is a multiple of 64, final
    # newline.
    header = "{" + f"'descr': {descr!r}, 'fortran_order': False, 'shape': {shape!r}, " + "}"
    raw = header.encode("latin1")
    hlen = len(raw) + 1
    pad = _HEADER_ALIGN - ((len(_MAGIC) + 2 + 2 + hlen) % _HEADER_ALIGN)
    pad %= _HEADER_ALIGN
    raw += b" " * pad + b"\n"
    return _MAGIC + bytes((1, 0)) + struct.pack("<H", len(raw)) + raw


def write_npy(path: str | Path, array: np.ndarray) -> None:
    """Write ``array`` in the portable single-array format.

    Only the two dtypes of the on-disk contract are accepted. Output is
    byte-identical to what the mainstream serializer emits for the same
    array, so either tool can read the other's files.
    """
    array = np.ascontiguousarray(array)
    if array.dtype == np.float32:
        descr = "<f4"
        data = array.astype("<f4", copy=False)
    elif array.dtype == np.uint8:
        descr = "|u1"
        data = array
    else:
        raise UnsupportedDtype(f"cannot write dtype {array.dtype}; use float32 or uint8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_format_header(descr, array.shape))
        fh.write(data.tobytes(order="C"))


def read_npy(path: str | Path) -> np.ndarray:
    """Read a portable array file, enforcing the on-disk contract.

    Raises FormatError for malformed structure and UnsupportedDtype for any
    dtype other than little-endian float32 or uint8.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 10 or blob[:6] != _MAGIC:
        raise FormatError(f"{path}: missing array-format magic bytes")
    major, minor = blob[6], blob[7]
    if major == 1:
        (hlen,) = struct.unpack("<H", blob[8:10])
        header_start = 10
    elif major in (2, 3):
        if len(blob) < 12:
            raise FormatError(f"{path}: truncated header length")
        (hlen,) = struct.unpack("<I", blob[8:12])
        header_start = 12
    else:
        raise FormatError(f"{path}: unsupported format version {major}.{minor}")
    header_end = header_start + hlen
    if len(blob) < header_end:
        raise FormatError(f"{path}: truncated header")
    try:
        header = ast.literal_eval(blob[header_start:header_end].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"{path}: unparsable header: {exc}") from exc
    if not isinstance(header, dict) or not {"descr", "fortran_order", "shape"} <= set(header):
        raise FormatError(f"{path}: header missing required keys")
    if header["fortran_order"]:
        raise FormatError(f"{path}: fortran_order arrays are not part of the contract")
    shape = header["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(s, int) and s >= 0 for s in shape):
        raise FormatError(f"{path}: bad shape {shape!r}")
    descr = header["descr"]
    if descr == "<f4":
        dtype = np.dtype("<f4")
    elif descr in ("|u1", "u1"):
        dtype = np.dtype("u1")
    else:
        raise UnsupportedDtype(f"{path}: dtype {descr!r} not supported")
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    payload = blob[header_end:]
    if len(payload) != count * dtype.itemsize:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {count * dtype.itemsize}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def read_array(
    path: str | Path,
    patch_size: int = 8,
    image_height: int | None = None,
    image_width: int | None = None,
    kind: str = APPEARANCE,
    source: str = "graphcut",
) -> FeatureGrid | PixelMask:
    """Read an array file and wrap it in its domain type.

    3-d float32 arrays become FeatureGrids (geometry defaults to an exact
    patch tiling when image dimensions are not given); 2-d uint8 arrays
    become PixelMasks.
    """
    arr = read_npy(path)
    if arr.dtype == np.uint8:
        if arr.ndim != 2:
            raise FormatError(f"{path}: mask arrays must be 2-d, got {arr.ndim}-d")
        return PixelMask(arr, source=source)
    if arr.ndim != 3:
        raise FormatError(f"{path}: feature arrays must be 3-d, got {arr.ndim}-d")
    rows, cols = arr.shape[:2]
    if image_height is None:
        image_height = rows * patch_size
    if image_width is None:
        image_width = cols * patch_size
    return FeatureGrid(arr, patch_size, image_height, image_width, kind=kind)


def write_array(path: str | Path, value: FeatureGrid | PixelMask) -> None:
    write_npy(path, value.data)


# ---------------------------------------------------------------------------
# mask images


def read_mask_png(path: str | Path, source: str = "graphcut") -> PixelMask:
    """Read a mask image; any nonzero pixel (or palette index) is foreground.

    This also merges multi-object annotations, which encode each object as a
    distinct nonzero value, into a single foreground mask.
    """
    img = Image.open(path)
    arr = np.array(img)
    if arr.ndim == 3:
        fg = arr.any(axis=2)
    else:
        fg = arr > 0
    return PixelMask(fg.astype(np.uint8), source=source)


def write_mask_png(path: str | Path, mask: PixelMask) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask.data * np.uint8(255), mode="L").save(path, format="PNG")


def read_frame_image(path: str | Path) -> np.ndarray:
    """Read an RGB frame as a (H, W, 3) uint8 array."""
    img = Image.open(path)
    if img.mode != "RGB":
        img = img.convert("RGB")
    return np.array(img)


# ---------------------------------------------------------------------------
# dataset layout


SEQUENCE_AVERAGE = "sequence_average"
FRAME_AVERAGE = "frame_average"

_CONFIG_NAME = "dataset.toml"


def _parse_config(path: Path) -> dict:
    # Minimal key/value parser ("toml-style"): strings, ints, floats, bools.
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if value and value[0] in "'\"" and value[-1] == value[0]:
            out[key] = value[1:-1]
        elif value in ("true", "false"):
            out[key] = value == "true"
        else:
            try:
                out[key] = int(value)
            except ValueError:
                try:
                    out[key] = float(value)
                except ValueError:
                    raise ManifestError(f"{path}:{lineno}: bad value {value!r}") from None
    return out


def _check_frame_names(seq: str, frames: list[str]) -> None:
    numeric = [f for f in frames if f.isdigit()]
    if numeric and len({len(f) for f in numeric}) > 1:
        raise ManifestError(
            f"sequence {seq!r} mixes numeric frame names of different widths "
            f"(zero-pad them so lexicographic order is frame order)"
        )


@dataclass(frozen=True)
class DatasetManifest:
    """Immutable index of one dataset's sequences, frames and file roots."""

    root: Path
    sequences: tuple[tuple[str, tuple[str, ...]], ...]
    averaging_mode: str
    patch_size: int = 8
    image_height: int | None = None
    image_width: int | None = None
    gt_frames: frozenset = field(default_factory=frozenset)

    def frames(self):
        """Yield (sequence, frame) in deterministic order."""
        for seq, frame_ids in self.sequences:
            for frame in frame_ids:
                yield seq, frame

    def n_frames(self) -> int:
        return sum(len(f) for _, f in self.sequences)

    def app_path(self, seq: str, frame: str) -> Path:
        return self.root / "feat_app" / seq / f"{frame}.npy"

    def flow_path(self, seq: str, frame: str) -> Path:
        return self.root / "feat_flow" / seq / f"{frame}.npy"

    def gt_path(self, seq: str, frame: str) -> Path:
        return self.root / "gt" / seq / f"{frame}.png"

    def frame_image_path(self, seq: str, frame: str) -> Path | None:
        for ext in (".jpg", ".png", ".ppm"):
            p = self.root / "frames" / seq / f"{frame}{ext}"
            if p.exists():
                return p
        return None

    def has_gt(self, seq: str, frame: str) -> bool:
        return (seq, frame) in self.gt_frames

    def load_features(self, seq: str, frame: str) -> tuple[FeatureGrid, FeatureGrid]:
        """Load the appearance and flow feature grids of one frame."""
        common = dict(
            patch_size=self.patch_size,
            image_height=self.image_height,
            image_width=self.image_width,
        )
        app = read_array(self.app_path(seq, frame), kind=APPEARANCE, **common)
        flow = read_array(self.flow_path(seq, frame), kind=FLOW, **common)
        return app, flow


def load_manifest(root: str | Path) -> DatasetManifest:
    """Resolve a dataset directory into a manifest.

    Expects ``feat_app/<seq>/<frame>.npy``, matching ``feat_flow`` files,
    optional ``gt/<seq>/<frame>.png`` and ``frames/<seq>/<frame>.jpg|png``,
    plus a ``dataset.toml`` config holding at least ``averaging_mode``.
    """
    root = Path(root)
    config_path = root / _CONFIG_NAME
    if not config_path.is_file():
        raise ManifestError(f"{root}: missing {_CONFIG_NAME}")
    config = _parse_config(config_path)
    mode = config.get("averaging_mode")
    if mode not in (SEQUENCE_AVERAGE, FRAME_AVERAGE):
        raise ManifestError(
            f"{config_path}: averaging_mode must be '{SEQUENCE_AVERAGE}' or "
            f"'{FRAME_AVERAGE}', got {mode!r}"
        )
    app_root = root / "feat_app"
    flow_root = root / "feat_flow"
    if not app_root.is_dir() or not flow_root.is_dir():
        raise ManifestError(f"{root}: needs feat_app/ and feat_flow/ directories")

    sequences = []
    gt_frames = set()
    for seq_dir in sorted(app_root.iterdir()):
        if not seq_dir.is_dir():
            continue
        seq = seq_dir.name
        frames = sorted(p.stem for p in seq_dir.glob("*.npy"))
        if not frames:
            raise ManifestError(f"sequence {seq!r} has no feature files")
        _check_frame_names(seq, frames)
        for frame in frames:
            if not (flow_root / seq / f"{frame}.npy").is_file():
                raise ManifestError(f"frame {seq}/{frame}: flow feature file is missing")
            if (root / "gt" / seq / f"{frame}.png").is_file():
                gt_frames.add((seq, frame))
        sequences.append((seq, tuple(frames)))
    if not sequences:
        raise ManifestError(f"{root}: no sequences found under feat_app/")

    return DatasetManifest(
        root=root,
        sequences=tuple(sequences),
        averaging_mode=mode,
        patch_size=int(config.get("patch_size", 8)),
        image_height=config.get("image_height"),
        image_width=config.get("image_width"),
        gt_frames=frozenset(gt_frames),
    )
