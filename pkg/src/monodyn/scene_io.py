"""Scene bundles on disk and depth scale/shift alignment.

Bundle layout::

    cameras.json            [{time, K (9), E (16, world->camera), width, height}, ...]
    rgb/00000.png           8-bit RGB
    depth/00000.pgdv        camera-z depth raster
    mask/00000.png          8-bit, 0 = static, 255 = dynamic
    flow/00000_00001.pgdv   flow from frame 0 to frame 1 (pixels)
    segments/00000.png      optional 16-bit segment labels
    tracks.csv              optional: track_id, frame_index, x, y, visible

PGDV rasters are ``b"PGDV1\\n"``, an ASCII header line
``"<kind> <width> <height> <channels>\\n"`` and row-major little-endian float32.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    BadMagicError,
    DegenerateFitError,
    DimensionMismatchError,
    HeaderMismatchError,
    InvalidArgumentError,
    MissingFileError,
    MissingFlowError,
    NonFiniteRasterError,
    RasterHeaderError,
    SceneValidationError,
    TimeOrderError,
    TruncatedPayloadError,
)
from .geometry import CameraModel

logger = logging.getLogger(__name__)

MAGIC = b"PGDV1\n"
RASTER_KINDS = ("depth", "flow", "feat")
_MAX_HEADER = 128
_FLOW_NAME = re.compile(r"^(\d{5})_(\d{5})\.pgdv$")


# --------------------------------------------------------------------------
# raster container


def encode_raster(kind, raster) -> bytes:
    if kind not in RASTER_KINDS:
        raise InvalidArgumentError(f"unknown raster kind {kind!r}")
    arr = np.asarray(raster)
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 2, 3):
        raise InvalidArgumentError(f"raster must be H x W x C with C in {{1,2,3}}, got {arr.shape}")
    h, w, c = arr.shape
    if h == 0 or w == 0:
        raise InvalidArgumentError("raster must be non-empty")
    data = arr.astype("<f4")
    if kind == "flow" and not np.all(np.isfinite(data)):
        raise NonFiniteRasterError("flow raster contains non-finite values")
    header = f"{kind} {w} {h} {c}\n".encode("ascii")
    return MAGIC + header + np.ascontiguousarray(data).tobytes()


def decode_raster(buf: bytes, path=None):
    """Parse a PGDV byte string into ``(kind, H x W x C float32 array)``."""
    if not buf.startswith(MAGIC):
        raise BadMagicError("not a PGDV raster (bad magic)", path=path)
    end = buf.find(b"\n", len(MAGIC), len(MAGIC) + _MAX_HEADER)
    if end < 0:
        raise RasterHeaderError("unterminated PGDV header line", path=path)
    try:
        kind, w, h, c = buf[len(MAGIC):end].decode("ascii").split(" ")
        w, h, c = int(w), int(h), int(c)
    except (UnicodeDecodeError, ValueError):
        raise RasterHeaderError("malformed PGDV header line", path=path) from None
    if kind not in RASTER_KINDS or w <= 0 or h <= 0 or c not in (1, 2, 3):
        raise RasterHeaderError(f"invalid PGDV header {kind} {w} {h} {c}", path=path)
    payload = buf[end + 1:]
    expected = w * h * c * 4
    if len(payload) < expected:
        raise TruncatedPayloadError(f"payload has {len(payload)} bytes, expected {expected}", path=path)
    if len(payload) > expected:
        raise RasterHeaderError(f"payload has {len(payload) - expected} trailing bytes", path=path)
    arr = np.frombuffer(payload, dtype="<f4").reshape(h, w, c).astype(np.float32)
    return kind, arr


def write_raster(path, kind, raster):
    Path(path).write_bytes(encode_raster(kind, raster))


def read_raster(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"missing raster {path}", path=path)
    return decode_raster(path.read_bytes(), path=path)


# --------------------------------------------------------------------------
# images


def read_rgb(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"missing image {path}", path=path)
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return arr.astype(np.float32) / np.float32(255.0)


def write_rgb(path, rgb):
    arr = np.clip(np.rint(np.asarray(rgb, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def read_mask(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"missing mask {path}", path=path)
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    if not np.all((arr == 0) | (arr == 255)):
        raise SceneValidationError("mask values must be 0 or 255", path=path)
    return arr == 255


def write_mask(path, mask):
    Image.fromarray(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8), mode="L").save(path)


def read_labels(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"missing segment map {path}", path=path)
    with Image.open(path) as im:
        arr = np.asarray(im)
    return arr.astype(np.int64)


def write_labels(path, labels):
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 65535:
        raise InvalidArgumentError("segment labels must fit in 16 bits")
    Image.fromarray(labels.astype(np.uint16)).save(path)


# --------------------------------------------------------------------------
# domain types


@dataclass(eq=False)
class FrameBundle:
    image: np.ndarray          # H x W x 3 in [0, 1]
    depth: np.ndarray          # H x W camera-z
    dynamic_mask: np.ndarray   # H x W bool
    camera: CameraModel
    time: float

    @property
    def shape(self):
        return self.depth.shape


@dataclass(eq=False)
class FlowField:
    """Displacement from ``source_index`` to ``target_index``: ``u_tgt = u_src + flow[u_src]``."""

    source_index: int
    target_index: int
    flow: np.ndarray  # H x W x 2


@dataclass(frozen=True)
class TrackSample:
    frame_index: int
    x: float
    y: float
    visible: bool


@dataclass(eq=False)
class TrackSet:
    trajectories: dict = field(default_factory=dict)  # track_id -> list[TrackSample], frame-sorted

    def __len__(self):
        return len(self.trajectories)

    @classmethod
    def from_rows(cls, rows, path=None):
        tracks = {}
        for track_id, frame_index, x, y, visible in rows:
            samples = tracks.setdefault(int(track_id), {})
            if frame_index in samples:
                raise SceneValidationError(
                    f"track {track_id} has two samples for frame {frame_index}", path=path, frame=frame_index)
            samples[int(frame_index)] = TrackSample(int(frame_index), float(x), float(y), bool(visible))
        return cls({tid: [s[k] for k in sorted(s)] for tid, s in sorted(tracks.items())})

    def rows(self):
        for tid, samples in self.trajectories.items():
            for s in samples:
                yield tid, s.frame_index, s.x, s.y, int(s.visible)


@dataclass(eq=False)
class Scene:
    frames: list
    flows: dict                      # (source, target) -> FlowField
    tracks: TrackSet | None = None
    segments: list | None = None     # per-frame H x W int labels
    root: Path | None = None

    def __len__(self):
        return len(self.frames)

    @property
    def times(self):
        return np.array([f.time for f in self.frames], dtype=np.float64)

    @property
    def cameras(self):
        return [f.camera for f in self.frames]

    def flow(self, source, target) -> FlowField:
        try:
            return self.flows[(source, target)]
        except KeyError:
            raise MissingFlowError(f"no flow from frame {source} to frame {target}", frame=source) from None

    def has_flow(self, source, target):
        return (source, target) in self.flows

    def validate(self):
        times = self.times
        if len(times) == 0:
            raise SceneValidationError("scene has no frames", path=self.root)
        bad = np.nonzero(np.diff(times) <= 0)[0]
        if len(bad):
            raise TimeOrderError(f"frame times not strictly increasing at frame {bad[0] + 1}",
                                 path=self.root, frame=int(bad[0] + 1))
        for i, f in enumerate(self.frames):
            h, w = f.camera.height, f.camera.width
            for name, shape in (("image", f.image.shape[:2]), ("depth", f.depth.shape),
                                ("mask", f.dynamic_mask.shape)):
                if tuple(shape) != (h, w):
                    raise DimensionMismatchError(
                        f"frame {i}: {name} is {shape[1]}x{shape[0]} but camera is {w}x{h}",
                        path=self.root, frame=i)
            finite = np.isfinite(f.depth)
            if np.any(f.depth[finite] <= 0) or np.any(np.isnan(f.depth)):
                raise SceneValidationError(f"frame {i}: depth must be positive", path=self.root, frame=i)
        for (s, t), ff in self.flows.items():
            if not (0 <= s < len(self) and 0 <= t < len(self)):
                raise SceneValidationError(f"flow {s}->{t} references a missing frame", path=self.root, frame=s)
            if (t, s) not in self.flows:
                raise MissingFlowError(f"flow {s}->{t} has no reverse flow {t}->{s}", path=self.root, frame=t)
            if ff.flow.shape != self.frames[s].depth.shape + (2,):
                raise DimensionMismatchError(f"flow {s}->{t} does not match frame {s} dimensions",
                                             path=self.root, frame=s)
        if self.segments is not None:
            if len(self.segments) != len(self):
                raise SceneValidationError("segment maps must cover every frame", path=self.root)
            for i, seg in enumerate(self.segments):
                if seg.shape != self.frames[i].depth.shape:
                    raise DimensionMismatchError(f"frame {i}: segment map dimensions differ",
                                                 path=self.root, frame=i)
        if self.tracks is not None:
            for tid, samples in self.tracks.trajectories.items():
                for s in samples:
                    if not 0 <= s.frame_index < len(self):
                        raise SceneValidationError(f"track {tid} references missing frame {s.frame_index}",
                                                   path=self.root, frame=s.frame_index)
        return self


# --------------------------------------------------------------------------
# bundle load/save


def _load_cameras(root):
    path = root / "cameras.json"
    if not path.is_file():
        raise MissingFileError(f"missing {path}", path=path)
    try:
        records = json.loads(path.read_text())
        out = []
        for i, rec in enumerate(records):
            out.append((float(rec["time"]), CameraModel.from_record(rec)))
    except (ValueError, KeyError, TypeError) as exc:
        raise SceneValidationError(f"malformed cameras.json: {exc}", path=path) from None
    return out


def _expect(kind, channels, arr_kind, arr, path, frame):
    if arr_kind != kind or arr.shape[2] != channels:
        raise HeaderMismatchError(
            f"{path.name}: expected {kind} raster with {channels} channel(s), got {arr_kind} with {arr.shape[2]}",
            path=path, frame=frame)


def load_scene(directory) -> Scene:
    """Read and validate a bundle directory."""
    root = Path(directory)
    if not root.is_dir():
        raise MissingFileError(f"scene directory {root} does not exist", path=root)
    frames = []
    for i, (t, cam) in enumerate(_load_cameras(root)):
        rgb_path = root / "rgb" / f"{i:05d}.png"
        depth_path = root / "depth" / f"{i:05d}.pgdv"
        mask_path = root / "mask" / f"{i:05d}.png"
        image = read_rgb(rgb_path)
        kind, depth = read_raster(depth_path)
        _expect("depth", 1, kind, depth, depth_path, i)
        mask = read_mask(mask_path)
        frames.append(FrameBundle(image, depth[..., 0], mask, cam, t))

    flows = {}
    flow_dir = root / "flow"
    if flow_dir.is_dir():
        for p in sorted(flow_dir.iterdir()):
            m = _FLOW_NAME.match(p.name)
            if not m:
                continue
            s, t = int(m.group(1)), int(m.group(2))
            kind, arr = read_raster(p)
            _expect("flow", 2, kind, arr, p, s)
            flows[(s, t)] = FlowField(s, t, arr)

    segments = None
    seg_dir = root / "segments"
    if seg_dir.is_dir():
        segments = [read_labels(seg_dir / f"{i:05d}.png") for i in range(len(frames))]

    tracks = None
    tracks_path = root / "tracks.csv"
    if tracks_path.is_file():
        tracks = read_tracks(tracks_path)

    scene = Scene(frames, flows, tracks, segments, root)
    scene.validate()
    logger.info("loaded scene %s: %d frames, %d flows", root, len(frames), len(flows))
    return scene


def read_tracks(path) -> TrackSet:
    path = Path(path)
    rows = []
    try:
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                visible = int(row["visible"])
                if visible not in (0, 1):
                    raise ValueError(f"visible must be 0 or 1, got {visible}")
                rows.append((int(row["track_id"]), int(row["frame_index"]),
                             float(row["x"]), float(row["y"]), visible))
    except (KeyError, ValueError) as exc:
        raise SceneValidationError(f"malformed tracks file: {exc}", path=path) from None
    return TrackSet.from_rows(rows, path=path)


def write_tracks(path, tracks: TrackSet):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["track_id", "frame_index", "x", "y", "visible"])
        for tid, fi, x, y, v in tracks.rows():
            w.writerow([tid, fi, repr(float(x)), repr(float(y)), v])


def save_scene(scene: Scene, directory):
    root = Path(directory)
    for sub in ("rgb", "depth", "mask", "flow"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    records = []
    for i, f in enumerate(scene.frames):
        rec = {"time": float(f.time)}
        rec.update(f.camera.to_record())
        records.append(rec)
        write_rgb(root / "rgb" / f"{i:05d}.png", f.image)
        write_raster(root / "depth" / f"{i:05d}.pgdv", "depth", f.depth)
        write_mask(root / "mask" / f"{i:05d}.png", f.dynamic_mask)
    (root / "cameras.json").write_text(json.dumps(records, indent=1))
    for (s, t), ff in sorted(scene.flows.items()):
        write_raster(root / "flow" / f"{s:05d}_{t:05d}.pgdv", "flow", ff.flow)
    if scene.segments is not None:
        (root / "segments").mkdir(exist_ok=True)
        for i, seg in enumerate(scene.segments):
            write_labels(root / "segments" / f"{i:05d}.png", seg)
    if scene.tracks is not None:
        write_tracks(root / "tracks.csv", scene.tracks)


# --------------------------------------------------------------------------
# depth alignment


def align_depth_scale_shift(predicted, reference):
    """Least-squares ``(scale, shift)`` with ``scale * predicted + shift ~= reference``."""
    p = np.asarray(predicted, dtype=np.float64).ravel()
    r = np.asarray(reference, dtype=np.float64).ravel()
    if p.shape != r.shape:
        raise InvalidArgumentError("predicted and reference must have the same length")
    if len(p) < 2:
        raise DegenerateFitError(f"need at least 2 samples, got {len(p)}")
    dp = p - p.mean()
    var = np.dot(dp, dp)
    if not var > 0:
        raise DegenerateFitError("predicted depths have zero variance")
    scale = np.dot(dp, r - r.mean()) / var
    shift = r.mean() - scale * p.mean()
    return float(scale), float(shift)


def apply_scale_shift(depth, scale, shift):
    return scale * np.asarray(depth) + shift
