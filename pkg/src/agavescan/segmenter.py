"""Clip-level segmentation inference.

Two interchangeable backends sit behind one config:

- ``builtin``: a deterministic texture detector for desk-scale runs. The
  whole pipeline is integer arithmetic (grayscale -> windowed standard
  deviation -> best directional lag match over a 4..16 px sweep -> min-max
  normalization to u8), so output is bit-identical across platforms.
- ``external``: a real model behind the AGV1 framed protocol, spoken either
  over a child process's stdio or as an HTTP POST body.

AGV1 frames: magic b"AGV1", u8 msg_type, then a type-specific body.
type 1/3 (image/tile request) and 2 (probability response): u32le width,
u32le height, u8 channels, raw pixels. type 4 (class response): u8 class,
u8 confidence. type 255 (error): u32le length, UTF-8 message.
"""

from __future__ import annotations

import select
import struct
import subprocess
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geo import (BitMask, GeoTransform, InvalidInputError, ParcelLabel,
                  Raster, polygonize)

MAGIC = b"AGV1"
MSG_IMAGE = 1
MSG_PROBMAP = 2
MSG_TILE = 3
MSG_CLASS = 4
MSG_ERROR = 255

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class AdapterError(RuntimeError):
    """External adapter failed (timeout, malformed frame, reported error)."""

    def __init__(self, message: str, clip_id: str | None = None):
        self.clip_id = clip_id
        super().__init__(f"{message} (clip {clip_id})" if clip_id else message)


@dataclass(frozen=True)
class ProbabilityMap:
    """Per-pixel crop probability quantized to u8 (255 == 1.0)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values)
        if v.ndim != 2 or v.dtype != np.uint8:
            raise InvalidInputError("probability map must be 2-D uint8")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass
class SegmenterConfig:
    kind: str = "builtin"
    threshold: int = 128
    min_component_px: int = 64
    # builtin texture-statistic parameters
    window_px: int = 9
    lag_min: int = 4
    lag_max: int = 16
    # external adapter: either a command argv list or an HTTP endpoint
    external: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("builtin", "external"):
            raise InvalidInputError(f"unknown segmenter kind {self.kind!r}")
        if not 1 <= self.threshold <= 255:
            raise InvalidInputError("threshold must be in [1, 255]")
        if self.min_component_px < 0:
            raise InvalidInputError("min_component_px must be >= 0")


# --- framing -----------------------------------------------------------------

def encode_image_frame(pixels: np.ndarray, msg_type: int = MSG_IMAGE) -> bytes:
    h, w = pixels.shape[:2]
    channels = 1 if pixels.ndim == 2 else pixels.shape[2]
    raw = np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()
    return MAGIC + struct.pack("<BIIB", msg_type, w, h, channels) + raw


def encode_probmap_frame(pmap: ProbabilityMap) -> bytes:
    return encode_image_frame(pmap.values, MSG_PROBMAP)


def encode_class_frame(cls: int, confidence: int) -> bytes:
    return MAGIC + struct.pack("<BBB", MSG_CLASS, cls, confidence)


def encode_error_frame(message: str) -> bytes:
    data = message.encode("utf-8")
    return MAGIC + struct.pack("<BI", MSG_ERROR, len(data)) + data


def decode_frame(read):
    """Decode one frame from ``read(n) -> exactly n bytes``.

    Returns (msg_type, payload): an (H, W) or (H, W, C) uint8 array for
    image/probability frames, (class, confidence) for class frames, and the
    message string for error frames.
    """
    magic = read(4)
    if magic != MAGIC:
        raise AdapterError(f"bad frame magic {magic!r}")
    (msg_type,) = struct.unpack("<B", read(1))
    if msg_type in (MSG_IMAGE, MSG_PROBMAP, MSG_TILE):
        w, h, channels = struct.unpack("<IIB", read(9))
        raw = read(w * h * channels)
        arr = np.frombuffer(raw, dtype=np.uint8)
        shape = (h, w) if channels == 1 else (h, w, channels)
        return msg_type, arr.reshape(shape)
    if msg_type == MSG_CLASS:
        cls, conf = struct.unpack("<BB", read(2))
        return msg_type, (cls, conf)
    if msg_type == MSG_ERROR:
        (n,) = struct.unpack("<I", read(4))
        return msg_type, read(n).decode("utf-8")
    raise AdapterError(f"unknown frame type {msg_type}")


def decode_frame_bytes(data: bytes):
    pos = [0]

    def read(n):
        if pos[0] + n > len(data):
            raise AdapterError("truncated frame")
        chunk = data[pos[0]:pos[0] + n]
        pos[0] += n
        return chunk

    return decode_frame(read)


# --- adapters ----------------------------------------------------------------

class SubprocessAdapter:
    """One persistent child process, strict request-response over stdio."""

    def __init__(self, command: "list[str]", timeout_ms: int = 10000):
        self.command = list(command)
        self.timeout_ms = timeout_ms
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        return self._proc

    def _read_exact(self, proc: subprocess.Popen, n: int, clip_id) -> bytes:
        buf = b""
        while len(buf) < n:
            ready, _, _ = select.select([proc.stdout], [], [], self.timeout_ms / 1000.0)
            if not ready:
                raise AdapterError(f"adapter timed out after {self.timeout_ms} ms", clip_id)
            chunk = proc.stdout.read1(n - len(buf))
            if not chunk:
                raise AdapterError("adapter closed its stdout mid-frame", clip_id)
            buf += chunk
        return buf

    def request(self, frame: bytes, clip_id: str | None = None):
        proc = self._ensure()
        try:
            proc.stdin.write(frame)
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise AdapterError(f"adapter pipe failed: {exc}", clip_id) from exc
        try:
            msg_type, payload = decode_frame(
                lambda n: self._read_exact(proc, n, clip_id))
        except AdapterError as exc:
            if exc.clip_id is None:
                raise AdapterError(str(exc), clip_id) from exc
            raise
        if msg_type == MSG_ERROR:
            raise AdapterError(f"adapter error: {payload}", clip_id)
        return msg_type, payload

    def close(self):
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
            self._proc = None


class HttpAdapter:
    """POSTs request frames to /infer as application/octet-stream."""

    def __init__(self, endpoint: str, timeout_ms: int = 10000):
        self.endpoint = endpoint
        self.timeout_ms = timeout_ms

    def request(self, frame: bytes, clip_id: str | None = None):
        import requests

        try:
            resp = requests.post(
                self.endpoint, data=frame,
                headers={"content-type": "application/octet-stream"},
                timeout=self.timeout_ms / 1000.0)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise AdapterError(f"adapter HTTP failure: {exc}", clip_id) from exc
        msg_type, payload = decode_frame_bytes(resp.content)
        if msg_type == MSG_ERROR:
            raise AdapterError(f"adapter error: {payload}", clip_id)
        return msg_type, payload


def make_adapter(cfg: SegmenterConfig):
    ext = cfg.external or {}
    if "command" in ext:
        return SubprocessAdapter(ext["command"], int(ext.get("timeout_ms", 10000)))
    if "endpoint" in ext:
        return HttpAdapter(ext["endpoint"], int(ext.get("timeout_ms", 10000)))
    raise InvalidInputError("external segmenter needs a 'command' or 'endpoint'")


# --- builtin baseline --------------------------------------------------------

def _boxsum(a: np.ndarray, radius: int) -> np.ndarray:
    """Sum over the (2r+1)^2 window centered on each pixel, edge-replicated."""
    p = np.pad(a, radius, mode="edge").astype(np.int64)
    c = np.zeros((p.shape[0] + 1, p.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(p, axis=0), axis=1, out=c[1:, 1:])
    k = 2 * radius + 1
    h, w = a.shape
    return (c[k:k + h, k:k + w] - c[:h, k:k + w]
            - c[k:k + h, :w] + c[:h, :w])


def _shift_abs_diff(g: np.ndarray, lag: int, axis: int) -> np.ndarray:
    """|g - g shifted by lag| with edge replication."""
    idx = np.minimum(np.arange(g.shape[axis]) + lag, g.shape[axis] - 1)
    shifted = np.take(g, idx, axis=axis)
    return np.abs(g - shifted)


def builtin_baseline(clip: Raster, cfg: SegmenterConfig | None = None) -> ProbabilityMap:
    """Row-pattern texture score, all-integer and platform deterministic.

    Score per pixel: n*sigma - 2*min_lag(window sum of |g - g_lag|), clamped
    at zero and min-max scaled to u8. Periodic plantation rows keep the lag
    term near zero so the local contrast wins; white noise and flat soil
    score zero almost everywhere.
    """
    cfg = cfg or SegmenterConfig()
    px = clip.pixels.astype(np.int64)
    if clip.bands == 3:
        g = (299 * px[:, :, 0] + 587 * px[:, :, 1] + 114 * px[:, :, 2]) // 1000
    else:
        g = px[:, :, 0]
    radius = cfg.window_px // 2
    n = (2 * radius + 1) ** 2
    s1 = _boxsum(g, radius)
    s2 = _boxsum(g * g, radius)
    var_nn = n * s2 - s1 * s1  # n^2 * variance, exact
    sigma_n = np.sqrt(var_nn.astype(np.float64)).astype(np.int64)
    sigma_n -= (sigma_n * sigma_n > var_nn)        # exact integer sqrt
    sigma_n += ((sigma_n + 1) ** 2 <= var_nn)

    best = None
    for axis in (0, 1):
        for lag in range(cfg.lag_min, cfg.lag_max + 1):
            m = _boxsum(_shift_abs_diff(g, lag, axis), radius)
            best = m if best is None else np.minimum(best, m)

    score = np.maximum(sigma_n - 2 * best, 0)
    mx = int(score.max())
    if mx == 0:
        values = np.zeros_like(score, dtype=np.uint8)
    else:
        values = ((score * 255) // mx).astype(np.uint8)
    return ProbabilityMap(values)


# --- public entry points -----------------------------------------------------

def infer(clip: Raster, cfg: SegmenterConfig,
          clip_id: str | None = None, adapter=None) -> ProbabilityMap:
    """Run segmentation inference on one 256x256 RGB clip."""
    if clip.dtype != np.uint8 or clip.bands != 3:
        raise InvalidInputError("inference expects an 8-bit RGB clip")
    if cfg.kind == "builtin":
        return builtin_baseline(clip, cfg)
    adapter = adapter or make_adapter(cfg)
    msg_type, payload = adapter.request(encode_image_frame(clip.pixels), clip_id)
    if msg_type != MSG_PROBMAP:
        raise AdapterError(f"expected probability frame, got type {msg_type}", clip_id)
    if payload.shape != (clip.height, clip.width):
        raise AdapterError(f"probability map shape {payload.shape} does not match clip", clip_id)
    return ProbabilityMap(payload)


def threshold_map(pmap: ProbabilityMap, cfg: SegmenterConfig) -> BitMask:
    """Binarize and drop components smaller than min_component_px."""
    mask = pmap.values >= cfg.threshold
    if cfg.min_component_px > 0 and mask.any():
        labels, n = ndimage.label(mask, structure=_CROSS)
        sizes = ndimage.sum_labels(mask, labels, index=np.arange(1, n + 1))
        keep = np.flatnonzero(sizes >= cfg.min_component_px) + 1
        mask = np.isin(labels, keep)
    return BitMask(mask)


def mean_prob_under(pmap: ProbabilityMap, mask: BitMask) -> int:
    """Mean probability (u8) over the masked pixels."""
    if not mask.data.any():
        return 0
    return int(pmap.values[mask.data].astype(np.int64).mean())


def extract_proposals(pmap: ProbabilityMap, cfg: SegmenterConfig,
                      transform: GeoTransform, phase: int = 2,
                      id_prefix: str = "prop") -> "list[ParcelLabel]":
    """Threshold, filter small components, vectorize into review proposals."""
    mask = threshold_map(pmap, cfg)
    polys = polygonize(mask, transform)
    return [
        ParcelLabel(id=f"{id_prefix}_{i}", polygon=poly, maturity="unknown",
                    provenance="model_proposed", phase=phase)
        for i, poly in enumerate(polys)
    ]
