"""
Raster metrology of jet silhouettes.

Each frame is scanned on rows ``y = k * stride`` between the nozzle
(row 0) and the collector.  On every scanned row the left and right jet
boundaries give the diameter, the strip area with the previous row and
the boundary angles; the deposition point on the last scanned row gives
the lag distance.  A renderer produces silhouettes from a radius profile
so the pipeline can be exercised without camera footage.
"""

from __future__ import annotations

import csv
import io
import os
import queue
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import GeometryOverflow, NoDeposition, RowMismatch
from .physics_jet import RadiusProfile

DEFAULT_STRIDE = 8


@dataclass
class Frame:
    pixels: np.ndarray  # (height, width) uint8, row 0 at the nozzle
    cf: float  # mm per pixel
    fps: float
    nozzle_x: int
    collector_row: int

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 2 or p.size == 0:
            raise ValueError("pixels must be a non-empty 2D array")
        self.pixels = p.astype(np.uint8, copy=False)
        h, w = p.shape
        if not (self.cf > 0 and self.fps > 0):
            raise ValueError("cf and fps must be > 0")
        if not (0 <= self.nozzle_x < w and 0 <= self.collector_row < h):
            raise ValueError("nozzle_x or collector_row outside the frame")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class JetFeatures:
    """Per-row measurements of one frame (rows ``k * stride``)."""

    rows: np.ndarray  # pixel row of each scan line
    le: np.ndarray  # left boundary column, -1 on empty rows
    re: np.ndarray  # right boundary column, -1 on empty rows
    diameter: np.ndarray  # mm
    area: np.ndarray  # mm^2
    theta_l: np.ndarray  # rad
    theta_r: np.ndarray  # rad
    empty: np.ndarray  # rows without foreground
    stride: int
    lag: float | None = None  # mm
    processing_time: float = 0.0
    error: str | None = None

    @property
    def n_rows(self) -> int:
        return len(self.rows)


# ---------------------------------------------------------------------------
# rendering


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def render_synthetic_frame(
    profile: RadiusProfile,
    lag_mm: float,
    cf: float = 0.005,
    width: int = 640,
    height: int = 480,
    nozzle_x: int = 320,
    collector_row: int = 460,
    fps: float = 50.0,
    R0_mm: float | None = None,
    jitter_px: float = 0.0,
    seed: int = 0,
) -> Frame:
    """Binary silhouette of a jet with radius ``profile`` and lag ``lag_mm``.

    Row ``y`` sits at ``z = y * cf / R0_mm`` below the nozzle.  Its jet
    pixels span ``round(c - r)`` to ``round(c + r)`` with ``r`` the radius
    in pixels and ``c`` a centerline that moves smoothly from ``nozzle_x``
    at the nozzle to ``nozzle_x + lag_mm / cf`` at the collector.
    ``R0_mm`` defaults to the value that places the end of the profile on
    the collector row.  Rows from the collector down are left empty.

    Raises
    ------
    GeometryOverflow
        If the jet leaves the frame or the profile is longer than the
        nozzle-to-collector distance.
    """
    if not 0 <= collector_row < height or not 0 <= nozzle_x < width:
        raise GeometryOverflow("nozzle or collector outside the frame")
    if R0_mm is None:
        R0_mm = collector_row * cf / profile.chi
    if profile.chi * R0_mm / cf > collector_row * (1 + 1e-9):
        raise GeometryOverflow("jet longer than the nozzle-to-collector distance")

    y = np.arange(collector_row)
    z = y * cf / R0_mm
    r_px = profile(np.minimum(z, profile.chi)) * R0_mm / cf
    c = nozzle_x + (lag_mm / cf) * smoothstep(y / collector_row)
    left = np.rint(c - r_px)
    right = np.rint(c + r_px)
    if jitter_px > 0:
        rng = np.random.default_rng(seed)
        left = left + np.rint(rng.uniform(-jitter_px, jitter_px, len(y)))
        right = right + np.rint(rng.uniform(-jitter_px, jitter_px, len(y)))
    if left.min() < 0 or right.max() >= width:
        raise GeometryOverflow("jet crosses the frame border")

    cols = np.arange(width)
    pix = np.zeros((height, width), np.uint8)
    pix[:collector_row] = np.where(
        (cols[None, :] >= left[:, None]) & (cols[None, :] <= right[:, None]), 255, 0)
    return Frame(pix, cf, fps, nozzle_x, collector_row)


# ---------------------------------------------------------------------------
# scanning


def scan_rows(frame: Frame, stride: int) -> np.ndarray:
    return np.arange(frame.collector_row // stride) * stride


def _binary(values) -> bool:
    return bool(np.all((values == 0) | (values == 255)))


def _edge_mask(img, rows, lo, hi):
    """Hysteresis-thresholded horizontal Sobel magnitude on the given rows."""
    h = img.shape[0]
    f = img.astype(np.int32)
    up = f[np.clip(rows - 1, 0, h - 1)]
    mid = f[rows]
    dn = f[np.clip(rows + 1, 0, h - 1)]
    sm = up + 2 * mid + dn
    g = np.zeros_like(sm)
    g[:, 1:-1] = np.abs(sm[:, 2:] - sm[:, :-2])
    g = g / 4.0
    weak = g >= lo
    strong = g >= hi
    # keep weak runs that contain a strong pixel (1D connectivity along the row)
    keep = np.zeros_like(weak)
    for i in range(len(rows)):
        w = weak[i]
        if not w.any():
            continue
        edges = np.diff(np.r_[0, w.astype(np.int8), 0])
        starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
        csum = np.r_[0, np.cumsum(strong[i])]
        for a, b in zip(starts, stops):
            if csum[b] > csum[a]:
                keep[i, a:b] = True
    return keep


def edge_scan(
    frame: Frame,
    stride: int = DEFAULT_STRIDE,
    canny_lo: float = 150,
    canny_hi: float = 255,
    trapezoid_half_factor: bool = False,
) -> JetFeatures:
    """Boundaries, diameters, strip areas and angles on every scanned row.

    Binary frames (values 0 and 255 only) are used as the foreground
    mask directly.  Other frames are edge-detected with a horizontal Sobel
    magnitude and hysteresis thresholds ``canny_lo``/``canny_hi``; a step
    edge marks the pixel on each side, so the boundaries are taken one
    pixel inside the outermost edge pixels.

    The strip area is ``(w_prev + w) * stride * cf^2`` with widths in
    pixels, halved when ``trapezoid_half_factor`` is set.  The first row
    is its own predecessor.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    t0 = time.perf_counter()
    rows = scan_rows(frame, stride)
    n = len(rows)
    le = np.full(n, -1, dtype=np.int64)
    re_ = np.full(n, -1, dtype=np.int64)
    if n:
        sub = frame.pixels[rows]
        if _binary(sub):
            mask = sub > 127
            shift = 0
        else:
            mask = _edge_mask(frame.pixels, rows, canny_lo, canny_hi)
            shift = 1
        has = mask.any(axis=1)
        first = np.argmax(mask, axis=1)
        last = mask.shape[1] - 1 - np.argmax(mask[:, ::-1], axis=1)
        le = np.where(has, first + shift, -1)
        re_ = np.where(has, last - shift, -1)
        bad = has & (re_ < le)
        le = np.where(bad, -1, le)
        re_ = np.where(bad, -1, re_)
    empty = le < 0
    width_px = np.where(empty, 0, re_ - le).astype(float)
    cf = frame.cf
    diameter = width_px * cf
    prev_w = np.r_[width_px[:1], width_px[:-1]]
    area = (prev_w + width_px) * stride * cf**2
    if trapezoid_half_factor:
        area = 0.5 * area
    prev_le = np.r_[le[:1], le[:-1]]
    prev_re = np.r_[re_[:1], re_[:-1]]
    valid = ~empty & ~np.r_[empty[:1], empty[:-1]]
    theta_l = np.where(valid, np.arctan((le - prev_le) / stride), 0.0)
    theta_r = np.where(valid, np.arctan((re_ - prev_re) / stride), 0.0)
    feats = JetFeatures(rows=rows, le=le, re=re_, diameter=diameter, area=area,
                        theta_l=theta_l, theta_r=theta_r, empty=empty, stride=stride)
    try:
        feats.lag = lag_from_frame(frame, feats)
    except NoDeposition as exc:
        feats.error = str(exc)
    feats.processing_time = max(time.perf_counter() - t0, 1e-9)
    return feats


def lag_from_frame(frame: Frame, features: JetFeatures) -> float:
    """Signed lag (mm) from the midpoint of the last scanned row.

    Raises
    ------
    NoDeposition
        If nothing was scanned or the last scanned row is empty.
    """
    if features.n_rows == 0 or features.empty[-1]:
        raise NoDeposition("no jet on the last scanned row")
    mid = 0.5 * (features.le[-1] + features.re[-1])
    return float((mid - frame.nozzle_x) * frame.cf)


def jet_velocity(prev: JetFeatures, cur: JetFeatures, cf: float, fps: float) -> np.ndarray:
    """Per-row x-velocity (mm/s) from the right boundary of two frames."""
    if prev.n_rows != cur.n_rows or prev.stride != cur.stride:
        raise RowMismatch("frames were scanned on different rows")
    return (cur.re - prev.re).astype(float) * cf * fps


# ---------------------------------------------------------------------------
# PGM files

_PGM_META = re.compile(r"#\s*gpjet\s+(.*)")


def write_pgm(frame: Frame, path: str | Path) -> None:
    """Binary PGM (P5) with the frame geometry in a header comment."""
    meta = (f"# gpjet cf={frame.cf!r} fps={frame.fps!r} nozzle_x={frame.nozzle_x} "
            f"collector_row={frame.collector_row}\n")
    head = f"P5\n{meta}{frame.width} {frame.height}\n255\n".encode("ascii")
    Path(path).write_bytes(head + np.ascontiguousarray(frame.pixels).tobytes())


def read_pgm(path: str | Path, **overrides) -> Frame:
    data = Path(path).read_bytes()
    tokens, meta, pos = [], {}, 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            end = data.index(b"\n", pos)
            m = _PGM_META.match(data[pos:end].decode("ascii", "replace"))
            if m:
                meta.update(kv.split("=", 1) for kv in m.group(1).split())
            pos = end + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P5" or tokens[3] != "255":
        raise ValueError(f"{path}: not an 8-bit binary PGM")
    w, h = int(tokens[1]), int(tokens[2])
    pos += 1
    pix = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)
    geom = {
        "cf": float(meta.get("cf", 1.0)),
        "fps": float(meta.get("fps", 50.0)),
        "nozzle_x": int(meta.get("nozzle_x", w // 2)),
        "collector_row": int(meta.get("collector_row", h - 1)),
    }
    geom.update(overrides)
    return Frame(pix.copy(), **geom)


# ---------------------------------------------------------------------------
# streams

MODES = ("sequential", "pipelined", "parallel")


@dataclass
class StreamReport:
    mode: str
    workers: int
    n_frames: int
    wall_time: float
    frame_times: np.ndarray = field(repr=False)

    @property
    def mean_frame_time(self) -> float:
        return float(self.frame_times.mean()) if self.n_frames else 0.0

    @property
    def p95_frame_time(self) -> float:
        return float(np.percentile(self.frame_times, 95)) if self.n_frames else 0.0

    @property
    def throughput_time(self) -> float:
        """Wall time per frame."""
        return self.wall_time / self.n_frames if self.n_frames else 0.0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "workers": self.workers,
            "n_frames": self.n_frames,
            "wall_time_s": self.wall_time,
            "mean_frame_time_s": self.mean_frame_time,
            "p95_frame_time_s": self.p95_frame_time,
            "wall_time_per_frame_s": self.throughput_time,
        }


def default_workers() -> int:
    cap = os.environ.get("GPJET_THREADS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else n


def _load(item):
    return item if isinstance(item, Frame) else read_pgm(item)


def _scan_item(item, stride, opts):
    frame = _load(item)
    return edge_scan(frame, stride, **opts)


def process_stream(
    frames: Iterable,
    stride: int = DEFAULT_STRIDE,
    workers: int | None = None,
    mode: str = "parallel",
    **scan_opts,
) -> tuple[list[JetFeatures], StreamReport]:
    """Scan a stream of frames (``Frame`` objects or PGM paths) in order.

    ``sequential`` loads and scans in one thread; ``pipelined`` loads on
    a reader thread feeding a bounded queue while the caller scans;
    ``parallel`` scans on a thread pool.  The output order is the input
    order in every mode.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    t0 = time.perf_counter()
    if mode == "sequential":
        out = [_scan_item(f, stride, scan_opts) for f in frames]
    elif mode == "pipelined":
        out = _pipelined(frames, stride, scan_opts)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(lambda f: _scan_item(f, stride, scan_opts), frames))
    wall = time.perf_counter() - t0 if out else 0.0
    times = np.array([f.processing_time for f in out], dtype=float)
    return out, StreamReport(mode, workers if mode == "parallel" else 1, len(out), wall, times)


_DONE = object()


def _pipelined(frames, stride, opts):
    q: queue.Queue = queue.Queue(maxsize=16)
    failure = []

    def reader():
        try:
            for item in frames:
                q.put(_load(item))
        except BaseException as exc:  # handed to the consumer
            failure.append(exc)
        finally:
            q.put(_DONE)

    t = threading.Thread(target=reader, daemon=True)
    t.start()
    out = []
    while (item := q.get()) is not _DONE:
        out.append(edge_scan(item, stride, **opts))
    t.join()
    if failure:
        raise failure[0]
    return out


def throughput_report(frames: list, stride: int = DEFAULT_STRIDE,
                      workers: int | None = None) -> dict:
    """Run the same frames through every mode; per-mode timing summary."""
    rep = {}
    for mode in MODES:
        _, r = process_stream(frames, stride, workers, mode)
        rep[mode] = r.to_dict()
    return rep


def features_csv(stream: list[JetFeatures]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "row_z_px", "diameter_mm", "area_mm2", "theta_l", "theta_r", "re_px"])
    for k, f in enumerate(stream):
        for i in range(f.n_rows):
            w.writerow([k, int(f.rows[i]), repr(float(f.diameter[i])), repr(float(f.area[i])),
                        repr(float(f.theta_l[i])), repr(float(f.theta_r[i])), int(f.re[i])])
    return buf.getvalue()


def frames_csv(stream: list[JetFeatures], with_time: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "lag_mm", "proc_time_s"] if with_time else ["frame", "lag_mm"])
    for k, f in enumerate(stream):
        row = [k, "" if f.lag is None else repr(f.lag)]
        if with_time:
            row.append(repr(f.processing_time))
        w.writerow(row)
    return buf.getvalue()
