"""Minimal self-contained SVG plots of a posterior mean with its 95% band."""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .errors import EmptyTrace

Z95 = 1.96


@dataclass
class PlotTrace:
    x: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    obs_x: np.ndarray = field(default_factory=lambda: np.empty(0))
    obs_y: np.ndarray = field(default_factory=lambda: np.empty(0))
    title: str = ""

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.mean = np.asarray(self.mean, dtype=float).ravel()
        self.std = np.asarray(self.std, dtype=float).ravel()
        self.obs_x = np.asarray(self.obs_x, dtype=float).ravel()
        self.obs_y = np.asarray(self.obs_y, dtype=float).ravel()
        if not (len(self.x) == len(self.mean) == len(self.std)):
            raise ValueError("x, mean and std must have equal lengths")


def _pts(xs, ys) -> str:
    return " ".join(f"{x!r},{y!r}" for x, y in zip(map(float, xs), map(float, ys)))


def emit_plot(trace: PlotTrace, kind: str = "posterior", width: int = 640,
              height: int = 400, log_x: bool = False) -> str:
    """SVG document with the 95% band, the mean curve and observation markers.

    The plotted elements live inside a group whose transform maps data
    units to the canvas, so their coordinates are the data values
    themselves (``log10(x)`` when ``log_x``).

    Raises
    ------
    EmptyTrace
        If the trace has no points.
    """
    if len(trace.x) == 0:
        raise EmptyTrace("nothing to plot")
    fx = np.log10 if log_x else (lambda v: v)
    x = fx(trace.x)
    lo = trace.mean - Z95 * trace.std
    hi = trace.mean + Z95 * trace.std
    ox, oy = fx(trace.obs_x), trace.obs_y
    xmin, xmax = float(np.min(x)), float(np.max(x))
    ys = np.concatenate([lo, hi, oy])
    ymin, ymax = float(np.min(ys)), float(np.max(ys))
    if xmax == xmin:
        xmin, xmax = xmin - 0.5, xmax + 0.5
    if ymax == ymin:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    pad = 40.0
    sx = (width - 2 * pad) / (xmax - xmin)
    sy = (height - 2 * pad) / (ymax - ymin)
    tx = pad - sx * xmin
    ty = height - pad + sy * ymin
    band = _pts(np.r_[x, x[::-1]], np.r_[hi, lo[::-1]])
    marks = "\n".join(
        f'    <ellipse cx="{float(a)!r}" cy="{float(b)!r}" rx="{4.0 / sx!r}" ry="{4.0 / sy!r}" '
        f'fill="#c0392b"/>' for a, b in zip(ox, oy))
    title = escape(trace.title or kind)
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f"  <title>{title}</title>\n"
        f'  <rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n'
        f'  <g id="data" transform="matrix({sx!r} 0 0 {-sy!r} {tx!r} {ty!r})">\n'
        f'    <polygon id="ci95" points="{band}" fill="#3498db" fill-opacity="0.3" '
        f'stroke="none"/>\n'
        f'    <polyline id="mean" points="{_pts(x, trace.mean)}" fill="none" stroke="#1f4e79" '
        f'stroke-width="2" vector-effect="non-scaling-stroke"/>\n'
        f"{marks}\n"
        "  </g>\n"
        "</svg>\n"
    )
