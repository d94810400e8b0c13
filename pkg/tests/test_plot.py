import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from gpjet.errors import EmptyTrace
from gpjet.plot import PlotTrace, emit_plot

NS = {"s": "http://www.w3.org/2000/svg"}


def _trace(n=10):
    x = np.linspace(0, 3, n)
    return PlotTrace(x, np.sin(x), 0.1 + 0.05 * x, x[::3], np.sin(x[::3]), "demo <fit>")


def test_svg_parses_and_has_parts():
    root = ET.fromstring(emit_plot(_trace()))
    assert root.tag.endswith("svg")
    assert root.find("s:title", NS).text == "demo <fit>"
    g = root.find("s:g[@id='data']", NS)
    assert g.find("s:polyline[@id='mean']", NS) is not None
    assert len(g.findall("s:ellipse", NS)) == 4
    assert "http" not in "".join(e.get("href", "") for e in root.iter())


def test_band_height_is_392_sigma():
    t = _trace()
    root = ET.fromstring(emit_plot(t))
    pts = root.find(".//s:polygon[@id='ci95']", NS).get("points").split()
    ys = np.array([float(p.split(",")[1]) for p in pts])
    n = len(t.x)
    upper, lower = ys[:n], ys[n:][::-1]
    np.testing.assert_allclose(upper - lower, 3.92 * t.std, rtol=1e-12)


def test_log_axis_uses_log_coordinates():
    t = PlotTrace([1, 10, 100], [0, 1, 2], [0.1, 0.1, 0.1])
    svg = emit_plot(t, log_x=True)
    xs = re.search(r'id="mean" points="([^"]+)"', svg).group(1).split()
    assert [float(p.split(",")[0]) for p in xs] == [0.0, 1.0, 2.0]


def test_empty_trace():
    with pytest.raises(EmptyTrace):
        emit_plot(PlotTrace([], [], []))
    with pytest.raises(ValueError):
        PlotTrace([1, 2], [1], [1, 2])
