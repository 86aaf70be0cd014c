import re
import xml.etree.ElementTree as ET

import numpy as np

from hqradar import evaluation as E
from hqradar import plotting


def comments(svg):
    return dict(re.findall(r"<!-- ([^:]+): (.*?) -->", svg))


def test_line_plot_is_valid_svg_with_axis_metadata():
    svg = plotting.line_plot({"a": ([1, 2, 3], [0.1, 0.5, 0.2])}, "SNR [dB]", "F1", "demo",
                             errors={"a": [0.01, 0.02, 0.0]})
    ET.fromstring(svg)
    meta = comments(svg)
    assert meta["x-axis"] == "SNR [dB]" and meta["y-axis"] == "F1" and meta["x-scale"] == "linear"
    assert svg.count("<polyline") == 1 and svg.count("<line ") == 3


def test_roc_plot_uses_log_fpr():
    curve = E.roc(np.array([0.9, 0.4, 0.3, 0.1]), np.array([1, 1, 0, 0]))
    svg = plotting.roc_plot({"-5 dB": curve}, "roc")
    ET.fromstring(svg)
    assert comments(svg)["x-scale"] == "log10"


def test_heatmap_cells():
    svg = plotting.heatmap(np.arange(6.0).reshape(2, 3) - 2, "t")
    ET.fromstring(svg)
    assert svg.count('<rect x=') == 6
    assert comments(svg)["shape"] == "(2, 3)"
