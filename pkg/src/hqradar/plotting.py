"""Dependency-free SVG output: line plots and spectrogram heatmaps.

Axis metadata (labels, ranges, scale) is embedded as SVG comments so the
files can be checked without rendering.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _header(width, height, meta: dict) -> list[str]:
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">']
    for k, v in meta.items():
        lines.append(f"<!-- {k}: {escape(str(v))} -->")
    lines.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    return lines


def line_plot(series: dict, xlabel: str, ylabel: str, title: str = "", log_x: bool = False,
              log_floor: float = 1e-6, errors: dict | None = None) -> str:
    """``series`` maps a legend name to ``(x, y)`` arrays; optional ``errors`` give y half-widths."""
    xs_all = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys_all = np.concatenate([np.asarray(y, float) for _, y in series.values()])

    def tx(x):
        x = np.asarray(x, float)
        return np.log10(np.maximum(x, log_floor)) if log_x else x

    x0, x1 = float(tx(xs_all).min()), float(tx(xs_all).max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if errors:
        e = np.concatenate([np.asarray(v, float) for v in errors.values()])
        y0, y1 = min(y0, float((ys_all - e.max()).min())), max(y1, float((ys_all + e.max()).max()))
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (tx(x) - x0) / (x1 - x0) * pw

    def py(y):
        return HEIGHT - MARGIN - (np.asarray(y, float) - y0) / (y1 - y0) * ph

    meta = {"title": title, "x-axis": xlabel, "y-axis": ylabel, "x-scale": "log10" if log_x else "linear",
            "x-range": (x0, x1), "y-range": (y0, y1), "series": ", ".join(series)}
    out = _header(WIDTH, HEIGHT, meta)
    out.append(f'<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle" font-size="14">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{HEIGHT / 2}" text-anchor="middle" font-size="14" '
               f'transform="rotate(-90 15 {HEIGHT / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="25" text-anchor="middle" font-size="16">{escape(title)}</text>')
    for v in np.linspace(x0, x1, 5):
        label = f"1e{v:.1f}" if log_x else f"{v:g}"
        xp = MARGIN + (v - x0) / (x1 - x0) * pw
        out.append(f'<text x="{xp:.1f}" y="{HEIGHT - MARGIN + 18}" text-anchor="middle" font-size="11">{label}</text>')
    for v in np.linspace(y0, y1, 5):
        out.append(f'<text x="{MARGIN - 6}" y="{float(py(v)) + 4:.1f}" text-anchor="end" font-size="11">{v:.3g}</text>')
    for i, (name, (x, y)) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(x), py(y)))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        if errors and name in errors:
            for a, b, e in zip(px(x), np.asarray(y, float), np.asarray(errors[name], float)):
                out.append(f'<line x1="{a:.2f}" x2="{a:.2f}" y1="{float(py(b - e)):.2f}" y2="{float(py(b + e)):.2f}" stroke="{color}"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 5}" y="{MARGIN + 16 * (i + 1)}" text-anchor="end" '
                   f'fill="{color}" font-size="12">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(image: np.ndarray, title: str = "", xlabel: str = "frame", ylabel: str = "bin",
            cell_w: float = 2.5, cell_h: float = 12.0) -> str:
    """Diverging blue-white-red heatmap; row 0 is drawn at the bottom."""
    image = np.asarray(image, float)
    rows, cols = image.shape
    w, h = int(cols * cell_w + 2 * MARGIN), int(rows * cell_h + 2 * MARGIN)
    scale = float(np.abs(image).max()) or 1.0
    out = _header(w, h, {"title": title, "x-axis": xlabel, "y-axis": ylabel, "shape": image.shape,
                         "value-range": (float(image.min()), float(image.max()))})
    if title:
        out.append(f'<text x="{w / 2}" y="25" text-anchor="middle" font-size="16">{escape(title)}</text>')
    for r in range(rows):
        y = h - MARGIN - (r + 1) * cell_h
        for c in range(cols):
            v = image[r, c] / scale
            red = 255 if v >= 0 else int(255 * (1 + v))
            blue = 255 if v <= 0 else int(255 * (1 - v))
            green = int(255 * (1 - abs(v)))
            out.append(f'<rect x="{MARGIN + c * cell_w:.1f}" y="{y:.1f}" width="{cell_w}" height="{cell_h}" '
                       f'fill="rgb({red},{green},{blue})"/>')
    out.append(f'<text x="{w / 2}" y="{h - 15}" text-anchor="middle" font-size="14">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{h / 2}" text-anchor="middle" font-size="14" transform="rotate(-90 15 {h / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write(path, svg: str) -> None:
    with open(path, "w") as fh:
        fh.write(svg)


def roc_plot(curves: dict, title: str = "") -> str:
    """Log-linear ROC: log FPR on x, TPR on y."""
    return line_plot({k: (c.fpr, c.tpr) for k, c in curves.items()}, "false positive rate (log)",
                     "true positive rate", title, log_x=True)


def f1_plot(sweeps, title: str = "") -> str:
    series, errs = {}, {}
    for s in sweeps:
        rows = s.table()
        series[s.model] = ([r["snr_db"] for r in rows], [r["mean_f1"] for r in rows])
        errs[s.model] = [r["std_f1"] for r in rows]
    return line_plot(series, "SNR [dB]", "F1 score", title, errors=errs)

