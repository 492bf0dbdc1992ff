"""Hand-rolled minimal SVG emitters: axes, polylines, circles, rectangles.

Pure functions of their inputs; identical inputs produce byte-identical
documents (no timestamps, no randomness).
"""

from __future__ import annotations

import numpy as np

_MARGIN = 48.0


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def _header(width: float, height: float) -> str:
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">\n'
    )


def _axes(width: float, height: float, x_label: str, y_label: str) -> str:
    x0, y0 = _MARGIN, height - _MARGIN
    x1, y1 = width - _MARGIN / 2, _MARGIN / 2
    parts = [
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" y2="{_fmt(y0)}" stroke="black"/>',
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" y2="{_fmt(y1)}" stroke="black"/>',
        f'<text x="{_fmt((x0 + x1) / 2)}" y="{_fmt(height - 10)}" '
        f'text-anchor="middle" font-size="12">{x_label}</text>',
        f'<text x="14" y="{_fmt((y0 + y1) / 2)}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {_fmt((y0 + y1) / 2)})">{y_label}</text>',
    ]
    return "\n".join(parts) + "\n"


def _scale(vals: np.ndarray, lo: float, hi: float, out_lo: float, out_hi: float) -> np.ndarray:
    span = hi - lo
    if span == 0:
        return np.full_like(vals, (out_lo + out_hi) / 2.0)
    return out_lo + (vals - lo) / span * (out_hi - out_lo)


def line_chart(
    x: np.ndarray,
    series: dict[str, np.ndarray],
    x_label: str = "",
    y_label: str = "",
    width: float = 640.0,
    height: float = 420.0,
) -> str:
    """Multi-curve polyline chart with a small legend."""
    x = np.asarray(x, dtype=np.float64)
    ys = {k: np.asarray(v, dtype=np.float64) for k, v in series.items()}
    y_all = np.concatenate(list(ys.values()))
    x_lo, x_hi = float(x.min()), float(x.max())
    y_lo, y_hi = float(min(0.0, y_all.min())), float(y_all.max())
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    px = _scale(x, x_lo, x_hi, _MARGIN, width - _MARGIN / 2)
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    doc = [_header(width, height), _axes(width, height, x_label, y_label)]
    for ci, (name, y) in enumerate(ys.items()):
        py = _scale(y, y_lo, y_hi, height - _MARGIN, _MARGIN / 2)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, py))
        color = colors[ci % len(colors)]
        doc.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>\n')
        ly = _MARGIN / 2 + 14 * (ci + 1)
        doc.append(
            f'<rect x="{_fmt(width - 170)}" y="{_fmt(ly - 9)}" width="10" height="10" fill="{color}"/>\n'
            f'<text x="{_fmt(width - 155)}" y="{_fmt(ly)}" font-size="11">{name}</text>\n'
        )
    doc.append("</svg>\n")
    return "".join(doc)


def heatmap(
    matrix: np.ndarray,
    boundaries: list[int] | None = None,
    vmin: float = -1.0,
    vmax: float = 1.0,
    cell: float = 22.0,
) -> str:
    """Grayscale N x N heatmap; optional group boundaries stroked in red."""
    m = np.asarray(matrix, dtype=np.float64)
    n = m.shape[0]
    pad = 8.0
    size = n * cell + 2 * pad
    doc = [_header(size, size)]
    span = vmax - vmin
    for i in range(n):
        for j in range(n):
            g = int(round(255 * (1.0 - (m[i, j] - vmin) / span)))
            g = min(255, max(0, g))
            doc.append(
                f'<rect x="{_fmt(pad + j * cell)}" y="{_fmt(pad + i * cell)}" '
                f'width="{_fmt(cell)}" height="{_fmt(cell)}" fill="rgb({g},{g},{g})"/>\n'
            )
    for b in boundaries or []:
        off = pad + b * cell
        end = pad + n * cell
        doc.append(
            f'<line x1="{_fmt(pad)}" y1="{_fmt(off)}" x2="{_fmt(end)}" y2="{_fmt(off)}" '
            'stroke="red" stroke-width="2"/>\n'
            f'<line x1="{_fmt(off)}" y1="{_fmt(pad)}" x2="{_fmt(off)}" y2="{_fmt(end)}" '
            'stroke="red" stroke-width="2"/>\n'
        )
    doc.append("</svg>\n")
    return "".join(doc)


def scatter(
    x: np.ndarray,
    y: np.ndarray,
    highlight: list[int] | None = None,
    x_label: str = "",
    y_label: str = "",
    width: float = 640.0,
    height: float = 420.0,
) -> str:
    """Scatter of points, highlighted indices drawn larger in red."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    px = _scale(x, float(x.min()), float(x.max()), _MARGIN, width - _MARGIN / 2)
    py = _scale(y, float(y.min()), float(y.max()), height - _MARGIN, _MARGIN / 2)
    hi = set(highlight or [])
    doc = [_header(width, height), _axes(width, height, x_label, y_label)]
    for i in range(x.size):
        if i in hi:
            doc.append(
                f'<circle cx="{_fmt(px[i])}" cy="{_fmt(py[i])}" r="5" fill="#d62728"/>\n'
            )
        else:
            doc.append(
                f'<circle cx="{_fmt(px[i])}" cy="{_fmt(py[i])}" r="2.5" '
                'fill="#1f77b4" fill-opacity="0.6"/>\n'
            )
    doc.append("</svg>\n")
    return "".join(doc)


def histogram(
    bin_edges: np.ndarray,
    counts: np.ndarray,
    x_label: str = "",
    width: float = 640.0,
    height: float = 420.0,
) -> str:
    edges = np.asarray(bin_edges, dtype=np.float64)
    cnt = np.asarray(counts, dtype=np.float64)
    top = float(cnt.max()) if cnt.size and cnt.max() > 0 else 1.0
    px = _scale(edges, float(edges.min()), float(edges.max()), _MARGIN, width - _MARGIN / 2)
    doc = [_header(width, height), _axes(width, height, x_label, "count")]
    y0 = height - _MARGIN
    for i in range(cnt.size):
        h = (cnt[i] / top) * (y0 - _MARGIN / 2)
        doc.append(
            f'<rect x="{_fmt(px[i])}" y="{_fmt(y0 - h)}" '
            f'width="{_fmt(max(0.5, px[i + 1] - px[i]))}" height="{_fmt(h)}" '
            'fill="#1f77b4" stroke="white" stroke-width="0.5"/>\n'
        )
    doc.append("</svg>\n")
    return "".join(doc)
