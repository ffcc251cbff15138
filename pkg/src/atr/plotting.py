"""Raster and vector renderers for the evaluation artifacts.

Heatmaps go to binary portable pixmaps (P6).  One grid cell becomes a
``scale`` x ``scale`` pixel block; the image is laid out with forward
command increasing left to right and yaw command increasing bottom to
top (row 0 is the highest yaw command).  Completed cells map their
error linearly to gray: 0 is darkest (black), anything at or above the
cap is lightest (white).  Cells whose episode terminated early are pure
red.  The default cap is the largest error among completed cells.

Time series and area curves go to standalone SVG files: polylines over
a framed plot area with ticks, axis labels, and a legend.  An empty
series list still yields a valid axes-only image.
"""

import math

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f")
INCOMPLETE_COLOR = (255, 0, 0)


def _unique_sorted(values):
    return sorted({round(float(v), 6) for v in values})


def heatmap_image(rows, field="forward", cap=None):
    """(H, W, 3) uint8 image from eval-grid rows.

    rows: (c_v, c_w, rms_forward, rms_yaw, completed) tuples.  The
    image covers exactly the commands present, so a full-resolution
    grid renders 41 x 301 and a subsampled one proportionally smaller.
    """
    if field not in ("forward", "yaw"):
        raise ValueError(f"unknown heatmap field {field!r}; "
                         "expected 'forward' or 'yaw'")
    if not rows:
        raise ValueError("no grid rows to render")
    col = 2 if field == "forward" else 3
    xs = _unique_sorted(r[0] for r in rows)
    ys = _unique_sorted(r[1] for r in rows)
    x_index = {v: k for k, v in enumerate(xs)}
    y_index = {v: k for k, v in enumerate(ys)}
    if cap is None:
        done_errors = [r[col] for r in rows if r[4]]
        cap = max(done_errors) if done_errors else 1.0
    if cap <= 0.0:
        cap = 1.0
    image = np.zeros((len(ys), len(xs), 3), dtype=np.uint8)
    for row in rows:
        i = x_index[round(float(row[0]), 6)]
        # flip so the highest yaw command sits on the top image row
        j = len(ys) - 1 - y_index[round(float(row[1]), 6)]
        if row[4]:
            g = int(round(255.0 * min(row[col] / cap, 1.0)))
            image[j, i] = (g, g, g)
        else:
            image[j, i] = INCOMPLETE_COLOR
    return image


def write_ppm(image, path, scale=1):
    """Binary P6 pixmap; each input pixel becomes a scale x scale block."""
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("image must be (H, W, 3) uint8")
    if scale > 1:
        image = np.repeat(np.repeat(image, scale, axis=0), scale, axis=1)
    height, width = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def read_ppm_header(path):
    """(width, height) of a binary pixmap; validates the magic."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P6":
            raise ValueError(f"{path}: not a binary pixmap (magic {magic!r})")
        dims = fh.readline().split()
        return int(dims[0]), int(dims[1])


def write_heatmap_ppm(rows, path, field="forward", cap=None, scale=1):
    write_ppm(heatmap_image(rows, field, cap), path, scale)


def weights_image(weights):
    """(41, 301, 3) image of a curriculum weight grid (cap fixed at 1)."""
    w = np.clip(np.asarray(weights, dtype=float), 0.0, 1.0)
    gray = np.round(255.0 * w.T[::-1]).astype(np.uint8)
    return np.repeat(gray[:, :, None], 3, axis=2)


def write_weights_ppm(weights, path, scale=1):
    write_ppm(weights_image(weights), path, scale)


# -- SVG time series ---------------------------------------------------

def _ticks(lo, hi, count=5):
    if not math.isfinite(lo) or not math.isfinite(hi):
        lo, hi = 0.0, 1.0
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    raw = (hi - lo) / count
    mag = 10.0 ** math.floor(math.log10(raw))
    for step in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= step * mag:
            step *= mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 else t)
        t += step
    return ticks


def _fmt(v):
    if v == int(v) and abs(v) < 1e6:
        return str(int(v))
    return f"{v:.4g}"


def write_series_svg(series, path, title="", xlabel="", ylabel="",
                     width=800, height=400):
    """Polyline plot; series is a list of (label, xs, ys) triples."""
    left, right, top, bottom = 62, 18, 34, 46
    plot_w = width - left - right
    plot_h = height - top - bottom

    xs_all = [float(x) for _, xs, _ in series for x in xs]
    ys_all = [float(y) for _, _, ys in series for y in ys]
    x_lo, x_hi = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    y_lo, y_hi = (min(ys_all), max(ys_all)) if ys_all else (0.0, 1.0)
    if x_hi <= x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_hi <= y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad_y = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return top + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="black"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        x = px(t)
        parts.append(f'<line x1="{x:.1f}" y1="{top + plot_h}" x2="{x:.1f}" '
                     f'y2="{top + plot_h + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{top + plot_h + 18}" '
                     f'font-size="11" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        parts.append(f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left}" '
                     f'y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.1f}" font-size="11" '
                     f'text-anchor="end">{_fmt(t)}</text>')
    if title:
        parts.append(f'<text x="{width / 2}" y="20" font-size="14" '
                     f'text-anchor="middle">{title}</text>')
    if xlabel:
        parts.append(f'<text x="{left + plot_w / 2}" y="{height - 10}" '
                     f'font-size="12" text-anchor="middle">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="16" y="{top + plot_h / 2}" font-size="12" '
                     f'text-anchor="middle" transform="rotate(-90 16 '
                     f'{top + plot_h / 2})">{ylabel}</text>')
    for k, (label, xs, ys) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        points = " ".join(f"{px(float(x)):.1f},{py(float(y)):.1f}"
                          for x, y in zip(xs, ys))
        if points:
            parts.append(f'<polyline points="{points}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        ly = top + 14 + 16 * k
        lx = left + plot_w - 150
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 28}" y="{ly}" font-size="11">'
                     f'{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def write_area_curve_svg(curve, path, title="command area vs threshold"):
    """curve: (threshold_v, threshold_w, area) triples from a sweep."""
    xs = [c[0] for c in curve]
    ys = [c[2] for c in curve]
    write_series_svg([("tracked fraction", xs, ys)], path, title=title,
                     xlabel="forward-error threshold (m/s)",
                     ylabel="fraction of grid")
