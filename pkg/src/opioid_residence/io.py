"""CSV and SVG output.

Numbers are written with 17 significant digits (``%.17g``), Unix line
endings, and no locale-dependent formatting. Files are written to a
temporary sibling and renamed into place, so readers never see partial
output.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile

import numpy as np

from .exceptions import ValidationError

__all__ = ["fmt", "write_csv", "write_text", "read_csv", "read_matrix", "emit_svg_lineplot", "csv_text"]


def fmt(value):
    if isinstance(value, (str, bool)):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_text(path, text):
    """Atomically write ``text`` to ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    write_text(path, csv_text(header, rows))


def read_csv(path):
    """Return ``(header, columns)`` with columns as float arrays keyed by name."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty CSV file") from None
        rows = [r for r in reader if r]
    cols = {}
    for i, name in enumerate(header):
        try:
            cols[name] = np.array([float(r[i]) for r in rows])
        except (ValueError, IndexError):
            raise ValidationError(f"{path}: column {name!r} is not numeric") from None
    return header, cols


def read_matrix(path, shape=None):
    """Read a headerless numeric CSV as a 2-D array."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        M = np.array([[float(v) for v in r] for r in rows])
    except ValueError:
        raise ValidationError(f"{path}: matrix entries must be numeric") from None
    if shape is not None and M.shape != tuple(shape):
        raise ValidationError(f"{path}: expected a {shape[0]}x{shape[1]} matrix, got {M.shape}")
    return M


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _c(v):
    return f"{v:.2f}"


def emit_svg_lineplot(csv_path, x_column, y_columns, output_path, width=640, height=400, title=None):
    """Render columns of a CSV file as an SVG line plot.

    One ``<polyline>`` per y column. Output bytes depend only on the input.
    """
    header, cols = read_csv(csv_path)
    for name in [x_column, *y_columns]:
        if name not in cols:
            raise ValidationError(f"column {name!r} not found in {csv_path} (have {', '.join(header)})")
    x = cols[x_column]
    ys = [cols[name] for name in y_columns]
    if x.size == 0:
        raise ValidationError(f"{csv_path}: no data rows")

    left, right, top, bottom = 60.0, 110.0, 30.0, 45.0
    pw, ph = width - left - right, height - top - bottom
    x_lo, x_hi = float(x.min()), float(x.max())
    all_y = np.concatenate(ys)
    y_lo, y_hi = float(all_y.min()), float(all_y.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(v):
        return left + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v):
        return top + (y_hi - v) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<g stroke="black" stroke-width="1">'
        f'<line x1="{_c(left)}" y1="{_c(top + ph)}" x2="{_c(left + pw)}" y2="{_c(top + ph)}"/>'
        f'<line x1="{_c(left)}" y1="{_c(top)}" x2="{_c(left)}" y2="{_c(top + ph)}"/></g>',
        '<g font-family="sans-serif" font-size="11" fill="black">',
        f'<text x="{_c(left)}" y="{_c(top + ph + 15)}" text-anchor="middle">{x_lo:.4g}</text>',
        f'<text x="{_c(left + pw)}" y="{_c(top + ph + 15)}" text-anchor="middle">{x_hi:.4g}</text>',
        f'<text x="{_c(left - 5)}" y="{_c(top + ph)}" text-anchor="end">{y_lo:.4g}</text>',
        f'<text x="{_c(left - 5)}" y="{_c(top + 4)}" text-anchor="end">{y_hi:.4g}</text>',
        f'<text x="{_c(left + pw / 2)}" y="{_c(height - 8)}" text-anchor="middle">{x_column}</text>',
    ]
    if title:
        out.append(f'<text x="{_c(left + pw / 2)}" y="18" text-anchor="middle">{title}</text>')
    out.append("</g>")
    for k, (name, y) in enumerate(zip(y_columns, ys)):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{_c(sx(a))},{_c(sy(b))}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = top + 14 * k + 8
        out.append(
            f'<line x1="{_c(left + pw + 10)}" y1="{_c(ly)}" x2="{_c(left + pw + 30)}" y2="{_c(ly)}" '
            f'stroke="{color}" stroke-width="2"/>'
            f'<text x="{_c(left + pw + 35)}" y="{_c(ly + 4)}" font-family="sans-serif" font-size="11">{name}</text>'
        )
    out.append("</svg>")
    write_text(output_path, "\n".join(out) + "\n")
    return output_path
