"""Matrix CSV serialisation and PPM heatmaps."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataError

WHITE = (255, 255, 255)
RED = (255, 0, 0)


def format_value(v) -> str:
    """12 significant digits; NaN (not applicable) becomes an empty field."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if np.isnan(v):
        return ""
    return f"{float(v):.12g}"


def write_matrix_csv(matrix, path, blank_diagonal: bool = False) -> None:
    M = np.asarray(matrix)
    if M.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    lines = []
    for i, row in enumerate(M):
        cells = [format_value(v) for v in row]
        if blank_diagonal and i < len(cells):
            cells[i] = ""
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_matrix_csv(path) -> np.ndarray:
    """Read a headerless numeric CSV; empty fields become NaN."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"matrix file not found: {path}")
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(c) if c.strip() else np.nan for c in line.split(",")])
        except ValueError:
            raise DataError(f"{path}, line {lineno}: non-numeric field") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: not a rectangular matrix")
    return np.array(rows, dtype=float)


def heatmap_pixels(matrix) -> np.ndarray:
    """(rows, cols, 3) uint8 image: white at the minimum, pure red at the maximum.

    Green and blue fall linearly, rounded to the nearest integer (ties to
    even). A constant matrix is all white.
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise ValueError("heatmap needs a non-empty 2-D matrix")
    if not np.all(np.isfinite(M)):
        raise DataError("heatmap matrix contains NaN or infinite entries")
    lo, hi = M.min(), M.max()
    s = np.zeros_like(M) if hi == lo else (M - lo) / (hi - lo)
    gb = np.rint(255.0 * (1.0 - s)).astype(np.uint8)
    img = np.empty(M.shape + (3,), np.uint8)
    img[..., 0] = 255
    img[..., 1] = gb
    img[..., 2] = gb
    return img


def write_heatmap(matrix, path) -> None:
    """Binary PPM (P6), one pixel per matrix cell."""
    img = heatmap_pixels(matrix)
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = [], 0
    # header: magic, width, height, maxval, then exactly one whitespace byte
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P6":
        raise DataError(f"{path}: not a binary PPM")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise DataError(f"{path}: unsupported maxval {maxval}")
    pixels = data[pos + 1 : pos + 1 + w * h * 3]
    return np.frombuffer(pixels, np.uint8).reshape(h, w, 3)
