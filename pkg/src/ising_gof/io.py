"""Reading and writing 0/1 grids as text, CSV or PGM."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Optional

import numpy as np

FORMATS = ("text", "csv", "pgm")


class GridFormatError(ValueError):
    """Malformed grid file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def detect_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".csv",):
        return "csv"
    if suffix in (".pgm", ".pnm"):
        return "pgm"
    return "text"


def parse_text_grid(text: str) -> np.ndarray:
    """One row per line of ``0``/``1`` characters; blanks between cells and ``#`` comments are ignored."""
    rows, first = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].replace(" ", "").replace("\t", "")
        if not line:
            continue
        bad = set(line) - {"0", "1"}
        if bad:
            raise GridFormatError(f"unexpected character {sorted(bad)[0]!r}", lineno)
        if first is not None and len(line) != len(rows[0]):
            raise GridFormatError(f"row has {len(line)} cells, expected {len(rows[0])} (from line {first})", lineno)
        if first is None:
            first = lineno
        rows.append([int(ch) for ch in line])
    if not rows:
        raise GridFormatError("no grid rows found")
    return np.array(rows, dtype=np.uint8)


def parse_csv_grid(text: str) -> np.ndarray:
    rows = []
    for lineno, record in enumerate(csv.reader(io.StringIO(text)), 1):
        cells = [c.strip() for c in record]
        if not any(cells):
            continue
        if any(c not in ("0", "1") for c in cells):
            raise GridFormatError("CSV cells must be 0 or 1", lineno)
        if rows and len(cells) != len(rows[0]):
            raise GridFormatError(f"row has {len(cells)} cells, expected {len(rows[0])}", lineno)
        rows.append([int(c) for c in cells])
    if not rows:
        raise GridFormatError("no grid rows found")
    return np.array(rows, dtype=np.uint8)


def read_pgm(path, threshold: int = 128) -> np.ndarray:
    """Binary (P5) or ASCII (P2) PGM; pixels ``>= threshold`` become 1."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            if im.format not in ("PPM", "PGM") or im.mode not in ("L", "I", "I;16", "1"):
                raise GridFormatError(f"expected a greyscale PGM image, got {im.format} {im.mode}")
            pixels = np.asarray(im)
    except UnidentifiedImageError as exc:
        raise GridFormatError(f"not a PGM image: {exc}") from None
    return (pixels >= threshold).astype(np.uint8)


def read_grid(path, fmt: Optional[str] = None, threshold: int = 128) -> np.ndarray:
    """Load a 2D 0/1 grid; the format defaults to the file extension."""
    fmt = fmt or detect_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    if fmt == "pgm":
        return read_pgm(path, threshold)
    text = Path(path).read_text()
    return parse_csv_grid(text) if fmt == "csv" else parse_text_grid(text)


def format_text_grid(grid) -> str:
    g = np.atleast_2d(np.asarray(grid, dtype=np.uint8))
    return "".join("".join("1" if v else "0" for v in row) + "\n" for row in g)


def write_grid(path, grid, fmt: Optional[str] = None, ascii_pgm: bool = False):
    """Write a grid; PGM pixels are 0 and 255 so that the default threshold reads it back."""
    fmt = fmt or detect_format(path)
    g = np.atleast_2d(np.asarray(grid, dtype=np.uint8))
    if fmt == "text":
        Path(path).write_text(format_text_grid(g))
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(g.tolist())
    elif fmt == "pgm":
        pixels = (g * 255).astype(np.uint8)
        if ascii_pgm:
            body = "\n".join(" ".join(str(v) for v in row) for row in pixels)
            Path(path).write_text(f"P2\n{g.shape[1]} {g.shape[0]}\n255\n{body}\n")
        else:
            from PIL import Image

            Image.fromarray(pixels).save(path, format="PPM")
    else:
        raise ValueError(f"format must be one of {FORMATS}")
