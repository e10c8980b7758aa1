"""Plain-text readers and writers for atoms, sinograms, grid images and logs.

Floats are written with 17 significant digits so every file round-trips
exactly.  Readers raise :class:`FormatError` naming the offending line.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .forward import DetectorGeometry, Sinogram
from .grid_recon import GridImage, GridSpec

__all__ = [
    "FormatError",
    "format_float",
    "write_atoms",
    "read_atoms",
    "write_sinogram",
    "read_sinogram",
    "write_grid_image",
    "read_grid_image",
    "write_sa_log",
    "read_result",
]


class FormatError(ValueError):
    """A file does not follow its documented layout."""


def format_float(v: float) -> str:
    return f"{float(v):.17g}"


def _lines(path) -> list[str]:
    return Path(path).read_text().splitlines()


def _floats(text: str, path, lineno: int) -> list[float]:
    try:
        vals = [float(tok) for tok in text.split()]
    except ValueError:
        raise FormatError(f"{path}:{lineno}: cannot parse numbers from {text.strip()!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise FormatError(f"{path}:{lineno}: non-finite value")
    return vals


# -- atom lists ----------------------------------------------------------------

def atoms_text(config) -> str:
    pts = np.asarray(config, dtype=float).reshape(-1, 2)
    rows = [f"# n: {len(pts)}"] + [f"{format_float(a)} {format_float(b)}" for a, b in pts]
    return "\n".join(rows) + "\n"


def write_atoms(path, config) -> None:
    Path(path).write_text(atoms_text(config))


def read_atoms(path) -> np.ndarray:
    """Read an atom list; a ``# n:`` header, if present, must match the count."""
    declared = None
    pts = []
    for lineno, line in enumerate(_lines(path), 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].strip()
            if body.startswith("n:"):
                try:
                    declared = int(body[2:].strip())
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: bad atom count header {s!r}") from None
            continue
        vals = _floats(s, path, lineno)
        if len(vals) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'x1 x2', got {len(vals)} values")
        pts.append(vals)
    if declared is not None and declared != len(pts):
        raise FormatError(f"{path}: header declares {declared} atoms, found {len(pts)}")
    return np.array(pts, dtype=float).reshape(-1, 2)


# -- sinograms -----------------------------------------------------------------

def sinogram_header(g: DetectorGeometry) -> str:
    angles = ",".join(format_float(a) for a in g.angles)
    return (f"# angles_deg: {angles} ; d: {format_float(g.pixel_size)} ; sigma: {format_float(g.gaussian_width)}"
            f" ; bins: {g.bin_count} ; offset: {format_float(g.offset)}")


def write_sinogram(path, sino: Sinogram) -> None:
    rows = [sinogram_header(sino.geometry)]
    rows += [" ".join(format_float(v) for v in row) for row in sino.values]
    Path(path).write_text("\n".join(rows) + "\n")


def _parse_sinogram_header(line: str, path) -> DetectorGeometry:
    fields = {}
    for part in line.lstrip("#").split(";"):
        key, sep, value = part.partition(":")
        if not sep:
            raise FormatError(f"{path}:1: malformed header field {part.strip()!r}")
        fields[key.strip()] = value.strip()
    need = {"angles_deg", "d", "sigma", "bins", "offset"}
    if set(fields) != need:
        raise FormatError(f"{path}:1: header fields {sorted(fields)} differ from {sorted(need)}")
    try:
        return DetectorGeometry(
            angles=tuple(float(a) for a in fields["angles_deg"].split(",")),
            pixel_size=float(fields["d"]),
            gaussian_width=float(fields["sigma"]),
            bin_count=int(fields["bins"]),
            offset=float(fields["offset"]),
        )
    except ValueError as exc:
        raise FormatError(f"{path}:1: {exc}") from None


def read_sinogram(path) -> Sinogram:
    lines = _lines(path)
    if not lines or not lines[0].startswith("# angles_deg:"):
        raise FormatError(f"{path}:1: missing '# angles_deg:' header")
    geometry = _parse_sinogram_header(lines[0], path)
    rows = []
    for lineno, line in enumerate(lines[1:], 2):
        if line.strip():
            vals = _floats(line, path, lineno)
            if len(vals) != geometry.bin_count:
                raise FormatError(f"{path}:{lineno}: expected {geometry.bin_count} bins, got {len(vals)}")
            rows.append(vals)
    if len(rows) != geometry.n_angles:
        raise FormatError(f"{path}: expected {geometry.n_angles} rows, got {len(rows)}")
    return Sinogram(np.array(rows), geometry)


# -- grid images ---------------------------------------------------------------

def write_grid_image(path, image: GridImage) -> None:
    rows = [f"# grid: {image.grid.nodes_per_side}"]
    rows += [" ".join(format_float(v) for v in row) for row in image.as_array()]
    Path(path).write_text("\n".join(rows) + "\n")


def read_grid_image(path) -> GridImage:
    lines = _lines(path)
    if not lines or not lines[0].startswith("# grid:"):
        raise FormatError(f"{path}:1: missing '# grid:' header")
    try:
        n = int(lines[0].split(":", 1)[1])
    except ValueError:
        raise FormatError(f"{path}:1: bad grid size") from None
    rows = []
    for lineno, line in enumerate(lines[1:], 2):
        if line.strip():
            vals = _floats(line, path, lineno)
            if len(vals) != n:
                raise FormatError(f"{path}:{lineno}: expected {n} values, got {len(vals)}")
            rows.append(vals)
    if len(rows) != n:
        raise FormatError(f"{path}: expected {n} rows, got {len(rows)}")
    return GridImage(np.array(rows), GridSpec(n))


def read_result(path):
    """Read either a grid image or an atom list, judged by the header."""
    first = next((ln for ln in _lines(path) if ln.strip()), "")
    if first.startswith("# grid:"):
        return read_grid_image(path)
    return read_atoms(path)


# -- logs ----------------------------------------------------------------------

def sa_log_text(log_rows) -> str:
    rows = ["iter,beta,discrepancy,accepted_add,accepted_move"]
    rows += [f"{it},{format_float(b)},{format_float(d)},{int(a)},{int(m)}" for it, b, d, a, m in log_rows]
    return "\n".join(rows) + "\n"


def write_sa_log(path, log_rows) -> None:
    Path(path).write_text(sa_log_text(log_rows))
