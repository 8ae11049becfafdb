"""Delimited-text spectra and tables with ``#``-prefixed metadata headers.

A spectrum file looks like::

    # abscissa: energy_eV
    # temperature_K: 5
    energy_eV,intensity
    2.14,0.0213
    ...

The column-name row is optional; the abscissa unit must be declared by the
``abscissa`` key or the column name (and they must agree). Comma and tab
delimiters are detected per file; comma is written.
"""
from __future__ import annotations

import os
import tempfile
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .model import EnergyGrid
from .units import HC_EV_NM

ABSCISSAE = ("energy_eV", "wavelength_nm")


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_table(names, columns, metadata=None) -> str:
    lines = [f"# {k}: {fmt(v)}" for k, v in (metadata or {}).items()]
    lines.append(",".join(names))
    cols = [list(c) for c in columns]
    lengths = {len(c) for c in cols}
    if len(lengths) > 1:
        raise ValueError("table columns differ in length")
    for row in zip(*cols):
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_table(path, names, columns, metadata=None):
    atomic_write(path, render_table(names, columns, metadata))


@dataclass
class Table:
    names: list
    columns: dict
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.columns[name]

    def __contains__(self, name):
        return name in self.columns


def _split(line, delimiter):
    if delimiter is None:
        return line.split()
    return [cell.strip() for cell in line.split(delimiter)]


def _detect(line):
    if "\t" in line:
        return "\t"
    if "," in line:
        return ","
    return None


def _lines(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_table(path, numeric_only=False, text_ok=False) -> Table:
    """Read a delimited table whose first non-comment row names the columns.

    Cells must be numeric unless ``text_ok`` is set, in which case any
    column holding a non-numeric cell is returned as strings.
    """
    metadata, names, rows, delimiter = {}, None, [], None
    for lineno, raw in enumerate(_lines(path), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, value = body.split(":", 1)
                metadata[key.strip()] = value.strip()
            continue
        if delimiter is None:
            delimiter = _detect(line)
        cells = _split(line, delimiter)
        if names is None and not numeric_only and not all(_is_number(c) for c in cells):
            names = cells
            continue
        if not text_ok:
            bad = next((c for c in cells if not _is_number(c)), None)
            if bad is not None:
                raise DataError(f"{path}: line {lineno}: non-numeric cell {bad!r}")
        width = len(names) if names else len(rows[0]) if rows else len(cells)
        if len(cells) != width:
            raise DataError(f"{path}: line {lineno}: expected {width} columns, got {len(cells)}")
        rows.append(cells)
    if names is None:
        names = [f"col{i}" for i in range(len(rows[0]) if rows else 0)]
    columns = {}
    for i, name in enumerate(names):
        cells = [r[i] for r in rows]
        if all(_is_number(c) for c in cells):
            columns[name] = np.array([float(c) for c in cells], dtype=float)
        else:
            columns[name] = np.array(cells, dtype=str)
    return Table(list(names), columns, metadata)


@dataclass
class ParsedSpectrum:
    grid: EnergyGrid
    metadata: dict
    abscissa: str
    original_order: np.ndarray


def parse_spectrum(path) -> ParsedSpectrum:
    """Load a two-column spectrum and return it on an ascending energy axis.

    ``original_order[i]`` is the file row (0-based, data rows only) that
    became grid point ``i``.
    """
    metadata, header, rows, delimiter = {}, None, [], None
    for lineno, raw in enumerate(_lines(path), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, value = body.split(":", 1)
                metadata[key.strip()] = value.strip()
            continue
        if delimiter is None:
            delimiter = _detect(line)
        cells = _split(line, delimiter)
        if header is None and not rows and cells and cells[0] in ABSCISSAE:
            if len(cells) != 2:
                raise DataError(f"{path}: line {lineno}: expected 2 column names")
            header = cells
            continue
        if len(cells) != 2:
            raise DataError(f"{path}: line {lineno}: expected 2 columns, got {len(cells)}")
        try:
            rows.append((float(cells[0]), float(cells[1])))
        except ValueError:
            bad = next(c for c in cells if not _is_number(c))
            raise DataError(f"{path}: line {lineno}: non-numeric cell {bad!r}") from None
        if not all(np.isfinite(rows[-1])):
            raise DataError(f"{path}: line {lineno}: non-finite value")

    declared = {metadata.get("abscissa"), header[0] if header else None} - {None}
    if len(declared) != 1:
        raise DataError(f"{path}: declare exactly one abscissa unit "
                        f"({' or '.join(ABSCISSAE)}), found {sorted(declared) or 'none'}")
    abscissa = declared.pop()
    if abscissa not in ABSCISSAE:
        raise DataError(f"{path}: unknown abscissa unit {abscissa!r}")
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(rows)}")

    arr = np.array(rows)
    x, y = arr[:, 0], arr[:, 1]
    if abscissa == "wavelength_nm":
        if np.any(x <= 0):
            raise DataError(f"{path}: wavelengths must be positive")
        x = HC_EV_NM / x
    order = np.argsort(x, kind="stable")
    if np.any(np.diff(x[order]) == 0):
        raise DataError(f"{path}: duplicate abscissa values")
    steps = np.diff(arr[:, 0])
    if not (np.all(steps > 0) or np.all(steps < 0)):
        warnings.warn(f"{path}: abscissa is not monotonic; rows were sorted", stacklevel=2)
    x, y = x[order], y[order]
    return ParsedSpectrum(EnergyGrid(x, y), metadata, abscissa, order)


def emit_spectrum(path, grid: EnergyGrid, metadata=None):
    meta = {"abscissa": "energy_eV"}
    meta.update(metadata or {})
    write_table(path, ["energy_eV", "intensity"], [grid.points, grid.values], meta)
