"""Series persistence: compact binary format, CSV text, gnuplot scripts.

Binary layout (little-endian): magic ``VATS``, u32 version, u64 count,
f64 dt, f64 t0, two length-prefixed UTF-8 strings (label, origin), then
``count`` raw f64 values. The text format is CSV with a ``t,value``
header; dt, t0, label and origin ride in ``#`` comment lines so the
round trip is lossless there too (17 significant digits).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import SeriesFormatError
from .observables import ObservableSeries

MAGIC = b"VATS"
VERSION = 1


def save_series_binary(path, series: ObservableSeries) -> None:
    label = series.label.encode("utf-8")
    origin = series.origin.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQdd", VERSION, series.values.size, series.dt,
                             series.t0))
        fh.write(struct.pack("<I", len(label)))
        fh.write(label)
        fh.write(struct.pack("<I", len(origin)))
        fh.write(origin)
        fh.write(np.ascontiguousarray(series.values, dtype="<f8").tobytes())


def load_series_binary(path) -> ObservableSeries:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise SeriesFormatError(f"{path}: bad magic {raw[:4]!r}", offset=0)
    try:
        version, count, dt, t0 = struct.unpack_from("<IQdd", raw, 4)
        pos = 4 + struct.calcsize("<IQdd")
        if version != VERSION:
            raise SeriesFormatError(f"{path}: unsupported version {version}", offset=4)
        (label_len,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        label = raw[pos:pos + label_len].decode("utf-8")
        pos += label_len
        (origin_len,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        origin = raw[pos:pos + origin_len].decode("utf-8")
        pos += origin_len
        values = np.frombuffer(raw, dtype="<f8", count=count, offset=pos)
    except (struct.error, ValueError) as exc:
        raise SeriesFormatError(f"{path}: truncated or corrupt ({exc})",
                                offset=len(raw)) from None
    if values.size != count:
        raise SeriesFormatError(
            f"{path}: expected {count} values, found {values.size}",
            offset=pos,
        )
    return ObservableSeries(values.astype(np.float64), dt=dt, label=label,
                            origin=origin, t0=t0)


def save_series_csv(path, series: ObservableSeries) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# label: {series.label}\n")
        fh.write(f"# origin: {series.origin}\n")
        fh.write(f"# dt: {series.dt!r}\n")
        fh.write(f"# t0: {series.t0!r}\n")
        fh.write("t,value\n")
        for k, v in enumerate(series.values):
            fh.write(f"{series.t0 + k * series.dt:.17g},{v:.17g}\n")


def load_series_csv(path) -> ObservableSeries:
    label, origin, dt, t0 = "", "", None, 0.0
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                for key in ("label", "origin", "dt", "t0"):
                    if body.startswith(key + ":"):
                        val = body[len(key) + 1:].strip()
                        if key == "label":
                            label = val
                        elif key == "origin":
                            origin = val
                        elif key == "dt":
                            dt = float(val)
                        else:
                            t0 = float(val)
                continue
            if line == "t,value":
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise SeriesFormatError(f"{path}: expected 't,value' row",
                                        offset=lineno)
            try:
                values.append(float(parts[1]))
            except ValueError:
                raise SeriesFormatError(f"{path}: non-numeric value {parts[1]!r}",
                                        offset=lineno) from None
    if dt is None:
        raise SeriesFormatError(f"{path}: missing '# dt:' header", offset=0)
    if not values:
        raise SeriesFormatError(f"{path}: no data rows", offset=0)
    return ObservableSeries(np.array(values), dt=dt, label=label, origin=origin,
                            t0=t0)


def save_series(path, series: ObservableSeries) -> None:
    """Dispatch on extension: .bin/.vats binary, .csv text."""
    suffix = Path(path).suffix.lower()
    if suffix in (".bin", ".vats"):
        save_series_binary(path, series)
    elif suffix == ".csv":
        save_series_csv(path, series)
    else:
        raise SeriesFormatError(f"unknown series extension {suffix!r}")


def load_series(path) -> ObservableSeries:
    suffix = Path(path).suffix.lower()
    if suffix in (".bin", ".vats"):
        return load_series_binary(path)
    if suffix == ".csv":
        return load_series_csv(path)
    raise SeriesFormatError(f"unknown series extension {suffix!r}")


def write_gnuplot_script(path, data_file: str, title: str, xlabel: str,
                         ylabel: str, style: str = "lines",
                         using: str = "1:2") -> None:
    """Standalone gnuplot script plotting one emitted data file."""
    out_png = Path(data_file).stem + ".png"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("set terminal pngcairo size 900,600\n")
        fh.write(f"set output '{out_png}'\n")
        fh.write(f"set title '{title}'\n")
        fh.write(f"set xlabel '{xlabel}'\n")
        fh.write(f"set ylabel '{ylabel}'\n")
        fh.write("set datafile separator ','\n")
        fh.write(f"plot '{data_file}' using {using} with {style} notitle\n")
