"""Sample CSV format: header ``x1,...,xp,y1,...,yq``, one row per observation."""

from __future__ import annotations

import csv
import io
import re
from typing import TextIO, Union

import numpy as np

from .errors import InvalidArgumentError
from .kernels import Sample

_COL = re.compile(r"^([xy])(\d+)$")


class CsvFormatError(InvalidArgumentError):
    def __init__(self, message, row=None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


def _parse_header(header: list[str]) -> tuple[int, int]:
    names = [h.strip() for h in header]
    p = sum(1 for h in names if h.startswith("x"))
    q = len(names) - p
    expected = [f"x{i}" for i in range(1, p + 1)] + [f"y{j}" for j in range(1, q + 1)]
    if p < 1 or q < 1 or names != expected:
        raise CsvFormatError(f"header must be x1..xp,y1..yq (got {','.join(names)})", row=1)
    return p, q


def read_sample_csv(src: Union[str, TextIO]) -> Sample:
    if isinstance(src, str):
        with open(src, newline="") as fh:
            return read_sample_csv(fh)
    reader = csv.reader(src)
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError("empty file") from None
    p, q = _parse_header(header)
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != p + q:
            raise CsvFormatError(f"expected {p + q} fields, found {len(row)}", row=lineno)
        try:
            rows.append([float(c) for c in row])
        except ValueError:
            raise CsvFormatError("non-numeric field", row=lineno) from None
        if not all(np.isfinite(rows[-1])):
            raise CsvFormatError("non-finite field", row=lineno)
    if not rows:
        raise CsvFormatError("no observations")
    data = np.array(rows)
    return Sample(data[:, :p], data[:, p:])


def write_sample_csv(s: Sample, dst: Union[str, TextIO]) -> None:
    if isinstance(dst, str):
        with open(dst, "w", newline="") as fh:
            write_sample_csv(s, fh)
        return
    dst.write(",".join([f"x{i}" for i in range(1, s.p + 1)] + [f"y{j}" for j in range(1, s.q + 1)]))
    dst.write("\n")
    for row in np.hstack([s.x, s.y]):
        # 17 significant digits round-trip every float64 exactly
        dst.write(",".join(format(v, ".17g") for v in row))
        dst.write("\n")


def sample_to_csv_text(s: Sample) -> str:
    buf = io.StringIO()
    write_sample_csv(s, buf)
    return buf.getvalue()
