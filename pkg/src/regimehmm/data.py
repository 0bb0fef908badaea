"""CSV ingestion of price and return series.

Price files have the header ``date,price``. Return files have ``date,log_return``
or, for n assets, ``date,r1,...,rn``. Returns are decimal fractions
(0.012 for 1.2%).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date
from importlib import resources
from pathlib import Path

import numpy as np

from .core import ObservationSeq


class DataError(ValueError):
    """Malformed or invalid input file."""


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple[str, ...]
    prices: np.ndarray

    def __post_init__(self):
        prices = np.array(self.prices, dtype=float)
        dates = tuple(str(d) for d in self.dates)
        if prices.ndim != 1 or prices.size != len(dates):
            raise DataError(f"{len(dates)} dates for {prices.size} prices")
        bad = np.flatnonzero(~(prices > 0))
        if bad.size:
            i = int(bad[0])
            raise DataError(f"row {i + 1}: price must be positive, got {prices[i]}")
        _check_increasing(dates)
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "dates", dates)

    def __len__(self) -> int:
        return self.prices.size


def _date_key(s: str):
    if s.lstrip("-").isdigit():
        return (0, int(s))
    try:
        return (1, date.fromisoformat(s).toordinal())
    except ValueError:
        return (2, s)


def _check_increasing(dates, first_line: int = 1) -> None:
    seen: dict[str, int] = {}
    prev = None
    for i, d in enumerate(dates):
        line = first_line + i
        if d in seen:
            raise DataError(f"line {line}: duplicate date {d!r} (first seen on line {seen[d]})")
        seen[d] = line
        key = _date_key(d)
        if prev is not None and key <= prev:
            raise DataError(f"line {line}: dates must be strictly increasing ({d!r})")
        prev = key


def _read_rows(path: str | Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not UTF-8 ({exc})") from None
    reader = csv.reader(io.StringIO(text))
    rows = [(reader.line_num, r) for r in reader if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0][1]]
    return header, rows[1:]


def _parse_float(path, line: int, col: str, s: str) -> float:
    try:
        x = float(s)
    except ValueError:
        raise DataError(f"{path}: line {line}, column {col!r}: cannot parse {s!r} as a number") from None
    if not np.isfinite(x):
        raise DataError(f"{path}: line {line}, column {col!r}: non-finite value {s!r}")
    return x


def load_csv(path: str | Path) -> PriceSeries:
    """Read a ``date,price`` file."""
    header, rows = _read_rows(path)
    if header != ["date", "price"]:
        raise DataError(f"{path}: expected header 'date,price', got {','.join(header)!r}")
    dates, prices = [], []
    for line, r in rows:
        if len(r) != 2:
            raise DataError(f"{path}: line {line}: expected 2 columns, got {len(r)}")
        d, p = r[0].strip(), _parse_float(path, line, "price", r[1].strip())
        if not p > 0:
            raise DataError(f"{path}: line {line}, column 'price': price must be positive, got {p}")
        dates.append(d)
        prices.append(p)
    if not rows:
        raise DataError(f"{path}: no data rows")
    try:
        _check_increasing(dates, first_line=rows[0][0])
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None
    return PriceSeries(tuple(dates), np.array(prices))


def load_returns_csv(path: str | Path) -> ObservationSeq:
    """Read a ``date,log_return`` (or ``date,r1,...,rn``) file."""
    header, rows = _read_rows(path)
    if len(header) < 2 or header[0] != "date":
        raise DataError(f"{path}: expected header 'date,log_return' or 'date,r1,...,rn'")
    cols = header[1:]
    if cols != ["log_return"] and cols != [f"r{i + 1}" for i in range(len(cols))]:
        raise DataError(f"{path}: unexpected return columns {','.join(cols)!r}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    dates, values = [], []
    for line, r in rows:
        if len(r) != len(header):
            raise DataError(f"{path}: line {line}: expected {len(header)} columns, got {len(r)}")
        dates.append(r[0].strip())
        values.append([_parse_float(path, line, c, s.strip()) for c, s in zip(cols, r[1:])])
    try:
        _check_increasing(dates, first_line=rows[0][0])
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None
    return ObservationSeq(np.array(values), tuple(dates))


def to_log_returns(p: PriceSeries, stride: int = 1) -> ObservationSeq:
    """Log returns over consecutive non-overlapping windows of ``stride`` rows.

    Each return is labelled with the date at the start of its window.
    """
    if stride < 1:
        raise DataError("stride must be >= 1")
    if len(p) < stride + 1:
        raise DataError(f"need at least {stride + 1} prices for stride {stride}, got {len(p)}")
    idx = np.arange(0, len(p), stride)
    x = p.prices[idx]
    r = np.log(x[1:] / x[:-1])
    labels = tuple(p.dates[i] for i in idx[:-1])
    return ObservationSeq(r, labels)


def _format(x: float) -> str:
    return repr(float(x))


def write_returns_csv(o: ObservationSeq, path: str | Path) -> None:
    labels = o.labels if o.labels is not None else tuple(str(t + 1) for t in range(o.T))
    cols = ["log_return"] if o.n == 1 else [f"r{i + 1}" for i in range(o.n)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *cols])
        for lab, row in zip(labels, o.obs):
            w.writerow([lab, *(_format(v) for v in row)])


def write_prices_csv(p: PriceSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "price"])
        for d, x in zip(p.dates, p.prices):
            w.writerow([d, _format(x)])


def fixture_path(name: str) -> Path:
    """Path of a data file shipped with the package (see ``regimehmm/fixtures``)."""
    return Path(str(resources.files("regimehmm") / "fixtures" / name))


def load_regimes_csv(path: str | Path) -> tuple[tuple[str, ...], list[int]]:
    """Read a ``date,regime`` file of 1-based regime labels."""
    header, rows = _read_rows(path)
    if header != ["date", "regime"]:
        raise DataError(f"{path}: expected header 'date,regime'")
    dates, regimes = [], []
    for line, r in rows:
        try:
            regimes.append(int(r[1]))
        except (IndexError, ValueError):
            raise DataError(f"{path}: line {line}: bad regime value") from None
        dates.append(r[0].strip())
    return tuple(dates), regimes
