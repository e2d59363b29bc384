"""Loading, validation and alignment of the crop/year panel.

CSV layouts (UTF-8, header row required):

* yields        ``crop,year,yield_kg_per_ha``
* areas         ``crop,year,area_ha``
* prices        ``crop,price_per_kg`` or ``crop,year,price_per_kg``
* declarations  ``year,declared`` with ``declared`` in {0, 1}
* instalments   ``year,total_instalments,total_area_ha``

Sources may be paths or open text streams.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateKeyError,
    EmptyPanelError,
    MalformedRowError,
    MissingPriceError,
    NegativeValueError,
    PanelError,
    ValidationError,
    ZeroAreaError,
)

logger = logging.getLogger(__name__)

YIELDS_HEADER = ("crop", "year", "yield_kg_per_ha")
AREAS_HEADER = ("crop", "year", "area_ha")
PRICES_HEADER = ("crop", "price_per_kg")
PRICES_TV_HEADER = ("crop", "year", "price_per_kg")
DECLARATIONS_HEADER = ("year", "declared")
INSTALMENTS_HEADER = ("year", "total_instalments", "total_area_ha")


class PanelWarning(UserWarning):
    """Emitted when alignment drops years or crops."""


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class YieldPanel:
    """Rectangular per-crop, per-year yields (kg/ha) and planted areas (ha).

    Row ``j`` of ``yields``/``areas`` belongs to ``crops[j]``, column ``t``
    to ``years[t]``.
    """

    crops: tuple
    years: tuple
    yields: np.ndarray
    areas: np.ndarray
    dropped_years: tuple = ()
    dropped_crops: tuple = ()

    def __post_init__(self):
        crops = tuple(str(c) for c in self.crops)
        years = tuple(int(y) for y in self.years)
        object.__setattr__(self, "crops", crops)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "yields", _frozen(self.yields))
        object.__setattr__(self, "areas", _frozen(self.areas))
        J, n = len(crops), len(years)
        if J < 1:
            raise ValidationError("panel needs at least one crop")
        if n < 2:
            raise ValidationError(f"panel needs at least two years, got {n}")
        if len(set(crops)) != J:
            raise ValidationError("crop identifiers must be unique")
        if any(b <= a for a, b in zip(years, years[1:])):
            raise ValidationError("years must be strictly increasing")
        for name in ("yields", "areas"):
            m = getattr(self, name)
            if m.shape != (J, n):
                raise ValidationError(f"{name} has shape {m.shape}, expected {(J, n)}")
            if not np.all(np.isfinite(m)):
                raise ValidationError(f"{name} contains non-finite values")
            if np.any(m < 0):
                raise ValidationError(f"{name} contains negative values")

    @property
    def n_crops(self) -> int:
        return len(self.crops)

    @property
    def n_years(self) -> int:
        return len(self.years)

    def total_area(self) -> np.ndarray:
        """Per-year total planted area, summed in crop order."""
        return self.areas.sum(axis=0)

    def select(self, crops: Iterable[str]) -> "YieldPanel":
        """Sub-panel restricted to ``crops`` (kept in original order)."""
        keep = set(crops)
        idx = [j for j, c in enumerate(self.crops) if c in keep]
        missing = keep - set(self.crops)
        if missing:
            raise ValidationError(f"unknown crops: {sorted(missing)}")
        return YieldPanel(
            crops=[self.crops[j] for j in idx],
            years=self.years,
            yields=self.yields[idx],
            areas=self.areas[idx],
        )

    def __eq__(self, other):
        if not isinstance(other, YieldPanel):
            return NotImplemented
        return (
            self.crops == other.crops
            and self.years == other.years
            and np.array_equal(self.yields, other.yields)
            and np.array_equal(self.areas, other.areas)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PriceSchedule:
    """Per-crop prices in currency/kg, constant (``values`` shape ``(J,)``)
    or time-varying (shape ``(J, n)`` aligned with ``years``)."""

    crops: tuple
    values: np.ndarray
    years: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "crops", tuple(str(c) for c in self.crops))
        object.__setattr__(self, "values", _frozen(self.values))
        if self.years is not None:
            object.__setattr__(self, "years", tuple(int(y) for y in self.years))
        v = self.values
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValidationError("prices must be finite and > 0")
        if v.shape[0] != len(self.crops):
            raise ValidationError("one price row per crop required")
        if self.years is None and v.ndim != 1:
            raise ValidationError("time-varying prices need their years")

    @classmethod
    def constant(cls, prices: dict) -> "PriceSchedule":
        return cls(crops=list(prices), values=list(prices.values()))

    @property
    def time_varying(self) -> bool:
        return self.years is not None

    def matrix(self, panel: YieldPanel) -> np.ndarray:
        """Prices expanded to the panel's ``(J, n)`` grid."""
        lookup = {c: j for j, c in enumerate(self.crops)}
        missing = [c for c in panel.crops if c not in lookup]
        if missing:
            raise MissingPriceError(f"no price for crops {missing}")
        rows = [lookup[c] for c in panel.crops]
        if not self.time_varying:
            return np.repeat(self.values[rows][:, None], panel.n_years, axis=1)
        ylookup = {y: t for t, y in enumerate(self.years)}
        absent = [y for y in panel.years if y not in ylookup]
        if absent:
            raise MissingPriceError(f"no prices for years {absent}")
        cols = [ylookup[y] for y in panel.years]
        return self.values[np.ix_(rows, cols)]


@dataclass(frozen=True)
class DeclarationLog:
    """Drought-declared years and the declaration frequency |declared|/n."""

    declared_years: frozenset
    n_years: int

    @property
    def omega_fraction(self) -> Fraction:
        return Fraction(len(self.declared_years), self.n_years)

    @property
    def omega_hat(self) -> float:
        return len(self.declared_years) / self.n_years

    def mask(self, panel: YieldPanel) -> np.ndarray:
        return np.array([y in self.declared_years for y in panel.years], dtype=bool)


@dataclass(frozen=True, eq=False)
class ThetaSeries:
    """Area shares ``shares[j, t] = A_j(t) / sum_i A_i(t)`` and their
    time means ``alphas``."""

    shares: np.ndarray
    alphas: np.ndarray

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.shares == self.shares[:, :1]))


# -- parsing helpers ---------------------------------------------------------


def _source_name(source):
    if isinstance(source, (str, os.PathLike)):
        return os.fspath(source)
    return getattr(source, "name", "<stream>")


def _read_rows(source, headers: Sequence[tuple]):
    """Yield ``(header, rows)`` where rows are ``(row_number, dict)``.

    ``headers`` lists the accepted header layouts.
    """
    name = _source_name(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(h.strip() for h in next(reader))
    except StopIteration:
        raise MalformedRowError("empty file, header expected", source=name) from None
    if header not in headers:
        expected = " or ".join(",".join(h) for h in headers)
        raise MalformedRowError(
            f"unexpected header {','.join(header)!r}, expected {expected}",
            source=name, row=1,
        )
    rows = []
    for rownum, rec in enumerate(reader, start=2):
        if not rec or all(not f.strip() for f in rec):
            continue
        if len(rec) != len(header):
            raise MalformedRowError(
                f"expected {len(header)} fields, found {len(rec)}",
                source=name, row=rownum,
            )
        rows.append((rownum, dict(zip(header, (f.strip() for f in rec)))))
    return name, header, rows


def _parse_float(text, *, source, row, column, nonneg=True):
    # float() also takes '1_000', 'nan', 'inf'; none are valid here
    if "_" in text or not text:
        raise MalformedRowError(f"not a number: {text!r}", source=source, row=row, column=column)
    try:
        value = float(text)
    except ValueError:
        raise MalformedRowError(
            f"not a number: {text!r}", source=source, row=row, column=column
        ) from None
    if not math.isfinite(value):
        raise MalformedRowError(f"non-finite value {text!r}", source=source, row=row, column=column)
    if nonneg and value < 0:
        raise NegativeValueError(
            f"negative value {value!r}", source=source, row=row, column=column
        )
    return value


def _parse_year(text, *, source, row, column="year"):
    try:
        return int(text)
    except ValueError:
        raise MalformedRowError(
            f"not an integer year: {text!r}", source=source, row=row, column=column
        ) from None


def _read_crop_year_table(source, header, value_col):
    name, _, rows = _read_rows(source, [header])
    return name, _crop_year_table(name, rows, value_col)


def _crop_year_table(name, rows, value_col):
    table = {}
    for rownum, rec in rows:
        crop = rec["crop"]
        if not crop:
            raise MalformedRowError("empty crop identifier", source=name, row=rownum, column="crop")
        year = _parse_year(rec["year"], source=name, row=rownum)
        value = _parse_float(rec[value_col], source=name, row=rownum, column=value_col)
        if (crop, year) in table:
            raise DuplicateKeyError(
                f"duplicate key (crop={crop!r}, year={year})", source=name, row=rownum
            )
        table[(crop, year)] = value
    return table


# -- public loaders ----------------------------------------------------------


def load_panel(yields_source, areas_source) -> YieldPanel:
    """Read yields and areas and align them into a rectangular panel.

    Crops missing from either source are dropped. A year is kept only if
    every remaining crop has both a yield and an area for it; otherwise it
    is dropped for all crops. Any drop is reported through a
    :class:`PanelWarning` and recorded on the returned panel.
    """
    yname, ytab = _read_crop_year_table(yields_source, YIELDS_HEADER, "yield_kg_per_ha")
    aname, atab = _read_crop_year_table(areas_source, AREAS_HEADER, "area_ha")

    def _ordered(keys):
        seen = {}
        for c, _ in keys:
            seen.setdefault(c, None)
        return list(seen)

    ycrops, acrops = _ordered(ytab), _ordered(atab)
    crops = [c for c in ycrops if c in set(acrops)]
    dropped_crops = sorted(set(ycrops) ^ set(acrops))
    if not crops:
        raise EmptyPanelError("no crop appears in both yields and areas", source=yname)

    all_years = sorted({y for _, y in ytab} | {y for _, y in atab})
    years = [
        y for y in all_years
        if all((c, y) in ytab and (c, y) in atab for c in crops)
    ]
    dropped_years = [y for y in all_years if y not in set(years)]
    if not years:
        raise EmptyPanelError(
            "no year is observed for every crop in both sources", source=yname
        )
    if len(years) < 2:
        raise EmptyPanelError(
            f"only {len(years)} complete year(s) after alignment; at least 2 required",
            source=yname,
        )

    yields = np.array([[ytab[(c, y)] for y in years] for c in crops])
    areas = np.array([[atab[(c, y)] for y in years] for c in crops])
    totals = areas.sum(axis=0)
    for t, y in enumerate(years):
        if totals[t] <= 0:
            raise PanelError(f"total planted area is zero in year {y}", source=aname)

    if dropped_years or dropped_crops:
        msg = f"alignment dropped years {dropped_years} and crops {dropped_crops}"
        logger.warning(msg)
        warnings.warn(msg, PanelWarning, stacklevel=2)
    return YieldPanel(
        crops=crops, years=years, yields=yields, areas=areas,
        dropped_years=tuple(dropped_years), dropped_crops=tuple(dropped_crops),
    )


def write_panel(panel: YieldPanel, yields_path, areas_path) -> None:
    """Write the panel back in canonical CSV form (``repr`` floats, so a
    reload is bit-identical)."""
    for path, header, matrix in (
        (yields_path, YIELDS_HEADER, panel.yields),
        (areas_path, AREAS_HEADER, panel.areas),
    ):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for j, crop in enumerate(panel.crops):
                for t, year in enumerate(panel.years):
                    w.writerow([crop, year, repr(float(matrix[j, t]))])


def load_prices(source, panel: YieldPanel | None = None) -> PriceSchedule:
    """Read constant or time-varying prices; with ``panel`` given, check
    every panel crop (and year, in time-varying mode) is covered."""
    name, header, rows = _read_rows(source, [PRICES_HEADER, PRICES_TV_HEADER])
    if header == PRICES_HEADER:
        prices = {}
        for rownum, rec in rows:
            crop = rec["crop"]
            if crop in prices:
                raise DuplicateKeyError(f"duplicate crop {crop!r}", source=name, row=rownum)
            v = _parse_float(rec["price_per_kg"], source=name, row=rownum, column="price_per_kg")
            if v <= 0:
                raise MalformedRowError("price must be > 0", source=name, row=rownum,
                                        column="price_per_kg")
            prices[crop] = v
        sched = PriceSchedule.constant(prices)
    else:
        table = _crop_year_table(name, rows, "price_per_kg")
        crops = list(dict.fromkeys(c for c, _ in table))
        years = sorted({y for _, y in table})
        missing = [(c, y) for c in crops for y in years if (c, y) not in table]
        if missing:
            raise MalformedRowError(f"time-varying prices missing cells {missing[:5]}", source=name)
        values = np.array([[table[(c, y)] for y in years] for c in crops])
        if np.any(values <= 0):
            raise MalformedRowError("prices must be > 0", source=name, column="price_per_kg")
        sched = PriceSchedule(crops=crops, values=values, years=years)
    if panel is not None:
        sched.matrix(panel)
    return sched


def load_declarations(source, panel: YieldPanel) -> DeclarationLog:
    """Read ``year,declared`` rows; every listed year must be a panel year."""
    name, _, rows = _read_rows(source, [DECLARATIONS_HEADER])
    panel_years = set(panel.years)
    declared, seen = set(), set()
    for rownum, rec in rows:
        year = _parse_year(rec["year"], source=name, row=rownum)
        if year in seen:
            raise DuplicateKeyError(f"duplicate year {year}", source=name, row=rownum)
        seen.add(year)
        if year not in panel_years:
            raise ValidationError(
                f"{name}, row {rownum}: year {year} is not in the panel"
            )
        flag = rec["declared"]
        if flag not in ("0", "1"):
            raise MalformedRowError(
                f"declared must be 0 or 1, got {flag!r}", source=name, row=rownum,
                column="declared",
            )
        if flag == "1":
            declared.add(year)
    return DeclarationLog(declared_years=frozenset(declared), n_years=panel.n_years)


@dataclass(frozen=True)
class InstalmentRecord:
    year: int
    total_instalments: float
    total_area_ha: float


def load_instalments(source) -> list:
    name, _, rows = _read_rows(source, [INSTALMENTS_HEADER])
    out, seen = [], set()
    for rownum, rec in rows:
        year = _parse_year(rec["year"], source=name, row=rownum)
        if year in seen:
            raise DuplicateKeyError(f"duplicate year {year}", source=name, row=rownum)
        seen.add(year)
        out.append(InstalmentRecord(
            year,
            _parse_float(rec["total_instalments"], source=name, row=rownum,
                         column="total_instalments"),
            _parse_float(rec["total_area_ha"], source=name, row=rownum, column="total_area_ha"),
        ))
    out.sort(key=lambda r: r.year)
    return out


def read_table(source) -> tuple:
    """Generic numeric CSV reader for emitted outputs.

    Returns ``(header, rows)``; cells that parse as floats become floats
    (``nan`` allowed), the rest stay strings.
    """
    text = open(source, encoding="utf-8").read() if isinstance(source, (str, os.PathLike)) \
        else source.read()
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    rows = []
    for rec in reader:
        if not rec:
            continue
        row = []
        for cell in rec:
            try:
                row.append(float(cell))
            except ValueError:
                row.append(cell)
        rows.append(tuple(row))
    return header, rows


# -- area shares -------------------------------------------------------------


def derive_theta(panel: YieldPanel, equal_weights: bool = False) -> ThetaSeries:
    """Per-year area shares and their means.

    With ``equal_weights`` every crop gets share ``1/J`` in every year.
    """
    J, n = panel.n_crops, panel.n_years
    if equal_weights:
        shares = np.full((J, n), 1.0 / J)
    else:
        totals = panel.total_area()
        for t, tot in enumerate(totals):
            if tot <= 0:
                raise ZeroAreaError(panel.years[t])
        shares = panel.areas / totals
    alphas = shares.mean(axis=1)
    shares.flags.writeable = False
    alphas.flags.writeable = False
    return ThetaSeries(shares=shares, alphas=alphas)
