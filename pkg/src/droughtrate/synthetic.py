"""Synthetic three-crop fixture.

Stands in for the unpublished national panel: maize, sorghum and cowpeas
over 24 seasons (1980-2003) with a shared drought factor, prices
1.75 / 1.70 / 11.90 per kg, drought declared in two of every three
seasons, and a 10-season instalment history averaging 1008 per ha.

Run ``python -m droughtrate.synthetic DIR`` to write the CSVs and a
``config.ini`` into ``DIR``.
"""

from __future__ import annotations

import csv
import os
import sys

import numpy as np

from .config import RunConfig
from .dataset import DeclarationLog, PriceSchedule, YieldPanel

CROPS = ("maize", "sorghum", "cowpeas")
PRICES = {"maize": 1.75, "sorghum": 1.70, "cowpeas": 11.90}
MEAN_YIELD = np.array([1200.0, 1200.0, 180.0])
CV = np.array([0.5, 0.45, 0.55])
BASE_AREA = np.array([6000.0, 9000.0, 3000.0])
FIRST_YEAR, N_YEARS = 1980, 24
INSTALMENT = 1008.0
SEED = 2019


def fixture_panel(seed: int = SEED) -> YieldPanel:
    rng = np.random.default_rng(seed)
    common = rng.standard_normal(N_YEARS)
    own = rng.standard_normal((len(CROPS), N_YEARS))
    rho = 0.6
    z = rho * common + np.sqrt(1 - rho ** 2) * own
    yields = np.maximum(0.0, MEAN_YIELD[:, None] * (1.0 + CV[:, None] * z))
    areas = BASE_AREA[:, None] * np.exp(0.25 * rng.standard_normal((len(CROPS), N_YEARS)))
    return YieldPanel(
        crops=CROPS,
        years=range(FIRST_YEAR, FIRST_YEAR + N_YEARS),
        yields=np.round(yields, 1),
        areas=np.round(areas, 0),
    )


def fixture_prices() -> PriceSchedule:
    return PriceSchedule.constant(PRICES)


def fixture_declarations(panel: YieldPanel) -> DeclarationLog:
    declared = frozenset(y for k, y in enumerate(panel.years) if k % 3 != 2)
    return DeclarationLog(declared_years=declared, n_years=panel.n_years)


def write_fixture(directory, seed: int = SEED) -> str:
    """Write the fixture CSVs and a matching config; returns the config path."""
    os.makedirs(directory, exist_ok=True)
    panel = fixture_panel(seed)
    log = fixture_declarations(panel)

    def _write(name, header, rows):
        with open(os.path.join(directory, name), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    _write("yields.csv", ("crop", "year", "yield_kg_per_ha"),
           [(c, y, repr(float(panel.yields[j, t])))
            for j, c in enumerate(panel.crops) for t, y in enumerate(panel.years)])
    _write("areas.csv", ("crop", "year", "area_ha"),
           [(c, y, repr(float(panel.areas[j, t])))
            for j, c in enumerate(panel.crops) for t, y in enumerate(panel.years)])
    _write("prices.csv", ("crop", "price_per_kg"), [(c, repr(p)) for c, p in PRICES.items()])
    _write("declarations.csv", ("year", "declared"),
           [(y, int(y in log.declared_years)) for y in panel.years])
    # alternating 908/1108 per ha on 1000 ha: trailing 10-season mean is 1008
    last = panel.years[-10:]
    _write("instalments.csv", ("year", "total_instalments", "total_area_ha"),
           [(y, repr((INSTALMENT + (100.0 if k % 2 else -100.0)) * 1000.0), "1000.0")
            for k, y in enumerate(last)])
    cfg = RunConfig(
        declarations="declarations.csv",
        instalments="instalments.csv",
        seed=SEED,
        input_costs={"maize": 1400.0, "sorghum": 1300.0, "cowpeas": 1600.0},
    )
    path = os.path.join(directory, "config.ini")
    cfg.write(path)
    return path


if __name__ == "__main__":  # pragma: no cover
    print(write_fixture(sys.argv[1] if len(sys.argv) > 1 else "fixture"))
