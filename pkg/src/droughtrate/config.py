"""Run configuration stored as an INI file.

Example::

    [inputs]
    yields = yields.csv
    areas = areas.csv
    prices = prices.csv
    declarations = declarations.csv
    instalments =

    [policy]
    instalment = 1008.0
    instalment_window = 10
    retained_fraction = 0.15
    nu =
    eta = 1.96
    omega = declarations
    total_area =
    equal_weights = false
    drop_uninsurable = false

    [grid]
    start = 0.05
    stop = 0.95
    step = 0.05

    [simulation]
    replications = 10000
    horizon = 25
    seed = 2019
    workers = 1

    [output]
    directory = out

    [input_costs]
    maize = 1500.0

Empty values mean "not set". Relative paths resolve against the config
file's directory. ``omega`` is ``declarations`` (use the declared-year
frequency) or a number. Floats are written with ``repr`` so
``from_string(cfg.to_string()) == cfg``.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, fields

from .errors import ValidationError

_SECTIONS = {
    "inputs": ("yields", "areas", "prices", "declarations", "instalments"),
    "policy": ("instalment", "instalment_window", "retained_fraction", "nu", "eta", "omega",
               "total_area", "equal_weights", "drop_uninsurable"),
    "grid": ("grid_start", "grid_stop", "grid_step"),
    "simulation": ("replications", "horizon", "seed", "workers"),
    "output": ("out_dir",),
}
_INI_KEY = {"grid_start": "start", "grid_stop": "stop", "grid_step": "step",
            "out_dir": "directory"}


@dataclass
class RunConfig:
    yields: str = "yields.csv"
    areas: str = "areas.csv"
    prices: str = "prices.csv"
    declarations: str | None = None
    instalments: str | None = None
    instalment: float | None = None
    instalment_window: int = 10
    retained_fraction: float = 0.15
    nu: float | None = None
    eta: float = 1.96
    omega: str = "declarations"
    total_area: float | None = None
    equal_weights: bool = False
    drop_uninsurable: bool = False
    grid_start: float = 0.05
    grid_stop: float = 0.95
    grid_step: float = 0.05
    replications: int = 10_000
    horizon: int = 25
    seed: int = 0
    workers: int = 1
    out_dir: str = "out"
    input_costs: dict = field(default_factory=dict)
    base_dir: str = field(default=".", compare=False, repr=False)

    def __post_init__(self):
        if not self.grid_step > 0:
            raise ValidationError(f"grid step must be > 0, got {self.grid_step!r}")
        if self.omega != "declarations":
            try:
                w = float(self.omega)
            except ValueError:
                raise ValidationError(
                    f"omega must be 'declarations' or a number, got {self.omega!r}"
                ) from None
            if not 0.0 < w <= 1.0:
                raise ValidationError(f"omega must lie in (0, 1], got {w!r}")

    def path(self, name: str) -> str | None:
        value = getattr(self, name)
        if value is None:
            return None
        return value if os.path.isabs(value) else os.path.join(self.base_dir, value)

    def omega_grid(self) -> list:
        return omega_grid(self.grid_start, self.grid_stop, self.grid_step)

    # -- serialisation -------------------------------------------------------

    def to_string(self) -> str:
        lines = []
        for section, names in _SECTIONS.items():
            lines.append(f"[{section}]")
            for name in names:
                lines.append(f"{_INI_KEY.get(name, name)} = {_fmt(getattr(self, name))}")
            lines.append("")
        lines.append("[input_costs]")
        for crop, cost in self.input_costs.items():
            lines.append(f"{crop} = {_fmt(cost)}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_string())

    @classmethod
    def from_string(cls, text: str, base_dir: str = ".") -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ValidationError(f"config: {exc}") from None
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for section, names in _SECTIONS.items():
            if not cp.has_section(section):
                continue
            known = {_INI_KEY.get(n, n): n for n in names}
            for key, raw in cp.items(section):
                if key not in known:
                    raise ValidationError(f"config: unknown key [{section}] {key}")
                name = known[key]
                kw[name] = _parse(raw.strip(), types[name], f"[{section}] {key}")
        if cp.has_section("input_costs"):
            kw["input_costs"] = {
                crop: _parse(v.strip(), "float", f"[input_costs] {crop}")
                for crop, v in cp.items("input_costs")
            }
        return cls(base_dir=base_dir, **kw)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        return cls.from_string(text, base_dir=os.path.dirname(os.path.abspath(path)))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(raw: str, typ: str, where: str):
    optional = "None" in typ
    if raw == "":
        if optional:
            return None
        raise ValidationError(f"config: {where} must not be empty")
    try:
        if typ.startswith("bool"):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError(raw)
            return v
    except ValueError:
        raise ValidationError(f"config: bad value {raw!r} for {where}") from None
    return raw


def omega_grid(start: float, stop: float, step: float) -> list:
    """Inclusive arithmetic grid, each point rounded to 12 decimals."""
    if not step > 0:
        raise ValidationError("grid step must be > 0")
    if not 0.0 < start <= stop <= 1.0:
        raise ValidationError("grid must satisfy 0 < start <= stop <= 1")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]
