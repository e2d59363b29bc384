"""Command-line interface.

    droughtrate ingest   --config run.ini
    droughtrate analyze  --config run.ini [--out DIR]
    droughtrate rates    --config run.ini [--omega W|declarations] [--nu NU]
    droughtrate fund     --config run.ini [--eta ETA]
    droughtrate simulate --config run.ini [--seed S] [--workers K]

Exit codes: 0 success, 1 validation error, 2 computation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import dataset, empirics, lossmodel, ratemaking, simulate
from .config import RunConfig
from .errors import ComputationError, ValidationError
from .fund import size_fund

logger = logging.getLogger("droughtrate")

EXIT_OK, EXIT_VALIDATION, EXIT_COMPUTATION = 0, 1, 2


@dataclass
class Inputs:
    panel: dataset.YieldPanel
    prices: dataset.PriceSchedule
    log: dataset.DeclarationLog | None
    dropped_years: tuple
    dropped_crops: tuple


def _require(path, what):
    if path is None:
        raise ValidationError(f"no {what} file configured")
    if not os.path.exists(path):
        raise ValidationError(f"{what} file not found: {path}")
    return path


def load_inputs(cfg: RunConfig) -> Inputs:
    ypath = _require(cfg.path("yields"), "yields")
    apath = _require(cfg.path("areas"), "areas")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", dataset.PanelWarning)
        panel = dataset.load_panel(ypath, apath)
    prices = dataset.load_prices(_require(cfg.path("prices"), "prices"), panel)
    log = None
    if cfg.declarations is not None:
        log = dataset.load_declarations(_require(cfg.path("declarations"), "declarations"), panel)
    return Inputs(panel, prices, log, panel.dropped_years, panel.dropped_crops)


def resolve_omega(cfg: RunConfig, inputs: Inputs) -> float:
    if cfg.omega == "declarations":
        if inputs.log is None:
            raise ValidationError("omega = declarations but no declarations file configured")
        w = inputs.log.omega_hat
        if w <= 0:
            raise ValidationError("no declared years: cannot derive thresholds from omega_hat")
        return w
    return float(cfg.omega)


def resolve_instalment(cfg: RunConfig) -> float:
    if cfg.instalment is not None:
        return cfg.instalment
    if cfg.instalments is None:
        raise ValidationError("set [policy] instalment or provide an instalments file")
    records = dataset.load_instalments(_require(cfg.path("instalments"), "instalments"))
    return ratemaking.instalment_from_history(records, cfg.instalment_window)


def _cluster(cfg, inputs, omega):
    """Panel, thresholds and shares at ``omega`` after the configured options."""
    panel = inputs.panel
    thr = empirics.thresholds_for_omega(panel, omega, inputs.log)
    theta = dataset.derive_theta(panel, equal_weights=cfg.equal_weights)
    if cfg.drop_uninsurable:
        panel, thr, theta = ratemaking.insurable_subset(panel, inputs.prices, thr, theta)
    return panel, thr, theta


def _total_area(cfg, panel):
    return cfg.total_area if cfg.total_area is not None else float(panel.total_area()[-1])


def _out_dir(cfg):
    path = cfg.out_dir if os.path.isabs(cfg.out_dir) else os.path.join(cfg.base_dir, cfg.out_dir)
    os.makedirs(path, exist_ok=True)
    return path


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, indent=2) + "\n")


def _r(x):
    return repr(float(x))


# -- commands ----------------------------------------------------------------


def cmd_ingest(cfg: RunConfig) -> dict:
    inputs = load_inputs(cfg)
    p = inputs.panel
    report = {
        "crops": list(p.crops),
        "J": p.n_crops,
        "years": [p.years[0], p.years[-1]],
        "n": p.n_years,
        "dropped_years": list(inputs.dropped_years),
        "dropped_crops": list(inputs.dropped_crops),
        "price_mode": "time-varying" if inputs.prices.time_varying else "constant",
    }
    print(f"crops: J={p.n_crops} ({', '.join(p.crops)})")
    print(f"years: n={p.n_years} ({p.years[0]}-{p.years[-1]})")
    print(f"dropped years: {list(inputs.dropped_years) or 'none'}")
    print(f"dropped crops: {list(inputs.dropped_crops) or 'none'}")
    if inputs.log is not None:
        frac = inputs.log.omega_fraction
        report["omega_hat"] = inputs.log.omega_hat
        print(f"omega_hat: {len(inputs.log.declared_years)}/{p.n_years} = "
              f"{inputs.log.omega_hat:.4f} ({frac})")
    return report


def cmd_analyze(cfg: RunConfig) -> dict:
    inputs = load_inputs(cfg)
    out = _out_dir(cfg)
    panel, prices = inputs.panel, inputs.prices
    rev = lossmodel.revenue_series(panel, prices)
    costs = cfg.input_costs
    header = ["crop", "year", "revenue_per_ha"] + (["input_cost_per_ha"] if costs else [])
    rows = []
    for j, crop in enumerate(panel.crops):
        for t, year in enumerate(panel.years):
            row = [crop, year, _r(rev[j, t])]
            if costs:
                row.append(_r(costs[crop]) if crop in costs else "")
            rows.append(row)
    _write_csv(os.path.join(out, "revenue.csv"), header, rows)

    theta = dataset.derive_theta(panel, equal_weights=cfg.equal_weights)
    profit_rows, phi_rows = [], []
    for w in cfg.omega_grid():
        thr = empirics.thresholds_for_omega(panel, w)
        losses = lossmodel.loss_gain_surplus(panel, prices, thr)
        p_, th_ = panel, theta
        if cfg.drop_uninsurable:
            p_, thr_, th_ = ratemaking.insurable_subset(panel, prices, thr, theta)
            losses_c = lossmodel.loss_gain_surplus(p_, prices, thr_)
        else:
            losses_c = losses
        stats = lossmodel.cluster_stats(th_, losses_c)
        per_crop = losses.surplus.mean(axis=1)
        profit_rows.append([_r(w)] + [_r(s) for s in per_crop] + [_r(stats.mean_surplus)])
        phi_rows.append([_r(w), _r(stats.phi)])
    _write_csv(os.path.join(out, "profit_vs_omega.csv"),
               ["omega"] + list(panel.crops) + ["cluster"], profit_rows)
    _write_csv(os.path.join(out, "phi_vs_omega.csv"), ["omega", "phi"], phi_rows)
    print(f"wrote revenue.csv, profit_vs_omega.csv, phi_vs_omega.csv to {out}")
    return {"revenue_rows": len(rows), "grid_points": len(phi_rows)}


def cmd_rates(cfg: RunConfig) -> dict:
    inputs = load_inputs(cfg)
    out = _out_dir(cfg)
    l = resolve_instalment(cfg)
    omega = resolve_omega(cfg, inputs)
    terms = ratemaking.PolicyTerms(l, cfg.retained_fraction, omega, cfg.nu)
    sched = ratemaking.rate_schedule(
        inputs.panel, inputs.prices, terms, cfg.omega_grid(),
        equal_weights=cfg.equal_weights, drop_uninsurable=cfg.drop_uninsurable,
    )
    sched.to_csv(os.path.join(out, "rate_schedule.csv"))

    panel, thr, theta = _cluster(cfg, inputs, omega)
    stats = lossmodel.cluster_stats(theta, lossmodel.loss_gain_surplus(panel, inputs.prices, thr))
    nu = cfg.nu
    if nu is not None:
        nu = max(nu, ratemaking.nu_floor(stats.mean_surplus, l))
    quote = ratemaking.set_rates(stats.mean_surplus, replace(terms, nu=nu))
    sound = ratemaking.sound_rate(omega, cfg.retained_fraction)

    print(f"instalment l = {l:.2f} per ha")
    print(f"sound rate at omega={omega:.4f}, p={cfg.retained_fraction}: {100 * sound:.1f}%")
    if sched.subsidy_onset is None:
        print("no subsidy required on the grid")
    else:
        print(f"subsidy required from omega = {sched.subsidy_onset}")
    if sched.full_subsidy_onset is not None:
        print(f"full subsidy required from omega = {sched.full_subsidy_onset}")
    print(f"quote at omega={omega:.4f}: E[S]={stats.mean_surplus:.2f}, "
          f"gamma={quote.gamma:.4f}, kappa={quote.kappa:.4f} ({quote.regime.value})")
    summary = {
        "instalment": l,
        "omega": omega,
        "retained_fraction": cfg.retained_fraction,
        "sound_rate": sound,
        "subsidy_onset": sched.subsidy_onset,
        "full_subsidy_onset": sched.full_subsidy_onset,
        "quote": {
            "mean_surplus": stats.mean_surplus,
            "gamma": quote.gamma,
            "kappa": quote.kappa,
            "nu": quote.nu,
            "regime": quote.regime.value,
            "l1": quote.l1,
            "R": quote.R,
            "R1": quote.R1,
            "farmer_premium": quote.gamma * l,
            "government_subsidy": quote.kappa * l,
        },
    }
    _write_json(os.path.join(out, "rates_summary.json"), summary)
    return summary


def cmd_fund(cfg: RunConfig) -> dict:
    inputs = load_inputs(cfg)
    out = _out_dir(cfg)
    omega = resolve_omega(cfg, inputs)
    panel, thr, theta = _cluster(cfg, inputs, omega)
    stats = lossmodel.cluster_stats(theta, lossmodel.loss_gain_surplus(panel, inputs.prices, thr))
    spec = size_fund(stats, _total_area(cfg, panel), cfg.eta)
    result = spec.to_dict()
    result.update(omega=omega, crops=list(panel.crops), mu_c=[float(m) for m in thr.mu_c])
    _write_json(os.path.join(out, "fund.json"), result)
    print(f"fund = {spec.fund:.2f} over {spec.total_area:.0f} ha "
          f"(eta={spec.eta}, ruin probability {spec.ruin_prob:.4f})")
    return result


def cmd_simulate(cfg: RunConfig) -> dict:
    inputs = load_inputs(cfg)
    out = _out_dir(cfg)
    omega = resolve_omega(cfg, inputs)
    l = resolve_instalment(cfg)
    panel, thr, theta = _cluster(cfg, inputs, omega)
    prices = inputs.prices
    sim = simulate.SimConfig(cfg.replications, cfg.horizon, cfg.seed, workers=cfg.workers)

    losses = lossmodel.loss_gain_surplus(panel, prices, thr)
    stats = lossmodel.cluster_stats(theta, losses)
    spec = size_fund(stats, _total_area(cfg, panel), cfg.eta)
    terms = ratemaking.PolicyTerms(l, cfg.retained_fraction, omega, cfg.nu)
    nu = None if cfg.nu is None else max(cfg.nu, ratemaking.nu_floor(stats.mean_surplus, l))
    quote = ratemaking.set_rates(stats.mean_surplus, replace(terms, nu=nu))
    log = inputs.log if cfg.omega == "declarations" else None

    report = simulate.bootstrap_moments(panel, prices, thr, theta, sim)
    report = report.merge(simulate.SimReport(
        est_ruin_freq=simulate.ruin_frequency(spec, panel, prices, thr, theta, sim)))
    report = report.merge(simulate.scheme_trajectory(terms, quote, panel, prices, thr,
                                                     theta, sim, log=log))
    with open(os.path.join(out, "sim_report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())

    closed = {
        "est_mean_loss": stats.mean_loss,
        "est_var_loss": stats.var_loss_pop,
        "est_ruin_freq": spec.ruin_prob,
        "est_mean_surplus": stats.mean_surplus,
        "est_mean_outlay": quote.l1 + quote.gamma * l,
    }
    deltas = {}
    for name, ref in closed.items():
        est = getattr(report, name)
        z = (est.value - ref) / est.stderr if est.stderr and est.stderr > 0 else float("nan")
        deltas[name] = z
        shown = f"{z:+.2f} se" if np.isfinite(z) else "n/a (zero spread)"
        print(f"{name}: simulated {est.value:.6g} (se {est.stderr:.3g}) "
              f"vs closed form {ref:.6g}: {shown}")
    return {"report": report.to_dict(), "deltas": deltas}


COMMANDS = {
    "ingest": cmd_ingest,
    "analyze": cmd_analyze,
    "rates": cmd_rates,
    "fund": cmd_fund,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (INI)")
    common.add_argument("--out", help="output directory (overrides [output] directory)")
    common.add_argument("--seed", type=int, help="simulation seed (unsigned 64-bit)")
    common.add_argument("--omega", help="drought probability, or 'declarations'")
    common.add_argument("--eta", type=float, help="fund risk-appetite multiplier")
    common.add_argument("--nu", type=float, help="government share (raised to the floor if lower)")
    common.add_argument("--drop-uninsurable", action="store_true",
                        help="remove crops with non-positive mean surplus, renormalise shares")
    common.add_argument("--workers", type=int, help="simulation worker threads")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="droughtrate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__name__.replace("cmd_", ""))
    return parser


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    kw = {}
    if args.out is not None:
        kw["out_dir"] = os.path.abspath(args.out)
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.omega is not None:
        kw["omega"] = args.omega
    if args.eta is not None:
        kw["eta"] = args.eta
    if args.nu is not None:
        kw["nu"] = args.nu
    if args.drop_uninsurable:
        kw["drop_uninsurable"] = True
    if args.workers is not None:
        kw["workers"] = args.workers
    return replace(cfg, **kw) if kw else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if not os.path.exists(args.config):
            raise ValidationError(f"config file not found: {args.config}")
        cfg = apply_overrides(RunConfig.from_file(args.config), args)
        COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ComputationError as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
