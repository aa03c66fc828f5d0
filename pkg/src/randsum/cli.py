"""Command-line interface: ``randsum {bound,simulate,verify,exponents,lower}``.

Every command writes ``<out>/<command>.csv`` (with ``#`` metadata lines) and
a JSON companion holding the resolved configuration and summary results.
Exit codes: 0 ok, 1 verification failure, 2 configuration or domain error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import config as cfgmod
from .bound_engine import (bound_curve, closed_form_geometric, closed_form_poisson,
                           q_operator, stopping_exponents)
from .errors import ConfigError, DomainError, NumericalError
from .index_laws import Geometric, ShiftedPoisson
from .lower_bounds import (exact_two_point_tail, floor_constant, geometric_lower_bound_mc,
                           poisson_lower_overlay, tail_exponent_slope, two_point_ratio_table,
                           TwoPointConstruction)
from .mc_verifier import (CompoundSpec, FirstPassage, FixedWindowMax, Independent,
                          empirical_moments, simulate_normalized_sum_tail, simulate_tail,
                          stopping_time_experiment)
from .reporting import SCHEMA_VERSION, Table, jsonable
from .tail_core import GmrSpec, ml_exponents

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class Run:
    """Output sink for one command invocation."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.written = []

    def header(self):
        c = self.cfg
        return [f"schema_version: {SCHEMA_VERSION}", f"tool: randsum {__version__}",
                f"command: {c.command}", f"config_hash: {c.config_hash()}", f"seed: {c.seed}"]

    def write(self, name, csv_writer, payload):
        os.makedirs(self.cfg.out, exist_ok=True)
        base = os.path.join(self.cfg.out, name)
        csv_writer(base + ".csv", self.header())
        doc = {"schema_version": SCHEMA_VERSION, "tool_version": __version__,
               "config_hash": self.cfg.config_hash(), "config": self.cfg.hashable(),
               "result": payload}
        with open(base + ".json", "w") as fh:
            fh.write(json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n")
        self.written += [base + ".csv", base + ".json"]

    def say(self, msg):
        if not self.cfg.quiet:
            print(msg)


def _table_writer(table):
    return lambda path, header: table.to_csv(path, header)


def _closed_form(summand, law, x, cfg):
    ml = summand.exponents
    C, Ccap = cfg.constant("C"), cfg.constant("Ccap")
    if isinstance(law, Geometric):
        return closed_form_geometric(ml, x, C=C, Ccap=Ccap)
    if isinstance(law, ShiftedPoisson):
        return closed_form_poisson(ml, x, C=C, Ccap=Ccap)
    raise ConfigError("closed-form bounds need a geometric or shifted_poisson index",
                      field="index")


def cmd_bound(cfg, run):
    summand = cfgmod.build_summand(cfg.summand)
    law = cfgmod.build_law(cfg.index)
    x = cfg.x_grid()
    if cfg.bound_source == "closed_form":
        vals = _closed_form(summand, law, x, cfg)
        table = Table({"x": x, "bound": vals})
        run.write("bound", _table_writer(table), table.to_dict())
    else:
        curve = bound_curve(summand, law, x, eps_tail=cfg.eps_tail)
        run.write("bound", curve.to_csv, curve.to_dict())
    run.say(f"bound: {x.size} points written to {cfg.out}")
    return EXIT_OK


def _rule(d, law):
    kind = d.get("rule")
    if kind == "first_passage":
        return FirstPassage(float(d["level"]))
    if kind == "fixed_window_max":
        return FixedWindowMax(int(d["window"]))
    if kind == "independent":
        return Independent(law)
    raise ConfigError(f"unknown stopping rule {kind!r}", field="rule")


def _sampleable(summand):
    if isinstance(summand, cfgmod.CsvSummand):
        raise ConfigError("tabulated summands cannot be simulated", field="summand")
    return summand


def _simulate(cfg, summand, law, x):
    if cfg.n is not None:
        return simulate_normalized_sum_tail(summand, cfg.n, x, cfg.N, cfg.seed,
                                            confidence=cfg.confidence, workers=cfg.workers)
    return simulate_tail(CompoundSpec(summand, law), x, cfg.N, cfg.seed,
                         confidence=cfg.confidence, workers=cfg.workers)


def cmd_simulate(cfg, run):
    summand = _sampleable(cfgmod.build_summand(cfg.summand))
    law = cfgmod.build_law(cfg.index)
    if cfg.rule:
        res = stopping_time_experiment(_rule(cfg.rule, law), summand, p_grid=cfg.p_grid,
                                       N=cfg.N, seed=cfg.seed)
        run.write("simulate_stopping", _table_writer(res.table), res.table.to_dict())
        run.say(f"stopped sum: q = {res.exponents.q:.4f}, slope = {res.slope:.4f}")
        return EXIT_OK
    tail = _simulate(cfg, summand, law, cfg.x_grid())
    table = tail.to_table()
    run.write("simulate", _table_writer(table), table.to_dict())
    if cfg.moments:
        mt = empirical_moments(CompoundSpec(summand, law), p_grid=cfg.p_grid, N=cfg.N,
                               seed=cfg.seed)
        run.write("simulate_moments", _table_writer(mt), mt.to_dict())
    run.say(f"simulate: N = {cfg.N}, seed = {cfg.seed}, {tail.x.size} points")
    return EXIT_OK


def cmd_verify(cfg, run):
    summand = _sampleable(cfgmod.build_summand(cfg.summand))
    law = cfgmod.build_law(cfg.index)
    x = cfg.x_grid()
    tail = _simulate(cfg, summand, law, x)
    if cfg.n is not None:
        # fixed n: the single-sum operator bounds every normalised partial sum
        bound, _ = q_operator(summand.tail(), summand.cumulant(), x)
    elif cfg.bound_source == "closed_form":
        bound = _closed_form(summand, law, x, cfg)
    else:
        bound = bound_curve(summand, law, x, eps_tail=cfg.eps_tail).values
    status = np.where(tail.hits < cfg.min_hits, "skipped-infeasible",
                      np.where(tail.ci_high <= bound, "PASS", "FAIL"))
    table = tail.to_table()
    table.columns["bound"] = np.asarray(bound, dtype=float)
    table.columns["status"] = status
    counts = {"pass": int(np.sum(status == "PASS")), "fail": int(np.sum(status == "FAIL")),
              "skipped-infeasible": int(np.sum(status == "skipped-infeasible"))}
    run.write("verify", _table_writer(table), {"counts": counts, **table.to_dict()})
    run.say(f"verify: {counts['pass']} pass, {counts['fail']} fail, "
            f"{counts['skipped-infeasible']} skipped-infeasible")
    return EXIT_VERIFY if counts["fail"] else EXIT_OK


def exponent_rows(pairs):
    cols = {k: [] for k in ("m", "r", "M", "L", "x_power", "geometric_log_power",
                            "poisson_log_power", "status")}
    for m, r in pairs:
        m, r = cfgmod._num(m), float(r)
        cols["m"].append(m)
        cols["r"].append(r)
        try:
            ml = ml_exponents(m, r)
            vals = (ml.M, ml.L, ml.x_power, ml.geometric_log_power, ml.poisson_log_power, "ok")
        except DomainError:
            vals = (math.nan,) * 5 + ("domain-error",)
        for k, v in zip(("M", "L", "x_power", "geometric_log_power", "poisson_log_power",
                         "status"), vals):
            cols[k].append(v)
    return Table(cols)


def cmd_exponents(cfg, run):
    table = exponent_rows(cfg.pairs)
    payload = {"ml": table.to_dict()}
    run.write("exponents", _table_writer(table), payload)
    if cfg.stopping:
        cols = {k: [] for k in ("a", "b", "m", "r", "q", "w")}
        for a, b, m, r in cfg.stopping:
            e = stopping_exponents(cfgmod._num(a), float(b), cfgmod._num(m), float(r))
            for k in cols:
                cols[k].append(getattr(e, k))
        st = Table(cols)
        run.write("exponents_stopping", _table_writer(st), st.to_dict())
    run.say(f"exponents: {len(table)} (m, r) rows")
    return EXIT_OK


def cmd_lower(cfg, run):
    x = cfg.x_grid()
    if cfg.lower == "two_point":
        if np.any(x < 3):
            raise ConfigError("two-point construction needs x >= 3", field="grid")
        table = two_point_ratio_table(x)
        payload = {"floor_constant": floor_constant(), **table.to_dict()}
        if cfg.mc_check_N:
            c = TwoPointConstruction(float(x[0]))
            tail = simulate_tail(c.spec(), [c.x], cfg.mc_check_N, cfg.seed)
            payload["mc_check"] = {"x": c.x, "estimate": tail.hits_pos[0] / tail.N,
                                   "exact": exact_two_point_tail(c.x).exact, "N": tail.N}
        run.write("lower", _table_writer(table), payload)
        ok = bool(np.all(table["holds"]))
        run.say(f"lower two_point: ratio >= floor at all points: {ok}")
        return EXIT_OK if ok else EXIT_VERIFY
    summand = cfgmod.build_summand(cfg.summand)
    if not isinstance(summand, GmrSpec):
        raise ConfigError("lower bounds need a gmr summand", field="summand")
    if cfg.lower == "poisson":
        table = poisson_lower_overlay(summand, x, C8=cfg.constant("C8"), C9=cfg.constant("C9"),
                                      C=cfg.constant("C"), Ccap=cfg.constant("Ccap"))
        run.write("lower", _table_writer(table), table.to_dict())
        return EXIT_OK
    law = cfgmod.build_law(cfg.index)
    if not isinstance(law, Geometric):
        raise ConfigError("geometric lower bound needs a geometric index", field="index")
    tail = geometric_lower_bound_mc(summand, law.A, x, cfg.N, cfg.seed,
                                    C6=cfg.constant("C6"), C7=cfg.constant("C7"),
                                    C=cfg.constant("C"), Ccap=cfg.constant("Ccap"),
                                    min_hits=cfg.min_hits, drop_infeasible=cfg.drop_infeasible,
                                    confidence=cfg.confidence, workers=cfg.workers)
    table = tail.to_table()
    slope = tail_exponent_slope(tail, x_min=float(x.min()), min_hits=cfg.min_hits)
    run.write("lower", _table_writer(table),
              {"slope": slope, "x_power": tail.meta["x_power"], **table.to_dict()})
    run.say(f"lower geometric: slope {slope:.4f} vs exponent {tail.meta['x_power']:.4f}")
    return EXIT_OK


COMMAND_FUNCS = {"bound": cmd_bound, "simulate": cmd_simulate, "verify": cmd_verify,
                 "exponents": cmd_exponents, "lower": cmd_lower}


def build_parser():
    p = argparse.ArgumentParser(prog="randsum", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"randsum {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in cfgmod.COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML or JSON run configuration")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", help=f"output directory (default ${cfgmod.ENV_OUT} or ./randsum-out)")
        s.add_argument("--grid", help="x grid as 'a:b:step' (inclusive)")
        s.add_argument("--N", type=int, help="Monte Carlo sample size")
        s.add_argument("--quiet", action="store_true", default=None)
        s.add_argument("--dump-config", action="store_true",
                       help="print the resolved configuration as YAML and exit")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    flags = {"seed": args.seed, "out": args.out, "grid": args.grid, "N": args.N,
             "quiet": args.quiet}
    try:
        cfg = cfgmod.resolve(args.command, args.config, flags)
        if args.dump_config:
            sys.stdout.write(cfgmod.dump(cfg))
            return EXIT_OK
        return COMMAND_FUNCS[args.command](cfg, Run(cfg))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
