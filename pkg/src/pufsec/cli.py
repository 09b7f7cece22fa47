"""Command-line front end: single-query rates and cell counts, full table
reproduction, converse security audits, Monte-Carlo runs, and quantizer
optimization."""

from __future__ import annotations

import dataclasses
import json
import sys

import click

from .stats import DomainError, PufModel
from .quantizer import InputQuantizer, make_equiprobable
from .channel import AttackerSpec
from . import bounds, optimize as opt_mod, sim, tables

STRATEGIES = ("equiprobable", "equidistant", "optimized")


def _fail(msg: str):
    raise click.UsageError(msg)


def _emit(ctx, text: str):
    out = ctx.obj["out"]
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    click.echo(text, nl=not text.endswith("\n"))


def _fmt(value, fmt: str) -> str:
    if value is None:
        return f">{tables.CELL_CAP}"
    if isinstance(value, int):
        return str(value)
    if fmt == "markdown":
        # 3-decimal human format, except for values it would round to 0
        if value != 0 and abs(value) < 5e-4:
            return f"{value:.3g}"
        return f"{value:.3f}"
    return f"{value:.6g}"


def _model(ctx) -> PufModel:
    return ctx.obj["model"]


def _quantizer(ctx, levels, strategy, attacker=None, step=None):
    model = _model(ctx)
    if levels < 2:
        _fail("--levels must be >= 2")
    if strategy == "equiprobable":
        return make_equiprobable(model, levels)
    if strategy == "equidistant":
        from .quantizer import make_equidistant
        return make_equidistant(model, levels,
                                step or tables.FIXED_RANGE / levels)
    if attacker is None:
        _fail("--strategy optimized needs an attacker objective")
    res = opt_mod.optimize_quantizer(
        model, levels, attacker,
        tables._OPT_BUDGETS.get(levels, 300),
        nodes=min(ctx.obj["nodes"], 64), seed=ctx.obj["seed"],
        random_starts=tables._OPT_RANDOM_STARTS.get(levels, 2))
    return res.quantizer


def _attacker(kind, p_d, p_a):
    try:
        if kind == "digital":
            return AttackerSpec("digital", p_d=p_d)
        if p_a is None:
            _fail("--pa is required for the analog attacker")
        return AttackerSpec("analog", p_d=p_d, p_a=p_a)
    except DomainError as e:
        _fail(str(e))


def _render_record(ctx, record: dict) -> str:
    fmt = ctx.obj["fmt"]
    if fmt == "json":
        return json.dumps(record, indent=2, sort_keys=True)
    if fmt == "csv":
        keys = list(record)
        vals = [_fmt(record[k], "csv") if isinstance(record[k], (int, float))
                or record[k] is None else str(record[k]) for k in keys]
        return ",".join(keys) + "\n" + ",".join(vals)
    width = max(len(k) for k in record)
    lines = []
    for k, v in record.items():
        sv = _fmt(v, "markdown") if isinstance(v, (int, float)) or v is None \
            else str(v)
        lines.append(f"{k:<{width}}  {sv}")
    return "\n".join(lines)


@click.group()
@click.option("--sigma-p", default=2241.0, show_default=True,
              help="PUF response standard deviation.")
@click.option("--sigma-n", default=129.0, show_default=True,
              help="Reconstruction noise standard deviation.")
@click.option("--nodes", default=128, show_default=True,
              help="Quadrature nodes for helper-data averaging.")
@click.option("--format", "fmt", default="markdown", show_default=True,
              type=click.Choice(["markdown", "csv", "json"]))
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Also write the output to this file.")
@click.option("--seed", default=0, show_default=True,
              help="Seed for randomized subcommands.")
@click.pass_context
def main(ctx, sigma_p, sigma_n, nodes, fmt, out, seed):
    """Secret-key rates, finite-length cell counts, and security audits
    for quantized Gaussian PUF cells with zero-leakage helper data."""
    try:
        model = PufModel(sigma_p, sigma_n)
    except DomainError as e:
        _fail(str(e))
    if nodes < 16:
        _fail("--nodes must be >= 16")
    ctx.obj = {"model": model, "nodes": nodes, "fmt": fmt, "out": out,
               "seed": seed}


@main.command()
@click.option("--attacker", type=click.Choice(["digital", "analog"]),
              required=True)
@click.option("--pd", "p_d", type=float, required=True,
              help="Fraction of cells the attacker destroys.")
@click.option("--pa", "p_a", type=float, default=None,
              help="Analog attacker's larger destroyed fraction.")
@click.option("--levels", type=int, default=4, show_default=True)
@click.option("--strategy", type=click.Choice(STRATEGIES),
              default="equiprobable", show_default=True)
@click.option("--step", type=float, default=None,
              help="Equidistant step (default: 20000 / levels).")
@click.pass_context
def rate(ctx, attacker, p_d, p_a, levels, strategy, step):
    """Asymptotic secret-key rate in bits per PUF cell."""
    att = _attacker(attacker, p_d, p_a)
    q = _quantizer(ctx, levels, strategy, att, step)
    nodes = ctx.obj["nodes"]
    try:
        s = bounds.summarize_channel(q, _model(ctx), nodes=nodes)
        record = {"attacker": attacker, "levels": levels,
                  "strategy": strategy, "p_d": p_d}
        if attacker == "digital":
            record["rate"] = bounds.asymptotic_rate_digital(s, p_d=p_d)
        else:
            lo, hi = bounds.asymptotic_rate_analog(s, p_d=p_d, p_a=p_a)
            record.update({"p_a": p_a, "rate_lower": lo, "rate_upper": hi})
        record["quadrature_delta"] = s.metadata.get("refinement_delta")
    except DomainError as e:
        _fail(str(e))
    _emit(ctx, _render_record(ctx, record))


@main.command()
@click.option("--attacker", type=click.Choice(["digital", "analog"]),
              required=True)
@click.option("--pd", "p_d", type=float, required=True)
@click.option("--pa", "p_a", type=float, default=None)
@click.option("--levels", type=int, default=4, show_default=True)
@click.option("--strategy", type=click.Choice(STRATEGIES),
              default="equiprobable", show_default=True)
@click.option("--step", type=float, default=None)
@click.option("--eps", type=float, default=1e-6, show_default=True,
              help="Tolerated key-reconstruction failure probability.")
@click.option("--security", type=float, required=True,
              help="Security level lambda in bits (delta = 2^-lambda).")
@click.option("--cap", type=int, default=tables.CELL_CAP, show_default=True)
@click.pass_context
def cells(ctx, attacker, p_d, p_a, levels, strategy, step, eps, security,
          cap):
    """Minimum PUF cell counts: achievability and converse."""
    if security < 1:
        _fail("--security must be >= 1 bit")
    att = _attacker(attacker, p_d, p_a)
    q = _quantizer(ctx, levels, strategy, att, step)
    try:
        query = bounds.BoundQuery(attacker=att, quantizer=q, epsilon=eps,
                                  security_bits=security, n=None)
        summary = bounds.summarize_channel(q, _model(ctx),
                                           nodes=ctx.obj["nodes"])
        ach = bounds.min_cells(query, "achievability", cap, summary=summary)
        conv = bounds.min_cells(query, "converse", cap, summary=summary)
    except DomainError as e:
        _fail(str(e))
    record = {"attacker": attacker, "levels": levels, "strategy": strategy,
              "p_d": p_d, "epsilon": eps, "security_bits": security,
              "cells_ach": ach, "cells_conv": conv}
    if attacker == "analog":
        record["p_a"] = p_a
    _emit(ctx, _render_record(ctx, record))


def _parse_overrides(pairs):
    out = {}
    for pair in pairs:
        if "=" not in pair:
            _fail(f"override {pair!r} is not key=value")
        k, v = pair.split("=", 1)
        key = {"pd": "p_d", "pa": "p_a", "eps": "epsilon"}.get(k, k)
        try:
            if key == "levels":
                out[key] = [int(x) for x in v.split(";")]
            else:
                out[key] = float(v)
        except ValueError:
            _fail(f"override {pair!r} has a non-numeric value")
    return out


@main.command()
@click.option("--id", "table_id", type=int, required=True,
              help="Table number, 1-8.")
@click.option("--compare", is_flag=True,
              help="Append published reference values and deviations.")
@click.option("--override", multiple=True,
              help="Parameter override key=value (pd, pa, eps, levels).")
@click.pass_context
def table(ctx, table_id, compare, override):
    """Reproduce one of the eight published tables."""
    try:
        spec = tables.TableSpec(table_id, _parse_overrides(override))
        data = tables.generate_table(spec, _model(ctx),
                                     nodes=ctx.obj["nodes"],
                                     seed=ctx.obj["seed"], compare=compare)
    except DomainError as e:
        _fail(str(e))
    fmt = ctx.obj["fmt"]
    if fmt == "json":
        text = json.dumps(data, indent=2, sort_keys=True)
    elif fmt == "csv":
        text = tables.render_csv(data)
    else:
        text = tables.render_markdown(data)
    _emit(ctx, text)


@main.command()
@click.option("--cells", "n", type=int, required=True,
              help="Number of PUF cells the design uses.")
@click.option("--levels", type=int, default=8, show_default=True)
@click.option("--strategy", type=click.Choice(STRATEGIES),
              default="equiprobable", show_default=True)
@click.option("--attacker", type=click.Choice(["digital", "analog"]),
              default="digital", show_default=True)
@click.option("--pd", "p_d", type=float, default=0.18, show_default=True)
@click.option("--pa", "p_a", type=float, default=None)
@click.option("--eps", type=float, default=1e-6, show_default=True)
@click.option("--security", type=float, default=128, show_default=True)
@click.pass_context
def audit(ctx, n, levels, strategy, attacker, p_d, p_a, eps, security):
    """Check a claimed security level against the converse bound.

    Exit code 0 when the cell count can support the claim, 1 when the
    converse proves it cannot."""
    if n < 1:
        _fail("--cells must be >= 1")
    if security < 1:
        _fail("--security must be >= 1 bit")
    att = _attacker(attacker, p_d, p_a)
    q = _quantizer(ctx, levels, strategy, att)
    try:
        query = bounds.BoundQuery(attacker=att, quantizer=q, epsilon=eps,
                                  security_bits=security, n=n)
        conv = bounds.min_cells(query, "converse", cap=max(10 * n, 10 ** 6))
    except DomainError as e:
        _fail(str(e))
    feasible = conv is not None and n >= conv
    record = {"cells": n, "levels": levels, "strategy": strategy,
              "attacker": attacker, "p_d": p_d, "epsilon": eps,
              "security_bits": security, "converse_min_cells": conv,
              "gap": None if conv is None else n - conv,
              "verdict": "FEASIBLE" if feasible else "INFEASIBLE"}
    _emit(ctx, _render_record(ctx, record))
    if not feasible:
        sys.exit(1)


@main.command()
@click.option("--levels", type=int, default=4, show_default=True)
@click.option("--strategy", type=click.Choice(STRATEGIES[:2]),
              default="equiprobable", show_default=True)
@click.option("--step", type=float, default=None)
@click.option("--samples", type=int, default=1_000_000, show_default=True)
@click.option("--seed", "seed", type=int, default=None,
              help="Overrides the global --seed for this run.")
@click.option("--attacker", type=click.Choice(["digital", "analog"]),
              default=None)
@click.option("--pd", "p_d", type=float, default=None)
@click.option("--pa", "p_a", type=float, default=None)
@click.option("--negative-control", "negative",
              type=click.Choice(["center-distance"]), default=None,
              help="Run the leakage test with the broken helper scheme.")
@click.option("--dump-csv", type=click.Path(dir_okay=False), default=None,
              help="Write (S, W, S~) sample triples (capped at 1e6 rows).")
@click.pass_context
def simulate(ctx, levels, strategy, step, samples, seed, attacker, p_d, p_a,
             negative, dump_csv):
    """Monte-Carlo run of the enrollment/reconstruction pipeline."""
    att = _attacker(attacker, p_d, p_a) if attacker else None
    q = _quantizer(ctx, levels, strategy, att, step)
    use_seed = ctx.obj["seed"] if seed is None else seed
    try:
        cfg = sim.SimConfig(_model(ctx), q, samples=samples, seed=use_seed,
                            attacker=att)
        report = sim.run_simulation(cfg)
        payload = json.loads(report.to_json())
        helper = negative or "zero-leakage"
        payload["leakage_test"] = {
            "helper": helper,
            "per_level": sim.leakage_test(cfg, helper=helper)}
    except DomainError as e:
        _fail(str(e))
    if dump_csv:
        _dump_samples(cfg, dump_csv)
    _emit(ctx, json.dumps(payload, sort_keys=True,
                          indent=2 if ctx.obj["fmt"] == "markdown" else None))


def _dump_samples(cfg, path, cap=1_000_000):
    capped = dataclasses.replace(cfg, samples=min(cfg.samples, cap))
    with open(path, "w") as fh:
        fh.write("s,w,s_tilde\n")
        s, w, st, _ = sim._simulate_chunk(capped, 0, capped.samples)
        for a, b, c in zip(s, w, st):
            fh.write(f"{a},{b:.6g},{c}\n")


@main.command("optimize")
@click.option("--attacker", type=click.Choice(["digital", "analog"]),
              required=True)
@click.option("--pd", "p_d", type=float, required=True)
@click.option("--pa", "p_a", type=float, default=None)
@click.option("--levels", type=int, default=4, show_default=True)
@click.option("--budget", type=int, default=2000, show_default=True)
@click.pass_context
def optimize_cmd(ctx, attacker, p_d, p_a, levels, budget):
    """Search for the rate-maximizing input quantizer."""
    att = _attacker(attacker, p_d, p_a)
    try:
        res = opt_mod.optimize_quantizer(
            model=_model(ctx), levels=levels, objective=att, budget=budget,
            nodes=min(ctx.obj["nodes"], 64), seed=ctx.obj["seed"])
    except DomainError as e:
        _fail(str(e))
    record = {"attacker": attacker, "levels": levels, "p_d": p_d,
              "rate": res.rate, "evaluations": res.evaluations,
              "budget_exhausted": res.budget_exhausted,
              "quantizer": res.quantizer.to_dict()}
    if attacker == "analog":
        record["p_a"] = p_a
    _emit(ctx, json.dumps(record, sort_keys=True,
                          indent=2 if ctx.obj["fmt"] == "markdown" else None))


if __name__ == "__main__":
    main()
