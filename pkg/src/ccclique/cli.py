"""Command-line interface: run one instance, verify a coloring file, sweep
a parameter grid, or run the tiny-scale selftests.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 internal
invariant violation.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import sys

import click
import numpy as np

from .config import Config, load_config, parse_override
from .coloring import is_proper
from .errors import CliqueError, InputError
from .graphs import gen_random_graph, load_graph
from .harness import (ALGORITHMS, read_coloring, run_algorithm,
                      write_coloring)
from .selftest import run_selftests

log = logging.getLogger("ccclique")


def _setup_logging():
    level = os.environ.get("CCCLIQUE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _parse_gen(spec: str):
    try:
        n_s, p_s = spec.split(",")
        return int(n_s), float(p_s)
    except ValueError as exc:
        raise InputError(f"--gen expects 'n,p', got {spec!r}") from exc


def _load_instance(graph_path, gen, seed):
    if (graph_path is None) == (gen is None):
        raise InputError("exactly one of --graph or --gen is required")
    if graph_path:
        return load_graph(graph_path)
    n, p = _parse_gen(gen)
    return gen_random_graph(n, p, seed)


def _build_config(config_path, overrides, seed):
    kv = {}
    for item in overrides:
        if "=" not in item:
            raise InputError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        try:
            kv[k] = parse_override(k, v)
        except KeyError as exc:
            raise InputError(f"unknown config key {k!r}") from exc
    cfg = load_config(config_path, kv)
    if seed is not None:
        cfg = cfg.with_overrides(rng_seed=seed)
    return cfg


def _emit(report: dict, out, fmt: str):
    if fmt == "json":
        text = json.dumps(report, indent=2, default=str, sort_keys=True)
    else:
        flat = {k: v for k, v in report.items()
                if not isinstance(v, (dict, list))}
        text = ",".join(str(k) for k in flat) + "\n" + \
            ",".join(str(v) for v in flat.values())
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


@click.group()
def main():
    """Congested-clique coloring simulator."""
    _setup_logging()


@main.command("run")
@click.option("--algo", type=click.Choice(ALGORITHMS), required=True)
@click.option("--graph", "graph_path", type=click.Path(exists=True))
@click.option("--gen", help="generate a random instance: n,p")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--set", "overrides", multiple=True,
              help="config override key=value (repeatable)")
@click.option("--eps", type=float, default=0.25, show_default=True,
              help="epsilon for the manycolors budget")
@click.option("--out", type=click.Path())
@click.option("--coloring-out", type=click.Path(),
              help="also write the coloring (vertex color per line)")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
              default="json", show_default=True)
def run_cmd(algo, graph_path, gen, seed, config_path, overrides, eps, out,
            coloring_out, fmt):
    """Run one algorithm on one instance and emit a report."""
    try:
        graph = _load_instance(graph_path, gen, seed)
        cfg = _build_config(config_path, overrides, seed)
    except (InputError, OSError, ValueError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(2)
    try:
        coloring, report = run_algorithm(algo, graph, cfg, eps=eps)
    except (AssertionError, CliqueError) as exc:
        click.echo(f"internal invariant violation: {exc}", err=True)
        sys.exit(3)
    if coloring_out:
        write_coloring(coloring, coloring_out)
    _emit(report, out, fmt)
    if not (report["proper"] and report["within_budget"]
            and report["bandwidth_ok"]):
        sys.exit(1)


@main.command("verify")
@click.option("--graph", "graph_path", type=click.Path(exists=True),
              required=True)
@click.option("--coloring", "coloring_path", type=click.Path(exists=True),
              required=True)
def verify_cmd(graph_path, coloring_path):
    """Check a coloring file against a graph file."""
    try:
        graph = load_graph(graph_path)
        coloring = read_coloring(coloring_path, graph.n)
    except (InputError, OSError, ValueError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(2)
    verdict = is_proper(graph, coloring, None)
    if verdict is True:
        click.echo("proper")
        return
    click.echo(f"violation: {verdict}")
    sys.exit(1)


@main.command("sweep")
@click.option("--algos", required=True, help="comma-separated algorithms")
@click.option("--n", "ns", required=True, help="comma-separated sizes")
@click.option("--density", "densities", required=True,
              help="comma-separated edge probabilities")
@click.option("--seeds", default="0", show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--set", "overrides", multiple=True)
@click.option("--eps", type=float, default=0.25, show_default=True)
@click.option("--out", type=click.Path(), help="directory for reports")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
              default="json", show_default=True)
def sweep_cmd(algos, ns, densities, seeds, config_path, overrides, eps,
              out, fmt):
    """Run an (algorithm x n x density x seed) grid; one report per cell."""
    try:
        algo_list = [a.strip() for a in algos.split(",") if a.strip()]
        for a in algo_list:
            if a not in ALGORITHMS:
                raise InputError(f"unknown algorithm {a!r}")
        n_list = [int(x) for x in ns.split(",")]
        d_list = [float(x) for x in densities.split(",")]
        seed_list = [int(x) for x in seeds.split(",")]
    except (InputError, ValueError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(2)
    if out:
        os.makedirs(out, exist_ok=True)
    rows = []
    failed = False
    for n in n_list:
        for p in d_list:
            for s in seed_list:
                graph = gen_random_graph(n, p, s)
                cfg = _build_config(config_path, overrides, s)
                for algo in algo_list:
                    try:
                        _, rep = run_algorithm(algo, graph, cfg, eps=eps)
                    except (AssertionError, CliqueError) as exc:
                        click.echo(f"cell ({algo},{n},{p},{s}) failed: "
                                   f"{exc}", err=True)
                        failed = True
                        continue
                    rows.append(rep)
                    if not (rep["proper"] and rep["within_budget"]):
                        failed = True
                    if out:
                        name = f"{algo}_n{n}_p{p}_s{s}.json"
                        with open(os.path.join(out, name), "w") as fh:
                            json.dump(rep, fh, indent=2, default=str,
                                      sort_keys=True)
    summary_cols = ["algorithm", "n", "delta", "rng_seed", "proper",
                    "within_budget", "colors_used", "color_budget",
                    "rounds_total", "messages_total",
                    "max_bits_per_pair_round"]
    writer = csv.writer(sys.stdout)
    writer.writerow(summary_cols)
    for rep in rows:
        writer.writerow([rep.get(c) for c in summary_cols])
    if out:
        with open(os.path.join(out, "summary.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(summary_cols)
            for rep in rows:
                w.writerow([rep.get(c) for c in summary_cols])
    sys.exit(1 if failed else 0)


@main.command("selftest")
def selftest_cmd():
    """Run the exhaustive tiny-scale oracles."""
    results = run_selftests()
    bad = 0
    for r in results:
        status = "PASS" if r["ok"] else "FAIL"
        click.echo(f"[{status}] {r['name']}")
        bad += 0 if r["ok"] else 1
    click.echo(f"{len(results) - bad}/{len(results)} selftests passed")
    if bad:
        sys.exit(1)


if __name__ == "__main__":
    main()
