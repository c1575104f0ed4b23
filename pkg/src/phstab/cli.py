"""Command-line interface.

Usage:
    phstab analyze spec.toml --out results/
    phstab analyze --fixture example_4_3 --json-only
    phstab sweep --fixture example_6_5 --samples 512 --out sweep.csv
    phstab simulate --fixture example_4_4_theta0 --cells 400
    phstab fixtures

Exit codes: 0 stable, 2 unstable, 3 inconclusive or evidence only, 1 error.
"""

from __future__ import annotations

import math
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import propagator, report
from .errors import NotAGenerator, PHStabError
from .fixtures import closed_form_det, fixture_text, list_fixtures, load_fixture
from .kernels import BACKEND
from .problem import SimParams, load_spec
from .simulate import (DENSE_BUDGET, bump, discretize, eigen_abscissa, evolve, slowest_mode,
                       slowest_mode_sparse, write_triplets)
from .stability import diophantine_probe, evaluate_sweep, sweep_and_verdict


def resolve_problem(spec, fixture):
    if (spec is None) == (fixture is None):
        raise click.UsageError("give exactly one of SPEC or --fixture")
    return load_fixture(fixture) if fixture else load_spec(spec)


def initial_state(gen, init, seed=None):
    """(u0, mode eigenvalue or None)."""
    if init == "bump":
        return bump(gen), None
    if init == "random":
        rng = np.random.default_rng(seed)
        return rng.standard_normal(gen.size), None
    if init == "eigenmode":
        lam, vec = slowest_mode(gen) if gen.size <= DENSE_BUDGET else slowest_mode_sparse(gen)
        return vec / math.sqrt(gen.energy(vec)), lam
    raise click.BadParameter(f"unknown init {init!r} (bump, random, eigenmode)")


def run_simulation(problem, sim: SimParams, seed=None, abscissa=None):
    gen = discretize(problem, sim.n_cells)
    u0, lam = initial_state(gen, sim.init, seed)
    t_final = sim.t_final
    if lam is not None and abs(lam.imag) > 0 and sim.t_final <= 0:
        t_final = 3 * 2 * math.pi / abs(lam.imag)
    traj = evolve(gen, u0, t_final, sim.dt)
    out = {
        "n_cells": sim.n_cells,
        "dt": sim.dt if sim.dt is not None else gen.dx,
        "t_final": t_final,
        "init": sim.init,
        "fitted_rate": traj.fitted_rate,
        "fit_r2": traj.fit_r2,
        "energy_initial": float(traj.energy[0]),
        "energy_final": float(traj.energy[-1]),
        "caveat": report.SIM_CAVEAT,
    }
    if lam is not None:
        out["mode_eigenvalue"] = [lam.real, lam.imag]
    if abscissa is None:
        abscissa = gen.size <= 800
    if abscissa:
        out["eigen_abscissa"] = eigen_abscissa(gen)
    return gen, traj, out


def closed_form_check(problem, sweep):
    det = closed_form_det(problem)
    if det is None:
        return None
    ts = sweep.ts
    diff = np.abs(sweep.det_abs - np.abs(det(ts)))
    return {"kind": problem.oracle.get("kind"), "max_abs_det_deviation": float(diff.max()),
            "samples": int(ts.size)}


def analyze_problem(problem, simulate=True, seed=None, reproducible=False):
    """Full pipeline; returns (document, sweep result or None, trajectory or None)."""
    body = {
        "problem": {"name": problem.name, "d": problem.d, "interval": list(problem.interval),
                    "source": problem.source, "backend": BACKEND, "seed": seed},
        "errors": [],
    }
    sweep = traj = None
    try:
        st = sweep_and_verdict(problem, problem.sweep)
    except NotAGenerator as exc:
        body["errors"].append(report.error_entry(exc))
        body["stability"] = {"verdict": "NotAGenerator"}
        body["exit_code"] = report.EXIT_ERROR
        return report.document(body, reproducible), None, None
    sweep = st.sweep
    body["stability"] = st.to_dict()
    body["exit_code"] = report.exit_code(st.verdict)
    body["closed_form"] = closed_form_check(problem, sweep)
    if problem.oracle.get("kind") == "example_4_3":
        body["diophantine"] = diophantine_probe(problem)
    if simulate and problem.sim is not None:
        try:
            _, traj, body["simulation"] = run_simulation(problem, problem.sim, seed)
        except PHStabError as exc:
            body["errors"].append(report.error_entry(exc))
    return report.document(body, reproducible), sweep, traj


def _apply_sweep_flags(problem, t_max, samples):
    kw = {}
    if t_max is not None:
        kw["t_max"] = t_max
    if samples is not None:
        kw["n_samples"] = samples
    return replace(problem, sweep=replace(problem.sweep, **kw)) if kw else problem


@click.group()
@click.version_option(package_name="phstab")
def main():
    """Exponential stability of 1-D linear port-Hamiltonian systems."""


@main.command()
@click.argument("spec", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--fixture", help="Analyze a shipped fixture instead of a spec file.")
@click.option("--t-max", type=float, help="Base sweep horizon (default from the problem data).")
@click.option("--samples", type=int, help="Samples per sweep rung.")
@click.option("--seed", type=int, help="Seed for random fixtures and random initial data.")
@click.option("--reproducible", is_flag=True, help="Omit timestamps so reports are byte-identical.")
@click.option("--out", type=click.Path(file_okay=False), default="phstab-out", show_default=True)
@click.option("--json-only", is_flag=True, help="Print report.json to stdout and write no CSV files.")
@click.option("--no-sim", is_flag=True, help="Skip the simulator cross-check.")
def analyze(spec, fixture, t_max, samples, seed, reproducible, out, json_only, no_sim):
    """Run the full stability pipeline on SPEC or --fixture."""
    try:
        if fixture and fixture.startswith("random") and seed is not None:
            fixture = f"random:{seed}"
        problem = _apply_sweep_flags(resolve_problem(spec, fixture), t_max, samples)
        doc, sweep, traj = analyze_problem(problem, not no_sim, seed, reproducible)
    except PHStabError as exc:
        doc = report.document({"errors": [report.error_entry(exc)], "exit_code": report.EXIT_ERROR},
                              reproducible)
        sweep = traj = None

    if json_only:
        click.echo(report.to_json(doc), nl=False)
    else:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        report.write_json(doc, outdir / "report.json")
        if sweep is not None:
            report.write_sweep_csv(sweep, outdir / "sweep.csv")
        if traj is not None:
            report.write_energy_csv(traj, outdir / "energy.csv")
        for line in report.summary_lines(report.clean(doc)):
            click.echo(line)
        click.echo(f"artifacts written to {outdir}")
    sys.exit(doc["exit_code"])


@main.command("sweep")
@click.argument("spec", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--fixture")
@click.option("--t-max", type=float)
@click.option("--samples", type=int, default=2048, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="CSV file (default stdout).")
def sweep_cmd(spec, fixture, t_max, samples, out):
    """Tabulate |det T_t|, sigma_min, ||T_t^{-1}|| and ||Phi_t(b)|| on the base grid."""
    try:
        problem = resolve_problem(spec, fixture)
        h = problem.hamiltonian
        t_max = t_max or problem.sweep.t_max or propagator.default_t_max(h, problem.p1)
        ts = propagator.t_grid(t_max, samples)
        phi = propagator.sweep(h, problem.p1, problem.p0, ts, False).phi_b
        result = evaluate_sweep(problem.w, ts, phi)
    except PHStabError as exc:
        click.echo(f"error [{exc.code}]: {exc}", err=True)
        sys.exit(report.EXIT_ERROR)
    report.write_sweep_csv(result, out if out else sys.stdout)


@main.command()
@click.argument("spec", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--fixture")
@click.option("--cells", type=int, help="Number of cells N.")
@click.option("--t-final", type=float, help="Final time; 0 with --init eigenmode means 3 mode periods.")
@click.option("--dt", type=float)
@click.option("--init", type=click.Choice(["bump", "random", "eigenmode"]))
@click.option("--seed", type=int)
@click.option("--abscissa/--no-abscissa", default=None, help="Dense eigensolve for the spectral abscissa.")
@click.option("--dump-matrix", type=click.Path(dir_okay=False), help="Write A_h as triplets.")
@click.option("--out", type=click.Path(dir_okay=False), help="Energy CSV (default stdout).")
def simulate(spec, fixture, cells, t_final, dt, init, seed, abscissa, dump_matrix, out):
    """Evolve the discretized system and fit the energy decay rate."""
    try:
        problem = resolve_problem(spec, fixture)
        sim = problem.sim or SimParams()
        sim = SimParams(cells or sim.n_cells, sim.t_final if t_final is None else t_final,
                        dt if dt is not None else sim.dt, init or sim.init)
        gen, traj, info = run_simulation(problem, sim, seed, abscissa)
    except PHStabError as exc:
        click.echo(f"error [{exc.code}]: {exc}", err=True)
        sys.exit(report.EXIT_ERROR)
    if dump_matrix:
        write_triplets(gen, dump_matrix)
    report.write_energy_csv(traj, out if out else sys.stdout)
    msg = f"fitted_rate={info['fitted_rate']:.6g} fit_r2={info['fit_r2']:.4f}"
    if "eigen_abscissa" in info:
        msg += f" eigen_abscissa={info['eigen_abscissa']:.6g}"
    click.echo(msg, err=True)


@main.command()
@click.option("--show", help="Print the TOML of a shipped fixture.")
def fixtures(show):
    """List the shipped fixtures."""
    if show:
        try:
            click.echo(fixture_text(show), nl=False)
        except FileNotFoundError:
            click.echo(f"unknown fixture {show!r}", err=True)
            sys.exit(report.EXIT_ERROR)
        return
    for name in list_fixtures():
        click.echo(name)

