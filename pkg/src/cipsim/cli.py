"""Command-line front end.

Thin bindings from a JSON config file to the library workflows: offline table
learning, single-trajectory simulation, impulse-response sweeps, delay scans,
competitions, table slicing and a built-in invariant check.  No numeric logic
lives here.

Exit codes: 0 success, 1 domain error (bad data, bad files, failed checks),
2 usage error.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys

import click
import numpy as np

from . import dynamics, engine, experiments, learning
from .config import RunConfig
from .dynamics import TRAJ_COLUMNS, win_loss
from .errors import CipError
from .experiments import SweepConfig
from .params import ImpulseParams, SimulationSettings

__all__ = ["main"]


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    return RunConfig.load(path)


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _domain_errors(fn):
    """Map library and I/O errors to exit status 1 with a printed message."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (CipError, ValueError, OSError, json.JSONDecodeError) as exc:
            _fail(str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _write_deterministic(out_path, seed_check: bool, produce) -> None:
    """Write ``produce()`` output to ``out_path``; with seed_check, run twice
    and fail unless both runs yield identical bytes."""
    first = produce()
    if seed_check:
        second = produce()
        if first != second:
            _fail("seed check failed: two runs produced different output")
        click.echo("seed check passed: two runs byte-identical")
    if out_path is not None:
        mode = "wb" if isinstance(first, bytes) else "w"
        with open(out_path, mode, newline="" if mode == "w" else None) as fh:
            fh.write(first)


@click.group()
def main():
    """Coupled-pendula wrestling simulator."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--resolution", type=int, default=None, help="Cells per dimension.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--jobs", type=int, default=1)
@click.option("--seed-check", is_flag=True, help="Run twice; fail on any byte difference.")
@_domain_errors
def learn(config_path, resolution, out_path, jobs, seed_check):
    """Build a classifier table and save it."""
    cfg = _load_config(config_path)
    grid = cfg.with_resolution(resolution) if resolution is not None else cfg.grid

    def produce() -> bytes:
        table = learning.learn_table(grid, cfg.params, cfg.impulse, cfg.simulation, jobs=jobs)
        buf = io.BytesIO()
        learning.save_table(table, buf)
        return buf.getvalue()

    _write_deterministic(out_path, seed_check, produce)
    click.echo(f"wrote table {out_path}: resolution {list(grid.resolution)}")


def _float_cell(v: float) -> str:
    return repr(float(v))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Trajectory CSV destination.")
@click.option("--q", type=float, default=0.0, help="Disturbance impulse (N m s).")
@click.option("--side", type=click.Choice(["1", "2"]), default="1",
              help="Disturbed agent.")
@click.option("--delay", type=float, default=None, help="Agent-1 sensing delay (s).")
@click.option("--seed-check", is_flag=True)
@_domain_errors
def simulate(config_path, out_path, q, side, delay, seed_check):
    """Run one trial and optionally dump the trajectory."""
    cfg = _load_config(config_path)
    ic1 = cfg.controller(1, delay_override=delay)
    ic2 = cfg.controller(2)
    disturbance = (int(side) - 1, q, cfg.impulse.delta_tau) if q != 0.0 else None

    def produce() -> str:
        res = engine.run(
            cfg.start_state(), cfg.params, cfg.simulation,
            disturbance=disturbance, ic1=ic1, ic2=ic2, record=out_path is not None,
        )
        buf = io.StringIO()
        if res.trajectory is not None:
            writer = csv.writer(buf)
            writer.writerow(TRAJ_COLUMNS)
            for row in res.trajectory:
                writer.writerow(
                    [_float_cell(v) for v in row[:11]]
                    + [int(row[11]), int(row[12])]
                )
        buf.write(f"# nu={res.nu} label={win_loss(res.nu)[1]!r} "
                  f"t_converge={res.t_converge!r} fired1={res.fired1} fired2={res.fired2}\n")
        return buf.getvalue()

    _write_deterministic(out_path, seed_check, produce)
    res = engine.run(cfg.start_state(), cfg.params, cfg.simulation,
                     disturbance=disturbance, ic1=ic1, ic2=ic2)
    outcome, label = win_loss(res.nu)
    t_str = "none" if math.isnan(res.t_converge) else f"{res.t_converge:.4f} s"
    click.echo(f"nu={res.nu} ({label}); converged: {t_str}; "
               f"fired1={res.fired1} fired2={res.fired2}")


def _sweep_config(cfg: RunConfig, jobs: int, delay, need_both: bool) -> SweepConfig:
    sweep = dict(cfg.sweep)
    ic1 = cfg.controller(1, delay_override=delay)
    ic2 = cfg.controller(2)
    if ic1 is None:
        raise ValueError("no agent-1 controller table configured")
    if need_both and ic2 is None:
        raise ValueError("a competition needs controller tables on both agents")
    return SweepConfig(
        q_max=float(sweep.get("q_max", 0.06)),
        n_q=int(sweep.get("n_q", 100)),
        side="both" if need_both else sweep.get("side", "agent1"),
        ic1=ic1,
        ic2=ic2 if need_both else (ic2 if sweep.get("include_agent2", False) else None),
        params=cfg.params,
        simulation=cfg.simulation,
        disturbance_width=float(sweep.get("disturbance_width", cfg.impulse.delta_tau)),
        jobs=jobs,
    )


def _export_string(result, fmt: str) -> str:
    buf = io.StringIO()
    experiments.export_results(result, fmt, buf)
    return buf.getvalue()


def _rate(x) -> str:
    return "undefined" if x is None else f"{x:.4f}"


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("--delay", type=float, default=None)
@click.option("--jobs", type=int, default=1)
@click.option("--seed-check", is_flag=True)
@_domain_errors
def sweep(config_path, out_path, fmt, delay, jobs, seed_check):
    """Impulse-response sweep with success rate E."""
    cfg = _load_config(config_path)
    sc = _sweep_config(cfg, jobs, delay, need_both=False)

    result_box = {}

    def produce() -> str:
        result_box["r"] = experiments.impulse_response_sweep(sc)
        return _export_string(result_box["r"], fmt)

    _write_deterministic(out_path, seed_check, produce)
    r = result_box["r"]
    click.echo(f"trials={r.n_total} n0={r.n0} n_j={r.n_j1} "
               f"E={_rate(r.e)} status={r.status}")


@main.command("delay-scan")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--delays", default="0,0.001,0.002,0.003,0.004,0.005,0.006",
              help="Comma-separated delays in seconds.")
@click.option("--jobs", type=int, default=1)
@click.option("--seed-check", is_flag=True)
@_domain_errors
def delay_scan(config_path, out_path, delays, jobs, seed_check):
    """Success rate E as a function of the sensing delay."""
    cfg = _load_config(config_path)
    sc = _sweep_config(cfg, jobs, None, need_both=False)
    delay_values = [float(v) for v in delays.split(",") if v.strip() != ""]

    scan_box = {}

    def produce() -> str:
        points, best = experiments.delay_scan(sc, delay_values)
        scan_box["points"], scan_box["best"] = points, best
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["delay", "E"])
        for tau, e in points:
            writer.writerow([repr(tau), "" if e is None else repr(e)])
        return buf.getvalue()

    _write_deterministic(out_path, seed_check, produce)
    for tau, e in scan_box["points"]:
        click.echo(f"delay={tau:.4g} E={_rate(e)}")
    best = scan_box["best"]
    click.echo("best delay: " + ("undefined" if best is None else f"{best:.4g}"))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("--jobs", type=int, default=1)
@click.option("--seed-check", is_flag=True)
@_domain_errors
def compete(config_path, out_path, fmt, jobs, seed_check):
    """Two-agent competition with success rates E1 and E2."""
    cfg = _load_config(config_path)
    sc = _sweep_config(cfg, jobs, None, need_both=True)

    result_box = {}

    def produce() -> str:
        result_box["r"] = experiments.competition_run(sc)
        return _export_string(result_box["r"], fmt)

    _write_deterministic(out_path, seed_check, produce)
    r = result_box["r"]
    click.echo(f"trials={r.n_total} n0={r.n0} n_j1={r.n_j1} n_j2={r.n_j2} "
               f"E1={_rate(r.e1)} E2={_rate(r.e2)} status={r.status}")


@main.command("slice")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--table", "table_path", type=click.Path(exists=True), required=True)
@click.option("--dims", default="0,2", help="Two free dimensions, e.g. '0,2'.")
@click.option("--fixed", default="", help="Fixed coordinates, e.g. '1=0.0,3=0.0'.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--seed-check", is_flag=True)
@_domain_errors
def slice_cmd(config_path, table_path, dims, fixed, out_path, seed_check):
    """Export a 2-D label slice of a classifier table."""
    cfg = _load_config(config_path)
    table = learning.load_table(table_path, cfg.params, cfg.impulse, cfg.simulation)
    d0, d1 = (int(v) for v in dims.split(","))
    fixed_map = {}
    for part in fixed.split(","):
        if part.strip() == "":
            continue
        k, v = part.split("=")
        fixed_map[int(k)] = float(v)
    if not fixed_map:
        # default: fix the remaining dimensions at the box center
        for d in range(table.grid.dimension):
            if d not in (d0, d1):
                fixed_map[d] = 0.5 * (table.grid.lower[d] + table.grid.upper[d])

    def produce() -> str:
        labels, c0, c1 = learning.reachable_slice(table, (d0, d1), fixed_map)
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow([f"dim{d0}", f"dim{d1}", "nu"])
        for i in range(labels.shape[0]):
            for j in range(labels.shape[1]):
                writer.writerow([repr(c0[i]), repr(c1[j]), int(labels[i, j])])
        return buf.getvalue()

    _write_deterministic(out_path, seed_check, produce)
    click.echo(f"sliced dimensions ({d0}, {d1}) of {table_path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@_domain_errors
def validate(config_path):
    """Run built-in consistency checks on the numeric core."""
    cfg = _load_config(config_path)
    failures = []

    def check(name: str, ok: bool):
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    # integrator order on ydot = -y
    errs = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        y = np.array([1.0])
        n = int(round(1.0 / dt))
        for _ in range(n):
            y = dynamics.rkg4_step(lambda z: -z, y, dt)
        errs.append(abs(y[0] - math.exp(-1.0)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    check("integrator order 4.0 +- 0.1", all(abs(o - 4.0) < 0.1 for o in orders))

    # equilibrium index round trip and mirror involution
    ok = all(
        dynamics.equilibrium_index(*dynamics.agent_statuses(nu)) == nu
        and dynamics.mirror_index(dynamics.mirror_index(nu)) == nu
        for nu in range(1, 10)
    )
    check("equilibrium index encoding", ok)

    # grid cell round trip
    grid = cfg.grid
    ok = all(
        grid.cell_of(grid.cell_center(i)) == i
        for i in [tuple([1] * grid.dimension), tuple(grid.resolution)]
    )
    check("grid center/cell round trip", ok)

    # rigid-rod reconstruction consistency
    from .control import MeasurementMap, measure, reconstruct

    m = MeasurementMap(w0=cfg.params.rod.w0, r=cfg.params.pendulum.r)
    y4 = np.array([0.1, -0.3, -0.2, 0.4])
    s = reconstruct(y4, m)
    ok = np.allclose(measure(s, m), y4)
    tips = dynamics.tip_kinematics(s, cfg.params.pendulum)
    w = math.hypot(tips[1][0] - tips[0][0], tips[1][1] - tips[0][1])
    ok = ok and abs(w - cfg.params.rod.w0) < 1e-9
    check("measurement reconstruction", ok)

    # impulse generator refractory behavior
    from .control import ImpulseGenerator

    gen = ImpulseGenerator(ImpulseParams(delta_tau=1e-3, tau_g=2e-3))
    outs = [gen.step(1, k * 1e-3) for k in range(5)]
    ok = outs[0] > 0 and outs[1] == 0.0 and outs[2] > 0 and len(gen.rise_times) == 3
    check("impulse generator refractory", ok)

    if failures:
        _fail(f"{len(failures)} check(s) failed: {', '.join(failures)}")
    click.echo("all checks passed")


if __name__ == "__main__":
    main()
