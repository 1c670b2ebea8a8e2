"""Command line front end: scenario runs, single operators, symbols, traces."""
import json
import os
import sys


def _apply_thread_env():
    n = os.environ.get("CURVEOPS_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, n)


_apply_thread_env()   # before numpy binds its thread pools

import click
import numpy as np

from . import charvar as ch
from . import fusion, harness, qnum
from . import surface as sf
from . import symbol as sy
from .harness import Scenario, UsageError, curve_from_label


def _floats(text):
    try:
        return np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError as exc:
        raise click.UsageError(f"bad number list {text!r}: {exc}") from exc


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise click.UsageError(f"bad integer list {text!r}: {exc}") from exc


def _get_surface(name):
    try:
        return sf.get_surface(name)
    except KeyError as exc:
        raise click.UsageError(str(exc)) from exc


def _level(surf, r):
    try:
        return qnum.Level.for_surface(r, surf)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


@click.group()
@click.version_option("0.1.0", prog_name="curveops")
def main():
    """Curve operators on decorated trivalent graphs."""


@main.command()
@click.argument("scenario_path", type=click.Path())
@click.option("--out-dir", default="", help="Directory for report files.")
@click.option("--seed", type=int, default=None, help="Override scenario seed.")
@click.option("--figures/--no-figures", default=True,
              help="Render log-log convergence plots next to the CSV tables.")
def run(scenario_path, out_dir, seed, figures):
    """Run a scenario file and write its report.

    Exit status: 0 all checks passed, 1 at least one failed, 2 bad input.
    """
    try:
        with open(scenario_path) as fh:
            text = fh.read()
    except OSError as exc:
        raise click.UsageError(f"cannot read scenario: {exc}") from exc
    try:
        scn = Scenario.from_json(text)
        if seed is not None:
            scn.seed = seed
        report = harness.run_scenario(scn)
    except UsageError as exc:
        raise click.UsageError(str(exc)) from exc
    target = out_dir or scn.out_dir or "."
    paths = harness.emit_report(report, target, figures=figures)
    for c in report.checks:
        line = f"[{c.status:>4}] {c.suite} {c.name}"
        if c.status == "skip":
            line += f"  ({c.reason})"
        else:
            line += f"  measured={c.measured:.3e} tolerance={c.tolerance:.3e}"
        click.echo(line)
    n = len(report.checks)
    click.echo(f"{n - report.failed}/{n} checks passed; "
               f"wrote {len(paths)} files to {target}")
    sys.exit(0 if report.failed == 0 else 1)


@main.command()
@click.option("--surface", "surface_name", required=True)
@click.option("--curve", required=True, help="Label, e.g. 'D[e]' or 'C[e]x2'.")
@click.option("--level", "level_r", type=int, required=True)
@click.option("--engine", default="auto",
              type=click.Choice(["auto", "closed", "recoupling"]))
@click.option("--out", type=click.Path(), default=None,
              help="Write coefficients as JSON.")
def operator(surface_name, curve, level_r, engine, out):
    """Assemble one curve operator and summarize (or dump) it."""
    surf = _get_surface(surface_name)
    lv = _level(surf, level_r)
    try:
        spec = curve_from_label(surf, curve)
        op = fusion.assemble_operator(spec, lv, engine=engine)
    except UsageError as exc:
        raise click.UsageError(str(exc)) from exc
    except fusion.CapabilityError as exc:
        click.echo(f"unsupported: {exc}", err=True)
        sys.exit(1)
    click.echo(f"{curve} on {surface_name} at r={lv.r}: dim={op.dim}, "
               f"shifts={sorted(op.shift_vectors())}")
    click.echo(f"max |coefficient| = {op.max_abs_coefficient():.12g}")
    click.echo(f"hermiticity defect = {op.hermiticity_defect():.3e}")
    if out:
        doc = {
            "surface": surface_name,
            "curve": curve,
            "level": lv.r,
            "dim": op.dim,
            "colorings": op.colorings.array.tolist(),
            "coefficients": {
                ",".join(map(str, k)): [[float(z.real), float(z.imag)]
                                        for z in op.coeffs[k]]
                for k in sorted(op.coeffs)
            },
        }
        with open(out, "w") as fh:
            json.dump(doc, fh, indent=1)
        click.echo(f"wrote {out}")


@main.command()
@click.option("--surface", "surface_name", required=True)
@click.option("--curve", required=True)
@click.option("--tau", required=True, help="Edge angles / pi, comma list.")
@click.option("--levels", default="150,450,750,1050,1350",
              help="Level schedule for the extrapolation.")
@click.option("--step", type=float, default=2.0 / 150.0)
@click.option("--order", type=int, default=3)
@click.option("--out", type=click.Path(), default=None)
def symbol(surface_name, curve, tau, levels, step, order, out):
    """Extrapolate a symbol and report its first-order defect."""
    surf = _get_surface(surface_name)
    tau_v = _floats(tau)
    if len(tau_v) != len(surf.edge_ids):
        raise click.UsageError(
            f"tau needs {len(surf.edge_ids)} entries for {surface_name}")
    lvs = [_level(surf, r) for r in _ints(levels)]
    try:
        spec = curve_from_label(surf, curve)
        rep = sy.first_order_report(spec, lvs, tau_v, step=step, order=order)
    except UsageError as exc:
        raise click.UsageError(str(exc)) from exc
    except (sy.AnchorError, sy.FitError, fusion.CapabilityError) as exc:
        click.echo(f"cannot extrapolate: {exc}", err=True)
        sys.exit(1)
    fit = rep["fit"]
    click.echo(f"{curve} on {surface_name}, "
               f"tau={[float(t) for t in np.round(tau_v, 6)]}")
    for k in sorted(fit.F0):
        line = (f"  k={k}: F0={fit.F0[k]:.10g}  F1={fit.F1[k]:.6g}"
                f"  default={rep['default'].get(k, 0):.3e}")
        click.echo(line)
    click.echo(f"first-order defect within bound: {rep['default_ok']}; "
               f"residual slope {rep['slope']:.3f}")
    if out:
        doc = {
            "surface": surface_name, "curve": curve,
            "tau": [float(t) for t in tau_v],
            "levels": [lv.r for lv in lvs],
            "F0": {",".join(map(str, k)): [v.real, v.imag]
                   for k, v in sorted(fit.F0.items())},
            "F1": {",".join(map(str, k)): [v.real, v.imag]
                   for k, v in sorted(fit.F1.items())},
            "default": {",".join(map(str, k)): abs(v)
                        for k, v in sorted(rep["default"].items())},
            "default_ok": bool(rep["default_ok"]),
            "slope": float(rep["slope"]),
        }
        with open(out, "w") as fh:
            json.dump(doc, fh, indent=1)
        click.echo(f"wrote {out}")
    sys.exit(0)


@main.command()
@click.option("--surface", "surface_name", required=True)
@click.option("--tau", required=True, help="Edge angles / pi, comma list.")
@click.option("--theta", required=True, help="Twist angles, comma list.")
@click.option("--curve", "curve_labels", multiple=True,
              help="Curve labels; default is the library of the surface.")
def charvar(surface_name, tau, theta, curve_labels):
    """Evaluate holonomy traces of curves at a point of the moduli space."""
    surf = _get_surface(surface_name)
    tau_v, theta_v = _floats(tau), _floats(theta)
    ne = len(surf.edge_ids)
    if len(tau_v) != ne or len(theta_v) != ne:
        raise click.UsageError(f"tau and theta need {ne} entries each")
    try:
        rep = ch.build_representation(surf, tau_v, theta_v)
    except (ValueError, fusion.CapabilityError) as exc:
        click.echo(f"cannot build holonomies: {exc}", err=True)
        sys.exit(1)
    click.echo(f"gluing relation residual: {rep.max_residual():.3e}")
    labels = list(curve_labels) or harness._library_labels(surf)
    for label in labels:
        try:
            spec = curve_from_label(surf, label)
            f = ch.trace_function(spec)
            click.echo(f"  -tr {label} = {f(tau_v, theta_v):.12g}")
        except (UsageError, fusion.CapabilityError) as exc:
            click.echo(f"  {label}: skipped ({exc})")
    sys.exit(0)


if __name__ == "__main__":
    main()
