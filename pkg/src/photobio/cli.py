"""Batch command-line front end.

Subcommands cover each pipeline stage: equilibrium profiles, neutral
curves, critical points, parameter sweeps, and oscillatory eigenmode
snapshots.  All numeric CSV cells carry 9 significant digits, every CSV
embeds the fully resolved parameter set in a leading comment line and
has a header row, and every JSON artifact echoes the same parameter
set.  Exit codes: 0 success, 1 configuration error, 2 non-convergence
or an otherwise impossible computation, 3 partial sweep failure.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from .basic_state import NoConvergenceError, solve_basic_state
from .params import (ConfigError, NumericsConfig, SuspensionParams,
                     load_config)
from .stability import (NoBracket, eigenmode_snapshots, find_critical,
                        growth_rate, trace_neutral_curve)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_CONVERGENCE = 2
EXIT_PARTIAL_SWEEP = 3

SWEEP_CAP = 10_000

#: TOML [sweep.axes] keys map onto SuspensionParams fields exactly as in
#: the [suspension] table.
SUSPENSION_KEYS = {
    "sc": "schmidt",
    "us": "swim_speed",
    "ra": "rayleigh",
    "tau_h": "optical_depth",
    "omega": "albedo",
    "aniso_a": "aniso",
    "alpha_i_deg": "incidence_angle_deg",
    "i0": "intensity",
    "beam_azimuth": "beam_azimuth",
    "upsilon": "upsilon",
}


# ----------------------------------------------------------------------
# Formatting helpers
# ----------------------------------------------------------------------

def fmt(value) -> str:
    """Numeric cell with 9 significant digits; None becomes empty."""
    if value is None or value == "":
        return ""
    if isinstance(value, str):
        return value
    return format(float(value), ".9g")


def resolved_params(params: SuspensionParams,
                    numerics: NumericsConfig) -> dict:
    susp = {f.name: getattr(params, f.name)
            for f in dataclasses.fields(params)}
    susp["refraction_angle"] = params.refraction_angle
    susp["critical_intensity"] = params.critical_intensity
    return {"suspension": susp,
            "numerics": dataclasses.asdict(numerics)}


def write_csv(path: Path, header: list, rows, params_blob: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# params: " + json.dumps(params_blob, sort_keys=True) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(cell) for cell in row) + "\n")


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load(config_path: str):
    try:
        return load_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _outdir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ----------------------------------------------------------------------
# Minimal hand-rolled SVG
# ----------------------------------------------------------------------

def neutral_curve_svg(points, path: Path, title: str = "") -> None:
    """Neutral curve: solid polylines for stationary segments, dotted
    for oscillatory ones, on a plain linear-linear frame."""
    width, height, margin = 640, 480, 64
    pts = [p for p in points if p.ra is not None]
    if not pts:
        path.write_text('<svg xmlns="http://www.w3.org/2000/svg" '
                        f'width="{width}" height="{height}"/>\n')
        return
    a_vals = [p.a for p in pts]
    ra_vals = [p.ra for p in pts]
    a_lo, a_hi = min(a_vals), max(a_vals)
    r_lo, r_hi = min(ra_vals), max(ra_vals)
    a_span = (a_hi - a_lo) or 1.0
    r_span = (r_hi - r_lo) or 1.0

    def sx(a):
        return margin + (a - a_lo) / a_span * (width - 2 * margin)

    def sy(ra):
        return height - margin - (ra - r_lo) / r_span * (height - 2 * margin)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}"'
             f' height="{height - 2 * margin}" fill="none" stroke="black"/>']
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="{margin / 2:.1f}" '
                     'text-anchor="middle" font-size="14">'
                     f'{title}</text>')
    parts.append(f'<text x="{width / 2:.1f}" y="{height - margin / 4:.1f}" '
                 'text-anchor="middle" font-size="12">wavenumber a</text>')
    parts.append(f'<text x="{margin / 4:.1f}" y="{height / 2:.1f}" '
                 'text-anchor="middle" font-size="12" transform="rotate(-90 '
                 f'{margin / 4:.1f} {height / 2:.1f})">Rayleigh number</text>')
    for a, label in ((a_lo, fmt(a_lo)), (a_hi, fmt(a_hi))):
        parts.append(f'<text x="{sx(a):.1f}" y="{height - margin + 16:.1f}" '
                     f'text-anchor="middle" font-size="10">{label}</text>')
    for ra in (r_lo, r_hi):
        parts.append(f'<text x="{margin - 6:.1f}" y="{sy(ra):.1f}" '
                     f'text-anchor="end" font-size="10">{fmt(ra)}</text>')

    # contiguous same-branch segments, sharing the joint point
    segment, branch = [], None
    segments = []
    for p in pts:
        if branch is None or p.branch == branch:
            segment.append(p)
        else:
            segments.append((branch, segment))
            segment = [segment[-1], p]
        branch = p.branch
    if segment:
        segments.append((branch, segment))
    for seg_branch, seg in segments:
        if len(seg) < 2:
            continue
        coords = " ".join(f"{sx(p.a):.2f},{sy(p.ra):.2f}" for p in seg)
        dash = ' stroke-dasharray="2 4"' if seg_branch == "oscillatory" else ""
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="black" stroke-width="1.5"{dash}/>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------

@click.group()
def main():
    """Equilibrium and linear stability of phototactic suspensions."""


@main.command("basic-state")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=False))
@click.option("--out", default=".", type=click.Path())
def cmd_basic_state(config_path, out):
    """Equilibrium profiles: x3, n_b, G_b, q_b, T_b."""
    params, numerics = _load(config_path)
    outdir = _outdir(out)
    converged = True
    try:
        state = solve_basic_state(params, numerics)
    except NoConvergenceError as exc:
        state = exc.last
        converged = False
        click.echo(f"non-convergence: {exc}", err=True)
    blob = resolved_params(params, numerics)
    rows = zip(state.x3, state.n_b, state.g_b, state.q_b, state.t_b)
    write_csv(outdir / "basic_state.csv",
              ["x3", "n_b", "G_b", "q_b", "T_b"], rows, blob)
    write_json(outdir / "basic_state.json", {
        **blob,
        "converged": converged,
        "iterations_used": state.iterations_used,
        "residual": state.residual,
        "peak_x3": float(state.x3[int(np.argmax(state.n_b))]),
    })
    if not converged:
        sys.exit(EXIT_NO_CONVERGENCE)


def _a_options(fn):
    fn = click.option("--a-min", default=0.1, show_default=True)(fn)
    fn = click.option("--a-max", default=10.0, show_default=True)(fn)
    fn = click.option("--a-points", default=60, show_default=True)(fn)
    return fn


@main.command("neutral-curve")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", default=".", type=click.Path())
@_a_options
def cmd_neutral_curve(config_path, out, a_min, a_max, a_points):
    """Lowest neutral branch Ra^n(a) as CSV plus an SVG plot."""
    params, numerics = _load(config_path)
    outdir = _outdir(out)
    blob = resolved_params(params, numerics)
    try:
        state = solve_basic_state(params, numerics)
        curve = trace_neutral_curve(state, (a_min, a_max), a_points)
    except NoConvergenceError as exc:
        click.echo(f"non-convergence: {exc}", err=True)
        sys.exit(EXIT_NO_CONVERGENCE)
    rows = [(p.a, p.ra, p.branch, p.im_gamma) for p in curve.points]
    rows += [(a, None, None, None) for a in curve.gaps]
    rows.sort(key=lambda r: r[0])
    write_csv(outdir / "neutral_curve.csv",
              ["a", "ra", "branch", "im_gamma"], rows, blob)
    write_json(outdir / "neutral_curve.json", {
        **blob,
        "a_range": [a_min, a_max],
        "n_points": a_points,
        "bifurcations": list(curve.bifurcations),
        "gaps": list(curve.gaps),
    })
    neutral_curve_svg(curve.points, outdir / "neutral_curve.svg",
                      title="neutral curve")


@main.command("critical")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", default=".", type=click.Path())
@_a_options
def cmd_critical(config_path, out, a_min, a_max, a_points):
    """Most unstable point of the neutral curve as JSON."""
    params, numerics = _load(config_path)
    outdir = _outdir(out)
    blob = resolved_params(params, numerics)
    try:
        state = solve_basic_state(params, numerics)
        crit = find_critical(state, (a_min, a_max), a_points)
    except (NoConvergenceError, NoBracket) as exc:
        click.echo(f"non-convergence: {exc}", err=True)
        sys.exit(EXIT_NO_CONVERGENCE)
    payload = {
        **blob,
        "a_c": crit.a_c,
        "ra_c": crit.ra_c,
        "branch": crit.branch,
        "im_gamma": crit.im_gamma,
        "wavelength": crit.wavelength,
    }
    if crit.period is not None:
        payload["period"] = crit.period
    write_json(outdir / "critical.json", payload)


@main.command("mode-snapshots")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", default=".", type=click.Path())
@_a_options
def cmd_mode_snapshots(config_path, out, a_min, a_max, a_points):
    """w* and n* grids at five instants spanning one oscillation."""
    params, numerics = _load(config_path)
    outdir = _outdir(out)
    blob = resolved_params(params, numerics)
    try:
        state = solve_basic_state(params, numerics)
        crit = find_critical(state, (a_min, a_max), a_points)
        if crit.branch != "oscillatory":
            click.echo("Stationary: the critical mode does not oscillate, "
                       "no cycle to sample", err=True)
            sys.exit(EXIT_NO_CONVERGENCE)
        mode = growth_rate(state, crit.a_c, crit.ra_c)
        x1, times, w_fields, n_fields = eigenmode_snapshots(mode, crit.a_c)
    except (NoConvergenceError, NoBracket) as exc:
        click.echo(f"non-convergence: {exc}", err=True)
        sys.exit(EXIT_NO_CONVERGENCE)
    fractions = (0.0, 0.25, 0.5, 0.75, 1.0)
    header = ["x3"] + [f"x1={fmt(v)}" for v in x1]
    for frac, t, w_f, n_f in zip(fractions, times, w_fields, n_fields):
        tag = f"{frac:.2f}"
        for name, field in (("w", w_f), ("n", n_f)):
            rows = [(x3_val, *field[i]) for i, x3_val in enumerate(state.x3)]
            write_csv(outdir / f"snapshot_{name}_t{tag}.csv",
                      header, rows, blob)
    write_json(outdir / "snapshots.json", {
        **blob,
        "a_c": crit.a_c, "ra_c": crit.ra_c, "im_gamma": crit.im_gamma,
        "period": crit.period, "fractions": list(fractions),
        "times": times,
    })


# ----------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------

def _read_sweep_axes(config_path) -> dict:
    with open(config_path, "rb") as fh:
        raw = tomllib.load(fh)
    sweep = raw.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ConfigError("[sweep] must be a table")
    axes = sweep.get("axes", {})
    if not isinstance(axes, dict):
        raise ConfigError("[sweep.axes] must be a table of value lists")
    cleaned = {}
    for key, values in axes.items():
        if key not in SUSPENSION_KEYS:
            raise ConfigError(f"unknown sweep axis '{key}'")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep axis '{key}' must be a non-empty list")
        cleaned[key] = [float(v) for v in values]
    return cleaned


def _sweep_points(axes: dict) -> list:
    """Cross product in deterministic input order."""
    points = [{}]
    for key, values in axes.items():
        points = [{**pt, key: v} for pt in points for v in values]
    return points


def point_hash(blob: dict) -> str:
    return hashlib.sha256(
        json.dumps(blob, sort_keys=True).encode()).hexdigest()


def _sweep_worker(task):
    index, susp_kwargs, numerics_kwargs, a_range = task
    try:
        params = SuspensionParams(**susp_kwargs)
        numerics = NumericsConfig(**numerics_kwargs)
        state = solve_basic_state(params, numerics)
        crit = find_critical(state, (a_range[0], a_range[1]),
                             int(a_range[2]))
        return index, {
            "status": "ok", "a_c": crit.a_c, "ra_c": crit.ra_c,
            "branch": crit.branch, "im_gamma": crit.im_gamma,
            "wavelength": crit.wavelength, "period": crit.period,
        }
    except Exception as exc:   # per-point failures are data, not crashes
        return index, {"status": f"error: {type(exc).__name__}: {exc}",
                       "a_c": None, "ra_c": None, "branch": None,
                       "im_gamma": None, "wavelength": None, "period": None}


@main.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", default=".", type=click.Path())
@click.option("--jobs", default=None, type=int,
              help="worker processes; default $PHOTOBIO_JOBS or 1")
@_a_options
def cmd_sweep(config_path, out, jobs, a_min, a_max, a_points):
    """Critical points over the cross product of [sweep.axes] values.

    Deterministic aggregate ordering regardless of worker count;
    completed points are skipped on re-runs via content-hash files.
    """
    params, numerics = _load(config_path)
    try:
        axes = _read_sweep_axes(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    points = _sweep_points(axes)
    if len(points) > SWEEP_CAP:
        click.echo(f"config error: sweep size {len(points)} exceeds the "
                   f"cap of {SWEEP_CAP}", err=True)
        sys.exit(EXIT_CONFIG)
    if jobs is None:
        jobs = int(os.environ.get("PHOTOBIO_JOBS", "1"))
    jobs = max(1, jobs)

    outdir = _outdir(out)
    points_dir = outdir / "points"
    points_dir.mkdir(exist_ok=True)
    base_numerics = dataclasses.asdict(numerics)
    a_range = (a_min, a_max, a_points)

    tasks, records = [], [None] * len(points)
    hashes = []
    for index, overrides in enumerate(points):
        susp = {f.name: getattr(params, f.name)
                for f in dataclasses.fields(params) if f.init}
        for key, value in overrides.items():
            susp[SUSPENSION_KEYS[key]] = value
        blob = {"suspension": susp, "numerics": base_numerics,
                "a_range": list(a_range)}
        digest = point_hash(blob)
        hashes.append((digest, blob, overrides, susp))
        existing = points_dir / f"{digest}.json"
        if existing.exists():
            try:
                cached = json.loads(existing.read_text())
                if cached.get("hash") == digest:
                    records[index] = cached["result"]
                    continue
            except (json.JSONDecodeError, KeyError):
                pass
        tasks.append((index, susp, base_numerics, a_range))

    if tasks:
        if jobs == 1:
            results = map(_sweep_worker, tasks)
        else:
            pool = ProcessPoolExecutor(max_workers=jobs)
            results = pool.map(_sweep_worker, tasks)
        for index, result in results:
            records[index] = result
            digest, blob, overrides, susp = hashes[index]
            write_json(points_dir / f"{digest}.json",
                       {"hash": digest, "params": blob,
                        "overrides": overrides, "result": result})
        if jobs > 1:
            pool.shutdown()

    axis_keys = list(axes.keys())
    header = axis_keys + ["a_c", "ra_c", "branch", "im_gamma",
                          "wavelength", "period", "status"]
    rows = []
    failed = 0
    for overrides, result in zip(points, records):
        row = [overrides[k] for k in axis_keys]
        row += [result["a_c"], result["ra_c"], result["branch"],
                result["im_gamma"], result["wavelength"], result["period"],
                result["status"]]
        rows.append(row)
        if result["status"] != "ok":
            failed += 1
    blob = {**resolved_params(params, numerics),
            "axes": axes, "a_range": list(a_range)}
    write_csv(outdir / "sweep.csv", header, rows, blob)
    write_json(outdir / "sweep.json", {**blob, "n_points": len(points),
                                       "n_failed": failed})
    if failed:
        click.echo(f"{failed}/{len(points)} sweep points failed", err=True)
        sys.exit(EXIT_PARTIAL_SWEEP)


if __name__ == "__main__":
    main()
