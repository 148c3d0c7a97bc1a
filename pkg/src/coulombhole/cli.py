"""Command-line front end.

Subcommands: scales, map, timemap, correlation, simulate, gamow.
Dimensioned flags require unit suffixes (50keV, 0.17eV, 100cm, 0.2ns);
bare numbers are rejected.  Every run writes ``run-manifest.json`` with
the resolved parameters, and feeding that manifest back through
``--config`` reproduces the outputs byte for byte.  Exit codes: 0
success, 2 usage error, 3 numerical-configuration error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .constants import CONSTANTS_VERSION
from .dynamics import (
    BeamParameters,
    DomainError,
    IntegrationError,
    approx_scaled_map,
    coulomb_eta,
    critical_scale,
    gamow_factor,
    map_minimum,
    scaled_final_separation,
    sigma_excess,
)
from .montecarlo import (
    HistogramSpec,
    SimulationConfig,
    TransverseModel,
    run_simulation,
)
from .scales import regime_report
from .statistics import (
    EmissionModel,
    UnderResolvedError,
    convolve_resolution,
    correlation_function,
    default_time_grid,
    pushforward_time_density,
)
from .units import Dimension, Quantity, Unit, UnitError, parse_quantity

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_INTERNAL = 4

OUTDIR_ENV = "COULOMBHOLE_OUTDIR"


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, names: list[str], columns: list[np.ndarray],
               params: dict, comments: dict[int, str] | None = None) -> None:
    """Comma-separated numeric table with '#' comment lines and
    deterministic 17-significant-digit formatting.  ``comments`` maps a
    row index to a comment line emitted just before that row."""
    lines = ["# columns: " + ",".join(names)]
    if params:
        lines.append("# params: " + ";".join(f"{k}={v}" for k, v in params.items()))
    n = len(columns[0])
    comments = comments or {}
    for i in range(n):
        if i in comments:
            lines.append(f"# {comments[i]}")
        lines.append(",".join(_fmt(float(c[i])) for c in columns))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _load_config(path: str) -> dict[str, str]:
    """Flat key=value text, or a run-manifest.json produced by a prior
    run (its 'params' block is used)."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        params = data.get("params", data)
        return {str(k): str(v) for k, v in params.items()}
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _resolve(args: argparse.Namespace, defaults: dict[str, str | None]) -> dict[str, str]:
    """Merge flag values, config-file values and builtin defaults.
    Flags win over the config file, which wins over defaults.  A key
    whose resolved value is None was required and missing."""
    config = _load_config(args.config) if getattr(args, "config", None) else {}
    resolved: dict[str, str] = {}
    for key, builtin in defaults.items():
        flag_val = getattr(args, key.replace("-", "_"), None)
        if flag_val is not None:
            resolved[key] = str(flag_val)
        elif key in config:
            resolved[key] = config[key]
        elif builtin is not None:
            resolved[key] = builtin
    return resolved


def _outdir(args: argparse.Namespace) -> Path:
    out = getattr(args, "outdir", None) or os.environ.get(OUTDIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(outdir: Path, command: str, params: dict[str, str],
                    outputs: list[str]) -> None:
    _write_json(
        outdir / "run-manifest.json",
        {
            "command": command,
            "package": "coulombhole",
            "version": __version__,
            "constants_version": CONSTANTS_VERSION,
            "params": dict(sorted(params.items())),
            "outputs": outputs,
        },
    )


def _beam_from(params: dict[str, str], need_tbar: bool = False) -> BeamParameters:
    for key in ("ef", "de", "l"):
        if key not in params:
            raise UsageError("beam parameters required: --ef, --de, --L (or a preset)")
    r0 = params.get("r0")
    t_bar = params.get("tbar") if need_tbar else None
    return BeamParameters(
        e_f=parse_quantity(params["ef"], Dimension.ENERGY),
        delta_e=parse_quantity(params["de"], Dimension.ENERGY),
        l=parse_quantity(params["l"], Dimension.LENGTH),
        r0=parse_quantity(r0, Dimension.LENGTH) if r0 else None,
        t_bar=parse_quantity(t_bar, Dimension.TIME) if t_bar else None,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_scales(args) -> int:
    defaults = {"preset": None, "ef": None, "de": None, "l": None, "r0": None,
                "format": "table"}
    params = _resolve(args, defaults)
    r0 = params.get("r0")
    r0_q = parse_quantity(r0, Dimension.LENGTH) if r0 else None
    if "preset" in params:
        report = regime_report(params["preset"], r0=r0_q)
    else:
        report = regime_report(_beam_from(params), r0=r0_q)
    outdir = _outdir(args)
    (outdir / "scales-report.json").write_text(report.to_json())
    if params.get("format") == "json":
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.to_table())
    _write_manifest(outdir, "scales", params, ["scales-report.json"])
    return EXIT_OK


def cmd_map(args) -> int:
    defaults = {"u-min": "0.01", "u-max": "100", "points": "60", "approx": None}
    params = _resolve(args, defaults)
    u_min = float(params["u-min"])
    u_max = float(params["u-max"])
    n = int(params["points"])
    if not (0.0 < u_min < u_max) or n < 2:
        raise UsageError("need 0 < u-min < u-max and at least 2 points")
    with_approx = params.get("approx") == "True"
    u = np.geomspace(u_min, u_max, n)
    m = scaled_final_separation(u)
    names = ["s_i_over_s_c", "s_f_over_s_c"]
    cols = [u, m]
    if with_approx:
        names.append("s_f_approx_over_s_c")
        cols.append(approx_scaled_map(u))
    u_star, m_star = map_minimum()
    closest = int(np.argmin(np.abs(np.log(u) - np.log(u_star))))
    comments = {
        closest: (
            f"next row is closest to the map minimum: "
            f"u*={_fmt(u_star)}, s_f/s_c={_fmt(m_star)}"
        )
    }
    outdir = _outdir(args)
    _write_csv(outdir / "map.csv", names, cols, params, comments)
    _write_manifest(outdir, "map", params, ["map.csv"])
    sys.stdout.write(
        f"wrote map.csv ({n} points); minimum s_f/s_c = {m_star:.6g} at "
        f"s_i/s_c = {u_star:.6g}\n"
    )
    return EXIT_OK


def cmd_timemap(args) -> int:
    defaults = {"xi-over-sc": "0,0.5,1,3", "ti-range": "0.01,10", "points": "60"}
    params = _resolve(args, defaults)
    try:
        chis = [float(x) for x in params["xi-over-sc"].split(",")]
        ti_lo, ti_hi = (float(x) for x in params["ti-range"].split(","))
    except ValueError as exc:
        raise UsageError(f"bad list parameter: {exc}") from None
    n = int(params["points"])
    if any(c < 0 for c in chis) or not (0.0 < ti_lo < ti_hi) or n < 2:
        raise UsageError("need xi >= 0, 0 < ti range, >= 2 points")
    theta = np.geomspace(ti_lo, ti_hi, n)
    names = ["t_i_over_tau_c"]
    cols = [theta]
    for chi in chis:
        u = np.hypot(chi, theta)
        names.append(f"t_f_over_tau_c_xi_{chi:g}")
        cols.append(theta * (1.0 + sigma_excess(u)))
    outdir = _outdir(args)
    _write_csv(outdir / "timemap.csv", names, cols, params)
    _write_manifest(outdir, "timemap", params, ["timemap.csv"])
    sys.stdout.write(f"wrote timemap.csv ({n} points x {len(chis)} offsets)\n")
    return EXIT_OK


def cmd_correlation(args) -> int:
    defaults = {
        "ef": None, "de": None, "l": None,
        "tbar": "0.2ns", "tr": "tau_c",
        "tmax-over-tbar": "40", "edge-points": "72", "tail-step": None,
        "map": "exact", "mc": None,
    }
    params = _resolve(args, defaults)
    beam = _beam_from(params, need_tbar=True)
    model = EmissionModel(parse_quantity(params["tbar"], Dimension.TIME))
    sc = critical_scale(beam)
    tau = sc.tau_c_ns
    tr_text = params["tr"]
    t_r = Quantity(tau, Unit.NS) if tr_text == "tau_c" else parse_quantity(
        tr_text, Dimension.TIME
    )
    tail_step = params.get("tail-step")
    tail_step_ns = (
        parse_quantity(tail_step, Dimension.TIME).canonical
        if tail_step
        else min(t_r.canonical / 4.0, model.t_bar_ns / 50.0)
    )
    grid = default_time_grid(
        beam,
        model,
        map_kind=params["map"],
        t_max_over_t_bar=float(params["tmax-over-tbar"]),
        edge_points=int(params["edge-points"]),
        tail_step_ns=tail_step_ns,
    )
    p = pushforward_time_density(grid, beam, model, map_kind=params["map"])
    c = correlation_function(p, model)
    p_smooth = convolve_resolution(p, t_r)
    c_smooth = convolve_resolution(c, t_r)
    names = ["t_f_ns", "t_f_over_tau_c", "p_per_ns", "p_smeared_per_ns", "c", "c_smeared"]
    cols = [grid, grid / tau, p.values, p_smooth.values, c.values, c_smooth.values]
    csv_params = dict(params)
    csv_params["normalization"] = _fmt(p.normalization)
    csv_params["tau_c_ns"] = _fmt(tau)
    if params.get("mc"):
        try:
            n_txt, seed_txt = params["mc"].split(",")
            n_pairs, seed = int(n_txt), int(seed_txt)
        except ValueError:
            raise UsageError("--mc expects 'N,SEED'") from None
        cfg = SimulationConfig(
            beam=BeamParameters(
                e_f=beam.e_f, delta_e=beam.delta_e, l=beam.l, t_bar=model.t_bar
            ),
            n_pairs=n_pairs,
            seed=seed,
            transverse=TransverseModel("point_source"),
            histogram=HistogramSpec(
                t_min=Quantity(grid[1], Unit.NS),
                t_max=Quantity(grid[-1], Unit.NS),
                n_bins=max(grid.size - 2, 2),
                spacing="linear",
            ),
        )
        # bin the samples directly onto the output grid; row k holds the
        # estimate for the cell [t_k, t_{k+1}), last row zero-padded
        res = run_simulation(cfg, edges_ns=grid)
        dens = np.zeros_like(grid)
        errs = np.zeros_like(grid)
        widths = np.diff(grid)
        dens[:-1] = res.t_f_hist.counts / (n_pairs * widths)
        errs[:-1] = res.t_f_hist.standard_error / (n_pairs * widths)
        names += ["p_mc_per_ns", "p_mc_stderr_per_ns"]
        cols += [dens, errs]
    outdir = _outdir(args)
    _write_csv(outdir / "correlation.csv", names, cols, csv_params)
    _write_manifest(outdir, "correlation", params, ["correlation.csv"])
    sys.stdout.write(
        f"wrote correlation.csv ({grid.size} points); tau_c = {tau:.6g} ns; "
        f"integral of P = {p.normalization:.6g}\n"
    )
    for w in p.warnings:
        sys.stdout.write(f"warning: {w}\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    defaults = {
        "ef": None, "de": None, "l": None, "tbar": "0.2ns",
        "pairs": "100000", "seed": "1", "transverse": "point",
        "t-min": None, "t-max": None, "bins": "100", "spacing": "log",
        "workers": "1",
    }
    params = _resolve(args, defaults)
    beam = _beam_from(params, need_tbar=True)
    tau = critical_scale(beam).tau_c_ns
    spec_txt = params["transverse"]
    if spec_txt == "point":
        transverse = TransverseModel("point_source")
    elif spec_txt.startswith("fixed:"):
        transverse = TransverseModel(
            "fixed_offset",
            x_i=parse_quantity(spec_txt.split(":", 1)[1], Dimension.LENGTH),
        )
    elif spec_txt.startswith("disk:"):
        transverse = TransverseModel(
            "gaussian_disk",
            r0=parse_quantity(spec_txt.split(":", 1)[1], Dimension.LENGTH),
        )
    else:
        raise UsageError(
            f"--transverse must be point, fixed:<length> or disk:<length>; "
            f"got {spec_txt!r}"
        )
    tbar_ns = parse_quantity(params["tbar"], Dimension.TIME).canonical
    t_min = (
        parse_quantity(params["t-min"], Dimension.TIME)
        if params.get("t-min")
        else Quantity(0.05 * tau, Unit.NS)
    )
    t_max = (
        parse_quantity(params["t-max"], Dimension.TIME)
        if params.get("t-max")
        else Quantity(20.0 * tbar_ns, Unit.NS)
    )
    cfg = SimulationConfig(
        beam=beam,
        n_pairs=int(params["pairs"]),
        seed=int(params["seed"]),
        transverse=transverse,
        histogram=HistogramSpec(
            t_min=t_min, t_max=t_max, n_bins=int(params["bins"]),
            spacing=params["spacing"],
        ),
    )
    res = run_simulation(cfg, n_workers=int(params["workers"]))
    outdir = _outdir(args)
    # worker count is an execution detail; keeping it out of the data files
    # makes outputs byte-identical for any parallelism degree
    csv_params = {k: params[k] for k in sorted(params) if k != "workers"}
    (outdir / "simulate-tf.csv").write_text(res.t_f_hist.to_csv(csv_params))
    (outdir / "simulate-ti.csv").write_text(res.t_i_hist.to_csv(csv_params))
    _write_json(outdir / "simulate-summary.json", res.summary)
    _write_manifest(
        outdir, "simulate", params,
        ["simulate-tf.csv", "simulate-ti.csv", "simulate-summary.json"],
    )
    sys.stdout.write(
        f"simulated {cfg.n_pairs} pairs (seed {cfg.seed}); smallest t_f = "
        f"{res.summary['hole_floor_time']:.6g} ns; mean sigma = "
        f"{res.summary['mean_sigma']:.6g}\n"
    )
    return EXIT_OK


def cmd_gamow(args) -> int:
    defaults = {"eta": None, "vrel": None, "z": None, "zprime": None}
    params = _resolve(args, defaults)
    has_eta = "eta" in params
    has_v = "vrel" in params
    if has_eta == has_v:
        raise UsageError("give exactly one of --eta or (--vrel with --z, --zprime)")
    if has_eta:
        eta = float(params["eta"])
    else:
        if "z" not in params or "zprime" not in params:
            raise UsageError("--vrel requires --z and --zprime")
        eta = coulomb_eta(
            parse_quantity(params["vrel"], Dimension.VELOCITY),
            int(params["z"]),
            int(params["zprime"]),
        )
    value = gamow_factor(eta)
    outdir = _outdir(args)
    _write_manifest(outdir, "gamow", params, [])
    sys.stdout.write(f"{value:.17g}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coulombhole",
        description="Coulomb-hole model for electron pairs in field-emission beams",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--outdir", help=f"output directory (or ${OUTDIR_ENV})")
        p.add_argument("--config", help="key=value config file or a run manifest")

    p = sub.add_parser("scales", help="derived scales and regime report")
    common(p)
    p.add_argument("--preset", help="kot or kiesel (case-insensitive)")
    p.add_argument("--ef", help="beam energy, e.g. 50keV")
    p.add_argument("--de", help="energy spread, e.g. 0.17eV")
    p.add_argument("--L", dest="l", help="flight distance, e.g. 100cm")
    p.add_argument("--r0", help="transverse source size, e.g. 45nm")
    p.add_argument("--format", choices=("table", "json"))
    p.set_defaults(func=cmd_scales)

    p = sub.add_parser("map", help="final vs initial separation curve")
    common(p)
    p.add_argument("--u-min", dest="u_min")
    p.add_argument("--u-max", dest="u_max")
    p.add_argument("--points")
    p.add_argument("--approx", action="store_const", const="True",
                   help="add the piecewise closed-form column")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("timemap", help="final vs initial time separation per offset")
    common(p)
    p.add_argument("--xi-over-sc", dest="xi_over_sc",
                   help="comma list of transverse offsets in units of s_c")
    p.add_argument("--ti-range", dest="ti_range", help="t_i range in tau_c units: lo,hi")
    p.add_argument("--points")
    p.set_defaults(func=cmd_timemap)

    p = sub.add_parser("correlation", help="detected-interval density and correlation")
    common(p)
    p.add_argument("--ef")
    p.add_argument("--de")
    p.add_argument("--L", dest="l")
    p.add_argument("--tbar", help="mean emission interval (default 0.2ns)")
    p.add_argument("--tr", help="detector resolution time or the token tau_c")
    p.add_argument("--tmax-over-tbar", dest="tmax_over_tbar")
    p.add_argument("--edge-points", dest="edge_points")
    p.add_argument("--tail-step", dest="tail_step")
    p.add_argument("--exact", dest="map", action="store_const", const="exact")
    p.add_argument("--approx", dest="map", action="store_const", const="approx")
    p.add_argument("--mc", help="overlay a simulation: N,SEED")
    p.set_defaults(func=cmd_correlation)

    p = sub.add_parser("simulate", help="sample pairs and histogram arrivals")
    common(p)
    p.add_argument("--ef")
    p.add_argument("--de")
    p.add_argument("--L", dest="l")
    p.add_argument("--tbar")
    p.add_argument("--pairs")
    p.add_argument("--seed")
    p.add_argument("--transverse", help="point | fixed:<length> | disk:<length>")
    p.add_argument("--t-min", dest="t_min")
    p.add_argument("--t-max", dest="t_max")
    p.add_argument("--bins")
    p.add_argument("--spacing", choices=("linear", "log"))
    p.add_argument("--workers")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gamow", help="Coulomb wave-function suppression factor")
    common(p)
    p.add_argument("--eta")
    p.add_argument("--vrel", help="relative velocity, e.g. 2.19e6m/s")
    p.add_argument("--z")
    p.add_argument("--zprime")
    p.set_defaults(func=cmd_gamow)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, UnitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, UnderResolvedError, IntegrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (RuntimeError, AssertionError, ArithmeticError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())
