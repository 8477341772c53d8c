"""Command line front end.

Subcommands write CSV files plus a ``manifest.json`` into ``--out``; ``hopf``
and ``expand`` print their single row to stdout (and also write it when
``--out`` is given). Any manifest can be passed back via ``--config`` to
repeat a run.
"""

import argparse
import csv
from dataclasses import asdict
from datetime import datetime, timezone
import io
import json
import logging
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from . import config as cfgmod
from .errors import NoisyHopfError, UsageError
from .expansion import expand
from .experiments import (
    SCAN_COLUMNS,
    ScanConfig,
    amplitude,
    ensemble_average,
    onset_locator,
    scan,
)
from .noise_correction import effective_params, estimate_sigma2
from .parallel import WORKERS_ENV
from .spectrum import solve_hopf
from .trajectory import SystemSpec, Variant, integrate

log = logging.getLogger("noisyhopf")

EXIT_CODES = """exit codes:
  0  success
  2  usage error (bad flag, config value, grid or parameter)
  3  convergence failure (root finding, no onset in range)
  4  divergence (|u| exceeded 1e6)
"""

MANIFEST = "manifest.json"


def fmt(value):
    """Full-precision, locale-independent text for a CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(header, rows, comment=None):
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_csv(path_or_text):
    """Rows of a CSV written by this tool as dicts of floats (strings kept when not numeric)."""
    text = Path(path_or_text).read_text() if isinstance(path_or_text, Path) else path_or_text
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        rec = {}
        for k, v in row.items():
            try:
                rec[k] = float(v)
            except ValueError:
                rec[k] = v
        out.append(rec)
    return out


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _hopf_derived(hopf):
    return {"tau": hopf.tau, "eta_c": hopf.eta_c, "w_c": hopf.w_c, "d_re": hopf.d.real, "d_im": hopf.d.imag}


def _expansion_derived(pt):
    return {"gamma": pt.gamma, "slope": pt.slope, "x_o": pt.x_o, "f_x_o": pt.f_o, "eta": pt.eta, "kappa": pt.kappa, "nu": pt.nu}


def write_manifest(out_dir, command, config, derived):
    path = out_dir / MANIFEST
    if path.exists():
        # one manifest per directory: only a run of the same command may replace it
        try:
            previous = json.loads(path.read_text()).get("command")
        except (ValueError, AttributeError):
            previous = None
        if previous != command:
            raise UsageError(f"{out_dir} already holds a manifest from {previous!r}; choose another --out")
    out_dir.mkdir(parents=True, exist_ok=True)
    data = {
        "tool": "noisyhopf",
        "version": __version__,
        "command": command,
        "master_seed": config.master_seed,
        "created": _now(),
        "config": asdict(config),
        "derived": derived,
    }
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def finish_manifest(path, **extra):
    data = json.loads(path.read_text())
    data.update(extra)
    data["finished"] = _now()
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _scan_cfg(config):
    return ScanConfig(
        n_trials=config.n_trials,
        n_steps=config.n_steps,
        dt=config.dt,
        master_seed=config.master_seed,
        u_init=config.u_init,
        window_fraction=config.window_fraction,
        horizon=config.horizon,
        n_real=config.n_real,
    )


def cmd_hopf(config, args, out):
    hopf = solve_hopf(config.tau)
    row = [hopf.tau, hopf.eta_c, hopf.w_c, hopf.d.real, hopf.d.imag]
    text = csv_text(["tau", "eta_c", "w_c", "d_re", "d_im"], [row])
    if args.out:
        out_dir = Path(config.out)
        manifest = write_manifest(out_dir, "hopf", config, {"hopf": _hopf_derived(hopf)})
        (out_dir / "hopf.csv").write_text(text)
        finish_manifest(manifest, outputs=["hopf.csv"])
    out.write(text)


def cmd_expand(config, args, out):
    pt = expand(config.gamma, config.slope)
    text = csv_text(["x_o", "f_x_o", "eta", "kappa", "nu"], [[pt.x_o, pt.f_o, pt.eta, pt.kappa, pt.nu]])
    if args.out:
        out_dir = Path(config.out)
        manifest = write_manifest(out_dir, "expand", config, {"expansion": _expansion_derived(pt)})
        (out_dir / "expand.csv").write_text(text)
        finish_manifest(manifest, outputs=["expand.csv"])
    out.write(text)


def _sigma2_all(hopf, D_values, config):
    return {
        D: estimate_sigma2(hopf, D, config.horizon, config.n_real, config.master_seed, config.dt)
        for D in D_values
    }


def cmd_sigma2(config, args, out):
    hopf = solve_hopf(config.tau)
    pt = expand(config.gamma, config.slope)
    out_dir = Path(config.out)
    manifest = write_manifest(
        out_dir, "sigma2", config, {"hopf": _hopf_derived(hopf), "expansion": _expansion_derived(pt)}
    )
    rows = []
    for D, est in _sigma2_all(hopf, config.D_grid, config).items():
        nc = effective_params(est.sigma2, pt.kappa, pt.nu, config.eps, D)
        rows.append([D, est.sigma2, est.se, nc.c_o, nc.mu, nc.eps_eff])
    text = csv_text(["D", "sigma2", "se", "c_o", "mu", "eps_eff"], rows, f"noisyhopf {__version__} sigma2")
    (out_dir / "sigma2.csv").write_text(text)
    finish_manifest(manifest, outputs=["sigma2.csv"])
    out.write(text)


def cmd_simulate(config, args, out):
    if config.n_steps % config.decimation:
        raise UsageError("n_steps must be a multiple of decimation")
    hopf = solve_hopf(config.tau)
    pt = expand(config.gamma, config.slope)
    est = estimate_sigma2(hopf, config.D, config.horizon, config.n_real, config.master_seed, config.dt)
    nc = effective_params(est.sigma2, pt.kappa, pt.nu, config.eps, config.D)
    out_dir = Path(config.out)
    manifest = write_manifest(
        out_dir,
        "simulate",
        config,
        {
            "hopf": _hopf_derived(hopf),
            "expansion": _expansion_derived(pt),
            "sigma2": {repr(config.D): est.sigma2},
            "correction": {"c_o": nc.c_o, "mu": nc.mu, "eps_eff": nc.eps_eff},
        },
    )

    poly = {"eta": hopf.eta_c + config.eps, "kappa": pt.kappa, "nu": pt.nu}
    run_kw = dict(history_init=config.u_init, n_steps=config.n_steps, dt=config.dt)
    det = integrate(SystemSpec(Variant.POLYNOMIAL, poly, 0.0, config.tau), **run_kw)
    ens = ensemble_average(
        SystemSpec(Variant.POLYNOMIAL, poly, config.D, config.tau),
        n_trials=config.n_trials,
        master_seed=config.master_seed,
        **run_kw,
    )
    cor = integrate(
        SystemSpec(Variant.CORRECTED, nc.corrected_params(hopf.eta_c, pt.kappa, pt.nu), 0.0, config.tau), **run_kw
    )

    k = slice(None, None, config.decimation)
    cols = [det.times[k], det.samples[k], ens.mean_trajectory.samples[k], ens.se[k], cor.samples[k]]
    text = csv_text(
        ["t", "u_deterministic", "u_ensemble_mean", "u_ensemble_se", "u_corrected"],
        zip(*cols),
        f"noisyhopf {__version__} simulate eps={config.eps!r} D={config.D!r}",
    )
    (out_dir / "trajectory.csv").write_text(text)
    (out_dir / "fig1.gp").write_text(FIG1_TEMPLATE.format(eps=config.eps, D=config.D))

    w = config.window_fraction
    amps = {
        "amp_deterministic": float(amplitude(det, w)),
        "amp_ensemble": float(amplitude(ens.mean_trajectory, w)),
        "amp_corrected": float(amplitude(cor, w)),
    }
    finish_manifest(manifest, outputs=["trajectory.csv", "fig1.gp"], results=amps)
    out.write(csv_text(list(amps), [list(amps.values())]))


def cmd_scan(config, args, out):
    hopf = solve_hopf(config.tau)
    pt = expand(config.gamma, config.slope)
    s2 = {D: est.sigma2 for D, est in _sigma2_all(hopf, config.D_grid, config).items()}
    out_dir = Path(config.out)
    manifest = write_manifest(
        out_dir,
        "scan",
        config,
        {
            "hopf": _hopf_derived(hopf),
            "expansion": _expansion_derived(pt),
            "sigma2": {repr(D): v for D, v in s2.items()},
        },
    )
    table = scan(config.eps_grid, config.D_grid, pt, hopf, _scan_cfg(config), sigma2=s2)
    text = csv_text(
        SCAN_COLUMNS,
        ([getattr(r, c) for c in SCAN_COLUMNS] for r in table.rows),
        f"noisyhopf {__version__} scan",
    )
    (out_dir / "scan.csv").write_text(text)
    (out_dir / "fig2.gp").write_text(fig2_script(config.D_grid))
    (out_dir / "fig3.gp").write_text(fig3_script(config.D_grid))

    threshold = config.threshold if config.threshold is not None else table.meta["reference_amplitude"]
    onsets = []
    for D in config.D_grid:
        rows = table.at_D(D)
        row = {"D": D, "mu": rows[0].mu}
        for col in ("amp_noise_free", "amp_ensemble", "amp_corrected"):
            try:
                row[col] = onset_locator(rows, threshold, col)
            except NoisyHopfError as exc:
                log.warning("no onset for D=%g (%s): %s", D, col, exc)
                row[col] = math.nan
        onsets.append(row)
    finish_manifest(
        manifest,
        outputs=["scan.csv", "fig2.gp", "fig3.gp"],
        results={"threshold": threshold, "onsets": onsets},
    )
    out.write(csv_text(["D", "mu", "onset_noise_free", "onset_ensemble", "onset_corrected"],
                       ([o["D"], o["mu"], o["amp_noise_free"], o["amp_ensemble"], o["amp_corrected"]] for o in onsets)))


FIG1_TEMPLATE = """# gnuplot script: noise-free, ensemble-mean and corrected trajectories
set datafile separator ','
set key top right
set xlabel 't'
set ylabel 'u'
set title 'eps = {eps}, D = {D}'
plot 'trajectory.csv' using 1:2 with lines lc rgb 'red' title 'D = 0', \\
     '' using 1:3 with lines lc rgb 'gray30' title '<u>', \\
     '' using 1:5 with lines dt 2 lc rgb 'black' title 'corrected'
pause mouse close
"""


def _series(column, D_grid, style):
    # column numbers follow SCAN_COLUMNS (1-based)
    col = SCAN_COLUMNS.index(column) + 1
    parts = [
        f"'scan.csv' using 1:($2=={D!r} ? ${col} : 1/0) with {style} title 'D = {D:g}'"
        for D in D_grid
    ]
    return ", \\\n     ".join(parts)


def fig2_script(D_grid):
    head = "# gnuplot script: amplitude versus eps for each noise level\n"
    head += "set datafile separator ','\nset xlabel 'eps'\nset ylabel 'amplitude'\nset multiplot layout 1,3\n"
    panels = []
    for column, title in (
        ("amp_noise_free", "a) D = 0"),
        ("amp_ensemble", "b) ensemble <u>"),
        ("amp_corrected", "c) corrected"),
    ):
        panels.append(f"set title '{title}'\nset arrow from 0, graph 0 to 0, graph 1 nohead dt 2\n"
                      f"plot {_series(column, D_grid, 'linespoints')}\n")
    return head + "".join(panels) + "unset multiplot\npause mouse close\n"


def fig3_script(D_grid):
    return (
        "# gnuplot script: ensemble amplitude versus eps, one curve per noise level\n"
        "set datafile separator ','\nset xlabel 'eps'\nset ylabel 'amplitude of <u>'\n"
        f"plot {_series('amp_ensemble', D_grid, 'lines')}\npause mouse close\n"
    )


COMMANDS = {
    "hopf": cmd_hopf,
    "expand": cmd_expand,
    "sigma2": cmd_sigma2,
    "simulate": cmd_simulate,
    "scan": cmd_scan,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", help="key = value file, or a manifest.json to repeat a run")
    g.add_argument("--seed", type=int, dest="master_seed", help="master RNG seed")
    g.add_argument("--out", help="output directory")
    g.add_argument("--trials", type=int, dest="n_trials", help="ensemble size")
    g.add_argument("-v", "--verbose", action="store_true")

    model = argparse.ArgumentParser(add_help=False)
    m = model.add_argument_group("model")
    m.add_argument("--tau", type=float, help="delay (default 12)")
    m.add_argument("--gamma", type=float, help="feedback gain (default -0.05)")
    m.add_argument("--slope", type=float, help="sigmoid steepness (default 60)")

    runs = argparse.ArgumentParser(add_help=False)
    r = runs.add_argument_group("integration")
    r.add_argument("--dt", type=float)
    r.add_argument("--steps", type=int, dest="n_steps")
    r.add_argument("--u-init", type=float, dest="u_init", help="constant initial history")
    r.add_argument("--window", type=float, dest="window_fraction", help="amplitude window fraction")
    r.add_argument("--horizon", type=float, help="sigma2 estimation horizon")
    r.add_argument("--realizations", type=int, dest="n_real", help="sigma2 realizations")

    parser = argparse.ArgumentParser(
        prog="noisyhopf",
        description="Additive-noise shift of a delay-induced Hopf bifurcation.",
        epilog=EXIT_CODES + f"\nenvironment:\n  {WORKERS_ENV}  worker-pool size (default: CPU count)\n",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("hopf", parents=[common, model], help="critical gain, frequency and adjoint constant")
    sub.add_parser("expand", parents=[common, model], help="fixed point and Taylor coefficients")
    p = sub.add_parser("sigma2", parents=[common, model, runs], help="noise corrections per D")
    p.add_argument("--D-grid", dest="D_grid", help="comma list or start:stop:step")
    p.add_argument("--eps", type=float)
    p = sub.add_parser("simulate", parents=[common, model, runs], help="noise-free, ensemble and corrected runs")
    p.add_argument("--eps", type=float)
    p.add_argument("--D", type=float)
    p.add_argument("--decimation", type=int)
    p = sub.add_parser("scan", parents=[common, model, runs], help="amplitude sweep over (eps, D)")
    p.add_argument(
        "--eps-grid", dest="eps_grid", help="comma list or start:stop:step; write --eps-grid=-0.4:0.25:0.01 for negative starts"
    )
    p.add_argument("--D-grid", dest="D_grid", help="comma list or start:stop:step")
    p.add_argument("--threshold", type=float, help="onset amplitude (default: neutral reference run)")
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k in cfgmod.FIELD_TYPES and v is not None
    }
    try:
        config = cfgmod.resolve(args.config, **overrides)
        COMMANDS[args.command](config, args, out)
    except NoisyHopfError as exc:
        print(f"noisyhopf {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"noisyhopf {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
