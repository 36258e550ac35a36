"""Command line surface: curve sweeps, ensemble runs, identity suites, reports.

Commands
  fig3       noise-strength curves S^2(L, d) over a log-spaced clump-size grid
  fig4       decoherence kernel traces and their ratio to the noise curves
  ensemble   desk-scale Monte Carlo residual statistics vs the closed form
  wave       lattice-vs-continuum convergence table
  verify     block-reduction and noise-transform identity suite
  report     predictability timescales, optionally in SI units

Configuration comes from an optional YAML file (--config) holding the same
keys as the flags, possibly nested under the command name; explicit flags win.
Every CSV starts with '#'-prefixed lines echoing the resolved configuration
and the unit conventions.  Exit codes: 0 ok, 1 usage, 2 verification failure,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .blocks import build_blocks
from .chain import ChainGeometry, ContractError, CoarseGrainingSpec, mode_basis
from .continuum import convergence_study
from .decoherence import (ATOMIC_MASS_UNIT, HBAR, K_BOLTZMANN,
                          predictability_report, realistic_string_geometry,
                          trace_measure)
from .ensemble import InitialCondition, residual_ensemble
from .noise import asymptotic_estimates, corr_simple, noise_strength
from .output import save_curve_plot, write_csv
from .verify import run_suite

USAGE_ERROR, VERIFY_ERROR, NUMERICAL_ERROR = 1, 2, 3


def default_d_grid(d_max: int = 10 ** 4, points: int = 49) -> list[int]:
    grid = np.unique(np.rint(np.logspace(0, np.log10(d_max), points)).astype(int))
    return sorted(set(grid.tolist()) | {1, 2})


def _config_echo(args: argparse.Namespace, keys) -> list[str]:
    kv = ", ".join(f"{k}={getattr(args, k)}" for k in keys)
    return [f"chaincg {__version__} command={args.command}", kv]


def _load_config(path: str | None, command: str) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ContractError("config file must hold a mapping")
    merged = {k: v for k, v in data.items() if not isinstance(v, dict)}
    merged.update(data.get(command, {}) or {})
    return merged


def _apply_config(args: argparse.Namespace, parser_defaults: dict, config: dict):
    # flags win: only config keys whose flag still holds its default are applied
    for key, val in config.items():
        if not hasattr(args, key):
            raise ContractError(f"unknown config key {key!r}")
        if getattr(args, key) == parser_defaults.get(key):
            setattr(args, key, val)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fig3(args) -> int:
    l_list = args.modes
    d_list = args.d_grid or default_d_grid(args.d_max)
    rows = []
    for L in l_list:
        for d in d_list:
            s2 = noise_strength(L, d, args.groups,
                                exact_final_factor=not args.unit_final_factor,
                                exact_average=args.exact_average).strength
            est2, est_large = asymptotic_estimates(L, d, args.groups)
            rows.append((L, d, f"{s2:.12e}", f"{est2:.12e}", f"{est_large:.12e}"))
    header = _config_echo(args, ["groups", "modes", "d_max", "seed"]) + [
        "S2_units = kT*omega^2/(group_size*mass); asymptotes as quoted "
        "(the honest large-d limit of S2*d is 4 sin^2(pi L/groups))",
    ]
    out = Path(args.out)
    write_csv(out, ["L", "d", "S2_units", "d2_asymptote", "large_d_asymptote"],
              rows, header)
    if not args.no_plot:
        curves = []
        for L in l_list:
            pts = [(r[1], float(r[2])) for r in rows if r[0] == L]
            curves.append((f"L={L}", [p[0] for p in pts], [p[1] for p in pts]))
        save_curve_plot(out.with_suffix(".png"), curves, "d",
                        "S^2 [kT w^2/(N mass)]", "noise strength vs clump size",
                        logx=True)
    return 0


def cmd_fig4(args) -> int:
    l_list = args.modes
    d_list = args.d_grid or default_d_grid(args.d_max)
    rows = []
    worst_ratio = 0.0
    for L in l_list:
        for d in d_list:
            k = trace_measure(L, d, args.groups)
            s2 = noise_strength(L, d, args.groups).strength
            ratio = k / s2 if s2 > 0 else float("nan")
            if np.isfinite(ratio):
                worst_ratio = max(worst_ratio, abs(ratio - 1.0))
            rows.append((L, d, f"{k:.12e}", f"{ratio:.12e}"))
    header = _config_echo(args, ["groups", "modes", "d_max", "seed"]) + [
        "K_I_units = group_size*kT*mass*omega^2/(4*hbar^2); "
        "ratio_to_S2 dimensionless (both curves in their stated units)",
    ]
    out = Path(args.out)
    write_csv(out, ["L", "d", "K_I_units", "ratio_to_S2"], rows, header)
    if not args.no_plot:
        curves = []
        for L in l_list:
            pts = [(r[1], float(r[2])) for r in rows if r[0] == L]
            curves.append((f"L={L}", [p[0] for p in pts], [p[1] for p in pts]))
        save_curve_plot(out.with_suffix(".png"), curves, "d",
                        "K_I [N kT mass w^2/(4 hbar^2)]",
                        "decoherence kernel trace vs clump size", logx=True)
    return 0


def cmd_ensemble(args) -> int:
    geom = ChainGeometry(groups=args.groups, group_size=args.group_size,
                         clump_size=args.clump_size, temperature=args.temperature)
    lags = np.array([0.0, np.pi, 2.0 * np.pi]) / geom.spring_frequency
    summary = residual_ensemble(geom, args.mode, lags, args.samples,
                                master_seed=args.seed,
                                conditioned=not args.unconditioned)
    blocks = build_blocks(mode_basis(args.groups, args.mode, args.clump_size))
    stats = "conditional" if not args.unconditioned else "independent"
    unit = geom.kT / args.group_size
    rows, failures = [], 0
    for j, t in enumerate(lags):
        theory = unit * corr_simple(t, t, blocks, stats=stats)
        z = (summary.variance[j] - theory) / summary.stderr_variance[j]
        flagged = abs(z) > 3.0
        failures += flagged
        rows.append((f"{t:.6f}", f"{np.real(summary.mean[j]):.6e}",
                     f"{summary.variance[j]:.6e}",
                     f"{summary.stderr_variance[j]:.6e}",
                     f"{theory:.6e}", f"{z:+.2f}", int(flagged)))
    se_floor = np.max(summary.stderr_variance / np.maximum(summary.variance, 1e-300))
    header = _config_echo(args, ["groups", "group_size", "clump_size", "mode",
                                 "samples", "seed", "temperature"]) + [
        "variance of the coarse-mode residual vs its closed form; z is the "
        "agreement in standard errors; natural units",
        f"undersampled={'yes' if se_floor > 0.2 else 'no'}",
    ]
    write_csv(args.out, ["t", "mean_re", "variance", "stderr_variance",
                         "closed_form", "z", "flagged"], rows, header)
    return VERIFY_ERROR if failures else 0


def cmd_wave(args) -> int:
    rows, slope = convergence_study(args.mode, args.groups_list, args.group_size)
    out_rows = [(M, f"{err:.9e}", f"{slope:.4f}") for (M, err) in rows]
    header = _config_echo(args, ["mode", "groups_list", "group_size"]) + [
        "sup-norm error of the group-average chain vs the wave equation over "
        "one period; fitted log-log slope repeated per row",
    ]
    out = Path(args.out)
    write_csv(out, ["groups", "sup_error", "fitted_slope"], out_rows, header)
    if not args.no_plot:
        save_curve_plot(out.with_suffix(".png"),
                        [("error", [r[0] for r in rows], [r[1] for r in rows])],
                        "groups", "sup error", f"slope {slope:.3f}",
                        logx=True, logy=True)
    return 0


def cmd_verify(args) -> int:
    results = run_suite(seed=args.seed, n_realizations=args.realizations,
                        corrupt=args.corrupt)
    rows = [(r.name, f"{r.max_residual:.3e}", f"{r.tolerance:.1e}",
             "pass" if r.passed else "FAIL", r.detail) for r in results]
    n_fail = sum(not r.passed for r in results)
    header = _config_echo(args, ["seed", "realizations", "corrupt"]) + [
        f"identities checked: {len(results)}, failures: {n_fail}",
    ]
    write_csv(args.out, ["identity", "max_residual", "tolerance", "status",
                         "detail"], rows, header)
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"{status:4s}  {r.max_residual:9.3e} <= {r.tolerance:7.1e}  {r.name}")
    return VERIFY_ERROR if n_fail else 0


def cmd_report(args) -> int:
    if args.units == "si":
        geom = realistic_string_geometry(temperature=args.temperature_k,
                                         mass_amu=args.mass_amu)
        geom = ChainGeometry(groups=geom.groups, group_size=args.group_size,
                             clump_size=args.group_size, mass=geom.mass,
                             spring_frequency=geom.spring_frequency,
                             lattice_spacing=geom.lattice_spacing,
                             temperature=geom.temperature, hbar=geom.hbar,
                             boltzmann=geom.boltzmann)
        width = args.range_width_m
    else:
        geom = ChainGeometry(groups=args.groups, group_size=args.group_size,
                             clump_size=args.group_size)
        width = args.range_width
    cg = CoarseGrainingSpec(range_width=width, time_step=1.0 / geom.spring_frequency,
                            cutoff_mode=0)
    rows = []
    for d in args.d_list:
        rep = predictability_report(geom, cg, args.mode, clump_size=d,
                                    excitation_scale=args.excitation_scale)
        rows.append((args.mode, d, f"{rep.kernel_trace:.6e}",
                     f"{rep.classical_ratio:.4f}", f"{rep.t_dyn:.6e}",
                     f"{rep.t_decoh:.6e}", f"{rep.ratio_decoh_dyn:.6e}",
                     f"{rep.thermal_wavelength:.6e}", f"{rep.noise_force:.6e}",
                     f"{rep.dynamical_force:.6e}", f"{rep.noise_force_ratio:.6e}",
                     f"{rep.thermal_excitation_scale:.6e}",
                     f"{rep.op_count:.6e}", int(rep.order_of_magnitude)))
    header = _config_echo(args, ["units", "mode", "group_size", "d_list"]) + [
        "all timescale/force columns are order-of-magnitude estimates "
        "(order_of_magnitude=1); kernel_trace in N kT mass w^2/(4 hbar^2)",
        f"units={args.units}; hbar={geom.hbar}, k_B={geom.boltzmann}, "
        f"mass={geom.mass}, omega={geom.spring_frequency}, "
        f"range_width={width}",
    ]
    out = Path(args.out)
    write_csv(out, ["L", "d", "kernel_trace", "classical_ratio", "t_dyn",
                    "t_decoh", "ratio_decoh_dyn", "thermal_wavelength",
                    "F_noise", "F_dyn", "noise_force_ratio",
                    "thermal_excitation_scale", "op_count",
                    "order_of_magnitude"], rows, header)
    if not args.no_plot:
        ds = [r[1] for r in rows]
        save_curve_plot(out.with_suffix(".png"),
                        [("t_decoh/t_dyn", ds, [float(r[6]) for r in rows])],
                        "d", "t_decoh / t_dyn",
                        "decoherence vs dynamical timescale", logx=True, logy=True)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chaincg", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default):
        sp.add_argument("--config", default=None, help="YAML config file")
        sp.add_argument("--out", default=out_default, help="output CSV path")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1,
                        help="worker processes (outputs are order-deterministic)")
        sp.add_argument("--units", choices=("natural", "si"), default="natural")
        sp.add_argument("--no-plot", action="store_true",
                        help="skip the companion figure")

    sp = sub.add_parser("fig3", help="noise-strength curves")
    common(sp, "fig3.csv")
    sp.add_argument("--groups", type=int, default=630)
    sp.add_argument("--modes", type=_int_list, default=[30, 65, 100])
    sp.add_argument("--d-max", type=int, default=10 ** 4)
    sp.add_argument("--d-grid", type=_int_list, default=None)
    sp.add_argument("--unit-final-factor", action="store_true",
                    help="replace the exact final factor by 1")
    sp.add_argument("--exact-average", action="store_true",
                    help="include degenerate-frequency cross terms")
    sp.set_defaults(func=cmd_fig3)

    sp = sub.add_parser("fig4", help="decoherence kernel traces")
    common(sp, "fig4.csv")
    sp.add_argument("--groups", type=int, default=630)
    sp.add_argument("--modes", type=_int_list, default=[30, 65, 100])
    sp.add_argument("--d-max", type=int, default=10 ** 4)
    sp.add_argument("--d-grid", type=_int_list, default=None)
    sp.set_defaults(func=cmd_fig4)

    sp = sub.add_parser("ensemble", help="Monte Carlo residual statistics")
    common(sp, "ensemble.csv")
    sp.add_argument("--groups", type=int, default=16)
    sp.add_argument("--group-size", type=int, default=8)
    sp.add_argument("--clump-size", type=int, default=8)
    sp.add_argument("--mode", type=int, default=2)
    sp.add_argument("--samples", type=int, default=10 ** 4)
    sp.add_argument("--temperature", type=float, default=1.0)
    sp.add_argument("--unconditioned", action="store_true",
                    help="plain thermal sampling (final factor 1 form)")
    sp.set_defaults(func=cmd_ensemble)

    sp = sub.add_parser("wave", help="continuum-limit convergence study")
    common(sp, "wave.csv")
    sp.add_argument("--mode", type=int, default=2)
    sp.add_argument("--groups-list", type=_int_list, default=[16, 32, 64, 128])
    sp.add_argument("--group-size", type=int, default=8)
    sp.set_defaults(func=cmd_wave)

    sp = sub.add_parser("verify", help="identity suite")
    common(sp, "verify.csv")
    sp.add_argument("--realizations", type=int, default=100)
    sp.add_argument("--corrupt", action="store_true",
                    help="fault injection: perturb one coefficient")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("report", help="predictability timescale estimates")
    common(sp, "report.csv")
    sp.add_argument("--groups", type=int, default=1000)
    sp.add_argument("--group-size", type=int, default=10 ** 6)
    sp.add_argument("--mode", type=int, default=10)
    sp.add_argument("--d-list", type=_int_list,
                    default=[2, 8, 32, 128, 512, 2048, 10 ** 4, 10 ** 5, 10 ** 6])
    sp.add_argument("--temperature-k", type=float, default=300.0)
    sp.add_argument("--mass-amu", type=float, default=10.0)
    sp.add_argument("--range-width", type=float, default=1.0)
    sp.add_argument("--range-width-m", type=float, default=1.0e-9)
    sp.add_argument("--excitation-scale", type=float, default=1.0)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; remap (2 means verification failure)
        if exc.code not in (0, None):
            return USAGE_ERROR
        return 0
    try:
        config = _load_config(args.config, args.command)
        defaults = {a.dest: a.default for a in parser._actions}
        for group in parser._subparsers._group_actions:
            for sp in group.choices.values():
                defaults.update({a.dest: a.default for a in sp._actions})
        _apply_config(args, defaults, config)
        return args.func(args)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
