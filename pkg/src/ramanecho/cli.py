"""Command-line interface: protocol runs, sequence validation, fits.

Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.
Identical config and seed give byte-identical outputs; --threads is accepted
for interface compatibility and recorded in the manifest, but the
computation is always deterministic and single-threaded.
"""

from __future__ import annotations

import argparse
import sys as _sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, protocols, runconfig
from .physmodel import ModelError
from .propagator import PropagationError
from .pulsekit import HardwareLimits, ParseError, parse_sequence, validate
from .runconfig import ConfigError


def _manifest_entries(command: str, args, values: dict) -> dict:
    entries = {f"config.{k}": v for k, v in values.items()}
    entries["command"] = command
    entries["seed"] = args.seed if args.seed is not None else values.get("rng_seed", 0)
    entries["threads"] = args.threads
    entries["version"] = __version__
    return entries


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_echo_sweep(args) -> int:
    values = runconfig.load_config(args.config, "echo-sweep")
    if len(values["delays_us"]) < 3:
        raise ConfigError("delays_us needs at least 3 delays for the decay fit")
    b, zp = runconfig.resolve_field(values)
    sys_ = runconfig.build_level_system(values, b, zp)
    cfg = runconfig.build_ensemble_config(values, b, zp, args.seed)
    opts = runconfig.build_echo_options(values)
    result = protocols.raman_echo_sweep(sys_, cfg, values["delays_us"], opts)
    fit = analysis.fit_exp_decay([(p.t_delay, p.amplitude) for p in result.rows])
    out = _outdir(args)
    protocols.write_sweep_csv(result, out / "sweep.csv")
    protocols.write_fit_csv(fit, out / "fit.csv")
    entries = _manifest_entries("echo-sweep", args, values)
    entries.update({f"integrity.{k}": v for k, v in result.metadata["integrity"].items()})
    protocols.write_manifest(out / "manifest.txt", entries, result.metadata["diagnostics"])
    return 0


def cmd_excited_echo(args) -> int:
    values = runconfig.load_config(args.config, "excited-echo")
    if len(values["delays_us"]) < 3:
        raise ConfigError("delays_us needs at least 3 delays for the decay fit")
    b, zp = runconfig.resolve_field(values)
    sys_ = runconfig.build_level_system(values, b, zp)
    cfg = runconfig.build_ensemble_config(values, b, zp, args.seed)
    opts = runconfig.build_echo_options(values)
    result = protocols.excited_state_echo(sys_, cfg, values["delays_us"], opts)
    fit = analysis.fit_exp_decay([(p.t_delay, p.amplitude) for p in result.rows])
    out = _outdir(args)
    protocols.write_sweep_csv(result, out / "sweep.csv")
    protocols.write_fit_csv(fit, out / "fit.csv")
    entries = _manifest_entries("excited-echo", args, values)
    entries["deconvolved_t2_us"] = analysis.deconvolve_intrinsic_t2(
        fit.value("t2"), values["t1_optical_us"]
    )
    entries.update({f"integrity.{k}": v for k, v in result.metadata["integrity"].items()})
    protocols.write_manifest(out / "manifest.txt", entries, result.metadata["diagnostics"])
    return 0


def cmd_photon_echo_control(args) -> int:
    values = runconfig.load_config(args.config, "photon-echo-control")
    b, zp = runconfig.resolve_field(values)
    sys_ = runconfig.build_level_system(values, b, zp)
    cfg = runconfig.build_ensemble_config(values, b, zp, args.seed)
    opts = runconfig.build_echo_options(values)
    out = _outdir(args)
    rows = []
    for detuned in (False, True):
        res = protocols.photon_echo_control(sys_, cfg, values["t_delay_us"], detuned, opts)
        rows.append((detuned, res.raman_amplitude, res.contamination_amplitude))
    with open(out / "photon_echo.csv", "w", encoding="utf-8") as fh:
        fh.write("detuned,raman_amplitude,contamination_amplitude\n")
        for detuned, raman, cont in rows:
            fh.write(f"{str(detuned).lower()},{raman!r},{cont!r}\n")
    protocols.write_manifest(
        out / "manifest.txt", _manifest_entries("photon-echo-control", args, values)
    )
    return 0


def cmd_t2_vs_splitting(args) -> int:
    values = runconfig.load_config(args.config, "t2-vs-splitting")
    if len(values["delays_us"]) < 3:
        raise ConfigError("delays_us needs at least 3 delays for the decay fit")
    b, zp = runconfig.resolve_field(values)
    sys_ = runconfig.build_level_system(values, b, zp)
    cfg = runconfig.build_ensemble_config(values, b, zp, args.seed)
    opts = runconfig.build_echo_options(values)
    table = protocols.t2_vs_splitting(
        sys_, zp, values["delta_g_list_mhz"], cfg, values["delays_us"], opts
    )
    out = _outdir(args)
    protocols.write_t2_table_csv(table, out / "t2_vs_splitting.csv")
    diags = [w for row in table.rows for w in row.warnings]
    protocols.write_manifest(
        out / "manifest.txt", _manifest_entries("t2-vs-splitting", args, values), diags
    )
    return 0


def cmd_holeburn(args) -> int:
    values = runconfig.load_config(args.config, "holeburn")
    _, zp = runconfig.resolve_field(values)
    cfg = runconfig.build_holeburn_config(values)
    out = _outdir(args)
    b_fields = values["b_fields_tesla"]
    antihole_widths = []
    hole_widths = []
    for k, b in enumerate(b_fields):
        sys_ = runconfig.build_level_system(values, b, zp)
        result = protocols.hole_burning_scan(b, zp, sys_, cfg)
        suffix = "" if len(b_fields) == 1 else f"_{k}"
        protocols.write_holeburn_csv(result, out / f"holeburn{suffix}.csv")
        protocols.write_features_csv(result, out / f"features{suffix}.csv")
        if len(b_fields) > 1:
            antihole_widths.append(
                (b, protocols.feature_width_at(result, result.metadata["delta_g_mhz"]))
            )
            hole_widths.append(
                (b, protocols.feature_width_at(result, result.metadata["delta_e_mhz"]))
            )
    if len(b_fields) > 1:
        with open(out / "widths_vs_B.csv", "w", encoding="utf-8") as fh:
            fh.write("b_tesla,antihole_width_MHz,hole_width_MHz\n")
            for (b, wa), (_, wh) in zip(antihole_widths, hole_widths):
                fh.write(f"{b!r},{wa!r},{wh!r}\n")
        with open(out / "width_fit.csv", "w", encoding="utf-8") as fh:
            fh.write("series,slope_MHz_per_T,slope_stderr,intercept_MHz,intercept_stderr\n")
            for name, data in (("antihole", antihole_widths), ("hole", hole_widths)):
                fit = analysis.fit_width_law(data)
                fh.write(
                    f"{name},{fit.value('slope')!r},{fit.error('slope')!r},"
                    f"{fit.value('intercept')!r},{fit.error('intercept')!r}\n"
                )
    protocols.write_manifest(out / "manifest.txt", _manifest_entries("holeburn", args, values))
    return 0


def cmd_validate(args) -> int:
    try:
        with open(args.sequence, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"ERROR io cannot read {args.sequence}: {exc}", file=_sys.stderr)
        return 2
    try:
        seq = parse_sequence(text)
    except ParseError as exc:
        print(f"ERROR {exc.code} {exc}")
        return 1
    diags = validate(seq, HardwareLimits(args.limit_mhz))
    for d in diags:
        print(d.format())
    return 1 if any(d.level == "ERROR" for d in diags) else 0


def cmd_fit(args) -> int:
    values = runconfig.load_config(args.config, "fit")
    path = Path(values["input_csv"])
    if not path.exists():
        raise ConfigError(f"input_csv {path} does not exist")
    data = np.genfromtxt(path, delimiter=",", names=True)
    cols = data.dtype.names
    if cols is None or len(cols) < 2:
        raise ConfigError("input_csv needs a header and at least two columns")
    points = list(zip(np.atleast_1d(data[cols[0]]), np.atleast_1d(data[cols[1]])))
    if values["model"] == "exp_decay":
        fit = analysis.fit_exp_decay(points)
    elif values["model"] == "linear":
        fit = analysis.fit_linear(points)
    else:
        raise ConfigError(f"unknown fit model {values['model']!r}")
    out = _outdir(args)
    if values["model"] == "exp_decay":
        protocols.write_fit_csv(fit, out / "fit.csv")
    else:
        with open(out / "fit.csv", "w", encoding="utf-8") as fh:
            fh.write("slope,intercept,slope_stderr,intercept_stderr,residual_norm,n_points\n")
            fh.write(
                f"{fit.value('slope')!r},{fit.value('intercept')!r},"
                f"{fit.error('slope')!r},{fit.error('intercept')!r},"
                f"{fit.residual_norm!r},{fit.n_points}\n"
            )
    protocols.write_manifest(out / "manifest.txt", _manifest_entries("fit", args, values))
    return 0


_COMMANDS = {
    "holeburn": cmd_holeburn,
    "echo-sweep": cmd_echo_sweep,
    "excited-echo": cmd_excited_echo,
    "photon-echo-control": cmd_photon_echo_control,
    "t2-vs-splitting": cmd_t2_vs_splitting,
    "fit": cmd_fit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ramanecho",
        description="Spin-coherence echo and hole-burning simulation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--out", default=f"ramanecho_{name.replace('-', '_')}", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config rng seed")
        p.add_argument(
            "--threads",
            type=int,
            default=1,
            help="accepted for compatibility; results never depend on it",
        )
    v = sub.add_parser("validate")
    v.add_argument("sequence", help="sequence file to check")
    v.add_argument("--limit-mhz", type=float, default=100.0, help="usable modulation band")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return 2
    except (ModelError, PropagationError, protocols.ProtocolError, analysis.AnalysisError) as exc:
        print(f"runtime error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
