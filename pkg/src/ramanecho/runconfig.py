"""Flat key-value run configuration with explicit units in key names.

A config file holds `key = value` lines; `#` starts a comment.  Unknown keys
are rejected so unit mistakes fail loudly.  Every key has a default, listed
in the per-command schemas below.
"""

from __future__ import annotations

import math
from dataclasses import replace

from .physmodel import EnsembleConfig, LevelSystem, ZeemanParams, spin_widths, splittings
from .protocols import EchoOptions, HoleburnConfig


class ConfigError(ValueError):
    """Bad key, bad value, or an unreadable config file."""


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "yes", "1", "on"):
        return True
    if text.lower() in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated float list, got {text!r}") from None


def _parse_value(kind: str, text: str):
    try:
        if kind == "float":
            return float(text)
        if kind == "int":
            return int(text)
        if kind == "bool":
            return _parse_bool(text)
        if kind == "str":
            return text
        if kind == "floatlist":
            return _parse_float_list(text)
        if kind == "float_or_auto":
            return "auto" if text.strip().lower() == "auto" else float(text)
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"invalid {kind} value {text!r}") from None
    raise ConfigError(f"unknown value kind {kind}")


_MODEL_KEYS = {
    "slope_g_mhz_per_t": ("float", 36.0),
    "slope_e_mhz_per_t": ("float", 16.0),
    "width_slope_g_mhz_per_t": ("float", 0.99),
    "width_slope_e_mhz_per_t": ("float", 0.093),
    "residual_width_mhz": ("float", 0.2),
    "b_field_tesla": ("float_or_auto", "auto"),
    "delta_g_mhz": ("float_or_auto", "auto"),
    "branching_ratio": ("float", 0.13),
    "t1_optical_us": ("float", 800.0),
    "t2_optical_us": ("float", 10.0),
    "t2_spin_ground_us": ("float", 300.0),
    "t2_spin_excited_us": ("float", 540.0),
}

_ENSEMBLE_KEYS = {
    "n_optical": ("int", 1),
    "optical_window_mhz": ("float", 0.0),
    "n_spin": ("int", 21),
    "spin_width_g_mhz": ("float_or_auto", "auto"),
    "spin_width_e_mhz": ("float_or_auto", 0.0),
    "sampling_mode": ("str", "quadrature"),
    "rng_seed": ("int", 1234),
}

_ECHO_KEYS = {
    "detuned_rephasing": ("bool", True),
    "rephasing_area_rad": ("float", math.pi),
    "probe_rabi_mhz": ("float", 1e-4),
    "excitation_duration_us": ("float", 10.0),
    "rephasing_duration_us": ("float", 10.0),
    "gate_us": ("float", 16.0),
    "reference_offset_us": ("float", 40.0),
    "lo_amplitude": ("float", 1.0),
    "dt_us": ("float", 0.0),  # 0 = automatic 1/(40 f_max)
}

SCHEMAS: dict[str, dict[str, tuple[str, object]]] = {
    "echo-sweep": {
        **_MODEL_KEYS,
        **_ENSEMBLE_KEYS,
        **_ECHO_KEYS,
        "delays_us": ("floatlist", [100.0, 150.0, 200.0, 250.0, 300.0, 400.0]),
    },
    "excited-echo": {
        **_MODEL_KEYS,
        **_ENSEMBLE_KEYS,
        **_ECHO_KEYS,
        "delays_us": ("floatlist", [60.0, 120.0, 180.0, 240.0]),
    },
    "photon-echo-control": {
        **_MODEL_KEYS,
        **{**_ENSEMBLE_KEYS, "n_optical": ("int", 41), "optical_window_mhz": ("float", 0.4), "n_spin": ("int", 5)},
        **_ECHO_KEYS,
        "t2_optical_us": ("float", 300.0),
        "t_delay_us": ("float", 40.0),
    },
    "t2-vs-splitting": {
        **_MODEL_KEYS,
        **_ENSEMBLE_KEYS,
        **_ECHO_KEYS,
        "delta_g_list_mhz": ("floatlist", [4.0, 20.0, 41.0, 60.0, 83.0]),
        "delays_us": ("floatlist", [100.0, 175.0, 250.0, 325.0]),
    },
    "holeburn": {
        **_MODEL_KEYS,
        "b_fields_tesla": ("floatlist", [1.0]),
        "window_mhz": ("float", 0.0),
        "readout_chirp_rate_hz_per_s": ("float", 3.5e10),
        "pump_time_us": ("float", 1000.0),
        "saturation": ("float", 3.0),
        "grid_step_mhz": ("float", 0.02),
        "margin_mhz": ("float", 5.0),
    },
    "fit": {
        "input_csv": ("str", "sweep.csv"),
        "model": ("str", "exp_decay"),
    },
}


def load_config(path: str | None, command: str, overrides: dict | None = None) -> dict:
    """Read and type-check a config file against the command schema."""
    schema = SCHEMAS[command]
    values = {k: default for k, (_, default) in schema.items()}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        for lineno, raw in enumerate(lines, start=1):
            stripped = raw.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, _, text = stripped.partition("=")
            key = key.strip()
            text = text.strip()
            if key not in schema:
                raise ConfigError(f"unknown configuration key {key!r}")
            values[key] = _parse_value(schema[key][0], text)
    for key, val in (overrides or {}).items():
        if key not in schema:
            raise ConfigError(f"unknown configuration key {key!r}")
        values[key] = val
    return values


def resolve_field(values: dict) -> tuple[float, ZeemanParams]:
    """Field and Zeeman law from the config; delta_g overrides b_field."""
    zp = ZeemanParams(
        slope_g=values["slope_g_mhz_per_t"],
        slope_e=values["slope_e_mhz_per_t"],
        width_slope_g=values["width_slope_g_mhz_per_t"],
        width_slope_e=values["width_slope_e_mhz_per_t"],
        residual_width=values["residual_width_mhz"],
    )
    b = values.get("b_field_tesla", "auto")
    dg = values.get("delta_g_mhz", "auto")
    if dg != "auto":
        if zp.slope_g <= 0:
            raise ConfigError("delta_g_mhz needs a positive slope_g_mhz_per_t")
        b = dg / zp.slope_g
    elif b == "auto":
        b = 1.0
    if b < 0:
        raise ConfigError("field must be >= 0")
    return float(b), zp


def build_level_system(values: dict, b_field: float, zp: ZeemanParams) -> LevelSystem:
    dg, de = splittings(b_field, zp)
    return LevelSystem(
        delta_g=dg,
        delta_e=de,
        branching_ratio=values["branching_ratio"],
        t1_optical=values["t1_optical_us"],
        t2_optical=values["t2_optical_us"],
        t2_spin_ground=values["t2_spin_ground_us"],
        t2_spin_excited=values["t2_spin_excited_us"],
    )


def build_ensemble_config(values: dict, b_field: float, zp: ZeemanParams, seed: int | None) -> EnsembleConfig:
    wg, we = spin_widths(b_field, zp)
    width_g = values["spin_width_g_mhz"]
    width_e = values["spin_width_e_mhz"]
    if width_g == "auto":
        width_g = wg
    if width_e == "auto":
        width_e = we
    return EnsembleConfig(
        n_optical=values["n_optical"],
        optical_window=values["optical_window_mhz"],
        n_spin=values["n_spin"],
        spin_width_g=float(width_g),
        spin_width_e=float(width_e),
        sampling_mode=values["sampling_mode"],
        rng_seed=seed if seed is not None else values["rng_seed"],
    )


def build_echo_options(values: dict) -> EchoOptions:
    return EchoOptions(
        detuned_rephasing=values["detuned_rephasing"],
        rephasing_area=values["rephasing_area_rad"],
        probe_rabi=values["probe_rabi_mhz"],
        excitation_duration=values["excitation_duration_us"],
        rephasing_duration=values["rephasing_duration_us"],
        gate=values["gate_us"],
        reference_offset=values["reference_offset_us"],
        lo_amplitude=values["lo_amplitude"],
        dt=values["dt_us"] if values["dt_us"] > 0 else None,
    )


def build_holeburn_config(values: dict) -> HoleburnConfig:
    return HoleburnConfig(
        window=values["window_mhz"],
        readout_chirp_rate=values["readout_chirp_rate_hz_per_s"],
        pump_time=values["pump_time_us"],
        saturation=values["saturation"],
        grid_step=values["grid_step_mhz"],
        margin=values["margin_mhz"],
    )
