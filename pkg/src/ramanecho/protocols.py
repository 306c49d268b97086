"""End-to-end experiment drivers: hole-burning scans, Raman-echo sweeps,
photon-echo suppression controls, excited-state echoes, and lifetime tables."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from . import signal as sig
from .analysis import FitResult, fit_exp_decay
from .physmodel import (
    AtomClass,
    EnsembleConfig,
    InvalidConfigurationError,
    InvalidInputError,
    LevelSystem,
    ZeemanParams,
    dipole_amplitudes,
    sample_ensemble,
    spin_widths,
    splittings,
)
from .propagator import (
    IntegrityReport,
    PropagationOptions,
    prepared_state,
    run_ensemble,
)
from .pulsekit import (
    Diagnostic,
    HardwareLimits,
    ToneSpec,
    excited_raman_sequence,
    standard_raman_sequence,
    validate,
)

SQRT_HZ_TO_MHZ = 1e-6


class ProtocolError(RuntimeError):
    """Raised when a protocol precondition fails."""


# ---------------------------------------------------------------------------
# hole burning


@dataclass(frozen=True)
class HoleburnConfig:
    """Rate-equation scan settings.

    window: burn half-width (MHz); 0 means a monochromatic burn.
    readout_chirp_rate: Hz/s, sets the resolution floor sqrt(rate).
    pump_time: total burn duration (us); saturation: pump rate in units of
    the optical decay rate on a strong leg.
    """

    window: float = 0.0
    readout_chirp_rate: float = 3.5e10
    pump_time: float = 1000.0
    saturation: float = 3.0
    grid_step: float = 0.02
    margin: float = 5.0


@dataclass(frozen=True)
class SpectralFeature:
    center: float
    width: float
    polarity: str  # "hole" or "antihole"
    amplitude: float


@dataclass
class HoleburnResult:
    detunings: np.ndarray
    transmission_change: np.ndarray
    features: list[SpectralFeature]
    metadata: dict


def readout_resolution(chirp_rate: float) -> float:
    """Frequency resolution (MHz FWHM) of a chirped readout at `chirp_rate` Hz/s."""
    if chirp_rate <= 0:
        raise InvalidInputError("chirp rate must be > 0")
    return math.sqrt(chirp_rate) * SQRT_HZ_TO_MHZ


_TRANSITIONS = ((0, 0), (0, 1), (1, 0), (1, 1))  # (g index, e index)


def _transition_shift(gi: int, ej: int, dg: float, de: float):
    """Offset of transition (g_i -> e_j) from the class's g1->e1 line.

    Returns (base, dg coefficient, de coefficient) for splittings (dg, de).
    """
    base = 0.0
    cg = 0.0
    ce = 0.0
    if ej == 1:
        base += de
        ce += 1.0
    if gi == 1:
        base -= dg
        cg -= 1.0
    return base, cg, ce


def _pump_final_state(gi: int, ej: int, sys: LevelSystem, cfg: HoleburnConfig) -> np.ndarray:
    """Populations after pumping transition (g_i, e_j) for cfg.pump_time."""
    r = sys.branching_ratio
    if math.isinf(sys.t1_optical):
        raise InvalidConfigurationError("hole burning needs a finite t1_optical")
    gamma = 1.0 / sys.t1_optical
    d2 = dipole_amplitudes(r)[gi, ej] ** 2
    w = cfg.saturation * gamma * d2
    branch = np.array([[1.0, r], [r, 1.0]]) / (1.0 + r)
    m = np.zeros((4, 4))
    m[gi, gi] -= w
    m[gi, 2 + ej] += w
    m[2 + ej, gi] += w
    m[2 + ej, 2 + ej] -= w
    for ek in range(2):
        m[2 + ek, 2 + ek] -= gamma
        for gl in range(2):
            m[gl, 2 + ek] += gamma * branch[ek, gl]
    n0 = np.array([0.5, 0.5, 0.0, 0.0])
    return expm(m * cfg.pump_time) @ n0


def hole_burning_scan(
    b_field: float,
    zp: ZeemanParams,
    sys: LevelSystem,
    cfg: HoleburnConfig | None = None,
) -> HoleburnResult:
    """Steady-state hole/antihole spectrum after burning at zero detuning.

    Each of the four transitions defines a pumped spectral-class family whose
    populations follow a rate equation (pump proportional to the squared
    dipole amplitude, relaxation through t1).  Readout absorption on each
    transition is proportional to its ground-sublevel population (weak-probe
    picture), so depleted or parked population shows as a hole and
    transferred population as an antihole.  Every (pump, readout) transition
    pair contributes a Gaussian feature whose width is the quadrature sum of
    the readout resolution and the spin-class spreads entering its center.
    Transmission change is positive for holes.
    """
    cfg = cfg or HoleburnConfig()
    dg, de = splittings(b_field, zp)
    wg, we = spin_widths(b_field, zp)
    sys = replace(sys, delta_g=dg, delta_e=de)
    if cfg.window > 0 and cfg.window >= dg - de:
        raise ProtocolError("preparation window must be smaller than delta_g - delta_e")
    res = readout_resolution(cfg.readout_chirp_rate)
    # a finite burn window spreads the class selection uniformly over 2*window
    window_var = (2.0 * cfg.window) ** 2 / 12.0
    d2 = dipole_amplitudes(sys.branching_ratio) ** 2

    contributions: dict[tuple[float, float], float] = {}
    for gi, ej in _TRANSITIONS:
        if d2[gi, ej] == 0.0:
            continue
        n_final = _pump_final_state(gi, ej, sys, cfg)
        base_p, cg_p, ce_p = _transition_shift(gi, ej, dg, de)
        for gr, er in _TRANSITIONS:
            if d2[gr, er] == 0.0:
                continue
            base_r, cg_r, ce_r = _transition_shift(gr, er, dg, de)
            center = base_r - base_p
            cg = cg_r - cg_p
            ce = ce_r - ce_p
            width = math.sqrt(res**2 + (cg * wg) ** 2 + (ce * we) ** 2 + window_var)
            delta_abs = d2[gr, er] * (n_final[gr] - 0.5)
            key = (round(center, 9), round(width, 12))
            contributions[key] = contributions.get(key, 0.0) - delta_abs

    span = dg + de + cfg.margin
    grid = np.arange(-span, span + 0.5 * cfg.grid_step, cfg.grid_step)
    curve = np.zeros_like(grid)
    sigma_of = lambda w: w / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    for (center, width), amp in contributions.items():
        s = sigma_of(width)
        curve += amp / (s * math.sqrt(2.0 * math.pi)) * np.exp(
            -0.5 * ((grid - center) / s) ** 2
        )

    features = []
    peak = max(abs(a) for a in contributions.values()) if contributions else 0.0
    for (center, width), amp in sorted(contributions.items()):
        if abs(amp) < 1e-9 * peak:
            continue
        measured = _measure_feature_width(grid, curve, center, math.copysign(1.0, amp), width)
        features.append(
            SpectralFeature(
                center=center,
                width=measured if measured is not None else width,
                polarity="hole" if amp > 0 else "antihole",
                amplitude=amp,
            )
        )

    meta = {
        "b_field_tesla": b_field,
        "delta_g_mhz": dg,
        "delta_e_mhz": de,
        "spin_width_g_mhz": wg,
        "spin_width_e_mhz": we,
        "readout_resolution_mhz": res,
        "pump_time_us": cfg.pump_time,
        "saturation": cfg.saturation,
        "burn_window_mhz": cfg.window,
    }
    return HoleburnResult(grid, curve, features, meta)


def _measure_feature_width(grid, curve, center, sign, guess) -> float | None:
    """Half-maximum full width of the feature at `center`, by interpolation."""
    half_span = max(4.0 * guess, 10 * (grid[1] - grid[0]))
    sel = (grid >= center - half_span) & (grid <= center + half_span)
    if sel.sum() < 5:
        return None
    x = grid[sel]
    y = sign * curve[sel]
    i_pk = int(np.argmax(y))
    peak = y[i_pk]
    if peak <= 0:
        return None
    half = 0.5 * peak
    lo = None
    for i in range(i_pk, 0, -1):
        if y[i - 1] <= half <= y[i]:
            frac = (half - y[i - 1]) / (y[i] - y[i - 1])
            lo = x[i - 1] + frac * (x[i] - x[i - 1])
            break
    hi = None
    for i in range(i_pk, len(y) - 1):
        if y[i + 1] <= half <= y[i]:
            frac = (y[i] - half) / (y[i] - y[i + 1])
            hi = x[i] + frac * (x[i + 1] - x[i])
            break
    if lo is None or hi is None:
        return None
    return hi - lo


def feature_width_at(result: HoleburnResult, center: float, tol: float = 2.0) -> float:
    """Width of the feature nearest to `center` (within tol MHz)."""
    best = None
    for f in result.features:
        d = abs(f.center - center)
        if d <= tol and (best is None or d < abs(best.center - center)):
            best = f
    if best is None:
        raise ProtocolError(f"no feature found near {center} MHz")
    return best.width


# ---------------------------------------------------------------------------
# echo protocols


@dataclass(frozen=True)
class EchoOptions:
    """Sequence and detection knobs shared by the echo protocols.

    noise_sigma adds seeded Gaussian detection noise to the intensity
    record (absolute units of the local-oscillator intensity); zero keeps
    the detection noiseless.
    """

    detuned_rephasing: bool = True
    rephasing_area: float = math.pi
    probe_rabi: float = 1e-4
    excitation_duration: float = 10.0
    excitation_rabi: float | None = None
    rephasing_duration: float = 10.0
    rephasing_rabi: float | None = None
    gate: float = 16.0
    reference_offset: float = 40.0
    lo_amplitude: float = 1.0
    dt: float | None = None
    sample_dt: float | None = None
    noise_sigma: float = 0.0
    noise_seed: int = 0


@dataclass(frozen=True)
class EchoPoint:
    t_delay: float
    amplitude: float
    beat: float


@dataclass
class EchoSweepResult:
    rows: list[EchoPoint]
    metadata: dict


@dataclass
class PhotonEchoResult:
    raman_amplitude: float
    contamination_amplitude: float
    metadata: dict


@dataclass
class T2Row:
    delta_g: float
    t2: float
    t2_stderr: float
    warnings: list[str]


@dataclass
class T2Table:
    rows: list[T2Row]
    metadata: dict


def _build_sequence(
    sys: LevelSystem,
    t_delay: float,
    opts: EchoOptions,
    excited: bool,
    rephasing_phase: float = 0.0,
    rephasing_phase2: float = 0.0,
):
    probe_tail = opts.reference_offset + opts.gate + 8.0
    kwargs = dict(
        detuned_rephasing=opts.detuned_rephasing,
        rephasing_area=opts.rephasing_area,
        probe_rabi=opts.probe_rabi,
        excitation_duration=opts.excitation_duration,
        excitation_rabi=opts.excitation_rabi,
        rephasing_duration=opts.rephasing_duration,
        rephasing_rabi=opts.rephasing_rabi,
        probe_tail=probe_tail,
        rephasing_phase=rephasing_phase,
        rephasing_phase2=rephasing_phase2,
    )
    if excited:
        return excited_raman_sequence(sys, t_delay, **kwargs)
    return standard_raman_sequence(sys, t_delay, include_pump=False, **kwargs)


@dataclass
class _EchoRun:
    echo_component: complex
    reference_component: complex
    beat: float
    intensity: sig.SignalTrace
    integrity: IntegrityReport

    @property
    def amplitude(self) -> float:
        # balanced rephasing conjugates every class, so the gated component
        # at 2T is the echo itself; the off-echo reference rides along as a
        # background diagnostic only
        return abs(self.echo_component)


def _echo_run(
    sys: LevelSystem,
    atoms: list[AtomClass],
    t_delay: float,
    opts: EchoOptions,
    excited: bool = False,
    disable_spin_storage: bool = False,
) -> _EchoRun:
    """One delay point with four-step phase cycling of the rephasing pulse.

    Averaging the runs over both rephasing tone phases in {0, pi} cancels
    every signal of odd order in either tone (population-born spin
    coherence, one-photon free decays) while leaving the Raman echo and the
    two-pulse photon echo, which are second order, untouched.
    """
    prop_opts = PropagationOptions(
        sample_dt=opts.sample_dt, disable_spin_storage=disable_spin_storage
    )
    intensity = None
    integrity = IntegrityReport()
    if opts.rephasing_area > 0:
        phases = ((0.0, 0.0), (math.pi, 0.0), (0.0, math.pi), (math.pi, math.pi))
    else:
        phases = ((0.0, 0.0),)
    for phase, phase2 in phases:
        seq = _build_sequence(
            sys, t_delay, opts, excited, rephasing_phase=phase, rephasing_phase2=phase2
        )
        result = run_ensemble(
            atoms, sys, seq, dt=opts.dt, rho0=prepared_state(), options=prop_opts
        )
        integrity.merge(result.integrity)
        field = sig.emission_to_field(result.emissions[0])
        step = sig.heterodyne(field, ToneSpec(0.0, opts.probe_rabi), opts.lo_amplitude)
        if intensity is None:
            intensity = sig.SignalTrace(step.t0, step.dt, step.samples / len(phases))
        else:
            intensity = sig.SignalTrace(
                intensity.t0, intensity.dt, intensity.samples + step.samples / len(phases)
            )
    if opts.noise_sigma > 0:
        noise_seed = (
            opts.noise_seed * 1000003
            + int(round(1000.0 * t_delay))
            + (1 if excited else 0)
            + (500000 if disable_spin_storage else 0)
        )
        intensity = sig.add_noise(intensity, opts.noise_sigma, noise_seed)
    beat_nominal = sys.delta_e if excited else sys.delta_g
    t_echo = 2.0 * t_delay
    comp = sig.gated_component(intensity, t_echo, beat_nominal, opts.gate)
    ref = sig.gated_component(
        intensity, t_echo + opts.reference_offset, beat_nominal, opts.gate
    )
    seg = sig.segment_trace(
        intensity, t_echo - 1.25 * opts.gate, t_echo + 1.25 * opts.gate
    )
    spec = sig.spectrum(seg, "hann")
    halfband = min(2.0, 0.75 * (sys.delta_g - sys.delta_e if excited else sys.delta_e))
    halfband = max(halfband, 4.0 * (spec.freqs[1] - spec.freqs[0]))
    beat = sig.peak_frequency(spec, beat_nominal - halfband, beat_nominal + halfband)
    return _EchoRun(comp, ref, beat, intensity, integrity)


def _check_delays(t_delays) -> list[float]:
    delays = [float(t) for t in t_delays]
    if len(delays) < 3:
        raise ProtocolError("echo sweeps need at least 3 delays")
    if any(b <= a for a, b in zip(delays, delays[1:])):
        raise ProtocolError("delays must be strictly increasing")
    return delays


def _sequence_diagnostics(sys, t_delay, opts, excited) -> list[Diagnostic]:
    seq = _build_sequence(sys, t_delay, opts, excited)
    diags = validate(seq, HardwareLimits(seq.bandwidth_limit))
    errors = [d for d in diags if d.level == "ERROR"]
    if errors:
        raise ProtocolError("; ".join(d.format() for d in errors))
    return diags


def raman_echo_sweep(
    sys: LevelSystem,
    ensemble_cfg: EnsembleConfig,
    t_delays,
    opts: EchoOptions | None = None,
) -> EchoSweepResult:
    """Ground-spin echo amplitude versus rephasing delay.

    For each delay T the full excitation / rephasing / probe sequence runs
    over the ensemble starting from the idealized pumped state; the row
    carries the raw gated amplitude at 2T (steady-background subtracted) and
    the measured beat frequency.
    """
    opts = opts or EchoOptions()
    delays = _check_delays(t_delays)
    atoms = sample_ensemble(ensemble_cfg)
    diags = _sequence_diagnostics(sys, delays[-1], opts, excited=False)
    integrity = IntegrityReport()
    rows = []
    for t_delay in delays:
        run = _echo_run(sys, atoms, t_delay, opts, excited=False)
        integrity.merge(run.integrity)
        rows.append(EchoPoint(t_delay, run.amplitude, run.beat))
    meta = {
        "protocol": "raman_echo_sweep",
        "delta_g_mhz": sys.delta_g,
        "delta_e_mhz": sys.delta_e,
        "n_atoms": len(atoms),
        "diagnostics": [d.format() for d in diags],
        "integrity": integrity.as_dict(),
        "options": asdict(opts),
        "ensemble": asdict(ensemble_cfg),
    }
    return EchoSweepResult(rows, meta)


def excited_state_echo(
    sys: LevelSystem,
    ensemble_cfg: EnsembleConfig,
    t_delays,
    opts: EchoOptions | None = None,
) -> EchoSweepResult:
    """Excited-pair echo sweep: V-type two-photon drive, beat at delta_e."""
    opts = opts or EchoOptions()
    delays = _check_delays(t_delays)
    atoms = sample_ensemble(ensemble_cfg)
    diags = _sequence_diagnostics(sys, delays[-1], opts, excited=True)
    integrity = IntegrityReport()
    rows = []
    for t_delay in delays:
        run = _echo_run(sys, atoms, t_delay, opts, excited=True)
        integrity.merge(run.integrity)
        rows.append(EchoPoint(t_delay, run.amplitude, run.beat))
    meta = {
        "protocol": "excited_state_echo",
        "delta_g_mhz": sys.delta_g,
        "delta_e_mhz": sys.delta_e,
        "n_atoms": len(atoms),
        "diagnostics": [d.format() for d in diags],
        "integrity": integrity.as_dict(),
        "options": asdict(opts),
        "ensemble": asdict(ensemble_cfg),
    }
    return EchoSweepResult(rows, meta)


def photon_echo_control(
    sys: LevelSystem,
    ensemble_cfg: EnsembleConfig,
    t_delay: float,
    detuned: bool,
    opts: EchoOptions | None = None,
) -> PhotonEchoResult:
    """Separate the Raman echo from the two-pulse photon-echo contamination.

    The optical pathway is isolated by a twin run with spin-coherence
    storage disabled (the pair coherences are zeroed at every dark-interval
    start); its gated component is subtracted coherently from the full run.
    """
    opts = replace(opts or EchoOptions(), detuned_rephasing=detuned)
    atoms = sample_ensemble(ensemble_cfg)
    full = _echo_run(sys, atoms, t_delay, opts, excited=False)
    bare = _echo_run(
        sys, atoms, t_delay, opts, excited=False, disable_spin_storage=True
    )
    contamination = bare.echo_component - bare.reference_component
    raman = (full.echo_component - full.reference_component) - contamination
    integrity = IntegrityReport()
    integrity.merge(full.integrity)
    integrity.merge(bare.integrity)
    meta = {
        "protocol": "photon_echo_control",
        "detuned": detuned,
        "t_delay_us": t_delay,
        "delta_g_mhz": sys.delta_g,
        "delta_e_mhz": sys.delta_e,
        "n_atoms": len(atoms),
        "integrity": integrity.as_dict(),
        "options": asdict(opts),
        "ensemble": asdict(ensemble_cfg),
    }
    return PhotonEchoResult(abs(raman), abs(contamination), meta)


def echo_gate_scan(
    sys: LevelSystem,
    ensemble_cfg: EnsembleConfig,
    t_delay: float,
    opts: EchoOptions | None = None,
    scan_halfwidth: float = 12.0,
    scan_step: float = 0.5,
    excited: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Subtracted gated amplitude versus gate center around the echo time."""
    opts = opts or EchoOptions()
    atoms = sample_ensemble(ensemble_cfg)
    run = _echo_run(sys, atoms, t_delay, opts, excited=excited)
    beat_nominal = sys.delta_e if excited else sys.delta_g
    t_echo = 2.0 * t_delay
    centers = np.arange(t_echo - scan_halfwidth, t_echo + scan_halfwidth + 1e-9, scan_step)
    amps = np.array(
        [
            abs(sig.gated_component(run.intensity, c, beat_nominal, opts.gate))
            for c in centers
        ]
    )
    return centers, amps


def t2_vs_splitting(
    sys: LevelSystem,
    zp: ZeemanParams,
    delta_gs,
    ensemble_cfg: EnsembleConfig,
    t_delays,
    opts: EchoOptions | None = None,
) -> T2Table:
    """Fitted echo-decay constant for each ground splitting.

    The field follows from delta_g through the linear law; the ground spin
    width scales accordingly while the coherence-lifetime inputs stay fixed
    across splittings.  Bandwidth warnings ride along in each row.
    """
    opts = opts or EchoOptions()
    rows = []
    sweeps = []
    for delta_g in delta_gs:
        b = delta_g / zp.slope_g
        dg, de = splittings(b, zp)
        wg, _ = spin_widths(b, zp)
        sys_i = replace(sys, delta_g=dg, delta_e=de)
        cfg_i = replace(ensemble_cfg, spin_width_g=wg)
        sweep = raman_echo_sweep(sys_i, cfg_i, t_delays, opts)
        fit = fit_exp_decay([(p.t_delay, p.amplitude) for p in sweep.rows])
        warnings = [d for d in sweep.metadata["diagnostics"] if d.startswith("WARN")]
        rows.append(T2Row(float(delta_g), fit.value("t2"), fit.error("t2"), warnings))
        sweeps.append(sweep)
    meta = {
        "protocol": "t2_vs_splitting",
        "delta_gs_mhz": [float(d) for d in delta_gs],
        "t_delays_us": [float(t) for t in t_delays],
        "sweeps": [s.metadata for s in sweeps],
    }
    return T2Table(rows, meta)


def calibrate_rephasing_duration(
    sys: LevelSystem,
    detuned: bool = False,
    rabi: float | None = None,
    base_duration: float = 10.0,
    scan: float = 0.3,
    n_scan: int = 31,
) -> float:
    """Numerically locate the rephasing duration maximizing coherence conjugation.

    Scans around one full bright-state cycle and measures the coefficient
    beta mapping rho_g1g2 -> beta * rho_g2g1 on the nominal atom (decay
    disabled), refining the scan maximum with a parabola.  Cross-checks the
    analytic equal-Rabi construction.
    """
    from .propagator import run_sequence
    from .pulsekit import Pulse, Sequence

    sys_nodecay = replace(
        sys,
        t1_optical=math.inf,
        t2_optical=math.inf,
        t2_spin_ground=math.inf,
        t2_spin_excited=math.inf,
    )
    # t2_optical <= 2*t1 and t2_spin_excited <= t1 hold with everything infinite
    rabi = rabi if rabi is not None else 1.0 / (base_duration * math.sqrt(1.0 + sys.branching_ratio))
    shift = sys.delta_e if detuned else 0.0
    atom = AtomClass(0.0, 0.0, 0.0, 1.0)

    def conjugation(duration: float) -> float:
        tones = (ToneSpec(shift, rabi), ToneSpec(shift - sys.delta_g, rabi))
        seq = Sequence((Pulse(0.0, duration, tones=tones),))
        outs = []
        for phase in (1.0, 1.0j):
            rho = np.zeros((4, 4), dtype=complex)
            rho[0, 0] = rho[1, 1] = 0.5
            rho[0, 1] = 0.5 * phase
            rho[1, 0] = np.conj(rho[0, 1])
            traj = run_sequence(atom, sys_nodecay, seq, rho0=rho)
            outs.append(traj.states[-1][0, 1])
        beta = outs[0] + 1j * outs[1]
        return abs(beta)

    durations = np.linspace(base_duration * (1 - scan), base_duration * (1 + scan), n_scan)
    vals = np.array([conjugation(d) for d in durations])
    i = int(np.argmax(vals))
    if 0 < i < len(durations) - 1:
        y0, y1, y2 = vals[i - 1], vals[i], vals[i + 1]
        denom = y0 - 2 * y1 + y2
        if abs(denom) > 1e-15:
            offset = 0.5 * (y0 - y2) / denom
            return float(durations[i] + offset * (durations[1] - durations[0]))
    return float(durations[i])


# ---------------------------------------------------------------------------
# result files


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_sweep_csv(result: EchoSweepResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t_delay_us,amplitude,beat_MHz\n")
        for p in result.rows:
            fh.write(f"{_fmt(p.t_delay)},{_fmt(p.amplitude)},{_fmt(p.beat)}\n")


def write_fit_csv(fit: FitResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("amplitude,t2_us,amplitude_stderr,t2_stderr,residual_norm,n_points\n")
        fh.write(
            ",".join(
                [
                    _fmt(fit.value("amplitude")),
                    _fmt(fit.value("t2")),
                    _fmt(fit.error("amplitude")),
                    _fmt(fit.error("t2")),
                    _fmt(fit.residual_norm),
                    str(fit.n_points),
                ]
            )
            + "\n"
        )


def write_holeburn_csv(result: HoleburnResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("detuning_MHz,transmission_change\n")
        for x, y in zip(result.detunings, result.transmission_change):
            fh.write(f"{_fmt(float(x))},{_fmt(float(y))}\n")


def write_features_csv(result: HoleburnResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("center_MHz,width_MHz,polarity\n")
        for f in result.features:
            fh.write(f"{_fmt(f.center)},{_fmt(f.width)},{f.polarity}\n")


def write_t2_table_csv(table: T2Table, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("delta_g_MHz,t2_us,t2_stderr_us,warnings\n")
        for row in table.rows:
            warn = ";".join(row.warnings).replace(",", " ")
            fh.write(f"{_fmt(row.delta_g)},{_fmt(row.t2)},{_fmt(row.t2_stderr)},{warn}\n")


def write_manifest(path, entries: dict, diagnostics: list[str] | None = None) -> None:
    """Flat key = value manifest sufficient to re-run the job exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(entries):
            fh.write(f"{key} = {_fmt(entries[key])}\n")
        for d in diagnostics or []:
            fh.write(f"diagnostic = {d}\n")
