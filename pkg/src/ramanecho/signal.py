"""Detected-signal construction: coherent emission sum, heterodyne beat, FFT, gating."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .physmodel import TWO_PI, InvalidInputError, LevelSystem
from .propagator import EmissionSegment, Trajectory
from .pulsekit import ToneSpec


class SignalError(ValueError):
    """Raised for mismatched grids or out-of-range gates."""


@dataclass(frozen=True)
class SignalTrace:
    """Uniformly sampled trace; complex analytic signal or real intensity."""

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise SignalError("dt must be > 0")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.samples)) * self.dt

    @property
    def end(self) -> float:
        return self.t0 + (len(self.samples) - 1) * self.dt


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    magnitudes: np.ndarray
    window: str
    n_samples: int

    def __post_init__(self):
        if len(self.freqs) != len(self.magnitudes):
            raise SignalError("freqs and magnitudes must have matching length")


def emitted_field(
    trajectories: list[Trajectory],
    weights: list[float],
    sys: LevelSystem,
    window_index: int = 0,
) -> SignalTrace:
    """Coherent ensemble emission: E(t) = i * sum_k w_k * sum_legs d * rho_eg.

    The per-trajectory emission records already carry the dipole-weighted
    optical coherence sum; this adds the weights and the radiation phase.
    """
    if len(trajectories) != len(weights):
        raise SignalError("one weight per trajectory required")
    if not trajectories:
        raise SignalError("no trajectories given")
    segs = []
    for traj in trajectories:
        if window_index >= len(traj.emissions):
            raise SignalError("trajectory lacks the requested detection window")
        segs.append(traj.emissions[window_index])
    ref = segs[0]
    total = np.zeros(len(ref.samples), dtype=complex)
    for seg, w in zip(segs, weights):
        if (
            abs(seg.t0 - ref.t0) > 1e-9
            or abs(seg.dt - ref.dt) > 1e-12
            or len(seg.samples) != len(ref.samples)
        ):
            raise SignalError("emission records sit on mismatched sampling grids")
        total += w * seg.samples
    return SignalTrace(ref.t0, ref.dt, 1j * total)


def emission_to_field(segment: EmissionSegment) -> SignalTrace:
    """Emitted field from an already weight-summed ensemble emission record."""
    return SignalTrace(segment.t0, segment.dt, 1j * segment.samples)


def heterodyne(
    field: SignalTrace, probe_tone: ToneSpec, lo_amplitude: float = 1.0
) -> SignalTrace:
    """Photodiode intensity of the emitted field beating against the probe.

    I(t) = |lo * exp(i(2 pi f t + phase)) + E(t)|^2 with the mean removed.
    The local-oscillator amplitude is an arbitrary detection unit,
    independent of the probe Rabi frequency.
    """
    t = field.times
    lo = lo_amplitude * np.exp(1j * (TWO_PI * probe_tone.offset * t + probe_tone.phase))
    intensity = np.abs(lo + field.samples) ** 2
    intensity -= intensity.mean()
    return SignalTrace(field.t0, field.dt, intensity)


def spectrum(trace: SignalTrace, window: str = "hann") -> Spectrum:
    """Positive-frequency magnitude spectrum, resolution 1/span."""
    x = np.asarray(trace.samples, dtype=float)
    n = len(x)
    if n < 2:
        raise SignalError("spectrum needs at least 2 samples")
    if window == "hann":
        x = x * np.hanning(n)
    elif window != "rect":
        raise SignalError(f"unknown window {window!r}")
    mags = np.abs(np.fft.rfft(x)) / n
    freqs = np.fft.rfftfreq(n, trace.dt)
    return Spectrum(freqs, mags, window, n)


def spectral_power(spec: Spectrum) -> float:
    """Mean power implied by the spectrum (Parseval partner of mean |x|^2)."""
    c = np.full(len(spec.magnitudes), 2.0)
    c[0] = 1.0
    if spec.n_samples % 2 == 0:
        c[-1] = 1.0
    return float(np.sum(c * spec.magnitudes**2))


def peak_frequency(spec: Spectrum, fmin: float | None = None, fmax: float | None = None) -> float:
    """Frequency of the largest magnitude bin, optionally band-restricted."""
    mask = np.ones(len(spec.freqs), dtype=bool)
    if fmin is not None:
        mask &= spec.freqs >= fmin
    if fmax is not None:
        mask &= spec.freqs <= fmax
    if not mask.any():
        raise SignalError("empty frequency band")
    idx = np.argmax(np.where(mask, spec.magnitudes, -1.0))
    return float(spec.freqs[idx])


def gated_component(
    trace: SignalTrace, center: float, beat: float, gate: float
) -> complex:
    """Complex Fourier component at `beat` over a gate centered on `center`.

    The phase reference exp(-i 2 pi beat t) uses absolute time, so a steady
    beat contributes the same complex value in every gate and cancels under
    gate-to-gate subtraction.
    """
    lo, hi = center - 0.5 * gate, center + 0.5 * gate
    if lo < trace.t0 - 1e-9 or hi > trace.end + 1e-9:
        raise SignalError(
            f"gate [{lo:.3g}, {hi:.3g}] us lies outside the trace "
            f"[{trace.t0:.3g}, {trace.end:.3g}] us"
        )
    t = trace.times
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    count = int(sel.sum())
    if count < 2:
        raise SignalError("gate contains fewer than 2 samples")
    phase = np.exp(-1j * TWO_PI * beat * t[sel])
    return complex(2.0 / count * np.sum(trace.samples[sel] * phase))


def echo_amplitude(
    trace: SignalTrace, expected_time: float, expected_beat: float, gate: float
) -> float:
    """Magnitude of the expected beat component over a gate at the echo time."""
    return abs(gated_component(trace, expected_time, expected_beat, gate))


def subtracted_echo_amplitude(
    trace: SignalTrace,
    expected_time: float,
    expected_beat: float,
    gate: float,
    reference_offset: float,
) -> complex:
    """Echo component minus a reference gate, removing steady beat backgrounds."""
    on = gated_component(trace, expected_time, expected_beat, gate)
    ref = gated_component(trace, expected_time + reference_offset, expected_beat, gate)
    return on - ref


def segment_trace(trace: SignalTrace, t_lo: float, t_hi: float) -> SignalTrace:
    """Slice a trace to [t_lo, t_hi] (inclusive sample range)."""
    t = trace.times
    sel = (t >= t_lo - 1e-12) & (t <= t_hi + 1e-12)
    if sel.sum() < 2:
        raise SignalError("segment contains fewer than 2 samples")
    first = int(np.argmax(sel))
    return SignalTrace(float(t[first]), trace.dt, trace.samples[sel].copy())


def add_noise(trace: SignalTrace, sigma: float, seed: int) -> SignalTrace:
    """Additive seeded Gaussian noise (detection-noise robustness tests)."""
    if sigma < 0:
        raise InvalidInputError("sigma must be >= 0")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, len(trace.samples))
    if np.iscomplexobj(trace.samples):
        noise = noise + 1j * rng.normal(0.0, sigma, len(trace.samples))
    return SignalTrace(trace.t0, trace.dt, trace.samples + noise)


def write_trace_csv(trace: SignalTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t_us,re,im\n")
        for t, v in zip(trace.times, trace.samples):
            c = complex(v)
            fh.write(f"{t!r},{c.real!r},{c.imag!r}\n")


def write_spectrum_csv(spec: Spectrum, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("f_MHz,mag\n")
        for f, m in zip(spec.freqs, spec.magnitudes):
            fh.write(f"{float(f)!r},{float(m)!r}\n")
