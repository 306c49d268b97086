"""Pulses, timed sequences, the text sequence format, and canonical sequence builders.

Sequence file format (UTF-8 text), one directive per line:

    seq v1 [bw <MHz>]
    pulse <start_us> <dur_us> tones <offset_MHz>:<rabi_MHz>:<phase_rad>[,...]
    pulse <start_us> <dur_us> chirp <center_MHz> <rate_Hz_per_s> <rabi_MHz>
    detect <start_us> <dur_us>

Unknown directives are rejected.  Floats serialize via repr so that
parse(serialize(seq)) is structurally exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .physmodel import InvalidInputError, LevelSystem

#: chirp rates are given in Hz/s; times are microseconds and freqs MHz
HZ_PER_S_TO_MHZ_PER_US = 1e-12

DEFAULT_BANDWIDTH_LIMIT = 100.0


class SequenceError(ValueError):
    """Structural error in a pulse sequence."""


class ParseError(SequenceError):
    """Syntax or semantic error in a sequence document."""

    def __init__(
        self,
        message: str,
        line: int | None = None,
        column: int | None = None,
        code: str = "syntax",
    ):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column
        self.code = code


@dataclass(frozen=True)
class ToneSpec:
    """One frequency component: offset from the frame reference, peak Rabi, phase."""

    offset: float
    rabi: float
    phase: float = 0.0

    def __post_init__(self):
        if self.rabi < 0:
            raise InvalidInputError("rabi must be >= 0")


@dataclass(frozen=True)
class ChirpSpec:
    """Linear frequency sweep centered on `center` at `rate` Hz/s."""

    center: float
    rate: float
    rabi: float

    def __post_init__(self):
        if self.rabi < 0:
            raise InvalidInputError("rabi must be >= 0")


@dataclass(frozen=True)
class Pulse:
    """A timed field segment: rectangular multi-tone or a chirp."""

    start: float
    duration: float
    tones: tuple[ToneSpec, ...] = ()
    chirp: ChirpSpec | None = None

    def __post_init__(self):
        if self.duration <= 0:
            raise SequenceError("pulse duration must be > 0")
        if self.chirp is None and len(self.tones) == 0:
            raise SequenceError("rectangular pulse needs at least one tone")
        if self.chirp is not None and len(self.tones) > 0:
            raise SequenceError("pulse is either tones or chirp, not both")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def offset_span(self) -> tuple[float, float]:
        """(min, max) instantaneous tone offset over the pulse."""
        if self.chirp is not None:
            half = 0.5 * abs(self.chirp.rate) * HZ_PER_S_TO_MHZ_PER_US * self.duration
            return self.chirp.center - half, self.chirp.center + half
        offs = [t.offset for t in self.tones]
        return min(offs), max(offs)


@dataclass(frozen=True)
class Sequence:
    """Time-ordered, non-overlapping pulses plus detection windows."""

    pulses: tuple[Pulse, ...] = ()
    detection_windows: tuple[tuple[float, float], ...] = ()
    bandwidth_limit: float = DEFAULT_BANDWIDTH_LIMIT

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))
        object.__setattr__(self, "detection_windows", tuple(self.detection_windows))
        if self.bandwidth_limit <= 0:
            raise SequenceError("bandwidth_limit must be > 0")
        prev = None
        for i, p in enumerate(self.pulses):
            if prev is not None and p.start < prev.start:
                raise SequenceError(f"pulses not sorted by start time (pulse {i})")
            if prev is not None and p.start < prev.end - 1e-12:
                raise SequenceError(f"pulses {i - 1} and {i} overlap in time")
            prev = p
        for start, dur in self.detection_windows:
            if dur <= 0:
                raise SequenceError("detection window duration must be > 0")


@dataclass(frozen=True)
class HardwareLimits:
    """Usable modulation band of the frequency-shifting chain."""

    max_offset_span: float = DEFAULT_BANDWIDTH_LIMIT

    def __post_init__(self):
        if self.max_offset_span <= 0:
            raise InvalidInputError("max_offset_span must be > 0")


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "ERROR" or "WARN"
    code: str
    message: str

    def format(self) -> str:
        return f"{self.level} {self.code} {self.message}"


def validate(seq: Sequence, hw: HardwareLimits) -> list[Diagnostic]:
    """Bandwidth diagnostics: per-pulse span errors, sequence-wide span warnings."""
    diags: list[Diagnostic] = []
    lo = math.inf
    hi = -math.inf
    for i, p in enumerate(seq.pulses):
        pmin, pmax = p.offset_span()
        lo = min(lo, pmin)
        hi = max(hi, pmax)
        if pmax - pmin > hw.max_offset_span + 1e-12:
            diags.append(
                Diagnostic(
                    "ERROR",
                    "bandwidth",
                    f"pulse {i} tone span {pmax - pmin:.6g} MHz exceeds "
                    f"{hw.max_offset_span:.6g} MHz",
                )
            )
    if seq.pulses and hi - lo > hw.max_offset_span + 1e-12:
        diags.append(
            Diagnostic(
                "WARN",
                "bandwidth",
                f"sequence offset span {hi - lo:.6g} MHz exceeds "
                f"{hw.max_offset_span:.6g} MHz",
            )
        )
    return diags


# ---------------------------------------------------------------------------
# text format


def serialize_sequence(seq: Sequence) -> str:
    lines = []
    if seq.bandwidth_limit == DEFAULT_BANDWIDTH_LIMIT:
        lines.append("seq v1")
    else:
        lines.append(f"seq v1 bw {seq.bandwidth_limit!r}")
    for p in seq.pulses:
        if p.chirp is not None:
            c = p.chirp
            lines.append(
                f"pulse {p.start!r} {p.duration!r} chirp {c.center!r} {c.rate!r} {c.rabi!r}"
            )
        else:
            tones = ",".join(f"{t.offset!r}:{t.rabi!r}:{t.phase!r}" for t in p.tones)
            lines.append(f"pulse {p.start!r} {p.duration!r} tones {tones}")
    for start, dur in seq.detection_windows:
        lines.append(f"detect {start!r} {dur!r}")
    return "\n".join(lines) + "\n"


def _parse_float(token: str, line: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"invalid {what} {token!r}", line) from None


def parse_sequence(text: str) -> Sequence:
    """Parse a sequence document; raises ParseError with line context."""
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty document: missing 'seq v1' header", 1)
    header = lines[0].split()
    if header[:2] != ["seq", "v1"]:
        raise ParseError("first line must be 'seq v1'", 1)
    bandwidth = DEFAULT_BANDWIDTH_LIMIT
    if len(header) > 2:
        if len(header) != 4 or header[2] != "bw":
            raise ParseError("header options must be 'bw <MHz>'", 1)
        bandwidth = _parse_float(header[3], 1, "bandwidth")

    pulses: list[Pulse] = []
    windows: list[tuple[float, float]] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        tokens = stripped.split()
        directive = tokens[0]
        if directive == "pulse":
            if len(tokens) < 4:
                raise ParseError("pulse needs <start> <dur> and a shape", lineno)
            start = _parse_float(tokens[1], lineno, "start time")
            dur = _parse_float(tokens[2], lineno, "duration")
            if dur <= 0:
                raise ParseError(
                    f"pulse {len(pulses)} has non-positive duration", lineno, code="duration"
                )
            shape = tokens[3]
            if shape == "tones":
                if len(tokens) != 5:
                    raise ParseError("tones shape takes one tone list", lineno)
                tones = []
                for col, part in enumerate(tokens[4].split(",")):
                    fields = part.split(":")
                    if len(fields) != 3:
                        raise ParseError(
                            f"tone {col} must be offset:rabi:phase", lineno, col
                        )
                    tones.append(
                        ToneSpec(
                            _parse_float(fields[0], lineno, "tone offset"),
                            _parse_float(fields[1], lineno, "tone rabi"),
                            _parse_float(fields[2], lineno, "tone phase"),
                        )
                    )
                pulses.append(Pulse(start, dur, tones=tuple(tones)))
            elif shape == "chirp":
                if len(tokens) != 7:
                    raise ParseError("chirp takes <center> <rate> <rabi>", lineno)
                pulses.append(
                    Pulse(
                        start,
                        dur,
                        chirp=ChirpSpec(
                            _parse_float(tokens[4], lineno, "chirp center"),
                            _parse_float(tokens[5], lineno, "chirp rate"),
                            _parse_float(tokens[6], lineno, "chirp rabi"),
                        ),
                    )
                )
            else:
                raise ParseError(f"unknown pulse shape {shape!r}", lineno)
        elif directive == "detect":
            if len(tokens) != 3:
                raise ParseError("detect takes <start> <dur>", lineno)
            windows.append(
                (
                    _parse_float(tokens[1], lineno, "window start"),
                    _parse_float(tokens[2], lineno, "window duration"),
                )
            )
        else:
            raise ParseError(f"unknown directive {directive!r}", lineno)

    order = sorted(range(len(pulses)), key=lambda i: pulses[i].start)
    for a, b in zip(order, order[1:]):
        if pulses[b].start < pulses[a].end - 1e-12:
            raise ParseError(
                f"pulses {min(a, b)} and {max(a, b)} overlap in time", code="overlap"
            )
    try:
        return Sequence(tuple(pulses[i] for i in order), tuple(windows), bandwidth)
    except SequenceError as exc:
        code = "overlap" if "overlap" in str(exc) else "semantic"
        raise ParseError(str(exc), code=code) from None


# ---------------------------------------------------------------------------
# canonical sequences


def two_photon_rabi(
    rabi_1: float, rabi_2: float, branching_ratio: float, intermediate_detuning: float
) -> float:
    """Far-detuned effective two-photon Rabi (MHz): O1*O2*sqrt(R)/(2*Delta)."""
    if intermediate_detuning == 0:
        raise InvalidInputError("intermediate detuning must be nonzero for the far-detuned formula")
    return rabi_1 * rabi_2 * math.sqrt(branching_ratio) / (2.0 * abs(intermediate_detuning))


def bright_cycle_rabi(duration: float, branching_ratio: float, cycles: float = 1.0) -> float:
    """Per-tone Rabi (equal on both tones) driving `cycles` full bright-state cycles.

    With equal tone amplitudes the bright-state coupling is
    W = rabi*sqrt(1+R); one full cycle (2*pi*W*t = 2*pi) returns all
    population to the ground pair.
    """
    if duration <= 0:
        raise InvalidInputError("duration must be > 0")
    return cycles / (duration * math.sqrt(1.0 + branching_ratio))


def balanced_mirror_rabi(duration: float, branching_ratio: float) -> float:
    """Strong-leg tone Rabi for a one-cycle balanced two-photon pi mirror.

    Balancing the two effective leg couplings (the tone on the weak leg
    carries rabi/sqrt(R)) makes the bright-cycle reflection a pure
    spin-coherence conjugation; the bright coupling is W = rabi*sqrt(2)
    and one full cycle takes 1/W.
    """
    if duration <= 0:
        raise InvalidInputError("duration must be > 0")
    if branching_ratio <= 0:
        raise InvalidInputError("two-photon rephasing needs a branching ratio > 0")
    return 1.0 / (duration * math.sqrt(2.0))


def standard_raman_sequence(
    sys: LevelSystem,
    t_delay: float,
    *,
    detuned_rephasing: bool = True,
    rephasing_area: float = math.pi,
    probe_rabi: float = 1e-4,
    probe_duration: float | None = None,
    excitation_duration: float = 10.0,
    excitation_rabi: float | None = None,
    rephasing_duration: float = 10.0,
    rephasing_rabi: float | None = None,
    probe_gap: float = 1.0,
    probe_tail: float = 52.0,
    rephasing_phase: float = 0.0,
    rephasing_phase2: float = 0.0,
    include_pump: bool = True,
    pump_window: float | None = None,
    n_pump_chirps: int = 5,
    bandwidth_limit: float = DEFAULT_BANDWIDTH_LIMIT,
) -> Sequence:
    """Ground-spin Raman echo timeline (pump, excitation, rephasing, probe).

    The bichromatic excitation (offsets 0 and -delta_g, equal tone Rabi)
    is centered at t = 0 and the rephasing pulse at t = t_delay, so the
    echo rephases at 2*t_delay.  The rephasing tones are leg-balanced (the
    tone resonant with the weak leg carries rabi/sqrt(R)) so one full
    bright cycle conjugates the spin coherence completely; with
    detuned_rephasing both offsets shift by exactly +delta_e, staying
    two-photon resonant through the second excited sublevel with the same
    balanced amplitudes on swapped legs.  rephasing_area scales the pulse
    length (pi = one full cycle); area 0 drops the pulse.
    """
    if t_delay <= excitation_duration:
        raise SequenceError("t_delay must exceed the excitation duration")
    if rephasing_area < 0:
        raise SequenceError("rephasing_area must be >= 0")

    exc_rabi = (
        excitation_rabi
        if excitation_rabi is not None
        else bright_cycle_rabi(excitation_duration, sys.branching_ratio)
    )
    rep_rabi = (
        rephasing_rabi
        if rephasing_rabi is not None
        else balanced_mirror_rabi(rephasing_duration, sys.branching_ratio)
    )
    rep_dur = rephasing_duration * (rephasing_area / math.pi)
    if rep_dur > 0 and sys.branching_ratio <= 0:
        raise SequenceError("two-photon rephasing needs a branching ratio > 0")

    pulses: list[Pulse] = []
    exc_start = -0.5 * excitation_duration
    if include_pump:
        window = pump_window if pump_window is not None else 0.4 * (sys.delta_g - sys.delta_e)
        if not 0 < window < sys.delta_g - sys.delta_e:
            raise SequenceError("pump window must lie in (0, delta_g - delta_e)")
        chirp_dur = 100.0
        rate = 2.0 * window / chirp_dur / HZ_PER_S_TO_MHZ_PER_US
        t0 = exc_start - 10.0 - n_pump_chirps * chirp_dur
        for k in range(n_pump_chirps):
            pulses.append(
                Pulse(t0 + k * chirp_dur, chirp_dur, chirp=ChirpSpec(0.0, rate, exc_rabi))
            )

    pulses.append(
        Pulse(
            exc_start,
            excitation_duration,
            tones=(ToneSpec(0.0, exc_rabi), ToneSpec(-sys.delta_g, exc_rabi)),
        )
    )
    shift = sys.delta_e if detuned_rephasing else 0.0
    rep_end = t_delay
    if rep_dur > 0:
        weak = rep_rabi / math.sqrt(sys.branching_ratio)
        if detuned_rephasing:
            # tones resonant through e2: upper tone sits on the weak leg
            rep_tones = (
                ToneSpec(shift, weak, rephasing_phase),
                ToneSpec(shift - sys.delta_g, rep_rabi, rephasing_phase2),
            )
        else:
            rep_tones = (
                ToneSpec(shift, rep_rabi, rephasing_phase),
                ToneSpec(shift - sys.delta_g, weak, rephasing_phase2),
            )
        pulses.append(Pulse(t_delay - 0.5 * rep_dur, rep_dur, tones=rep_tones))
        rep_end = t_delay + 0.5 * rep_dur
    probe_start = rep_end + probe_gap
    if probe_duration is None:
        probe_duration = (2.0 * t_delay + probe_tail) - probe_start
    if probe_duration <= 0:
        raise SequenceError("probe duration must be > 0")
    pulses.append(Pulse(probe_start, probe_duration, tones=(ToneSpec(0.0, probe_rabi),)))

    return Sequence(
        tuple(pulses),
        detection_windows=((probe_start, probe_duration),),
        bandwidth_limit=bandwidth_limit,
    )


def excited_raman_sequence(
    sys: LevelSystem,
    t_delay: float,
    *,
    detuned_rephasing: bool = True,
    rephasing_area: float = math.pi,
    probe_rabi: float = 1e-4,
    probe_duration: float | None = None,
    excitation_duration: float = 10.0,
    excitation_rabi: float | None = None,
    rephasing_duration: float = 10.0,
    rephasing_rabi: float | None = None,
    probe_gap: float = 1.0,
    probe_tail: float = 52.0,
    rephasing_phase: float = 0.0,
    rephasing_phase2: float = 0.0,
    bandwidth_limit: float = DEFAULT_BANDWIDTH_LIMIT,
) -> Sequence:
    """Excited-spin echo variant: V-type bichromatic pulses separated by delta_e.

    The excitation drives both excited sublevels from g1 (offsets 0 and
    +delta_e) with a half bright cycle, maximizing the excited-pair
    coherence; the echo beat appears at delta_e.  Detuned rephasing shifts
    both tones by -delta_g onto the V system rooted in g2.
    """
    if t_delay <= excitation_duration:
        raise SequenceError("t_delay must exceed the excitation duration")
    exc_rabi = (
        excitation_rabi
        if excitation_rabi is not None
        else bright_cycle_rabi(excitation_duration, sys.branching_ratio, cycles=0.5)
    )
    rep_rabi = (
        rephasing_rabi
        if rephasing_rabi is not None
        else balanced_mirror_rabi(rephasing_duration, sys.branching_ratio)
    )
    rep_dur = rephasing_duration * (rephasing_area / math.pi)
    if rep_dur > 0 and sys.branching_ratio <= 0:
        raise SequenceError("two-photon rephasing needs a branching ratio > 0")

    pulses = [
        Pulse(
            -0.5 * excitation_duration,
            excitation_duration,
            tones=(ToneSpec(0.0, exc_rabi), ToneSpec(sys.delta_e, exc_rabi)),
        )
    ]
    shift = -sys.delta_g if detuned_rephasing else 0.0
    rep_end = t_delay
    if rep_dur > 0:
        weak = rep_rabi / math.sqrt(sys.branching_ratio)
        if detuned_rephasing:
            # V system rooted in g2: the lower tone sits on the weak leg
            rep_tones = (
                ToneSpec(shift, weak, rephasing_phase),
                ToneSpec(shift + sys.delta_e, rep_rabi, rephasing_phase2),
            )
        else:
            rep_tones = (
                ToneSpec(shift, rep_rabi, rephasing_phase),
                ToneSpec(shift + sys.delta_e, weak, rephasing_phase2),
            )
        pulses.append(Pulse(t_delay - 0.5 * rep_dur, rep_dur, tones=rep_tones))
        rep_end = t_delay + 0.5 * rep_dur
    probe_start = rep_end + probe_gap
    if probe_duration is None:
        probe_duration = (2.0 * t_delay + probe_tail) - probe_start
    if probe_duration <= 0:
        raise SequenceError("probe duration must be > 0")
    pulses.append(Pulse(probe_start, probe_duration, tones=(ToneSpec(0.0, probe_rabi),)))
    return Sequence(
        tuple(pulses),
        detection_windows=((probe_start, probe_duration),),
        bandwidth_limit=bandwidth_limit,
    )


def standard_holeburn_sequence(
    sys: LevelSystem,
    window: float,
    readout_chirp_rate: float,
    *,
    pump_rabi: float = 0.1,
    n_pump_chirps: int = 10,
    readout_rabi: float = 0.01,
    margin: float = 5.0,
    bandwidth_limit: float = DEFAULT_BANDWIDTH_LIMIT,
) -> Sequence:
    """Hole-burning timeline: pump chirps over +-window, then a readout chirp.

    The readout scans the full feature range +-(delta_g + delta_e + margin)
    at the given rate (Hz/s).  The preparation window must stay below
    delta_g - delta_e so the pump does not touch neighboring features.
    """
    if window >= sys.delta_g - sys.delta_e:
        raise SequenceError("preparation window must be smaller than delta_g - delta_e")
    if readout_chirp_rate <= 0:
        raise InvalidInputError("readout_chirp_rate must be > 0")

    pulses: list[Pulse] = []
    chirp_dur = 100.0
    t = 0.0
    if window > 0:
        rate = 2.0 * window / chirp_dur / HZ_PER_S_TO_MHZ_PER_US
    else:
        rate = 0.0
    for _ in range(n_pump_chirps):
        pulses.append(Pulse(t, chirp_dur, chirp=ChirpSpec(0.0, rate, pump_rabi)))
        t += chirp_dur

    span = sys.delta_g + sys.delta_e + margin
    rate_mhz_us = readout_chirp_rate * HZ_PER_S_TO_MHZ_PER_US
    read_dur = 2.0 * span / rate_mhz_us
    t += 10.0
    pulses.append(Pulse(t, read_dur, chirp=ChirpSpec(0.0, readout_chirp_rate, readout_rabi)))
    return Sequence(
        tuple(pulses),
        detection_windows=((t, read_dur),),
        bandwidth_limit=bandwidth_limit,
    )
