"""Density-matrix propagation through pulse sequences.

Pulses with time-dependent tones integrate with fixed-step RK4; pulses whose
tones all sit at zero offset have a constant rotating-frame generator and
advance through the exact Liouville exponential; dark intervals use the
analytic closed form.  Ensembles propagate as a batch with a deterministic,
fixed-order weighted emission sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .physmodel import (
    TWO_PI,
    AtomClass,
    LevelSystem,
    coupling_pattern,
    decoherence_rates,
    level_energies,
    lindblad_ops,
)
from .pulsekit import HZ_PER_S_TO_MHZ_PER_US, Pulse, Sequence

_TIME_TOL = 1e-9


class PropagationError(RuntimeError):
    """Raised for step-size violations and malformed propagation inputs."""


def thermal_state() -> np.ndarray:
    """Equal ground-sublevel populations, empty excited state."""
    return np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)


def prepared_state() -> np.ndarray:
    """Idealized optically pumped state: all population in g1."""
    return np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)


@dataclass
class IntegrityReport:
    """Numerical health across a run: trace, hermiticity, positivity."""

    max_trace_dev: float = 0.0
    max_herm_dev: float = 0.0
    min_eigenvalue: float = math.inf
    renormalizations: int = 0

    def update(self, rhos: np.ndarray) -> None:
        tr = np.einsum("...ii->...", rhos).real
        self.max_trace_dev = max(self.max_trace_dev, float(np.max(np.abs(tr - 1.0))))
        herm = np.max(np.abs(rhos - np.conj(np.swapaxes(rhos, -1, -2))))
        self.max_herm_dev = max(self.max_herm_dev, float(herm))
        sym = 0.5 * (rhos + np.conj(np.swapaxes(rhos, -1, -2)))
        eigs = np.linalg.eigvalsh(sym)
        self.min_eigenvalue = min(self.min_eigenvalue, float(np.min(eigs)))

    def merge(self, other: "IntegrityReport") -> None:
        self.max_trace_dev = max(self.max_trace_dev, other.max_trace_dev)
        self.max_herm_dev = max(self.max_herm_dev, other.max_herm_dev)
        self.min_eigenvalue = min(self.min_eigenvalue, other.min_eigenvalue)
        self.renormalizations += other.renormalizations

    def as_dict(self) -> dict:
        return {
            "max_trace_dev": self.max_trace_dev,
            "max_herm_dev": self.max_herm_dev,
            "min_eigenvalue": self.min_eigenvalue,
            "renormalizations": self.renormalizations,
        }


@dataclass(frozen=True)
class EmissionSegment:
    """Uniformly sampled emission record for one detection window."""

    t0: float
    dt: float
    samples: np.ndarray  # complex; weighted sum of d_leg * rho[e, g] over atoms


@dataclass
class Trajectory:
    times: list[float]
    states: list[np.ndarray]
    emissions: list[EmissionSegment]
    integrity: IntegrityReport


@dataclass
class EnsembleResult:
    final_states: np.ndarray  # (N, 4, 4)
    emissions: list[EmissionSegment]
    integrity: IntegrityReport


@dataclass(frozen=True)
class PropagationOptions:
    """Knobs shared by run_sequence / run_ensemble.

    sample_dt: emission sampling interval (default 1/(8 f_max));
    disable_spin_storage: zero the g and e pair coherences at the start of
    every dark interval, isolating the purely optical signal pathway.
    """

    sample_dt: float | None = None
    disable_spin_storage: bool = False
    record_states: bool = True
    renorm_threshold: float = 1e-10


def _atom_energies(atoms: list[AtomClass], sys: LevelSystem) -> np.ndarray:
    return np.array([level_energies(a, sys) for a in atoms])


def _pulse_tone_arrays(pulse: Pulse):
    """(offs, half, ph, kind, c_tref, c_f0, c_rate) arrays for the kernels."""
    if pulse.chirp is not None:
        rate = pulse.chirp.rate * HZ_PER_S_TO_MHZ_PER_US
        f0 = pulse.chirp.center - 0.5 * rate * pulse.duration
        return (
            np.zeros(1),
            np.array([0.5 * pulse.chirp.rabi]),
            np.zeros(1),
            _kernels.KIND_CHIRP,
            pulse.start,
            f0,
            rate,
        )
    offs = np.array([t.offset for t in pulse.tones])
    half = np.array([0.5 * t.rabi for t in pulse.tones])
    ph = np.array([t.phase for t in pulse.tones])
    return offs, half, ph, _kernels.KIND_TONES, 0.0, 0.0, 0.0


def _pulse_max_offset(pulse: Pulse) -> float:
    lo, hi = pulse.offset_span()
    return max(abs(lo), abs(hi))


def max_frequency(seq: Sequence, atoms: list[AtomClass], sys: LevelSystem) -> float:
    """Largest oscillation frequency the integrator must resolve (MHz)."""
    eps = _atom_energies(atoms, sys)
    f = float(np.max(eps.max(axis=1) - eps.min(axis=1)))
    for p in seq.pulses:
        f = max(f, _pulse_max_offset(p))
    return max(f, 1e-3)


def default_dt(seq: Sequence, atoms: list[AtomClass], sys: LevelSystem) -> float:
    return 1.0 / (40.0 * max_frequency(seq, atoms, sys))


def _is_constant(pulse: Pulse) -> bool:
    return pulse.chirp is None and all(t.offset == 0.0 for t in pulse.tones)


def _constant_coupling(pulse: Pulse, sys: LevelSystem) -> np.ndarray:
    g = coupling_pattern(sys)
    s = sum(0.5 * t.rabi * np.exp(1j * t.phase) for t in pulse.tones)
    return s * g + np.conj(s) * g.conj().T


def _structured_superop(dec: np.ndarray, feed: np.ndarray) -> np.ndarray:
    d = np.zeros((16, 16), dtype=complex)
    for i in range(4):
        for j in range(4):
            d[4 * i + j, 4 * i + j] = -dec[i, j]
    for j in range(2):
        for i in range(2):
            d[5 * i, 5 * (2 + j)] += feed[j, i]
    return d


def lindblad_superoperator(ops: list[tuple[np.ndarray, float]]) -> np.ndarray:
    """Generic dissipator superoperator for row-major vec(rho)."""
    d = np.zeros((16, 16), dtype=complex)
    eye = np.eye(4)
    for op, rate in ops:
        ldl = op.conj().T @ op
        d += rate * (
            np.kron(op, op.conj())
            - 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.T))
        )
    return d


def _emission_cmat(sys: LevelSystem) -> np.ndarray:
    """Contraction matrix: sample = sum_ij d_ij * rho[e_j, g_i]."""
    from .physmodel import dipole_amplitudes

    c = np.zeros((4, 4), dtype=complex)
    d = dipole_amplitudes(sys.branching_ratio)
    for i in range(2):
        for j in range(2):
            c[2 + j, i] = d[i, j]
    return c


# ---------------------------------------------------------------------------
# public single-atom operations


def step_pulse(
    rho: np.ndarray,
    atom: AtomClass,
    sys: LevelSystem,
    pulse: Pulse,
    t: float,
    dt: float,
) -> np.ndarray:
    """One RK4 step of length dt starting at absolute time t inside `pulse`."""
    eps = level_energies(atom, sys)
    f = max(_pulse_max_offset(pulse), float(eps.max() - eps.min()), 1e-3)
    bound = 1.0 / (20.0 * f)
    if dt > bound * (1.0 + 1e-9):
        raise PropagationError(
            f"dt={dt:.3g} us too large: the pulse requires dt <= {bound:.3g} us"
        )
    dec, feed = decoherence_rates(sys)
    g = coupling_pattern(sys)
    offs, half, ph, kind, c_tref, c_f0, c_rate = _pulse_tone_arrays(pulse)
    out = np.ascontiguousarray(rho[None, :, :].astype(complex))
    _kernels.rk4_tones(
        out, eps[None, :], g, offs, half, ph, dec, feed, t, dt, 1, kind, c_tref, c_f0, c_rate
    )
    return out[0]


def free_evolve(rho: np.ndarray, atom: AtomClass, sys: LevelSystem, tau: float) -> np.ndarray:
    """Exact dark evolution: elementwise phase and decay plus population feed."""
    if tau < 0:
        raise PropagationError("tau must be >= 0")
    eps = level_energies(atom, sys)
    dec, feed = decoherence_rates(sys)
    gamma1 = dec[2, 2]
    out = _free_evolve_batch(
        rho[None, :, :].astype(complex), eps[None, :], dec, feed, gamma1, tau
    )
    return out[0]


def _free_evolve_batch(rhos, eps, dec, feed, gamma1, tau):
    if tau == 0.0:
        return rhos.copy()
    delta = eps[:, :, None] - eps[:, None, :]
    mult = np.exp(-(1j * TWO_PI * delta + dec[None, :, :]) * tau)
    out = rhos * mult
    if gamma1 > 0.0:
        surv = math.exp(-gamma1 * tau)
        branch = feed / gamma1
        for j in range(2):
            transferred = rhos[:, 2 + j, 2 + j] * (1.0 - surv)
            out[:, 0, 0] += branch[j, 0] * transferred
            out[:, 1, 1] += branch[j, 1] * transferred
    return out


# ---------------------------------------------------------------------------
# sequence engine


class _Engine:
    def __init__(self, atoms, weights, sys, seq, dt, options):
        self.atoms = atoms
        self.weights = np.asarray(weights, dtype=float)
        self.sys = sys
        self.seq = seq
        self.options = options
        self.eps = _atom_energies(atoms, sys)
        self.dec, self.feed = decoherence_rates(sys)
        self.gamma1 = self.dec[2, 2]
        self.g = coupling_pattern(sys)
        self.cmat = _emission_cmat(sys)
        self.f_max = max_frequency(seq, atoms, sys)
        self.dt = dt if dt is not None else 1.0 / (40.0 * self.f_max)
        bound = 1.0 / (20.0 * self.f_max)
        if self.dt > bound * (1.0 + 1e-9):
            raise PropagationError(
                f"dt={self.dt:.3g} us too large: sequence requires dt <= {bound:.3g} us"
            )
        self.sample_dt = (
            options.sample_dt if options.sample_dt is not None else 1.0 / (8.0 * self.f_max)
        )
        self._const_cache: dict = {}
        self._dark_cache: dict = {}
        self.integrity = IntegrityReport()

    # -- propagator caches ---------------------------------------------------

    def _const_props(self, pulse_idx: int, pulse: Pulse, dt: float) -> np.ndarray:
        key = (pulse_idx, dt)
        if key not in self._const_cache:
            h_const = _constant_coupling(pulse, self.sys)
            dsup = _structured_superop(self.dec, self.feed)
            eye = np.eye(4)
            props = np.empty((len(self.atoms), 16, 16), dtype=complex)
            for n in range(len(self.atoms)):
                h = np.diag(self.eps[n]).astype(complex) + h_const
                lv = -1j * TWO_PI * (np.kron(h, eye) - np.kron(eye, h.T)) + dsup
                props[n] = expm(lv * dt)
            self._const_cache[key] = props
        return self._const_cache[key]

    def _dark_mult(self, dt: float) -> np.ndarray:
        if dt not in self._dark_cache:
            delta = self.eps[:, :, None] - self.eps[:, None, :]
            self._dark_cache[dt] = np.exp(-(1j * TWO_PI * delta + self.dec[None, :, :]) * dt)
        return self._dark_cache[dt]

    # -- advancing -----------------------------------------------------------

    def advance(self, rho: np.ndarray, a: float, b: float, ctx) -> np.ndarray:
        span = b - a
        if span <= _TIME_TOL:
            return rho
        if ctx is None:
            return _free_evolve_batch(rho, self.eps, self.dec, self.feed, self.gamma1, span)
        pulse_idx, pulse = ctx
        if _is_constant(pulse):
            props = self._const_props(pulse_idx, pulse, span)
            flat = rho.reshape(len(self.atoms), 16)
            return np.einsum("nab,nb->na", props, flat).reshape(-1, 4, 4)
        nsteps = max(1, int(math.ceil(span / self.dt - 1e-9)))
        dt_eff = span / nsteps
        out = np.ascontiguousarray(rho)
        offs, half, ph, kind, c_tref, c_f0, c_rate = _pulse_tone_arrays(pulse)
        _kernels.rk4_tones(
            out,
            self.eps,
            self.g,
            offs,
            half,
            ph,
            self.dec,
            self.feed,
            a,
            dt_eff,
            nsteps,
            kind,
            c_tref,
            c_f0,
            c_rate,
        )
        return out

    def contract(self, rho: np.ndarray) -> complex:
        vals = np.einsum("ab,nab->n", self.cmat, rho)
        return complex(np.dot(self.weights, vals))

    # -- bulk sampling fast paths ---------------------------------------------

    def bulk_const(self, rho, pulse_idx, pulse, count):
        props = self._const_props(pulse_idx, pulse, self.sample_dt)
        cvec = self.cmat.reshape(16).copy()
        out = np.empty(count, dtype=complex)
        flat = np.ascontiguousarray(rho.reshape(len(self.atoms), 16))
        _kernels.const_sample_sum(flat, props, cvec, self.weights, out)
        return flat.reshape(-1, 4, 4), out

    def bulk_dark(self, rho, count):
        mult = self._dark_mult(self.sample_dt)
        surv = math.exp(-self.gamma1 * self.sample_dt) if self.gamma1 > 0 else 1.0
        branch = self.feed / self.gamma1 if self.gamma1 > 0 else np.zeros((2, 2))
        out = np.empty(count, dtype=complex)
        work = np.ascontiguousarray(rho)
        _kernels.dark_sample_sum(work, mult, branch, surv, self.cmat, self.weights, out)
        return work, out


def _build_segments(seq: Sequence, t_start: float, t_end: float):
    marks = {t_start, t_end}
    for p in seq.pulses:
        for t in (p.start, p.end):
            if t_start - _TIME_TOL < t < t_end + _TIME_TOL:
                marks.add(t)
    cuts = sorted(marks)
    segments = []
    for a, b in zip(cuts, cuts[1:]):
        if b - a <= _TIME_TOL:
            continue
        ctx = None
        for i, p in enumerate(seq.pulses):
            if p.start - _TIME_TOL <= a and b <= p.end + _TIME_TOL:
                ctx = (i, p)
                break
        segments.append((a, b, ctx))
    return segments


def _window_grids(seq: Sequence, sample_dt: float):
    grids = []
    for w_idx, (t0, dur) in enumerate(seq.detection_windows):
        count = int(math.floor(dur / sample_dt + 1e-9)) + 1
        times = t0 + np.arange(count) * sample_dt
        grids.append((w_idx, t0, times))
    flat = []
    for w_idx, _, times in grids:
        for s_idx, t in enumerate(times):
            flat.append((float(t), w_idx, s_idx))
    flat.sort(key=lambda x: x[0])
    return grids, flat


def _zero_spin_coherences(rho: np.ndarray) -> None:
    rho[:, 0, 1] = 0.0
    rho[:, 1, 0] = 0.0
    rho[:, 2, 3] = 0.0
    rho[:, 3, 2] = 0.0


def _run_engine(atoms, weights, sys, seq, dt, rho0, options, collect_states):
    eng = _Engine(atoms, weights, sys, seq, dt, options)
    n = len(atoms)

    starts = [p.start for p in seq.pulses] + [w[0] for w in seq.detection_windows]
    ends = [p.end for p in seq.pulses] + [w[0] + w[1] for w in seq.detection_windows]
    if not starts:
        rho = np.array([rho0.astype(complex).copy() for _ in range(n)])
        eng.integrity.update(rho)
        return rho, [], eng, [(0.0, rho.copy())]

    t_start, t_end = min(starts), max(ends)
    segments = _build_segments(seq, t_start, t_end)
    grids, flat_samples = _window_grids(seq, eng.sample_dt)
    buffers = {w_idx: np.zeros(len(times), dtype=complex) for w_idx, _, times in grids}

    rho = np.array([rho0.astype(complex).copy() for _ in range(n)])
    checkpoints = [(t_start, rho.copy())] if collect_states else []
    eng.integrity.update(rho)

    cursor = t_start
    s_ptr = 0
    # samples exactly at the run start
    while s_ptr < len(flat_samples) and flat_samples[s_ptr][0] <= t_start + _TIME_TOL:
        t, w_idx, s_idx = flat_samples[s_ptr]
        buffers[w_idx][s_idx] = eng.contract(rho)
        s_ptr += 1

    prev_ctx_is_pulse = False
    for a, b, ctx in segments:
        if ctx is None and prev_ctx_is_pulse and options.disable_spin_storage:
            _zero_spin_coherences(rho)
        prev_ctx_is_pulse = ctx is not None

        while s_ptr < len(flat_samples) and flat_samples[s_ptr][0] <= b + _TIME_TOL:
            # fast path: run of uniformly spaced samples inside this segment
            run_len = 1
            t0s = flat_samples[s_ptr][0]
            while (
                s_ptr + run_len < len(flat_samples)
                and flat_samples[s_ptr + run_len][0] <= b + _TIME_TOL
                and abs(
                    flat_samples[s_ptr + run_len][0]
                    - (t0s + run_len * eng.sample_dt)
                )
                < _TIME_TOL
            ):
                run_len += 1
            rho = eng.advance(rho, cursor, t0s, ctx)
            cursor = t0s
            if run_len >= 2 and (ctx is None or _is_constant(ctx[1])):
                if ctx is None:
                    rho, vals = eng.bulk_dark(rho, run_len)
                else:
                    rho, vals = eng.bulk_const(rho, ctx[0], ctx[1], run_len)
                for k in range(run_len):
                    t, w_idx, s_idx = flat_samples[s_ptr + k]
                    buffers[w_idx][s_idx] += vals[k]
                cursor = flat_samples[s_ptr + run_len - 1][0]
                s_ptr += run_len
            else:
                t, w_idx, s_idx = flat_samples[s_ptr]
                buffers[w_idx][s_idx] += eng.contract(rho)
                s_ptr += 1

        rho = eng.advance(rho, cursor, b, ctx)
        cursor = b

        # boundary bookkeeping
        tr = np.einsum("nii->n", rho).real
        dev = float(np.max(np.abs(tr - 1.0)))
        if dev > options.renorm_threshold:
            rho = rho / tr[:, None, None]
            eng.integrity.renormalizations += 1
        eng.integrity.update(rho)
        if collect_states:
            checkpoints.append((b, rho.copy()))

    emissions = [
        EmissionSegment(t0, eng.sample_dt, buffers[w_idx]) for w_idx, t0, _ in grids
    ]
    return rho, emissions, eng, checkpoints


def run_sequence(
    atom: AtomClass,
    sys: LevelSystem,
    seq: Sequence,
    dt: float | None = None,
    rho0: np.ndarray | None = None,
    options: PropagationOptions | None = None,
) -> Trajectory:
    """Propagate one atom class through a sequence, recording emission samples."""
    options = options or PropagationOptions()
    rho0 = rho0 if rho0 is not None else thermal_state()
    rho, emissions, eng, checkpoints = _run_engine(
        [atom], [1.0], sys, seq, dt, rho0, options, options.record_states
    )
    times = [t for t, _ in checkpoints]
    states = [r[0] for _, r in checkpoints]
    if not times:
        times, states = [0.0], [rho[0]]
    return Trajectory(times, states, emissions, eng.integrity)


def run_ensemble(
    atoms: list[AtomClass],
    sys: LevelSystem,
    seq: Sequence,
    dt: float | None = None,
    rho0: np.ndarray | None = None,
    options: PropagationOptions | None = None,
) -> EnsembleResult:
    """Propagate all atom classes as one batch; emission is the weighted sum."""
    options = options or PropagationOptions()
    rho0 = rho0 if rho0 is not None else thermal_state()
    weights = [a.weight for a in atoms]
    rho, emissions, eng, _ = _run_engine(
        atoms, weights, sys, seq, dt, rho0, options, collect_states=False
    )
    return EnsembleResult(rho, emissions, eng.integrity)


def brute_force_evolve(
    rho: np.ndarray,
    atom: AtomClass,
    sys: LevelSystem,
    seq: Sequence,
    dt_fine: float,
) -> np.ndarray:
    """Oracle: RK4 the entire sequence, dark intervals included, no shortcuts.

    Uses the generic Lindblad dissipator assembled from the jump-operator
    list, independently of the structured fast path.
    """
    starts = [p.start for p in seq.pulses] + [w[0] for w in seq.detection_windows]
    ends = [p.end for p in seq.pulses] + [w[0] + w[1] for w in seq.detection_windows]
    if not starts:
        return rho.astype(complex).copy()
    t_start, t_end = min(starts), max(ends)
    if (t_end - t_start) / dt_fine > 5e7:
        raise PropagationError("sequence too long for the brute-force oracle at this dt")
    eps = level_energies(atom, sys)
    g = coupling_pattern(sys)
    dsup = lindblad_superoperator(lindblad_ops(sys))
    out = np.ascontiguousarray(rho.astype(complex).copy())
    empty = np.zeros(0)
    for a, b, ctx in _build_segments(seq, t_start, t_end):
        nsteps = max(1, int(math.ceil((b - a) / dt_fine - 1e-9)))
        dt_eff = (b - a) / nsteps
        if ctx is None:
            offs, half, ph, kind, c_tref, c_f0, c_rate = (
                empty,
                empty,
                empty,
                _kernels.KIND_TONES,
                0.0,
                0.0,
                0.0,
            )
        else:
            offs, half, ph, kind, c_tref, c_f0, c_rate = _pulse_tone_arrays(ctx[1])
        _kernels.rk4_generic(
            out, eps, g, offs, half, ph, dsup, a, dt_eff, nsteps, kind, c_tref, c_f0, c_rate
        )
    return out
