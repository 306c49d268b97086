"""Four-level emitter model: splittings, dipoles, relaxation channels, ensemble sampling.

Level basis order is (g1, g2, e1, e2).  All frequencies are in MHz
(cycles per microsecond), all times in microseconds, magnetic fields in
tesla.  The equation of motion carries the 2*pi explicitly, so a free
coherence between levels split by f MHz rotates by 2*pi*f*tau radians
over tau microseconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
#: fixed FWHM -> sigma conversion for Gaussian inhomogeneous widths
FWHM_TO_SIGMA = 1.0 / 2.355

BASIS_LABELS = ("g1", "g2", "e1", "e2")
G1, G2, E1, E2 = 0, 1, 2, 3


class ModelError(ValueError):
    """Base error for model construction and evaluation."""


class InvalidInputError(ModelError):
    """An argument violates a precondition."""


class InvalidConfigurationError(ModelError):
    """A parameter set is internally inconsistent."""


@dataclass(frozen=True)
class ZeemanParams:
    """Linear field laws for the sublevel splittings and their inhomogeneous widths.

    slope_g / slope_e: MHz per tesla for the ground / excited splitting.
    width_slope_g / width_slope_e: MHz FWHM per tesla for the spin-class spread.
    residual_width: observed zero-field feature width (MHz FWHM), kept as a
    reference value; the hole-burning readout derives its resolution from the
    chirp rate.
    """

    slope_g: float = 36.0
    slope_e: float = 16.0
    width_slope_g: float = 0.99
    width_slope_e: float = 0.093
    residual_width: float = 0.2

    def __post_init__(self):
        for name in ("slope_g", "slope_e", "width_slope_g", "width_slope_e", "residual_width"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0")


@dataclass(frozen=True)
class LevelSystem:
    """Splittings, branching ratio and relaxation times of one emitter.

    t2_spin_excited must not exceed t1_optical: the excited-pair coherence
    decays at least at the population rate 1/t1_optical.
    """

    delta_g: float
    delta_e: float
    branching_ratio: float = 0.13
    t1_optical: float = 800.0
    t2_optical: float = 10.0
    t2_spin_ground: float = 300.0
    t2_spin_excited: float = 540.0

    def __post_init__(self):
        if self.delta_g < 0 or self.delta_e < 0:
            raise InvalidInputError("splittings must be >= 0")
        if not 0.0 <= self.branching_ratio <= 1.0:
            raise InvalidInputError("branching_ratio must lie in [0, 1]")
        for name in ("t1_optical", "t2_optical", "t2_spin_ground", "t2_spin_excited"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be > 0")
        if self.t2_optical > 2.0 * self.t1_optical:
            raise InvalidInputError("t2_optical must not exceed 2 * t1_optical")


@dataclass(frozen=True)
class AtomClass:
    """One ensemble member: optical detuning and per-member splitting deviations."""

    optical_detuning: float
    dg_deviation: float
    de_deviation: float
    weight: float

    def __post_init__(self):
        if self.weight < 0:
            raise InvalidInputError("weight must be >= 0")


@dataclass(frozen=True)
class EnsembleConfig:
    """Discretization of the inhomogeneous distributions.

    optical_window is the half-width of the sampled optical detunings
    (uniform grid); spin widths are Gaussian FWHM values.  In quadrature
    mode the spin deviations use Gauss-Hermite nodes (tensor grid when both
    widths are nonzero); in monte_carlo mode n_spin seeded joint draws.
    """

    n_optical: int = 1
    optical_window: float = 0.0
    n_spin: int = 1
    spin_width_g: float = 0.0
    spin_width_e: float = 0.0
    sampling_mode: str = "quadrature"
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_optical < 1 or self.n_spin < 1:
            raise InvalidInputError("ensemble counts must be >= 1")
        if self.optical_window < 0 or self.spin_width_g < 0 or self.spin_width_e < 0:
            raise InvalidInputError("ensemble widths must be >= 0")
        if self.sampling_mode not in ("quadrature", "monte_carlo"):
            raise InvalidInputError(f"unknown sampling_mode {self.sampling_mode!r}")


def splittings(b_field: float, zp: ZeemanParams) -> tuple[float, float]:
    """Ground and excited splittings (MHz) at field b_field (tesla)."""
    if b_field < 0:
        raise InvalidInputError("field magnitude must be >= 0")
    return zp.slope_g * b_field, zp.slope_e * b_field


def spin_widths(b_field: float, zp: ZeemanParams) -> tuple[float, float]:
    """Inhomogeneous FWHM (MHz) of the ground and excited splittings at b_field."""
    if b_field < 0:
        raise InvalidInputError("field magnitude must be >= 0")
    return zp.width_slope_g * b_field, zp.width_slope_e * b_field


def level_system_for_field(b_field: float, zp: ZeemanParams, **overrides) -> LevelSystem:
    """LevelSystem with splittings from the linear field law; overrides pass through."""
    dg, de = splittings(b_field, zp)
    return LevelSystem(delta_g=dg, delta_e=de, **overrides)


def dipole_amplitudes(branching_ratio: float) -> np.ndarray:
    """Relative dipole amplitudes d[i, j] over (g_i, e_j).

    Strong legs (g1 e1) and (g2 e2) have amplitude 1; cross legs carry
    sqrt(R) so the weak/strong transition probability ratio equals R.
    """
    if not 0.0 <= branching_ratio <= 1.0:
        raise InvalidInputError("branching_ratio must lie in [0, 1]")
    r = math.sqrt(branching_ratio)
    return np.array([[1.0, r], [r, 1.0]])


def level_energies(atom: AtomClass, sys: LevelSystem) -> np.ndarray:
    """Rotating-frame level energies (MHz), referenced to the nominal g1->e1 line."""
    d = atom.optical_detuning
    return np.array(
        [
            0.0,
            sys.delta_g + atom.dg_deviation,
            d,
            d + sys.delta_e + atom.de_deviation,
        ]
    )


def coupling_pattern(sys: LevelSystem) -> np.ndarray:
    """Upper-triangular coupling pattern G with G[g_i, e_j] = d_ij, zero elsewhere.

    A tone of complex amplitude s contributes s*G + conj(s)*G^dagger to the
    Hamiltonian: every tone drives every allowed leg.
    """
    d = dipole_amplitudes(sys.branching_ratio)
    g = np.zeros((4, 4), dtype=complex)
    g[G1, E1] = d[0, 0]
    g[G1, E2] = d[0, 1]
    g[G2, E1] = d[1, 0]
    g[G2, E2] = d[1, 1]
    return g


def build_hamiltonian(atom: AtomClass, sys: LevelSystem, tones, t: float) -> np.ndarray:
    """Rotating-frame Hamiltonian (MHz units) at time t for the active tones.

    Diagonal carries the per-atom level energies; each tone (offset f,
    rabi, phase) adds 0.5*rabi*d_leg*exp(i*(2*pi*f*t + phase)) on every
    allowed leg.  The equation of motion is drho/dt = -i*2*pi*[H, rho] + D(rho).
    """
    h = np.diag(level_energies(atom, sys)).astype(complex)
    g = coupling_pattern(sys)
    s = 0.0 + 0.0j
    for tone in tones:
        if tone.rabi < 0:
            raise InvalidInputError("tone rabi must be >= 0")
        s += 0.5 * tone.rabi * np.exp(1j * (TWO_PI * tone.offset * t + tone.phase))
    h += s * g + np.conj(s) * g.conj().T
    return h


def _rate(lifetime: float) -> float:
    return 0.0 if math.isinf(lifetime) else 1.0 / lifetime


def decoherence_rates(sys: LevelSystem) -> tuple[np.ndarray, np.ndarray]:
    """Structured dissipator: elementwise decay matrix and population feed.

    Returns (dec, feed) where drho[i,j] gets -dec[i,j]*rho[i,j] and the
    ground populations gain feed[j,i]*rho[e_j,e_j].  dec is chosen so that
    the ground spin coherence decays at 1/t2_spin_ground, the excited pair
    at 1/t2_spin_excited (population decay included) and the optical
    coherences at exactly 1/t2_optical.
    """
    r = sys.branching_ratio
    gamma1 = _rate(sys.t1_optical)
    gamma_sg = _rate(sys.t2_spin_ground)
    gamma_se = _rate(sys.t2_spin_excited) - gamma1
    if gamma_se < -1e-15:
        raise InvalidConfigurationError(
            "t2_spin_excited implies negative pure dephasing (must be <= t1_optical)"
        )
    gamma_se = max(gamma_se, 0.0)
    gamma_opt = _rate(sys.t2_optical) - 0.5 * gamma1 - 0.25 * gamma_sg - 0.25 * gamma_se
    if gamma_opt < -1e-15:
        raise InvalidConfigurationError(
            "t2_optical implies negative optical pure dephasing for this parameter set"
        )
    gamma_opt = max(gamma_opt, 0.0)

    opt_total = 0.5 * gamma1 + gamma_opt + 0.25 * gamma_sg + 0.25 * gamma_se
    dec = np.zeros((4, 4))
    dec[E1, E1] = dec[E2, E2] = gamma1
    dec[G1, G2] = dec[G2, G1] = gamma_sg
    dec[E1, E2] = dec[E2, E1] = gamma1 + gamma_se
    for gi in (G1, G2):
        for ej in (E1, E2):
            dec[gi, ej] = dec[ej, gi] = opt_total

    # feed[j, i]: decay rate from e_j into g_i, branching by dipole probability
    b = np.array([[1.0, r], [r, 1.0]]) / (1.0 + r)
    feed = gamma1 * b
    return dec, feed


def lindblad_ops(sys: LevelSystem) -> list[tuple[np.ndarray, float]]:
    """Jump operators and rates reproducing `decoherence_rates` in Lindblad form.

    Population decay uses one operator per (e_j -> g_i) leg; pure dephasing
    uses sigma_z-type operators on each sublevel pair plus an excited-manifold
    projector topping the optical coherence decay up to 1/t2_optical.
    """
    r = sys.branching_ratio
    gamma1 = _rate(sys.t1_optical)
    gamma_sg = _rate(sys.t2_spin_ground)
    gamma_se = _rate(sys.t2_spin_excited) - gamma1
    if gamma_se < -1e-15:
        raise InvalidConfigurationError(
            "t2_spin_excited implies negative pure dephasing (must be <= t1_optical)"
        )
    gamma_se = max(gamma_se, 0.0)
    gamma_opt = _rate(sys.t2_optical) - 0.5 * gamma1 - 0.25 * gamma_sg - 0.25 * gamma_se
    if gamma_opt < -1e-15:
        raise InvalidConfigurationError(
            "t2_optical implies negative optical pure dephasing for this parameter set"
        )
    gamma_opt = max(gamma_opt, 0.0)

    ops: list[tuple[np.ndarray, float]] = []
    branch = np.array([[1.0, r], [r, 1.0]]) / (1.0 + r)
    for ej, e_idx in enumerate((E1, E2)):
        for gi, g_idx in enumerate((G1, G2)):
            rate = gamma1 * branch[ej, gi]
            if rate > 0.0:
                op = np.zeros((4, 4), dtype=complex)
                op[g_idx, e_idx] = 1.0
                ops.append((op, rate))
    if gamma_sg > 0.0:
        ops.append((np.diag([1.0, -1.0, 0.0, 0.0]).astype(complex), gamma_sg / 2.0))
    if gamma_se > 0.0:
        ops.append((np.diag([0.0, 0.0, 1.0, -1.0]).astype(complex), gamma_se / 2.0))
    if gamma_opt > 0.0:
        ops.append((np.diag([0.0, 0.0, 1.0, 1.0]).astype(complex), 2.0 * gamma_opt))
    return ops


def sample_ensemble(cfg: EnsembleConfig) -> list[AtomClass]:
    """Discretize the inhomogeneous ensemble into weighted atom classes.

    Optical detunings sit on a symmetric uniform grid over +-optical_window.
    Spin deviations use Gauss-Hermite quadrature (independent dg and de grids)
    or seeded Gaussian draws.  Weights are normalized to sum to exactly 1.
    """
    if cfg.n_optical == 1 or cfg.optical_window == 0.0:
        opt_nodes = np.array([0.0])
    else:
        opt_nodes = np.linspace(-cfg.optical_window, cfg.optical_window, cfg.n_optical)
    opt_weights = np.full(opt_nodes.size, 1.0 / opt_nodes.size)

    if cfg.sampling_mode == "quadrature":
        dg_nodes, dg_w = _gauss_hermite_nodes(cfg.spin_width_g, cfg.n_spin)
        de_nodes, de_w = _gauss_hermite_nodes(cfg.spin_width_e, cfg.n_spin)
        spin = [
            (dg, de, wg * we)
            for dg, wg in zip(dg_nodes, dg_w)
            for de, we in zip(de_nodes, de_w)
        ]
    else:
        if cfg.spin_width_g == 0.0 and cfg.spin_width_e == 0.0:
            spin = [(0.0, 0.0, 1.0)]
        else:
            rng = np.random.default_rng(cfg.rng_seed)
            sg = cfg.spin_width_g * FWHM_TO_SIGMA
            se = cfg.spin_width_e * FWHM_TO_SIGMA
            dgs = rng.normal(0.0, sg, cfg.n_spin) if sg > 0 else np.zeros(cfg.n_spin)
            des = rng.normal(0.0, se, cfg.n_spin) if se > 0 else np.zeros(cfg.n_spin)
            spin = [(dg, de, 1.0 / cfg.n_spin) for dg, de in zip(dgs, des)]

    atoms = []
    for od, ow in zip(opt_nodes, opt_weights):
        for dg, de, sw in spin:
            atoms.append(AtomClass(float(od), float(dg), float(de), float(ow * sw)))
    total = sum(a.weight for a in atoms)
    return [
        AtomClass(a.optical_detuning, a.dg_deviation, a.de_deviation, a.weight / total)
        for a in atoms
    ]


def _gauss_hermite_nodes(fwhm: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    if fwhm == 0.0:
        return np.array([0.0]), np.array([1.0])
    nodes, weights = np.polynomial.hermite.hermgauss(n)
    sigma = fwhm * FWHM_TO_SIGMA
    return nodes * sigma * math.sqrt(2.0), weights / weights.sum()
