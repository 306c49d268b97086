"""Numba kernels for the propagation hot loops.

All kernels share the convention drho/dt = -i*2*pi*[H, rho] + D(rho) with H
in MHz and t in microseconds.  The structured dissipator is an elementwise
decay matrix plus a population feed from the excited into the ground
sublevels; the generic kernel applies an arbitrary 16x16 superoperator
instead (used by the brute-force oracle).
"""

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi

KIND_TONES = 0
KIND_CHIRP = 1


@njit(cache=True)
def _tone_sum(t, offs, half, ph, kind, c_tref, c_f0, c_rate):
    if kind == KIND_CHIRP:
        tau = t - c_tref
        phase = TWO_PI * (c_f0 * tau + 0.5 * c_rate * tau * tau) + ph[0]
        return half[0] * np.exp(1j * phase)
    s = 0.0 + 0.0j
    for k in range(offs.shape[0]):
        s += half[k] * np.exp(1j * (TWO_PI * offs[k] * t + ph[k]))
    return s


@njit(cache=True)
def _fill_coupling(g, s, h):
    for a in range(4):
        for b in range(4):
            h[a, b] = s * g[a, b] + np.conj(s * g[b, a])


@njit(cache=True)
def _rhs(rho, eps, h, dec, feed, out):
    for a in range(4):
        for b in range(4):
            acc = 0.0 + 0.0j
            for c in range(4):
                acc += h[a, c] * rho[c, b] - rho[a, c] * h[c, b]
            out[a, b] = (
                -1j * TWO_PI * ((eps[a] - eps[b]) * rho[a, b] + acc)
                - dec[a, b] * rho[a, b]
            )
    out[0, 0] += feed[0, 0] * rho[2, 2] + feed[1, 0] * rho[3, 3]
    out[1, 1] += feed[0, 1] * rho[2, 2] + feed[1, 1] * rho[3, 3]


@njit(cache=True)
def rk4_tones(rho, eps, g, offs, half, ph, dec, feed, t0, dt, nsteps, kind, c_tref, c_f0, c_rate):
    """Fixed-step RK4 over a tone or chirp pulse for a batch of atom classes.

    rho: (N, 4, 4) complex, updated in place.  eps: (N, 4) level energies.
    """
    n_atoms = rho.shape[0]
    h0 = np.empty((4, 4), np.complex128)
    h1 = np.empty((4, 4), np.complex128)
    h2 = np.empty((4, 4), np.complex128)
    k1 = np.empty((4, 4), np.complex128)
    k2 = np.empty((4, 4), np.complex128)
    k3 = np.empty((4, 4), np.complex128)
    k4 = np.empty((4, 4), np.complex128)
    tmp = np.empty((4, 4), np.complex128)
    for step in range(nsteps):
        t = t0 + step * dt
        _fill_coupling(g, _tone_sum(t, offs, half, ph, kind, c_tref, c_f0, c_rate), h0)
        _fill_coupling(
            g, _tone_sum(t + 0.5 * dt, offs, half, ph, kind, c_tref, c_f0, c_rate), h1
        )
        _fill_coupling(g, _tone_sum(t + dt, offs, half, ph, kind, c_tref, c_f0, c_rate), h2)
        for n in range(n_atoms):
            rn = rho[n]
            en = eps[n]
            _rhs(rn, en, h0, dec, feed, k1)
            for a in range(4):
                for b in range(4):
                    tmp[a, b] = rn[a, b] + 0.5 * dt * k1[a, b]
            _rhs(tmp, en, h1, dec, feed, k2)
            for a in range(4):
                for b in range(4):
                    tmp[a, b] = rn[a, b] + 0.5 * dt * k2[a, b]
            _rhs(tmp, en, h1, dec, feed, k3)
            for a in range(4):
                for b in range(4):
                    tmp[a, b] = rn[a, b] + dt * k3[a, b]
            _rhs(tmp, en, h2, dec, feed, k4)
            for a in range(4):
                for b in range(4):
                    rn[a, b] += (dt / 6.0) * (
                        k1[a, b] + 2.0 * k2[a, b] + 2.0 * k3[a, b] + k4[a, b]
                    )


@njit(cache=True)
def const_sample_sum(rvec, prop, cvec, w, out):
    """Record weighted emission samples under a constant Liouville propagator.

    rvec: (N, 16) flattened states, advanced in place by prop (N, 16, 16)
    between samples; out: (K,) weighted contraction with cvec recorded
    BEFORE each advance, so the state exits at the last sample time.
    """
    n_atoms = rvec.shape[0]
    n_samples = out.shape[0]
    tmp = np.empty(16, np.complex128)
    for k in range(n_samples):
        tot = 0.0 + 0.0j
        for n in range(n_atoms):
            cn = 0.0 + 0.0j
            for a in range(16):
                cn += cvec[a] * rvec[n, a]
            tot += w[n] * cn
        out[k] = tot
        if k < n_samples - 1:
            for n in range(n_atoms):
                for a in range(16):
                    acc = 0.0 + 0.0j
                    for b in range(16):
                        acc += prop[n, a, b] * rvec[n, b]
                    tmp[a] = acc
                for a in range(16):
                    rvec[n, a] = tmp[a]


@njit(cache=True)
def dark_sample_sum(rho, mult, branch, surv, cmat, w, out):
    """Record weighted emission samples across a dark interval.

    mult: (N, 4, 4) per-step elementwise phase-decay multiplier for one
    sample interval; branch: (2, 2) decay branching b[j, i] (e_j -> g_i);
    surv: excited-population survival factor per step.
    """
    n_atoms = rho.shape[0]
    n_samples = out.shape[0]
    for k in range(n_samples):
        tot = 0.0 + 0.0j
        for n in range(n_atoms):
            cn = 0.0 + 0.0j
            for a in range(4):
                for b in range(4):
                    cn += cmat[a, b] * rho[n, a, b]
            tot += w[n] * cn
        out[k] = tot
        if k < n_samples - 1:
            for n in range(n_atoms):
                t1 = rho[n, 2, 2] * (1.0 - surv)
                t2 = rho[n, 3, 3] * (1.0 - surv)
                for a in range(4):
                    for b in range(4):
                        rho[n, a, b] *= mult[n, a, b]
                rho[n, 0, 0] += branch[0, 0] * t1 + branch[1, 0] * t2
                rho[n, 1, 1] += branch[0, 1] * t1 + branch[1, 1] * t2


@njit(cache=True)
def _rhs_generic(rho, eps, h, dsup, out):
    for a in range(4):
        for b in range(4):
            acc = 0.0 + 0.0j
            for c in range(4):
                acc += h[a, c] * rho[c, b] - rho[a, c] * h[c, b]
            out[a, b] = -1j * TWO_PI * ((eps[a] - eps[b]) * rho[a, b] + acc)
    for a in range(4):
        for b in range(4):
            acc = 0.0 + 0.0j
            for c in range(4):
                for d in range(4):
                    acc += dsup[4 * a + b, 4 * c + d] * rho[c, d]
            out[a, b] += acc


@njit(cache=True)
def rk4_generic(rho, eps, g, offs, half, ph, dsup, t0, dt, nsteps, kind, c_tref, c_f0, c_rate):
    """Single-atom RK4 with a generic dissipator superoperator (oracle path)."""
    h0 = np.empty((4, 4), np.complex128)
    h1 = np.empty((4, 4), np.complex128)
    h2 = np.empty((4, 4), np.complex128)
    k1 = np.empty((4, 4), np.complex128)
    k2 = np.empty((4, 4), np.complex128)
    k3 = np.empty((4, 4), np.complex128)
    k4 = np.empty((4, 4), np.complex128)
    tmp = np.empty((4, 4), np.complex128)
    for step in range(nsteps):
        t = t0 + step * dt
        _fill_coupling(g, _tone_sum(t, offs, half, ph, kind, c_tref, c_f0, c_rate), h0)
        _fill_coupling(
            g, _tone_sum(t + 0.5 * dt, offs, half, ph, kind, c_tref, c_f0, c_rate), h1
        )
        _fill_coupling(g, _tone_sum(t + dt, offs, half, ph, kind, c_tref, c_f0, c_rate), h2)
        _rhs_generic(rho, eps, h0, dsup, k1)
        for a in range(4):
            for b in range(4):
                tmp[a, b] = rho[a, b] + 0.5 * dt * k1[a, b]
        _rhs_generic(tmp, eps, h1, dsup, k2)
        for a in range(4):
            for b in range(4):
                tmp[a, b] = rho[a, b] + 0.5 * dt * k2[a, b]
        _rhs_generic(tmp, eps, h1, dsup, k3)
        for a in range(4):
            for b in range(4):
                tmp[a, b] = rho[a, b] + dt * k3[a, b]
        _rhs_generic(tmp, eps, h2, dsup, k4)
        for a in range(4):
            for b in range(4):
                rho[a, b] += (dt / 6.0) * (
                    k1[a, b] + 2.0 * k2[a, b] + 2.0 * k3[a, b] + k4[a, b]
                )
