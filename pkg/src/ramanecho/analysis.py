"""Fits and derived quantities: echo decay constants, width-vs-field laws,
intrinsic-lifetime deconvolution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class AnalysisError(ValueError):
    """Invalid or degenerate fit input."""


@dataclass(frozen=True)
class FitResult:
    names: tuple[str, ...]
    values: np.ndarray
    stderr: np.ndarray
    residual_norm: float
    n_points: int

    def value(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def error(self, name: str) -> float:
        return float(self.stderr[self.names.index(name)])


def _as_xy(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise AnalysisError("points must be (x, y) pairs")
    return arr[:, 0], arr[:, 1]


def fit_exp_decay(points) -> FitResult:
    """Least-squares fit of amplitude * exp(-2 T / t2) to (T, amplitude) pairs.

    The exponent carries the echo factor of two: a coherence lifetime t2
    yields amplitudes falling as exp(-2 T / t2).  Initial guess from the
    log-linear problem, refined by damped Gauss-Newton on the raw scale.
    Standard errors come from the Jacobian covariance.
    """
    t, y = _as_xy(points)
    if len(t) < 3:
        raise AnalysisError("exponential fit needs at least 3 points")
    if np.any(y <= 0):
        raise AnalysisError("amplitudes must all be positive")
    if len(np.unique(t)) < 2:
        raise AnalysisError("degenerate data: all delays identical")
    logy = np.log(y)
    design = np.column_stack([np.ones_like(t), -2.0 * t])
    coef, *_ = np.linalg.lstsq(design, logy, rcond=None)
    if coef[1] <= 0:
        raise AnalysisError("degenerate data: no decay detectable (constant or growing)")
    amp = math.exp(coef[0])
    t2 = 1.0 / coef[1]

    def model(a, tau):
        return a * np.exp(-2.0 * t / tau)

    params = np.array([amp, t2])
    resid = y - model(*params)
    cost = float(resid @ resid)
    for _ in range(100):
        a, tau = params
        e = np.exp(-2.0 * t / tau)
        jac = np.column_stack([e, a * e * 2.0 * t / tau**2])
        try:
            step = np.linalg.solve(jac.T @ jac, jac.T @ resid)
        except np.linalg.LinAlgError:
            raise AnalysisError("degenerate data: singular Jacobian") from None
        scale = 1.0
        for _ in range(30):
            trial = params + scale * step
            if trial[1] > 0 and trial[0] > 0:
                trial_resid = y - model(*trial)
                trial_cost = float(trial_resid @ trial_resid)
                if trial_cost <= cost:
                    break
            scale *= 0.5
        else:
            break
        moved = np.max(np.abs(scale * step) / np.maximum(np.abs(params), 1e-30))
        params, resid, cost = trial, trial_resid, trial_cost
        if moved < 1e-13:
            break

    a, tau = params
    e = np.exp(-2.0 * t / tau)
    jac = np.column_stack([e, a * e * 2.0 * t / tau**2])
    dof = max(len(t) - 2, 1)
    s2 = cost / dof
    try:
        cov = s2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        raise AnalysisError("degenerate data: singular Jacobian") from None
    stderr = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return FitResult(("amplitude", "t2"), params, stderr, math.sqrt(cost), len(t))


def fit_linear(points) -> FitResult:
    """Ordinary least squares line fit; slope in y-units per x-unit."""
    x, y = _as_xy(points)
    if len(x) < 2:
        raise AnalysisError("linear fit needs at least 2 points")
    if len(np.unique(x)) < 2:
        raise AnalysisError("degenerate data: all x values identical")
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    cost = float(resid @ resid)
    dof = max(len(x) - 2, 1)
    cov = cost / dof * np.linalg.inv(design.T @ design)
    stderr = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return FitResult(("slope", "intercept"), coef, stderr, math.sqrt(cost), len(x))


def fit_width_law(points) -> FitResult:
    """Recover (slope, floor) from widths obeying w = sqrt((slope*B)^2 + floor^2).

    Quadrature-broadened widths are linear in squared coordinates, so the
    fit runs OLS on (B^2, w^2) and maps back; errors propagate through the
    square root.  This is the width-vs-field analysis for hole-burning
    feature widths sitting on a resolution floor.
    """
    x, y = _as_xy(points)
    if np.any(y < 0):
        raise AnalysisError("widths must be >= 0")
    sq = fit_linear(np.column_stack([x**2, y**2]))
    slope_sq, floor_sq = sq.values
    if slope_sq < 0 or floor_sq < 0:
        raise AnalysisError("width data inconsistent with a quadrature law")
    slope = math.sqrt(slope_sq)
    floor = math.sqrt(floor_sq)
    err = np.array(
        [
            sq.stderr[0] / (2.0 * slope) if slope > 0 else math.inf,
            sq.stderr[1] / (2.0 * floor) if floor > 0 else math.inf,
        ]
    )
    return FitResult(
        ("slope", "intercept"), np.array([slope, floor]), err, sq.residual_norm, len(x)
    )


def deconvolve_intrinsic_t2(t2_measured: float, t1_population: float) -> float:
    """Intrinsic coherence lifetime after removing the population-decay channel.

    Model: the measured excited-pair coherence decays at the full population
    rate 1/t1 plus pure dephasing, so 1/t2_intrinsic = 1/t2_measured - 1/t1.
    Returns math.inf (the unbounded marker) when t2_measured >= t1.
    """
    if t2_measured <= 0 or t1_population <= 0:
        raise AnalysisError("lifetimes must be > 0")
    if t2_measured >= t1_population:
        return math.inf
    return 1.0 / (1.0 / t2_measured - 1.0 / t1_population)
