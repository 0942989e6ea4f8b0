"""Finite-horizon step-size schedules for gradient descent on an HPD quadratic.

After ``T`` steps with sizes ``eta_t`` the error is multiplied by the matrix
polynomial ``prod_t (I - eta_t D)``. The schedules here choose ``eta_t`` to
control the worst case of that polynomial over a spectral interval.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from fhbeam.linalg import SpectralInterval

GRID_POINTS = 10_001


@dataclass(frozen=True)
class StepSchedule:
    etas: np.ndarray
    kind: str
    interval: SpectralInterval

    @property
    def horizon(self) -> int:
        return len(self.etas)

    @property
    def predicted_factor(self) -> float:
        """Contraction factor of the error bound that applies to this kind of schedule."""
        kappa, T = self.interval.kappa, self.horizon
        if kappa == 1.0:
            return 0.0
        if self.kind == "chebyshev":
            return 2.0 * (1.0 - 2.0 / (np.sqrt(kappa) + 1.0)) ** T
        return (1.0 - 2.0 / (kappa + 1.0)) ** T


def chebyshev_nodes(T: int) -> np.ndarray:
    """Roots of the degree-``T`` Chebyshev polynomial, in decreasing order."""
    if int(T) != T or T < 1:
        raise ValueError(f"horizon must be a positive integer, got {T!r}")
    t = np.arange(T)
    nodes = np.cos((t + 0.5) * np.pi / T)
    # cos is not exactly odd-symmetric in floating point around pi/2
    nodes = 0.5 * (nodes - nodes[::-1])
    return nodes


def _check_interval(interval: SpectralInterval) -> SpectralInterval:
    if not isinstance(interval, SpectralInterval):
        interval = SpectralInterval(*interval)
    return interval


def chebyshev_schedule(T: int, interval: SpectralInterval) -> StepSchedule:
    interval = _check_interval(interval)
    xi = chebyshev_nodes(T)
    etas = 1.0 / (interval.midpoint + interval.halfwidth * xi)
    return StepSchedule(etas, "chebyshev", interval)


def constant_schedule(T: int, interval: SpectralInterval) -> StepSchedule:
    interval = _check_interval(interval)
    if int(T) != T or T < 1:
        raise ValueError(f"horizon must be a positive integer, got {T!r}")
    eta = 2.0 / (interval.lambda_min + interval.lambda_max)
    return StepSchedule(np.full(T, eta), "constant", interval)


def residual_polynomial(etas: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """``prod_t (1 - eta_t * lam)`` evaluated elementwise on ``lam``."""
    lam = np.asarray(lam, dtype=float)
    out = np.ones_like(lam)
    for eta in etas:
        out = out * (1.0 - eta * lam)
    return out


def _chebyshev_extrema(T: int, interval: SpectralInterval) -> np.ndarray:
    x = np.cos(np.arange(T + 1) * np.pi / T)
    return interval.midpoint - interval.halfwidth * x


def _stationary_points(etas: np.ndarray, interval: SpectralInterval) -> np.ndarray:
    if len(etas) < 2:
        return np.empty(0)
    poly = np.polynomial.Polynomial.fromroots(1.0 / np.asarray(etas))
    roots = poly.deriv().roots()
    roots = roots[np.abs(roots.imag) < 1e-9 * (1 + np.abs(roots.real))].real
    return roots[(roots >= interval.lambda_min) & (roots <= interval.lambda_max)]


def minimax_value(schedule: StepSchedule) -> float:
    """``sup |prod (1 - eta_t lam)|`` over the schedule's spectral interval."""
    iv = schedule.interval
    # the product is symmetric in the steps; a canonical order makes the value order-independent
    etas = np.sort(schedule.etas)
    if iv.lambda_min == iv.lambda_max:
        return float(abs(residual_polynomial(etas, np.array([iv.lambda_min]))[0]))
    lam = np.concatenate([
        np.linspace(iv.lambda_min, iv.lambda_max, GRID_POINTS),
        [iv.lambda_min, iv.lambda_max],
        _chebyshev_extrema(schedule.horizon, iv),
        _stationary_points(etas, iv),
    ])
    lam = np.clip(lam, iv.lambda_min, iv.lambda_max)
    return float(np.max(np.abs(residual_polynomial(etas, lam))))


def _sup_on_interval(etas: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Exact sup of ``|prod (1 - eta_t lam)|`` on ``[lo, hi]`` for a batch of tuples (rows).

    Degree is at most 3, so the interior extrema are the real roots of a
    quadratic (or linear) derivative.
    """
    T = etas.shape[1]
    e1 = etas.sum(axis=1)
    e2 = np.zeros_like(e1)
    e3 = np.zeros_like(e1)
    if T >= 2:
        e2 = sum(etas[:, a] * etas[:, b] for a, b in itertools.combinations(range(T), 2))
    if T == 3:
        e3 = etas[:, 0] * etas[:, 1] * etas[:, 2]

    def p(lam):
        return 1.0 - e1 * lam + e2 * lam**2 - e3 * lam**3

    best = np.maximum(np.abs(p(lo)), np.abs(p(hi)))
    # p'(lam) = -e1 + 2 e2 lam - 3 e3 lam^2
    a, b, c = -3.0 * e3, 2.0 * e2, -e1
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = np.where(b != 0, -c / b, np.nan)
        disc = b * b - 4 * a * c
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        r1 = np.where(a != 0, (-b + sq) / (2 * a), lin)
        r2 = np.where(a != 0, (-b - sq) / (2 * a), lin)
    for r in (r1, r2):
        ok = np.isfinite(r) & (r >= lo) & (r <= hi)
        val = np.where(ok, np.abs(p(np.where(ok, r, lo))), 0.0)
        best = np.maximum(best, val)
    return best


def brute_force_minimax(T: int, interval: SpectralInterval, grid_resolution: int = 400,
                        chunk: int = 2_000_000) -> tuple[float, np.ndarray]:
    """Best worst-case residual over a grid of step-size tuples in ``[0, 2/lambda_min]^T``.

    Only nondecreasing tuples are scanned since the product is symmetric.
    Returns the best value and the tuple attaining it.
    """
    interval = _check_interval(interval)
    if T not in (1, 2, 3):
        raise ValueError("brute force is limited to T in {1, 2, 3}")
    axis = np.linspace(0.0, 2.0 / interval.lambda_min, grid_resolution)
    lo, hi = interval.lambda_min, interval.lambda_max
    best_val, best_eta = np.inf, None
    if T == 1:
        vals = _sup_on_interval(axis[:, None], lo, hi)
        i = int(np.argmin(vals))
        return float(vals[i]), axis[[i]]
    idx = np.arange(grid_resolution)
    if T == 2:
        i, j = np.triu_indices(grid_resolution)
        tuples = np.stack([axis[i], axis[j]], axis=1)
        vals = _sup_on_interval(tuples, lo, hi)
        m = int(np.argmin(vals))
        return float(vals[m]), tuples[m]
    for a in idx:
        i, j = np.triu_indices(grid_resolution - a)
        tuples = np.stack([np.full(i.size, axis[a]), axis[a + i], axis[a + j]], axis=1)
        for s in range(0, len(tuples), chunk):
            part = tuples[s:s + chunk]
            vals = _sup_on_interval(part, lo, hi)
            m = int(np.argmin(vals))
            if vals[m] < best_val:
                best_val, best_eta = float(vals[m]), part[m]
    return best_val, best_eta


def lipschitz_estimate(schedule: StepSchedule, points: int = 2001) -> float:
    """Sum over t of ``sup_lam |d/d eta_t prod_s (1 - eta_s lam)|`` at the schedule."""
    iv = schedule.interval
    lam = np.linspace(iv.lambda_min, iv.lambda_max, points)
    total = 0.0
    for t in range(schedule.horizon):
        others = np.delete(schedule.etas, t)
        total += float(np.max(lam * np.abs(residual_polynomial(others, lam))))
    return total


def grid_slack(schedule: StepSchedule, grid_resolution: int = 400) -> float:
    """Tolerance for comparing a grid search against the continuous optimum."""
    cell = 2.0 / schedule.interval.lambda_min / (grid_resolution - 1)
    diameter = cell * np.sqrt(schedule.horizon)
    return 2.0 * diameter * lipschitz_estimate(schedule)
