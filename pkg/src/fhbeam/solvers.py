"""Outer beamforming loops: exact WMMSE, finite-horizon Chebyshev GD, constant-step GD.

All three alternate the optimal auxiliary updates with a precoder update on
the per-cell quadratic program; they differ only in how that QP is solved.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from fhbeam.fp import QuadraticProgram, assemble_dense, build_qp, update_aux
from fhbeam.linalg import LinAlgError, NotConvergedError, SpectralInterval
from fhbeam.network import ChannelSet, objective_g, power_normalize, random_precoders
from fhbeam.schedule import StepSchedule, chebyshev_schedule, constant_schedule

log = logging.getLogger(__name__)

VARIANTS = ("exact_wmmse", "finite_horizon", "constant_gd")
REFRESH = ("every_outer", "once")


class SolverError(RuntimeError):
    """A solver run failed; ``trace`` holds the records gathered so far."""

    def __init__(self, message: str, trace: "IterationTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass
class SolverConfig:
    variant: str = "finite_horizon"
    horizon: int = 5
    max_outer_iters: int = 200
    rel_tol: float = 1e-5
    seed: int = 0
    spectral_refresh: str = "every_outer"
    time_budget: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.spectral_refresh not in REFRESH:
            raise ValueError(f"unknown spectral_refresh {self.spectral_refresh!r}; expected one of {REFRESH}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon T must be a positive integer")
        if int(self.max_outer_iters) != self.max_outer_iters or self.max_outer_iters < 0:
            raise ValueError("max_outer_iters must be a nonnegative integer")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.time_budget is not None and not self.time_budget > 0:
            raise ValueError("time_budget must be positive")


@dataclass
class TraceRecord:
    outer_iteration: int
    cumulative_seconds: float
    wsr_bits: float
    inner_objective: float | None = None
    inner_iteration: int | None = None


@dataclass
class IterationTrace:
    records: list[TraceRecord] = field(default_factory=list)
    converged: bool = False

    def append(self, *args, **kwargs) -> None:
        self.records.append(TraceRecord(*args, **kwargs))

    def outer(self) -> list[TraceRecord]:
        return [r for r in self.records if r.inner_iteration is None]

    @property
    def wsr(self) -> np.ndarray:
        return np.array([r.wsr_bits for r in self.outer()])

    @property
    def final_wsr(self) -> float:
        return self.outer()[-1].wsr_bits

    @property
    def outer_iters(self) -> int:
        return self.outer()[-1].outer_iteration

    @property
    def total_seconds(self) -> float:
        return self.outer()[-1].cumulative_seconds

    def __len__(self) -> int:
        return len(self.records)


# ---------------------------------------------------------------------------
# inner QP solvers


def _cell_block(V_cell: np.ndarray) -> np.ndarray:
    """(K, M, d) -> (M, K*d): all users of a cell share ``D_l``."""
    K, M, d = V_cell.shape
    return V_cell.transpose(1, 0, 2).reshape(M, K * d)


def _cell_unblock(X: np.ndarray, K: int, d: int) -> np.ndarray:
    M = X.shape[0]
    return X.reshape(M, K, d).transpose(1, 0, 2)


# Plain steps in natural order lose all accuracy to rounding somewhere past
# T ~ 24 (partial products reach kappa^(T/2)); above this horizon a Chebyshev
# schedule is executed through the three-term recurrence instead, which
# produces the same degree-T residual polynomial.
MAX_PLAIN_CHEBYSHEV_STEPS = 16


def _gd_step(qp: QuadraticProgram, X: np.ndarray, Q: np.ndarray, eta: float) -> np.ndarray:
    return X - eta * (qp.d_op.apply(X) - Q)


def inner_iterates(qp: QuadraticProgram, X: np.ndarray, Q: np.ndarray, schedule: StepSchedule):
    """Yield the ``T`` inner iterates ``X_1 .. X_T`` for right-hand side ``Q``."""
    iv = schedule.interval
    recurrence = (schedule.kind == "chebyshev" and schedule.horizon > MAX_PLAIN_CHEBYSHEV_STEPS
                  and iv.halfwidth > 0)
    if not recurrence:
        for eta in schedule.etas:
            X = _gd_step(qp, X, Q, eta)
            yield X
        return
    inv_mid = 1.0 / iv.midpoint
    gamma2 = (iv.midpoint / iv.halfwidth) ** 2
    prev, X = X, _gd_step(qp, X, Q, inv_mid)
    yield X
    omega = 1.0
    for t in range(1, schedule.horizon):
        omega = 1.0 / (1.0 - 1.0 / (2.0 * gamma2)) if t == 1 else 1.0 / (1.0 - omega / (4.0 * gamma2))
        prev, X = X, omega * _gd_step(qp, X, Q, inv_mid) + (1.0 - omega) * prev
        yield X


def solve_qp_finite_horizon(qp: QuadraticProgram, v0: np.ndarray, schedule: StepSchedule,
                            k: int | None = None,
                            callback: Callable[[int, np.ndarray], None] | None = None) -> np.ndarray:
    """Run exactly ``schedule.horizon`` gradient iterations on the QP.

    ``v0`` is either one user's ``M x d`` precoder (pass ``k``) or the whole
    cell as ``(K, M, d)``. ``callback(t, V_t)`` sees every iterate including
    ``t = 0``.
    """
    if k is not None:
        X, Q = np.asarray(v0, dtype=complex), qp.q[k]
    else:
        K, _, d = np.shape(v0)
        X, Q = _cell_block(np.asarray(v0, dtype=complex)), _cell_block(qp.q)
    unpack = (lambda Z: Z) if k is not None else (lambda Z: _cell_unblock(Z, K, d))
    if callback is not None:
        callback(0, unpack(X))
    for t, X in enumerate(inner_iterates(qp, X, Q, schedule), start=1):
        if callback is not None:
            callback(t, unpack(X))
    return unpack(X)


def solve_qp_exact(qp: QuadraticProgram) -> np.ndarray:
    """``D^{-1} Q`` for every user of the cell via a dense Cholesky solve."""
    K, M, d = qp.q.shape
    D = assemble_dense(qp)
    try:
        factor = scipy.linalg.cho_factor(D, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise LinAlgError("D is not positive definite") from exc
    X = scipy.linalg.cho_solve(factor, _cell_block(qp.q), check_finite=False)
    return _cell_unblock(X, K, d)


def make_schedule(kind: str, T: int, interval: SpectralInterval) -> StepSchedule:
    if kind == "finite_horizon":
        return chebyshev_schedule(T, interval)
    return constant_schedule(T, interval)


# ---------------------------------------------------------------------------
# outer loop

InnerHook = Callable[[int, int, QuadraticProgram, np.ndarray, StepSchedule | None], None]


def _initial_precoders(channels: ChannelSet, config: SolverConfig) -> np.ndarray:
    return random_precoders(channels.config, np.random.default_rng(config.seed))


def _run(channels: ChannelSet, config: SolverConfig, V0: np.ndarray | None,
         inner_hook: InnerHook | None, inner_trace_at: int | None):
    L, K, M, N, d = channels.config.shape
    trace = IterationTrace()
    start = time.perf_counter()
    V = _initial_precoders(channels, config) if V0 is None else np.array(V0, dtype=complex)
    prev = objective_g(channels, V)
    trace.append(0, time.perf_counter() - start, prev)
    intervals: list[SpectralInterval | None] = [None] * L
    exact = config.variant == "exact_wmmse"

    for it in range(1, config.max_outer_iters + 1):
        try:
            aux = update_aux(channels, V)
            active = [l for l in range(L) if np.any(aux.y[l])]
            qps: dict[int, QuadraticProgram] = {}
            schedules: dict[int, StepSchedule] = {}
            for l in active:
                if exact:
                    qps[l] = build_qp(channels, aux, l, spectral=False)
                    continue
                reuse = config.spectral_refresh == "once" and intervals[l] is not None
                qp = build_qp(channels, aux, l, seed=(config.seed, l),
                              spectral=intervals[l] if reuse else None)
                intervals[l] = qp.spectral
                qps[l] = qp
                schedules[l] = make_schedule(config.variant, config.horizon, qp.spectral)
        except (LinAlgError, NotConvergedError) as exc:
            raise SolverError(f"outer iteration {it}: {exc}", trace) from exc

        if inner_hook is not None:
            for l in active:
                inner_hook(it, l, qps[l], V[l].copy(), schedules.get(l))

        traced = inner_trace_at == it
        if traced:
            _record_inner(channels, V, qps, it, 0, start, trace)
        if exact:
            try:
                for l in active:
                    V[l] = solve_qp_exact(qps[l])
            except LinAlgError as exc:
                raise SolverError(f"outer iteration {it}: {exc}", trace) from exc
            if traced:
                _record_inner(channels, V, qps, it, 1, start, trace)
        elif active:
            # cells are independent given (gamma, y); step them in lockstep
            iters = [inner_iterates(qps[l], _cell_block(V[l]), _cell_block(qps[l].q), schedules[l])
                     for l in active]
            for t, Xs in enumerate(zip(*iters), start=1):
                if traced:
                    for l, X in zip(active, Xs):
                        V[l] = _cell_unblock(X, K, d)
                    _record_inner(channels, V, qps, it, t, start, trace)
            for l, X in zip(active, Xs):
                V[l] = _cell_unblock(X, K, d)

        cur = objective_g(channels, V)
        trace.append(it, time.perf_counter() - start, cur)
        if not exact and cur < prev:
            log.debug("outer iteration %d decreased the objective: %.12g -> %.12g", it, prev, cur)
        if abs(cur - prev) <= config.rel_tol * abs(cur):
            trace.converged = True
            break
        prev = cur
        if config.time_budget is not None and trace.records[-1].cumulative_seconds >= config.time_budget:
            break

    return power_normalize(V, channels.config), trace


def _inner_objective(V: np.ndarray, qps: dict[int, QuadraticProgram]) -> float:
    total = 0.0
    for l, qp in qps.items():
        X, Q = _cell_block(V[l]), _cell_block(qp.q)
        total += 0.5 * np.vdot(X, qp.d_op.apply(X)).real - np.vdot(X, Q).real
    return float(total)


def _record_inner(channels, V, qps, it, t, start, trace):
    trace.append(it, time.perf_counter() - start, objective_g(channels, V),
                 _inner_objective(V, qps), t)


def run_solver(channels: ChannelSet, config: SolverConfig, *, V0: np.ndarray | None = None,
               inner_hook: InnerHook | None = None, inner_trace_at: int | None = None):
    """Run the variant named by ``config.variant``; returns ``(V, trace)``.

    ``V`` is power-normalized. ``inner_hook(outer, cell, qp, V_cell, schedule)``
    is called with each QP before the precoder update. With
    ``inner_trace_at = n`` the inner iterates of outer iteration ``n`` are
    added to the trace (``inner_iteration`` set).
    """
    return _run(channels, config, V0, inner_hook, inner_trace_at)


def _with_variant(config: SolverConfig | None, variant: str) -> SolverConfig:
    config = config or SolverConfig()
    if config.variant == variant:
        return config
    return SolverConfig(**{**config.__dict__, "variant": variant})


def run_exact_wmmse(channels: ChannelSet, config: SolverConfig | None = None, **kwargs):
    return run_solver(channels, _with_variant(config, "exact_wmmse"), **kwargs)


def run_finite_horizon(channels: ChannelSet, config: SolverConfig | None = None, **kwargs):
    return run_solver(channels, _with_variant(config, "finite_horizon"), **kwargs)


def run_constant_gd(channels: ChannelSet, config: SolverConfig | None = None, **kwargs):
    return run_solver(channels, _with_variant(config, "constant_gd"), **kwargs)
