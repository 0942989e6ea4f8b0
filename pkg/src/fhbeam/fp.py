"""Fractional-programming block updates and the per-cell quadratic program.

The quadratic transform turns the scale-invariant objective into a concave
quadratic in the precoders once the auxiliary variables ``gamma`` and ``y``
are fixed. For cell ``l`` that quadratic is

    sum_k  Re tr(1/2 V_lk^H D_l V_lk - V_lk^H Q_lk)

and ``D_l`` is only ever exposed matrix-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fhbeam.linalg import (
    LN2,
    HermitianOperator,
    LinAlgError,
    SpectralInterval,
    hermitize,
    logdet_hpd,
    solve_hpd,
    spectral_interval,
)
from fhbeam.network import ChannelSet, _check_precoders, link_products, noise_matrices, signals


def _ct(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _trace(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=-2, axis2=-1)


@dataclass
class AuxState:
    gamma: np.ndarray  # (L, K, d, d), Hermitian PSD
    y: np.ndarray  # (L, K, N, d)


def _signal_and_noise(channels: ChannelSet, V: np.ndarray):
    V = _check_precoders(channels, V)
    G = link_products(channels.H, V)
    return signals(G), noise_matrices(channels, V, True, G)


def update_gamma(channels: ChannelSet, V: np.ndarray) -> np.ndarray:
    """Optimal ``gamma_lk = S^H F~^{-1} S`` with ``S = H_lk,l V_lk``."""
    S, F = _signal_and_noise(channels, V)
    return hermitize(_ct(S) @ solve_hpd(F, S))


def update_y(channels: ChannelSet, V: np.ndarray, gamma: np.ndarray | None = None) -> np.ndarray:
    """Optimal ``y_lk = J^{-1} S`` where ``J = S S^H + F~``.

    The optimum does not depend on ``gamma``; it is accepted so the call
    mirrors the block order of the algorithms.
    """
    S, F = _signal_and_noise(channels, V)
    J = F + S @ _ct(S)
    return solve_hpd(J, S)


def update_aux(channels: ChannelSet, V: np.ndarray) -> AuxState:
    """Both auxiliary updates sharing one pass over the channel products."""
    S, F = _signal_and_noise(channels, V)
    gamma = hermitize(_ct(S) @ solve_hpd(F, S))
    y = solve_hpd(F + S @ _ct(S), S)
    return AuxState(gamma, y)


def _logdet_minus_trace(gamma: np.ndarray) -> np.ndarray:
    d = gamma.shape[-1]
    return logdet_hpd(np.eye(d) + gamma) * LN2 - _trace(gamma).real


def eval_fr(channels: ChannelSet, V: np.ndarray, gamma: np.ndarray) -> float:
    S, F = _signal_and_noise(channels, V)
    d = S.shape[-1]
    J = F + S @ _ct(S)
    quad = _trace((np.eye(d) + gamma) @ _ct(S) @ solve_hpd(J, S)).real
    terms = _logdet_minus_trace(gamma) + quad
    return float(np.sum(channels.weights * terms) / LN2)


def eval_fq(channels: ChannelSet, V: np.ndarray, gamma: np.ndarray, y: np.ndarray) -> float:
    S, F = _signal_and_noise(channels, V)
    d = S.shape[-1]
    J = F + S @ _ct(S)
    ig = np.eye(d) + gamma
    lin = 2.0 * _trace(_ct(S) @ y @ ig).real
    quad = _trace(_ct(y) @ J @ y @ ig).real
    terms = _logdet_minus_trace(gamma) + lin - quad
    return float(np.sum(channels.weights * terms) / LN2)


@dataclass
class QuadraticProgram:
    """Data of the per-cell QP: operator ``D_l``, right-hand sides and spectrum.

    ``h_stack`` (``L*K*N x M``) and ``blocks`` (``L*K`` weighted ``N x N``
    matrices) are the factors of ``D_l - shift*I = h_stack^H blkdiag(blocks) h_stack``.
    """

    d_op: HermitianOperator
    q: np.ndarray  # (K, M, d)
    spectral: SpectralInterval | None
    h_stack: np.ndarray
    blocks: np.ndarray
    cell: int = 0


def _make_operator(h_stack: np.ndarray, blocks: np.ndarray, shift: float) -> HermitianOperator:
    n_blk, N, _ = blocks.shape
    rows, M = h_stack.shape
    h_stack_h = np.ascontiguousarray(_ct(h_stack))

    def apply(x: np.ndarray) -> np.ndarray:
        c = x.shape[1]
        t = (h_stack @ x).reshape(n_blk, N, c)
        t = (blocks @ t).reshape(rows, c)
        op.ops += rows * M * c + n_blk * N * N * c + M * rows * c + M * c
        return h_stack_h @ t + shift * x

    op = HermitianOperator(M, apply, shift)
    return op


def build_qp(channels: ChannelSet, aux: AuxState, cell: int = 0, *, seed: int = 0,
             spectral: SpectralInterval | bool | None = None) -> QuadraticProgram:
    """Assemble the matrix-free QP for ``cell``.

    ``spectral=None`` estimates the interval (shift bound plus power
    iteration), ``False`` skips it, an explicit interval is stored as given.
    """
    cfg = channels.config
    L, K, M, N, d = cfg.shape
    w = channels.weights
    gamma, y = aux.gamma, aux.y
    ig = np.eye(d) + gamma
    blocks = w[..., None, None] * (y @ ig @ _ct(y))  # (L, K, N, N)
    shift_terms = w[cell] * cfg.noise_power / cfg.power_budget * _trace(_ct(y[cell]) @ y[cell] @ ig[cell]).real
    shift = float(np.sum(shift_terms))
    if not shift > 0:
        raise LinAlgError("all auxiliary y in the cell are zero; D has no positive identity part")
    h_stack = channels.H[:, :, cell].reshape(L * K * N, M)
    blocks = hermitize(blocks).reshape(L * K, N, N)
    op = _make_operator(h_stack, blocks, shift)
    q = w[cell][:, None, None] * (_ct(channels.H[cell, :, cell]) @ (y[cell] @ ig[cell]))
    if spectral is None:
        spectral = spectral_interval(op, seed=seed)
    elif spectral is False:
        spectral = None
    return QuadraticProgram(op, q, spectral, h_stack, blocks, cell)


def assemble_dense(qp: QuadraticProgram) -> np.ndarray:
    """Explicit ``M x M`` matrix ``D``. Exact solver and test oracles only."""
    rows, M = qp.h_stack.shape
    n_blk, N, _ = qp.blocks.shape
    wh = (qp.blocks @ qp.h_stack.reshape(n_blk, N, M)).reshape(rows, M)
    D = _ct(qp.h_stack) @ wh
    D[np.diag_indices(M)] += qp.d_op.shift
    return hermitize(D)


def gradient(qp: QuadraticProgram, V_k: np.ndarray, k: int) -> np.ndarray:
    return qp.d_op.apply(V_k) - qp.q[k]


def qp_objective(qp: QuadraticProgram, V_k: np.ndarray, k: int) -> float:
    """``Re tr(1/2 V^H D V - V^H Q_k)``."""
    DV = qp.d_op.apply(V_k)
    return float(0.5 * np.vdot(V_k, DV).real - np.vdot(V_k, qp.q[k]).real)
