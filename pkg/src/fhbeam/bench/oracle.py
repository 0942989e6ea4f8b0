"""Self-checks against brute-force and dense-linear-algebra references."""

from __future__ import annotations

import numpy as np

from fhbeam.fp import AuxState, assemble_dense, build_qp
from fhbeam.linalg import (
    HermitianOperator,
    LN2,
    SpectralInterval,
    logdet_hpd,
    max_eigenvalue,
    min_eigenvalue_bound,
    solve_hpd,
)
from fhbeam.network import ChannelSet, SystemConfig, complex_normal
from fhbeam.schedule import brute_force_minimax, chebyshev_schedule, grid_slack, minimax_value


def random_hpd(rng: np.random.Generator, n: int, shift: float = 0.5) -> np.ndarray:
    A = complex_normal(rng, (n, n))
    return A @ A.conj().T / n + shift * np.eye(n)


def chebyshev_checks(resolution: int = 200) -> list[tuple[str, bool, str]]:
    out = []
    val = minimax_value(chebyshev_schedule(2, SpectralInterval(1.0, 3.0)))
    out.append(("chebyshev T=2 on [1,3] equals 1/7", abs(val - 1 / 7) < 1e-12, f"{val!r}"))
    for T in (1, 2, 3):
        for lo, hi in ((1.0, 3.0), (0.5, 6.0)):
            iv = SpectralInterval(lo, hi)
            sched = chebyshev_schedule(T, iv)
            cheb = minimax_value(sched)
            best, _ = brute_force_minimax(T, iv, resolution)
            ok = best >= cheb - grid_slack(sched, resolution)
            out.append((f"brute force T={T} on [{lo},{hi}] not below chebyshev", ok,
                        f"brute={best:.6g} chebyshev={cheb:.6g}"))
    return out


def linalg_checks(seed: int = 0, trials: int = 5) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(trials):
        n = int(rng.integers(4, 24))
        A = random_hpd(rng, n)
        B = complex_normal(rng, (n, 3))
        X = solve_hpd(A, B)
        res = np.linalg.norm(A @ X - B) / np.linalg.norm(B)
        out.append((f"solve_hpd residual #{i}", res < 1e-10, f"{res:.2e}"))
        ev = np.linalg.eigvalsh(A)
        ld = logdet_hpd(A)
        ref = np.sum(np.log(ev)) / LN2
        out.append((f"logdet_hpd #{i}", abs(ld - ref) <= 1e-10 * max(1, abs(ref)), f"{ld:.12g} vs {ref:.12g}"))
        op = HermitianOperator(n, lambda x, A=A: A @ x, shift=0.5)
        lam = 1.01 * max_eigenvalue(op, seed=i, tol=1e-8)
        out.append((f"power iteration brackets lambda_max #{i}", lam >= ev[-1] * (1 - 1e-6), f"{lam:.6g} vs {ev[-1]:.6g}"))
        out.append((f"shift bounds lambda_min #{i}", min_eigenvalue_bound(op) <= ev[0] + 1e-12,
                    f"{op.shift} vs {ev[0]:.6g}"))
    # matrix-free D against its dense assembly
    cfg = SystemConfig(2, 12, 3, 2, 2, noise_power=0.3, power_budget=2.0, weights=(1.0, 2.0, 0.5, 1.5))
    ch = ChannelSet(complex_normal(rng, (2, 2, 2, 3, 12)), cfg)
    aux = AuxState(np.zeros((2, 2, 2, 2), complex), complex_normal(rng, (2, 2, 3, 2)))
    g = complex_normal(rng, (2, 2, 2, 2))
    aux.gamma = g @ np.conj(np.swapaxes(g, -1, -2))
    qp = build_qp(ch, aux, 1, spectral=False)
    err = np.max(np.abs(qp.d_op.to_dense() - assemble_dense(qp)))
    out.append(("matrix-free D matches dense assembly", err < 1e-10, f"{err:.2e}"))
    return out


def run_all() -> list[tuple[str, bool, str]]:
    return linalg_checks() + chebyshev_checks()
