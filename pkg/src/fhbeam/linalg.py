"""Small complex linear-algebra kernels.

Everything works on numpy arrays and broadcasts over leading batch axes
where that is cheap to support (Cholesky, solves, log-determinants).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

LN2 = np.log(2.0)


class LinAlgError(ArithmeticError):
    """Raised when a matrix that must be Hermitian positive definite is not."""


class NotConvergedError(RuntimeError):
    """Power iteration ran out of iterations; carries the best estimate."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


@dataclass
class HermitianOperator:
    """Matrix-free Hermitian positive definite operator ``X -> D @ X``.

    ``shift`` is a known multiple of the identity contained in ``D`` (so
    ``D - shift*I`` is PSD). ``ops`` counts complex multiply-adds performed
    by ``apply``, when the closure chooses to report them.
    """

    dim: int
    apply_fn: Callable[[np.ndarray], np.ndarray]
    shift: float = 0.0
    ops: int = field(default=0, compare=False)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        vec = x.ndim == 1
        if vec:
            x = x[:, None]
        if x.shape[0] != self.dim:
            raise ValueError(f"operand has {x.shape[0]} rows, operator dim is {self.dim}")
        out = self.apply_fn(x)
        return out[:, 0] if vec else out

    __matmul__ = apply

    def to_dense(self) -> np.ndarray:
        """Assemble column by column. Test oracle only: O(dim^2) memory."""
        return self.apply(np.eye(self.dim, dtype=complex))


@dataclass(frozen=True)
class SpectralInterval:
    lambda_min: float
    lambda_max: float

    def __post_init__(self):
        if not (np.isfinite(self.lambda_min) and np.isfinite(self.lambda_max)):
            raise ValueError("spectral interval must be finite")
        if not 0 < self.lambda_min <= self.lambda_max:
            raise ValueError(
                f"need 0 < lambda_min <= lambda_max, got [{self.lambda_min}, {self.lambda_max}]"
            )

    @property
    def kappa(self) -> float:
        return self.lambda_max / self.lambda_min

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lambda_max + self.lambda_min)

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.lambda_max - self.lambda_min)


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def cholesky(a: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(hermitize(a))
    except np.linalg.LinAlgError as exc:
        raise LinAlgError("matrix is not Hermitian positive definite") from exc


def logdet_hpd(a: np.ndarray) -> np.ndarray | float:
    """Base-2 log-determinant of an HPD matrix (or a stack of them)."""
    c = cholesky(np.asarray(a))
    diag = np.abs(np.diagonal(c, axis1=-2, axis2=-1))
    out = 2.0 * np.sum(np.log(diag), axis=-1) / LN2
    return float(out) if np.ndim(out) == 0 else out


def solve_hpd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for HPD ``a`` via Cholesky; batches over leading axes."""
    c = cholesky(np.asarray(a))
    y = np.linalg.solve(c, b)
    return np.linalg.solve(np.conj(np.swapaxes(c, -1, -2)), y)


def inner(x: np.ndarray, y: np.ndarray) -> complex:
    """Frobenius inner product tr(x^H y)."""
    return complex(np.vdot(x, y))


def fro2(x: np.ndarray) -> float:
    return float(np.vdot(x, x).real)


def max_eigenvalue(op: HermitianOperator, tol: float = 1e-4, max_iters: int = 1000,
                   seed: int = 0) -> float:
    """Largest eigenvalue of ``op`` by power iteration.

    Stops once the relative change of the Rayleigh quotient drops below
    ``tol``. The result is a Rayleigh quotient, hence never above the true
    maximum; callers inflate it by a safety factor before use.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
    v /= np.linalg.norm(v)
    w = op.apply(v)
    rq = float(np.vdot(v, w).real)
    for _ in range(max_iters):
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        w = op.apply(v)
        rq_new = float(np.vdot(v, w).real)
        if abs(rq_new - rq) <= tol * abs(rq_new):
            return rq_new
        rq = rq_new
    raise NotConvergedError(f"power iteration did not converge in {max_iters} iterations", rq)


def min_eigenvalue_bound(op: HermitianOperator) -> float:
    """Analytic lower bound on the smallest eigenvalue: the identity shift."""
    if not op.shift > 0:
        raise LinAlgError(f"operator shift must be positive, got {op.shift}")
    return float(op.shift)


def spectral_interval(op: HermitianOperator, safety: float = 1.01, tol: float = 1e-4,
                      max_iters: int = 1000, seed: int = 0) -> SpectralInterval:
    lo = min_eigenvalue_bound(op)
    hi = safety * max_eigenvalue(op, tol=tol, max_iters=max_iters, seed=seed)
    return SpectralInterval(lo, max(hi, lo))
