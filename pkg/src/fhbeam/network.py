"""Downlink MIMO network model: channels, rates and the scale-invariant objective.

Array conventions used throughout the package:

* channels ``H`` has shape ``(L, K, L, N, M)``; ``H[l, k, i]`` is the channel
  from BS ``i`` to user ``k`` of cell ``l``.
* precoders ``V`` have shape ``(L, K, M, d)``; ``V[l, k]`` serves user ``k``
  of cell ``l`` from BS ``l``.

Rates and objectives are in bits (log base 2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fhbeam.linalg import hermitize, logdet_hpd, solve_hpd


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * np.log10(watt) + 30.0


@dataclass(frozen=True)
class SystemConfig:
    """Sizes, powers (linear watts) and geometry of a downlink network."""

    num_cells: int
    tx_antennas: int
    rx_antennas: int
    streams: int
    users_per_cell: int
    noise_power: float
    power_budget: float
    weights: float | tuple[float, ...] = 1.0
    bs_spacing: float = 800.0
    cell_radius: float | None = None
    shadowing_sigma_db: float = 8.0
    min_distance: float = 10.0

    def __post_init__(self):
        for name in ("num_cells", "tx_antennas", "rx_antennas", "streams", "users_per_cell"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ValueError(f"{name} must be a positive integer, got {val!r}")
        if self.streams > self.rx_antennas:
            raise ValueError(
                f"streams d={self.streams} exceeds rx_antennas N={self.rx_antennas} (need d <= N)"
            )
        if self.tx_antennas < self.rx_antennas:
            raise ValueError(
                f"tx_antennas M={self.tx_antennas} is below rx_antennas N={self.rx_antennas} (need M >= N)"
            )
        if not self.noise_power > 0 or not self.power_budget > 0:
            raise ValueError("noise_power and power_budget must be strictly positive")
        w = np.asarray(self.weights, dtype=float)
        if w.ndim == 1 and w.size != self.num_cells * self.users_per_cell:
            raise ValueError(
                f"weights must be a scalar or have L*K={self.num_cells * self.users_per_cell} entries"
            )
        if w.ndim > 1 or not np.all(w > 0):
            raise ValueError("weights must be strictly positive")
        if self.shadowing_sigma_db < 0 or self.bs_spacing <= 0 or self.min_distance <= 0:
            raise ValueError("geometry parameters out of range")
        if self.radius <= self.min_distance:
            raise ValueError("cell radius must exceed the minimum BS-user distance")

    @property
    def radius(self) -> float:
        return self.cell_radius if self.cell_radius is not None else self.bs_spacing / 2.0

    @property
    def weight_matrix(self) -> np.ndarray:
        shape = (self.num_cells, self.users_per_cell)
        return np.broadcast_to(np.asarray(self.weights, dtype=float), (shape[0] * shape[1],)).reshape(shape)

    @property
    def shape(self) -> tuple[int, int, int, int, int]:
        """``(L, K, M, N, d)``."""
        return (self.num_cells, self.users_per_cell, self.tx_antennas, self.rx_antennas, self.streams)


@dataclass(frozen=True, eq=False)
class ChannelSet:
    H: np.ndarray
    config: SystemConfig
    distances: np.ndarray | None = None  # (L, K, L) meters, when generated
    shadowing_db: np.ndarray | None = None

    def __post_init__(self):
        L, K, M, N, _ = self.config.shape
        H = np.array(self.H, dtype=complex)
        if H.shape != (L, K, L, N, M):
            raise ValueError(f"channel array has shape {H.shape}, expected {(L, K, L, N, M)}")
        if not np.all(np.isfinite(H)):
            raise ValueError("channel entries must be finite")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @classmethod
    def single_cell(cls, H: Sequence[np.ndarray] | np.ndarray, config: SystemConfig) -> "ChannelSet":
        """Build from per-user channels ``H_k`` with shape ``(K, N, M)``."""
        H = np.asarray(H)
        return cls(H[None, :, None], config)

    @property
    def weights(self) -> np.ndarray:
        return self.config.weight_matrix

    def equals(self, other: "ChannelSet") -> bool:
        return self.config == other.config and np.array_equal(self.H, other.H)


def bs_positions(num_cells: int, spacing: float) -> np.ndarray:
    """BS coordinates: three mutually adjacent cells for L=3, a hexagonal lattice otherwise."""
    if num_cells == 1:
        return np.zeros((1, 2))
    if num_cells == 3:
        ang = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
        r = spacing / np.sqrt(3.0)
        return r * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    rings = int(np.ceil(np.sqrt(num_cells))) + 1
    pts = []
    for a in range(-rings, rings + 1):
        for b in range(-rings, rings + 1):
            x = spacing * (a + 0.5 * b)
            y = spacing * (np.sqrt(3.0) / 2 * b)
            pts.append((np.hypot(x, y), np.arctan2(y, x) % (2 * np.pi), x, y))
    pts.sort()
    return np.array([[p[2], p[3]] for p in pts[:num_cells]])


def pathloss_gain(distance: np.ndarray | float, shadowing_db: np.ndarray | float = 0.0) -> np.ndarray:
    """Linear power gain for a loss of ``15.3 + 37.6 log10(l) + shadowing`` dB."""
    loss_db = 15.3 + 37.6 * np.log10(distance) + shadowing_db
    return 10.0 ** (-loss_db / 10.0)


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) entries, unit variance split evenly over real and imaginary parts."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _drop_users(rng: np.random.Generator, count: int, radius: float, floor: float) -> np.ndarray:
    out = np.empty((count, 2))
    n = 0
    while n < count:
        r = radius * np.sqrt(rng.random())
        theta = 2 * np.pi * rng.random()
        if r < floor:
            continue
        out[n] = r * np.cos(theta), r * np.sin(theta)
        n += 1
    return out


def generate_channels(config: SystemConfig, seed: int) -> ChannelSet:
    """Draw users uniformly in each cell disk and Rayleigh channels with path loss and shadowing."""
    rng = np.random.default_rng(seed)
    L, K, M, N, _ = config.shape
    bs = bs_positions(L, config.bs_spacing)
    users = np.stack([bs[l] + _drop_users(rng, K, config.radius, config.min_distance) for l in range(L)])
    dist = np.linalg.norm(users[:, :, None, :] - bs[None, None, :, :], axis=-1)
    dist = np.maximum(dist, config.min_distance)
    shadow = config.shadowing_sigma_db * rng.standard_normal((L, K, L))
    gain = pathloss_gain(dist, shadow)
    G = complex_normal(rng, (L, K, L, N, M))
    return ChannelSet(np.sqrt(gain)[..., None, None] * G, config, dist, shadow)


# ---------------------------------------------------------------------------
# rates and objectives


def _check_precoders(channels: ChannelSet, V: np.ndarray) -> np.ndarray:
    L, K, M, _, d = channels.config.shape
    V = np.asarray(V)
    if V.shape != (L, K, M, d):
        raise ValueError(f"precoders have shape {V.shape}, expected {(L, K, M, d)}")
    return V


def cell_power(V: np.ndarray) -> np.ndarray:
    """Per-cell transmit power ``sum_k ||V_lk||_F^2``, shape ``(L,)``."""
    return np.sum(np.abs(V) ** 2, axis=(1, 2, 3))


def link_products(H: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``G[l, k, i, j] = H[l, k, i] @ V[i, j]``, shape ``(L, K, L, K, N, d)``."""
    return np.matmul(H[:, :, :, None], V[None, None])


def interference_covariances(G: np.ndarray) -> np.ndarray:
    """``sum_{(i,j) != (l,k)} G[l,k,i,j] G[l,k,i,j]^H`` for every receiver, shape ``(L, K, N, N)``."""
    L, K = G.shape[:2]
    cov = G @ np.conj(np.swapaxes(G, -1, -2))
    idx_l, idx_k = np.meshgrid(np.arange(L), np.arange(K), indexing="ij")
    cov[idx_l, idx_k, idx_l, idx_k] = 0.0
    return cov.sum(axis=(2, 3))


def signals(G: np.ndarray) -> np.ndarray:
    """Own-link products ``H[l,k,l] @ V[l,k]``, shape ``(L, K, N, d)``."""
    L, K = G.shape[:2]
    idx_l, idx_k = np.meshgrid(np.arange(L), np.arange(K), indexing="ij")
    return G[idx_l, idx_k, idx_l, idx_k]


def noise_levels(channels: ChannelSet, V: np.ndarray, scaled: bool) -> np.ndarray:
    """Per-cell noise term: ``sigma^2`` or ``sigma^2 * p_l / P_l`` when ``scaled``."""
    cfg = channels.config
    L = cfg.num_cells
    if not scaled:
        return np.full(L, cfg.noise_power)
    p = cell_power(V)
    if np.any(p <= 0):
        raise ValueError("scaled noise is undefined for a cell with all-zero precoders")
    return cfg.noise_power * p / cfg.power_budget


def noise_matrices(channels: ChannelSet, V: np.ndarray, scaled: bool, G: np.ndarray | None = None) -> np.ndarray:
    """Interference-plus-noise matrices ``F`` (or ``F~`` when ``scaled``), shape ``(L, K, N, N)``."""
    V = _check_precoders(channels, V)
    if G is None:
        G = link_products(channels.H, V)
    noise = noise_levels(channels, V, scaled)
    N = channels.config.rx_antennas
    F = interference_covariances(G) + noise[:, None, None, None] * np.eye(N)
    return hermitize(F)


def _log_sinr_terms(S: np.ndarray, F: np.ndarray) -> np.ndarray:
    d = S.shape[-1]
    X = solve_hpd(F, S)
    A = np.eye(d) + np.conj(np.swapaxes(S, -1, -2)) @ X
    return np.maximum(logdet_hpd(A), 0.0)


def rates(channels: ChannelSet, V: np.ndarray) -> np.ndarray:
    """All achievable rates ``R_lk`` in bits, shape ``(L, K)``."""
    V = _check_precoders(channels, V)
    G = link_products(channels.H, V)
    return _log_sinr_terms(signals(G), noise_matrices(channels, V, False, G))


def rate(channels: ChannelSet, V: np.ndarray, l: int, k: int) -> float:
    return float(rates(channels, V)[l, k])


def wsr(channels: ChannelSet, V: np.ndarray) -> float:
    """Weighted sum rate in bits/s/Hz."""
    return float(np.sum(channels.weights * rates(channels, V)))


def scaled_noise_matrix(channels: ChannelSet, V: np.ndarray, l: int, k: int) -> np.ndarray:
    return noise_matrices(channels, V, True)[l, k]


def scaled_rates(channels: ChannelSet, V: np.ndarray) -> np.ndarray:
    V = _check_precoders(channels, V)
    G = link_products(channels.H, V)
    return _log_sinr_terms(signals(G), noise_matrices(channels, V, True, G))


def objective_g(channels: ChannelSet, V: np.ndarray) -> float:
    """Weighted sum rate with the power-scaled noise; invariant to ``V -> cV``."""
    return float(np.sum(channels.weights * scaled_rates(channels, V)))


def power_normalize(V: np.ndarray, config: SystemConfig) -> np.ndarray:
    """Scale each cell so that its total power equals the budget."""
    p = cell_power(V)
    if np.any(p <= 0):
        raise ValueError("cannot normalize a cell with all-zero precoders")
    rho = np.sqrt(config.power_budget / p)
    return V * rho[:, None, None, None]


def random_precoders(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0,1) precoders normalized to the per-cell budget."""
    L, K, M, _, d = config.shape
    return power_normalize(complex_normal(rng, (L, K, M, d)), config)
