"""Rician channel generation and the fractional-quadratic SINR model.

The received signal is ``(h_d0 + h_c0^H theta) x_0 + sum_i (h_di + h_ci^H theta) x_i + w``
with cascaded channels ``h_ci = h_i * conj(f_i)``.  For a binary phase vector
the SINR is the ratio of two quadratic-plus-linear forms,
``(theta^T R0 theta + c0^T theta) / (theta^T K theta + s^T theta)``.
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Mapping

import numpy as np

from .errors import DomainError


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((float(dbm) - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (float(db) / 10.0)


def watt_to_dbm(w: float) -> float:
    return 10.0 * np.log10(w) + 30.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Link-level parameters; powers in dBm, path loss in dB."""

    N: int = 16
    N_I: int = 1
    kappa: float = 4.0
    p_dBm: float = 0.0
    delta_PL_dB: float = -110.0
    B_Hz: float = 5e6
    N0_dBm_per_Hz: float = -174.0
    blocked_direct: bool = True
    # None mirrors blocked_direct
    interferer_blocked: bool | None = None
    interferer_p_dBm: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise DomainError(f"N must be >= 1, got {self.N}")
        if self.N_I < 0:
            raise DomainError(f"N_I must be >= 0, got {self.N_I}")
        if not self.kappa >= 0:
            raise DomainError(f"kappa must be >= 0, got {self.kappa}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**dict(data))

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "ScenarioConfig":
        return ScenarioConfig(**{**self.to_dict(), **changes})

    @property
    def beta(self) -> float:
        return dbm_to_watt(self.p_dBm) * db_to_linear(self.delta_PL_dB)

    @property
    def beta_interferer(self) -> float:
        p = self.p_dBm if self.interferer_p_dBm is None else self.interferer_p_dBm
        return dbm_to_watt(p) * db_to_linear(self.delta_PL_dB)

    @property
    def sigma_w2(self) -> float:
        return dbm_to_watt(self.N0_dBm_per_Hz) * self.B_Hz


@dataclass(frozen=True)
class ChannelSet:
    """Channels of the user (row 0) and ``N_I`` interferers (rows 1..)."""

    h_d: np.ndarray
    h: np.ndarray
    f: np.ndarray
    beta: np.ndarray
    sigma_w2: float

    def __post_init__(self):
        h_d = np.atleast_1d(np.asarray(self.h_d, dtype=complex))
        h = np.atleast_2d(np.asarray(self.h, dtype=complex))
        f = np.atleast_2d(np.asarray(self.f, dtype=complex))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if not (h_d.shape[0] == h.shape[0] == f.shape[0] == beta.shape[0]):
            raise DomainError("per-transmitter arrays disagree on the transmitter count")
        if h.shape != f.shape:
            raise DomainError(f"h and f shapes differ: {h.shape} vs {f.shape}")
        if np.any(beta <= 0):
            raise DomainError("beta must be positive")
        if not self.sigma_w2 > 0:
            raise DomainError("sigma_w2 must be positive")
        for name, val in (("h_d", h_d), ("h", h), ("f", f), ("beta", beta)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "sigma_w2", float(self.sigma_w2))

    @property
    def N(self) -> int:
        return self.h.shape[1]

    @property
    def N_I(self) -> int:
        return self.h.shape[0] - 1

    @property
    def h_c(self) -> np.ndarray:
        """Cascaded channels ``(h_i^H diag(f_i))^H``, one row per transmitter."""
        return self.h * np.conj(self.f)

    def without_interference(self) -> "ChannelSet":
        return ChannelSet(self.h_d[:1], self.h[:1], self.f[:1], self.beta[:1], self.sigma_w2)

    @classmethod
    def from_cascaded(cls, h_d, h_c, beta, sigma_w2) -> "ChannelSet":
        """Build from cascaded gains directly (``f`` set to ones)."""
        h_c = np.atleast_2d(np.asarray(h_c, dtype=complex))
        return cls(h_d, h_c, np.ones_like(h_c), beta, sigma_w2)


def _rician(rng: np.random.Generator, shape, kappa: float) -> np.ndarray:
    phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    los = np.exp(1j * phase)
    if np.isinf(kappa):
        return los
    nlos = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return np.sqrt(kappa / (1.0 + kappa)) * los + np.sqrt(1.0 / (1.0 + kappa)) * nlos


def gen_rician(cfg: ScenarioConfig, rng: np.random.Generator) -> ChannelSet:
    """One channel realization; ``kappa=inf`` gives LoS-only unit-modulus entries."""
    T = cfg.N_I + 1
    h_d = _rician(rng, (T,), cfg.kappa)
    h = _rician(rng, (T, cfg.N), cfg.kappa)
    f = _rician(rng, (T, cfg.N), cfg.kappa)
    interferer_blocked = cfg.blocked_direct if cfg.interferer_blocked is None else cfg.interferer_blocked
    if cfg.blocked_direct:
        h_d[0] = 0.0
    if interferer_blocked:
        h_d[1:] = 0.0
    beta = np.array([cfg.beta] + [cfg.beta_interferer] * cfg.N_I)
    return ChannelSet(h_d, h, f, beta, cfg.sigma_w2)


def stream_seed(master: int, *keys: int | str) -> np.random.SeedSequence:
    """Deterministic child seed for ``(master, *keys)``; strings are CRC32-hashed."""
    spawn = tuple(k if isinstance(k, int) else zlib.crc32(k.encode()) for k in keys)
    return np.random.SeedSequence(entropy=int(master), spawn_key=spawn)


def realization_rng(master: int, index: int, *extra: int | str) -> np.random.Generator:
    return np.random.default_rng(stream_seed(master, index, *extra))


@dataclass(frozen=True)
class SinrProblem:
    """``SINR(theta) = (theta^T R0 theta + c0^T theta) / (theta^T K theta + s^T theta)``."""

    R0: np.ndarray
    K: np.ndarray
    c0: np.ndarray
    s: np.ndarray
    sigma_w2: float = field(default=0.0)

    @property
    def N(self) -> int:
        return self.R0.shape[0]

    def f_s(self, theta) -> np.ndarray | float:
        return _quad_lin(self.R0, self.c0, theta)

    def f_I(self, theta) -> np.ndarray | float:
        return _quad_lin(self.K, self.s, theta)

    def ratio(self, theta) -> np.ndarray | float:
        """Unchecked ``f_s / f_I``; ``theta`` may be a batch of rows."""
        return self.f_s(theta) / self.f_I(theta)


def _quad_lin(A: np.ndarray, b: np.ndarray, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 1:
        return float(theta @ A @ theta + b @ theta)
    return np.einsum("mi,ij,mj->m", theta, A, theta) + theta @ b


def _symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def transmitter_terms(ch: ChannelSet, i: int) -> tuple[np.ndarray, np.ndarray]:
    """``R_i`` and ``c_i`` for transmitter ``i``."""
    N = ch.N
    hc = ch.h_c[i]
    R = ch.beta[i] * (np.real(np.outer(hc, np.conj(hc))) + (abs(ch.h_d[i]) ** 2 / N) * np.eye(N))
    c = 2.0 * ch.beta[i] * np.real(np.conj(ch.h_d[i] * hc))
    return _symmetrize(R), c


def build_problem(ch: ChannelSet) -> SinrProblem:
    R0, c0 = transmitter_terms(ch, 0)
    N = ch.N
    K = (ch.sigma_w2 / N) * np.eye(N)
    s = np.zeros(N)
    for i in range(1, ch.N_I + 1):
        Ri, ci = transmitter_terms(ch, i)
        K = K + Ri
        s = s + ci
    return SinrProblem(R0, _symmetrize(K), c0, s, ch.sigma_w2)


def _check_binary(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.abs(theta) == 1.0):
        raise DomainError("theta entries must be -1 or +1")
    return theta


def sinr(theta, prob: SinrProblem):
    """SINR of a binary phase vector (or a batch of them, one per row)."""
    return prob.ratio(_check_binary(theta))


def capacity(snr):
    """``log2(1 + SINR)`` in bit/s/Hz."""
    return np.log2(1.0 + np.asarray(snr, dtype=float)) if np.ndim(snr) else float(np.log2(1.0 + snr))


def sinr_direct(theta, ch: ChannelSet):
    """SINR from the channels for any real ``theta`` (zeros switch elements off)."""
    theta = np.asarray(theta, dtype=float)
    gains = ch.h_d[None, :] + theta.reshape(-1, ch.N) @ np.conj(ch.h_c).T
    power = ch.beta[None, :] * np.abs(gains) ** 2
    out = power[:, 0] / (power[:, 1:].sum(axis=1) + ch.sigma_w2)
    return float(out[0]) if theta.ndim == 1 else out
