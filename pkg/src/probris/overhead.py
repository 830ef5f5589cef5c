"""Rate, power and energy efficiency with channel-estimation and feedback overhead.

Each active RIS element costs one pilot tone (duration ``T0``) plus ``b_F``
bits of configuration feedback.  The fraction of the slot left for data is
``1 - (T_E + T_F) / T``; switched-off elements (``theta_n = 0``) cost nothing.

Rates are returned in bit/s and energy efficiency in bit/J.  The loss
functions used by the ternary solver rescale to Mbit/s and Mbit/J.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Any, Mapping

import numpy as np

from .errors import DomainError, InfeasibleError
from .scenario import ChannelSet, dbm_to_watt, sinr_direct

MEGA = 1e6


@dataclass(frozen=True)
class OverheadModel:
    """Timing and power constants.  Powers are kept in dBm and durations in ms
    exactly as configured; the SI properties below do the conversion."""

    T_ms: float = 100.0
    T0_ms: float = 1.0
    b_F: int = 2
    B_F_Hz: float = 1e6
    p_F_dBm: float = 30.0
    h_F_gain: float = 1.0
    B_Hz: float = 5e6
    N0_dBm_per_Hz: float = -174.0
    P0_dBm: float = 10.0
    p_dBm: float = 0.0
    mu: float = 1.0
    mu_F: float = 1.0
    P_cn_dBm: float = 10.0
    P_c0_dBm: float = 45.0
    N_max: int = 300

    def __post_init__(self):
        for name in ("T_ms", "T0_ms", "B_F_Hz", "h_F_gain", "B_Hz", "mu", "mu_F"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if self.b_F < 1 or self.N_max < 0:
            raise DomainError("b_F must be >= 1 and N_max >= 0")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "OverheadModel":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown overhead keys: {sorted(unknown)}")
        return cls(**dict(data))

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "OverheadModel":
        return OverheadModel(**{**self.to_dict(), **changes})

    @property
    def T(self) -> float:
        return self.T_ms * 1e-3

    @property
    def T0(self) -> float:
        return self.T0_ms * 1e-3

    @property
    def p_F(self) -> float:
        return dbm_to_watt(self.p_F_dBm)

    @property
    def N0_psd(self) -> float:
        return dbm_to_watt(self.N0_dBm_per_Hz)

    @property
    def P0(self) -> float:
        return dbm_to_watt(self.P0_dBm)

    @property
    def p(self) -> float:
        return dbm_to_watt(self.p_dBm)

    @property
    def P_cn(self) -> float:
        return dbm_to_watt(self.P_cn_dBm)

    @property
    def P_c0(self) -> float:
        return dbm_to_watt(self.P_c0_dBm)

    @property
    def feedback_time_per_element(self) -> float:
        snr_F = self.p_F * self.h_F_gain / (self.N0_psd * self.B_F_Hz)
        return self.b_F / (self.B_F_Hz * np.log2(1.0 + snr_F))


def _check_count(n_on) -> np.ndarray:
    n = np.asarray(n_on)
    if np.any(n < 0):
        raise DomainError("active-element count must be >= 0")
    return n


def t_e(n_on, model: OverheadModel):
    """Channel estimation time ``T0 (n + 1)`` in seconds."""
    return model.T0 * (_check_count(n_on) + 1)


def t_f(n_on, model: OverheadModel):
    """Feedback time for ``n`` elements in seconds."""
    return _check_count(n_on) * model.feedback_time_per_element


def overhead_time(n_on, model: OverheadModel):
    return t_e(n_on, model) + t_f(n_on, model)


def max_elements(model: OverheadModel) -> tuple[int, bool]:
    """``(min(N_max, N_0), ok)`` where ``N_0`` is the largest count whose
    overhead stays strictly below ``T``.  ``ok`` is False when not even the
    pilot for the direct link fits (``T0 >= T``), in which case the count is 0.
    """
    if model.T0 >= model.T:
        return 0, False
    per = model.T0 + model.feedback_time_per_element
    # overhead(n) = T0 + n * per < T
    n0 = int(np.floor((model.T - model.T0) / per))
    while n0 > 0 and model.T0 + n0 * per >= model.T:
        n0 -= 1
    while model.T0 + (n0 + 1) * per < model.T:
        n0 += 1
    return min(model.N_max, n0), True


def active_count(theta) -> np.ndarray | int:
    theta = np.asarray(theta, dtype=float)
    cnt = np.count_nonzero(theta, axis=-1)
    return int(cnt) if theta.ndim == 1 else cnt


def prefactor(n_on, model: OverheadModel):
    return 1.0 - overhead_time(n_on, model) / model.T


def _check_ternary(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isin(theta, (-1.0, 0.0, 1.0))):
        raise DomainError("theta entries must be in {-1, 0, 1}")
    return theta


def rate(theta, ch: ChannelSet, model: OverheadModel):
    """Achievable rate in bit/s after the overhead prefactor.

    ``theta`` may be a single vector or a batch of rows.
    """
    theta = _check_ternary(theta)
    pre = prefactor(active_count(theta), model)
    if np.any(pre <= 0.0):
        raise InfeasibleError("estimation and feedback overhead fills the whole slot")
    return pre * model.B_Hz * np.log2(1.0 + sinr_direct(theta, ch))


def p_tot(n_on, model: OverheadModel):
    """Total consumed power in W."""
    n = _check_count(n_on)
    T = model.T
    te, tf = t_e(n, model), t_f(n, model)
    mp = model.mu * model.p
    return (
        model.P0 * te / T
        + (1.0 - te / T) * mp
        + (tf / T) * (model.mu_F * model.p_F - mp)
        + n * model.P_cn
        + model.P_c0
    )


def ee(theta, ch: ChannelSet, model: OverheadModel):
    """Energy efficiency in bit/J."""
    theta = _check_ternary(theta)
    return rate(theta, ch, model) / p_tot(active_count(theta), model)


def _masked(fn, theta, ch, model):
    # infeasible rows get +inf loss instead of raising
    theta = _check_ternary(theta)
    batch = np.atleast_2d(theta)
    out = np.full(batch.shape[0], np.inf)
    ok = prefactor(active_count(batch), model) > 0.0
    if np.any(ok):
        out[ok] = -fn(batch[ok], ch, model) / MEGA
    return out if theta.ndim > 1 else float(out[0])


def rate_loss(ch: ChannelSet, model: OverheadModel):
    """Batch loss ``-R`` in Mbit/s for the ternary solver."""
    return lambda theta: _masked(rate, theta, ch, model)


def ee_loss(ch: ChannelSet, model: OverheadModel):
    """Batch loss ``-EE`` in Mbit/J for the ternary solver."""
    return lambda theta: _masked(ee, theta, ch, model)
