"""Comparison methods and brute-force oracles.

CPP-2 relaxes the binary SINR problem to the box and rounds; CPP-1 optimizes
continuous phase angles and rounds; SA rounds the signal-alignment phases;
UA ignores interference and scans the number of active elements.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .egd import EgdConfig, aligned_phases, ascend, project_phases, sa_init
from .errors import SizeError
from .overhead import OverheadModel, ee, max_elements, prefactor, rate
from .reformulation import Alphabet, best_discrete
from .scenario import ChannelSet, SinrProblem, sinr_direct

EXHAUSTIVE_CAP = 2**22


def exhaustive(J: Callable[[np.ndarray], np.ndarray], alphabet: Alphabet, N: int, *, maximize: bool = True):
    """Global optimum of a batch objective by full enumeration.

    Ties resolve to the first optimum in enumeration order (entry 0 fastest).
    """
    total = alphabet.size**N
    if total > EXHAUSTIVE_CAP:
        raise SizeError(f"{alphabet.size}^{N} = {total} outcomes exceed the cap {EXHAUSTIVE_CAP}")
    return best_discrete(J, alphabet, N, maximize=maximize, cap=EXHAUSTIVE_CAP)


def sign_project(y) -> np.ndarray:
    return np.where(np.asarray(y, dtype=float) >= 0.0, 1.0, -1.0)


def relaxed_ratio(prob: SinrProblem, y) -> float:
    """``f_s(y) / f_I(y)`` on the box, without the binary diagonal identity."""
    return float(prob.f_s(y) / prob.f_I(y))


def grad_relaxed_ratio(prob: SinrProblem, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    fs, fi = prob.f_s(y), prob.f_I(y)
    return ((2.0 * prob.R0 @ y + prob.c0) - (fs / fi) * (2.0 * prob.K @ y + prob.s)) / fi


@dataclass
class RelaxedResult:
    theta: np.ndarray
    sinr: float
    x: np.ndarray
    iterations: int
    values: list[float] = field(default_factory=list)


def cpp2(prob: SinrProblem, ch: ChannelSet | None, cfg: EgdConfig, *, y_init=None) -> RelaxedResult:
    """Projected gradient ascent of the relaxed ratio over the box, then sign rounding.

    Starts where E-GD starts unless ``y_init`` is given.
    """
    if y_init is None:
        y_init = cfg.init_scale * sa_init(ch)
    res = ascend(lambda v: relaxed_ratio(prob, v), lambda v: grad_relaxed_ratio(prob, v), y_init, cfg)
    theta = sign_project(res.x)
    return RelaxedResult(theta, float(prob.ratio(theta)), res.x, res.iterations, res.values)


def phase_sinr(phi, ch: ChannelSet) -> float:
    """SINR with unit-modulus continuous reflection coefficients ``exp(1j*phi)``."""
    e = np.exp(1j * np.asarray(phi, dtype=float))
    gains = ch.h_d + np.conj(ch.h_c) @ e
    power = ch.beta * np.abs(gains) ** 2
    return float(power[0] / (power[1:].sum() + ch.sigma_w2))


def grad_phase_sinr(phi, ch: ChannelSet) -> np.ndarray:
    e = np.exp(1j * np.asarray(phi, dtype=float))
    A = np.conj(ch.h_c)
    gains = ch.h_d + A @ e
    power = ch.beta * np.abs(gains) ** 2
    # d|g_i|^2 / d phi_n = -2 Im(conj(g_i) A[i, n] e_n)
    dpow = -2.0 * ch.beta[:, None] * np.imag(np.conj(gains)[:, None] * A * e[None, :])
    den = power[1:].sum() + ch.sigma_w2
    return (dpow[0] - (power[0] / den) * dpow[1:].sum(axis=0)) / den


def _identity(v: np.ndarray) -> np.ndarray:
    return v


def cpp1(ch: ChannelSet, cfg: EgdConfig, *, phi_init=None, prob: SinrProblem | None = None) -> RelaxedResult:
    """Gradient ascent over continuous phases from signal alignment, then
    rounding each phase to the nearer of ``{0, pi}``."""
    phi0 = aligned_phases(ch) if phi_init is None else np.asarray(phi_init, dtype=float)
    res = ascend(lambda v: phase_sinr(v, ch), lambda v: grad_phase_sinr(v, ch), phi0, cfg, project=_identity)
    phi = np.mod(res.x, 2.0 * np.pi)
    theta = project_phases(phi)
    val = float(prob.ratio(theta)) if prob is not None else sinr_direct(theta, ch)
    return RelaxedResult(theta, val, phi, res.iterations, res.values)


def sa_project(ch: ChannelSet) -> np.ndarray:
    return sa_init(ch)


@dataclass
class UaResult:
    theta: np.ndarray
    n_on: int
    value: float
    scan: np.ndarray


def ua(ch: ChannelSet, model: OverheadModel, *, objective: str = "ee") -> UaResult:
    """Interference-free scan over the number of active elements.

    Elements are ranked by ``|h_c0|``; the strongest ``n`` are switched on with
    sign-rounded aligned phases.  ``value`` and ``scan`` are the objective the
    method believes in, evaluated without interferers; infeasible counts score
    ``-inf``.
    """
    if objective not in ("ee", "rate"):
        raise ValueError(f"objective must be 'ee' or 'rate', got {objective!r}")
    fn = ee if objective == "ee" else rate
    solo = ch.without_interference()
    N = ch.N
    order = np.argsort(-np.abs(ch.h_c[0]), kind="stable")
    signs = sa_init(ch)
    cands = np.zeros((N + 1, N))
    for n in range(1, N + 1):
        idx = order[:n]
        cands[n, idx] = signs[idx]
    n_all = np.arange(N + 1)
    feasible = prefactor(n_all, model) > 0.0
    limit, _ = max_elements(model)
    feasible &= n_all <= max(limit, 0)
    scan = np.full(N + 1, -np.inf)
    if np.any(feasible):
        scan[feasible] = fn(cands[feasible], solo, model)
    n_best = int(np.argmax(scan))
    return UaResult(cands[n_best], n_best, float(scan[n_best]), scan)
