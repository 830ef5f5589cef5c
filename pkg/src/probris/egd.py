"""Expectation-based projected gradient ascent for binary RIS phases (E-GD).

The phase vector ``theta`` is drawn with ``P(theta_n = +1) = (1 + y_n) / 2``
and the solver ascends a Taylor surrogate of ``E[f_s / f_I]`` over the box
``y in [-1, 1]^N``.  Order 1 is the ratio of means; order 2 adds the
covariance and variance corrections built from the binary moments.  After
convergence, ``G`` phase vectors are sampled around ``y`` (plus the rounding
``sign(y)``) and the best one is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import binary_moments as bm
from .errors import DomainError, PreconditionError
from .reformulation import BINARY, CategoricalParams, sample
from .scenario import ChannelSet, SinrProblem, capacity

MAX_BACKTRACKS = 60
STEP_FLOOR = 1e-18


@dataclass(frozen=True)
class EgdConfig:
    order: int = 1
    rho: float = 0.5
    eps_armijo: float = 5e-4
    eps_th: float = 1e-2
    beta_init: float = 0.01
    G: int = 100
    max_iter: int = 1000
    # the default start is init_scale * sa_init(ch), just inside the box centre
    init_scale: float = 0.1

    def __post_init__(self):
        if self.order not in (1, 2):
            raise DomainError(f"order must be 1 or 2, got {self.order}")
        if not 0.0 < self.rho < 1.0:
            raise DomainError(f"rho must be in (0, 1), got {self.rho}")
        if self.eps_armijo <= 0 or self.beta_init <= 0:
            raise DomainError("eps_armijo and beta_init must be positive")
        if self.G < 1 or self.max_iter < 1:
            raise DomainError("G and max_iter must be >= 1")
        if not 0.0 < self.init_scale <= 1.0:
            raise DomainError(f"init_scale must be in (0, 1], got {self.init_scale}")


class SinrSurrogate:
    """Taylor surrogates of ``E[f_s/f_I]`` and their gradients for one problem."""

    def __init__(self, prob: SinrProblem):
        self.prob = prob
        self.R0 = bm.QuadForm(prob.R0)
        self.K = bm.QuadForm(prob.K)
        self._sum = None
        self._diff = None

    @property
    def N(self) -> int:
        return self.prob.N

    @property
    def RpK(self) -> bm.QuadForm:
        if self._sum is None:
            self._sum = bm.QuadForm(self.prob.R0 + self.prob.K)
        return self._sum

    @property
    def RmK(self) -> bm.QuadForm:
        if self._diff is None:
            self._diff = bm.QuadForm(self.prob.R0 - self.prob.K)
        return self._diff

    def _den(self, y) -> float:
        den = bm.mean_qf(self.K, self.prob.s, y)
        if den <= 0.0:
            raise DomainError(f"E[f_I] = {den} is not positive; K must be positive definite")
        return den

    def taylor1(self, y) -> float:
        return bm.mean_qf(self.R0, self.prob.c0, y) / self._den(y)

    def grad_taylor1(self, y) -> np.ndarray:
        mu_s = bm.mean_qf(self.R0, self.prob.c0, y)
        mu_i = self._den(y)
        return (bm.grad_qf(self.R0, self.prob.c0, y) - (mu_s / mu_i) * bm.grad_qf(self.K, self.prob.s, y)) / mu_i

    def cross_moment(self, y) -> float:
        """``c_v(y) = E[f_s f_I]``; the quadratic product uses ``ab = ((a+b)^2 - (a-b)^2) / 4``."""
        c0, s = self.prob.c0, self.prob.s
        C = bm.covariance(y)
        return (
            (bm.mean_qs(self.RpK, y) - bm.mean_qs(self.RmK, y)) / 4.0
            + bm.mean_ql(self.R0, s, y)
            + bm.mean_ql(self.K, c0, y)
            + c0 @ C @ s
        )

    def grad_cross_moment(self, y) -> np.ndarray:
        c0, s = self.prob.c0, self.prob.s
        y = np.asarray(y, dtype=float)
        return (
            (bm.grad_qs(self.RpK, y) - bm.grad_qs(self.RmK, y)) / 4.0
            + bm.grad_ql(self.R0, s, y)
            + bm.grad_ql(self.K, c0, y)
            + s * _hollow_dot(c0 * y)
            + c0 * _hollow_dot(s * y)
        )

    def second_moment(self, y) -> float:
        """``v(y) = E[f_I^2]``."""
        s = self.prob.s
        return bm.mean_qs(self.K, y) + s @ bm.covariance(y) @ s + 2.0 * bm.mean_ql(self.K, s, y)

    def grad_second_moment(self, y) -> np.ndarray:
        s = self.prob.s
        y = np.asarray(y, dtype=float)
        return bm.grad_qs(self.K, y) + 2.0 * s * _hollow_dot(s * y) + 2.0 * bm.grad_ql(self.K, s, y)

    def taylor2(self, y) -> float:
        mu_s = bm.mean_qf(self.R0, self.prob.c0, y)
        mu_i = self._den(y)
        return mu_s / mu_i - self.cross_moment(y) / mu_i**2 + self.second_moment(y) * mu_s / mu_i**3

    def grad_taylor2(self, y) -> np.ndarray:
        c0, s = self.prob.c0, self.prob.s
        mu_s = bm.mean_qf(self.R0, c0, y)
        mu_i = self._den(y)
        th_s = bm.grad_qf(self.R0, c0, y)
        th_i = bm.grad_qf(self.K, s, y)
        cv, v = self.cross_moment(y), self.second_moment(y)
        th_cv, th_v = self.grad_cross_moment(y), self.grad_second_moment(y)
        return (
            (th_s - (mu_s / mu_i) * th_i) / mu_i
            - th_cv / mu_i**2
            + mu_s * (th_v / mu_i**3 - 3.0 * v * th_i / mu_i**4)
            + 2.0 * cv * th_i / mu_i**3
            + v * th_s / mu_i**3
        )

    def value(self, y, order: int) -> float:
        return self.taylor1(y) if order == 1 else self.taylor2(y)

    def grad(self, y, order: int) -> np.ndarray:
        return self.grad_taylor1(y) if order == 1 else self.grad_taylor2(y)


def _hollow_dot(v: np.ndarray) -> np.ndarray:
    # E_m @ v with E_m the all-ones matrix with zero diagonal
    return v.sum() - v


def taylor1(y, prob: SinrProblem) -> float:
    return SinrSurrogate(prob).taylor1(y)


def grad_taylor1(y, prob: SinrProblem) -> np.ndarray:
    return SinrSurrogate(prob).grad_taylor1(y)


def taylor2(y, prob: SinrProblem) -> float:
    return SinrSurrogate(prob).taylor2(y)


def grad_taylor2(y, prob: SinrProblem) -> np.ndarray:
    return SinrSurrogate(prob).grad_taylor2(y)


def aligned_phases(ch: ChannelSet) -> np.ndarray:
    """Continuous phases rotating every reflected path onto the direct path.

    Returned angles ``phi`` make ``conj(h_c0[n]) * exp(1j * phi[n])`` share the
    phase of ``h_d0``; a blocked (zero) direct path uses reference phase 0.
    """
    hd = ch.h_d[0]
    ref = np.angle(hd) if abs(hd) > 0 else 0.0
    return np.mod(ref + np.angle(ch.h_c[0]), 2.0 * np.pi)


def project_phases(phi) -> np.ndarray:
    """Nearest of the phases ``{0, pi}`` as ``+1 / -1``; ties go to ``+1``."""
    return np.where(np.cos(np.asarray(phi, dtype=float)) >= 0.0, 1.0, -1.0)


def sa_init(ch: ChannelSet) -> np.ndarray:
    """Signal-alignment phases projected onto ``{-1, +1}``."""
    return project_phases(aligned_phases(ch))


def project_box(v) -> np.ndarray:
    return np.clip(np.asarray(v, dtype=float), -1.0, 1.0)


def ag_line_search(
    y: np.ndarray,
    grad: np.ndarray,
    objective: Callable[[np.ndarray], float],
    cfg: EgdConfig,
    *,
    f_y: float | None = None,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
) -> float:
    """Backtracking Armijo-Goldstein step for *minimizing* ``objective``.

    Accepts ``beta = beta_init * rho**k`` once
    ``objective(P(y - beta*grad)) <= objective(y) - eps * beta * ||g_beta||^2``,
    where ``g_beta = (y - P(y - beta*grad)) / beta`` is the projected gradient
    (equal to ``grad`` whenever the box is inactive).  Returns 0 when no step in
    ``MAX_BACKTRACKS`` reductions qualifies or the trial point stops moving.
    ``project`` replaces the box projection, e.g. with the identity for
    unconstrained angles.
    """
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise PreconditionError("gradient must be finite")
    proj = project_box if project is None else project
    f0 = objective(y) if f_y is None else f_y
    beta = cfg.beta_init
    for _ in range(MAX_BACKTRACKS + 1):
        if beta < STEP_FLOOR:
            break
        y_proj = proj(y - beta * grad)
        if np.array_equal(y_proj, y):
            # no representable move left (or a stationary point)
            break
        g_beta = (y - y_proj) / beta
        if objective(y_proj) <= f0 - cfg.eps_armijo * beta * float(g_beta @ g_beta):
            return beta
        beta *= cfg.rho
    return 0.0


@dataclass
class EgdResult:
    y: np.ndarray
    theta: np.ndarray
    sinr: float
    iterations: int
    truncated: bool
    trace: list[float] = field(default_factory=list)
    samples_best_index: int = 0

    @property
    def capacity(self) -> float:
        return float(capacity(self.sinr))


def best_of_samples(prob: SinrProblem, y: np.ndarray, count: int, rng: np.random.Generator):
    """Sign-round ``y``, draw ``count`` vectors from ``P(+1) = (1+y)/2``, keep the best."""
    rounding = np.where(y >= 0.0, 1.0, -1.0)
    p = np.clip((y + 1.0) / 2.0, 0.0, 1.0)
    params = CategoricalParams(np.column_stack([p, 1.0 - p]), BINARY)
    cands = np.vstack([rounding[None, :], sample(params, rng, count)])
    vals = prob.ratio(cands)
    k = int(np.argmax(vals))
    return cands[k], float(vals[k]), k


@dataclass
class AscentResult:
    x: np.ndarray
    iterations: int
    truncated: bool
    values: list[float] = field(default_factory=list)


def ascend(
    value: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    cfg: EgdConfig,
    *,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
) -> AscentResult:
    """Projected gradient ascent with the Armijo line search.

    The objective is divided by ``|value(x0)|`` so that step sizes and the
    stopping threshold do not depend on its units.  Iteration stops when the
    squared projected-gradient norm ``||dx / beta||^2`` drops to ``eps_th`` or
    the line search finds no ascent step.
    """
    proj = project_box if project is None else project
    x = proj(np.asarray(x0, dtype=float))
    f = value(x)
    scale = abs(f) if f != 0.0 else 1.0
    neg = lambda v: -value(v) / scale  # noqa: E731
    values = [float(f)]
    truncated = True
    it = 0
    for it in range(1, cfg.max_iter + 1):
        g = grad(x) / scale
        step = ag_line_search(x, -g, neg, cfg, f_y=-f / scale, project=proj)
        if step == 0.0:
            truncated = False
            break
        x_new = proj(x + step * g)
        pg = float(np.sum((x_new - x) ** 2)) / step**2
        x = x_new
        f = value(x)
        values.append(float(f))
        if pg <= cfg.eps_th:
            truncated = False
            break
    return AscentResult(x, it, truncated, values)


def egd_solve(
    prob: SinrProblem,
    ch: ChannelSet | None,
    cfg: EgdConfig,
    rng: np.random.Generator,
    *,
    y_init: np.ndarray | None = None,
    sample_tail: bool = True,
) -> EgdResult:
    """Ascend the surrogate from ``init_scale * sa_init(ch)`` (or ``y_init``)."""
    if y_init is None:
        if ch is None:
            raise PreconditionError("either a ChannelSet or y_init is required")
        y_init = cfg.init_scale * sa_init(ch)
    sur = SinrSurrogate(prob)
    res = ascend(
        lambda v: sur.value(v, cfg.order),
        lambda v: sur.grad(v, cfg.order),
        y_init,
        cfg,
    )
    y = res.x
    trace = [float(capacity(max(v, 0.0))) for v in res.values]
    if sample_tail:
        theta, val, k = best_of_samples(prob, y, cfg.G, rng)
    else:
        theta = np.where(y >= 0.0, 1.0, -1.0)
        val, k = float(prob.ratio(theta)), 0
    return EgdResult(y, theta, val, res.iterations, res.truncated, trace, k)
