"""Score-function (log-derivative) solvers over binary and ternary phases.

Gradients of ``E[J(theta)]`` with respect to the distribution parameters are
estimated from samples as ``mean((J - b) * grad log P)``.  The baseline ``b``
is set from the closed-form variance of the score, which makes the optimal
value ``N_e * E[g_hat . d] / sum_n Var(score_n)``.

``J`` is always a loss (minimized) and must accept a ``(M, N)`` batch of
phase vectors, returning ``M`` values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, PreconditionError
from .scenario import SinrProblem

DELTA = 1e-3
Objective = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SsaConfig:
    t_max: int = 300
    eps_t: float = 1e-8
    beta_s: float = 0.5
    N_e: int = 200
    b_m: int = 10
    r_max: float = 0.1
    G_s: int = 10000
    eps_bcd: float = 1e-6
    max_bcd_iter: int = 20
    delta: float = DELTA

    def __post_init__(self):
        if self.N_e < 2 or self.b_m < 1:
            raise DomainError("need N_e >= 2 and b_m >= 1")
        if not 0.0 < self.r_max <= 1.0:
            raise DomainError(f"r_max must be in (0, 1], got {self.r_max}")
        if self.t_max < 1 or self.G_s < 1 or self.max_bcd_iter < 1:
            raise DomainError("t_max, G_s and max_bcd_iter must be >= 1")
        if self.beta_s < 0 or self.eps_t <= 0 or self.eps_bcd <= 0:
            raise DomainError("beta_s must be >= 0; eps_t and eps_bcd positive")
        if not 0.0 < self.delta < 0.25:
            raise DomainError(f"delta must be in (0, 0.25), got {self.delta}")

    def replace(self, **changes) -> "SsaConfig":
        from dataclasses import replace

        return replace(self, **changes)


EE_DEFAULTS = SsaConfig(beta_s=0.5)
RATE_DEFAULTS = SsaConfig(beta_s=0.01)
# reduced iteration budget for the ternary solver on a single core; the full
# budget rarely terminates early because the stochastic steps stay above eps_t
DESK_BUDGET = dict(t_max=25, max_bcd_iter=2, G_s=2000)


# ---------------------------------------------------------------------------
# Distributions and scores
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TernaryParams:
    """``P(theta_n = -1) = p_n``, ``P(theta_n = +1) = q_n``, rest on 0."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).copy()
        q = np.asarray(self.q, dtype=float).copy()
        if p.shape != q.shape or p.ndim != 1:
            raise DomainError(f"p and q must be equal-length vectors, got {p.shape}, {q.shape}")
        if np.any(p <= 0) or np.any(p >= 1) or np.any(q <= 0) or np.any(q >= 1):
            raise DomainError("p and q must lie strictly inside (0, 1)")
        if np.any(p + q > 1.0 - 1e-9):
            raise DomainError("p + q must stay below 1")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def N(self) -> int:
        return self.p.size

    @property
    def off(self) -> np.ndarray:
        return 1.0 - self.p - self.q

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        u = rng.random((count, self.N))
        return np.where(u < self.p, -1.0, np.where(u < self.p + self.q, 1.0, 0.0))

    def score(self, theta: np.ndarray, wrt: str) -> np.ndarray:
        return log_grad_ternary(theta, self, wrt)

    def score_var_sum(self, wrt: str) -> float:
        r = self.p if wrt == "p" else self.q
        return float(np.sum(1.0 / r + 1.0 / self.off))

    def pmf(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(theta)
        per = np.where(theta < 0, self.p, np.where(theta > 0, self.q, self.off))
        return per.prod(axis=1)

    def get(self, wrt: str) -> np.ndarray:
        return self.p if wrt == "p" else self.q

    def with_block(self, wrt: str, r: np.ndarray) -> "TernaryParams":
        return TernaryParams(r, self.q) if wrt == "p" else TernaryParams(self.p, r)


@dataclass(frozen=True)
class BinaryProbs:
    """``P(theta_n = +1) = p_n`` for ``theta`` in ``{-1, +1}^N``."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).copy()
        if p.ndim != 1 or np.any(p <= 0) or np.any(p >= 1):
            raise DomainError("p must be a vector strictly inside (0, 1)")
        object.__setattr__(self, "p", p)

    @property
    def N(self) -> int:
        return self.p.size

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return np.where(rng.random((count, self.N)) < self.p, 1.0, -1.0)

    def score(self, theta: np.ndarray, wrt: str = "p") -> np.ndarray:
        return log_grad_binary(theta, self.p)

    def score_var_sum(self, wrt: str = "p") -> float:
        return float(np.sum(1.0 / self.p + 1.0 / (1.0 - self.p)))

    def pmf(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(theta)
        return np.where(theta > 0, self.p, 1.0 - self.p).prod(axis=1)

    def get(self, wrt: str = "p") -> np.ndarray:
        return self.p

    def with_block(self, wrt: str, r: np.ndarray) -> "BinaryProbs":
        return BinaryProbs(r)


def _check_wrt(wrt: str) -> str:
    if wrt not in ("p", "q"):
        raise DomainError(f"wrt must be 'p' or 'q', got {wrt!r}")
    return wrt


def log_grad_ternary(theta, params: TernaryParams, wrt: str) -> np.ndarray:
    """Gradient of ``log P(theta | p, q)`` with respect to ``p`` or ``q``.

    Works row-wise on a batch of phase vectors.
    """
    wrt = _check_wrt(wrt)
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isin(theta, (-1.0, 0.0, 1.0))):
        raise DomainError("theta entries must be in {-1, 0, 1}")
    r = params.p if wrt == "p" else params.q
    sign = -1.0 if wrt == "p" else 1.0
    return theta * (theta + sign) / (2.0 * r) + (theta * theta - 1.0) / params.off


def log_grad_binary(theta, p) -> np.ndarray:
    """``(1 + theta) / (2p) - (1 - theta) / (2(1 - p))`` with ``p = P(+1)``."""
    theta = np.asarray(theta, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0) or np.any(p >= 1):
        raise DomainError("p must lie strictly inside (0, 1)")
    if not np.all(np.abs(theta) == 1.0):
        raise DomainError("theta entries must be -1 or +1")
    return (1.0 + theta) / (2.0 * p) - (1.0 - theta) / (2.0 * (1.0 - p))


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


@dataclass
class EstimatorBatch:
    N_e: int
    g_hat: np.ndarray
    d: np.ndarray
    baseline: float
    theta: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def g_tilde(self) -> np.ndarray:
        return self.g_hat - self.baseline * self.d


def grad_estimate(
    J: Objective,
    params,
    wrt: str,
    N_e: int,
    baseline: float,
    rng: np.random.Generator,
) -> EstimatorBatch:
    """One batch: ``g_hat = mean(J * score)``, ``d = mean(score)``.

    Both means use the same ``N_e`` samples.
    """
    if N_e < 2:
        raise PreconditionError(f"N_e must be >= 2, got {N_e}")
    theta = params.sample(rng, N_e)
    vals = np.asarray(J(theta), dtype=float).reshape(-1)
    sc = params.score(theta, wrt)
    return EstimatorBatch(
        N_e=N_e,
        g_hat=vals @ sc / N_e,
        d=sc.mean(axis=0),
        baseline=float(baseline),
        theta=theta,
        values=vals,
    )


def optimal_baseline(params, wrt: str, g_hats, ds, N_e: int) -> float:
    """Variance-minimizing baseline from ``b_m`` batches of ``(g_hat, d)``."""
    g_hats = np.atleast_2d(np.asarray(g_hats, dtype=float))
    ds = np.atleast_2d(np.asarray(ds, dtype=float))
    cross = float(np.mean(np.sum(g_hats * ds, axis=1)))
    return N_e * cross / params.score_var_sum(wrt)


def estimate_gradient(J: Objective, params, wrt: str, cfg: SsaConfig, rng: np.random.Generator):
    """``b_m`` batches, each baselined with the optimal baseline estimated
    from the *other* batches, averaged into one gradient estimate.

    The leave-one-out baseline is independent of the batch it corrects, so
    the estimate stays unbiased; with ``b_m = 1`` the batch's own value is used.
    Returns ``(g_tilde, b_hat, batches)`` where ``b_hat`` pools all batches.
    """
    batches = [grad_estimate(J, params, wrt, cfg.N_e, 0.0, rng) for _ in range(cfg.b_m)]
    g_hats = np.array([b.g_hat for b in batches])
    ds = np.array([b.d for b in batches])
    b_hat = optimal_baseline(params, wrt, g_hats, ds, cfg.N_e)
    if cfg.b_m > 1:
        cross = np.sum(g_hats * ds, axis=1)
        loo = cfg.N_e * (cross.sum() - cross) / (cfg.b_m - 1) / params.score_var_sum(wrt)
    else:
        loo = np.array([b_hat])
    for b, val in zip(batches, loo):
        b.baseline = float(val)
    g_tilde = np.mean(g_hats - loo[:, None] * ds, axis=0)
    return g_tilde, b_hat, batches


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


def project_block(r: np.ndarray, other: np.ndarray | None, delta: float) -> np.ndarray:
    """Clip to ``[delta, 1 - delta]``, then cap at ``1 - other - delta``."""
    r = np.clip(r, delta, 1.0 - delta)
    if other is not None:
        r = np.minimum(r, 1.0 - other - delta)
    return r


@dataclass
class SubproblemResult:
    r: np.ndarray
    iterations: int
    truncated: bool
    baselines: list[float] = field(default_factory=list)


def ssa_subproblem(
    J: Objective,
    params,
    wrt: str,
    cfg: SsaConfig,
    rng: np.random.Generator,
) -> SubproblemResult:
    """Projected stochastic descent on one parameter block, the other fixed.

    ``params`` carries the starting value of the block being optimized.
    Stops once ``||r_new - r||^2 <= eps_t * N`` or after ``t_max`` steps.
    """
    r = params.get(wrt).copy()
    other = None
    if isinstance(params, TernaryParams):
        other = params.q if wrt == "p" else params.p
    N = r.size
    baselines = []
    truncated = True
    t = 0
    for t in range(1, cfg.t_max + 1):
        g, b_hat, _ = estimate_gradient(J, params, wrt, cfg, rng)
        baselines.append(b_hat)
        r_new = project_block(r - cfg.beta_s * g, other, cfg.delta)
        step = float(np.sum((r_new - r) ** 2))
        r = r_new
        params = params.with_block(wrt, r)
        if step <= cfg.eps_t * N:
            truncated = False
            break
    return SubproblemResult(r, t, truncated, baselines)


def best_sample(J: Objective, params, count: int, rng: np.random.Generator, extra=None):
    """Draw ``count`` vectors (plus optional fixed candidates); return the
    best vector, its loss, and the mean loss of the random draws."""
    draws = params.sample(rng, count)
    vals = np.asarray(J(draws), dtype=float).reshape(-1)
    gamma = float(vals.mean())
    if extra is not None:
        extra = np.atleast_2d(extra)
        draws = np.vstack([extra, draws])
        vals = np.concatenate([np.asarray(J(extra), dtype=float).reshape(-1), vals])
    k = int(np.argmin(vals))
    return draws[k].copy(), float(vals[k]), gamma


@dataclass
class BcdResult:
    theta: np.ndarray
    value: float
    params: TernaryParams
    iterations: int
    converged: bool
    trace: list[float] = field(default_factory=list)
    gammas: list[float] = field(default_factory=list)
    inner_iterations: list[int] = field(default_factory=list)


def ssa_t_bcd(
    J: Objective,
    N: int,
    cfg: SsaConfig,
    rng: np.random.Generator,
) -> BcdResult:
    """Ternary stochastic sampling under block coordinate descent.

    Alternates a ``p`` subproblem and a ``q`` subproblem, then draws ``G_s``
    phase vectors and keeps the best one found so far.  ``trace`` holds the
    best-so-far reward ``-J`` and never decreases; ``gammas`` the mean loss
    of each round's draws, whose relative change drives termination.
    """
    p = rng.uniform(0.0, cfg.r_max, N)
    q = rng.uniform(0.0, cfg.r_max, N)
    p = project_block(p, None, cfg.delta)
    q = project_block(q, p, cfg.delta)
    params = TernaryParams(p, q)

    best_theta = np.zeros(N)
    best_val = float(np.asarray(J(best_theta[None, :])).reshape(-1)[0])
    trace = [-best_val]
    gammas: list[float] = []
    inner: list[int] = []
    converged = False
    i = 0
    for i in range(1, cfg.max_bcd_iter + 1):
        for wrt in ("p", "q"):
            res = ssa_subproblem(J, params, wrt, cfg, rng)
            params = params.with_block(wrt, res.r)
            inner.append(res.iterations)
        theta, val, gamma = best_sample(J, params, cfg.G_s, rng)
        if val < best_val:
            best_theta, best_val = theta, val
        trace.append(-best_val)
        prev = gammas[-1] if gammas else None
        gammas.append(gamma)
        if prev is not None:
            if prev == 0.0:
                change = 0.0 if gamma == 0.0 else np.inf
            else:
                change = abs(gamma - prev) / abs(prev)
            if change <= cfg.eps_bcd:
                converged = True
                break
    return BcdResult(best_theta, best_val, params, i, converged, trace, gammas, inner)


@dataclass
class SsaBResult:
    theta: np.ndarray
    sinr: float
    p: np.ndarray
    iterations: int
    truncated: bool


SSA_B_DEFAULTS = SsaConfig(beta_s=0.02, G_s=100, t_max=300)


def ssa_b_solve(
    prob: SinrProblem,
    cfg: SsaConfig,
    rng: np.random.Generator,
    *,
    p_init: np.ndarray | None = None,
    scale: float | None = None,
) -> SsaBResult:
    """Binary stochastic ascent on ``E[SINR]`` over ``p = P(theta = +1)``.

    The loss is ``-SINR / scale``; by default ``scale`` is the mean SINR of
    the starting distribution estimated from one batch, which makes the step
    size independent of the link budget.
    """
    N = prob.N
    p = np.full(N, 0.5) if p_init is None else np.asarray(p_init, dtype=float)
    p = project_block(p, None, cfg.delta)
    params = BinaryProbs(p)
    if scale is None:
        scale = float(np.mean(prob.ratio(params.sample(rng, cfg.N_e))))
    if not scale > 0:
        raise DomainError("SINR scale must be positive")

    def loss(theta):
        return -prob.ratio(theta) / scale

    res = ssa_subproblem(loss, params, "p", cfg, rng)
    params = BinaryProbs(res.r)
    rounding = np.where(res.r >= 0.5, 1.0, -1.0)
    theta, val, _ = best_sample(loss, params, cfg.G_s, rng, extra=rounding)
    return SsaBResult(theta, float(prob.ratio(theta)), res.r, res.iterations, res.truncated)
