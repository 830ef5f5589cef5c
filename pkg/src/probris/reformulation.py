"""Categorical relaxation of discrete optimization problems.

A discrete vector ``x`` in ``C^n`` is replaced by ``n`` independent
categorical variables with an ``n x b`` row-stochastic parameter matrix
``P``.  Minimizing ``E[f(x)]`` over ``P`` has the point masses
``degen(x)`` among its minimizers, so the exact expectation computed here
by full enumeration doubles as a ground-truth oracle for the solvers.

Outcomes are enumerated in mixed-radix order with entry 0 varying fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, PreconditionError, SizeError

ROW_SUM_TOL = 1e-12
DEGENERATE_TOL = 1e-12
SYMMETRY_TOL = 1e-10
DEFAULT_ENUM_CAP = 2**24
_ENUM_BLOCK = 2**16


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of ``b >= 2`` distinct real values."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise DomainError("alphabet needs at least two values")
        if len(set(vals)) != len(vals):
            raise DomainError(f"alphabet values must be distinct: {vals}")
        object.__setattr__(self, "values", vals)

    @property
    def size(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def index_of(self, x) -> np.ndarray:
        """Column index of every entry of ``x``; raises on non-members."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        hits = x[..., None] == self.as_array()
        ok = hits.any(axis=-1)
        if not ok.all():
            bad = x[~ok]
            raise DomainError(f"entries {bad.tolist()} not in alphabet {self.values}")
        return hits.argmax(axis=-1)


BINARY = Alphabet((1.0, -1.0))


@dataclass(frozen=True)
class CategoricalParams:
    """Row-stochastic ``n x b`` probability matrix over an alphabet."""

    probs: np.ndarray
    alphabet: Alphabet

    def __post_init__(self):
        P = np.array(self.probs, dtype=float, copy=True)
        if P.ndim != 2 or P.shape[0] < 1:
            raise DomainError(f"probs must be a non-empty 2-D matrix, got shape {P.shape}")
        if P.shape[1] != self.alphabet.size:
            raise DomainError(
                f"probs has {P.shape[1]} columns but the alphabet has {self.alphabet.size} values"
            )
        if np.any(P < 0.0) or np.any(P > 1.0):
            raise DomainError("probabilities must lie in [0, 1]")
        dev = np.abs(P.sum(axis=1) - 1.0)
        if np.any(dev > ROW_SUM_TOL):
            row = int(np.argmax(dev))
            raise DomainError(f"row {row} sums to {P[row].sum()!r}, not 1")
        P.setflags(write=False)
        object.__setattr__(self, "probs", P)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def b(self) -> int:
        return self.probs.shape[1]

    def is_degenerate(self) -> bool:
        return bool(np.all(np.abs(self.probs.max(axis=1) - 1.0) <= DEGENERATE_TOL))


def degen(x, alphabet: Alphabet) -> CategoricalParams:
    """One-hot parameter matrix placing all mass on ``x``."""
    idx = alphabet.index_of(x)
    P = np.zeros((idx.size, alphabet.size))
    P[np.arange(idx.size), idx] = 1.0
    return CategoricalParams(P, alphabet)


def degen_inverse(params: CategoricalParams) -> np.ndarray:
    """Recover the discrete vector encoded by a degenerate parameter matrix."""
    P = params.probs
    peak = P.max(axis=1)
    for i, m in enumerate(peak):
        if abs(m - 1.0) > DEGENERATE_TOL:
            raise PreconditionError(f"row {i} is not degenerate: {P[i].tolist()}")
    return params.alphabet.as_array()[P.argmax(axis=1)]


def outcome_digits(n: int, b: int, start: int, stop: int) -> np.ndarray:
    """Mixed-radix digits of outcomes ``start..stop-1`` (entry 0 fastest)."""
    k = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((k.size, n), dtype=np.int64)
    for i in range(n):
        digits[:, i] = k % b
        k //= b
    return digits


def enumerate_outcomes(alphabet: Alphabet, n: int, cap: int = DEFAULT_ENUM_CAP) -> np.ndarray:
    """All ``b**n`` vectors as a ``(b**n, n)`` array in enumeration order."""
    total = alphabet.size**n
    if total > cap:
        raise SizeError(f"{total} outcomes exceed the enumeration cap {cap}")
    return alphabet.as_array()[outcome_digits(n, alphabet.size, 0, total)]


def expectation_exact(
    f: Callable,
    params: CategoricalParams,
    *,
    vectorized: bool = False,
    cap: int = DEFAULT_ENUM_CAP,
) -> float:
    """Exact ``E[f(x)]`` by summing over all ``b**n`` outcomes.

    With ``vectorized=True`` the callback receives a ``(m, n)`` block of
    outcomes and must return ``m`` values; otherwise it is called once per
    outcome with a length-``n`` array.
    """
    n, b = params.n, params.b
    total = b**n
    if total > cap:
        raise SizeError(
            f"{total} outcomes exceed the enumeration cap {cap}; use a Monte Carlo estimate instead"
        )
    vals = params.alphabet.as_array()
    P = params.probs
    acc = 0.0
    for start in range(0, total, _ENUM_BLOCK):
        stop = min(start + _ENUM_BLOCK, total)
        digits = outcome_digits(n, b, start, stop)
        weights = np.prod(P[np.arange(n), digits], axis=1)
        xs = vals[digits]
        if vectorized:
            fx = np.asarray(f(xs), dtype=float).reshape(-1)
        else:
            fx = np.fromiter((f(x) for x in xs), dtype=float, count=xs.shape[0])
        # zero-probability outcomes may carry inf/nan objective values
        mask = weights > 0.0
        acc += float(np.dot(weights[mask], fx[mask]))
    return acc


def sample(params: CategoricalParams, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. vectors; returns a ``(count, n)`` array."""
    if count < 1:
        raise PreconditionError(f"sample count must be >= 1, got {count}")
    cdf = np.cumsum(params.probs, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random((count, params.n))
    idx = (u[..., None] >= cdf[None, :, :]).sum(axis=-1)
    return params.alphabet.as_array()[idx]


def check_symmetric(W: np.ndarray, tol: float = SYMMETRY_TOL, name: str = "matrix") -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DomainError(f"{name} must be square, got shape {W.shape}")
    if not np.allclose(W, W.T, rtol=0.0, atol=tol):
        raise DomainError(f"{name} is not symmetric within {tol}")
    return W


def boxqp_transform(W) -> tuple[np.ndarray, float]:
    """Binary QP ``x^T W x`` to the box QP ``y^T W_wd y + Tr(W)``.

    The returned pair satisfies ``y @ W_wd @ y + offset == y @ W @ y`` at every
    vertex ``y`` of ``[-1, 1]^n``, and equals ``E[x^T W x]`` when ``y = E[x]``.
    """
    W = check_symmetric(W, name="W")
    W_wd = W - np.diag(np.diag(W))
    return W_wd, float(np.trace(W))


def best_discrete(
    f: Callable[[np.ndarray], np.ndarray],
    alphabet: Alphabet,
    n: int,
    *,
    maximize: bool = False,
    cap: int = DEFAULT_ENUM_CAP,
) -> tuple[np.ndarray, float]:
    """Exhaustive optimum of a vectorized objective; first optimum wins ties."""
    xs = enumerate_outcomes(alphabet, n, cap)
    vals = np.asarray(f(xs), dtype=float).reshape(-1)
    k = int(np.argmax(vals) if maximize else np.argmin(vals))
    return xs[k], float(vals[k])


__all__ = [
    "Alphabet",
    "BINARY",
    "CategoricalParams",
    "DEFAULT_ENUM_CAP",
    "best_discrete",
    "boxqp_transform",
    "check_symmetric",
    "degen",
    "degen_inverse",
    "enumerate_outcomes",
    "expectation_exact",
    "outcome_digits",
    "sample",
]
