"""Self-consistency equations and thermodynamic-limit free energies.

The pattern average <.>_xi is taken exactly over the 2^P equiprobable sign
vectors (its large-N value), so every function here is a deterministic, pure
function of (M, beta).  The two closed theories are

    classical:     M_mu = <xi^mu tanh(beta xi . M)>_xi
                   alpha = ln 2 + <ln cosh(beta xi . M)>_xi - (beta/2) |M|^2

    relativistic:  M_mu = <xi^mu tanh(beta xi . M / sqrt(1+|M|^2))>_xi
                   alpha = ln 2 + <ln cosh(beta xi . M / sqrt(1+|M|^2))>_xi
                           + beta / sqrt(1+|M|^2)

with alpha the (1/N) E ln Z convention.  Both maps bifurcate continuously at
beta_c = 1, where the rescaled overlap fluctuations 1/(1-beta) diverge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from . import _kernels
from .model import CLASSICAL, RELATIVISTIC, ModelKind

MAX_ENUM_P = 20  # 2^P sign vectors; anything larger is an input error


@lru_cache(maxsize=None)
def sign_vectors(p: int) -> np.ndarray:
    """All 2^P sign vectors as a read-only (2^P, P) float matrix."""
    if not 1 <= p <= MAX_ENUM_P:
        raise ValueError(f"P={p} outside the enumerable range [1, {MAX_ENUM_P}]")
    vecs = np.array(list(product((1.0, -1.0), repeat=p)))
    vecs.setflags(write=False)
    return vecs


def xi_expectation(f, p: int) -> float:
    """Exact average of f(xi) over all 2^P equiprobable sign vectors."""
    vecs = sign_vectors(p)
    return sum(f(v) for v in vecs) / vecs.shape[0]


def _lncosh(z):
    z = np.abs(z)
    return z + np.log1p(np.exp(-2.0 * z)) - math.log(2.0)


def rhs_classical(m, beta: float) -> np.ndarray:
    """Right-hand side <xi tanh(beta xi . M)> of the classical map."""
    m = np.asarray(m, dtype=np.float64)
    vecs = sign_vectors(m.shape[0])
    th = np.tanh(beta * (vecs @ m))
    return vecs.T @ th / vecs.shape[0]


def rhs_relativistic(m, beta: float) -> np.ndarray:
    """Right-hand side <xi tanh(beta xi . M / sqrt(1+|M|^2))> of the relativistic map."""
    m = np.asarray(m, dtype=np.float64)
    vecs = sign_vectors(m.shape[0])
    denom = math.sqrt(1.0 + float(np.dot(m, m)))
    th = np.tanh(beta * (vecs @ m) / denom)
    return vecs.T @ th / vecs.shape[0]


def effective_field(m) -> np.ndarray:
    """The one-body fields psi_mu = M_mu / sqrt(1+|M|^2); always |psi| < 1."""
    m = np.asarray(m, dtype=np.float64)
    return m / math.sqrt(1.0 + float(np.dot(m, m)))


def free_energy_classical(m, beta: float) -> float:
    """ln 2 + <ln cosh(beta xi . M)> - (beta/2) |M|^2.

    The quadratic term enters with a minus sign: that is the convention under
    which the expression is stationary exactly at solutions of the classical
    map and matches the small-overlap limit of the relativistic free energy.
    """
    m = np.asarray(m, dtype=np.float64)
    vecs = sign_vectors(m.shape[0])
    avg = float(np.mean(_lncosh(beta * (vecs @ m))))
    return math.log(2.0) + avg - 0.5 * beta * float(np.dot(m, m))


def free_energy_relativistic(m, beta: float) -> float:
    """ln 2 + <ln cosh(beta xi . M / sqrt(1+|M|^2))> + beta / sqrt(1+|M|^2)."""
    m = np.asarray(m, dtype=np.float64)
    vecs = sign_vectors(m.shape[0])
    denom = math.sqrt(1.0 + float(np.dot(m, m)))
    avg = float(np.mean(_lncosh(beta * (vecs @ m) / denom)))
    return math.log(2.0) + avg + beta / denom


def free_energy(kind: ModelKind, m, beta: float) -> float:
    if kind == CLASSICAL:
        return free_energy_classical(m, beta)
    if kind == RELATIVISTIC:
        return free_energy_relativistic(m, beta)
    raise ValueError(f"no closed free energy for kind {kind.label!r}")


@dataclass(frozen=True)
class SelfConsistencyProblem:
    """A (model kind, P, beta) triple for which a closed map exists."""

    kind: ModelKind
    p: int
    beta: float

    def __post_init__(self):
        if self.kind not in (CLASSICAL, RELATIVISTIC):
            raise ValueError("self-consistency equations exist only for the classical "
                             "and relativistic kinds")
        if not 1 <= self.p <= MAX_ENUM_P:
            raise ValueError(f"P={self.p} outside the enumerable range [1, {MAX_ENUM_P}]")
        if not self.beta >= 0.0:
            raise ValueError("beta must be nonnegative")

    def rhs(self, m) -> np.ndarray:
        if self.kind == CLASSICAL:
            return rhs_classical(m, self.beta)
        return rhs_relativistic(m, self.beta)


@dataclass
class FixedPointResult:
    """Outcome of the damped fixed-point iteration."""

    m: np.ndarray
    residual: float
    iterations: int
    converged: bool


def solve_fixed_point(
    problem: SelfConsistencyProblem,
    m0,
    damping: float = 0.5,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> FixedPointResult:
    """Iterate M <- (1-damping) M + damping rhs(M) from m0.

    Non-convergence is reported through the flag, not an exception; the last
    iterate is returned either way.  M = 0 is a valid (possibly unstable)
    solution and is returned as such when reached.
    """
    m0 = np.asarray(m0, dtype=np.float64)
    if m0.shape != (problem.p,):
        raise ValueError(f"initial vector must have length P={problem.p}")
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    kind_code = (
        _kernels.KIND_CLASSICAL if problem.kind == CLASSICAL else _kernels.KIND_RELATIVISTIC
    )
    m, residual, iterations = _kernels.fixed_point_loop(
        sign_vectors(problem.p), m0, problem.beta, kind_code, damping, tol, max_iter
    )
    return FixedPointResult(
        m=m, residual=float(residual), iterations=int(iterations),
        converged=bool(residual <= tol),
    )


@dataclass
class CriticalScan:
    """Fixed-point norms along a beta grid plus the bracketed critical point."""

    kind: ModelKind
    p: int
    betas: np.ndarray
    m_norms: np.ndarray
    beta_c: float | None = None
    bracket: tuple[float, float] | None = field(default=None)

    @property
    def bracketed(self) -> bool:
        return self.beta_c is not None


def critical_scan(
    kind: ModelKind,
    beta_grid,
    p: int,
    tol: float = 1e-12,
    damping: float = 0.5,
    max_iter: int = 100_000,
) -> CriticalScan:
    """Solve from a pure-state start M0 = (0.9, 0, ..., 0) along an ascending grid.

    A grid point counts as ordered when |M*| > 10 tol.  beta_c is the midpoint
    of the last disordered / first ordered pair, or None when the grid does
    not straddle the transition.  Reliable for grid steps >~ 1e-3; much finer
    grids run into the solver's own stopping resolution near the bifurcation.
    """
    betas = np.asarray(beta_grid, dtype=np.float64)
    if betas.ndim != 1 or betas.shape[0] < 2 or np.any(np.diff(betas) <= 0):
        raise ValueError("beta grid must be ascending with at least two points")
    m0 = np.zeros(p)
    m0[0] = 0.9
    norms = np.empty_like(betas)
    for k, beta in enumerate(betas):
        problem = SelfConsistencyProblem(kind, p, float(beta))
        result = solve_fixed_point(problem, m0, damping=damping, tol=tol, max_iter=max_iter)
        norms[k] = float(np.linalg.norm(result.m))
    ordered = norms > 10.0 * tol
    beta_c = None
    bracket = None
    if ordered.any() and not ordered.all() and not ordered[0] and ordered[-1]:
        first_ordered = int(np.argmax(ordered))
        lo, hi = float(betas[first_ordered - 1]), float(betas[first_ordered])
        beta_c = 0.5 * (lo + hi)
        bracket = (lo, hi)
    return CriticalScan(kind=kind, p=p, betas=betas, m_norms=norms,
                        beta_c=beta_c, bracket=bracket)


def fluctuation_theory(beta: float) -> float:
    """Rescaled overlap fluctuation N <m_1^2> in the ergodic region: 1/(1-beta)."""
    if beta >= 1.0:
        raise ValueError("divergent fluctuations at/above criticality (beta >= 1)")
    return 1.0 / (1.0 - beta)
