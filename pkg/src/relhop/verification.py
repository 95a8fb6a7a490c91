"""Exact small-N enumeration and numerical checks of the rigorous structure.

All partition sums are enumerated with a Gray-code walk (one spin flip per
visited state, O(P) overlap update) and a streaming log-sum-exp, which keeps
N = 20..24 tractable and numerically stable.  The checks cover:

* the interpolating free energy bridging a system and its two site-restricted
  subsystems, whose t-derivative is non-positive pointwise,
* sub-additivity N alpha_N <= N1 alpha_N1 + N2 alpha_N2 per pattern
  realization (hence Fekete convergence of alpha_N to its infimum),
* convexity of x -> sqrt(1 + x^2), the scalar fact behind the inequality,
* the interpolated fluctuation law N <m_1^2>_t = 1/(1 - beta t) below the
  critical point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dynamics import overlap_fluctuations, sample_patterns
from .model import RELATIVISTIC, ModelKind, PatternSet, kernel_args
from .utils import pmap, spawn_seed

MAX_ENUM_N = 24
MAX_INTERP_N = 20


@dataclass(frozen=True)
class SplitSpec:
    """A system size N split into subsystems of N1 and N - N1 sites."""

    n: int
    n1: int

    def __post_init__(self):
        if not 1 <= self.n1 <= self.n - 1:
            raise ValueError(f"need 1 <= N1 <= N-1, got N1={self.n1}, N={self.n}")

    @property
    def n2(self) -> int:
        return self.n - self.n1

    @property
    def rho1(self) -> float:
        return self.n1 / self.n

    @property
    def rho2(self) -> float:
        return self.n2 / self.n


@dataclass
class InterpolationReport:
    """alpha(t) per pattern sample with central-difference derivative estimates."""

    t_grid: np.ndarray
    alpha_t: np.ndarray            # (samples, len(t_grid))
    derivative_estimates: np.ndarray  # (samples, len(t_grid) - 2)
    max_derivative: float
    monotone: bool
    slack: float
    worst_sample: int


@dataclass
class SubadditivityReport:
    """Extensive margins ln Z_N - ln Z_N1 - ln Z_N2 per sample and split."""

    margins: np.ndarray  # (samples, N-1)
    max_margin: float
    all_nonpositive: bool
    samples: int
    worst_sample: int
    worst_split: int


@dataclass
class FluctuationRow:
    t: float
    value: float
    stderr: float
    theory: float


def _log_partition_entries(kind: ModelKind, entries: np.ndarray, beta: float) -> float:
    # Raw-entries variant so site-restricted subsystems (which may have fewer
    # sites than patterns) can be enumerated without the low-storage guard.
    if entries.shape[1] > MAX_ENUM_N:
        raise ValueError(f"N={entries.shape[1]} exceeds the enumeration limit {MAX_ENUM_N}")
    kind_code, coeffs = kernel_args(kind)
    return float(_kernels.gray_log_partition(np.ascontiguousarray(entries),
                                             float(beta), kind_code, coeffs))


def exact_log_partition(kind: ModelKind, patterns: PatternSet, beta: float) -> float:
    """ln Z by full enumeration of the 2^N configurations (N <= 24)."""
    return _log_partition_entries(kind, patterns.entries, beta)


def quenched_free_energy(kind: ModelKind, n: int, p: int, beta: float,
                         samples: int, seed: int = 0,
                         workers: int = 1) -> tuple[float, float]:
    """Mean and standard error of (1/N) ln Z over independent pattern draws."""
    if samples < 1:
        raise ValueError("samples must be >= 1")

    def one(s: int) -> float:
        patterns = sample_patterns(p, n, spawn_seed(seed, s))
        return exact_log_partition(kind, patterns, beta) / n

    vals = np.array(pmap(one, range(samples), workers))
    stderr = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return float(vals.mean()), stderr


def interpolating_alpha(patterns: PatternSet, split: SplitSpec, t: float,
                        beta: float = 1.0) -> float:
    """(1/N) ln of the interpolating partition sum at parameter t, one realization.

    At t=1 this is the plain free energy at the given beta; at t=0 it is the
    density-weighted sum of the two subsystem free energies on the restricted
    patterns.  beta defaults to 1, the only value the monotonicity statement
    is made for; other values are an extrapolation beyond that statement.
    """
    if patterns.n != split.n:
        raise ValueError("split and patterns disagree on N")
    if patterns.n > MAX_INTERP_N:
        raise ValueError(f"N={patterns.n} exceeds the interpolation limit {MAX_INTERP_N}")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    return float(_kernels.gray_interp_log_partition(
        patterns.entries, split.n1, float(t), float(beta))) / patterns.n


def check_t_monotonicity(n: int, n1: int, p: int, t_grid, samples: int,
                         seed: int = 0, beta: float = 1.0,
                         workers: int = 1) -> InterpolationReport:
    """Estimate d alpha/dt by central differences for every pattern sample.

    The derivative is non-positive pointwise; the report flags monotone=True
    when every estimate stays below the slack 1e-8 * N that covers
    central-difference truncation error.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.ndim != 1 or t_grid.shape[0] < 3:
        raise ValueError("t grid needs at least 3 points")
    if np.any(t_grid < 0.0) or np.any(t_grid > 1.0) or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t grid must be ascending within [0, 1]")
    split = SplitSpec(n=n, n1=n1)

    def one(s: int) -> np.ndarray:
        patterns = sample_patterns(p, n, spawn_seed(seed, s))
        return np.array([interpolating_alpha(patterns, split, t, beta) for t in t_grid])

    alpha_t = np.array(pmap(one, range(samples), workers))
    dt = t_grid[2:] - t_grid[:-2]
    derivs = (alpha_t[:, 2:] - alpha_t[:, :-2]) / dt
    max_derivative = float(derivs.max())
    worst_sample = int(np.unravel_index(np.argmax(derivs), derivs.shape)[0])
    slack = 1e-8 * n
    return InterpolationReport(
        t_grid=t_grid, alpha_t=alpha_t, derivative_estimates=derivs,
        max_derivative=max_derivative, monotone=bool(max_derivative <= slack),
        slack=slack, worst_sample=worst_sample,
    )


def check_subadditivity(n: int, p: int, beta: float, samples: int, seed: int = 0,
                        workers: int = 1) -> SubadditivityReport:
    """Margins ln Z_N - (ln Z_N1 + ln Z_N2) for every split and pattern sample.

    Subsystems see the site-restriction of the same pattern draw, which is
    what makes the inequality hold realization by realization.
    """
    if n > MAX_INTERP_N:
        raise ValueError(f"N={n} exceeds the interpolation limit {MAX_INTERP_N}")

    def one(s: int) -> np.ndarray:
        patterns = sample_patterns(p, n, spawn_seed(seed, s))
        ln_z = exact_log_partition(RELATIVISTIC, patterns, beta)
        row = np.empty(n - 1)
        for n1 in range(1, n):
            left = _log_partition_entries(RELATIVISTIC, patterns.entries[:, :n1], beta)
            right = _log_partition_entries(RELATIVISTIC, patterns.entries[:, n1:], beta)
            row[n1 - 1] = ln_z - left - right
        return row

    margins = np.array(pmap(one, range(samples), workers))
    max_margin = float(margins.max())
    worst = np.unravel_index(np.argmax(margins), margins.shape)
    return SubadditivityReport(
        margins=margins, max_margin=max_margin,
        all_nonpositive=bool(max_margin <= 1e-10), samples=samples,
        worst_sample=int(worst[0]), worst_split=int(worst[1]) + 1,
    )


def convexity_gap(m1, m2, rho: float) -> float:
    """sqrt(1+|rho m1+(1-rho) m2|^2) - rho sqrt(1+|m1|^2) - (1-rho) sqrt(1+|m2|^2)."""
    m1 = np.asarray(m1, dtype=np.float64)
    m2 = np.asarray(m2, dtype=np.float64)
    mid = rho * m1 + (1.0 - rho) * m2
    return float(
        math.sqrt(1.0 + float(mid @ mid))
        - rho * math.sqrt(1.0 + float(m1 @ m1))
        - (1.0 - rho) * math.sqrt(1.0 + float(m2 @ m2))
    )


def check_sqrt_convexity(grid_resolution: int, p: int) -> float:
    """Max of convexity_gap over a grid; convexity makes it non-positive.

    Each component of m1 and m2 runs over grid_resolution points of [-1, 1]
    and rho over as many interior points of (0, 1), so work grows like
    grid_resolution^(2P+1); P <= 2 is the intended range.
    """
    if grid_resolution < 2:
        raise ValueError("grid resolution must be >= 2")
    if p < 1:
        raise ValueError("P must be >= 1")
    return float(_kernels.convexity_max_violation(p, grid_resolution))


def check_fluctuation_interpolation(n: int, beta: float, t_grid, sweeps: int = 1500,
                                    p: int = 1, runs: int = 16, seed: int = 0,
                                    samples: int = 32,
                                    workers: int = 1) -> list[FluctuationRow]:
    """N <m_1^2> under the t-interpolated weight against the law 1/(1 - beta t).

    In the ergodic region the interpolating one-body fields vanish, so the
    t-weight is the relativistic Boltzmann factor at inverse noise t * beta.
    Small systems (N <= 20) are enumerated exactly and averaged over pattern
    samples; larger ones are estimated by Monte Carlo with `runs` runs of
    `sweeps` measurement sweeps.
    """
    if beta >= 1.0:
        raise ValueError("beta >= 1 is outside ergodic region")
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if np.any(t_grid < 0.0) or np.any(t_grid > 1.0):
        raise ValueError("t grid must lie within [0, 1]")
    rows = []
    for t in t_grid:
        beta_eff = float(t * beta)
        theory = 1.0 / (1.0 - beta_eff)
        if n <= MAX_INTERP_N:
            kind_code, coeffs = kernel_args(RELATIVISTIC)

            def one(s: int) -> float:
                patterns = sample_patterns(p, n, spawn_seed(seed, s))
                return float(_kernels.gray_m1_second_moment(
                    patterns.entries, beta_eff, kind_code, coeffs))

            vals = n * np.array(pmap(one, range(samples), workers))
            value = float(vals.mean())
            stderr = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
        else:
            if beta_eff == 0.0:
                # Uniform measure: N <m_1^2> = 1 exactly, no sampling needed.
                value, stderr = 1.0, 0.0
            else:
                est = overlap_fluctuations(RELATIVISTIC, n, p, beta_eff, runs,
                                           sweeps=sweeps, seed=seed, workers=workers)
                value, stderr = est.value, est.stderr
        rows.append(FluctuationRow(t=float(t), value=value, stderr=stderr, theory=theory))
    return rows
