"""Single-spin-flip Monte Carlo at inverse noise beta, plus experiment drivers.

One sweep is N flip attempts at uniformly random sites (random scan, which
preserves detailed balance exactly).  Glauber accepts with 1/(1+exp(beta dH)),
Metropolis with min(1, exp(-beta dH)); beta = inf means the deterministic
zero-noise quench (accept iff dH < 0, ties rejected).

Drivers parallelize over independent (beta, run) cells; each cell draws its
randomness from a generator split off the master seed by a counter-based key,
so results are bit-reproducible regardless of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .model import ModelKind, PatternSet, SpinState, kernel_args
from .utils import pmap, spawn_seed

_RULES = {"glauber": _kernels.RULE_GLAUBER, "metropolis": _kernels.RULE_METROPOLIS}
_SWEEP_CHUNK = 512  # sweeps of pre-drawn randomness per kernel call


@dataclass(frozen=True)
class InitSpec:
    """How to choose the starting configuration."""

    kind: str  # random | pattern | corrupted
    pattern: int = 0
    flip_fraction: float = 0.0

    def __post_init__(self):
        if self.kind not in ("random", "pattern", "corrupted"):
            raise ValueError(f"unknown init kind {self.kind!r}")
        if not 0.0 <= self.flip_fraction <= 0.5:
            raise ValueError("flip_fraction must lie in [0, 0.5]")


def random_init() -> InitSpec:
    return InitSpec("random")


def pattern_init(mu: int = 0) -> InitSpec:
    return InitSpec("pattern", pattern=mu)


def corrupted_init(mu: int = 0, flip_fraction: float = 0.1) -> InitSpec:
    return InitSpec("corrupted", pattern=mu, flip_fraction=flip_fraction)


@dataclass(frozen=True)
class DynamicsConfig:
    """Knobs of one Monte Carlo trajectory.

    beta may be math.inf for the zero-noise quench.  Defaults (10^3 sweeps of
    equilibration and measurement) are sized for N ~ 400 away from the
    critical point, where autocorrelation times are tens of sweeps.
    """

    beta: float
    rule: str = "glauber"
    equilibration_sweeps: int = 1000
    measurement_sweeps: int = 1000
    seed: int = 0
    init: InitSpec = field(default_factory=random_init)

    def __post_init__(self):
        if not (self.beta >= 0.0 or math.isinf(self.beta)):
            raise ValueError("beta must be nonnegative (or inf)")
        if self.rule not in _RULES:
            raise ValueError(f"unknown update rule {self.rule!r}")
        if self.equilibration_sweeps < 0:
            raise ValueError("equilibration_sweeps must be >= 0")
        if self.measurement_sweeps < 1:
            raise ValueError("measurement_sweeps must be >= 1")


@dataclass
class TrajectoryStats:
    """Time averages over the measurement phase of one trajectory."""

    mean_overlaps: np.ndarray
    overlap_variance: np.ndarray
    acceptance_rate: float
    final_state: SpinState


@dataclass
class RescaledFluctuation:
    """Estimate of N Var(m_1) with its jackknife standard error."""

    value: float
    stderr: float


@dataclass
class CurveRow:
    beta: float
    mean_m1: float
    stderr_m1: float
    runs: int


@dataclass
class RetrievalRow:
    beta: float
    frequency: float
    runs: int


def sample_patterns(p: int, n: int, seed: int) -> PatternSet:
    """Draw P i.i.d. uniform sign patterns of length N, deterministically in seed."""
    if not 1 <= p <= n:
        raise ValueError(f"need 1 <= P <= N (low-storage guard), got P={p}, N={n}")
    rng = np.random.default_rng(seed)
    entries = (2 * rng.integers(0, 2, size=(p, n), dtype=np.int8) - 1).astype(np.int8)
    return PatternSet(entries, seed=seed)


def initial_state(patterns: PatternSet, init: InitSpec, rng: np.random.Generator) -> SpinState:
    n = patterns.n
    if init.kind == "random":
        spins = (2 * rng.integers(0, 2, size=n, dtype=np.int8) - 1).astype(np.int8)
    else:
        spins = patterns.entries[init.pattern].copy()
        if init.kind == "corrupted":
            k = int(round(init.flip_fraction * n))
            if k:
                sites = rng.choice(n, size=k, replace=False)
                spins[sites] = -spins[sites]
    return SpinState.from_spins(spins, patterns)


def sweep(kind: ModelKind, state: SpinState, patterns: PatternSet,
          config: DynamicsConfig, rng: np.random.Generator) -> int:
    """One sweep of N attempts; mutates state, returns the accepted-flip count."""
    if state.n != patterns.n:
        raise ValueError("state and patterns disagree on N")
    kind_code, coeffs = kernel_args(kind)
    n = patterns.n
    sites = rng.integers(0, n, size=(1, n))
    us = rng.random((1, n))
    dummy = np.empty((0, patterns.p))
    return int(_kernels.run_sweeps(
        state.spins, patterns.entries, state.overlap_sums, kind_code, coeffs,
        float(config.beta), _RULES[config.rule], sites, us, dummy, False,
    ))


def _drive(kind_code, coeffs, state, patterns, beta, rule_code, sweeps, rng,
           m_out=None) -> int:
    """Run `sweeps` sweeps in chunks of pre-drawn randomness; returns accepted."""
    n = patterns.n
    accepted = 0
    done = 0
    record = m_out is not None
    dummy = np.empty((0, patterns.p))
    while done < sweeps:
        block = min(_SWEEP_CHUNK, sweeps - done)
        sites = rng.integers(0, n, size=(block, n))
        us = rng.random((block, n))
        out = m_out[done:done + block] if record else dummy
        accepted += _kernels.run_sweeps(
            state.spins, patterns.entries, state.overlap_sums, kind_code, coeffs,
            beta, rule_code, sites, us, out, record,
        )
        done += block
    return accepted


def run_trajectory(kind: ModelKind, patterns: PatternSet,
                   config: DynamicsConfig) -> TrajectoryStats:
    """Equilibrate, then record the overlap vector after each measurement sweep."""
    kind_code, coeffs = kernel_args(kind)
    ss = np.random.SeedSequence(config.seed)
    init_rng, sweep_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    state = initial_state(patterns, config.init, init_rng)
    beta = float(config.beta)
    rule_code = _RULES[config.rule]

    accepted = _drive(kind_code, coeffs, state, patterns, beta, rule_code,
                      config.equilibration_sweeps, sweep_rng)
    m_series = np.empty((config.measurement_sweeps, patterns.p))
    accepted += _drive(kind_code, coeffs, state, patterns, beta, rule_code,
                       config.measurement_sweeps, sweep_rng, m_out=m_series)

    attempts = (config.equilibration_sweeps + config.measurement_sweeps) * patterns.n
    return TrajectoryStats(
        mean_overlaps=m_series.mean(axis=0),
        overlap_variance=m_series.var(axis=0),
        acceptance_rate=accepted / attempts if attempts else 0.0,
        final_state=state,
    )


def _quenched_cell(kind, n, p, beta, template, master_seed, ib, run) -> TrajectoryStats:
    """One independent (beta, run) cell: fresh patterns, fresh RNG stream."""
    patterns = sample_patterns(p, n, spawn_seed(master_seed, ib, 2 * run))
    config = replace(template, beta=beta, seed=spawn_seed(master_seed, ib, 2 * run + 1))
    return run_trajectory(kind, patterns, config)


def measure_overlap_curve(kind: ModelKind, n: int, p: int, beta_grid, runs: int,
                          template: DynamicsConfig, workers: int = 1) -> list[CurveRow]:
    """Quenched average over runs of the time-averaged m_1, one row per beta.

    Every (beta, run) cell uses a fresh pattern draw and an RNG stream derived
    from template.seed; template.init should normally start on pattern 1.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    betas = list(np.asarray(beta_grid, dtype=np.float64))
    cells = [(ib, r) for ib in range(len(betas)) for r in range(runs)]
    stats = pmap(
        lambda cell: _quenched_cell(kind, n, p, betas[cell[0]], template,
                                    template.seed, cell[0], cell[1]),
        cells, workers,
    )
    rows = []
    for ib, beta in enumerate(betas):
        m1 = np.array([stats[ib * runs + r].mean_overlaps[0] for r in range(runs)])
        stderr = float(m1.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
        rows.append(CurveRow(beta=float(beta), mean_m1=float(m1.mean()),
                             stderr_m1=stderr, runs=runs))
    return rows


def is_pure_state(overlaps, threshold: float) -> bool:
    """Winning overlap at least threshold in magnitude, all others <= 1 - threshold."""
    a = np.abs(np.asarray(overlaps))
    winner = int(np.argmax(a))
    others = np.delete(a, winner)
    return bool(a[winner] >= threshold and np.all(others <= 1.0 - threshold))


def retrieval_frequency(kind: ModelKind, n: int, p: int, beta_grid, runs: int,
                        threshold: float = 0.9, sweeps: int = 1000, seed: int = 0,
                        rule: str = "glauber", workers: int = 1) -> list[RetrievalRow]:
    """Fraction of random-start runs whose final state is a pure retrieval state."""
    if not 0.5 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0.5, 1]")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    template = DynamicsConfig(beta=1.0, rule=rule, equilibration_sweeps=sweeps,
                              measurement_sweeps=1, seed=seed, init=random_init())
    betas = list(np.asarray(beta_grid, dtype=np.float64))
    cells = [(ib, r) for ib in range(len(betas)) for r in range(runs)]
    stats = pmap(
        lambda cell: _quenched_cell(kind, n, p, betas[cell[0]], template,
                                    seed, cell[0], cell[1]),
        cells, workers,
    )
    rows = []
    for ib, beta in enumerate(betas):
        hits = sum(
            is_pure_state(stats[ib * runs + r].final_state.overlaps, threshold)
            for r in range(runs)
        )
        rows.append(RetrievalRow(beta=float(beta), frequency=hits / runs, runs=runs))
    return rows


def overlap_fluctuations(kind: ModelKind, n: int, p: int, beta: float, runs: int,
                         sweeps: int = 1500, equil: int = 200, seed: int = 0,
                         rule: str = "glauber", workers: int = 1) -> RescaledFluctuation:
    """Estimate N <m_1^2> in the ergodic region by pooled random-start runs.

    Only defined for beta < 1, where M_1 = 0 and the rescaled fluctuation is
    N <m_1^2>; the standard error is the delete-one-run jackknife.
    """
    if beta >= 1.0:
        raise ValueError("beta >= 1 is outside ergodic region")
    if runs < 2:
        raise ValueError("need at least 2 runs for a jackknife error")
    template = DynamicsConfig(beta=beta, rule=rule, equilibration_sweeps=equil,
                              measurement_sweeps=sweeps, seed=seed, init=random_init())

    def run_mean_m1sq(r: int) -> float:
        patterns = sample_patterns(p, n, spawn_seed(seed, 0, 2 * r))
        config = replace(template, seed=spawn_seed(seed, 0, 2 * r + 1))
        kind_code, coeffs = kernel_args(kind)
        ss = np.random.SeedSequence(config.seed)
        init_rng, sweep_rng = (np.random.default_rng(s) for s in ss.spawn(2))
        state = initial_state(patterns, config.init, init_rng)
        _drive(kind_code, coeffs, state, patterns, float(beta), _RULES[rule],
               equil, sweep_rng)
        m_series = np.empty((sweeps, p))
        _drive(kind_code, coeffs, state, patterns, float(beta), _RULES[rule],
               sweeps, sweep_rng, m_out=m_series)
        return float(np.mean(m_series[:, 0] ** 2))

    per_run = np.array(pmap(run_mean_m1sq, range(runs), workers))
    pooled = float(per_run.mean())
    total = per_run.sum()
    jack = (total - per_run) / (runs - 1)
    stderr = math.sqrt((runs - 1) / runs * float(np.sum((jack - jack.mean()) ** 2)))
    return RescaledFluctuation(value=n * pooled, stderr=n * stderr)


def state_histogram(kind: ModelKind, patterns: PatternSet, beta: float,
                    rule: str = "glauber", sweeps: int = 1_000_000, seed: int = 0,
                    init: InitSpec | None = None) -> np.ndarray:
    """Visit counts over all 2^N configurations, one tally per sweep.

    For detailed-balance checks against the exact Boltzmann weights; N must be
    small (counts array is 2^N long).
    """
    n = patterns.n
    if n > 16:
        raise ValueError("state histogram only supported for N <= 16")
    kind_code, coeffs = kernel_args(kind)
    ss = np.random.SeedSequence(seed)
    init_rng, sweep_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    state = initial_state(patterns, init or random_init(), init_rng)
    counts = np.zeros(1 << n, dtype=np.int64)
    done = 0
    while done < sweeps:
        block = min(8192, sweeps - done)
        sites = sweep_rng.integers(0, n, size=(block, n))
        us = sweep_rng.random((block, n))
        _kernels.run_sweeps_histogram(
            state.spins, patterns.entries, state.overlap_sums, kind_code, coeffs,
            float(beta), _RULES[rule], sites, us, counts,
        )
        done += block
    return counts
