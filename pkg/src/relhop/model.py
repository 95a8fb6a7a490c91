"""Patterns, spin configurations, Mattis overlaps and the network Hamiltonians.

Three energy functions share the overlap representation H(sigma) = E(m) with
m the vector of Mattis overlaps:

* classical:     E(m) = -(N/2) |m|^2, the quadratic form whose local fields
                 are h_i = sum_mu xi_i^mu m_mu (so single-site dynamics and the
                 mean-field map M = <xi tanh(beta xi . M)> refer to the same beta)
* relativistic:  E(m) = -N sqrt(1 + |m|^2)
* truncated(k):  the Taylor expansion of the relativistic form in powers of m,
                 kept through order k (even), e.g. k=4 gives
                 -N (1 + |m|^2/2 - |m|^4/8).

Overlap caches are kept as exact integer accumulators (raw sums of xi*sigma)
and divided by N on read, so incremental updates never drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

_FAMILIES = ("classical", "relativistic", "truncated")


@dataclass(frozen=True)
class ModelKind:
    """Which Hamiltonian to use; truncated kinds carry their expansion order."""

    family: str
    order: int = 0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        if self.family == "truncated":
            if self.order < 2 or self.order % 2 != 0:
                raise ValueError("truncated order must be an even integer >= 2")
        elif self.order != 0:
            raise ValueError(f"{self.family} kind takes no order")

    @property
    def label(self) -> str:
        if self.family == "truncated":
            return f"truncated:{self.order}"
        return self.family


CLASSICAL = ModelKind("classical")
RELATIVISTIC = ModelKind("relativistic")


def truncated(order: int) -> ModelKind:
    return ModelKind("truncated", order)


def parse_kind(label: str) -> ModelKind:
    """Inverse of ModelKind.label, e.g. 'truncated:4'."""
    if label == "classical":
        return CLASSICAL
    if label == "relativistic":
        return RELATIVISTIC
    if label.startswith("truncated:"):
        return truncated(int(label.split(":", 1)[1]))
    raise ValueError(f"unknown model {label!r}")


def sqrt_series_coefficients(order: int) -> np.ndarray:
    """Taylor coefficients of sqrt(1+x) through x^(order//2).

    order counts powers of m, so x = |m|^2 contributes order/2 terms beyond
    the constant: 1, 1/2, -1/8, 1/16, -5/128, ...
    """
    k = order // 2
    coeffs = np.empty(k + 1)
    c = 1.0
    for j in range(k + 1):
        coeffs[j] = c
        c *= (0.5 - j) / (j + 1)
    return coeffs


def kernel_args(kind: ModelKind) -> tuple[int, np.ndarray]:
    """(kind_code, coefficient array) consumed by the numba kernels."""
    if kind.family == "classical":
        return _kernels.KIND_CLASSICAL, np.zeros(1)
    if kind.family == "relativistic":
        return _kernels.KIND_RELATIVISTIC, np.zeros(1)
    return _kernels.KIND_TRUNCATED, sqrt_series_coefficients(kind.order)


@dataclass
class PatternSet:
    """P binary patterns of length N, the quenched disorder of the network.

    entries is a (P, N) int8 matrix with values in {-1, +1}; it is frozen
    after construction and safe to share across threads.  seed records how the
    patterns were drawn (0 when hand built).
    """

    entries: np.ndarray
    seed: int = 0

    def __post_init__(self):
        entries = np.ascontiguousarray(self.entries, dtype=np.int8)
        if entries.ndim != 2:
            raise ValueError("entries must be a P x N matrix")
        p, n = entries.shape
        if p < 1 or n < 1:
            raise ValueError("need P >= 1 and N >= 1")
        if p > n:
            raise ValueError(f"P={p} exceeds N={n}: outside the low-storage regime")
        if not np.all(np.abs(entries) == 1):
            raise ValueError("pattern entries must be exactly -1 or +1")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]


def save_patterns(patterns: PatternSet, path) -> None:
    """Write patterns as text: header 'P N seed', then one +/- line per pattern."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{patterns.p} {patterns.n} {patterns.seed}\n")
        for row in patterns.entries:
            fh.write("".join("+" if s > 0 else "-" for s in row) + "\n")


def load_patterns(path) -> PatternSet:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError("pattern file header must be 'P N seed'")
        p, n, seed = int(header[0]), int(header[1]), int(header[2])
        rows = []
        for _ in range(p):
            line = fh.readline().strip()
            if len(line) != n or set(line) - {"+", "-"}:
                raise ValueError("pattern lines must be N characters of '+'/'-'")
            rows.append([1 if ch == "+" else -1 for ch in line])
    return PatternSet(np.array(rows, dtype=np.int8), seed=seed)


@dataclass
class SpinState:
    """A spin configuration plus its cached raw overlap sums.

    overlap_sums[mu] always equals sum_i xi_i^mu sigma_i as an exact integer;
    use .overlaps for the Mattis overlap vector.  Single-owner mutable: flip
    spins only through apply_flip so the cache stays consistent.
    """

    spins: np.ndarray
    overlap_sums: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.spins = np.ascontiguousarray(self.spins, dtype=np.int8)
        if not np.all(np.abs(self.spins) == 1):
            raise ValueError("spins must be exactly -1 or +1")
        self.overlap_sums = np.ascontiguousarray(self.overlap_sums, dtype=np.int64)

    @classmethod
    def from_spins(cls, spins, patterns: PatternSet) -> "SpinState":
        spins = np.ascontiguousarray(spins, dtype=np.int8)
        if spins.shape != (patterns.n,):
            raise ValueError(
                f"spin vector of length {spins.shape} does not match N={patterns.n}"
            )
        sums = patterns.entries.astype(np.int64) @ spins.astype(np.int64)
        return cls(spins=spins, overlap_sums=sums)

    @property
    def n(self) -> int:
        return self.spins.shape[0]

    @property
    def overlaps(self) -> np.ndarray:
        return self.overlap_sums / self.n

    def copy(self) -> "SpinState":
        return SpinState(self.spins.copy(), self.overlap_sums.copy())


def mattis_overlaps(state, patterns: PatternSet) -> np.ndarray:
    """From-scratch overlap vector m_mu = (1/N) sum_i xi_i^mu sigma_i.

    Accepts a SpinState or a raw spin vector; does not touch any cache, so it
    doubles as the oracle the cached sums are tested against.
    """
    spins = state.spins if isinstance(state, SpinState) else np.asarray(state)
    if spins.shape != (patterns.n,):
        raise ValueError("spin configuration does not match pattern length")
    sums = patterns.entries.astype(np.int64) @ spins.astype(np.int64)
    return sums / patterns.n


def energy_from_overlaps(kind: ModelKind, m, n: int) -> float:
    """Extensive energy evaluated from an overlap vector."""
    m = np.asarray(m, dtype=np.float64)
    x = float(np.dot(m, m))
    if kind.family == "classical":
        return -0.5 * n * x
    if kind.family == "relativistic":
        return -n * float(np.sqrt(1.0 + x))
    coeffs = sqrt_series_coefficients(kind.order)
    powers = x ** np.arange(coeffs.shape[0])
    return -n * float(np.dot(coeffs, powers))


def energy(kind: ModelKind, state: SpinState, patterns: PatternSet) -> float:
    """Extensive energy of a configuration; uses the exact cached overlaps."""
    if state.n != patterns.n:
        raise ValueError("state and patterns disagree on N")
    return energy_from_overlaps(kind, state.overlap_sums / patterns.n, patterns.n)


def delta_energy(kind: ModelKind, state: SpinState, patterns: PatternSet, i: int) -> float:
    """H(sigma with spin i flipped) - H(sigma), in O(P) via the overlap shift."""
    n = patterns.n
    if not 0 <= i < n:
        raise IndexError(f"site index {i} out of range for N={n}")
    shifted = state.overlap_sums - 2 * patterns.entries[:, i].astype(np.int64) * int(state.spins[i])
    before = energy_from_overlaps(kind, state.overlap_sums / n, n)
    after = energy_from_overlaps(kind, shifted / n, n)
    return after - before


def apply_flip(state: SpinState, patterns: PatternSet, i: int) -> SpinState:
    """Negate spin i in place, updating the overlap cache incrementally."""
    if not 0 <= i < patterns.n:
        raise IndexError(f"site index {i} out of range for N={patterns.n}")
    state.overlap_sums -= 2 * patterns.entries[:, i].astype(np.int64) * int(state.spins[i])
    state.spins[i] = -state.spins[i]
    return state
