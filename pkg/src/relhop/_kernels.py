"""Numba inner loops: single-spin-flip sweeps and Gray-code state enumeration.

Everything here works on raw arrays so the jitted code stays free of Python
objects.  Spins and patterns are int8 in {-1,+1}; overlap accumulators are
int64 raw sums (divided by N only when a float overlap is needed), which keeps
long runs drift-free.
"""

import math

import numpy as np
from numba import njit

KIND_CLASSICAL = 0
KIND_RELATIVISTIC = 1
KIND_TRUNCATED = 2

RULE_GLAUBER = 0
RULE_METROPOLIS = 1


@njit(cache=True, nogil=True, inline="always")
def _energy_of_x(x, n, kind, coeffs):
    """Extensive energy as a function of x = sum of squared overlaps."""
    if kind == KIND_CLASSICAL:
        return -0.5 * n * x
    if kind == KIND_RELATIVISTIC:
        return -n * math.sqrt(1.0 + x)
    acc = coeffs[coeffs.shape[0] - 1]
    for j in range(coeffs.shape[0] - 2, -1, -1):
        acc = acc * x + coeffs[j]
    return -n * acc


@njit(cache=True, nogil=True, inline="always")
def _x_from_sums(sums, inv_n):
    x = 0.0
    for mu in range(sums.shape[0]):
        m = sums[mu] * inv_n
        x += m * m
    return x


@njit(cache=True, nogil=True, inline="always")
def _accept(dh, beta, rule, u):
    # beta = inf is the zero-noise quench: accept strictly downhill moves only.
    if math.isinf(beta):
        return dh < 0.0
    b = beta * dh
    if rule == RULE_GLAUBER:
        if b > 0.0:
            e = math.exp(-b)
            p = e / (1.0 + e)
        else:
            p = 1.0 / (1.0 + math.exp(b))
    else:
        if b <= 0.0:
            p = 1.0
        else:
            p = math.exp(-b)
    return u < p


@njit(cache=True, nogil=True)
def run_sweeps(spins, xi, sums, kind, coeffs, beta, rule, sites, us, m_out, record):
    """Run sites.shape[0] sweeps of N flip attempts each.

    Mutates spins and sums in place.  When record is True, writes the overlap
    vector after each sweep into m_out (same leading length as sites).
    Returns the number of accepted flips.
    """
    p, n = xi.shape
    inv_n = 1.0 / n
    accepted = 0
    for s in range(sites.shape[0]):
        for a in range(n):
            i = sites[s, a]
            x_old = 0.0
            x_new = 0.0
            for mu in range(p):
                m_old = sums[mu] * inv_n
                m_new = (sums[mu] - 2 * xi[mu, i] * spins[i]) * inv_n
                x_old += m_old * m_old
                x_new += m_new * m_new
            dh = _energy_of_x(x_new, n, kind, coeffs) - _energy_of_x(x_old, n, kind, coeffs)
            if _accept(dh, beta, rule, us[s, a]):
                for mu in range(p):
                    sums[mu] -= 2 * xi[mu, i] * spins[i]
                spins[i] = -spins[i]
                accepted += 1
        if record:
            for mu in range(p):
                m_out[s, mu] = sums[mu] * inv_n
    return accepted


@njit(cache=True, nogil=True)
def run_sweeps_histogram(spins, xi, sums, kind, coeffs, beta, rule, sites, us, counts):
    """Like run_sweeps but tallies the visited configuration after each sweep.

    Configurations are packed as bitmasks (bit i set iff spin i is +1), so this
    is only usable for N small enough that counts covers 2^N states.
    """
    p, n = xi.shape
    inv_n = 1.0 / n
    accepted = 0
    for s in range(sites.shape[0]):
        for a in range(n):
            i = sites[s, a]
            x_old = 0.0
            x_new = 0.0
            for mu in range(p):
                m_old = sums[mu] * inv_n
                m_new = (sums[mu] - 2 * xi[mu, i] * spins[i]) * inv_n
                x_old += m_old * m_old
                x_new += m_new * m_new
            dh = _energy_of_x(x_new, n, kind, coeffs) - _energy_of_x(x_old, n, kind, coeffs)
            if _accept(dh, beta, rule, us[s, a]):
                for mu in range(p):
                    sums[mu] -= 2 * xi[mu, i] * spins[i]
                spins[i] = -spins[i]
                accepted += 1
        idx = 0
        for i in range(n):
            if spins[i] > 0:
                idx |= 1 << i
        counts[idx] += 1
    return accepted


@njit(cache=True, nogil=True, inline="always")
def _flip_bit(k):
    """Index of the spin to flip between Gray codes of k-1 and k (= ctz(k))."""
    j = 0
    while not (k & 1):
        k >>= 1
        j += 1
    return j


@njit(cache=True, nogil=True)
def gray_log_partition(xi, beta, kind, coeffs):
    """ln sum over all 2^N configurations of exp(-beta * H), streaming log-sum-exp."""
    p, n = xi.shape
    inv_n = 1.0 / n
    spins = np.ones(n, dtype=np.int8)
    sums = np.zeros(p, dtype=np.int64)
    for mu in range(p):
        t = 0
        for i in range(n):
            t += xi[mu, i]
        sums[mu] = t
    run_max = -beta * _energy_of_x(_x_from_sums(sums, inv_n), n, kind, coeffs)
    acc = 1.0
    for k in range(1, 1 << n):
        j = _flip_bit(k)
        for mu in range(p):
            sums[mu] -= 2 * xi[mu, j] * spins[j]
        spins[j] = -spins[j]
        e = -beta * _energy_of_x(_x_from_sums(sums, inv_n), n, kind, coeffs)
        if e <= run_max:
            acc += math.exp(e - run_max)
        else:
            acc = acc * math.exp(run_max - e) + 1.0
            run_max = e
    return run_max + math.log(acc)


@njit(cache=True, nogil=True)
def gray_interp_log_partition(xi, n1, t, beta):
    """ln of the interpolating partition sum bridging a system and its two halves.

    Weight per configuration: exp(beta * [t*N*sqrt(1+m_N^2)
    + (1-t)*(N1*sqrt(1+m_N1^2) + N2*sqrt(1+m_N2^2))]), with subsystem overlaps
    taken over sites [0, n1) and [n1, N) of the same patterns.
    """
    p, n = xi.shape
    n2 = n - n1
    inv_n = 1.0 / n
    inv_n1 = 1.0 / n1
    inv_n2 = 1.0 / n2
    spins = np.ones(n, dtype=np.int8)
    sums1 = np.zeros(p, dtype=np.int64)
    sums2 = np.zeros(p, dtype=np.int64)
    for mu in range(p):
        t1 = 0
        t2 = 0
        for i in range(n1):
            t1 += xi[mu, i]
        for i in range(n1, n):
            t2 += xi[mu, i]
        sums1[mu] = t1
        sums2[mu] = t2

    def phi(s1, s2):
        x = 0.0
        x1 = 0.0
        x2 = 0.0
        for mu in range(p):
            mn = (s1[mu] + s2[mu]) * inv_n
            m1 = s1[mu] * inv_n1
            m2 = s2[mu] * inv_n2
            x += mn * mn
            x1 += m1 * m1
            x2 += m2 * m2
        return beta * (
            t * n * math.sqrt(1.0 + x)
            + (1.0 - t) * (n1 * math.sqrt(1.0 + x1) + n2 * math.sqrt(1.0 + x2))
        )

    run_max = phi(sums1, sums2)
    acc = 1.0
    for k in range(1, 1 << n):
        j = _flip_bit(k)
        if j < n1:
            for mu in range(p):
                sums1[mu] -= 2 * xi[mu, j] * spins[j]
        else:
            for mu in range(p):
                sums2[mu] -= 2 * xi[mu, j] * spins[j]
        spins[j] = -spins[j]
        e = phi(sums1, sums2)
        if e <= run_max:
            acc += math.exp(e - run_max)
        else:
            acc = acc * math.exp(run_max - e) + 1.0
            run_max = e
    return run_max + math.log(acc)


@njit(cache=True, nogil=True)
def gray_m1_second_moment(xi, beta, kind, coeffs):
    """Exact Boltzmann average of m_1^2 over all 2^N configurations."""
    p, n = xi.shape
    inv_n = 1.0 / n
    spins = np.ones(n, dtype=np.int8)
    sums = np.zeros(p, dtype=np.int64)
    for mu in range(p):
        t = 0
        for i in range(n):
            t += xi[mu, i]
        sums[mu] = t
    run_max = -beta * _energy_of_x(_x_from_sums(sums, inv_n), n, kind, coeffs)
    m1 = sums[0] * inv_n
    acc_w = 1.0
    acc_m = m1 * m1
    for k in range(1, 1 << n):
        j = _flip_bit(k)
        for mu in range(p):
            sums[mu] -= 2 * xi[mu, j] * spins[j]
        spins[j] = -spins[j]
        e = -beta * _energy_of_x(_x_from_sums(sums, inv_n), n, kind, coeffs)
        m1 = sums[0] * inv_n
        if e <= run_max:
            w = math.exp(e - run_max)
            acc_w += w
            acc_m += w * m1 * m1
        else:
            r = math.exp(run_max - e)
            acc_w = acc_w * r + 1.0
            acc_m = acc_m * r + m1 * m1
            run_max = e
    return acc_m / acc_w


@njit(cache=True, nogil=True)
def fixed_point_loop(signs, m0, beta, kind, damping, tol, max_iter):
    """Damped iteration M <- (1-d) M + d rhs(M) for the self-consistency map.

    signs is the (2^P, P) matrix of pattern sign vectors; kind 0 is the
    classical map, kind 1 the relativistic one.  Iterates until the sup-norm
    residual drops below tol/32 (the safety factor keeps the returned iterate
    itself within ~10*tol of the true fixed point even when the map's
    contraction rate degenerates near the critical point) or max_iter.
    Returns (M, residual, iterations).
    """
    q, p = signs.shape
    m = m0.copy()
    rhs = np.empty(p)
    res = math.inf
    it = 0
    stop = tol * 0.03125
    while it < max_iter:
        normsq = 0.0
        for mu in range(p):
            normsq += m[mu] * m[mu]
        denom = math.sqrt(1.0 + normsq) if kind == KIND_RELATIVISTIC else 1.0
        for mu in range(p):
            rhs[mu] = 0.0
        for k in range(q):
            arg = 0.0
            for mu in range(p):
                arg += signs[k, mu] * m[mu]
            th = math.tanh(beta * arg / denom)
            for mu in range(p):
                rhs[mu] += signs[k, mu] * th
        res = 0.0
        for mu in range(p):
            rhs[mu] /= q
            d = abs(m[mu] - rhs[mu])
            if d > res:
                res = d
        it += 1
        if res <= stop:
            break
        for mu in range(p):
            m[mu] = (1.0 - damping) * m[mu] + damping * rhs[mu]
    return m, res, it


@njit(cache=True, nogil=True)
def convexity_max_violation(p, res):
    """Worst value of sqrt(1+|rho m1+(1-rho) m2|^2) - rho sqrt(1+|m1|^2) - (1-rho) sqrt(1+|m2|^2).

    Grid: each component of m1, m2 on res equispaced points of [-1, 1]; rho on
    res interior points of (0, 1).  Convexity of x -> sqrt(1+x^2) makes the
    true supremum 0; anything above ~1e-12 flags a violation.
    """
    grid = np.linspace(-1.0, 1.0, res)
    m1 = np.empty(p)
    m2 = np.empty(p)
    worst = -math.inf
    total = res ** (2 * p)
    for idx in range(total):
        r = idx
        for mu in range(p):
            m1[mu] = grid[r % res]
            r //= res
        for mu in range(p):
            m2[mu] = grid[r % res]
            r //= res
        a = 0.0
        b = 0.0
        c = 0.0
        for mu in range(p):
            a += m1[mu] * m1[mu]
            b += m2[mu] * m2[mu]
            c += m1[mu] * m2[mu]
        sa = math.sqrt(1.0 + a)
        sb = math.sqrt(1.0 + b)
        for k in range(res):
            rho = (k + 1.0) / (res + 1.0)
            mid = rho * rho * a + 2.0 * rho * (1.0 - rho) * c + (1.0 - rho) * (1.0 - rho) * b
            gap = math.sqrt(1.0 + mid) - rho * sa - (1.0 - rho) * sb
            if gap > worst:
                worst = gap
    return worst
