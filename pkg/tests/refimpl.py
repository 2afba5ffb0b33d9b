"""Independent slow reference implementations used only by the tests.

Everything here is written term-by-term from the defining formulas, with
plain python loops and itertools enumeration, deliberately sharing no code
with the package internals.
"""

import itertools
import math


def ref_mf_objective(model, x):
    """Sum of coupling terms, field terms, and binary entropies."""
    total = 0.0
    for e in range(model.m):
        i, j = model.edges[e]
        total += model.couplings[e] * x[i] * x[j]
    for i in range(model.n):
        total += model.fields[i] * x[i]
        p = (1.0 + x[i]) / 2.0
        for q in (p, 1.0 - p):
            if q > 0.0:
                total -= q * math.log(q)
    return total


def ref_dual_bethe(model, nu):
    """Dual Bethe objective with explicit products instead of log sums."""
    incoming = [[] for _ in range(model.n)]
    for e in range(model.m):
        i, j = model.edges[e]
        theta = math.tanh(model.couplings[e])
        incoming[j].append(theta * nu[2 * e])      # i -> j
        incoming[i].append(theta * nu[2 * e + 1])  # j -> i
    total = 0.0
    for i in range(model.n):
        plus = math.exp(model.fields[i])
        minus = math.exp(-model.fields[i])
        for z in incoming[i]:
            plus *= 1.0 + z
            minus *= 1.0 - z
        total += math.log(plus + minus)
    for e in range(model.m):
        theta = math.tanh(model.couplings[e])
        total -= math.log(1.0 + theta * nu[2 * e] * nu[2 * e + 1])
        total += math.log(math.cosh(model.couplings[e]))
    return total


def ref_log_z(model):
    """log partition function by direct enumeration over all spin vectors."""
    weights = []
    for spins in itertools.product((-1.0, 1.0), repeat=model.n):
        energy = 0.0
        for e in range(model.m):
            i, j = model.edges[e]
            energy += model.couplings[e] * spins[i] * spins[j]
        for i in range(model.n):
            energy += model.fields[i] * spins[i]
        weights.append(energy)
    top = max(weights)
    return top + math.log(sum(math.exp(w - top) for w in weights))


def ref_moments(model):
    """(log_z, node means, edge correlations) by direct enumeration."""
    log_z = ref_log_z(model)
    means = [0.0] * model.n
    corrs = [0.0] * model.m
    for spins in itertools.product((-1.0, 1.0), repeat=model.n):
        energy = 0.0
        for e in range(model.m):
            i, j = model.edges[e]
            energy += model.couplings[e] * spins[i] * spins[j]
        for i in range(model.n):
            energy += model.fields[i] * spins[i]
        p = math.exp(energy - log_z)
        for i in range(model.n):
            means[i] += p * spins[i]
        for e in range(model.m):
            i, j = model.edges[e]
            corrs[e] += p * spins[i] * spins[j]
    return log_z, means, corrs


def fd_gradient(fn, x, step=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x = [float(v) for v in x]
    grad = []
    for k in range(len(x)):
        hi = list(x)
        lo = list(x)
        hi[k] += step
        lo[k] -= step
        grad.append((fn(hi) - fn(lo)) / (2.0 * step))
    return grad


def bisect_root(fn, lo, hi, tol=1e-14):
    """Root of fn on [lo, hi] by bisection; fn(lo) and fn(hi) must differ in sign."""
    flo = fn(lo)
    if flo == 0.0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0 or hi - lo < tol:
            return mid
        if (fmid > 0.0) == (flo > 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_max(fn, lo, hi, tol=1e-12):
    """Golden-section maximum of a unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)
