"""Mean-field free energy, its gradient, and the synchronous tanh iteration.

The mean-field objective over product states x in [-1, 1]^n is

    F(x) = sum_e J_e x_i x_j + h . x + sum_i H((1 + x_i) / 2)

and the iteration x <- tanh(Jx + h) is a monotone map whose all-ones
trajectory decreases coordinate-wise to the maximal fixed point while F is
non-decreasing along it. mf_error_bound gives the convergence-rate guarantee
for the objective residual as a function of the step count and model norms.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .model import DomainError, IsingModel, ModelNorms
from .trace import IterationTrace

_CLAMP = 1.0 - 1e-15


def bernoulli_entropy(x):
    """Elementwise H(Ber((1+x)/2)) in nats, stable at the endpoints x = +-1."""
    x = np.asarray(x, dtype=np.float64)
    out = np.full(x.shape, math.log(2.0))
    xp = 1.0 + x
    xm = 1.0 - x
    mp = xp > 0.0
    mm = xm > 0.0
    out[mp] -= 0.5 * xp[mp] * np.log(xp[mp])
    out[mm] -= 0.5 * xm[mm] * np.log(xm[mm])
    return out


def _check_state(model: IsingModel, x, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n,):
        raise DomainError(f"{name} has shape {x.shape}, expected ({model.n},)")
    return x


def mf_objective(model: IsingModel, x) -> float:
    """Mean-field objective F(x); the endpoints |x_i| = 1 are legal."""
    x = _check_state(model, x)
    if x.size and float(np.max(np.abs(x))) > 1.0:
        raise DomainError("magnetizations must lie in [-1, 1]")
    energy = float(model.couplings @ (x[model.edge_i] * x[model.edge_j]))
    energy += float(model.fields @ x)
    return energy + float(bernoulli_entropy(x).sum())


def mf_gradient(model: IsingModel, x):
    """Gradient (Jx + h) - arctanh(x); requires |x_i| < 1 strictly."""
    x = _check_state(model, x)
    if x.size and float(np.max(np.abs(x))) >= 1.0:
        raise DomainError("gradient needs |x_i| < 1 strictly")
    return model.j_matvec(x) + model.fields - np.arctanh(x)


def mf_step(model: IsingModel, x):
    """One synchronous update tanh(Jx + h)."""
    x = _check_state(model, x)
    return np.tanh(model.j_matvec(x) + model.fields)


def _resolve_init(model: IsingModel, init, low=-1.0):
    if isinstance(init, str):
        if init == "ones":
            return np.ones(model.n)
        if init == "zeros":
            return np.zeros(model.n)
        raise DomainError(f"unknown init {init!r} (expected 'ones', 'zeros', or an array)")
    x = np.array(init, dtype=np.float64).reshape(-1)
    if x.shape != (model.n,):
        raise DomainError(f"init has shape {x.shape}, expected ({model.n},)")
    if x.size and (float(x.max()) > 1.0 or float(x.min()) < low):
        raise DomainError(f"init entries must lie in [{low:g}, 1]")
    return x


def mf_iterate(model: IsingModel, init="ones", max_steps=10**6, tol=1e-10,
               record=True):
    """Run x <- tanh(Jx + h) until the sup-norm step drops below tol.

    Returns (x, IterationTrace). The trace records the objective, step size,
    gradient l1 norm, and theorem bound per step starting at t = 0; pass
    record=False to skip the objective/gradient columns (left nan).
    """
    max_steps = int(max_steps)
    if max_steps < 1:
        raise DomainError("max_steps must be >= 1")
    if not (tol >= 0.0):
        raise DomainError("tol must be >= 0")
    x0 = _resolve_init(model, init)
    x, obj, step_inf, grad_l1, steps, converged = _kernels.mf_run(
        model.dir_src, model.dir_dst, model.dir_coupling, model.fields,
        model.edge_i, model.edge_j, model.couplings,
        x0, max_steps, float(tol), bool(record))
    t = np.arange(steps + 1, dtype=np.int64)
    trace = IterationTrace(algo="mf", t=t, objective=obj, step_inf=step_inf,
                           bound=_bound_array(model.norms(), t),
                           converged=converged, grad_l1=grad_l1)
    return x, trace


def mf_error_bound(norms: ModelNorms, t) -> float:
    """Objective residual bound min(S/t, (S/floor(t/2))^(4/3)) with S = |J|_1 + |h|_1.

    The 4/3-rate branch is indexed conservatively at floor(t/2) (it is proven
    at the doubled step count), so it reads +inf for t = 1.
    """
    t = int(t)
    if t < 1:
        raise DomainError("t must be >= 1")
    s = norms.j_l1 + norms.h_l1
    lin = s / t
    half = t // 2
    if half == 0:
        return lin
    return min(lin, (s / half) ** (4.0 / 3.0))


def _bound_array(norms: ModelNorms, t: np.ndarray) -> np.ndarray:
    s = norms.j_l1 + norms.h_l1
    tt = t.astype(np.float64)
    out = np.full(t.shape, np.inf)
    pos = t >= 1
    out[pos] = s / tt[pos]
    half = t // 2
    ok = half >= 1
    out[ok] = np.minimum(out[ok], (s / half[ok]) ** (4.0 / 3.0))
    return out


def mf_fixed_point_residual(model: IsingModel, x) -> float:
    """Sup-norm of tanh(Jx + h) - x; zero exactly at fixed points."""
    x = _check_state(model, x)
    return float(np.max(np.abs(mf_step(model, x) - x), initial=0.0))
