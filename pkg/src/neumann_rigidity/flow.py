"""Diffusion flows and the monotone quantities they carry.

Heat flow: v_t = lap v with Neumann conditions, monitored through
u = v^(1/(p+1)) for p in (0, 1). The quadrature mass of v is conserved
exactly by the explicit scheme (the stiffness annihilates constants), the
Dirichlet energy of u decays exponentially, and the spectral-gap deficit

    ||grad u||^2 - lambda2 (||u||_2^2 - ||u||_{p+1}^2)

is nonincreasing.

Nonlinear flow: v_t = v^(2-2beta) (lap v + kappa |grad v|^2 / v) with
kappa = beta(p-1)+1. The scheme advances the conserved density
m = v^(beta(p+1)), whose equation is the divergence form

    m_t = beta(p+1) div(v^kappa grad v),

so the quadrature mass of m is conserved to round-off for every step
size. The deficit functional of u = v^beta with constant (1-theta) times
the discrete spectral gap is nonincreasing along the flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .constants import r_coefficient, theta_star
from .errors import ConvergenceError, PositivityError, RangeError
from .grid import Field, Grid
from .spectral import spectral_gap

_STORE_TARGET = 400


@dataclass
class FlowTrace:
    """Time series along a flow; all arrays share one length."""

    times: np.ndarray
    entropy_e: np.ndarray
    production_i: np.ndarray
    j_lambda: np.ndarray
    mass: np.ndarray
    min_v: np.ndarray
    dt_used: np.ndarray
    # run metadata (not part of the per-step series)
    p: float = 0.0
    beta: Optional[float] = None
    theta: Optional[float] = None
    lambda2: float = 0.0
    Lambda: float = 0.0
    dim: int = 0
    # nonlinear runs also record int |grad v|^4 / v^2 per stored step
    quartic: Optional[np.ndarray] = None


class _Recorder:
    def __init__(self):
        self.rows: List[tuple] = []

    def add(self, t, e, i, j, mass, vmin, dt):
        self.rows.append((t, e, i, j, mass, vmin, dt))

    def arrays(self):
        cols = list(zip(*self.rows))
        return [np.asarray(c, dtype=float) for c in cols]


def _entropy_pair(grid: Grid, u: np.ndarray, p: float):
    np1 = grid.lp_norm(u, p + 1.0) ** 2
    n2 = grid.integrate(u * u)
    e = (np1 - n2) / (p - 1.0)
    i = grid.energy(u)
    return e, i


def heat_flow_run(grid: Grid, p: float, v0: Field, t_end: float,
                  n_store: int = _STORE_TARGET) -> FlowTrace:
    """Integrate the Neumann heat equation and record the u-quantities.

    Requires p in (0, 1) and strictly positive data. Explicit stepping at
    a fixed parabolic step keeps positivity (a loss flags a discretization
    bug, since the heat flow preserves positivity).
    """
    if not 0.0 < p < 1.0:
        raise RangeError("the heat-flow estimate needs p in (0, 1)")
    if not t_end > 0.0:
        raise RangeError("t_end must be positive")
    v = np.asarray(v0.values, dtype=float).copy()
    if v.min() <= 0.0:
        raise PositivityError("initial data must be strictly positive")

    lam2 = spectral_gap(grid).eigenvalue
    Lam = (1.0 - p) * lam2
    d = grid.dim
    dt = 0.25 * grid.h_min**2 / d
    n_steps = max(1, int(math.ceil(t_end / dt)))
    dt = t_end / n_steps
    every = max(1, n_steps // n_store)

    rec = _Recorder()

    def record(t, dt_now):
        u = v ** (1.0 / (p + 1.0))
        e, i = _entropy_pair(grid, u, p)
        rec.add(t, e, i, i - Lam * e, grid.integrate(v), float(v.min()), dt_now)

    record(0.0, dt)
    t = 0.0
    for k in range(1, n_steps + 1):
        v += dt * grid.laplacian(v)
        t = k * dt
        if v.min() <= 0.0:
            raise PositivityError(
                "heat flow lost positivity: the spatial operator is "
                "mis-assembled or the step exceeds the parabolic bound")
        if k % every == 0 or k == n_steps:
            record(t, dt)
    arrays = rec.arrays()
    return FlowTrace(*arrays, p=p, beta=None, theta=None,
                     lambda2=lam2, Lambda=Lam, dim=grid.dim)


def nonlinear_flow_run(grid: Grid, p: float, beta: float, theta: float,
                       v0: Field, t_end: float, cfl: float = 0.2,
                       n_store: int = _STORE_TARGET) -> FlowTrace:
    """Integrate the nonlinear flow in its conserved density.

    The step density m = v^(beta(p+1)) is advanced with face-averaged
    coefficients v^kappa, conserving the quadrature mass of m to round-off.
    The step size respects dt <= cfl * h^2 * min(v^(2 beta - 2)) / (2 d),
    recomputed adaptively; positivity below 1e-10 of the initial maximum
    aborts with a diagnostic.
    """
    if p == 1.0 or not p > 0.0:
        raise RangeError("the nonlinear flow needs p > 0, p != 1")
    if not theta_star(p, grid.dim) < theta < 1.0:
        raise RangeError("theta must lie in (theta_star, 1)")
    if abs(beta) < 1e-12:
        raise RangeError("beta must be nonzero")
    if not t_end > 0.0:
        raise RangeError("t_end must be positive")
    v = np.asarray(v0.values, dtype=float).copy()
    if v.min() <= 0.0:
        raise PositivityError("initial data must be strictly positive")

    kappa = beta * (p - 1.0) + 1.0
    m_exp = beta * (p + 1.0)
    lam2 = spectral_gap(grid).eigenvalue
    Lam = (1.0 - theta) * lam2
    d = grid.dim
    floor = 1e-10 * float(v.max())

    rec = _Recorder()
    quartic: List[float] = []

    def record(t, dt_now):
        u = v**beta
        e, i = _entropy_pair(grid, u, p)
        rec.add(t, e, i, i - Lam * e, grid.integrate(v**m_exp),
                float(v.min()), dt_now)
        g = grid.nodal_grad_sq(v)
        quartic.append(grid.integrate(g * g / (v * v)))

    m = v**m_exp
    record(0.0, 0.0)
    t = 0.0
    t_next_store = t_end / n_store
    while t < t_end * (1.0 - 1e-14):
        dt = cfl * grid.h_min**2 * float((v ** (2.0 * beta - 2.0)).min()) / (2.0 * d)
        dt = min(dt, t_end - t)
        ok = False
        for _ in range(40):
            coeff = v**kappa
            m_new = m - dt * m_exp * grid.weighted_stiffness_apply(coeff, v) / grid.weights
            if np.all(np.isfinite(m_new)) and np.all(m_new > 0.0):
                v_new = m_new ** (1.0 / m_exp)
                if np.all(np.isfinite(v_new)) and v_new.min() > floor:
                    ok = True
                    break
            dt *= 0.5
        if not ok:
            if v.min() <= floor:
                raise PositivityError(
                    f"flow hit the positivity floor at t={t:.3e}; "
                    f"retry with dt <= {dt:.3e}")
            raise ConvergenceError("step-size halving reached its floor")
        m, v = m_new, v_new
        t += dt
        if t >= t_next_store or t >= t_end * (1.0 - 1e-14):
            record(t, dt)
            t_next_store += t_end / n_store
    arrays = rec.arrays()
    return FlowTrace(*arrays, p=p, beta=beta, theta=theta,
                     lambda2=lam2, Lambda=Lam, dim=grid.dim,
                     quartic=np.asarray(quartic))


def accumulated_dissipation_bound(trace: FlowTrace):
    """Both sides of the integrated dissipation estimate.

    Returns (R beta^2 int_0^T int |grad v|^4/v^2 dt, J(0) - J(T)); the
    left side never exceeds the right along the flow when theta and beta
    are admissible (trapezoid rule in time on the stored samples).
    """
    if trace.quartic is None or trace.beta is None or trace.theta is None:
        raise RangeError("dissipation bound needs a nonlinear-flow trace")
    R = r_coefficient(trace.theta, trace.beta, trace.p, trace.dim)
    lhs = R * trace.beta**2 * float(np.trapezoid(trace.quartic, trace.times))
    rhs = float(trace.j_lambda[0] - trace.j_lambda[-1])
    return lhs, rhs


def fitted_decay_rate(trace: FlowTrace, floor_rel: float = 1e-12) -> float:
    """Exponential rate of the Dirichlet energy: minus the log-linear slope."""
    i0 = trace.production_i[0]
    mask = trace.production_i > floor_rel * max(i0, 1e-300)
    if int(mask.sum()) < 3:
        raise RangeError("trace has too few usable samples for a rate fit")
    slope = np.polyfit(trace.times[mask],
                       np.log(trace.production_i[mask]), 1)[0]
    return -float(slope)


def demange_check(v: Field, beta: float, p: float):
    """Both sides of the gradient-quartic interpolation inequality.

    With u = v^beta rescaled to ||u||_{p+1} = 1,

        int |grad v|^4 / v^2  >=  (1/beta^2) int|grad u|^2 int|grad v|^2
                                   / (int u^2)^delta.

    All three gradient integrals are built from one nodal |grad v|^2 so
    the two Holder steps of the estimate are exact finite sums; violations
    can only be round-off.
    """
    if not beta > 1.0:
        raise RangeError("the interpolation needs beta > 1")
    if p < 3.0 and beta > 2.0 / (3.0 - p) + 1e-14:
        raise RangeError("for p < 3 the admissible range is beta <= 2/(3-p)")
    grid = v.grid
    vals = np.asarray(v.values, dtype=float)
    if vals.min() <= 0.0:
        raise PositivityError("field must be strictly positive")
    scale = grid.integrate(vals ** (beta * (p + 1.0))) ** (1.0 / (beta * (p + 1.0)))
    vv = vals / scale
    g = grid.nodal_grad_sq(vv)
    lhs = grid.integrate(g * g / (vv * vv))
    grad_u_sq = beta**2 * grid.integrate(vv ** (2.0 * beta - 2.0) * g)
    grad_v_sq = grid.integrate(g)
    u_sq = grid.integrate(vv ** (2.0 * beta))
    delta = (p + 1.0 + beta * (p - 3.0)) / (2.0 * beta * (p - 1.0))
    rhs = grad_u_sq * grad_v_sq / (beta**2 * u_sq**delta)
    return lhs, rhs


@dataclass
class ProductionReport:
    """Stepwise verdicts for the entropy-production differential inequality."""

    n_intervals: int
    n_satisfied: int
    max_violation: float
    tolerance: float
    violations: List[int] = field(default_factory=list)

    @property
    def fraction_satisfied(self) -> float:
        return self.n_satisfied / self.n_intervals if self.n_intervals else 1.0


def entropy_production_inequality_check(trace: FlowTrace, exponents,
                                        theta: float, lambda2: float
                                        ) -> ProductionReport:
    """Check i' - Lam e' - R/(2 beta^2) * i e' / (1-(p-1)e)^delta <= 0.

    Derivatives are finite differences between stored samples, with i and
    e taken at interval midpoints; the tolerance scales with the largest
    |i'| so discretization noise on a desk grid does not count as a
    violation. The delta exponent is evaluated from its formula even for
    beta outside the certified interpolation range (where R < 0 makes the
    extra term a slack bonus).
    """
    if trace.times.size < 10:
        raise RangeError("trace too short (need at least 10 stored steps)")
    p = exponents.p
    beta = exponents.beta
    d = exponents.d
    if beta in (0.0, 1.0) or p == 1.0:
        raise RangeError("the inequality needs beta not in {0,1} and p != 1")
    R = r_coefficient(theta, beta, p, d)
    delta = (p + 1.0 + beta * (p - 3.0)) / (2.0 * beta * (p - 1.0))
    Lam = (1.0 - theta) * lambda2

    t, e, i = trace.times, trace.entropy_e, trace.production_i
    dt = np.diff(t)
    if np.any(dt <= 0.0):
        raise RangeError("trace times must be strictly increasing")
    di = np.diff(i) / dt
    de = np.diff(e) / dt
    emid = 0.5 * (e[1:] + e[:-1])
    imid = 0.5 * (i[1:] + i[:-1])
    basis = 1.0 - (p - 1.0) * emid
    if np.any(basis <= 0.0):
        raise RangeError("entropy left the admissible domain 1-(p-1)e > 0")
    lhs = di - Lam * de - R / (2.0 * beta**2) * imid * de * basis ** (-delta)
    tol = 1e-6 * float(np.max(np.abs(di))) if di.size else 0.0
    bad = np.nonzero(lhs > tol)[0]
    return ProductionReport(
        n_intervals=int(lhs.size), n_satisfied=int(lhs.size - bad.size),
        max_violation=float(lhs.max(initial=-math.inf)), tolerance=tol,
        violations=[int(k) for k in bad])
