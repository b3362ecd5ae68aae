"""Positive solutions of the semilinear Neumann problem and their branches.

The equation solved nodewise is

    -eps(p) lap u + lam u - u^p = 0,    du/dn = 0,

with eps(p) the sign of p - 1. Constants u = lam^(1/(p-1)) solve it for
every lam; non-constant solutions branch off at lam = lambda2/|p-1| where
the linearization around the constant loses definiteness on the gap mode.
A damped Newton iteration handles single solves and a pseudo-arclength
corrector traces the non-constant branch after switching along the gap
eigenfunction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import (ConvergenceError, DampingError, PositivityError,
                     RangeError, SingularJacobianError)
from .grid import Field, Grid
from .spectral import spectral_gap

_NEWTON_TOL = 1e-9
_LAM_CAP_FACTOR = 10.0


@dataclass
class BranchPoint:
    lam: float
    solution: Field
    deviation: float
    newton_residual: float
    arclength: float


@dataclass
class BranchTrace:
    """Ordered branch points plus bookkeeping flags."""

    points: List[BranchPoint]
    bifurcation_lambda: Optional[float]
    truncated: bool = False


def _epsilon(p: float) -> int:
    if p == 1.0:
        raise RangeError("the equation needs p != 1")
    return 1 if p > 1.0 else -1


def _residual(grid: Grid, p: float, lam: float, u: np.ndarray) -> np.ndarray:
    return -_epsilon(p) * grid.laplacian(u) + lam * u - u**p


def _scaled_norm(grid: Grid, p: float, lam: float, u: np.ndarray,
                 F: np.ndarray) -> float:
    scale = max(1.0, abs(lam) * math.sqrt(grid.integrate(u * u)))
    return math.sqrt(grid.integrate(F * F)) / scale


def _jacobian_matrix(grid: Grid, p: float, lam: float,
                     u: np.ndarray) -> sparse.csc_matrix:
    """Quadrature-weighted Jacobian: A s = M * (dF/du) s, symmetric."""
    K = grid.sparse_stiffness()
    w = grid.mass_vector()
    diag = w * (lam - p * u.ravel() ** (p - 1.0))
    return (_epsilon(p) * K + sparse.diags(diag)).tocsc()


def _jac_solve(lu, grid: Grid, rhs_field: np.ndarray) -> np.ndarray:
    w = grid.mass_vector()
    out = lu.solve(w * rhs_field.ravel())
    if not np.all(np.isfinite(out)):
        raise SingularJacobianError("Jacobian solve produced non-finite step")
    return out.reshape(grid.shape)


def newton_solve(grid: Grid, p: float, lam: float, initial: Field,
                 tol: float = _NEWTON_TOL, max_iter: int = 60) -> BranchPoint:
    """Damped Newton iteration from a positive initial field.

    Steps are halved until positivity and residual decrease hold; when the
    plain iteration stalls against the positive cone (its path heads for a
    sign-changing root) it restarts once in log coordinates, which keep
    the iterates positive structurally. A singular linearization (e.g.
    exactly at a bifurcation point) raises SingularJacobianError so
    callers can switch branches instead.
    """
    if not lam > 0.0:
        raise RangeError("lam must be positive")
    u = np.asarray(initial.values, dtype=float).copy()
    if u.min() <= 0.0:
        raise PositivityError("the initial field must be positive")
    try:
        return _newton_plain(grid, p, lam, u, tol, max_iter)
    except DampingError:
        return _newton_log(grid, p, lam, u, tol, max_iter)


def _newton_plain(grid: Grid, p: float, lam: float, u: np.ndarray,
                  tol: float, max_iter: int) -> BranchPoint:
    res = math.inf
    for _ in range(max_iter):
        F = _residual(grid, p, lam, u)
        res = _scaled_norm(grid, p, lam, u, F)
        if res <= tol:
            return BranchPoint(lam, Field(grid, u), grid.deviation(u),
                               res, 0.0)
        try:
            lu = splu(_jacobian_matrix(grid, p, lam, u))
            s = -_jac_solve(lu, grid, F)
        except (RuntimeError, SingularJacobianError) as exc:
            raise SingularJacobianError(str(exc)) from exc
        norm_s = math.sqrt(grid.integrate(s * s))
        norm_u = math.sqrt(grid.integrate(u * u))
        if norm_s > 1e10 * max(1.0, norm_u):
            raise SingularJacobianError("Newton step blew up (singular system)")
        alpha = 1.0
        accepted = False
        while alpha >= 1e-12:
            cand = u + alpha * s
            if cand.min() > 0.0:
                Fc = _residual(grid, p, lam, cand)
                if (_scaled_norm(grid, p, lam, cand, Fc)
                        <= (1.0 - 1e-4 * alpha) * res):
                    u = cand
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            raise DampingError(
                f"Newton damping failed at lam={lam:g} (residual {res:.3e})")
    raise ConvergenceError("Newton did not converge", res, max_iter)


def _newton_log(grid: Grid, p: float, lam: float, u0: np.ndarray,
                tol: float, max_iter: int) -> BranchPoint:
    w = np.log(u0)
    res = math.inf
    for _ in range(max_iter):
        u = np.exp(w)
        F = _residual(grid, p, lam, u)
        res = _scaled_norm(grid, p, lam, u, F)
        if res <= tol:
            return BranchPoint(lam, Field(grid, u), grid.deviation(u),
                               res, 0.0)
        try:
            A = _jacobian_matrix(grid, p, lam, u) @ sparse.diags(u.ravel())
            lu = splu(A.tocsc())
            s = -_jac_solve(lu, grid, F)
        except (RuntimeError, SingularJacobianError) as exc:
            raise SingularJacobianError(str(exc)) from exc
        smax = np.abs(s).max()
        if smax > 5.0:
            s = s * (5.0 / smax)   # cap the multiplicative update
        alpha = 1.0
        accepted = False
        while alpha >= 1e-12:
            cand = np.exp(w + alpha * s)
            Fc = _residual(grid, p, lam, cand)
            if (_scaled_norm(grid, p, lam, cand, Fc)
                    <= (1.0 - 1e-4 * alpha) * res):
                w = w + alpha * s
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            raise DampingError(
                f"Newton damping failed at lam={lam:g} (residual {res:.3e})")
    raise ConvergenceError("Newton did not converge", res, max_iter)


def constant_solution(grid: Grid, p: float, lam: float) -> BranchPoint:
    c = lam ** (1.0 / (p - 1.0))
    u = np.full(grid.shape, c)
    F = _residual(grid, p, lam, u)
    return BranchPoint(lam, Field(grid, u), 0.0,
                       _scaled_norm(grid, p, lam, u, F), 0.0)


# ----------------------------------------------------------------------
# pseudo-arclength machinery
def _arc_correct(grid: Grid, p: float, u0: np.ndarray, ell0: float,
                 tu: np.ndarray, tl: float, ds: float, lam_ref: float,
                 base_u: np.ndarray, base_ell: float,
                 tol: float = _NEWTON_TOL, max_iter: int = 30):
    """Correct a predictor onto the branch under an arclength constraint.

    Unknowns are (u, ell) with lam = lam_ref * ell; the constraint is
    <tu, u - base_u> + tl (ell - base_ell) = ds in the quadrature metric.
    Returns (u, ell, residual, n_iter) or raises.
    """
    w = grid.weights
    u = u0.copy()
    if u.min() <= 0.0:
        raise DampingError("predictor left the positive cone")
    ell = ell0
    for it in range(1, max_iter + 1):
        lam = lam_ref * ell
        if lam <= 0.0:
            raise DampingError("corrector left lam > 0")
        F = _residual(grid, p, lam, u)
        res = _scaled_norm(grid, p, lam, u, F)
        con = (float(np.sum(w * tu * (u - base_u)))
               + tl * (ell - base_ell) - ds)
        if res <= tol and abs(con) <= 1e-10 * max(1.0, abs(ds)):
            return u, ell, res, it
        try:
            lu = splu(_jacobian_matrix(grid, p, lam, u))
        except RuntimeError as exc:
            raise SingularJacobianError(str(exc)) from exc
        x1 = _jac_solve(lu, grid, F)
        x2 = _jac_solve(lu, grid, lam_ref * u)  # dF/d(ell)
        tux1 = float(np.sum(w * tu * x1))
        tux2 = float(np.sum(w * tu * x2))
        denom = tl - tux2
        if abs(denom) < 1e-14:
            raise SingularJacobianError("bordered system singular")
        dell = (-con + tux1) / denom
        du = -x1 - dell * x2
        alpha = 1.0
        while alpha >= 1e-10 and (u + alpha * du).min() <= 0.0:
            alpha *= 0.5
        if alpha < 1e-10:
            raise DampingError("positivity lost in arclength corrector")
        u = u + alpha * du
        ell = ell + alpha * dell
    raise ConvergenceError("arclength corrector did not converge", res, max_iter)


def trace_branch(grid: Grid, p: float, lambda_start: float,
                 direction: int = 1, n_max: int = 400,
                 lam_cap: Optional[float] = None) -> BranchTrace:
    """Walk the constant branch, switch at the bifurcation and continue.

    Constant points are emitted while walking from ``lambda_start`` in the
    given direction. When the gap-mode eigenvalue of the linearization
    changes sign the bifurcation value lambda2/|p-1| is recorded, the
    branch is switched along the gap eigenfunction, and pseudo-arclength
    continuation follows the non-constant branch until the lam cap, the
    point budget, or repeated step failures (flagged as truncated).
    """
    _epsilon(p)
    if direction not in (-1, 1):
        raise RangeError("direction must be +1 or -1")
    gap = spectral_gap(grid)
    lam2 = gap.eigenvalue
    u2 = gap.eigenfunction.values
    lam_star = lam2 / abs(p - 1.0)
    if lam_cap is None:
        lam_cap = _LAM_CAP_FACTOR * lam_star

    points: List[BranchPoint] = []
    lam = float(lambda_start)
    step = 0.02 * lam_star * direction
    crossed = False
    for _ in range(25):
        if lam <= 0.0 or lam > lam_cap:
            break
        points.append(constant_solution(grid, p, lam))
        nxt = lam + step
        if (lam - lam_star) * (nxt - lam_star) <= 0.0 and lam != lam_star:
            crossed = True
            break
        lam = nxt
    if not crossed:
        return BranchTrace(points, None, truncated=False)

    # gap-mode eigenvalue of the constant-branch Jacobian vanishes here
    bif = lam_star
    points.append(constant_solution(grid, p, bif))

    c_star = bif ** (1.0 / (p - 1.0))
    base_u = np.full(grid.shape, c_star)
    tu = u2 / math.sqrt(grid.integrate(u2 * u2))
    tl = 0.0
    first = None
    ds = 0.0
    for amp in (1e-3, 5e-3, 0.02, 0.05, 0.1, 0.2, 0.4):
        ds = amp * max(c_star, 1e-6)
        try:
            u, ell, res, _ = _arc_correct(
                grid, p, base_u + ds * tu, 1.0, tu, tl, ds, bif,
                base_u, 1.0)
        except (ConvergenceError, DampingError, SingularJacobianError):
            continue
        if grid.deviation(u) > 0.3 * ds:
            first = (u, ell, res)
            break
    if first is None:
        return BranchTrace(points, bif, truncated=True)

    u, ell, res = first
    arclen = ds
    points.append(BranchPoint(bif * ell, Field(grid, u.copy()),
                              grid.deviation(u), res, arclen))
    prev_u, prev_ell = base_u, 1.0
    scale = max(c_star, 1e-6)
    ds_max = 0.5 * scale
    ds_min = 1e-8 * scale
    fails = 0
    while len(points) < n_max:
        lam = bif * ell
        if not 0.0 < lam <= lam_cap:
            break
        dm = u - prev_u
        dl = ell - prev_ell
        nrm = math.sqrt(grid.integrate(dm * dm) + dl * dl)
        if nrm == 0.0:
            break
        tu, tl = dm / nrm, dl / nrm
        try:
            unew, ellnew, res, nit = _arc_correct(
                grid, p, u + ds * tu, ell + ds * tl, tu, tl, ds, bif, u, ell)
        except (ConvergenceError, DampingError, SingularJacobianError):
            ds *= 0.5
            fails += 1
            if ds < ds_min or fails > 40:
                return BranchTrace(points, bif, truncated=True)
            continue
        prev_u, prev_ell = u, ell
        u, ell = unew, ellnew
        arclen += ds
        points.append(BranchPoint(bif * ell, Field(grid, u.copy()),
                                  grid.deviation(u), res, arclen))
        if nit <= 4:
            ds = min(1.3 * ds, ds_max)
    return BranchTrace(points, bif, truncated=False)


def estimate_mu1(branches: Union[BranchTrace, Sequence],
                 p: float, deviation_rel: float = 1e-4) -> Optional[float]:
    """Smallest lam carrying a genuinely non-constant branch point.

    Points count as non-constant when their deviation exceeds
    ``deviation_rel`` times the solution norm. Returns None when no trace
    contains such a point.
    """
    if isinstance(branches, BranchTrace):
        branches = [branches]
    best: Optional[float] = None
    for trace in branches:
        pts = trace.points if isinstance(trace, BranchTrace) else trace
        for pt in pts:
            norm = math.sqrt(pt.solution.grid.integrate(pt.solution.values**2))
            if pt.deviation > deviation_rel * max(norm, 1e-300):
                if best is None or pt.lam < best:
                    best = pt.lam
    return best


def el_normalization(u: Field, p: float,
                     mu: Optional[float] = None):
    """Map a 1-homogeneous Euler-Lagrange solution to the autonomous equation.

    Returns (||u||_{p+1}^(p-1), rescaled) where the rescaled field carries
    the normalization that turns the quotient's Euler-Lagrange equation
    into -eps lap w + lam w - w^p = 0. When the quotient parameter ``mu``
    is not supplied it defaults to the field's own ||u||_{p+1}^(p-1), the
    convention under which the input is already normalized.
    """
    _epsilon(p)
    grid = u.grid
    vals = u.values
    norm = grid.lp_norm(np.abs(vals), p + 1.0)
    if norm == 0.0:
        raise RangeError("cannot normalize the zero field")
    mu_out = norm ** (p - 1.0)
    mu_param = mu_out if mu is None else float(mu)
    factor = mu_param ** (1.0 / (p - 1.0)) / norm
    return mu_out, Field(grid, factor * vals)
