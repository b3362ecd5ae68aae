"""Neumann spectral gap and Schrodinger ground states on grid operators.

The eigenproblems are the symmetric pencils K u = lambda M u (stiffness /
mass) and (K + s*M_phi) u = lambda M u. Both are solved by shifted inverse
iteration with the constant mode removed by explicit projection where
needed; inner solves reuse one sparse factorization of the shifted matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import ConvergenceError, RangeError
from .grid import Field, Grid

_MAX_OUTER = 500


@dataclass
class EigenPair:
    eigenvalue: float
    eigenfunction: Field
    residual: float
    iterations: int


def _m_norm(w: np.ndarray, u: np.ndarray) -> float:
    return math.sqrt(float(np.dot(w, u * u)))


def _fix_sign(u: np.ndarray) -> np.ndarray:
    # deterministic orientation: largest-magnitude entry is positive
    k = int(np.argmax(np.abs(u)))
    return -u if u[k] < 0.0 else u


def spectral_gap(grid: Grid, tol: float = 1e-10,
                 max_iter: int = _MAX_OUTER) -> EigenPair:
    """Smallest nonzero Neumann eigenvalue with its eigenfunction.

    The eigenfunction is normalized to ||u||_2 = 1, is orthogonal to
    constants, and the relative operator residual is at most ``tol``.
    Results are cached on the grid.
    """
    key = ("gap", tol)
    if key in grid._cache:
        return grid._cache[key]

    K = grid.sparse_stiffness()
    w = grid.mass_vector()
    n = w.size
    # K + M is positive definite; the constant mode is projected away in
    # the M inner product, so the iteration converges to the gap mode.
    shift = 1.0
    lu = splu((K + shift * sparse.diags(w)).tocsc())

    rng = np.random.default_rng(12345)
    u = rng.standard_normal(n)
    u -= np.dot(w, u)  # unit measure: M-projection onto mean zero
    u /= _m_norm(w, u)

    lam = 0.0
    res = math.inf
    iters = 0
    for iters in range(1, max_iter + 1):
        u = lu.solve(w * u)
        u -= np.dot(w, u)
        nrm = _m_norm(w, u)
        if nrm == 0.0:
            raise ConvergenceError("inverse iteration collapsed", res, iters)
        u /= nrm
        Ku = K @ u
        lam = float(np.dot(u, Ku))
        res = _m_norm(w, Ku / w - lam * u)
        if res <= tol * max(lam, 1.0):
            break
    else:
        raise ConvergenceError(
            f"spectral gap iteration did not reach tol={tol:g}", res, iters)

    u = _fix_sign(u)
    pair = EigenPair(lam, Field(grid, u.reshape(grid.shape)), res, iters)
    grid._cache[key] = pair
    return pair


def schrodinger_ground_state(grid: Grid, potential, sign: int,
                             tol: float = 1e-10,
                             max_iter: int = _MAX_OUTER) -> EigenPair:
    """Lowest eigenvalue of -lap + sign*phi with Neumann conditions.

    ``sign=-1`` gives the attractive operator -lap - phi, ``sign=+1`` the
    repulsive -lap + phi. The ground state is returned with positive sign
    and unit L2 norm.
    """
    if sign not in (-1, 1):
        raise RangeError("sign must be +1 or -1")
    phi = potential.values if isinstance(potential, Field) else np.asarray(potential)
    if phi.shape != grid.shape:
        raise RangeError("potential shape does not match the grid")
    if not np.all(np.isfinite(phi)):
        raise RangeError("potential must be finite")

    K = grid.sparse_stiffness()
    w = grid.mass_vector()
    v = sign * phi.ravel()
    A = K + sparse.diags(w * v)
    # -lap >= 0, so the spectrum is bounded below by min(sign*phi)
    sigma = float(v.min()) - 1.0
    lu = splu((A - sigma * sparse.diags(w)).tocsc())

    u = np.full(w.size, 1.0)
    u /= _m_norm(w, u)
    lam = 0.0
    res = math.inf
    iters = 0
    for iters in range(1, max_iter + 1):
        u = lu.solve(w * u)
        u /= _m_norm(w, u)
        Au = A @ u
        lam = float(np.dot(u, Au))
        res = _m_norm(w, Au / w - lam * u)
        if res <= tol * max(abs(lam), 1.0):
            break
    else:
        raise ConvergenceError(
            f"ground-state iteration did not reach tol={tol:g}", res, iters)

    if grid.integrate(u.reshape(grid.shape)) < 0.0:
        u = -u
    return EigenPair(lam, Field(grid, u.reshape(grid.shape)), res, iters)


def check_lin_interp_inequality(f: Field):
    """Both sides of (int |grad u|^2)^2 <= int |lap u|^2 * int u^2.

    With the summation-by-parts pair the discrete inequality is an exact
    Cauchy-Schwarz estimate; equality holds for eigenfunctions.
    """
    grid = f.grid
    u = f.values
    lhs = grid.energy(u) ** 2
    lap = grid.laplacian(u)
    rhs = grid.integrate(lap * lap) * grid.integrate(u * u)
    return lhs, rhs
