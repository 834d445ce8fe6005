"""Dense two-phase simplex for small feasibility/optimization problems.

Solves  min c.x  s.t.  A x = b, x >= 0  with Bland's anti-cycling rule.
Arithmetic is float64 or exact fractions (object arrays); the exact mode
exists so that infeasibility certificates can be verified without rounding.
An infeasible problem yields a Farkas vector y with y.A <= 0 and y.b > 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

_FLOAT_TOL = 1e-9


@dataclass(frozen=True)
class Feasible:
    x: np.ndarray
    objective: object = None


@dataclass(frozen=True)
class Infeasible:
    farkas: np.ndarray  # y with y.A <= 0 (componentwise) and y.b > 0


@dataclass(frozen=True)
class Unbounded:
    pass


def _tol(exact):
    return Fraction(0) if exact else _FLOAT_TOL


def _zeros(shape, exact):
    if exact:
        arr = np.empty(shape, dtype=object)
        arr[...] = Fraction(0)
        return arr
    return np.zeros(shape)


def as_exact_array(values) -> np.ndarray:
    """Convert floats (exactly, no rounding: binary floats are rationals)."""
    arr = np.empty(np.shape(values), dtype=object)
    flat = arr.reshape(-1)
    for i, v in enumerate(np.asarray(values, dtype=object).reshape(-1)):
        flat[i] = v if isinstance(v, Fraction) else Fraction(v)
    return arr


def solve_lp(A, b, c=None, exact: bool = False):
    """Two-phase simplex. Returns Feasible, Infeasible, or Unbounded.

    With c=None the problem is pure feasibility (phase one only).
    """
    if exact:
        A = as_exact_array(A)
        b = as_exact_array(b)
        c = as_exact_array(c) if c is not None else None
    else:
        A = np.array(A, dtype=float)
        b = np.array(b, dtype=float)
        c = np.array(c, dtype=float) if c is not None else None
    m, n = A.shape
    tol = _tol(exact)

    # sign-normalize so b >= 0; remember flips for the Farkas vector
    flips = _zeros(m, exact)
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]
            flips[i] = 1

    # phase 1 tableau: [A | I | b], basis = artificials
    T = _zeros((m, n + m + 1), exact)
    T[:, :n] = A
    for i in range(m):
        T[i, n + i] = Fraction(1) if exact else 1.0
    T[:, -1] = b
    basis = list(range(n, n + m))

    # reduced costs for min sum(artificials): rc_j = c_j - sum of column j
    rc = _zeros(n + m + 1, exact)
    for j in range(n + m):
        col_sum = T[:, j].sum()
        rc[j] = (Fraction(1) if exact else 1.0) * (1 if j >= n else 0) - col_sum
    rc[-1] = -b.sum()

    status = _simplex_loop(T, rc, basis, tol, allow=n + m)
    assert status != "unbounded"  # phase-1 objective is bounded below by 0
    w = -rc[-1]
    if w > tol:
        # infeasible: recover the dual vector from the artificial columns
        y = _zeros(m, exact)
        for i in range(m):
            y[i] = (Fraction(1) if exact else 1.0) - rc[n + i]
        for i in range(m):
            if flips[i]:
                y[i] = -y[i]
        return Infeasible(y)

    # drive any remaining artificial variables out of the basis
    for i in range(m):
        if basis[i] >= n:
            pivot_col = None
            for j in range(n):
                if abs(T[i, j]) > tol:
                    pivot_col = j
                    break
            if pivot_col is None:
                continue  # redundant row; harmless
            _pivot(T, rc, basis, i, pivot_col)

    x = _zeros(n, exact)
    for i, j in enumerate(basis):
        if j < n:
            x[j] = T[i, -1]
    if c is None:
        return Feasible(x)

    # phase 2: express the real costs relative to the current basis
    rc2 = _zeros(n + m + 1, exact)
    rc2[:n] = c
    for i, j in enumerate(basis):
        coeff = rc2[j]
        if coeff != 0:
            rc2 = rc2 - coeff * T[i]
    status = _simplex_loop(T, rc2, basis, tol, allow=n)
    if status == "unbounded":
        return Unbounded()
    x = _zeros(n, exact)
    for i, j in enumerate(basis):
        if j < n:
            x[j] = T[i, -1]
    objective = (c * x).sum()
    return Feasible(x, objective)


def _simplex_loop(T, rc, basis, tol, allow):
    """Pivot until optimal; Bland's rule on both choices. Mutates in place."""
    m = T.shape[0]
    while True:
        entering = None
        for j in range(allow):
            if rc[j] < -tol:
                entering = j
                break
        if entering is None:
            return "optimal"
        leaving = None
        best = None
        for i in range(m):
            a = T[i, entering]
            if a > tol:
                ratio = T[i, -1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leaving]):
                    best = ratio
                    leaving = i
        if leaving is None:
            return "unbounded"
        _pivot(T, rc, basis, leaving, entering)


def _pivot(T, rc, basis, row, col):
    T[row] = T[row] / T[row, col]
    pivot_row = T[row]
    for i in range(T.shape[0]):
        if i != row:
            factor = T[i, col]
            if factor != 0:
                T[i] = T[i] - factor * pivot_row
    factor = rc[col]
    if factor != 0:
        rc -= factor * pivot_row
    basis[row] = col


def verify_farkas(A, b, y, exact: bool = True, tol=None):
    """Check y.A <= tol componentwise and y.b > tol by direct multiplication."""
    if exact:
        A = as_exact_array(A)
        b = as_exact_array(b)
        y = as_exact_array(y)
        tol = Fraction(0) if tol is None else tol
    else:
        A, b, y = (np.asarray(z, dtype=float) for z in (A, b, y))
        tol = _FLOAT_TOL if tol is None else tol
    against_columns = y @ A
    return bool(max(against_columns) <= tol and (y * b).sum() > tol)
