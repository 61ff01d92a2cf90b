"""Dense two-phase simplex with Bland's rule, vectorised over a batch.

Solves ``min c.x  s.t.  A x = b, x >= 0`` for a stack of right-hand sides
sharing ``A`` and ``c``. Each lane runs its own pivot sequence; the batch
just lets many tiny problems advance together. A batch of one is the plain
scalar solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2

_RUNNING = -1
_CAPPED = 3


class SolverError(RuntimeError):
    """The pivot loop hit its iteration cap."""


@dataclass
class LPResult:
    status: np.ndarray  # (B,) of OPTIMAL / INFEASIBLE / UNBOUNDED
    x: np.ndarray  # (B, n)
    objective: np.ndarray  # (B,)
    infeasibility: np.ndarray  # (B,) phase-one optimum (sum of artificials)


def _pivot(T, lanes, rows, cols):
    prow = T[lanes, rows, :] / T[lanes, rows, cols][:, None]
    colv = T[lanes, :, cols]
    T[lanes] -= colv[:, :, None] * prow[:, None, :]
    T[lanes, rows, :] = prow


def _iterate(T, basis, allowed, tol, max_iter):
    """Run Bland pivots until every lane is optimal or unbounded."""
    B = T.shape[0]
    status = np.full(B, _RUNNING)
    for _ in range(max_iter):
        run = np.flatnonzero(status == _RUNNING)
        if run.size == 0:
            return status
        rc = T[run, -1, :-1]
        cand = (rc < -tol) & allowed[None, :]
        has = cand.any(axis=1)
        status[run[~has]] = OPTIMAL
        run = run[has]
        if run.size == 0:
            continue
        enter = np.argmax(cand[has], axis=1)
        col = T[run, :-1, enter]
        rhs = T[run, :-1, -1]
        pos = col > tol
        unb = ~pos.any(axis=1)
        status[run[unb]] = UNBOUNDED
        run, enter, col, rhs, pos = run[~unb], enter[~unb], col[~unb], rhs[~unb], pos[~unb]
        if run.size == 0:
            continue
        ratio = np.where(pos, rhs / np.where(pos, col, 1.0), np.inf)
        best = ratio.min(axis=1)
        ties = pos & (ratio <= best[:, None] + 1e-12 * (1.0 + np.abs(best[:, None])))
        # Bland: among tied rows leave with the smallest basic index
        leave = np.argmin(np.where(ties, basis[run], np.iinfo(np.int64).max), axis=1)
        _pivot(T, run, leave, enter)
        basis[run, leave] = enter
    status[status == _RUNNING] = _CAPPED
    return status


def linprog_batch(
    A,
    B_rhs,
    c=None,
    tol: float = 1e-9,
    feas_tol: float = 1e-8,
    max_iter: int | None = None,
) -> LPResult:
    """Two-phase simplex over a batch of right-hand sides.

    ``A`` is ``(r, n)``, ``B_rhs`` is ``(batch, r)``. A lane is reported
    infeasible when the phase-one optimum exceeds ``feas_tol``.
    """
    A = np.asarray(A, dtype=float)
    rhs = np.atleast_2d(np.asarray(B_rhs, dtype=float))
    r, n = A.shape
    batch = rhs.shape[0]
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
    if max_iter is None:
        max_iter = 50 * (r + n)

    sign = np.where(rhs < 0, -1.0, 1.0)  # (batch, r)
    T = np.zeros((batch, r + 1, n + r + 1))
    T[:, :r, :n] = sign[:, :, None] * A[None, :, :]
    T[:, :r, n : n + r] = np.eye(r)[None]
    T[:, :r, -1] = sign * rhs
    T[:, r, :] = -T[:, :r, :].sum(axis=1)
    T[:, r, n : n + r] = 0.0
    basis = np.tile(np.arange(n, n + r), (batch, 1))

    allowed = np.ones(n + r, dtype=bool)
    st1 = _iterate(T, basis, allowed, tol, max_iter)
    if np.any(st1 == _CAPPED):
        raise SolverError("phase one hit the iteration cap")
    infeas = -T[:, r, -1]
    status = np.where(infeas > feas_tol, INFEASIBLE, OPTIMAL)

    # push zero-level artificials out of the basis where a pivot exists
    for lane in np.flatnonzero(status == OPTIMAL):
        for row in range(r):
            if basis[lane, row] >= n:
                nz = np.flatnonzero(np.abs(T[lane, row, :n]) > tol)
                if nz.size:
                    _pivot(T, np.array([lane]), np.array([row]), np.array([nz[0]]))
                    basis[lane, row] = nz[0]

    live = np.flatnonzero(status == OPTIMAL)
    if live.size and np.any(c != 0):
        sub = T[live]
        sub_basis = basis[live]
        cb = np.where(sub_basis < n, c[np.minimum(sub_basis, n - 1)], 0.0)
        full_c = np.concatenate([c, np.zeros(r + 1)])
        sub[:, r, :] = full_c[None, :] - np.einsum("br,brc->bc", cb, sub[:, :r, :])
        allowed2 = np.zeros(n + r, dtype=bool)
        allowed2[:n] = True
        st2 = _iterate(sub, sub_basis, allowed2, tol, max_iter)
        if np.any(st2 == _CAPPED):
            raise SolverError("phase two hit the iteration cap")
        T[live] = sub
        basis[live] = sub_basis
        status[live] = np.where(st2 == UNBOUNDED, UNBOUNDED, OPTIMAL)

    x = np.zeros((batch, n))
    for row in range(r):
        bcol = basis[:, row]
        m = bcol < n
        x[np.flatnonzero(m), bcol[m]] = T[m, row, -1]
    x = np.maximum(x, 0.0)
    return LPResult(status=status, x=x, objective=x @ c, infeasibility=infeas)


def linprog(A, b, c=None, **kw) -> LPResult:
    """Single problem convenience wrapper around :func:`linprog_batch`."""
    return linprog_batch(A, np.asarray(b, dtype=float)[None, :], c, **kw)
