"""Slow, independent verification paths.

Nothing here imports :mod:`safekernel.geometry`. Hull membership is a linear
feasibility problem solved by the in-repo simplex, kernel membership is
checked subset by subset, and the d=1 kernel comes from order statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .simplex import INFEASIBLE, SolverError, linprog_batch

TOL_LP = 1e-8


@dataclass
class MembershipCertificate:
    """Convex weights over the generating points that reproduce ``point``."""

    lambdas: np.ndarray
    generators: np.ndarray
    point: np.ndarray

    @property
    def residual(self) -> float:
        return float(np.max(np.abs(self.lambdas @ self.generators - self.point)))

    def is_sound(self, tol: float = TOL_LP) -> bool:
        return (
            bool(np.all(self.lambdas >= -tol))
            and abs(float(self.lambdas.sum()) - 1.0) <= tol
            and self.residual <= tol
        )


def _hull_system(points: np.ndarray):
    # rows: coordinates then the sum-to-one row
    return np.vstack([points.T, np.ones(len(points))])


def _membership_batch(points, ys, tol):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    ys = np.asarray(ys, dtype=float)
    if ys.ndim == 1:
        ys = ys[:, None] if pts.shape[1] == 1 else ys[None, :]
    if len(pts) == 0:
        raise ValueError("hull membership needs at least one generating point")
    if ys.shape[1] != pts.shape[1]:
        raise ValueError(f"dimension mismatch: {ys.shape[1]} vs {pts.shape[1]}")
    A = _hull_system(pts)
    rhs = np.hstack([ys, np.ones((len(ys), 1))])
    return pts, ys, linprog_batch(A, rhs, feas_tol=tol)


def hull_membership(points, y, tol: float = TOL_LP) -> MembershipCertificate | None:
    """Certificate that ``y`` lies in Conv(points) within ``tol``, else None."""
    pts, ys, res = _membership_batch(points, np.atleast_1d(y), tol)
    if res.status[0] == INFEASIBLE:
        return None
    lam = res.x[0]
    s = lam.sum()
    if s > 0:
        lam = lam / s
    return MembershipCertificate(lambdas=lam, generators=pts, point=ys[0])


def hull_membership_many(points, ys, tol: float = TOL_LP) -> np.ndarray:
    """Boolean membership for each row of ``ys``."""
    _, _, res = _membership_batch(points, ys, tol)
    return res.status != INFEASIBLE


def _subsets(points: np.ndarray, n: int):
    m = len(points)
    if n < 0 or n > m:
        raise ValueError(f"cannot remove {n} of {m} points")
    for removed in combinations(range(m), n):
        keep = [i for i in range(m) if i not in removed]
        yield points[keep]


def kernel_membership_bruteforce(points, n: int, y, tol: float = TOL_LP) -> bool:
    """Is ``y`` inside the hull of every (m - n)-point sub-multiset?"""
    return bool(kernel_membership_grid(points, n, np.atleast_2d(y), tol)[0])


def kernel_membership_grid(points, n: int, ys, tol: float = TOL_LP) -> np.ndarray:
    """Vectorised :func:`kernel_membership_bruteforce` over rows of ``ys``.

    A point outside the per-coordinate order-statistic box is outside some
    subset's bounding box, so it is rejected without an LP.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if ys.shape[1] != pts.shape[1]:
        ys = ys.T
    inside = np.ones(len(ys), dtype=bool)
    if len(pts) >= 2 * n + 1:
        for p in range(pts.shape[1]):
            lo, hi = sorted_trim_interval(pts[:, p], n)
            inside &= (ys[:, p] >= lo - tol) & (ys[:, p] <= hi + tol)
    for subset in _subsets(pts, n):
        live = np.flatnonzero(inside)
        if live.size == 0:
            break
        inside[live] = hull_membership_many(subset, ys[live], tol)
    return inside


def sorted_trim_interval(values, n: int) -> tuple[float, float]:
    """``[(n+1)-th smallest, (n+1)-th largest]`` of ``values``."""
    v = np.sort(np.asarray(values, dtype=float).reshape(-1))
    m = len(v)
    if m < 2 * n + 1:
        raise ValueError(f"trim interval needs m >= 2n+1 (m={m}, n={n})")
    return float(v[n]), float(v[m - n - 1])


def _diameter(points) -> float:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(pts) < 2:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff * diff, axis=2))))


def contraction_ratios(diameters, window: int, floor: float = 0.0) -> list[float]:
    """``D[k+W] / D[k]`` for k = 0, W, 2W, ... while ``D[k] > floor``."""
    out = []
    for k in range(0, len(diameters) - window, window):
        if diameters[k] <= floor:
            break
        out.append(float(diameters[k + window] / diameters[k]))
    return out


@dataclass
class AuditReport:
    validity_failures: list[int] = field(default_factory=list)
    nesting_failures: list[int] = field(default_factory=list)
    agreement: str = "not-applicable"
    gamma: dict[int, float] | None = None
    contraction: list[float] = field(default_factory=list)
    diameters: list[float] = field(default_factory=list)
    solver_errors: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            not self.validity_failures
            and not self.nesting_failures
            and not self.solver_errors
            and self.agreement != "fail"
        )

    def to_dict(self) -> dict:
        def flag(fails):
            return "pass" if not fails else {"fail": fails}

        return {
            "validity": flag(self.validity_failures),
            "nesting": flag(self.nesting_failures),
            "agreement": self.agreement,
            "gamma": None if self.gamma is None else {str(k): v for k, v in self.gamma.items()},
            "contraction": self.contraction,
            "diameters": self.diameters,
            "solver_errors": self.solver_errors,
            "passed": self.passed,
        }


def audit_states(
    rounds: list[dict[int, np.ndarray]],
    benign: list[int],
    epsilon: float,
    tol: float = 1e-6,
    window: int = 10,
) -> AuditReport:
    """Validity, nesting, agreement and contraction checks over a state history.

    ``rounds[k]`` maps node id to its state at round k; only ``benign`` nodes
    are inspected. Agreement is judged on the last round: converged runs must
    yield a convex certificate over the benign initial states, runs that never
    got below ``epsilon`` are reported as not applicable. Contraction is the
    ratio of diameters ``window`` rounds apart, with the window shortened to
    the run length for very short runs.
    """
    report = AuditReport()
    omega0 = np.array([rounds[0][i] for i in benign])
    prev = omega0
    for k, states in enumerate(rounds):
        cur = np.array([states[i] for i in benign])
        report.diameters.append(_diameter(cur))
        if k == 0:
            continue
        try:
            if not hull_membership_many(omega0, cur, tol).all():
                report.validity_failures.append(k)
            if not hull_membership_many(prev, cur, tol).all():
                report.nesting_failures.append(k)
        except SolverError as exc:
            report.solver_errors.append(f"round {k}: {exc}")
        prev = cur
    # runs shorter than one window are measured over their whole length
    w = max(1, min(window, len(report.diameters) - 1))
    report.contraction = contraction_ratios(report.diameters, w, floor=epsilon)
    if report.diameters[-1] < epsilon:
        final = np.array([rounds[-1][i] for i in benign]).mean(axis=0)
        try:
            cert = hull_membership(omega0, final, tol)
        except SolverError as exc:
            report.solver_errors.append(f"certificate: {exc}")
            cert = None
        if cert is not None and cert.is_sound(tol):
            report.agreement = "pass"
            report.gamma = {i: float(w) for i, w in zip(benign, cert.lambdas)}
        else:
            report.agreement = "fail"
    return report


def audit_trajectory(traj, scenario, tol: float = 1e-6, window: int = 10) -> AuditReport:
    """:func:`audit_states` over a simulated trajectory and its scenario."""
    return audit_states(traj.state_history(), scenario.benign, scenario.epsilon, tol, window)
