"""Dense strictly convex QP safety filter.

Solves  min ||u - u_nom||^2  s.t.  A u >= b,  lb <= u <= ub
with a primal active-set method.  The identity Hessian makes each
working-set subproblem an orthogonal projection, solved by least
squares on the active rows so redundant active rows are tolerated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

__all__ = ["QuadraticProgram", "QPSolution", "FilterInfo", "solve", "filter_control"]

_RANK_TOL = 1e-12


@dataclass(frozen=True)
class QuadraticProgram:
    """min u'u - 2 u_nom'u  s.t.  A u >= b,  lb <= u <= ub."""

    u_nom: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        u_nom = np.atleast_1d(np.asarray(self.u_nom, dtype=float))
        m = u_nom.size
        A = np.asarray(self.A, dtype=float).reshape(-1, m)
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).reshape(A.shape[0])
        lb = np.atleast_1d(np.asarray(self.lb, dtype=float)).reshape(m)
        ub = np.atleast_1d(np.asarray(self.ub, dtype=float)).reshape(m)
        for name, arr in (("u_nom", u_nom), ("A", A), ("b", b), ("lb", lb), ("ub", ub)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {name}")
        if np.any(lb > ub):
            raise ValueError("lb must be <= ub componentwise")
        object.__setattr__(self, "u_nom", u_nom)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)

    @property
    def dim(self) -> int:
        return self.u_nom.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class QPSolution:
    u_star: np.ndarray
    active_set: list
    kkt_residual: float
    status: str  # optimal | infeasible | max_iterations


def _stacked(qp: QuadraticProgram):
    """All inequalities as rows a.u >= beta: user rows, then lb, then -ub."""
    m = qp.dim
    eye = np.eye(m)
    A_all = np.vstack([qp.A, eye, -eye])
    b_all = np.concatenate([qp.b, qp.lb, -qp.ub])
    return A_all, b_all


def _kkt_residual(qp: QuadraticProgram, u, lam_all, A_all, b_all, tol) -> float:
    """Max violation over stationarity, primal/dual feasibility, complementarity."""
    stat = np.max(np.abs(u - qp.u_nom - A_all.T @ lam_all)) if lam_all.size else np.max(np.abs(u - qp.u_nom))
    slack = A_all @ u - b_all
    primal = max(0.0, float(-np.min(slack))) if slack.size else 0.0
    dual = max(0.0, float(-np.min(lam_all))) if lam_all.size else 0.0
    comp = float(np.max(np.abs(lam_all * slack))) if lam_all.size else 0.0
    return max(float(stat), primal, dual, comp)


def _feasible_start(qp: QuadraticProgram, A_all, b_all, tol):
    """Feasible initial point, or None if the constraints are inconsistent.

    The clipped nominal input is used when it already satisfies the rows.
    Otherwise cheap alternating projections (most violated half-space,
    then the box) are tried; a phase-one LP minimizing the largest row
    violation inside the box is the fallback.
    """
    u = np.clip(qp.u_nom, qp.lb, qp.ub)
    if not b_all.size or float(np.max(b_all - A_all @ u)) <= tol:
        return u
    if qp.n_rows:
        v = u.copy()
        for _ in range(100):
            viol = qp.b - qp.A @ v
            worst = int(np.argmax(viol))
            if viol[worst] <= 0.0:
                if float(np.max(b_all - A_all @ v)) <= tol:
                    return v
                break
            a = qp.A[worst]
            nn = float(a @ a)
            if nn <= 0.0:
                break
            v = np.clip(v + a * (1.5 * viol[worst] / nn), qp.lb, qp.ub)
        else:
            if float(np.max(b_all - A_all @ v)) <= tol:
                return v
    m = qp.dim
    c = np.concatenate([np.zeros(m), [1.0]])
    A_ub = np.hstack([-qp.A, -np.ones((qp.n_rows, 1))])
    res = linprog(
        c, A_ub=A_ub, b_ub=-qp.b,
        bounds=[(lo, hi) for lo, hi in zip(qp.lb, qp.ub)] + [(0.0, None)],
        method="highs",
    )
    if not res.success or float(res.x[-1]) > tol:
        return None
    return np.clip(res.x[:m], qp.lb, qp.ub)


def solve(qp: QuadraticProgram, max_iter: int | None = None) -> QPSolution:
    """Primal active-set solve of the strictly convex QP.

    From a feasible point, each iteration projects the gradient onto the
    null space of the working set (identity Hessian, so the step is an
    orthogonal projection computed by least squares on the active rows), a
    ratio test keeps all rows satisfied, blocking rows are added, and
    rows with negative multipliers are dropped.  Ties break to the lowest
    index, so identical inputs take an identical pivot path and the
    output is bitwise reproducible.
    """
    m = qp.dim
    A_all, b_all = _stacked(qp)
    n_all = A_all.shape[0]
    if max_iter is None:
        max_iter = 50 * (m + n_all)
    scale = 1.0 + float(np.max(np.abs(b_all))) if n_all else 1.0
    tol = 1e-9 * scale

    u = _feasible_start(qp, A_all, b_all, tol)
    if u is None:
        return QPSolution(u_star=np.clip(qp.u_nom, qp.lb, qp.ub), active_set=[],
                          kkt_residual=float("inf"), status="infeasible")

    resid = A_all @ u - b_all if n_all else np.zeros(0)
    work: list[int] = []
    lam = np.zeros(0)
    status = "max_iterations"
    for _ in range(max_iter):
        g = u - qp.u_nom
        if work:
            # lam solves min ||Aw' lam - g||: Aw' lam is the row-space
            # projection of g, so p lies in the null space of Aw
            Aw = A_all[work]
            lam, *_ = np.linalg.lstsq(Aw.T, g, rcond=_RANK_TOL)
            p = Aw.T @ lam - g
        else:
            lam = np.zeros(0)
            p = -g

        step_tol = 1e-9 * (1.0 + float(np.max(np.abs(g))))
        if float(np.max(np.abs(p))) <= step_tol:
            if lam.size and float(np.min(lam)) < -tol:
                work.pop(int(np.argmin(lam)))
                continue
            status = "optimal"
            break

        # ratio test against rows outside the working set
        alpha = 1.0
        block = -1
        if n_all:
            Ap = A_all @ p
            in_work = np.zeros(n_all, dtype=bool)
            in_work[work] = True
            for i in range(n_all):
                if in_work[i] or Ap[i] >= -1e-14 * scale:
                    continue
                a_i = max(resid[i], 0.0) / (-Ap[i])
                if a_i < alpha - 1e-15:
                    alpha = a_i
                    block = i
        u = u + alpha * p
        resid = A_all @ u - b_all if n_all else resid
        if block >= 0:
            work.append(block)

    lam_all = np.zeros(n_all)
    if status == "optimal":
        lam_full = np.maximum(lam, 0.0) if lam.size else lam
        for i, j in enumerate(work):
            lam_all[j] = lam_full[i]
    kkt = _kkt_residual(qp, u, lam_all, A_all, b_all, tol) if status == "optimal" else float("inf")
    active = sorted(j for j in work if j < qp.n_rows)
    return QPSolution(u_star=u, active_set=active, kkt_residual=kkt, status=status)


@dataclass(frozen=True)
class FilterInfo:
    status: str  # optimal | relaxed
    slack: float = 0.0
    qp_status: str = "optimal"


def filter_control(
    u_nom,
    rows: Sequence[tuple],
    lb,
    ub,
    policy: str = "relax",
    info_out: dict | None = None,
) -> np.ndarray:
    """Minimally modify u_nom to satisfy the stacked half-spaces and box.

    ``rows`` is a sequence of (a, b) with a.u >= b.  On infeasibility,
    policy "fail" raises; policy "relax" first minimizes a single shared
    slack on the barrier rows (never on the box) via an LP, then re-solves
    the QP with the relaxed right-hand side and reports the slack.
    """
    u_nom = np.atleast_1d(np.asarray(u_nom, dtype=float))
    m = u_nom.size
    if rows:
        A = np.vstack([np.atleast_1d(np.asarray(a, dtype=float)).reshape(1, m) for a, _ in rows])
        b = np.asarray([float(bi) for _, bi in rows])
    else:
        A = np.zeros((0, m))
        b = np.zeros(0)
    qp = QuadraticProgram(u_nom=u_nom, A=A, b=b, lb=lb, ub=ub)
    sol = solve(qp)
    if sol.status == "optimal":
        if info_out is not None:
            info_out["info"] = FilterInfo(status="optimal")
        return sol.u_star

    if policy == "fail":
        raise RuntimeError(f"safety QP not solvable (status={sol.status})")

    # lexicographic relax: min s  s.t.  A u + s 1 >= b, box, s >= 0
    c = np.concatenate([np.zeros(m), [1.0]])
    A_ub = np.hstack([-A, -np.ones((A.shape[0], 1))])
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=-b,
        bounds=[(lo, hi) for lo, hi in zip(qp.lb, qp.ub)] + [(0.0, None)],
        method="highs",
    )
    if not res.success:
        raise RuntimeError("relaxation LP failed; box bounds likely empty")
    s = float(res.x[-1]) * (1.0 + 1e-9) + 1e-12
    qp_rel = QuadraticProgram(u_nom=u_nom, A=A, b=b - s, lb=qp.lb, ub=qp.ub)
    sol_rel = solve(qp_rel)
    if sol_rel.status != "optimal":
        raise RuntimeError("relaxed QP still not solvable")
    if info_out is not None:
        info_out["info"] = FilterInfo(status="relaxed", slack=s, qp_status=sol.status)
    return sol_rel.u_star
