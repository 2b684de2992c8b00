"""Non-restarted GMRES with modified Gram-Schmidt.

The interface system is already block-diagonally preconditioned, so no
preconditioner is applied here. The basis is kept for the full run (memory
O(iters x n)); Givens rotations maintain the residual estimate per step, and a
second orthogonalization pass runs whenever cancellation is detected.
"""

import time
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np


class GmresBreakdownError(RuntimeError):
    """A non-finite value appeared during the iteration."""


@dataclass
class GmresReport:
    iterations: int
    residuals: List[float]
    achieved: float
    tolerance: float
    converged: bool
    seconds: float
    basis: np.ndarray = field(repr=False, default=None)


def gmres(apply_op: Callable, rhs, tol=1e-10, max_iter=None, keep_basis=False):
    """Solve S x = rhs to a relative residual `tol`.

    apply_op maps a vector to S @ vector. Lucky breakdown of the Hessenberg
    recurrence counts as convergence; hitting max_iter is flagged in the
    report, never silent.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    if max_iter is None:
        max_iter = n
    max_iter = min(max_iter, n)
    t0 = time.perf_counter()
    b_norm = np.linalg.norm(rhs)
    if b_norm == 0.0:
        report = GmresReport(0, [], 0.0, tol, True, time.perf_counter() - t0)
        return np.zeros(n), report

    Q = np.zeros((n, max_iter + 1))
    H = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    Q[:, 0] = rhs / b_norm
    g[0] = b_norm
    residuals = []
    k_done = 0
    converged = False

    for k in range(max_iter):
        # copy: the operator may hand back its input, which MGS mutates
        w = np.array(apply_op(Q[:, k]), dtype=float, copy=True)
        if not np.all(np.isfinite(w)):
            raise GmresBreakdownError(f"non-finite operator output at iteration {k}")
        norm_before = np.linalg.norm(w)
        for i in range(k + 1):
            H[i, k] = Q[:, i] @ w
            w -= H[i, k] * Q[:, i]
        # re-orthogonalize once when the projection removed most of w
        if np.linalg.norm(w) < 0.5 * norm_before:
            for i in range(k + 1):
                corr = Q[:, i] @ w
                H[i, k] += corr
                w -= corr * Q[:, i]
        H[k + 1, k] = np.linalg.norm(w)
        lucky = H[k + 1, k] <= 1e-14 * max(1.0, norm_before)
        if not lucky:
            Q[:, k + 1] = w / H[k + 1, k]

        for i in range(k):
            temp = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
            H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
            H[i, k] = temp
        denom = np.hypot(H[k, k], H[k + 1, k])
        cs[k] = H[k, k] / denom
        sn[k] = H[k + 1, k] / denom
        H[k, k] = denom
        H[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]

        rel = abs(g[k + 1]) / b_norm
        residuals.append(float(rel))
        k_done = k + 1
        if rel <= tol or lucky:
            converged = True
            break

    y = np.linalg.solve(H[:k_done, :k_done], g[:k_done])
    x = Q[:, :k_done] @ y
    report = GmresReport(
        iterations=k_done,
        residuals=residuals,
        achieved=residuals[-1] if residuals else 0.0,
        tolerance=tol,
        converged=converged,
        seconds=time.perf_counter() - t0,
        basis=Q[:, : k_done + 1] if keep_basis else None,
    )
    return x, report
