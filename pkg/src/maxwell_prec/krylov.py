"""
Krylov solvers: right-preconditioned flexible GMRES for the block system and
preconditioned CG / GMRES for the diagonal blocks.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

__all__ = [
    "SolverConfig",
    "SolveStats",
    "InnerResult",
    "IndefiniteMatrixError",
    "fgmres",
    "pcg",
    "gmres_inner",
    "make_smoother",
]

log = logging.getLogger(__name__)


class IndefiniteMatrixError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    outer_tol: float = 1e-8
    outer_maxit: int = 200
    restart: int = 100
    inner_tol: float = 1e-2
    inner_maxit: int = 1000
    inner_solver: str = "cg"  # or "gmres"
    smoother: str = "jacobi"  # or "sgs"
    mass_tol: float = 1e-10

    def __post_init__(self):
        for name in ("outer_tol", "inner_tol", "mass_tol"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.restart < 1 or self.outer_maxit < 0 or self.inner_maxit < 1:
            raise ValueError("restart and iteration limits must be positive")
        if self.inner_solver not in ("cg", "gmres"):
            raise ValueError(f"unknown inner solver {self.inner_solver!r}")
        if self.smoother not in ("jacobi", "sgs"):
            raise ValueError(f"unknown smoother {self.smoother!r}")


@dataclass
class SolveStats:
    """Outcome of one FGMRES solve.

    ``history[k]`` is the relative residual after ``k`` iterations and
    ``divergence[k]`` / ``b_norm[k]`` are ``|D B^k|_inf`` and ``|B^k|_inf``
    of the ``k``-th iterate (empty when the operator has no divergence).
    """

    iterations: int = 0
    final_residual: float = 0.0
    history: list[float] = field(default_factory=lambda: [1.0])
    divergence: list[float] = field(default_factory=list)
    b_norm: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    status: str = "converged"

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def max_relative_divergence(self) -> float:
        """``max_k |D B^k|_inf / max(1, |B^k|_inf)`` over all iterates."""
        if not self.divergence:
            return 0.0
        return max(d / max(1.0, b) for d, b in zip(self.divergence, self.b_norm))


def _as_apply(op) -> Callable[[np.ndarray], np.ndarray]:
    if op is None:
        return lambda v: v.copy()
    if hasattr(op, "apply"):
        return op.apply
    if callable(op) and not sp.issparse(op) and not isinstance(op, np.ndarray):
        return op
    return lambda v: op @ v


def _givens(a: float, b: float) -> tuple[float, float]:
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def fgmres(op, M, b: np.ndarray, x0: np.ndarray | None = None, cfg: SolverConfig | None = None, *,
           tol: float | None = None, maxit: int | None = None, restart: int | None = None,
           divergence: Callable[[np.ndarray], float] | None | bool = True) -> tuple[np.ndarray, SolveStats]:
    """Flexible GMRES with right preconditioning.

    Stops when ``|b - A x| <= tol |b - A x0|``.  ``M`` may change between
    iterations (inner iterative solves); the preconditioned directions are
    stored.  When ``divergence`` is true and ``op`` exposes
    ``divergence_norm`` (or a callable is passed), the divergence of the B
    block of every iterate is recorded.
    """
    cfg = cfg or SolverConfig()
    tol = cfg.outer_tol if tol is None else tol
    maxit = cfg.outer_maxit if maxit is None else maxit
    m = cfg.restart if restart is None else restart
    A = _as_apply(op)
    P = _as_apply(M)
    if divergence is True:
        divergence = getattr(op, "divergence_norm", None)
    elif divergence is False:
        divergence = None
    split_B = getattr(op, "split", None)

    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    stats = SolveStats()

    def record(xk):
        if divergence is not None:
            stats.divergence.append(divergence(xk))
            xB = split_B(xk)[0] if split_B is not None else xk
            stats.b_norm.append(float(np.max(np.abs(xB), initial=0.0)))

    record(x)
    r = b - A(x)
    beta0 = np.linalg.norm(r)
    if beta0 == 0.0:
        stats.final_residual = 0.0
        stats.wall_time = time.perf_counter() - t0
        return x, stats

    it = 0
    status = "maxit"
    while it < maxit:
        beta = np.linalg.norm(r)
        n = len(b)
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        breakdown = False
        while k < m and it < maxit:
            Z[k] = P(V[k])
            w = A(Z[k])
            for i in range(k + 1):
                H[i, k] = np.dot(V[i], w)
                w -= H[i, k] * V[i]
            # one reorthogonalization pass keeps the basis orthogonal to round-off
            for i in range(k + 1):
                c = np.dot(V[i], w)
                H[i, k] += c
                w -= c * V[i]
            H[k + 1, k] = np.linalg.norm(w)
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            hk1 = H[k + 1, k]
            cs[k], sn[k] = _givens(H[k, k], hk1)
            H[k, k] = cs[k] * H[k, k] + sn[k] * hk1
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k += 1
            it += 1
            res = abs(g[k]) / beta0
            stats.history.append(res)
            if divergence is not None:
                y = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k else np.zeros(0)
                record(x + Z[:k].T @ y)
            if hk1 <= 1e-14 * beta0:
                breakdown = True
                break
            if res <= tol:
                break
            V[k] = w / hk1
        y = np.linalg.solve(np.triu(H[:k, :k]), g[:k])
        x = x + Z[:k].T @ y
        r = b - A(x)
        true_res = np.linalg.norm(r) / beta0
        if true_res <= tol:
            status = "converged"
            break
        if breakdown:
            status = "stagnated"
            log.warning("FGMRES breakdown at iteration %d with residual %.3e", it, true_res)
            break
    stats.iterations = it
    stats.final_residual = float(np.linalg.norm(r) / beta0)
    stats.status = status
    stats.wall_time = time.perf_counter() - t0
    return x, stats


# ------------------------------------------------------------- inner solvers
class InnerResult(NamedTuple):
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool


def make_smoother(A, kind: str = "jacobi") -> Callable[[np.ndarray], np.ndarray]:
    """Jacobi or symmetric Gauss-Seidel preconditioner for SPD ``A``."""
    A = sp.csr_matrix(A)
    d = A.diagonal()
    if np.any(d <= 0):
        raise IndefiniteMatrixError("smoother needs a positive diagonal")
    if kind == "jacobi":
        inv = 1.0 / d
        return lambda r: inv * r
    if kind == "sgs":
        lower = sp.tril(A, format="csr")
        upper = sp.triu(A, format="csr")

        def apply(r):
            y = spsolve_triangular(lower, r, lower=True)
            return spsolve_triangular(upper, d * y, lower=False)

        return apply
    raise ValueError(f"unknown smoother {kind!r}")


def pcg(A, b: np.ndarray, M=None, tol: float = 1e-8, maxit: int = 1000, x0: np.ndarray | None = None,
        full_output: bool = False):
    """Preconditioned conjugate gradients to relative residual ``tol``.

    ``M`` is a callable, a smoother name (``"jacobi"``, ``"sgs"``) or None.
    Raises :class:`IndefiniteMatrixError` on non-positive curvature.
    """
    b = np.asarray(b, dtype=float)
    if isinstance(M, str):
        M = make_smoother(A, M)
    prec = M if M is not None else (lambda r: r)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x if x0 is not None else b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        out = InnerResult(np.zeros_like(b), 0, 0.0, True)
        return out if full_output else out.x
    rnorm = np.linalg.norm(r)
    k = 0
    if rnorm > tol * bnorm:
        z = prec(r)
        rz = np.dot(r, z)
        p = z.copy()
        while k < maxit:
            Ap = A @ p
            pAp = np.dot(p, Ap)
            if not pAp > 0:
                raise IndefiniteMatrixError(f"non-positive curvature {pAp:.3e} at CG iteration {k}")
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            k += 1
            rnorm = np.linalg.norm(r)
            if rnorm <= tol * bnorm:
                break
            z = prec(r)
            rz_new = np.dot(r, z)
            if not rz_new > 0:
                raise IndefiniteMatrixError("preconditioner is not positive definite")
            p = z + (rz_new / rz) * p
            rz = rz_new
    res = rnorm / bnorm
    out = InnerResult(x, k, res, res <= tol)
    return out if full_output else out.x


def gmres_inner(A, b: np.ndarray, M=None, tol: float = 1e-2, maxit: int = 1000, restart: int = 50,
                full_output: bool = False):
    """Right-preconditioned restarted GMRES for a single block."""
    if isinstance(M, str):
        M = make_smoother(A, M)
    b = np.asarray(b, dtype=float)
    if not np.any(b):
        out = InnerResult(np.zeros_like(b), 0, 0.0, True)
        return out if full_output else out.x
    x, st = fgmres(A, M, b, None, tol=tol, maxit=maxit, restart=restart, divergence=False)
    out = InnerResult(x, st.iterations, st.final_residual, st.converged)
    return out if full_output else out.x
