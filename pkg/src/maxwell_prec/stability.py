"""
Dense stability diagnostics for small meshes: inf-sup constant of the
auxiliary operator in the weighted norm, field-of-value bounds and spectra
of preconditioned operators.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .krylov import SolverConfig
from .linalg import SystemOperator, build_system
from .precond import Preconditioner, build_schur

__all__ = [
    "weighted_norm_matrix",
    "infsup_constant",
    "exact_config",
    "preconditioned_dense",
    "field_of_value_min",
]


def weighted_norm_matrix(system: SystemOperator) -> np.ndarray:
    """Block diagonal ``N = diag((2/tau) Mb + D^T M0 D, S_E, S_p)``."""
    f, tau = system.forms, system.tau
    schur = build_schur(f, system.inc, tau)
    NB = (2.0 / tau) * f.Mb + system.DtM0D
    return sla.block_diag(NB.toarray(), schur.S_E.toarray(), schur.S_p.toarray())


def _inv_sqrt(N: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(N)
    if w.min() <= 0:
        raise np.linalg.LinAlgError("weight matrix is not positive definite")
    return (V / np.sqrt(w)) @ V.T


def infsup_constant(system: SystemOperator) -> float:
    """Smallest singular value of ``N^-1/2 A N^-1/2`` (dense).

    Pass an auxiliary system (``aux=True``) to test the well-posedness bound.
    """
    R = _inv_sqrt(weighted_norm_matrix(system))
    return float(np.linalg.svd(R @ system.to_dense() @ R, compute_uv=False).min())


def exact_config(tol: float = 1e-12) -> SolverConfig:
    """Inner solves tight enough to act as exact block inverses."""
    return SolverConfig(inner_tol=tol, inner_maxit=100000, mass_tol=tol)


def preconditioned_dense(precond: Preconditioner, system: SystemOperator | None = None) -> np.ndarray:
    """Dense ``M A`` built column by column."""
    system = system or precond.system
    A = system.to_dense()
    n = A.shape[0]
    MA = np.empty_like(A)
    for j in range(n):
        MA[:, j] = precond(A[:, j])
    return MA


def field_of_value_min(system: SystemOperator, kind: str = "WL", samples: int = 1000, seed: int = 0,
                       cfg: SolverConfig | None = None) -> float:
    """``min_x <M A x, x>_W / <x, x>_W`` over random ``x`` with ``W = diag(A_B, S_E, S_p)``.

    ``A_B`` is the (1,1) block of ``system``; the inverse of the diagonal
    blocks of the preconditioner defines the inner product.
    """
    tau = system.tau
    schur = build_schur(system.forms, system.inc, tau)
    W = sla.block_diag(system.A_BB.toarray(), schur.S_E.toarray(), schur.S_p.toarray())
    P = Preconditioner(kind, system, cfg or exact_config(), schur)
    MA = preconditioned_dense(P, system)
    WMA = W @ MA
    X = np.random.default_rng(seed).standard_normal((W.shape[0], samples))
    num = np.einsum("is,is->s", X, WMA @ X)
    den = np.einsum("is,is->s", X, W @ X)
    return float(np.min(num / den))
