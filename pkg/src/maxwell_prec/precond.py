"""
Block preconditioners for the Crank-Nicolson system.

Well-posedness based: ``WD`` (block diagonal), ``WL`` / ``WU`` (block
triangular).  Exact-factorization based: ``XLD = Q L^-1``, ``XDU = U^-1 Q``,
``XLDU = U^-1 Q L^-1`` where ``A = L D U`` with

    L = [I, 0, 0; -(tau/2) K^T, I, 0; 0, -(tau/2) G^T, I]
    D = diag((2/tau) Mb, S_E, S_p)
    U = [I, (tau/2) K, 0; 0, I, (tau/2) G; 0, 0, I]

and ``Q = diag(Q_B, Q_E, Q_p)`` approximates ``D^-1``.  ``Q_B`` is the mass
solve ``((2/tau) Mb)^-1`` to tight tolerance so that the B block of every
Krylov direction stays discretely divergence free; ``Q_E`` and ``Q_p`` are
inner Krylov solves with the sparse Schur complements.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import AssembledForms
from .derham import IncidenceMatrices
from .krylov import IndefiniteMatrixError, SolverConfig, gmres_inner, make_smoother, pcg
from .linalg import BlockVector, SystemOperator, add_scaled, as_csr, build_system, spgemm, transpose

__all__ = [
    "KINDS",
    "SchurComplements",
    "InnerSolveError",
    "Preconditioner",
    "build_schur",
    "verify_ldu",
    "ldu_factors_dense",
]

log = logging.getLogger(__name__)

KINDS = ("WD", "WL", "WU", "XLD", "XDU", "XLDU")
_ALIASES = {k.replace("_", "").upper(): k for k in KINDS}


class InnerSolveError(RuntimeError):
    def __init__(self, block: str, msg: str):
        super().__init__(f"inner solve on block {block}: {msg}")
        self.block = block


@dataclass(frozen=True)
class SchurComplements:
    """``S_E = (tau/2) K^T Mb K + (2/tau) Me + Z`` and ``S_p = (tau/2) G^T Me G + (2/tau) Mp``."""

    S_E: sp.csr_matrix
    S_p: sp.csr_matrix


def build_schur(forms: AssembledForms, inc: IncidenceMatrices, tau: float) -> SchurComplements:
    if not tau > 0:
        raise ValueError("time step must be positive")
    K, G = inc.K.astype(float), inc.G.astype(float)
    KtMbK = spgemm(transpose(K), spgemm(forms.Mb, K))
    GtMeG = spgemm(transpose(G), spgemm(forms.Me, G))
    S_E = add_scaled(add_scaled(KtMbK, tau / 2, forms.Me, 2 / tau), 1.0, forms.Z, 1.0)
    S_p = add_scaled(GtMeG, tau / 2, forms.Mp, 2 / tau)
    # exact symmetry; the triple products are symmetric only up to round-off
    return SchurComplements(as_csr(0.5 * (S_E + S_E.T)), as_csr(0.5 * (S_p + S_p.T)))


def _kind(kind: str) -> str:
    try:
        return _ALIASES[kind.replace("_", "").upper()]
    except KeyError:
        raise ValueError(f"unknown preconditioner kind {kind!r}; expected one of {KINDS}") from None


class _BlockSolve:
    """Approximate inverse of one SPD diagonal block."""

    def __init__(self, name: str, A: sp.csr_matrix, tol: float, maxit: int, solver: str, smoother: str):
        self.name, self.A, self.tol, self.maxit, self.solver = name, A, tol, maxit, solver
        try:
            self.M = make_smoother(A, smoother) if A.shape[0] else None
        except IndefiniteMatrixError as exc:
            raise InnerSolveError(name, str(exc)) from exc
        self.calls = 0
        self.iterations = 0
        self.failures = 0

    def __call__(self, r: np.ndarray) -> np.ndarray:
        if self.A.shape[0] == 0:
            return r.copy()
        self.calls += 1
        try:
            if self.solver == "cg":
                res = pcg(self.A, r, self.M, tol=self.tol, maxit=self.maxit, full_output=True)
            else:
                res = gmres_inner(self.A, r, self.M, tol=self.tol, maxit=self.maxit, full_output=True)
        except IndefiniteMatrixError as exc:
            raise InnerSolveError(self.name, str(exc)) from exc
        if not np.all(np.isfinite(res.x)):
            raise InnerSolveError(self.name, "non-finite result")
        self.iterations += res.iterations
        if not res.converged:
            self.failures += 1
            log.warning("block %s: inner solve stopped at residual %.2e", self.name, res.residual)
        return res.x


class Preconditioner:
    """One of the six block preconditioners for a :class:`SystemOperator`.

    Parameters
    ----------
    kind : {"WD", "WL", "WU", "XLD", "XDU", "XLDU"}
    system : SystemOperator
    cfg : SolverConfig, optional
        ``inner_tol`` / ``inner_solver`` / ``smoother`` control ``Q_E`` and
        ``Q_p``; ``mass_tol`` controls ``Q_B``.
    schur : SchurComplements, optional
        Reused when given, otherwise built from the system.
    """

    def __init__(self, kind: str, system: SystemOperator, cfg: SolverConfig | None = None,
                 schur: SchurComplements | None = None):
        self.kind = _kind(kind)
        self.system = system
        self.cfg = cfg = cfg or SolverConfig()
        self.tau = system.tau
        self.schur = schur or build_schur(system.forms, system.inc, system.tau)
        K, G = system.inc.K.astype(float), system.inc.G.astype(float)
        self.K, self.G = as_csr(K), as_csr(G)
        self.Kt, self.Gt = transpose(K), transpose(G)
        mass = as_csr((2.0 / self.tau) * system.forms.Mb)
        self.Q_B = _BlockSolve("B", mass, cfg.mass_tol, max(cfg.inner_maxit, 10 * mass.shape[0] + 10), "cg", "jacobi")
        self.Q_E = _BlockSolve("E", self.schur.S_E, cfg.inner_tol, cfg.inner_maxit, cfg.inner_solver, cfg.smoother)
        self.Q_p = _BlockSolve("p", self.schur.S_p, cfg.inner_tol, cfg.inner_maxit, cfg.inner_solver, cfg.smoother)
        self._apply = {
            "WD": self.apply_W_D,
            "WL": self.apply_W_L,
            "WU": self.apply_W_U,
            "XLD": self.apply_X_LD,
            "XDU": self.apply_X_DU,
            "XLDU": self.apply_X_LDU,
        }[self.kind]

    # ------------------------------------------------------------ plumbing
    def _split(self, v):
        if isinstance(v, BlockVector):
            return v.B, v.E, v.p
        return self.system.split(np.asarray(v, dtype=float))

    @staticmethod
    def _pack(like, B, E, p):
        if isinstance(like, BlockVector):
            return BlockVector(B, E, p)
        return np.concatenate([B, E, p])

    def apply(self, v):
        return self._apply(v)

    __call__ = apply

    def inner_counts(self) -> Counter:
        c = Counter()
        for blk in (self.Q_B, self.Q_E, self.Q_p):
            c[f"{blk.name}_calls"] = blk.calls
            c[f"{blk.name}_iterations"] = blk.iterations
            c[f"{blk.name}_failures"] = blk.failures
        return c

    # ------------------------------------------------- well-posedness based
    def apply_W_D(self, v):
        vB, vE, vp = self._split(v)
        return self._pack(v, self.Q_B(vB), self.Q_E(vE), self.Q_p(vp))

    def apply_W_L(self, v):
        """Forward substitution with the lower factor ``[Q_B^-1; -K^T Mb, Q_E^-1; -G^T Me, Q_p^-1]``."""
        vB, vE, vp = self._split(v)
        yB = self.Q_B(vB)
        yE = self.Q_E(vE + self.system.KtMb @ yB)
        yp = self.Q_p(vp + self.system.GtMe @ yE)
        return self._pack(v, yB, yE, yp)

    def apply_W_U(self, v):
        """Backward substitution with the upper factor ``[Q_B^-1, Mb K; Q_E^-1, Me G; Q_p^-1]``."""
        vB, vE, vp = self._split(v)
        yp = self.Q_p(vp)
        yE = self.Q_E(vE - self.system.MeG @ yp)
        # ((2/tau) Mb)^-1 Mb K = (tau/2) K, applied without a second mass solve
        yB = self.Q_B(vB) - (self.tau / 2) * (self.K @ yE)
        return self._pack(v, yB, yE, yp)

    # --------------------------------------------------- factorization based
    def apply_L(self, v):
        vB, vE, vp = self._split(v)
        h = self.tau / 2
        return self._pack(v, vB.copy(), vE - h * (self.Kt @ vB), vp - h * (self.Gt @ vE))

    def apply_U(self, v):
        vB, vE, vp = self._split(v)
        h = self.tau / 2
        return self._pack(v, vB + h * (self.K @ vE), vE + h * (self.G @ vp), vp.copy())

    def apply_L_inv(self, v):
        """Closed-form inverse; the (3,1) block ``(tau/2)^2 G^T K^T`` vanishes since ``K G = 0``."""
        vB, vE, vp = self._split(v)
        h = self.tau / 2
        return self._pack(v, vB.copy(), vE + h * (self.Kt @ vB), vp + h * (self.Gt @ vE))

    def apply_U_inv(self, v):
        vB, vE, vp = self._split(v)
        h = self.tau / 2
        return self._pack(v, vB - h * (self.K @ vE), vE - h * (self.G @ vp), vp.copy())

    def apply_Q(self, v):
        return self.apply_W_D(v)

    def apply_X_LD(self, v):
        return self.apply_Q(self.apply_L_inv(v))

    def apply_X_DU(self, v):
        return self.apply_U_inv(self.apply_Q(v))

    def apply_X_LDU(self, v):
        return self.apply_U_inv(self.apply_Q(self.apply_L_inv(v)))


# ------------------------------------------------------------ dense checks
def ldu_factors_dense(forms: AssembledForms, inc: IncidenceMatrices, tau: float):
    """Dense ``(A, L, D, U)`` for small meshes."""
    system = build_system(tau, forms, inc)
    schur = build_schur(forms, inc, tau)
    nb, ne, npp = system.sizes
    K, G = inc.K.toarray().astype(float), inc.G.toarray().astype(float)
    h = tau / 2
    Ib, Ie, Ip = np.eye(nb), np.eye(ne), np.eye(npp)
    zBE, zBp, zEp = np.zeros((nb, ne)), np.zeros((nb, npp)), np.zeros((ne, npp))
    L = np.block([[Ib, zBE, zBp], [-h * K.T, Ie, zEp], [zBp.T, -h * G.T, Ip]])
    U = np.block([[Ib, h * K, zBp], [zBE.T, Ie, h * G], [zBp.T, zEp.T, Ip]])
    D = np.block(
        [
            [(2 / tau) * forms.Mb.toarray(), zBE, zBp],
            [zBE.T, schur.S_E.toarray(), zEp],
            [zBp.T, zEp.T, schur.S_p.toarray()],
        ]
    )
    return system.to_dense(), L, D, U


def verify_ldu(forms: AssembledForms, inc: IncidenceMatrices, tau: float) -> float:
    """Max elementwise ``|A - L D U|`` by dense reconstruction."""
    A, L, D, U = ldu_factors_dense(forms, inc, tau)
    return float(np.max(np.abs(A - L @ D @ U), initial=0.0))
