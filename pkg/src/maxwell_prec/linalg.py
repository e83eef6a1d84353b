"""
Sparse kernels and the 3x3 block operator of one Crank-Nicolson step.

Sparse storage is :class:`scipy.sparse.csr_matrix`; the helpers below add
shape checking, an integer mode for incidence products and compression of
explicit zeros.  Block vectors are ordered ``(B, E, p)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import AssembledForms, read_matrix_market, write_matrix_market
from .derham import IncidenceMatrices

__all__ = [
    "ShapeError",
    "as_csr",
    "spmv",
    "transpose",
    "spgemm",
    "add_scaled",
    "BlockVector",
    "SystemOperator",
    "build_system",
    "write_matrix_market",
    "read_matrix_market",
]

SparseMatrix = sp.csr_matrix


class ShapeError(ValueError):
    pass


def as_csr(A, dtype=None) -> sp.csr_matrix:
    """Canonical CSR: sorted, duplicate-free column indices, no stored zeros."""
    A = sp.csr_matrix(A, dtype=dtype)
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def spmv(A, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ShapeError(f"cannot multiply {A.shape} matrix by vector of length {x.shape[0]}")
    return A @ x


def transpose(A) -> sp.csr_matrix:
    return as_csr(A.T)


def spgemm(A, B, integer: bool = False) -> sp.csr_matrix:
    """Sparse product with compression; ``integer=True`` keeps exact int64 arithmetic."""
    if A.shape[1] != B.shape[0]:
        raise ShapeError(f"inner dimensions differ: {A.shape} @ {B.shape}")
    if integer:
        A, B = sp.csr_matrix(A, dtype=np.int64), sp.csr_matrix(B, dtype=np.int64)
    return as_csr(A @ B)


def add_scaled(A, alpha: float, B, beta: float) -> sp.csr_matrix:
    if A.shape != B.shape:
        raise ShapeError(f"shapes differ: {A.shape} vs {B.shape}")
    return as_csr(alpha * A + beta * B)


@dataclass
class BlockVector:
    """Coefficient vector split into the ``B`` (faces), ``E`` (edges), ``p`` (vertices) blocks."""

    B: np.ndarray
    E: np.ndarray
    p: np.ndarray

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.B), len(self.E), len(self.p)

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.B, self.E, self.p])

    @classmethod
    def from_flat(cls, x: np.ndarray, sizes) -> "BlockVector":
        nb, ne, npp = sizes
        if len(x) != nb + ne + npp:
            raise ShapeError(f"vector of length {len(x)} does not match block sizes {tuple(sizes)}")
        return cls(x[:nb].copy(), x[nb : nb + ne].copy(), x[nb + ne :].copy())

    @classmethod
    def zeros(cls, sizes) -> "BlockVector":
        return cls(*(np.zeros(s) for s in sizes))

    def copy(self) -> "BlockVector":
        return BlockVector(self.B.copy(), self.E.copy(), self.p.copy())


@dataclass(eq=False)
class SystemOperator:
    """Block operator of one time step (``aux=True`` adds ``D^T M0 D`` to the B block).

    ::

        [ (2/tau) Mb        Mb K               0          ]
        [ -K^T Mb     (2/tau) Me + Z          Me G        ]
        [    0            -G^T Me        (2/tau) Mp       ]
    """

    tau: float
    forms: AssembledForms
    inc: IncidenceMatrices
    aux: bool = False
    MbK: sp.csr_matrix = field(init=False)
    MeG: sp.csr_matrix = field(init=False)
    KtMb: sp.csr_matrix = field(init=False)
    GtMe: sp.csr_matrix = field(init=False)
    A_BB: sp.csr_matrix = field(init=False)
    A_EE: sp.csr_matrix = field(init=False)
    A_pp: sp.csr_matrix = field(init=False)
    DtM0D: sp.csr_matrix = field(init=False)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("time step must be positive")
        f, inc = self.forms, self.inc
        K, G, D = (M.astype(float) for M in (inc.K, inc.G, inc.D))
        s = 2.0 / self.tau
        self.MbK = spgemm(f.Mb, K)
        self.MeG = spgemm(f.Me, G)
        self.KtMb = transpose(self.MbK)
        self.GtMe = transpose(self.MeG)
        self.DtM0D = as_csr(D.T @ f.M0 @ D)
        self.A_BB = add_scaled(f.Mb, s, self.DtM0D, 1.0 if self.aux else 0.0)
        self.A_EE = add_scaled(f.Me, s, f.Z, 1.0)
        self.A_pp = as_csr(s * f.Mp)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.A_BB.shape[0], self.A_EE.shape[0], self.A_pp.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        n = sum(self.sizes)
        return n, n

    def split(self, x: np.ndarray):
        nb, ne, _ = self.sizes
        return x[:nb], x[nb : nb + ne], x[nb + ne :]

    def apply(self, x: np.ndarray) -> np.ndarray:
        if isinstance(x, BlockVector):
            return BlockVector.from_flat(self.apply(x.flat), self.sizes)
        xB, xE, xp = self.split(np.asarray(x, dtype=float))
        return np.concatenate(
            [
                self.A_BB @ xB + self.MbK @ xE,
                -(self.KtMb @ xB) + self.A_EE @ xE + self.MeG @ xp,
                -(self.GtMe @ xE) + self.A_pp @ xp,
            ]
        )

    __matmul__ = apply

    def to_sparse(self) -> sp.csr_matrix:
        return as_csr(
            sp.bmat(
                [
                    [self.A_BB, self.MbK, None],
                    [-self.KtMb, self.A_EE, self.MeG],
                    [None, -self.GtMe, self.A_pp],
                ],
                format="csr",
            )
        )

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def divergence_norm(self, x: np.ndarray) -> float:
        """``|D B|_inf`` of the B block of a flat vector."""
        xB = self.split(x)[0]
        return float(np.max(np.abs(self.inc.D @ xB), initial=0.0))

    def quadratic_form(self, x: np.ndarray) -> float:
        """``<A x, x>``; the skew-symmetric couplings cancel."""
        return float(np.dot(self.apply(x), x))


def build_system(tau: float, forms: AssembledForms, inc: IncidenceMatrices, aux: bool = False) -> SystemOperator:
    return SystemOperator(tau, forms, inc, aux)
