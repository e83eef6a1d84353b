"""
Mass matrices, impedance surface matrix and piecewise-constant coefficients.

All matrices act on free DOFs only; constrained rows and columns are dropped.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.io
import scipy.sparse as sp

from .derham import (
    TET_QUAD,
    TRI_QUAD,
    DofMaps,
    _face_edges,
    barycentric_gradients,
    edge_basis,
    face_basis,
    local_edge_vertices,
    local_face_vertices,
)
from .mesh import FaceLabel, TetMesh

__all__ = [
    "InvalidCoefficientError",
    "CoefficientField",
    "AssembledForms",
    "assemble_mass_p",
    "assemble_mass_E",
    "assemble_mass_B",
    "assemble_mass_L2",
    "assemble_impedance",
    "assemble_forms",
    "assemble_current",
    "write_matrix_market",
    "read_matrix_market",
]


class InvalidCoefficientError(ValueError):
    pass


@dataclass(frozen=True)
class CoefficientField:
    """Per-tet permittivity ``eps`` and inverse permeability ``mu_inv``."""

    eps: np.ndarray
    mu_inv: np.ndarray

    def __post_init__(self):
        for name in ("eps", "mu_inv"):
            v = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise InvalidCoefficientError(f"{name} must be positive everywhere")
            object.__setattr__(self, name, v)

    @classmethod
    def constant(cls, mesh: TetMesh, eps: float = 1.0, mu_inv: float = 1.0) -> "CoefficientField":
        return cls(np.full(mesh.n_tets, float(eps)), np.full(mesh.n_tets, float(mu_inv)))

    @classmethod
    def band_jump(
        cls,
        mesh: TetMesh,
        which: str,
        value: float,
        band: tuple[float, float] | None = None,
        center=(0.5, 0.5, 0.5),
    ) -> "CoefficientField":
        """Coefficient ``value`` in a shell band, 1 elsewhere.

        The band is measured in the max-norm distance of tet centroids from
        ``center``, so it is a cubic shell for the box domains.  The default
        band is the middle third between the cavity surface (0.25) and the
        outer box (0.5).
        """
        if which not in ("eps", "mu_inv"):
            raise ValueError("which must be 'eps' or 'mu_inv'")
        lo, hi = band if band is not None else (0.25 + 0.25 / 3, 0.25 + 0.5 / 3)
        r = np.max(np.abs(mesh.tet_centroids() - np.asarray(center)), axis=1)
        vals = np.where((r > lo) & (r < hi), float(value), 1.0)
        ones = np.ones(mesh.n_tets)
        return cls(vals, ones) if which == "eps" else cls(ones, vals)


@dataclass(frozen=True)
class AssembledForms:
    Mp: sp.csr_matrix
    Me: sp.csr_matrix
    Mb: sp.csr_matrix
    M0: sp.csr_matrix
    Z: sp.csr_matrix


def _scatter(local: np.ndarray, idx: np.ndarray, n: int) -> sp.csr_matrix:
    """Sum ``(T, k, k)`` local matrices into an ``n x n`` matrix; ``idx < 0`` is dropped."""
    k = idx.shape[1]
    rows = np.repeat(idx, k, axis=1).ravel()
    cols = np.tile(idx, (1, k)).ravel()
    vals = local.reshape(len(idx), -1).ravel()
    keep = (rows >= 0) & (cols >= 0)
    A = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _check_weight(w):
    w = np.asarray(w, dtype=float)
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise InvalidCoefficientError("coefficient must be positive")
    return w


def assemble_mass_p(mesh: TetMesh, dofs: DofMaps) -> sp.csr_matrix:
    vol = mesh.volumes()
    local = vol[:, None, None] * (np.ones((4, 4)) + np.eye(4))[None] / 20.0
    return _scatter(local, dofs.p_index[mesh.tets], len(dofs.p_dofs))


def _vector_mass(basis: np.ndarray, vol: np.ndarray, weight: np.ndarray) -> np.ndarray:
    _, w = TET_QUAD
    return np.einsum("q,t,tqai,tqbi->tab", w, vol * weight, basis, basis)


def assemble_mass_E(mesh: TetMesh, dofs: DofMaps, coeff: CoefficientField | np.ndarray) -> sp.csr_matrix:
    """Nedelec mass matrix weighted by ``eps`` (or an explicit per-tet weight)."""
    weight = _check_weight(coeff.eps if isinstance(coeff, CoefficientField) else coeff)
    grads, vol = barycentric_gradients(mesh)
    W = edge_basis(TET_QUAD[0], grads, local_edge_vertices(mesh))
    return _scatter(_vector_mass(W, vol, weight), dofs.e_index[mesh.tet_to_edges], len(dofs.e_dofs))


def assemble_mass_B(mesh: TetMesh, dofs: DofMaps, coeff: CoefficientField | np.ndarray) -> sp.csr_matrix:
    """Raviart-Thomas mass matrix weighted by ``mu_inv``."""
    weight = _check_weight(coeff.mu_inv if isinstance(coeff, CoefficientField) else coeff)
    grads, vol = barycentric_gradients(mesh)
    W = face_basis(TET_QUAD[0], grads, local_face_vertices(mesh))
    return _scatter(_vector_mass(W, vol, weight), dofs.b_index[mesh.tet_to_faces], len(dofs.b_dofs))


def assemble_mass_L2(mesh: TetMesh) -> sp.csr_matrix:
    """P0 mass matrix for cell-integral DOFs: ``diag(1 / |T|)``."""
    return sp.diags(1.0 / mesh.volumes()).tocsr()


def _surface_gradients(P: np.ndarray) -> np.ndarray:
    """Tangential gradients ``(F, 3, 3)`` of the barycentrics on triangles ``P (F, 3, 3)``."""
    e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    E = np.stack([e1, e2], axis=1)  # (F, 2, 3)
    gram = np.einsum("fai,fbi->fab", E, E)
    g12 = np.einsum("fab,fbi->fai", np.linalg.inv(gram), E)
    return np.concatenate([-g12.sum(axis=1, keepdims=True), g12], axis=1)


def triangle_edge_mass(P: np.ndarray) -> np.ndarray:
    """2D Whitney edge mass of triangles ``P`` for edges ``(0,1), (1,2), (0,2)``."""
    grads = _surface_gradients(P)
    area = 0.5 * np.linalg.norm(np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]), axis=1)
    pairs = np.array([(0, 1), (1, 2), (0, 2)])
    pts, wq = TRI_QUAD
    t, h = pairs[:, 0], pairs[:, 1]
    # (F, Q, 3, 3): quad point, local edge, component
    W = pts[:, t][None, :, :, None] * grads[:, None, h] - pts[:, h][None, :, :, None] * grads[:, None, t]
    return np.einsum("q,f,fqai,fqbi->fab", wq, area, W, W)


def assemble_impedance(mesh: TetMesh, dofs: DofMaps, gamma: float) -> sp.csr_matrix:
    """``(1 + gamma) int_{GammaI} E_tan . F_tan`` on free edge DOFs."""
    if not gamma > -1:
        raise InvalidCoefficientError("impedance parameter must satisfy gamma > -1")
    faces = mesh.labelled(FaceLabel.GammaI)
    n = len(dofs.e_dofs)
    if len(faces) == 0:
        return sp.csr_matrix((n, n))
    P = mesh.vertices[mesh.faces[faces]]
    local = (1.0 + gamma) * triangle_edge_mass(P)
    idx = dofs.e_index[_face_edges(mesh)[faces]]
    return _scatter(local, idx, n)


def assemble_forms(mesh: TetMesh, dofs: DofMaps, coeff: CoefficientField, gamma: float) -> AssembledForms:
    return AssembledForms(
        Mp=assemble_mass_p(mesh, dofs),
        Me=assemble_mass_E(mesh, dofs, coeff),
        Mb=assemble_mass_B(mesh, dofs, coeff),
        M0=assemble_mass_L2(mesh),
        Z=assemble_impedance(mesh, dofs, gamma),
    )


def assemble_current(mesh: TetMesh, dofs: DofMaps, j: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Load vector ``(j, w_e)`` over free edges, 4-point tet quadrature."""
    grads, vol = barycentric_gradients(mesh)
    pts, wq = TET_QUAD
    W = edge_basis(pts, grads, local_edge_vertices(mesh))  # (T, Q, 6, 3)
    X = mesh.vertices[mesh.tets]
    J = np.stack([np.asarray(j(np.einsum("k,tki->ti", lam, X))) for lam in pts], axis=1)  # (T, Q, 3)
    local = np.einsum("q,t,tqi,tqai->ta", wq, vol, J, W)
    idx = dofs.e_index[mesh.tet_to_edges].ravel()
    keep = idx >= 0
    return np.bincount(idx[keep], weights=local.ravel()[keep], minlength=len(dofs.e_dofs))


def write_matrix_market(A, path: str | Path) -> None:
    """Coordinate real general Matrix Market file (1-based indices)."""
    with open(path, "wb") as fh:
        scipy.io.mmwrite(fh, sp.coo_matrix(A, dtype=float), field="real", symmetry="general")


def read_matrix_market(path: str | Path) -> sp.csr_matrix:
    with open(path, "rb") as fh:
        return sp.csr_matrix(scipy.io.mmread(fh))
