"""
Lowest-order discrete de Rham complex on a :class:`~maxwell_prec.mesh.TetMesh`.

    Lagrange P1 --G--> Nedelec (edges) --K--> Raviart-Thomas (faces) --D--> P0

DOFs are vertex values, edge circulations along ``tail -> head``, face fluxes
along the canonical normal ``(b - a) x (c - a)`` of the ascending triple
``(a, b, c)``, and cell integrals.  With these functionals the discrete
derivatives are signed incidence matrices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import LOCAL_EDGES, LOCAL_FACES, FaceLabel, TetMesh

__all__ = [
    "DofMaps",
    "IncidenceMatrices",
    "build_dof_maps",
    "build_incidence",
    "interp_grad",
    "interp_curl",
    "interp_div",
    "interp_l2",
    "barycentric_gradients",
    "TET_QUAD",
    "TRI_QUAD",
    "EDGE_QUAD",
]

VectorField = Callable[[np.ndarray], np.ndarray]

# quadrature rules in barycentric coordinates, weights sum to 1
_a, _b = 0.5854101966249685, 0.1381966011250105
TET_QUAD = (np.array([[_a, _b, _b, _b], [_b, _a, _b, _b], [_b, _b, _a, _b], [_b, _b, _b, _a]]), np.full(4, 0.25))
TRI_QUAD = (np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]), np.full(3, 1 / 3))
_g = 0.5 / np.sqrt(3.0)
EDGE_QUAD = (np.array([[0.5 + _g, 0.5 - _g], [0.5 - _g, 0.5 + _g]]), np.full(2, 0.5))


@dataclass(frozen=True)
class DofMaps:
    """Free DOFs of each space and global -> free index maps (-1 = constrained)."""

    p_dofs: np.ndarray
    e_dofs: np.ndarray
    b_dofs: np.ndarray
    l2_dofs: np.ndarray
    p_index: np.ndarray
    e_index: np.ndarray
    b_index: np.ndarray

    @property
    def sizes(self) -> tuple[int, int, int]:
        """Block sizes in system ordering (B, E, p)."""
        return len(self.b_dofs), len(self.e_dofs), len(self.p_dofs)

    def counts(self) -> dict[str, int]:
        return {"p": len(self.p_dofs), "e": len(self.e_dofs), "b": len(self.b_dofs), "l2": len(self.l2_dofs)}


@dataclass(frozen=True)
class IncidenceMatrices:
    """Integer incidence matrices restricted to free DOFs."""

    G: sp.csr_matrix
    K: sp.csr_matrix
    D: sp.csr_matrix


def _global_index(free: np.ndarray, size: int) -> np.ndarray:
    idx = np.full(size, -1, dtype=np.int64)
    idx[free] = np.arange(len(free))
    return idx


def build_dof_maps(mesh: TetMesh) -> DofMaps:
    """Free DOFs: interior vertices, edges and faces not touching ``GammaO``.

    An edge shared by ``GammaI`` and ``GammaO`` faces is constrained.
    """
    gamma_o = mesh.labelled(FaceLabel.GammaO)
    boundary = mesh.boundary_faces()

    vert_on_bnd = np.zeros(mesh.n_vertices, dtype=bool)
    vert_on_bnd[mesh.faces[boundary].ravel()] = True

    face_edges = _face_edges(mesh)
    edge_on_o = np.zeros(mesh.n_edges, dtype=bool)
    edge_on_o[face_edges[gamma_o].ravel()] = True

    face_free = mesh.face_label != FaceLabel.GammaO

    p = np.flatnonzero(~vert_on_bnd)
    e = np.flatnonzero(~edge_on_o)
    b = np.flatnonzero(face_free)
    return DofMaps(
        p_dofs=p,
        e_dofs=e,
        b_dofs=b,
        l2_dofs=np.arange(mesh.n_tets),
        p_index=_global_index(p, mesh.n_vertices),
        e_index=_global_index(e, mesh.n_edges),
        b_index=_global_index(b, mesh.n_faces),
    )


def _edge_lookup(mesh: TetMesh, pairs: np.ndarray) -> np.ndarray:
    """Global ids of edges given as ``(k, 2)`` ascending vertex pairs."""
    nv = mesh.n_vertices
    keys = mesh.edges[:, 0] * nv + mesh.edges[:, 1]
    q = pairs[..., 0] * nv + pairs[..., 1]
    pos = np.searchsorted(keys, q)
    assert np.all(keys[pos] == q), "edge not in mesh"
    return pos


def _face_edges(mesh: TetMesh) -> np.ndarray:
    """``(F, 3)`` global edges ``(a,b), (b,c), (a,c)`` of each face."""
    f = mesh.faces
    pairs = np.stack([f[:, [0, 1]], f[:, [1, 2]], f[:, [0, 2]]], axis=1)
    return _edge_lookup(mesh, pairs)


def full_incidence(mesh: TetMesh) -> IncidenceMatrices:
    """Incidence matrices on all mesh entities (no boundary constraints)."""
    ne, nv, nf, nt = mesh.n_edges, mesh.n_vertices, mesh.n_faces, mesh.n_tets
    rows = np.repeat(np.arange(ne), 2)
    G = sp.csr_matrix(
        (np.tile([-1, 1], ne), (rows, mesh.edges.ravel())), shape=(ne, nv), dtype=np.int64
    )
    fe = _face_edges(mesh)
    K = sp.csr_matrix(
        (np.tile([1, 1, -1], nf), (np.repeat(np.arange(nf), 3), fe.ravel())), shape=(nf, ne), dtype=np.int64
    )
    D = sp.csr_matrix(
        (mesh.tet_face_sign.ravel().astype(np.int64), (np.repeat(np.arange(nt), 4), mesh.tet_to_faces.ravel())),
        shape=(nt, nf),
        dtype=np.int64,
    )
    for M in (G, K, D):
        M.sort_indices()
    return IncidenceMatrices(G, K, D)


def build_incidence(mesh: TetMesh, dofs: DofMaps) -> IncidenceMatrices:
    full = full_incidence(mesh)
    G = full.G[dofs.e_dofs][:, dofs.p_dofs]
    K = full.K[dofs.b_dofs][:, dofs.e_dofs]
    D = full.D[dofs.l2_dofs][:, dofs.b_dofs]
    for M in (G, K, D):
        M.eliminate_zeros()
        M.sort_indices()
    return IncidenceMatrices(G.tocsr(), K.tocsr(), D.tocsr())


# ------------------------------------------------------------ Whitney forms
def barycentric_gradients(mesh: TetMesh) -> tuple[np.ndarray, np.ndarray]:
    """Gradients ``(T, 4, 3)`` of the barycentric coordinates and volumes ``(T,)``."""
    X = mesh.vertices[mesh.tets]
    J = np.transpose(X[:, 1:] - X[:, :1], (0, 2, 1))  # columns x_k - x_0
    inv = np.linalg.inv(J)
    grads = np.empty((len(X), 4, 3))
    grads[:, 1:] = inv
    grads[:, 0] = -inv.sum(axis=1)
    return grads, np.abs(np.linalg.det(J)) / 6.0


def local_edge_vertices(mesh: TetMesh) -> np.ndarray:
    """``(T, 6, 2)`` local (tail, head) indices following global orientation."""
    le = np.broadcast_to(LOCAL_EDGES, (mesh.n_tets, 6, 2))
    flip = mesh.tet_edge_sign < 0
    return np.where(flip[:, :, None], le[:, :, ::-1], le)


def local_face_vertices(mesh: TetMesh) -> np.ndarray:
    """``(T, 4, 3)`` local indices of each face, ordered by ascending global id."""
    lf = np.broadcast_to(LOCAL_FACES, (mesh.n_tets, 4, 3))
    gids = np.take_along_axis(mesh.tets[:, None, :].repeat(4, axis=1), lf, axis=2)
    order = np.argsort(gids, axis=2)
    return np.take_along_axis(lf, order, axis=2)


def edge_basis(lam: np.ndarray, grads: np.ndarray, lev: np.ndarray) -> np.ndarray:
    """Whitney 1-forms ``l_t grad l_h - l_h grad l_t``.

    ``lam`` is ``(Q, 4)`` barycentric points; returns ``(T, Q, 6, 3)``.
    """
    T = len(grads)
    t, h = lev[..., 0], lev[..., 1]  # (T, 6)
    gt = np.take_along_axis(grads, t[..., None].repeat(3, axis=2), axis=1)  # (T, 6, 3)
    gh = np.take_along_axis(grads, h[..., None].repeat(3, axis=2), axis=1)
    lt = lam[:, t].transpose(1, 0, 2) if T else np.zeros((0, len(lam), 6))  # (T, Q, 6)
    lh = lam[:, h].transpose(1, 0, 2) if T else np.zeros((0, len(lam), 6))
    return lt[..., None] * gh[:, None] - lh[..., None] * gt[:, None]


def face_basis(lam: np.ndarray, grads: np.ndarray, lfv: np.ndarray) -> np.ndarray:
    """Whitney 2-forms ``2 (l_a ga x gb + l_b gb x gc + l_c gc x ga)``; ``(T, Q, 4, 3)``."""

    def g(k):
        return np.take_along_axis(grads, lfv[..., k, None].repeat(3, axis=2), axis=1)  # (T, 4, 3)

    ga, gb, gc = g(0), g(1), g(2)
    la, lb, lc = (lam[:, lfv[..., k]].transpose(1, 0, 2) for k in range(3))  # (T, Q, 4)
    return 2.0 * (
        la[..., None] * np.cross(gb, gc)[:, None]
        + lb[..., None] * np.cross(gc, ga)[:, None]
        + lc[..., None] * np.cross(ga, gb)[:, None]
    )


# ---------------------------------------------------------- interpolation
def interp_grad(mesh: TetMesh, dofs: DofMaps | None, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Vertex values of a scalar field (free vertices only when ``dofs`` given)."""
    vals = np.asarray(f(mesh.vertices), dtype=float)
    return vals if dofs is None else vals[dofs.p_dofs]


def interp_curl(mesh: TetMesh, dofs: DofMaps | None, f: VectorField) -> np.ndarray:
    """Edge DOFs ``int_e f . t ds`` with 2-point Gauss quadrature."""
    edges = mesh.edges if dofs is None else mesh.edges[dofs.e_dofs]
    xt, xh = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
    pts, w = EDGE_QUAD
    out = np.zeros(len(edges))
    for (s_t, s_h), wq in zip(pts, w):
        out += wq * np.einsum("ij,ij->i", f(s_t * xt + s_h * xh), xh - xt)
    return out


def interp_div(mesh: TetMesh, dofs: DofMaps | None, f: VectorField) -> np.ndarray:
    """Face DOFs ``int_f f . n dA`` with the 3-point degree-2 triangle rule."""
    faces = mesh.faces if dofs is None else mesh.faces[dofs.b_dofs]
    a, b, c = (mesh.vertices[faces[:, k]] for k in range(3))
    half_normal = 0.5 * np.cross(b - a, c - a)  # unit normal times area
    pts, w = TRI_QUAD
    out = np.zeros(len(faces))
    for lam, wq in zip(pts, w):
        out += wq * np.einsum("ij,ij->i", f(lam[0] * a + lam[1] * b + lam[2] * c), half_normal)
    return out


def interp_l2(mesh: TetMesh, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Cell integrals with the 4-point degree-2 tet rule."""
    X = mesh.vertices[mesh.tets]
    vol = mesh.volumes()
    pts, w = TET_QUAD
    out = np.zeros(mesh.n_tets)
    for lam, wq in zip(pts, w):
        out += wq * np.asarray(f(np.einsum("k,tki->ti", lam, X)))
    return out * vol
