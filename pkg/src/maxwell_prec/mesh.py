"""
Structured tetrahedral meshes of the unit box, optionally with a cubic cavity.

Every cube of an ``n x n x n`` grid is split into 6 tetrahedra along its main
diagonal (Kuhn/Freudenthal subdivision).  Edges and faces are enumerated with
canonical orientation (ascending vertex ids) and each boundary face carries an
impedance label: ``GammaI`` (impedance boundary) or ``GammaO`` (perfect
conductor).
"""
from __future__ import annotations

import itertools
import tempfile
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "FaceLabel",
    "DomainSpec",
    "TetMesh",
    "InvalidSpecError",
    "MeshParseError",
    "generate_box",
    "generate_box_with_cavity",
    "generate",
    "write_mesh",
    "read_mesh",
    "mesh_io_roundtrip",
]

# local vertex pairs / triples of a tetrahedron
LOCAL_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
LOCAL_FACES = np.array([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)])  # face k is opposite vertex k


class FaceLabel(IntEnum):
    Interior = 0
    GammaI = 1
    GammaO = 2


class InvalidSpecError(ValueError):
    pass


class MeshParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


ImpedanceRule = Callable[[np.ndarray], np.ndarray]


def _rule_x0(centroids: np.ndarray) -> np.ndarray:
    return np.isclose(centroids[:, 0], 0.0, atol=1e-12)


def _rule_none(centroids: np.ndarray) -> np.ndarray:
    return np.zeros(len(centroids), dtype=bool)


IMPEDANCE_RULES: dict[str, ImpedanceRule] = {"x0": _rule_x0, "none": _rule_none}


@dataclass(frozen=True)
class DomainSpec:
    """Description of a box or box-with-cavity domain.

    ``impedance`` is either a preset name (``"default"``, ``"x0"``,
    ``"none"``, ``"cavity"``) or a callable mapping an ``(F, 3)`` array of
    boundary face centroids to a boolean mask selecting ``GammaI`` faces.
    ``"default"`` means the x=0 face for a plain box and the cavity surface
    for a box with cavity.
    """

    kind: str = "box"
    n: int = 1
    cavity: tuple[tuple[float, float, float], tuple[float, float, float]] | None = None
    impedance: str | ImpedanceRule = "default"

    def validate(self) -> None:
        if self.kind not in ("box", "cavity"):
            raise InvalidSpecError(f"unknown domain kind {self.kind!r}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidSpecError(f"n must be a positive integer, got {self.n!r}")
        if self.kind == "cavity":
            if self.cavity is None:
                raise InvalidSpecError("cavity domain requires cavity extents")
            lo, hi = (np.asarray(c, dtype=float) for c in self.cavity)
            if not (np.all(lo > 0.0) and np.all(hi < 1.0) and np.all(lo < hi)):
                raise InvalidSpecError("cavity must lie strictly inside the unit box")
            for v in np.concatenate([lo, hi]):
                k = v * self.n
                if abs(k - round(k)) > 1e-9:
                    raise InvalidSpecError(f"cavity bound {v} is not aligned with the n={self.n} grid")


@dataclass(eq=False)
class TetMesh:
    """Tetrahedral mesh with oriented edges/faces and boundary labels.

    Attributes
    ----------
    vertices : (V, 3) float array
    tets : (T, 4) int array, positively oriented
    edges : (E, 2) int array, ``tail < head``
    faces : (F, 3) int array, ascending vertex ids
    tet_to_edges, tet_edge_sign : (T, 6) local edge ``LOCAL_EDGES[k]`` to
        global edge, sign +1 when the local direction matches the global one
    tet_to_faces, tet_face_sign : (T, 4) local face ``k`` (opposite local
        vertex ``k``) to global face, sign +1 when the canonical face normal
        points out of the tet
    face_label : (F,) int array of :class:`FaceLabel`
    """

    vertices: np.ndarray
    tets: np.ndarray
    edges: np.ndarray = field(init=False)
    faces: np.ndarray = field(init=False)
    tet_to_edges: np.ndarray = field(init=False)
    tet_edge_sign: np.ndarray = field(init=False)
    tet_to_faces: np.ndarray = field(init=False)
    tet_face_sign: np.ndarray = field(init=False)
    face_label: np.ndarray = field(init=False)
    face_tet_count: np.ndarray = field(init=False)
    kind: str = "box"

    def __post_init__(self) -> None:
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.tets = np.ascontiguousarray(self.tets, dtype=np.int64)
        T = len(self.tets)

        loc_e = self.tets[:, LOCAL_EDGES]  # (T, 6, 2)
        sorted_e = np.sort(loc_e, axis=2)
        self.edges, inv = np.unique(sorted_e.reshape(-1, 2), axis=0, return_inverse=True)
        self.tet_to_edges = inv.reshape(T, 6)
        self.tet_edge_sign = np.where(loc_e[:, :, 0] < loc_e[:, :, 1], 1, -1).astype(np.int8)

        loc_f = self.tets[:, LOCAL_FACES]  # (T, 4, 3)
        sorted_f = np.sort(loc_f, axis=2)
        self.faces, inv, counts = np.unique(
            sorted_f.reshape(-1, 3), axis=0, return_inverse=True, return_counts=True
        )
        self.tet_to_faces = inv.reshape(T, 4)
        self.face_tet_count = counts

        # outward test: canonical normal against the vector towards the opposite vertex
        X = self.vertices
        a, b, c = (X[sorted_f[:, :, i]] for i in range(3))
        normal = np.cross(b - a, c - a)
        opposite = X[self.tets]  # (T, 4, 3); local face k is opposite vertex k
        inward = np.einsum("tki,tki->tk", normal, opposite - a)
        self.tet_face_sign = np.where(inward < 0, 1, -1).astype(np.int8)

        self.face_label = np.where(counts == 1, FaceLabel.GammaO, FaceLabel.Interior).astype(np.int8)

    # ------------------------------------------------------------------ sizes
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces - self.n_tets

    # -------------------------------------------------------------- geometry
    def signed_volumes(self) -> np.ndarray:
        X = self.vertices[self.tets]
        return np.einsum("ti,ti->t", X[:, 1] - X[:, 0], np.cross(X[:, 2] - X[:, 0], X[:, 3] - X[:, 0])) / 6.0

    def volumes(self) -> np.ndarray:
        return np.abs(self.signed_volumes())

    def face_centroids(self, idx=None) -> np.ndarray:
        f = self.faces if idx is None else self.faces[idx]
        return self.vertices[f].mean(axis=1)

    def tet_centroids(self) -> np.ndarray:
        return self.vertices[self.tets].mean(axis=1)

    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_tet_count == 1)

    def set_boundary_labels(self, gamma_i_mask: np.ndarray) -> None:
        """Label boundary faces: ``gamma_i_mask`` indexes ``boundary_faces()``."""
        bnd = self.boundary_faces()
        gamma_i_mask = np.asarray(gamma_i_mask, dtype=bool)
        if gamma_i_mask.shape != bnd.shape:
            raise ValueError("mask must have one entry per boundary face")
        self.face_label[bnd] = np.where(gamma_i_mask, FaceLabel.GammaI, FaceLabel.GammaO)

    def labelled(self, label: FaceLabel) -> np.ndarray:
        return np.flatnonzero(self.face_label == label)

    def check(self, euler: int | None = 1) -> None:
        """Assert the structural invariants; raises ``AssertionError``."""
        assert np.all(self.edges[:, 0] < self.edges[:, 1])
        assert np.all(self.faces[:, 0] < self.faces[:, 1]) and np.all(self.faces[:, 1] < self.faces[:, 2])
        assert np.all((self.face_tet_count == 1) | (self.face_tet_count == 2))
        interior = self.face_label == FaceLabel.Interior
        assert np.array_equal(interior, self.face_tet_count == 2)
        assert np.all(self.signed_volumes() > 0)
        bnd = ~interior
        assert np.all(np.isin(self.face_label[bnd], (FaceLabel.GammaI, FaceLabel.GammaO)))
        if euler is not None:
            assert self.euler_characteristic() == euler


# ---------------------------------------------------------------- generators
def _kuhn_tets(cells: np.ndarray, n: int) -> np.ndarray:
    """Split each cell ``(i, j, k)`` of an ``n^3`` grid into 6 tets."""
    stride = np.array([1, n + 1, (n + 1) ** 2])
    base = cells @ stride
    tets = []
    for perm in itertools.permutations(range(3)):
        off = np.zeros((4, 3), dtype=np.int64)
        for s in range(3):
            off[s + 1] = off[s]
            off[s + 1, perm[s]] += 1
        local = off @ stride
        if np.linalg.det(np.diff(off, axis=0).astype(float)) < 0:
            local = local[[0, 1, 3, 2]]
        tets.append(base[:, None] + local[None, :])
    # cell-major ordering keeps assembly order reproducible
    return np.stack(tets, axis=1).reshape(-1, 4)


def _grid_vertices(n: int) -> np.ndarray:
    r = np.arange(n + 1) / n
    z, y, x = np.meshgrid(r, r, r, indexing="ij")
    return np.column_stack([x.ravel(), y.ravel(), z.ravel()])


def _label(mesh: TetMesh, spec: DomainSpec, cavity_surface: np.ndarray | None) -> None:
    bnd = mesh.boundary_faces()
    rule = spec.impedance
    if rule == "default":
        rule = "cavity" if spec.kind == "cavity" else "x0"
    if rule == "cavity":
        if cavity_surface is None:
            raise InvalidSpecError("'cavity' impedance rule needs a cavity domain")
        mask = cavity_surface
    elif callable(rule):
        mask = np.asarray(rule(mesh.face_centroids(bnd)), dtype=bool)
    else:
        try:
            mask = IMPEDANCE_RULES[rule](mesh.face_centroids(bnd))
        except KeyError:
            raise InvalidSpecError(f"unknown impedance rule {rule!r}") from None
    mesh.set_boundary_labels(mask)


def generate_box(spec: DomainSpec) -> TetMesh:
    """Kuhn mesh of the unit cube with ``spec.n`` cells per axis."""
    spec.validate()
    if spec.kind != "box":
        raise InvalidSpecError("generate_box expects kind='box'")
    n = int(spec.n)
    cells = np.array(list(itertools.product(range(n), repeat=3)))[:, ::-1]  # x fastest
    mesh = TetMesh(_grid_vertices(n), _kuhn_tets(cells, n), kind="box")
    _label(mesh, spec, None)
    return mesh


def generate_box_with_cavity(spec: DomainSpec) -> TetMesh:
    """Kuhn mesh of the unit cube with a grid-aligned cubic hole removed.

    The cavity surface becomes ``GammaI`` by default and the outer box
    faces ``GammaO``.
    """
    spec.validate()
    if spec.kind != "cavity":
        raise InvalidSpecError("generate_box_with_cavity expects kind='cavity'")
    n = int(spec.n)
    lo = np.rint(np.asarray(spec.cavity[0]) * n).astype(int)
    hi = np.rint(np.asarray(spec.cavity[1]) * n).astype(int)
    cells = np.array(list(itertools.product(range(n), repeat=3)))[:, ::-1]
    inside = np.all((cells >= lo) & (cells < hi), axis=1)
    tets = _kuhn_tets(cells[~inside], n)

    used = np.unique(tets)
    remap = np.full((n + 1) ** 3, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    mesh = TetMesh(_grid_vertices(n)[used], remap[tets], kind="cavity")

    bnd = mesh.boundary_faces()
    c = mesh.face_centroids(bnd)
    on_outer = np.any(np.isclose(c, 0.0, atol=1e-12) | np.isclose(c, 1.0, atol=1e-12), axis=1)
    _label(mesh, spec, ~on_outer)
    return mesh


def generate(spec: DomainSpec) -> TetMesh:
    if spec.kind == "cavity":
        return generate_box_with_cavity(spec)
    return generate_box(spec)


# ------------------------------------------------------------------------ IO
def write_mesh(mesh: TetMesh, path: str | Path) -> None:
    """Write the ``tetmesh v1`` text format."""
    bnd = mesh.boundary_faces()
    lines = ["tetmesh v1", f"vertices {mesh.n_vertices}"]
    lines += [" ".join(f"{c:.17g}" for c in v) for v in mesh.vertices]
    lines.append(f"tets {mesh.n_tets}")
    lines += [" ".join(str(i) for i in t) for t in mesh.tets]
    lines.append(f"boundary {len(bnd)}")
    for f in bnd:
        tag = "i" if mesh.face_label[f] == FaceLabel.GammaI else "o"
        lines.append(" ".join(str(i) for i in mesh.faces[f]) + f" {tag}")
    Path(path).write_text("\n".join(lines) + "\n")


def _section(lines: Sequence[str], pos: int, name: str) -> tuple[int, int]:
    if pos >= len(lines):
        raise MeshParseError(pos + 1, f"missing '{name}' section")
    parts = lines[pos].split()
    if len(parts) != 2 or parts[0] != name or not parts[1].isdigit():
        raise MeshParseError(pos + 1, f"expected '{name} <count>'")
    count = int(parts[1])
    if pos + 1 + count > len(lines):
        raise MeshParseError(len(lines), f"'{name}' section truncated")
    return count, pos + 1


def read_mesh(path: str | Path) -> TetMesh:
    """Parse the ``tetmesh v1`` text format; errors carry the line number."""
    lines = Path(path).read_text().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines or lines[0].strip() != "tetmesh v1":
        raise MeshParseError(1, "expected header 'tetmesh v1'")

    nv, pos = _section(lines, 1, "vertices")
    verts = np.empty((nv, 3))
    for k in range(nv):
        parts = lines[pos + k].split()
        try:
            if len(parts) != 3:
                raise ValueError
            verts[k] = [float(p) for p in parts]
        except ValueError:
            raise MeshParseError(pos + k + 1, "expected three coordinates") from None
    pos += nv

    nt, pos = _section(lines, pos, "tets")
    tets = np.empty((nt, 4), dtype=np.int64)
    seen: dict[tuple[int, ...], int] = {}
    for k in range(nt):
        lineno = pos + k + 1
        parts = lines[pos + k].split()
        if len(parts) != 4 or not all(p.isdigit() for p in parts):
            raise MeshParseError(lineno, "expected four vertex ids")
        ids = [int(p) for p in parts]
        if max(ids) >= nv:
            raise MeshParseError(lineno, f"vertex id {max(ids)} out of range (have {nv})")
        key = tuple(sorted(ids))
        if len(set(ids)) != 4:
            raise MeshParseError(lineno, "degenerate tet (repeated vertex)")
        if key in seen:
            raise MeshParseError(lineno, f"duplicate of tet on line {seen[key]}")
        seen[key] = lineno
        tets[k] = ids
    pos += nt

    nb, pos = _section(lines, pos, "boundary")
    labelled: dict[tuple[int, ...], tuple[str, int]] = {}
    for k in range(nb):
        lineno = pos + k + 1
        parts = lines[pos + k].split()
        if len(parts) != 4 or parts[3] not in ("i", "o") or not all(p.isdigit() for p in parts[:3]):
            raise MeshParseError(lineno, "expected 'v0 v1 v2 i|o'")
        key = tuple(sorted(int(p) for p in parts[:3]))
        if key in labelled:
            raise MeshParseError(lineno, "duplicate boundary face")
        labelled[key] = (parts[3], lineno)
    if pos + nb != len(lines):
        raise MeshParseError(pos + nb + 1, "trailing content after boundary section")

    mesh = TetMesh(verts, tets)
    bad = np.flatnonzero(mesh.signed_volumes() <= 0)
    if len(bad):
        raise MeshParseError(seen[tuple(sorted(tets[bad[0]]))], "tet has non-positive volume")
    bnd = mesh.boundary_faces()
    mask = np.zeros(len(bnd), dtype=bool)
    for j, f in enumerate(bnd):
        try:
            tag, _ = labelled.pop(tuple(mesh.faces[f]))
        except KeyError:
            raise MeshParseError(pos, f"boundary face {tuple(mesh.faces[f])} has no label") from None
        mask[j] = tag == "i"
    if labelled:
        _, lineno = next(iter(labelled.values()))
        raise MeshParseError(lineno, "labelled face is not a boundary face")
    mesh.set_boundary_labels(mask)
    mesh.kind = "cavity" if mesh.euler_characteristic() != 1 else "box"
    return mesh


def mesh_io_roundtrip(mesh: TetMesh, path: str | Path | None = None) -> TetMesh:
    """Write ``mesh`` and read it back (through a temporary file by default)."""
    if path is not None:
        write_mesh(mesh, path)
        return read_mesh(path)
    with tempfile.TemporaryDirectory() as tmp:
        return mesh_io_roundtrip(mesh, Path(tmp) / "mesh.txt")
