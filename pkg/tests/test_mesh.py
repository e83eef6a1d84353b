import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxwell_prec.mesh import (
    DomainSpec,
    FaceLabel,
    InvalidSpecError,
    MeshParseError,
    generate,
    mesh_io_roundtrip,
    read_mesh,
    write_mesh,
)

from conftest import CAVITY, box, cavity


def test_box_n1_counts(box1):
    assert (box1.n_vertices, box1.n_edges, box1.n_faces, box1.n_tets) == (8, 19, 18, 6)
    assert box1.euler_characteristic() == 1


def test_box_n2_tets():
    assert box(2).n_tets == 48


def test_zero_subdivisions_rejected():
    with pytest.raises(InvalidSpecError):
        generate(DomainSpec("box", 0))


def test_default_labels_box(box1):
    gi = box1.labelled(FaceLabel.GammaI)
    assert len(gi) == 2
    assert np.allclose(box1.face_centroids(gi)[:, 0], 0.0)
    assert len(box1.labelled(FaceLabel.GammaO)) == 10


def test_cavity_counts(cav4):
    assert cav4.n_tets == 6 * (64 - 8)
    assert len(cav4.labelled(FaceLabel.GammaI)) == 48
    cav4.check(euler=None)
    # a solid shell has the Euler characteristic of a sphere
    assert cav4.euler_characteristic() == 2


def test_cavity_surface_is_gamma_i(cav4):
    c = cav4.face_centroids(cav4.labelled(FaceLabel.GammaI))
    d = np.max(np.abs(c - 0.5), axis=1)
    assert np.allclose(d, 0.25)


@pytest.mark.parametrize("cav", [((0.3, 0.25, 0.25), (0.75, 0.75, 0.75)), ((0.0, 0.25, 0.25), (0.75, 0.75, 0.75)),
                                 ((0.5, 0.5, 0.5), (0.5, 0.75, 0.75))])
def test_bad_cavity_rejected(cav):
    with pytest.raises(InvalidSpecError):
        generate(DomainSpec("cavity", 4, cav))


def test_impedance_callable():
    m = generate(DomainSpec("box", 2, impedance=lambda c: c[:, 2] > 1 - 1e-12))
    assert np.allclose(m.face_centroids(m.labelled(FaceLabel.GammaI))[:, 2], 1.0)
    assert len(m.labelled(FaceLabel.GammaI)) == 8


@settings(max_examples=8, deadline=None)
@given(st.integers(1, 4), st.sampled_from(["default", "none"]))
def test_box_invariants(n, imp):
    m = box(n, imp)
    m.check(euler=1)
    nb = len(m.boundary_faces())
    assert (4 * m.n_tets - nb) % 2 == 0
    assert np.sum(m.face_label == FaceLabel.Interior) == (4 * m.n_tets - nb) // 2
    assert abs(m.signed_volumes().sum() - 1.0) <= 1e-14
    assert nb == 12 * n * n


@pytest.mark.parametrize("n", [2, 4, 8])
def test_cavity_invariants(n):
    if n == 2:
        with pytest.raises(InvalidSpecError):
            cavity(2)
        return
    m = cavity(n)
    m.check(euler=None)
    nb = len(m.boundary_faces())
    assert np.sum(m.face_label == FaceLabel.Interior) == (4 * m.n_tets - nb) // 2
    assert abs(m.signed_volumes().sum() - (1.0 - 0.125)) <= 1e-14


def test_orientation_signs(box2):
    # each interior face sees one outward and one inward neighbour
    flux = np.zeros(box2.n_faces, dtype=int)
    np.add.at(flux, box2.tet_to_faces.ravel(), box2.tet_face_sign.ravel().astype(int))
    interior = box2.face_label == FaceLabel.Interior
    assert np.all(flux[interior] == 0)
    assert np.all(np.abs(flux[~interior]) == 1)


def test_roundtrip(box1, cav4, tmp_path):
    for m in (box1, cav4):
        r = mesh_io_roundtrip(m, tmp_path / "m.txt")
        assert np.array_equal(r.vertices, m.vertices)
        assert np.array_equal(r.tets, m.tets)
        assert np.array_equal(r.face_label, m.face_label)
        assert (r.n_edges, r.n_faces) == (m.n_edges, m.n_faces)
    assert mesh_io_roundtrip(box1).n_tets == 6


def test_roundtrip_bit_exact(tmp_path):
    m = box(3)
    m.vertices[:] += 1e-3 * np.sin(np.arange(m.vertices.size)).reshape(-1, 3) / 7
    r = mesh_io_roundtrip(m, tmp_path / "m.txt")
    assert np.array_equal(r.vertices, m.vertices)


def _lines(m, tmp_path):
    write_mesh(m, tmp_path / "m.txt")
    return (tmp_path / "m.txt").read_text().splitlines()


def _expect_error(lines, tmp_path, lineno=None):
    p = tmp_path / "bad.txt"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(MeshParseError) as info:
        read_mesh(p)
    if lineno is not None:
        assert info.value.lineno == lineno
    return info.value


def test_duplicate_tet(box1, tmp_path):
    lines = _lines(box1, tmp_path)
    t0 = lines.index("tets 6") + 1
    lines[t0 + 1] = lines[t0]
    err = _expect_error(lines, tmp_path, t0 + 2)
    assert "duplicate" in str(err)


def test_out_of_range_vertex(box1, tmp_path):
    lines = _lines(box1, tmp_path)
    t0 = lines.index("tets 6") + 1
    lines[t0 + 3] = "0 1 2 99"
    err = _expect_error(lines, tmp_path, t0 + 4)
    assert "out of range" in str(err)


def test_truncated_and_header(box1, tmp_path):
    lines = _lines(box1, tmp_path)
    _expect_error(lines[:-3], tmp_path)
    _expect_error(["tetmesh v2"] + lines[1:], tmp_path, 1)


def test_bad_label(box1, tmp_path):
    lines = _lines(box1, tmp_path)
    lines[-1] = lines[-1][:-1] + "x"
    _expect_error(lines, tmp_path, len(lines))


def test_negative_volume(box1, tmp_path):
    lines = _lines(box1, tmp_path)
    t0 = lines.index("tets 6") + 1
    a, b, c, d = lines[t0].split()
    lines[t0] = " ".join([b, a, c, d])
    err = _expect_error(lines, tmp_path, t0 + 1)
    assert "volume" in str(err)
