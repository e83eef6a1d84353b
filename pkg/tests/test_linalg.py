import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from maxwell_prec.linalg import (
    BlockVector,
    ShapeError,
    add_scaled,
    as_csr,
    build_system,
    spgemm,
    spmv,
    transpose,
)
from maxwell_prec.timestepper import discretize

from conftest import box, cavity


def _valid_csr(A):
    assert np.all(np.diff(A.indptr) >= 0)
    for i in range(A.shape[0]):
        cols = A.indices[A.indptr[i]:A.indptr[i + 1]]
        assert np.all(np.diff(cols) > 0)
        assert np.all((cols >= 0) & (cols < A.shape[1]))
    assert np.all(A.data != 0)


def test_integer_spgemm_kg_is_empty(disc2):
    KG = spgemm(disc2.inc.K, disc2.inc.G, integer=True)
    assert KG.nnz == 0 and KG.dtype == np.int64
    assert spgemm(disc2.inc.D, disc2.inc.K, integer=True).nnz == 0


def test_transpose_involution(rng):
    A = sp.random(30, 17, density=0.2, random_state=3, format="csr")
    T = transpose(transpose(A))
    assert np.array_equal(T.toarray(), A.toarray())
    _valid_csr(T)


def test_spmv_dense_oracle(rng):
    A = sp.random(50, 50, density=0.1, random_state=5, format="csr")
    x = rng.standard_normal(50)
    assert np.max(np.abs(spmv(A, x) - A.toarray() @ x)) <= 1e-14 * max(1, np.abs(A.toarray() @ x).max())


def test_shape_errors():
    A = sp.eye(3, format="csr")
    B = sp.eye(4, format="csr")
    with pytest.raises(ShapeError):
        spmv(A, np.ones(4))
    with pytest.raises(ShapeError):
        spgemm(A, B)
    with pytest.raises(ShapeError):
        add_scaled(A, 1.0, B, 1.0)
    with pytest.raises(ShapeError):
        BlockVector.from_flat(np.ones(5), (1, 2, 3))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**31 - 1))
def test_spgemm_matches_dense(m, k, n, seed):
    A = sp.random(m, k, density=0.3, random_state=seed, format="csr")
    B = sp.random(k, n, density=0.3, random_state=seed + 1, format="csr")
    C = spgemm(A, B)
    _valid_csr(C)
    assert np.allclose(C.toarray(), A.toarray() @ B.toarray(), rtol=1e-14, atol=1e-15)
    S = add_scaled(A, 2.0, A, -2.0)
    assert S.nnz == 0


def test_as_csr_compresses():
    A = sp.coo_matrix(([1.0, 2.0, -3.0, 0.0], ([0, 0, 0, 1], [2, 2, 1, 0])), shape=(2, 3))
    C = as_csr(A)
    _valid_csr(C)
    assert C.nnz == 2 and C[0, 2] == 3.0


def test_blockvector_roundtrip(rng):
    x = rng.standard_normal(10)
    v = BlockVector.from_flat(x, (4, 5, 1))
    assert v.sizes == (4, 5, 1)
    assert np.array_equal(v.flat, x)
    assert np.array_equal(BlockVector.zeros((2, 0, 3)).flat, np.zeros(5))


def test_column_structure(disc2, rng):
    s = build_system(0.1, disc2.forms, disc2.inc)
    nb, ne, npp = s.sizes
    B = rng.standard_normal(nb)
    y = s.apply(BlockVector(B, np.zeros(ne), np.zeros(npp)))
    assert np.allclose(y.B, 20.0 * (disc2.forms.Mb @ B), rtol=1e-14)
    assert np.allclose(y.E, -(disc2.inc.K.T @ (disc2.forms.Mb @ B)), rtol=1e-13, atol=1e-14)
    assert not np.any(y.p)


def test_aux_differs_only_in_b_block(disc2, rng):
    s = build_system(0.1, disc2.forms, disc2.inc)
    a = build_system(0.1, disc2.forms, disc2.inc, aux=True)
    x = rng.standard_normal(s.shape[0])
    d = BlockVector.from_flat(a @ x - s @ x, s.sizes)
    D = disc2.inc.D.astype(float)
    xB = s.split(x)[0]
    assert np.allclose(d.B, D.T @ (disc2.forms.M0 @ (D @ xB)), rtol=1e-12, atol=1e-12)
    assert not np.any(d.E) and not np.any(d.p)


@pytest.mark.parametrize("mesh", [box(1, "none"), box(1), box(2), cavity(4)], ids=["b1none", "b1", "b2", "c4"])
def test_dense_reconstruction(mesh, rng):
    d = discretize(mesh, 0.05)
    tau = 0.2
    s = build_system(tau, d.forms, d.inc, aux=True)
    f, inc = d.forms, d.inc
    Mb, Me, Mp = f.Mb.toarray(), f.Me.toarray(), f.Mp.toarray()
    K, G, D = (M.toarray().astype(float) for M in (inc.K, inc.G, inc.D))
    nb, ne, npp = s.sizes
    A = np.zeros((nb + ne + npp,) * 2)
    A[:nb, :nb] = 2 / tau * Mb + D.T @ f.M0.toarray() @ D
    A[:nb, nb:nb + ne] = Mb @ K
    A[nb:nb + ne, :nb] = -K.T @ Mb
    A[nb:nb + ne, nb:nb + ne] = 2 / tau * Me + f.Z.toarray()
    A[nb:nb + ne, nb + ne:] = Me @ G
    A[nb + ne:, nb:nb + ne] = -G.T @ Me
    A[nb + ne:, nb + ne:] = 2 / tau * Mp
    assert np.max(np.abs(s.to_dense() - A)) <= 1e-12 * np.abs(A).max()
    x = rng.standard_normal(len(A))
    assert np.linalg.norm(s @ x - A @ x) <= 1e-12 * np.linalg.norm(A @ x)


def test_quadratic_form(rng):
    d = discretize(cavity(4), 0.05)
    tau = 0.05
    s = build_system(tau, d.forms, d.inc)
    f = d.forms
    for _ in range(10):
        x = BlockVector.from_flat(rng.standard_normal(s.shape[0]), s.sizes)
        expect = (2 / tau) * (x.B @ f.Mb @ x.B + x.E @ f.Me @ x.E + x.p @ f.Mp @ x.p) + x.E @ f.Z @ x.E
        assert abs(s.quadratic_form(x.flat) - expect) <= 1e-11 * abs(expect)


def test_nonpositive_tau(disc2):
    with pytest.raises(ValueError):
        build_system(0.0, disc2.forms, disc2.inc)
