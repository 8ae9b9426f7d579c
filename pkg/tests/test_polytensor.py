"""Sparse polynomial blocks against dense Kronecker-product oracles."""

import numpy as np
import pytest

from ssmkit.errors import ValidationError
from ssmkit.multiindex import MultiIndexSet, kron_power
from ssmkit.polytensor import PolyCoeffs, compositions, compose, apply_kron_sum


def random_poly(degree, nrows, nvars, nnz, seed, complex_values=False):
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, nrows, nnz)
    positions = rng.integers(0, nvars**degree, nnz)
    values = rng.standard_normal(nnz)
    if complex_values:
        values = values + 1j * rng.standard_normal(nnz)
    return PolyCoeffs(degree, nrows, nvars, rows, positions, values)


def test_duplicates_are_summed():
    fc = PolyCoeffs(2, 2, 2, [0, 0, 1], [3, 3, 0], [1.0, 2.0, 5.0])
    assert fc.nnz == 2
    dense = fc.to_dense()
    assert dense[0, 3] == 3.0 and dense[1, 0] == 5.0


def test_evaluate_matches_dense_kron():
    fc = random_poly(3, 4, 3, 12, seed=0, complex_values=True)
    rng = np.random.default_rng(1)
    z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    assert np.allclose(fc.evaluate(z), fc.to_dense() @ kron_power(z, 3))


def test_from_entries_and_entries_roundtrip():
    entries = [(0, (1, 2), 2.5), (3, (0, 0), -1.0)]
    fc = PolyCoeffs.from_entries(2, 4, 3, entries)
    assert sorted(fc.entries()) == sorted(entries)


def test_from_dense_roundtrip():
    fc = random_poly(2, 3, 4, 9, seed=7)
    back = PolyCoeffs.from_dense(2, 4, fc.to_dense())
    assert np.allclose(back.to_dense(), fc.to_dense())


def test_relabel_shifts_rows_and_scales():
    fc = PolyCoeffs.from_entries(3, 2, 2, [(1, (0, 1, 1), 4.0)])
    lifted = fc.relabel(5, 3, row_offset=2, value_scale=-0.5)
    (row, idx, val), = lifted.entries()
    assert (row, idx, val) == (3, (0, 1, 1), -2.0)
    # index tuples keep their meaning in the larger variable space
    z = np.array([2.0, 3.0, 9.0])
    iset = MultiIndexSet(3, 3)
    assert lifted.to_dense()[3, iset.position((0, 1, 1))] == -2.0


def test_relabel_rejects_shrinking():
    fc = PolyCoeffs.from_entries(2, 2, 3, [(0, (2, 2), 1.0)])
    with pytest.raises(ValidationError):
        fc.relabel(2, 2)


def test_validation_errors():
    with pytest.raises(ValidationError):
        PolyCoeffs(2, 2, 2, [2], [0], [1.0])
    with pytest.raises(ValidationError):
        PolyCoeffs(2, 2, 2, [0], [4], [1.0])
    with pytest.raises(ValidationError):
        PolyCoeffs(2, 2, 2, [0, 1], [0], [1.0])


def test_compositions():
    assert list(compositions(4, 2)) == [(1, 3), (2, 2), (3, 1)]
    assert list(compositions(3, 3)) == [(1, 1, 1)]
    assert list(compositions(2, 3)) == []


def dense_compose_oracle(f_coeffs, w_blocks, order, nvars, nrows):
    """Collect F(W(p)) at one degree by brute-force Kronecker products."""
    out = np.zeros((nrows, nvars**order), dtype=complex)
    for fj in f_coeffs:
        j = fj.degree
        for q in compositions(order, j):
            big = w_blocks[q[0]]
            for part in q[1:]:
                big = np.einsum("ax,by->abxy", big, w_blocks[part]).reshape(
                    big.shape[0] * w_blocks[part].shape[0], -1)
            out += fj.to_dense() @ big
    return out


def test_compose_matches_dense_oracle():
    nvars, nstates = 2, 4
    rng = np.random.default_rng(42)
    w_blocks = {q: rng.standard_normal((nstates, nvars**q))
                + 1j * rng.standard_normal((nstates, nvars**q))
                for q in (1, 2, 3)}
    f_coeffs = [random_poly(2, nstates, nstates, 10, seed=2, complex_values=True),
                random_poly(3, nstates, nstates, 10, seed=3, complex_values=True)]
    for order in (2, 3, 4):
        got = compose(f_coeffs, w_blocks, order, nvars)
        want = dense_compose_oracle(f_coeffs, w_blocks, order, nvars, nstates)
        assert np.allclose(got, want)


def test_compose_value_check():
    # scalar sanity: F(w) = w^2 with w(p) = p + p^2 gives
    # (w(p))^2 = p^2 + 2 p^3 + p^4
    f = [PolyCoeffs.from_entries(2, 1, 1, [(0, (0, 0), 1.0)])]
    w = {1: np.array([[1.0]]), 2: np.array([[1.0]]), 3: np.array([[0.0]])}
    assert compose(f, w, 2, 1) == pytest.approx(1.0)
    assert compose(f, w, 3, 1) == pytest.approx(2.0)
    assert compose(f, w, 4, 1) == pytest.approx(1.0)


def test_compose_needs_nrows_for_linear_systems():
    with pytest.raises(ValidationError):
        compose([], {1: np.eye(2)}, 2, 2)
    assert np.allclose(compose([], {1: np.eye(2)}, 2, 2, nrows=3), 0.0)


def dense_kron_sum_operator(r_block, j, nvars):
    """The operator sum_k I^(x)(k-1) (x) R (x) I^(x)(j-k), materialized."""
    m = nvars
    r_order = r_block.shape[1]
    out = None
    for k in range(j):
        term = np.eye(1)
        for slot in range(j):
            term = np.kron(term, r_block if slot == k else np.eye(m))
        out = term if out is None else out + term
    return out


def test_apply_kron_sum_matches_dense_operator():
    rng = np.random.default_rng(9)
    m, n = 2, 3
    for order, j in [(3, 2), (4, 2), (4, 3), (5, 3)]:
        r_order = order - j + 1
        R = rng.standard_normal((m, m**r_order)) \
            + 1j * rng.standard_normal((m, m**r_order))
        W = rng.standard_normal((n, m**j)) + 1j * rng.standard_normal((n, m**j))
        got = apply_kron_sum(R, W, order, j, m)
        want = W @ dense_kron_sum_operator(R, j, m)
        assert np.allclose(got, want)


def test_apply_kron_sum_shape_check():
    with pytest.raises(ValidationError):
        apply_kron_sum(np.zeros((2, 2)), np.zeros((3, 4)), 4, 2, 2)
