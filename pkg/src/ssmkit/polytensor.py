"""
Sparse homogeneous polynomial tensors in Kronecker-power coordinates.

A degree-``k`` map ``F_k`` from ``m`` variables to ``nrows`` outputs is
a ``nrows x m**k`` matrix acting on the Kronecker power ``z^(x)k``. The
entries are kept as coordinate triplets (row, position, value) with the
lexicographic position convention of :mod:`ssmkit.multiindex`. No
symmetrization is imposed, so raw and symmetrized tensors are both
representable; only the symmetrized part matters when the polynomial is
evaluated, since permuted index tuples multiply the same monomial.

The order-collection helpers at the bottom (``compose``,
``apply_kron_sum``) are the kernels of the invariance-equation solver
and work on dense ``(nrows, m**i)`` coefficient blocks, which is the
cheap representation at the small numbers of master variables these
expansions use.
"""

import itertools

import numpy as np

from .errors import ValidationError
from .multiindex import MultiIndexSet, decode_positions, encode_positions

__all__ = [
    "PolyCoeffs", "compositions", "compose", "apply_kron_sum",
]


class PolyCoeffs:
    """
    Coefficients of one homogeneous degree-``degree`` polynomial map.

    Parameters
    ----------
    degree : int
        Polynomial degree k (number of index factors per entry).
    nrows : int
        Number of output rows.
    nvars : int
        Number of input variables m.
    rows, positions, values : array_like
        Coordinate data. ``positions`` are lexicographic positions into
        the degree-k index set over m variables; duplicate
        (row, position) pairs are summed. Values may be real or complex.

    Notes
    -----
    ``factors`` (shape ``(degree, nnz)``) caches the decoded index
    tuples so evaluation is a plain gather-product-scatter.
    """

    def __init__(self, degree, nrows, nvars, rows, positions, values):
        iset = MultiIndexSet(degree, nvars)
        rows = np.asarray(rows, dtype=np.int64)
        positions = np.asarray(positions, dtype=np.int64)
        values = np.asarray(values)
        if not (rows.shape == positions.shape == values.shape) or rows.ndim != 1:
            raise ValidationError("rows, positions, values must be equal-length 1d arrays")
        if rows.size and (rows.min() < 0 or rows.max() >= nrows):
            raise ValidationError("row index out of range 0..%d" % (nrows - 1))
        if positions.size and (positions.min() < 0 or positions.max() >= len(iset)):
            raise ValidationError("position out of range for degree %d over %d vars"
                                  % (degree, nvars))
        # sum duplicates and store in deterministic (row, position) order
        if rows.size:
            key = rows * len(iset) + positions
            order = np.argsort(key, kind="stable")
            key, rows, positions, values = key[order], rows[order], positions[order], values[order]
            uniq, inverse = np.unique(key, return_inverse=True)
            summed = np.zeros(uniq.size, dtype=np.result_type(values, np.float64))
            np.add.at(summed, inverse, values)
            rows = (uniq // len(iset)).astype(np.int64)
            positions = (uniq % len(iset)).astype(np.int64)
            values = summed
        self.degree = degree
        self.nrows = nrows
        self.nvars = nvars
        self.rows = rows
        self.positions = positions
        self.values = values
        self.factors = decode_positions(positions, degree, nvars)

    @classmethod
    def from_entries(cls, degree, nrows, nvars, entries):
        """
        Build from an iterable of ``(row, index_tuple, value)`` triples
        with 0-based rows and index tuples.
        """
        iset = MultiIndexSet(degree, nvars)
        rows, positions, values = [], [], []
        for row, idx, val in entries:
            rows.append(row)
            positions.append(iset.position(idx))
            values.append(val)
        return cls(degree, nrows, nvars, rows, positions, values)

    @property
    def nnz(self):
        return self.rows.size

    def entries(self):
        """Yield ``(row, index_tuple, value)`` triples in storage order."""
        iset = MultiIndexSet(self.degree, self.nvars)
        for r, p, v in zip(self.rows, self.positions, self.values):
            yield int(r), iset.index_tuple(int(p)), v

    def to_dense(self):
        """Dense ``(nrows, nvars**degree)`` coefficient matrix."""
        out = np.zeros((self.nrows, self.nvars**self.degree),
                       dtype=np.result_type(self.values, np.float64))
        np.add.at(out, (self.rows, self.positions), self.values)
        return out

    @classmethod
    def from_dense(cls, degree, nvars, dense, tol=0.0):
        """Collect the nonzero entries of a dense coefficient block."""
        dense = np.asarray(dense)
        mask = np.abs(dense) > tol
        rows, positions = np.nonzero(mask)
        return cls(degree, dense.shape[0], nvars, rows, positions, dense[mask])

    def evaluate(self, z):
        """
        Evaluate the polynomial at one state ``z`` (length ``nvars``).

        Returns a length-``nrows`` vector. Vectorized over the stored
        entries, so repeated calls inside integrators stay cheap.
        """
        z = np.asarray(z)
        prod = self.values * z[self.factors[0]]
        for axis in range(1, self.degree):
            prod = prod * z[self.factors[axis]]
        out = np.zeros(self.nrows, dtype=np.result_type(prod, np.float64))
        np.add.at(out, self.rows, prod)
        return out

    def relabel(self, nrows, nvars, row_offset=0, value_scale=1.0):
        """
        Re-embed into a larger space: same index tuples over ``nvars``
        variables (entries must already fit), rows shifted by
        ``row_offset`` and values scaled. Used to lift second-order
        nonlinearities into first-order form.
        """
        if self.nvars > nvars:
            raise ValidationError("cannot shrink variable count in relabel")
        positions = encode_positions(self.factors, nvars)
        return PolyCoeffs(self.degree, nrows, nvars,
                          self.rows + row_offset, positions,
                          self.values * value_scale)

    def max_variable(self):
        """Largest variable index actually used (or -1 if empty)."""
        return int(self.factors.max()) if self.nnz else -1

    def __repr__(self):
        return ("PolyCoeffs(degree=%d, nrows=%d, nvars=%d, nnz=%d)"
                % (self.degree, self.nrows, self.nvars, self.nnz))


def compositions(total, parts):
    """
    All ordered tuples of ``parts`` positive integers summing to ``total``.

    >>> list(compositions(4, 2))
    [(1, 3), (2, 2), (3, 1)]
    """
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def _row_kron(blocks):
    """Row-wise Kronecker product of 2d blocks with equal row counts."""
    out = blocks[0]
    for b in blocks[1:]:
        out = (out[:, :, None] * b[:, None, :]).reshape(out.shape[0], -1)
    return out


def compose(f_coeffs, w_blocks, order, nvars, nrows=None):
    """
    Degree-``order`` coefficients of the composition ``F(W(p))``.

    Parameters
    ----------
    f_coeffs : list of PolyCoeffs
        The homogeneous pieces of F (degrees >= 2, any order).
    w_blocks : dict of int -> ndarray
        Dense coefficient blocks of W: ``w_blocks[q]`` has shape
        ``(n_states, nvars**q)``. Orders ``1 .. order-1`` must be
        present; higher orders are not touched.
    order : int
        The collected degree i (>= 2).
    nvars : int
        Number of manifold variables m.
    nrows : int, optional
        Output row count. Defaults to the row count of the F pieces;
        must be given when ``f_coeffs`` is empty (linear system).

    Returns
    -------
    ndarray
        Dense ``(nrows, nvars**order)`` block.

    Notes
    -----
    The collected term is ``sum_j F_j sum_{|q|=order} W_{q_1} (x) ...
    (x) W_{q_j}`` over ordered positive integer compositions q. Only the
    rows of the W blocks selected by the sparse F entries enter, so each
    (F_j, q) pair costs ``nnz(F_j) * nvars**order`` multiplies.
    """
    for q in range(1, order):
        if q not in w_blocks:
            raise ValidationError("compose at order %d needs W up to order %d; "
                                  "missing order %d" % (order, order - 1, q))
    if nrows is None:
        if not f_coeffs:
            raise ValidationError("compose needs nrows when f_coeffs is empty")
        nrows = f_coeffs[0].nrows
    out = np.zeros((nrows, nvars**order), dtype=complex)
    for fj in f_coeffs:
        j = fj.degree
        if j > order or fj.nnz == 0:
            continue
        for q in compositions(order, j):
            blocks = [w_blocks[q[slot]][fj.factors[slot]] for slot in range(j)]
            contrib = fj.values[:, None] * _row_kron(blocks)
            np.add.at(out, fj.rows, contrib)
    return out


def apply_kron_sum(r_block, w_block, order, w_order, nvars):
    """
    Apply the Kronecker-sum factor to a coefficient block:
    ``W_j * sum_{k=1..j} I^(x)(k-1) (x) R_{i-j+1} (x) I^(x)(j-k)``
    without materializing the ``nvars**j x nvars**i`` operator.

    Parameters
    ----------
    r_block : ndarray
        Dense ``(nvars, nvars**(order - w_order + 1))`` reduced-dynamics
        block R of order ``order - w_order + 1``.
    w_block : ndarray
        Dense ``(n_states, nvars**w_order)`` manifold block W_j.
    order : int
        Target collected order i.
    w_order : int
        The order j of ``w_block`` (number of insertion slots).
    nvars : int
        Number of manifold variables m.

    Returns
    -------
    ndarray
        Dense ``(n_states, nvars**order)`` contribution.
    """
    m = nvars
    j = w_order
    r_order = order - j + 1
    if r_block.shape != (m, m**r_order):
        raise ValidationError("R block has shape %r, expected %r"
                              % (r_block.shape, (m, m**r_order)))
    n = w_block.shape[0]
    out = np.zeros((n, m**order), dtype=np.result_type(r_block, w_block, complex))
    for k in range(j):
        wt = w_block.reshape(n, m**k, m, m**(j - k - 1))
        # contract the slot-k variable of W with the row index of R
        term = np.einsum("npsq,sm->npmq", wt, r_block.reshape(m, m**r_order))
        out += term.reshape(n, m**order)
    return out
