"""
Master spectral subspace extraction.

Eigenpairs of the pencil ``(A, B)`` come normalized so that the left
and right families are biorthogonal through B::

    A v_i = lambda_i B v_i,   u_i^H A = lambda_i u_i^H B,   u_i^H B v_j = delta_ij

Repeated eigenvalues are handled as clusters: a cluster's Gram matrix
``G = U~^H B V~`` is inverted to restore biorthogonality, and a singular
G flags a defective (non-semisimple) eigenvalue, which is rejected.
When A and B are both symmetric the left family is the conjugate of the
right one up to that same Gram correction, so no transposed solve is
needed.

Each right eigenvector is scaled to unit norm with its largest entry
rotated onto the positive real axis, and complex conjugate pairs are
stored as exact conjugates with the positive-frequency member first.
"""

import numbers

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError, ValidationError
from .model import as_first_order

__all__ = ["MasterSubspace", "master_spectrum", "check_normalization"]

CLUSTER_RTOL = 1e-8
RESIDUAL_RTOL = 1e-9


class MasterSubspace:
    """
    A selected invariant subspace of the pencil.

    Attributes
    ----------
    lambdas : (M,) complex ndarray
        Master eigenvalues, conjugate pairs adjacent (Im > 0 first).
    V, U : (N, M) complex ndarray
        Right and left eigenvectors with ``U^H B V = I``.
    pairing : (M,) int ndarray
        ``pairing[i]`` is the index of the conjugate partner of mode i
        (itself for a real eigenvalue).
    outer_lambdas : (n_outer,) complex ndarray
        The eigenvalues immediately following the selection in the same
        ordering, kept for resonance screening.
    diagnostics : dict
        Residual norms and bookkeeping from the solve.
    """

    def __init__(self, lambdas, V, U, pairing, outer_lambdas, diagnostics=None):
        self.lambdas = np.asarray(lambdas, dtype=complex)
        self.V = np.asarray(V, dtype=complex)
        self.U = np.asarray(U, dtype=complex)
        self.pairing = np.asarray(pairing, dtype=int)
        self.outer_lambdas = np.asarray(outer_lambdas, dtype=complex)
        self.diagnostics = dict(diagnostics or {})

    @property
    def dim(self):
        return self.lambdas.size

    def pair_representatives(self):
        """Indices of one member per pair (Im >= 0), plus real modes."""
        return [i for i in range(self.dim)
                if self.pairing[i] == i or self.lambdas[i].imag > 0]

    def to_dict(self):
        """JSON-ready description of the subspace."""
        return {
            "lambdas": _clist(self.lambdas),
            "outer_lambdas": _clist(self.outer_lambdas),
            "pairing": self.pairing.tolist(),
            "V": {"real": self.V.real.tolist(), "imag": self.V.imag.tolist()},
            "U": {"real": self.U.real.tolist(), "imag": self.U.imag.tolist()},
        }

    @classmethod
    def from_dict(cls, data):
        lambdas = _carr(data["lambdas"])
        V = np.asarray(data["V"]["real"]) + 1j * np.asarray(data["V"]["imag"])
        U = np.asarray(data["U"]["real"]) + 1j * np.asarray(data["U"]["imag"])
        return cls(lambdas, V, U, data["pairing"], _carr(data["outer_lambdas"]))

    def __repr__(self):
        return "MasterSubspace(dim=%d, lambdas=%s)" % (
            self.dim, np.array2string(self.lambdas, precision=4))


def _clist(arr):
    return {"real": np.asarray(arr).real.tolist(),
            "imag": np.asarray(arr).imag.tolist()}


def _carr(data):
    return np.asarray(data["real"], dtype=float) + 1j * np.asarray(data["imag"])


def _resolve_select(select):
    """Normalize the selection argument to a canonical dict."""
    if isinstance(select, numbers.Integral):
        return {"mode": "smallest", "count": int(select)}
    if isinstance(select, (list, tuple)) and select and all(
            isinstance(i, numbers.Integral) for i in select):
        return {"mode": "indices", "indices": [int(i) for i in select]}
    if isinstance(select, dict):
        mode = select.get("mode", "smallest")
        if mode not in ("smallest", "slowest", "indices", "pair"):
            raise ValidationError("unknown selection mode %r" % mode)
        out = {"mode": mode}
        if mode == "indices":
            out["indices"] = [int(i) for i in select["indices"]]
        elif mode == "pair":
            out["pair"] = int(select.get("pair", 1))
        else:
            out["count"] = int(select.get("count", 2))
        return out
    raise ValidationError("cannot interpret selection %r" % (select,))


def _enforce_conjugation(w, VR, UL, scale):
    """Overwrite near-conjugate eigenpairs with exact conjugates."""
    tol = 1e-12 * max(scale, 1.0)
    used = np.zeros(w.size, dtype=bool)
    partner = np.arange(w.size)
    for i in np.argsort(-w.imag):
        if used[i] or w[i].imag <= tol:
            continue
        cands = [j for j in range(w.size)
                 if not used[j] and j != i and w[j].imag < -0.5 * tol]
        if not cands:
            continue
        j = min(cands, key=lambda j: abs(w[j] - w[i].conjugate()))
        if abs(w[j] - w[i].conjugate()) > 1e-6 * max(scale, 1.0):
            continue
        w[j] = w[i].conjugate()
        VR[:, j] = VR[:, i].conjugate()
        if UL is not None:
            UL[:, j] = UL[:, i].conjugate()
        used[i] = used[j] = True
        partner[i], partner[j] = j, i
    return partner


def _order_with_vectors(w, VR):
    """Canonical order; ties inside eigenvalue clusters broken by the
    position of each eigenvector's largest entry."""
    tie = np.array([int(np.argmax(np.abs(VR[:, i]))) for i in range(w.size)],
                   dtype=float)
    return np.lexsort((tie, -np.sign(w.imag), w.real, np.abs(w)))


def _select_indices(w_sorted, spec, scale):
    m = len(w_sorted)
    mode = spec["mode"]
    if mode == "indices":
        idx = spec["indices"]
        for i in idx:
            if not 0 <= i < m:
                raise ValidationError(
                    "selection index %d outside 0..%d" % (i, m - 1))
        chosen = list(dict.fromkeys(idx))
    elif mode == "smallest":
        chosen = list(range(min(spec["count"], m)))
    elif mode == "slowest":
        order = np.lexsort((np.abs(w_sorted), -np.sign(w_sorted.imag),
                            -w_sorted.real))
        chosen = [int(i) for i in order[:spec["count"]]]
    else:  # pair
        tol = 1e-12 * max(scale, 1.0)
        pairs = [i for i in range(m) if w_sorted[i].imag > tol]
        want = spec["pair"]
        if not 1 <= want <= len(pairs):
            raise ValidationError(
                "requested pair %d but only %d conjugate pairs available"
                % (want, len(pairs)))
        i = pairs[want - 1]
        chosen = [i]
    # close the selection under conjugation
    closed = list(chosen)
    for i in chosen:
        lam = w_sorted[i]
        if abs(lam.imag) > 1e-12 * max(scale, 1.0):
            gaps = np.abs(w_sorted - lam.conjugate())
            j = int(np.argmin(gaps))
            if gaps[j] > 1e-6 * max(scale, 1.0):
                raise ValidationError(
                    "conjugate partner of selected eigenvalue %s is not in "
                    "the computed set; enlarge the computation" % lam)
            if j not in closed:
                closed.append(j)
    closed.sort()
    return closed


def _dense_eigen(A, B, symmetric):
    if symmetric:
        w, VR = la.eig(A, B, right=True)
        UL = None
    else:
        w, UL, VR = la.eig(A, B, left=True, right=True)
    bad = ~np.isfinite(w)
    if bad.any():
        raise NumericalError(
            "pencil has %d infinite or undefined eigenvalues; "
            "B may be singular" % bad.sum())
    # lapack hands back real vectors when every eigenvalue is real, but the
    # canonical scaling below assigns complex values into the columns
    VR = VR.astype(complex)
    if UL is not None:
        UL = UL.astype(complex)
    return w, VR, UL


def _shift_invert_eigen(A, B, k, shift, symmetric):
    A = sp.csc_matrix(A)
    B = sp.csc_matrix(B)
    sigma = complex(shift)
    try:
        lu = spla.splu((A - sigma * B).astype(complex))
    except RuntimeError as exc:
        raise NumericalError(
            "factorization of (A - sigma B) failed at sigma=%s: %s; "
            "pick a shift away from the spectrum" % (sigma, exc)) from exc
    n = A.shape[0]
    op = spla.LinearOperator((n, n), matvec=lambda x: lu.solve(B @ x),
                             dtype=complex)
    nu, VR = spla.eigs(op, k=k)
    w = sigma + 1.0 / nu
    UL = None
    if not symmetric:
        lu_t = spla.splu((A - sigma * B).T.tocsc().astype(complex))
        op_t = spla.LinearOperator((n, n), matvec=lambda x: lu_t.solve(B.T @ x),
                                   dtype=complex)
        nu_l, YL = spla.eigs(op_t, k=k)
        w_l = sigma + 1.0 / nu_l
        # match the left set to the right set by eigenvalue
        UL = np.empty_like(YL)
        taken = np.zeros(k, dtype=bool)
        scale = max(np.abs(w).max(), 1.0)
        for i in range(k):
            cands = [j for j in range(k) if not taken[j]]
            j = min(cands, key=lambda j: abs(w_l[j] - w[i]))
            if abs(w_l[j] - w[i]) > 1e-6 * scale:
                raise NumericalError(
                    "left and right shift-invert eigenvalues do not match "
                    "(%s vs %s); increase k or move the shift"
                    % (w_l[j], w[i]))
            taken[j] = True
            UL[:, i] = YL[:, j].conjugate()

    # the spectrum of a real pencil is symmetric about the real axis,
    # but a complex shift converges to the half plane nearest sigma;
    # mirror the missing partners so selections can close under
    # conjugation
    scale = max(float(np.abs(w).max()), 1.0)
    missing = [i for i in range(w.size)
               if abs(w[i].imag) > 1e-12 * scale
               and np.abs(w - w[i].conjugate()).min() > 1e-6 * scale]
    if missing:
        w = np.concatenate([w, w[missing].conjugate()])
        VR = np.hstack([VR, VR[:, missing].conjugate()])
        if UL is not None:
            UL = np.hstack([UL, UL[:, missing].conjugate()])
    return w, VR, UL


def master_spectrum(system, select=2, n_outer=10, method="auto", shift=0.0):
    """
    Compute the master eigenpairs of a first-order system.

    Parameters
    ----------
    system : FirstOrderSystem
    select : int, list of int, or dict
        Which eigenvalues span the subspace. An int m takes the m
        smallest in magnitude; a list gives 0-based positions into the
        magnitude-sorted spectrum; dicts choose explicitly:
        ``{"mode": "smallest"|"slowest", "count": m}``,
        ``{"mode": "indices", "indices": [...]}`` or
        ``{"mode": "pair", "pair": k}`` for the k-th conjugate pair
        (1-based, sorted by magnitude). Selections are closed under
        conjugation automatically.
    n_outer : int, optional
        How many of the following eigenvalues to retain for resonance
        screening.
    method : {"auto", "dense", "shift-invert"}, optional
        "auto" uses the dense QZ solver up to N = 600 and shift-invert
        Arnoldi beyond. Shift-invert computes the eigenvalues nearest
        ``shift``; the selection then applies within that computed set.
    shift : complex, optional
        Target for shift-invert. Must not be an eigenvalue.

    Returns
    -------
    MasterSubspace

    Raises
    ------
    ValidationError
        For defective eigenvalues or a selection that splits a cluster
        of equal eigenvalues.
    NumericalError
        When residuals or factorizations fail.
    """
    spec = _resolve_select(select)
    system = as_first_order(system)
    N = system.N
    if method not in ("auto", "dense", "shift-invert"):
        raise ValidationError("method must be auto, dense or shift-invert")
    dense = method == "dense" or (method == "auto" and N <= 600)

    if dense:
        A, B = system.dense_pencil()
        w, VR, UL = _dense_eigen(A, B, system.symmetric)
    else:
        if spec["mode"] == "indices":
            k_need = max(spec["indices"]) + 1 + n_outer
        elif spec["mode"] == "pair":
            k_need = 2 * spec["pair"] + 2 + n_outer
        else:
            k_need = spec["count"] + n_outer
        k = min(max(k_need, 6), N - 2)
        w, VR, UL = _shift_invert_eigen(system.A, system.B, k, shift,
                                        system.symmetric)
        A, B = system.A, system.B

    scale = float(np.abs(w).max()) if w.size else 1.0
    partner = _enforce_conjugation(w, VR, UL, scale)
    order = _order_with_vectors(w, VR)
    w = w[order]
    VR = VR[:, order]
    if UL is not None:
        UL = UL[:, order]

    chosen = _select_indices(w, spec, scale)
    sel = np.zeros(w.size, dtype=bool)
    sel[chosen] = True

    # clusters of numerically equal eigenvalues must not straddle the cut
    ctol = CLUSTER_RTOL * max(scale, 1.0)
    cluster_id = np.zeros(w.size, dtype=int)
    cid = 0
    for i in range(1, w.size):
        if abs(w[i] - w[i - 1]) > ctol:
            cid += 1
        cluster_id[i] = cid
    for c in np.unique(cluster_id):
        members = np.nonzero(cluster_id == c)[0]
        inside = sel[members]
        if inside.any() and not inside.all():
            raise ValidationError(
                "selection splits a cluster of equal eigenvalues near %s; "
                "select the whole cluster" % w[members[0]])

    lambdas = w[chosen]
    V = VR[:, chosen].copy()
    if system.symmetric:
        Ut = V.conjugate().copy()
    else:
        Ut = UL[:, chosen].copy()

    # cluster-wise Gram correction restores U^H B V = I. The unit-norm
    # eigenvectors of a semisimple cluster give a Gram on the scale of
    # ||B||; a Gram that is small against that scale means the cluster
    # has too few independent eigenvectors.
    BV = B @ V
    B_fro = (spla.norm(B) if sp.issparse(B) else la.norm(B))
    sel_cluster = cluster_id[chosen]
    for c in np.unique(sel_cluster):
        cols = np.nonzero(sel_cluster == c)[0]
        G = Ut[:, cols].conj().T @ BV[:, cols]
        svals = la.svdvals(G)
        if svals[-1] <= 1e-10 * max(svals[0], B_fro, 1e-300):
            raise ValidationError(
                "eigenvalue %s is defective (non-semisimple); no "
                "biorthogonal eigenbasis exists" % lambdas[cols[0]])
        Ut[:, cols] = Ut[:, cols] @ la.inv(G).conj().T

    # canonical scaling, conjugate partners mirrored exactly
    sel_partner = np.arange(len(chosen))
    pos_of = {g: i for i, g in enumerate(chosen)}
    for i, g in enumerate(chosen):
        p = partner[g]
        if p != g and p in pos_of:
            sel_partner[i] = pos_of[p]
    done = np.zeros(len(chosen), dtype=bool)
    for i in range(len(chosen)):
        if done[i]:
            continue
        j = sel_partner[i]
        rep = i if (i == j or lambdas[i].imag > 0) else j
        oth = j if rep == i else i
        v = V[:, rep]
        nrm = la.norm(v)
        if nrm == 0:
            raise NumericalError("zero eigenvector returned by the solver")
        top = np.argmax(np.abs(v))
        beta = 1.0 / (nrm * np.exp(1j * np.angle(v[top])))
        V[:, rep] = v * beta
        Ut[:, rep] = Ut[:, rep] / np.conj(beta)
        done[rep] = True
        if oth != rep:
            lambdas[oth] = lambdas[rep].conjugate()
            V[:, oth] = V[:, rep].conjugate()
            Ut[:, oth] = Ut[:, rep].conjugate()
            done[oth] = True

    # residual check against the Frobenius scale of A
    A_fro = (spla.norm(A) if sp.issparse(A) else la.norm(A))
    res_r = res_l = 0.0
    for i in range(len(chosen)):
        rv = (A @ V[:, i]) - lambdas[i] * (B @ V[:, i])
        res_r = max(res_r, la.norm(rv) / max(la.norm(V[:, i]), 1e-300))
        ru = (A.conj().T @ Ut[:, i]) - np.conj(lambdas[i]) * (B.conj().T @ Ut[:, i])
        res_l = max(res_l, la.norm(ru) / max(la.norm(Ut[:, i]), 1e-300))
    if max(res_r, res_l) > RESIDUAL_RTOL * max(A_fro, 1e-300):
        raise NumericalError(
            "eigenpair residual %.3e exceeds %.1e * ||A||_F; the pencil "
            "may be ill conditioned" % (max(res_r, res_l), RESIDUAL_RTOL))

    remaining = [i for i in range(w.size) if i not in set(chosen)]
    if spec["mode"] == "slowest":
        remaining.sort(key=lambda i: (-w[i].real, abs(w[i].imag)))
    outer = w[remaining[:n_outer]] if remaining else np.zeros(0, complex)

    diag = {
        "method": "dense" if dense else "shift-invert",
        "selection": spec,
        "residual_right": res_r,
        "residual_left": res_l,
        "normalization_error": check_norm_arrays(Ut, B, V),
    }
    return MasterSubspace(lambdas, V, Ut, sel_partner, outer, diag)


def check_norm_arrays(U, B, V):
    """Max-abs deviation of U^H B V from the identity."""
    G = U.conj().T @ (B @ V)
    return float(np.abs(G - np.eye(G.shape[0])).max())


def check_normalization(master, system):
    """Max-abs deviation of ``U^H B V - I`` for a computed subspace."""
    return check_norm_arrays(master.U, system.B, master.V)
