"""
Invariant manifold expansion by order-by-order solves.

The manifold ``z = W(p)`` and reduced dynamics ``p' = R(p)`` are
homogeneous polynomial series determined by the invariance equation

    B . DW(p) . R(p) = A . W(p) + F(W(p)).

Order 1 is the master eigenpair data: W_1 = V, R_1 = diag(lambda). At
each order i >= 2 the unknowns decouple across monomials: for monomial
position l with exponent tuple (l_1, .., l_i) the coefficient column
solves

    (lam_l B - A) w_l = c_l - B V r_l,       lam_l = sum_k lambda_{l_k}

where c_l collects the nonlinearity composed with lower orders minus
the lower-order cross terms B W_j R_(i-j+1) lifted to order i. The
reduced-dynamics column r_l is the style decision:

* "normal-form": r_l is zero except at modes flagged as near-resonant
  with lam_l, where r_jl = u_j^H c_l removes the unsolvable component.
* "graph": r_l = U^H c_l entirely, which keeps the parametrization a
  graph over the master modes.
* "per-mode": graph rows for a chosen subset of modes, normal-form
  behaviour for the rest.

Monomials whose exponent tuples are conjugate images of each other are
solved once and mirrored, so coefficient arrays are exactly conjugate
symmetric and evaluations at conjugate-symmetric points are exactly
real.
"""

import json
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError, OuterResonanceError, ValidationError
from .model import as_first_order
from .multiindex import MultiIndexSet, conjugate_permutation
from .polytensor import apply_kron_sum, compose
from .spectrum import MasterSubspace

__all__ = [
    "ResonanceReport", "classify_resonances", "solve_order",
    "compute_manifold", "ManifoldExpansion",
]

STYLES = ("normal-form", "graph", "per-mode")
RCOND_SINGULAR = 1e-12
LAMBDA_MERGE_RTOL = 1e-14


class ResonanceReport:
    """
    Near-resonances of eigenvalue sums against master and outer modes.

    Attributes
    ----------
    inner : dict
        order -> list of (position, exponent tuple, mode index).
    outer : dict
        order -> list of (position, exponent tuple, outer lambda).
    params : dict
        The tolerance parameters that produced the report.
    """

    def __init__(self, inner, outer, params):
        self.inner = inner
        self.outer = outer
        self.params = params

    def inner_at(self, order):
        """Set of (position, mode) pairs flagged at one order."""
        return {(pos, j) for pos, _, j in self.inner.get(order, [])}

    def outer_at(self, order):
        return self.outer.get(order, [])

    def has_outer(self):
        return any(self.outer.values())

    def to_dict(self):
        return {
            "params": self.params,
            "inner": {str(o): [[pos, list(t), j] for pos, t, j in flags]
                      for o, flags in self.inner.items()},
            "outer": {str(o): [[pos, list(t), lam.real, lam.imag]
                               for pos, t, lam in flags]
                      for o, flags in self.outer.items()},
        }

    def describe(self):
        lines = []
        for o in sorted(self.inner):
            for pos, t, j in self.inner[o]:
                lines.append(
                    "order %d: monomial %s resonates with master mode %d"
                    % (o, "".join("p%d" % (k + 1) for k in t), j + 1))
        for o in sorted(self.outer):
            for pos, t, lam in self.outer[o]:
                lines.append(
                    "order %d: monomial %s resonates with outer eigenvalue %s"
                    % (o, "".join("p%d" % (k + 1) for k in t), lam))
        return lines


def classify_resonances(master, order, tol=None):
    """
    Flag near-resonant eigenvalue sums up to a given order.

    A monomial eigenvalue ``lam_l`` is flagged against an eigenvalue
    ``mu`` when both::

        |Im lam_l - Im mu| <= tol_abs + rel * |mu|
        |Re lam_l - Re mu| <= tol_abs + rel * |mu| + slack * (i+1) * max|Re lambda_master|

    hold at order i. The real-part slack accounts for damping: sums of
    lightly damped eigenvalues drift off the imaginary axis linearly in
    the order, and resonance is a statement about frequencies.

    Parameters
    ----------
    master : MasterSubspace
    order : int
        Highest order screened (inner modes from 2, outer from 2).
    tol : dict, optional
        Keys "rel" (default 1e-3), "slack" (default 1.0) and "abs"
        (default 1e-8 times the largest screened eigenvalue magnitude).

    Returns
    -------
    ResonanceReport
    """
    tol = dict(tol or {})
    rel = float(tol.get("rel", 1e-3))
    slack = float(tol.get("slack", 1.0))
    lam = master.lambdas
    outer = master.outer_lambdas
    mags = np.concatenate([np.abs(lam), np.abs(outer)]) if outer.size else np.abs(lam)
    scale = float(mags.max()) if mags.size else 1.0
    tol_abs = float(tol["abs"]) if tol.get("abs") is not None else 1e-8 * max(scale, 1e-300)
    re_span = float(np.abs(lam.real).max()) if lam.size else 0.0

    inner, outer_flags = {}, {}
    for i in range(2, order + 1):
        mis = MultiIndexSet(i, lam.size)
        flags_i, flags_o = [], []
        for pos, t in enumerate(mis.tuples()):
            lam_l = complex(sum(lam[k] for k in t))
            re_slack = slack * (i + 1) * re_span
            for j, mu in enumerate(lam):
                if (abs(lam_l.imag - mu.imag) <= tol_abs + rel * abs(mu)
                        and abs(lam_l.real - mu.real) <= tol_abs + rel * abs(mu) + re_slack):
                    flags_i.append((pos, t, j))
            for mu in outer:
                if (abs(lam_l.imag - mu.imag) <= tol_abs + rel * abs(mu)
                        and abs(lam_l.real - mu.real) <= tol_abs + rel * abs(mu) + re_slack):
                    flags_o.append((pos, t, complex(mu)))
        if flags_i:
            inner[i] = flags_i
        if flags_o:
            outer_flags[i] = flags_o
    return ResonanceReport(inner, outer_flags,
                           {"rel": rel, "slack": slack, "abs": tol_abs})


def _factor_dense(mat):
    with warnings.catch_warnings():
        # exactly singular blocks are expected at resonances and are routed
        # to the least-squares path via rcond, so the factorization may grumble
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(mat)
    anorm = np.linalg.norm(mat, 1)
    gecon = la.get_lapack_funcs("gecon", (mat,))
    rcond = gecon(lu, anorm)[0] if anorm > 0 else 0.0
    return (lu, piv), float(rcond)


def solve_order(system, master, w_blocks, r_blocks, order, style,
                report, graph_modes=(), threads=1):
    """
    Solve one order of the invariance equation.

    Parameters
    ----------
    system : FirstOrderSystem
    master : MasterSubspace
    w_blocks, r_blocks : dict
        Lower-order coefficient arrays, keyed by degree (1..order-1).
    order : int
        The order to solve (>= 2).
    style : str
        "normal-form", "graph" or "per-mode".
    report : ResonanceReport
        Decides which reduced-dynamics entries are active.
    graph_modes : sequence of int, optional
        Modes given full graph rows under "per-mode".
    threads : int, optional
        Worker threads for the independent eigenvalue-sum blocks.
        Results are assembled by monomial index, so the output does not
        depend on the thread count.

    Returns
    -------
    (W_i, R_i, info) : two complex ndarrays of shapes (N, M**order) and
        (M, M**order), and a diagnostics dict.
    """
    lam = master.lambdas
    M = master.dim
    N = system.N
    A, B = system.A, system.B
    sparse = sp.issparse(A) or sp.issparse(B)
    mis = MultiIndexSet(order, M)
    n_pos = mis.size

    C = compose(system.F_coeffs, w_blocks, order, M, nrows=N)
    for j in range(2, order):
        C -= B @ apply_kron_sum(r_blocks[order - j + 1], w_blocks[j],
                                order, j, M)

    sigma = conjugate_permutation(master.pairing, order)
    flagged = report.inner_at(order)
    if style == "graph":
        def rows_for(pos):
            return range(M)
    elif style == "normal-form":
        def rows_for(pos):
            return [j for (p, j) in flagged if p == pos]
    else:
        fixed = set(int(g) for g in graph_modes)
        def rows_for(pos):
            extra = {j for (p, j) in flagged if p == pos}
            return sorted(fixed | extra)

    W_i = np.zeros((N, n_pos), dtype=complex)
    R_i = np.zeros((M, n_pos), dtype=complex)

    # canonical positions (each conjugate orbit solved once)
    canonical = [pos for pos in range(n_pos) if sigma[pos] >= pos]

    # group by sorted exponent multiset so equal eigenvalue sums share
    # a factorization, then merge near-equal sums across multisets
    groups = {}
    for pos in canonical:
        t = mis.index_tuple(pos)
        key = tuple(sorted(t))
        groups.setdefault(key, []).append(pos)
    lam_of = {key: complex(sum(lam[k] for k in key)) for key in groups}
    scale = max(float(np.abs(lam).max()), 1.0)
    merged = []
    for key in sorted(groups):
        lam_l = lam_of[key]
        for entry in merged:
            if abs(entry["lam"] - lam_l) <= LAMBDA_MERGE_RTOL * scale:
                entry["pos"].extend(groups[key])
                break
        else:
            merged.append({"lam": lam_l, "pos": list(groups[key])})

    V = master.V
    U = master.U
    c_scale = float(np.abs(C).max()) if C.size else 1.0

    prepared = []
    for entry in merged:
        positions = entry["pos"]
        rhs = np.empty((N, len(positions)), dtype=complex)
        for col, pos in enumerate(positions):
            c = C[:, pos]
            r = np.zeros(M, dtype=complex)
            for j in rows_for(pos):
                r[j] = np.vdot(U[:, j], c)
            R_i[:, pos] = r
            rhs[:, col] = c - B @ (V @ r)
        prepared.append((entry["lam"], positions, rhs))

    def solve_block(job):
        lam_l, positions, rhs = job
        if sparse:
            mat = (lam_l * B - A).tocsc()
            try:
                sols = spla.splu(mat.astype(complex)).solve(rhs)
                resid = np.abs(mat @ sols - rhs).max()
                if not np.isfinite(sols).all() or resid > 1e-6 * max(np.abs(rhs).max(), 1.0):
                    raise RuntimeError("inaccurate sparse solve")
                rcond = 1.0
            except RuntimeError:
                rcond = 0.0
                sols = None
        else:
            mat = lam_l * np.asarray(B, dtype=complex) - A
            factor, rcond = _factor_dense(mat)
            sols = la.lu_solve(factor, rhs) if rcond > RCOND_SINGULAR else None
        used_lstsq = sols is None
        if used_lstsq:
            # singular or near-singular block: minimum-norm solution with
            # the master kernel directions projected out through B
            if sp.issparse(mat):
                mat = mat.toarray()
            sols = la.lstsq(mat, rhs, cond=RCOND_SINGULAR,
                            lapack_driver="gelsd")[0]
            near = [k for k in range(M)
                    if abs(lam_l - lam[k]) <= 1e-8 * scale]
            for k in near:
                coeff = U[:, k].conj() @ (B @ sols)
                sols -= np.outer(V[:, k], coeff)
            rnorm = float(np.abs(mat @ sols - rhs).max()) if rhs.size else 0.0
            if rnorm > 1e-6 * max(np.abs(rhs).max(), c_scale, 1.0):
                raise NumericalError(
                    "order-%d block at eigenvalue sum %s is singular and "
                    "inconsistent (residual %.3e); the resonance tolerance "
                    "likely missed a true resonance" % (order, lam_l, rnorm))
        return positions, sols, rcond, used_lstsq

    if threads > 1 and len(prepared) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            results = list(pool.map(solve_block, prepared))
    else:
        results = [solve_block(job) for job in prepared]

    min_rcond = np.inf
    lstsq_cols = 0
    for positions, sols, rcond, used_lstsq in results:
        min_rcond = min(min_rcond, rcond)
        if used_lstsq:
            lstsq_cols += len(positions)
        for col, pos in enumerate(positions):
            W_i[:, pos] = sols[:, col]

    # mirror conjugate positions for exact symmetry
    pairing = master.pairing
    for pos in canonical:
        mir = sigma[pos]
        if mir != pos:
            W_i[:, mir] = W_i[:, pos].conjugate()
            R_i[:, mir] = R_i[pairing, pos].conjugate()

    info = {"order": order, "groups": len(merged),
            "min_rcond": float(min_rcond) if np.isfinite(min_rcond) else None,
            "lstsq_columns": lstsq_cols}
    return W_i, R_i, info


def compute_manifold(system, master, order, style="normal-form",
                     graph_modes=(), tol=None, on_outer=None, threads=1):
    """
    Expand the invariant manifold over a master subspace.

    Parameters
    ----------
    system : FirstOrderSystem
    master : MasterSubspace
    order : int
        Polynomial order of the expansion (>= 1).
    style : {"normal-form", "graph", "per-mode"}, optional
        Parametrization style, see the module docstring.
    graph_modes : sequence of int, optional
        Only for "per-mode": master modes whose reduced-dynamics rows
        are kept full.
    tol : dict, optional
        Resonance tolerance, see classify_resonances.
    on_outer : {"error", "warn"}, optional
        What to do when an outer resonance is flagged. Defaults to
        "error" under "normal-form" (the expansion is invalid there)
        and "warn" otherwise.
    threads : int, optional
        Worker threads for independent blocks inside each order.

    Returns
    -------
    ManifoldExpansion

    Raises
    ------
    OuterResonanceError
        Under on_outer="error" when an eigenvalue sum collides with an
        eigenvalue outside the master set.
    """
    system = as_first_order(system)
    if style not in STYLES:
        raise ValidationError("style must be one of %r" % (STYLES,))
    if order < 1:
        raise ValidationError("order must be >= 1")
    if style == "per-mode":
        for g in graph_modes:
            if not 0 <= int(g) < master.dim:
                raise ValidationError("graph mode %r outside 0..%d"
                                      % (g, master.dim - 1))
    report = classify_resonances(master, order, tol)
    if on_outer is None:
        on_outer = "error" if style == "normal-form" else "warn"
    if on_outer not in ("error", "warn"):
        raise ValidationError("on_outer must be 'error' or 'warn'")
    if report.has_outer():
        lines = [ln for ln in report.describe() if "outer" in ln]
        if on_outer == "error":
            pairs = [(pos, lam) for o in sorted(report.outer)
                     for pos, _, lam in report.outer[o]]
            raise OuterResonanceError(
                "outer resonance obstructs the expansion:\n  "
                + "\n  ".join(lines), pairs=pairs)
        warnings.warn("outer resonance detected; the manifold expansion "
                      "continues but its domain of validity shrinks:\n  "
                      + "\n  ".join(lines))

    M = master.dim
    W = {1: master.V.copy()}
    R = {1: np.diag(master.lambdas).astype(complex)}
    infos = []
    for i in range(2, order + 1):
        W_i, R_i, info = solve_order(system, master, W, R, i, style,
                                     report, graph_modes, threads=threads)
        W[i] = W_i
        R[i] = R_i
        infos.append(info)
    return ManifoldExpansion(system, master, order, style, W, R, report,
                             {"orders": infos})


class ManifoldExpansion:
    """
    Polynomial manifold ``z = W(p)`` with reduced dynamics ``p' = R(p)``.

    W and R are dicts of dense coefficient arrays keyed by degree: W[i]
    has shape (N, M**i) over Kronecker monomial columns, R[i] shape
    (M, M**i). Conjugate-symmetric by construction when the master set
    is closed under conjugation.
    """

    def __init__(self, system, master, order, style, W, R, resonances,
                 diagnostics=None):
        self.system = system
        self.master = master
        self.order = order
        self.style = style
        self.W = W
        self.R = R
        self.resonances = resonances
        self.diagnostics = dict(diagnostics or {})

    @property
    def dim(self):
        return self.master.dim

    @property
    def N(self):
        return self.W[1].shape[0]

    def evaluate(self, p):
        """Embed reduced coordinates: z = sum_i W_i p^(kron i)."""
        p = np.asarray(p, dtype=complex).reshape(-1)
        out = np.zeros(self.N, dtype=complex)
        kp = np.ones(1, dtype=complex)
        for i in range(1, self.order + 1):
            kp = np.kron(kp, p)
            out = out + self.W[i] @ kp
        return out

    def reduced_rhs(self, p):
        """Reduced vector field: p' = sum_i R_i p^(kron i)."""
        p = np.asarray(p, dtype=complex).reshape(-1)
        out = np.zeros(self.dim, dtype=complex)
        kp = np.ones(1, dtype=complex)
        for i in range(1, self.order + 1):
            kp = np.kron(kp, p)
            out = out + self.R[i] @ kp
        return out

    def tangent(self, p):
        """Jacobian dW/dp at p, shape (N, M)."""
        p = np.asarray(p, dtype=complex).reshape(-1)
        M = self.dim
        out = np.zeros((self.N, M), dtype=complex)
        for i in range(1, self.order + 1):
            if i == 1:
                out += self.W[1]
                continue
            blk = self.W[i].reshape((self.N,) + (M,) * i)
            for k in range(i):
                # contract all slots but k with p
                axes = list(range(1, i + 1))
                sub = blk
                shift = 0
                for s, ax in enumerate(axes):
                    if s == k:
                        continue
                    sub = np.tensordot(sub, p, axes=([ax - shift], [0]))
                    shift += 1
                out += sub
        return out

    def coefficient(self, degree, row, exponents):
        """One W coefficient by (degree, row, exponent tuple)."""
        mis = MultiIndexSet(degree, self.dim)
        return self.W[degree][row, mis.position(tuple(exponents))]

    def reduced_coefficient(self, degree, mode, exponents):
        """One R coefficient by (degree, mode row, exponent tuple)."""
        mis = MultiIndexSet(degree, self.dim)
        return self.R[degree][mode, mis.position(tuple(exponents))]

    def to_dict(self):
        """JSON-ready dict; polynomial data as sparse 1-based triplets."""
        def pack(block, degree):
            mis = MultiIndexSet(degree, self.dim)
            entries = []
            rows, cols = np.nonzero(np.abs(block) > 0)
            order_idx = np.lexsort((cols, rows))
            for k in order_idx:
                r, c = int(rows[k]), int(cols[k])
                t = mis.index_tuple(c)
                v = block[r, c]
                entries.append([r + 1, [i + 1 for i in t], v.real, v.imag])
            return entries

        return {
            "kind": "manifold-expansion",
            "order": self.order,
            "style": self.style,
            "dim": self.dim,
            "state_dim": self.N,
            "master": self.master.to_dict(),
            "W": {str(i): pack(self.W[i], i) for i in sorted(self.W)},
            "R": {str(i): pack(self.R[i], i) for i in sorted(self.R)},
            "resonances": self.resonances.to_dict() if self.resonances else None,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_dict(cls, data, system=None):
        M = int(data["dim"])
        N = int(data["state_dim"])
        master = MasterSubspace.from_dict(data["master"])

        def unpack(entries, degree, nrows):
            mis = MultiIndexSet(degree, M)
            block = np.zeros((nrows, mis.size), dtype=complex)
            for row, t, re, im in entries:
                pos = mis.position(tuple(i - 1 for i in t))
                block[row - 1, pos] = re + 1j * im
            return block

        W = {int(i): unpack(e, int(i), N) for i, e in data["W"].items()}
        R = {int(i): unpack(e, int(i), M) for i, e in data["R"].items()}
        return cls(system, master, int(data["order"]), data["style"], W, R,
                   None)

    @classmethod
    def load(cls, path, system=None):
        with open(path) as fh:
            return cls.from_dict(json.load(fh), system=system)

    def __repr__(self):
        return ("ManifoldExpansion(order=%d, dim=%d, N=%d, style=%r)"
                % (self.order, self.dim, self.N, self.style))
