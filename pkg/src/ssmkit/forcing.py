"""
Leading-order forced response on the manifold.

Small periodic or quasi-periodic forcing ``eps * sum_kappa f_kappa
exp(i <kappa, Omega> t)`` deforms the autonomous manifold. To first
order in eps the deformation is time periodic with the same harmonics,

    z = W(p) + eps * sum_kappa x_kappa exp(i <kappa, Omega> t),

and the reduced dynamics gains the forcing term ``eps * sum_kappa
s_kappa exp(i <kappa, Omega> t)``. Each harmonic solves its own linear
block

    (i <kappa, Omega> B - A) x_kappa = f_kappa - B V s_kappa

where s_kappa plays the same role as the reduced-dynamics entries in
the autonomous expansion: under "normal-form" only modes whose
eigenvalue is near-resonant with ``i <kappa, Omega>`` receive the
projection ``u_j^H f_kappa``; under "graph" all master modes do.

Harmonics resonant with eigenvalues outside the master set cannot be
absorbed either way; they are reported as a warning because they shrink
the validity region in eps.

Corrections of order eps times powers of the reduced coordinate are not
computed; the diagnostics record this truncation.
"""

import warnings

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError, ValidationError
from .model import as_first_order

__all__ = ["NonAutonomousLeading", "leading_order"]


class NonAutonomousLeading:
    """
    First order in eps response data for one base frequency vector.

    Attributes
    ----------
    Omega : (K,) float ndarray
        Base frequencies; harmonics are integer combinations.
    harmonics : dict
        kappa tuple -> {"x0": (N,) complex, "s0": (M,) complex}.
    style : str
    eps : float
        Copied from the system for convenience in amplitude maps.
    diagnostics : dict
    """

    def __init__(self, Omega, harmonics, style, eps=0.0, diagnostics=None):
        self.Omega = np.atleast_1d(np.asarray(Omega, dtype=float))
        self.harmonics = dict(harmonics)
        self.style = style
        self.eps = float(eps)
        self.diagnostics = dict(diagnostics or {})

    def x0(self, kappa):
        return self.harmonics[tuple(kappa)]["x0"]

    def s0(self, kappa):
        return self.harmonics[tuple(kappa)]["s0"]

    def correction(self, phase):
        """Physical deformation shape at a phase vector (real)."""
        phase = np.atleast_1d(np.asarray(phase, dtype=float))
        out = 0.0
        for kt in sorted(self.harmonics):
            out = out + self.harmonics[kt]["x0"] * np.exp(1j * np.dot(kt, phase))
        return np.real(out)

    def reduced(self, phase):
        """Reduced forcing term at a phase vector (complex M-vector)."""
        phase = np.atleast_1d(np.asarray(phase, dtype=float))
        out = 0.0
        for kt in sorted(self.harmonics):
            out = out + self.harmonics[kt]["s0"] * np.exp(1j * np.dot(kt, phase))
        return np.asarray(out, dtype=complex)

    def to_dict(self):
        return {
            "kind": "nonautonomous-leading",
            "Omega": self.Omega.tolist(),
            "eps": self.eps,
            "style": self.style,
            "harmonics": [
                {"kappa": list(kt),
                 "x0": {"real": h["x0"].real.tolist(),
                        "imag": h["x0"].imag.tolist()},
                 "s0": {"real": h["s0"].real.tolist(),
                        "imag": h["s0"].imag.tolist()}}
                for kt, h in sorted(self.harmonics.items())
            ],
        }

    @classmethod
    def from_dict(cls, data):
        harmonics = {}
        for h in data["harmonics"]:
            kt = tuple(h["kappa"])
            harmonics[kt] = {
                "x0": np.asarray(h["x0"]["real"]) + 1j * np.asarray(h["x0"]["imag"]),
                "s0": np.asarray(h["s0"]["real"]) + 1j * np.asarray(h["s0"]["imag"]),
            }
        return cls(data["Omega"], harmonics, data["style"], data.get("eps", 0.0))

    def __repr__(self):
        return ("NonAutonomousLeading(Omega=%s, harmonics=%d, style=%r)"
                % (self.Omega, len(self.harmonics), self.style))


def _canonical_kappa(kt):
    """True for the representative of a +/- harmonic pair (and zero)."""
    for k in kt:
        if k > 0:
            return True
        if k < 0:
            return False
    return True


def leading_order(system, master, Omega, style="normal-form",
                  graph_modes=(), tol=None, resonant_modes=None):
    """
    Solve the order-eps response for every forcing harmonic.

    Parameters
    ----------
    system : FirstOrderSystem
        Must carry a forcing table.
    master : MasterSubspace
    Omega : float or sequence of float
        Base frequency for each harmonic index slot.
    style : {"normal-form", "graph", "per-mode"}, optional
    graph_modes : sequence of int, optional
        Per-mode style: modes always projected.
    tol : dict, optional
        Same keys as the resonance classifier ("rel", "slack", "abs").
    resonant_modes : dict, optional
        kappa tuple -> list of master mode indices, replacing the
        classifier decision for those harmonics. Useful to keep a
        branch of solutions consistent across a frequency sweep.

    Returns
    -------
    NonAutonomousLeading
    """
    system = as_first_order(system)
    if not system.forcing:
        raise ValidationError("system declares no forcing harmonics")
    if style not in ("normal-form", "graph", "per-mode"):
        raise ValidationError("style must be normal-form, graph or per-mode")
    Omega = np.atleast_1d(np.asarray(Omega, dtype=float))
    lam = master.lambdas
    M = master.dim
    V, U = master.V, master.U
    A, B = system.A, system.B
    sparse = sp.issparse(A) or sp.issparse(B)

    tol = dict(tol or {})
    rel = float(tol.get("rel", 1e-3))
    slack = float(tol.get("slack", 1.0))
    mags = np.abs(np.concatenate([lam, master.outer_lambdas])) \
        if master.outer_lambdas.size else np.abs(lam)
    scale = float(mags.max()) if mags.size else 1.0
    tol_abs = float(tol["abs"]) if tol.get("abs") is not None else 1e-8 * max(scale, 1e-300)
    re_span = float(np.abs(lam.real).max()) if lam.size else 0.0
    re_slack = slack * 2.0 * re_span

    def resonant_with(nu, mu):
        return (abs(nu - mu.imag) <= tol_abs + rel * abs(mu)
                and abs(mu.real) <= tol_abs + rel * abs(mu) + re_slack)

    overrides = {tuple(k): [int(j) for j in v]
                 for k, v in (resonant_modes or {}).items()}
    table = dict(system.forcing)
    for kt in table:
        if len(kt) != Omega.size:
            raise ValidationError(
                "harmonic %r has %d indices but Omega has %d frequencies"
                % (kt, len(kt), Omega.size))

    harmonics = {}
    residuals = {}
    outer_hits = []
    pairing = master.pairing
    for kt in sorted(table):
        if not _canonical_kappa(kt):
            continue
        f0 = table[kt]
        nu = float(np.dot(kt, Omega))
        if kt in overrides:
            modes = overrides[kt]
        elif style == "graph":
            modes = list(range(M))
        else:
            modes = [j for j in range(M) if resonant_with(nu, lam[j])]
            if style == "per-mode":
                modes = sorted(set(modes) | {int(g) for g in graph_modes})
        for mu in master.outer_lambdas:
            if resonant_with(nu, mu):
                outer_hits.append((kt, complex(mu)))

        s0 = np.zeros(M, dtype=complex)
        for j in modes:
            s0[j] = np.vdot(U[:, j], f0)
        rhs = f0 - B @ (V @ s0)
        if sparse:
            mat = (1j * nu * B - A).tocsc().astype(complex)
            try:
                x0 = spla.splu(mat).solve(rhs)
                if not np.isfinite(x0).all():
                    raise RuntimeError("non-finite sparse solve")
                singular = False
            except RuntimeError:
                mat = mat.toarray()
                singular = True
        else:
            mat = 1j * nu * np.asarray(B, dtype=complex) - A
            lu, piv = la.lu_factor(mat)
            anorm = np.linalg.norm(mat, 1)
            gecon = la.get_lapack_funcs("gecon", (mat,))
            rcond = gecon(lu, anorm)[0] if anorm > 0 else 0.0
            singular = rcond <= 1e-12
            if not singular:
                x0 = la.lu_solve((lu, piv), rhs)
        if singular:
            if sp.issparse(mat):
                mat = mat.toarray()
            x0 = la.lstsq(mat, rhs, cond=1e-12, lapack_driver="gelsd")[0]
            near = [k for k in range(M)
                    if abs(1j * nu - lam[k]) <= 1e-8 * max(scale, 1.0)]
            for k in near:
                x0 = x0 - V[:, k] * (U[:, k].conj() @ (B @ x0))
            rnorm = float(np.abs(mat @ x0 - rhs).max())
            if rnorm > 1e-6 * max(np.abs(rhs).max(), np.abs(f0).max(), 1.0):
                raise NumericalError(
                    "harmonic %r sits on an eigenvalue and its projection "
                    "left an inconsistent system (residual %.3e); widen the "
                    "resonance tolerance or pass resonant_modes" % (kt, rnorm))
        harmonics[kt] = {"x0": x0, "s0": s0}
        res = (1j * nu * (B @ x0) - A @ x0) - (f0 - B @ (V @ s0))
        residuals[str(kt)] = float(np.abs(res).max())

        neg = tuple(-k for k in kt)
        if neg != kt:
            harmonics[neg] = {"x0": x0.conjugate(),
                              "s0": s0[pairing].conjugate()}
        else:
            imag = float(np.abs(x0.imag).max(initial=0.0))
            if imag > 1e-9 * max(np.abs(x0).max(initial=0.0), 1.0):
                raise NumericalError(
                    "zero-harmonic response came out complex (max imag %.3e)"
                    % imag)
            harmonics[kt] = {"x0": x0.real.astype(complex), "s0": s0}

    if outer_hits:
        msg = ", ".join("harmonic %r vs %s" % (kt, mu) for kt, mu in outer_hits)
        warnings.warn(
            "forcing resonates with eigenvalues outside the master set "
            "(%s); the order-eps response stands but with a reduced domain "
            "of convergence in eps" % msg)

    diag = {
        "residuals": residuals,
        "outer_resonances": [[list(kt), mu.real, mu.imag]
                             for kt, mu in outer_hits],
        "truncation": "response truncated at order eps; terms of order "
                      "eps times reduced amplitude are not included",
        "params": {"rel": rel, "slack": slack, "abs": tol_abs},
    }
    return NonAutonomousLeading(Omega, harmonics, style, eps=system.eps,
                                diagnostics=diag)
