"""
On-disk model format.

A model is a JSON manifest next to its data files. Matrices use the
Matrix Market exchange format; polynomial nonlinearity blocks use a
plain text triplet format, one monomial per line::

    # degree-3 block, columns: row  i1 i2 i3  value
    1  1 1 2   -0.25
    4  2 2 2    1.0

Indices are 1-based in files and converted on load (the in-memory
convention is 0-based). Duplicate monomial entries are summed. The
manifest looks like::

    {
      "format": "mech",                     // or "first_order"
      "matrices": {"M": "M.mtx", "C": "C.mtx", "K": "K.mtx"},
      "tensors": {"3": "f3.txt"},           // degree -> path
      "epsilon": 0.1,
      "forcing": [{"kappa": 1, "real": [...], "imag": [...]}],
      "variant": "L2", "n_choice": "mass"   // optional conversion hints
    }

"first_order" manifests name "A" and "B" instead of "M", "C", "K".
Paths are resolved relative to the manifest.
"""

import json
import os

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import ValidationError
from .model import FirstOrderSystem, MechanicalSystem
from .polytensor import PolyCoeffs

__all__ = [
    "load_system", "save_system", "read_tensor_text", "write_tensor_text",
]


def read_tensor_text(path, nrows, nvars):
    """
    Read one homogeneous polynomial block from a triplet text file.

    The degree is inferred from the column count (columns minus two).
    Lines starting with '#' or '%' and blank lines are skipped. Indices
    are 1-based; zero or out-of-range indices raise ValidationError
    naming the offending line.
    """
    entries = []
    degree = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.strip()
            if not body or body[0] in "#%":
                continue
            parts = body.split()
            if degree is None:
                degree = len(parts) - 2
                if degree < 1:
                    raise ValidationError(
                        "%s:%d: expected 'row i1 .. ik value'" % (path, lineno))
            elif len(parts) != degree + 2:
                raise ValidationError(
                    "%s:%d: expected %d columns, found %d"
                    % (path, lineno, degree + 2, len(parts)))
            try:
                row = int(parts[0])
                idx = tuple(int(p) for p in parts[1:-1])
                value = float(parts[-1])
            except ValueError as exc:
                raise ValidationError("%s:%d: %s" % (path, lineno, exc)) from exc
            if not 1 <= row <= nrows:
                raise ValidationError(
                    "%s:%d: row %d outside 1..%d (indices are 1-based)"
                    % (path, lineno, row, nrows))
            for i in idx:
                if not 1 <= i <= nvars:
                    raise ValidationError(
                        "%s:%d: index %d outside 1..%d (indices are 1-based)"
                        % (path, lineno, i, nvars))
            entries.append((row - 1, tuple(i - 1 for i in idx), value))
    if degree is None:
        raise ValidationError("%s: no entries found" % path)
    return PolyCoeffs.from_entries(degree, nrows, nvars, entries)


def write_tensor_text(path, coeffs):
    """Write one block in the triplet text format (1-based indices)."""
    with open(path, "w") as fh:
        fh.write("# columns: row  %s  value\n"
                 % "  ".join("i%d" % (k + 1) for k in range(coeffs.degree)))
        for row, idx, value in coeffs.entries():
            fh.write("%d  %s  %.17g\n"
                     % (row + 1, " ".join("%d" % (i + 1) for i in idx), value))


def _read_matrix(path):
    mat = scipy.io.mmread(path)
    if sp.issparse(mat):
        n = mat.shape[0]
        if n <= 400:
            return mat.toarray()
        return mat.tocsr()
    return np.asarray(mat)


def _write_matrix(path, mat):
    if sp.issparse(mat):
        scipy.io.mmwrite(path, mat.tocoo())
    else:
        scipy.io.mmwrite(path, np.asarray(mat))


def _load_forcing(spec_list):
    if not spec_list:
        return None
    forcing = []
    for item in spec_list:
        if "kappa" not in item:
            raise ValidationError("forcing entry missing 'kappa'")
        kappa = item["kappa"]
        real = np.asarray(item.get("real", []), dtype=float)
        imag = np.asarray(item.get("imag", np.zeros_like(real)), dtype=float)
        if imag.shape != real.shape:
            raise ValidationError(
                "forcing harmonic %r: real and imag parts differ in length"
                % (kappa,))
        forcing.append((tuple(kappa) if isinstance(kappa, list) else kappa,
                        real + 1j * imag))
    return forcing


def load_system(path):
    """
    Load a model from a JSON manifest.

    Returns
    -------
    MechanicalSystem or FirstOrderSystem
        According to the manifest's "format". Mechanical manifests may
        carry "variant" and "n_choice" hints for the first-order
        conversion; these are attached as ``variant_hint`` and
        ``n_choice_hint`` attributes.
    """
    with open(path) as fh:
        manifest = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))

    def resolve(name):
        return os.path.join(base, name)

    fmt = manifest.get("format", "mech")
    matrices = manifest.get("matrices", {})
    eps = float(manifest.get("epsilon", 0.0))
    forcing = _load_forcing(manifest.get("forcing"))

    if fmt == "mech":
        if "K" not in matrices:
            raise ValidationError("stiffness matrix K is required")
        if "M" not in matrices:
            raise ValidationError("mass matrix M is required")
        K = _read_matrix(resolve(matrices["K"]))
        M = _read_matrix(resolve(matrices["M"]))
        n = K.shape[0]
        if "C" in matrices:
            C = _read_matrix(resolve(matrices["C"]))
        else:
            C = sp.csr_matrix((n, n)) if sp.issparse(K) else np.zeros((n, n))
        blocks = _load_tensors(manifest, resolve, n, n)
        mech = MechanicalSystem(M, C, K, blocks, forcing, eps=eps)
        mech.variant_hint = manifest.get("variant")
        mech.n_choice_hint = manifest.get("n_choice")
        return mech

    if fmt == "first_order":
        for name in ("A", "B"):
            if name not in matrices:
                raise ValidationError("pencil matrix %s is required" % name)
        A = _read_matrix(resolve(matrices["A"]))
        B = _read_matrix(resolve(matrices["B"]))
        N = A.shape[0]
        blocks = _load_tensors(manifest, resolve, N, N)
        return FirstOrderSystem(A, B, blocks, forcing, eps=eps)

    raise ValidationError(
        "unknown manifest format %r (expected 'mech' or 'first_order')" % fmt)


def _load_tensors(manifest, resolve, nrows, nvars):
    blocks = []
    for key, name in sorted(manifest.get("tensors", {}).items(),
                            key=lambda kv: int(kv[0])):
        block = read_tensor_text(resolve(name), nrows, nvars)
        if block.degree != int(key):
            raise ValidationError(
                "tensor file %s has degree %d but manifest says %s"
                % (name, block.degree, key))
        blocks.append(block)
    return blocks


def save_system(system, directory, name="system"):
    """
    Write a model as a manifest plus data files under ``directory``.

    Returns the manifest path. Round-trips through ``load_system``.
    """
    os.makedirs(directory, exist_ok=True)
    manifest = {}
    if isinstance(system, MechanicalSystem):
        manifest["format"] = "mech"
        mats = {"M": system.M, "C": system.C, "K": system.K}
        blocks = system.f_coeffs
    elif isinstance(system, FirstOrderSystem):
        manifest["format"] = "first_order"
        mats = {"A": system.A, "B": system.B}
        blocks = system.F_coeffs
    else:
        raise ValidationError("cannot save %r" % (system,))

    manifest["matrices"] = {}
    for label, mat in mats.items():
        fname = "%s_%s.mtx" % (name, label)
        _write_matrix(os.path.join(directory, fname), mat)
        manifest["matrices"][label] = fname
    manifest["tensors"] = {}
    for block in blocks:
        fname = "%s_f%d.txt" % (name, block.degree)
        write_tensor_text(os.path.join(directory, fname), block)
        manifest["tensors"][str(block.degree)] = fname
    if system.eps:
        manifest["epsilon"] = system.eps
    if system.forcing:
        manifest["forcing"] = [
            {"kappa": list(kt), "real": vec.real.tolist(),
             "imag": vec.imag.tolist()}
            for kt, vec in system.forcing
        ]
    path = os.path.join(directory, "%s.json" % name)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
