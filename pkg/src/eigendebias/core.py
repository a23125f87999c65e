"""Shared linear-algebra plumbing: validated symmetric matrices, canonical
eigendecompositions, the sign-invariant distance on functional estimates,
interlacing checks, and the CSV exchange format used by every entry point.

Conventions fixed here and relied on everywhere else:

* Eigenvectors are columns, unit norm, and sign-canonicalized so that the
  entry of largest magnitude is positive (first such index wins on ties).
* ``Ordering.BY_MAGNITUDE_DESC`` sorts by ``|lambda|`` descending and breaks
  ties by signed value descending; ``Ordering.BY_VALUE_DESC`` sorts by signed
  value descending.
* CSV files are UTF-8, comma-separated, no header; matrices are one row per
  matrix row, vectors one value per line.  Ragged rows are rejected.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import InvalidInput, IoError, NumericalFailure

# Relative tolerance for accepting an almost-symmetric input matrix.
SYMMETRY_RTOL = 1e-12
# Relative tolerance on eigenpair residuals and orthonormality.
RESIDUAL_RTOL = 1e-9
ORTHONORMALITY_TOL = 1e-9


class Ordering(Enum):
    """How the eigenvalues of a decomposition are sorted."""

    BY_MAGNITUDE_DESC = "by_magnitude_desc"
    BY_VALUE_DESC = "by_value_desc"


class SymmetricMatrix:
    """A dense real symmetric matrix.

    Construction validates finiteness and symmetry up to
    ``SYMMETRY_RTOL * (1 + max|A|)`` and then stores the exactly symmetric
    average ``(A + A^T) / 2``.  The stored array is read-only; treat
    instances as immutable values.
    """

    __slots__ = ("entries",)

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidInput(f"expected a square 2-d array, got shape {a.shape}")
        if a.size == 0:
            raise InvalidInput("matrix must be non-empty")
        if not np.all(np.isfinite(a)):
            raise InvalidInput("matrix entries must be finite")
        scale = 1.0 + float(np.max(np.abs(a)))
        gap = float(np.max(np.abs(a - a.T)))
        if gap > SYMMETRY_RTOL * scale:
            raise InvalidInput(
                f"matrix is not symmetric: max |A[i,j]-A[j,i]| = {gap:.3e} "
                f"exceeds {SYMMETRY_RTOL:.0e} * (1 + max|A|)"
            )
        sym = (a + a.T) / 2.0
        sym.setflags(write=False)
        self.entries = sym

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def spectral_norm_bound(self) -> float:
        """Cheap upper bound ||A||_2 <= sqrt(||A||_1 ||A||_inf) = ||A||_inf here."""
        return float(np.max(np.sum(np.abs(self.entries), axis=1)))

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"SymmetricMatrix(dim={self.dim})"


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues and matching eigenvector columns under a fixed ordering.

    ``eigenvalues[i]`` pairs with column ``eigenvectors[:, i]``.  Instances
    produced by :func:`eigendecompose` satisfy the residual and
    orthonormality tolerances; hand-built instances (e.g. synthetic spectra
    in tests) are on the caller.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ordering: Ordering

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.shape[0])

    def eigenvalue(self, l: int) -> float:
        """1-based accessor: eigenvalue at position ``l`` in the ordering."""
        if not 1 <= l <= self.dim:
            raise InvalidInput(f"index l={l} out of range 1..{self.dim}")
        return float(self.eigenvalues[l - 1])

    def eigenvector(self, l: int) -> np.ndarray:
        if not 1 <= l <= self.dim:
            raise InvalidInput(f"index l={l} out of range 1..{self.dim}")
        return self.eigenvectors[:, l - 1]


def _order_indices(w: np.ndarray, ordering: Ordering) -> np.ndarray:
    if ordering is Ordering.BY_VALUE_DESC:
        # Stable sort on -w keeps LAPACK's ascending order among exact ties,
        # which is itself deterministic.
        return np.argsort(-w, kind="stable")
    if ordering is Ordering.BY_MAGNITUDE_DESC:
        # Primary key |w| descending, ties broken by signed value descending.
        return np.lexsort((-w, -np.abs(w)))
    raise InvalidInput(f"unknown ordering {ordering!r}")


def _canonicalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    out = vectors.copy()
    idx = np.argmax(np.abs(out), axis=0)
    signs = out[idx, np.arange(out.shape[1])]
    out[:, signs < 0] *= -1.0
    return out


def eigendecompose(matrix: SymmetricMatrix, ordering: Ordering) -> SpectralDecomposition:
    """Full eigendecomposition with deterministic ordering and signs.

    Raises :class:`NumericalFailure` if the solver does not converge or the
    result fails the residual / orthonormality tolerances.
    """
    a = matrix.entries
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigensolver failed to converge: {exc}") from exc

    idx = _order_indices(w, ordering)
    w = w[idx]
    v = _canonicalize_signs(v[:, idx])

    residual = a @ v - v * w
    res_norms = np.linalg.norm(residual, axis=0)
    allowed = RESIDUAL_RTOL * (1.0 + np.abs(w))
    if np.any(res_norms > allowed):
        worst = int(np.argmax(res_norms - allowed))
        raise NumericalFailure(
            f"eigenpair residual {res_norms[worst]:.3e} exceeds tolerance "
            f"{allowed[worst]:.3e} at position {worst + 1}"
        )
    gram_gap = float(np.max(np.abs(v.T @ v - np.eye(matrix.dim))))
    if gram_gap > ORTHONORMALITY_TOL:
        raise NumericalFailure(f"eigenvector basis not orthonormal: {gram_gap:.3e}")

    w.setflags(write=False)
    v.setflags(write=False)
    return SpectralDecomposition(eigenvalues=w, eigenvectors=v, ordering=ordering)


def check_unit_vector(a, n: int) -> np.ndarray:
    """Validate shape ``(n,)`` and unit norm (within ORTHONORMALITY_TOL)."""
    a = np.asarray(a, dtype=float)
    if a.shape != (n,):
        raise InvalidInput(f"expected a vector of shape ({n},), got {a.shape}")
    norm = float(np.linalg.norm(a))
    if abs(norm - 1.0) > ORTHONORMALITY_TOL:
        raise InvalidInput(f"expected a unit vector, got norm {norm!r}")
    return a


def dist(estimate: float, truth: float) -> float:
    """Sign-invariant error ``min(|estimate - truth|, |estimate + truth|)``.

    Eigenvectors are only defined up to a global sign, so an estimate of
    ``<a, u>`` can legitimately land near either ``+truth`` or ``-truth``.
    """
    estimate = float(estimate)
    truth = float(truth)
    return min(abs(estimate - truth), abs(estimate + truth))


def orthonormal_complement(basis: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the orthogonal complement.

    ``basis`` is n x k with orthonormal columns (checked); the result is
    n x (n - k) with orthonormal columns spanning the complement, obtained
    from a full orthogonal factorization so repeated calls agree bit for bit.
    """
    q = np.asarray(basis, dtype=float)
    if q.ndim == 1:
        q = q[:, None]
    n, k = q.shape
    if k > n:
        raise InvalidInput(f"basis has more columns ({k}) than rows ({n})")
    gram_gap = float(np.max(np.abs(q.T @ q - np.eye(k))))
    if gram_gap > ORTHONORMALITY_TOL:
        raise InvalidInput(f"basis columns not orthonormal: deviation {gram_gap:.3e}")
    if k == n:
        return np.zeros((n, 0))
    comp = scipy.linalg.null_space(q.T)
    if comp.shape != (n, n - k):
        raise NumericalFailure(
            f"complement has shape {comp.shape}, expected {(n, n - k)}"
        )
    return comp


def check_interlacing(matrix: SymmetricMatrix, basis: np.ndarray):
    """Check Cauchy interlacing of ``U^T A U`` inside the spectrum of ``A``.

    With both spectra sorted descending, compression eigenvalue ``i``
    (1-based, ``i = 1..k``) must satisfy
    ``lambda_{n-k+i}(A) <= lambda_i(U^T A U) <= lambda_i(A)``.

    Returns ``(ok, worst_slack)`` where ``worst_slack`` is the most negative
    slack over all ``2k`` inequalities (non-negative slack means satisfied)
    and ``ok`` tolerates violations up to ``1e-9 * (1 + ||A||_2)``.
    """
    u = np.asarray(basis, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    n, k = u.shape
    if n != matrix.dim:
        raise InvalidInput(f"basis rows {n} do not match matrix dim {matrix.dim}")
    if not 1 <= k <= n:
        raise InvalidInput(f"basis must have between 1 and {n} columns, got {k}")
    gram_gap = float(np.max(np.abs(u.T @ u - np.eye(k))))
    if gram_gap > ORTHONORMALITY_TOL:
        raise InvalidInput(f"basis columns not orthonormal: deviation {gram_gap:.3e}")

    outer = np.sort(np.linalg.eigvalsh(matrix.entries))[::-1]
    inner = np.sort(np.linalg.eigvalsh(u.T @ matrix.entries @ u))[::-1]

    worst = np.inf
    for i in range(1, k + 1):
        upper_slack = outer[i - 1] - inner[i - 1]
        lower_slack = inner[i - 1] - outer[n - k + i - 1]
        worst = min(worst, float(upper_slack), float(lower_slack))
    norm = float(np.max(np.abs(outer))) if n else 0.0
    ok = worst >= -RESIDUAL_RTOL * (1.0 + norm)
    return ok, worst


# ---------------------------------------------------------------------------
# CSV exchange format
# ---------------------------------------------------------------------------


def _parse_rows(path) -> list[list[float]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            raw = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc
    except UnicodeDecodeError as exc:
        raise IoError(path, f"not valid UTF-8: {exc}") from exc
    rows = [r for r in raw if r]  # ignore blank trailing lines
    if not rows:
        raise IoError(path, "file contains no data rows")
    width = len(rows[0])
    parsed = []
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise IoError(
                path, f"ragged row at line {lineno}: {len(row)} fields, expected {width}"
            )
        try:
            parsed.append([float(x) for x in row])
        except ValueError as exc:
            raise IoError(path, f"non-numeric field at line {lineno}: {exc}") from exc
    return parsed


def read_matrix(path) -> np.ndarray:
    """Read a rectangular matrix from header-less CSV."""
    return np.array(_parse_rows(path), dtype=float)


def read_symmetric(path) -> SymmetricMatrix:
    return SymmetricMatrix(read_matrix(path))


def read_vector(path) -> np.ndarray:
    """Read a vector stored one value per line (single-column CSV)."""
    rows = _parse_rows(path)
    if any(len(r) != 1 for r in rows):
        raise IoError(path, "expected a single value per line")
    return np.array([r[0] for r in rows], dtype=float)


def format_float(x: float) -> str:
    """Shortest exact decimal form; round-trips through float()."""
    return repr(float(x))


def write_matrix(path, matrix) -> None:
    a = np.asarray(matrix, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InvalidInput(f"expected a 1-d or 2-d array, got ndim={a.ndim}")
    buf = io.StringIO()
    for row in a:
        buf.write(",".join(format_float(x) for x in row))
        buf.write("\n")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc


def write_vector(path, vector) -> None:
    v = np.asarray(vector, dtype=float)
    if v.ndim != 1:
        raise InvalidInput(f"expected a 1-d array, got ndim={v.ndim}")
    write_matrix(path, v[:, None])
