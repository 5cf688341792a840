"""Dense complex linear algebra used throughout the package.

Subspaces are carried as :class:`Frame` objects (orthonormal column bases).
Hermitian eigenproblems go through a cyclic Jacobi solver so that results
are reproducible bit-for-bit across platforms; solves, SVD-based null spaces
and condition estimates are delegated to numpy/LAPACK.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MixedDimensions, NotHermitian, Singular

DEFAULT_TOL = 1e-10
ORTHONORMAL_TOL = 1e-12
HERMITIAN_TOL = 1e-12
COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class Frame:
    """Orthonormal basis of a subspace of ``C^n``, stored as an ``(n, k)`` array."""

    basis: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=complex)
        if basis.ndim != 2:
            raise ValueError("frame basis must be a 2-D array")
        if basis.shape[1] > basis.shape[0]:
            raise ValueError("more columns than ambient dimension")
        if basis.shape[1]:
            gram = basis.conj().T @ basis
            dev = np.max(np.abs(gram - np.eye(basis.shape[1])))
            if dev > ORTHONORMAL_TOL:
                raise ValueError(f"frame columns not orthonormal (deviation {dev:.3e})")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def empty(cls, ambient_dim: int) -> Frame:
        return cls(np.zeros((ambient_dim, 0), dtype=complex))

    @classmethod
    def full(cls, ambient_dim: int) -> Frame:
        return cls(np.eye(ambient_dim, dtype=complex))

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def __len__(self) -> int:
        return self.dim

    @property
    def columns(self) -> list[np.ndarray]:
        return [self.basis[:, j] for j in range(self.dim)]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.basis @ (self.basis.conj().T @ x)

    def residual(self, x: np.ndarray) -> float:
        """Norm of the component of ``x`` (vector or column block) outside the frame."""
        x = np.asarray(x, dtype=complex)
        return float(np.linalg.norm(x - self.project(x)))


def _as_columns(vectors, ambient_dim: int | None) -> np.ndarray:
    if isinstance(vectors, Frame):
        return vectors.basis
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        return vectors.astype(complex)
    vectors = [np.asarray(v, dtype=complex) for v in vectors]
    if not vectors:
        return np.zeros((ambient_dim or 0, 0), dtype=complex)
    dims = {v.shape for v in vectors}
    if len(dims) != 1 or vectors[0].ndim != 1:
        raise MixedDimensions(f"vectors have shapes {sorted(dims)}")
    return np.stack(vectors, axis=1)


def orthonormalize(vectors, tol: float = DEFAULT_TOL, ambient_dim: int | None = None) -> Frame:
    """Orthonormal frame for the span of ``vectors``, processed in order.

    Each candidate is orthogonalized twice against the columns accepted so far
    and dropped when its residual falls below ``tol * max(1, |v|)``.
    """
    cols = _as_columns(vectors, ambient_dim)
    if ambient_dim is not None and cols.shape[0] != ambient_dim:
        raise MixedDimensions(f"expected ambient dimension {ambient_dim}, got {cols.shape[0]}")
    n = cols.shape[0]
    accepted = np.zeros((n, 0), dtype=complex)
    for j in range(cols.shape[1]):
        v = cols[:, j]
        scale = max(1.0, float(np.linalg.norm(v)))
        r = v.copy()
        for _ in range(2):
            r = r - accepted @ (accepted.conj().T @ r)
        nrm = float(np.linalg.norm(r))
        if nrm < tol * scale or accepted.shape[1] == n:
            continue
        accepted = np.column_stack([accepted, r / nrm])
    return Frame(accepted, tol)


def canonical_basis(frame: Frame, tol: float = DEFAULT_TOL) -> Frame:
    """Basis of the frame's subspace that depends only on the subspace.

    Standard basis vectors are projected onto the subspace and accepted
    greedily: at each step the first index whose residual is at least half the
    largest remaining residual wins. This keeps the choice stable under
    rounding while preferring low indices.
    """
    n, k = frame.ambient_dim, frame.dim
    if k == 0:
        return Frame.empty(n)
    cand = frame.projector()
    chosen = np.zeros((n, 0), dtype=complex)
    for _ in range(k):
        res = cand - chosen @ (chosen.conj().T @ cand)
        res = res - chosen @ (chosen.conj().T @ res)
        norms = np.linalg.norm(res, axis=0)
        top = norms.max()
        if top < tol:
            break
        idx = int(np.argmax(norms >= 0.5 * top))
        chosen = np.column_stack([chosen, res[:, idx] / norms[idx]])
    return Frame(chosen, tol)


def null_space(a: np.ndarray, tol: float = DEFAULT_TOL) -> Frame:
    """Orthonormal basis of ``{x : a x = 0}``; singular values below ``tol * max(1, s_max)`` count as zero."""
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    n = a.shape[1]
    if a.shape[0] == 0 or n == 0:
        return Frame.full(n)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    cutoff = tol * max(1.0, float(s[0]) if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    return Frame(vh[rank:].conj().T.copy(), tol)


def complement(frame: Frame, tol: float = DEFAULT_TOL) -> Frame:
    """Orthogonal complement of the frame in its ambient space."""
    if frame.dim == 0:
        return Frame.full(frame.ambient_dim)
    return null_space(frame.basis.conj().T, tol)


def intersect(a: Frame, b: Frame, tol: float = DEFAULT_TOL) -> Frame:
    """Intersection of two subspaces, as the null space of ``[A, -B]`` mapped through ``A``."""
    _check_same_ambient(a, b)
    if a.dim == 0 or b.dim == 0:
        return Frame.empty(a.ambient_dim)
    ns = null_space(np.column_stack([a.basis, -b.basis]), tol)
    return orthonormalize(a.basis @ ns.basis[: a.dim], tol, a.ambient_dim)


def _check_same_ambient(a: Frame, b: Frame):
    if a.ambient_dim != b.ambient_dim:
        raise MixedDimensions(f"ambient dimensions {a.ambient_dim} and {b.ambient_dim} differ")


def subspace_distance(a: Frame, b: Frame) -> float:
    """Frobenius norm of the difference of the orthogonal projectors."""
    _check_same_ambient(a, b)
    return float(np.linalg.norm(a.projector() - b.projector()))


def hermitian_deviation(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=complex)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def check_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``m`` as an exactly Hermitian complex array, or raise :class:`NotHermitian`."""
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    if m.shape[0] != m.shape[1]:
        raise NotHermitian(f"matrix of shape {m.shape} is not square")
    dev = hermitian_deviation(m)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if dev > tol * scale:
        raise NotHermitian(f"Hermitian deviation {dev:.3e}")
    return (m + m.conj().T) / 2


def _jacobi_rotation(app: float, aqq: float, apq: complex) -> np.ndarray:
    r = abs(apq)
    phase = apq.conjugate() / r
    theta = (aqq - app) / (2.0 * r)
    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.hypot(theta, 1.0))
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c
    return np.array([[c, s], [-s * phase, c * phase]], dtype=complex)


def hermitian_eigs(m, max_sweeps: int = 60) -> tuple[np.ndarray, Frame]:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi sweeps.

    Returns ascending real eigenvalues and a frame whose columns are the
    matching eigenvectors. Pivots are visited in row-major order, so the
    output is fully deterministic.
    """
    a = check_hermitian(m).copy()
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    fro = float(np.linalg.norm(a))
    floor = 1e-18 * fro
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= floor or mag <= 1e-17 * (abs(a[p, p]) + abs(a[q, q])):
                    continue
                (g00, g01), (g10, g11) = _jacobi_rotation(a[p, p].real, a[q, q].real, apq)
                for mat in (a, v):
                    cp, cq = mat[:, p].copy(), mat[:, q]
                    mat[:, p] = cp * g00 + cq * g10
                    mat[:, q] = cp * g01 + cq * g11
                rp, rq = a[p, :].copy(), a[q, :]
                a[p, :] = g00.conjugate() * rp + g10.conjugate() * rq
                a[q, :] = g01.conjugate() * rp + g11.conjugate() * rq
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                rotated = True
        if not rotated:
            break
    values = np.real(np.diag(a))
    order = np.argsort(values, kind="stable")
    return values[order], Frame(v[:, order])


def condition_number(m) -> float:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    if m.size == 0:
        return 1.0
    s = np.linalg.svd(m, compute_uv=False)
    return float(np.inf) if s[-1] == 0 else float(s[0] / s[-1])


def solve(m, rhs) -> np.ndarray:
    """Solve ``m x = rhs``; raises :class:`Singular` when cond(m) exceeds 1e12."""
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    if m.shape[0] != m.shape[1]:
        raise Singular(f"matrix of shape {m.shape} is not square")
    cond = condition_number(m)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise Singular(f"condition estimate {cond:.3e} exceeds {COND_LIMIT:.0e}")
    return np.linalg.solve(m, np.asarray(rhs, dtype=complex))


def gram(vectors: Sequence[np.ndarray]) -> np.ndarray:
    cols = _as_columns(vectors, None)
    return cols.conj().T @ cols


def rank(vectors, tol: float = DEFAULT_TOL) -> int:
    return orthonormalize(vectors, tol).dim
