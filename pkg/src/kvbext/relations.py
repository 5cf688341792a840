"""Linear relations (graph subspaces of ``C^N (+) C^N``).

A finite-dimensional symmetric operator that is not defined on the whole
space cannot have a single-valued adjoint: the adjoint picks up the
orthogonal complement of the domain as a multivalued part. Working with
graphs keeps that bookkeeping exact, which is why every operator in the
package (``S``, its closure, its adjoint, every self-adjoint extension) is
represented here as a :class:`LinearRelation`.

Graph vectors are stacked as ``(input; output)``, first ``N`` coordinates
then last ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import MixedDimensions, NotSelfAdjoint
from .linalg import DEFAULT_TOL, Frame

SELFADJOINT_TOL = 1e-8
CLUSTER_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class LinearRelation:
    ambient_dim: int
    graph: Frame

    def __post_init__(self):
        if self.graph.ambient_dim != 2 * self.ambient_dim:
            raise MixedDimensions(
                f"graph lives in C^{self.graph.ambient_dim}, expected C^{2 * self.ambient_dim}"
            )

    @property
    def dim(self) -> int:
        return self.graph.dim

    @property
    def inputs(self) -> np.ndarray:
        return self.graph.basis[: self.ambient_dim]

    @property
    def outputs(self) -> np.ndarray:
        return self.graph.basis[self.ambient_dim :]

    def membership_residual(self, psi, phi) -> float:
        """Distance of the pair (or column blocks) ``(psi, phi)`` from the graph."""
        return self.graph.residual(np.concatenate([np.asarray(psi, complex), np.asarray(phi, complex)]))

    def contains(self, other: LinearRelation) -> float:
        """Residual of ``other``'s graph outside this graph (0 means containment)."""
        if other.ambient_dim != self.ambient_dim:
            raise MixedDimensions("relations act on different spaces")
        return self.graph.residual(other.graph.basis)

    def distance(self, other: LinearRelation) -> float:
        if other.ambient_dim != self.ambient_dim:
            raise MixedDimensions("relations act on different spaces")
        return linalg.subspace_distance(self.graph, other.graph)


def from_pairs(ambient_dim: int, inputs, outputs, tol: float = DEFAULT_TOL) -> LinearRelation:
    """Relation spanned by the pairs ``(inputs[:, j], outputs[:, j])``."""
    inputs = np.asarray(inputs, dtype=complex).reshape(ambient_dim, -1)
    outputs = np.asarray(outputs, dtype=complex).reshape(ambient_dim, -1)
    if inputs.shape != outputs.shape:
        raise MixedDimensions(f"{inputs.shape[1]} inputs but {outputs.shape[1]} outputs")
    return LinearRelation(ambient_dim, linalg.orthonormalize(np.vstack([inputs, outputs]), tol, 2 * ambient_dim))


def from_operator_on_subspace(domain: Frame, images, tol: float = DEFAULT_TOL) -> LinearRelation:
    """Graph of the operator mapping ``domain.columns[j]`` to ``images[j]``."""
    n = domain.ambient_dim
    if isinstance(images, np.ndarray) and images.ndim == 2:
        img = images.astype(complex)
    else:
        images = list(images)
        img = np.stack([np.asarray(x, complex) for x in images], axis=1) if images else np.zeros((n, 0))
    if img.shape != (n, domain.dim):
        raise MixedDimensions(f"need {domain.dim} images in C^{n}, got array of shape {img.shape}")
    return from_pairs(n, domain.basis, img, tol)


def from_matrix(m) -> LinearRelation:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    n = m.shape[0]
    return from_operator_on_subspace(Frame.full(n), m)


def zero_relation(n: int) -> LinearRelation:
    return LinearRelation(n, Frame.empty(2 * n))


def adjoint(r: LinearRelation, tol: float = DEFAULT_TOL) -> LinearRelation:
    """``{(u, v) : <g, u> = <f, v> for all (f, g) in r}``, the complement of ``J r`` with ``J(f, g) = (-g, f)``."""
    n = r.ambient_dim
    rotated = np.vstack([-r.outputs, r.inputs])
    return LinearRelation(n, linalg.complement(Frame(rotated), tol))


def is_selfadjoint(r: LinearRelation, tol: float = SELFADJOINT_TOL) -> bool:
    return selfadjoint_defect(r) < tol


def selfadjoint_defect(r: LinearRelation) -> float:
    return r.distance(adjoint(r))


def kernel(r: LinearRelation, tol: float = DEFAULT_TOL) -> Frame:
    """``{psi : (psi, 0) in r}``."""
    coeffs = linalg.null_space(r.outputs, tol) if r.dim else Frame.empty(0)
    return linalg.orthonormalize(r.inputs @ coeffs.basis, tol, r.ambient_dim)


def multivalued_part(r: LinearRelation, tol: float = DEFAULT_TOL) -> Frame:
    """``{v : (0, v) in r}``."""
    coeffs = linalg.null_space(r.inputs, tol) if r.dim else Frame.empty(0)
    return linalg.orthonormalize(r.outputs @ coeffs.basis, tol, r.ambient_dim)


def domain(r: LinearRelation, tol: float = DEFAULT_TOL) -> Frame:
    return linalg.orthonormalize(r.inputs, tol, r.ambient_dim)


def range_(r: LinearRelation, tol: float = DEFAULT_TOL) -> Frame:
    return linalg.orthonormalize(r.outputs, tol, r.ambient_dim)


def inverse(r: LinearRelation) -> LinearRelation:
    return LinearRelation(r.ambient_dim, Frame(np.vstack([r.outputs, r.inputs])))


def shift(r: LinearRelation, c: float) -> LinearRelation:
    """``{(f, g - c f)}``."""
    return from_pairs(r.ambient_dim, r.inputs, r.outputs - c * r.inputs)


@dataclass(frozen=True)
class OperatorSplit:
    """Self-adjoint relation written as an operator part plus a multivalued part.

    ``op_domain`` is the orthogonal complement of ``mult``; ``op_matrix`` is
    the Hermitian matrix of the operator part in ``op_domain`` coordinates.
    """

    op_domain: Frame
    op_matrix: np.ndarray
    mult: Frame

    def reconstruct(self) -> LinearRelation:
        d = self.op_domain.basis
        n = self.op_domain.ambient_dim
        inputs = np.column_stack([d, np.zeros((n, self.mult.dim))])
        outputs = np.column_stack([d @ self.op_matrix, self.mult.basis])
        return from_pairs(n, inputs, outputs)


def split_operator_mult(r: LinearRelation, tol: float = SELFADJOINT_TOL) -> OperatorSplit:
    defect = selfadjoint_defect(r)
    if defect >= tol:
        raise NotSelfAdjoint(f"relation is not self-adjoint (defect {defect:.3e})")
    mult = multivalued_part(r)
    op_domain = linalg.complement(mult)
    # for each domain vector pick any graph partner, then drop the multivalued component
    coeffs, *_ = np.linalg.lstsq(r.inputs, op_domain.basis, rcond=None)
    images = r.outputs @ coeffs
    op = op_domain.basis.conj().T @ images
    return OperatorSplit(op_domain, linalg.check_hermitian(op, 1e-8), mult)


def to_matrix(r: LinearRelation) -> np.ndarray:
    """Full ``N x N`` matrix of a self-adjoint relation with trivial multivalued part."""
    split = split_operator_mult(r)
    if split.mult.dim:
        raise NotSelfAdjoint(f"relation has a {split.mult.dim}-dimensional multivalued part")
    d = split.op_domain.basis
    return d @ split.op_matrix @ d.conj().T


@dataclass(frozen=True)
class Eigenpair:
    value: float
    frame: Frame
    residual: float

    @property
    def multiplicity(self) -> int:
        return self.frame.dim


def eigenpairs(r: LinearRelation, tol: float = CLUSTER_TOL) -> list[Eigenpair]:
    """All ``psi`` with ``(psi, lam psi)`` in ``r``, grouped by eigenvalue.

    Eigenvalues closer than ``tol`` (consecutively, after sorting) form one
    cluster, reported at the cluster mean. The multivalued part contributes
    no finite eigenvalues.
    """
    split = split_operator_mult(r)
    if split.op_domain.dim == 0:
        return []
    values, vecs = linalg.hermitian_eigs(split.op_matrix)
    full = split.op_domain.basis @ vecs.basis
    groups: list[list[int]] = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    out = []
    for g in groups:
        lam = float(np.mean(values[g]))
        frame = linalg.orthonormalize(full[:, g], DEFAULT_TOL, r.ambient_dim)
        res = r.membership_residual(frame.basis, lam * frame.basis)
        out.append(Eigenpair(lam, frame, res))
    return out


def multiplicity(pairs: list[Eigenpair], lam: float, tol: float = CLUSTER_TOL) -> int:
    return sum(p.multiplicity for p in pairs if abs(p.value - lam) <= tol)


def direct_sum(relations: list[LinearRelation]) -> LinearRelation:
    """Block-diagonal assembly of relations acting on orthogonal summands."""
    n = sum(r.ambient_dim for r in relations)
    inputs, outputs = [], []
    offset = 0
    for r in relations:
        block_in = np.zeros((n, r.dim), dtype=complex)
        block_out = np.zeros((n, r.dim), dtype=complex)
        block_in[offset : offset + r.ambient_dim] = r.inputs
        block_out[offset : offset + r.ambient_dim] = r.outputs
        inputs.append(block_in)
        outputs.append(block_out)
        offset += r.ambient_dim
    return from_pairs(n, np.column_stack(inputs), np.column_stack(outputs))
