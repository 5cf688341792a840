"""Extension problems for gapped symmetric operators and their self-adjoint extensions.

An :class:`ExtensionProblem` is a symmetric operator ``S`` on ``C^N``, given
by an orthonormal frame of its domain and the images of the frame columns,
together with a distinguished invertible self-adjoint extension ``S_D``.

Finite-dimensional caveat: ``S_D`` is stored as a full Hermitian matrix, so
the condition ``D(S_D) ∩ ker S* = {0}`` that holds in infinite dimension is
vacuous here. Nothing below relies on it. Every formula uses only
``S_D^{-1}`` and the graph-level splitting of the adjoint relation

    S* = {(f, Sf)} + {(S_D^{-1} w, w)} + {(u, 0)},   f ∈ D(S), w, u ∈ ker S*,

which *is* direct: the output components force ``w ∈ ran S ∩ ker S* = {0}``
whenever an element vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linalg, relations
from .errors import (
    DecompositionMismatch,
    GapExcludesZero,
    NotExtension,
    NotInAdjointDomain,
    NotInGap,
    NotInvertibleSD,
    NotSymmetric,
    NotUnital,
    ParameterNotInKernel,
    ValidationError,
)
from .linalg import DEFAULT_TOL, Frame
from .relations import LinearRelation

VALIDATION_TOL = 1e-10
GAP_SLACK = 1e-10
BETA_INFINITY = 1e12
MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True)
class GapInterval:
    """Open interval ``(a, b)``; ``a`` may be ``-inf`` (semibounded case)."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"empty gap ({self.a}, {self.b})")

    @property
    def semibounded(self) -> bool:
        return math.isinf(self.a)

    def __contains__(self, lam) -> bool:
        return self.a < lam < self.b

    def shifted(self, c: float) -> GapInterval:
        return GapInterval(self.a - c, self.b - c)

    def intersect(self, other: GapInterval) -> GapInterval | None:
        a, b = max(self.a, other.a), min(self.b, other.b)
        return GapInterval(a, b) if a < b else None

    def __str__(self):
        return f"({self.a}, {self.b})"


@dataclass(frozen=True, eq=False)
class ExtensionProblem:
    """Symmetric ``S`` on ``C^N`` with distinguished invertible extension ``S_D``.

    ``action[:, j]`` is ``S`` applied to ``domain.basis[:, j]``.
    """

    domain: Frame
    action: np.ndarray
    s_d: np.ndarray
    gap: GapInterval

    def __post_init__(self):
        action = np.asarray(self.action, dtype=complex).reshape(self.dim, self.domain.dim)
        s_d = np.asarray(self.s_d, dtype=complex)
        if s_d.shape != (self.dim, self.dim):
            raise ValueError(f"s_d has shape {s_d.shape}, expected {(self.dim, self.dim)}")
        object.__setattr__(self, "action", action)
        object.__setattr__(self, "s_d", s_d)

    @classmethod
    def from_basis(cls, domain_basis, action, s_d, gap: GapInterval) -> ExtensionProblem:
        """Build from an arbitrary (not necessarily orthonormal) domain basis."""
        b = np.atleast_2d(np.asarray(domain_basis, dtype=complex))
        img = np.atleast_2d(np.asarray(action, dtype=complex))
        if b.shape != img.shape:
            raise ValidationError(f"domain basis {b.shape} and action {img.shape} differ in shape")
        frame = linalg.orthonormalize(b, DEFAULT_TOL, b.shape[0])
        if frame.dim != b.shape[1]:
            raise NotExtension("domain basis vectors are linearly dependent")
        coeffs, *_ = np.linalg.lstsq(b, frame.basis, rcond=None)
        return cls(frame, img @ coeffs, s_d, gap)

    @property
    def dim(self) -> int:
        return self.domain.ambient_dim

    @cached_property
    def form_matrix(self) -> np.ndarray:
        """``<d_i, S d_j>`` over the domain frame."""
        return self.domain.basis.conj().T @ self.action

    @cached_property
    def kernel_frame(self) -> Frame:
        """Orthonormal basis of ``ker S* = (ran S)^⊥``."""
        ran = linalg.orthonormalize(self.action, DEFAULT_TOL, self.dim)
        return linalg.canonical_basis(linalg.complement(ran))

    @property
    def deficiency_index(self) -> int:
        return self.kernel_frame.dim

    @cached_property
    def s_d_inverse(self) -> np.ndarray:
        try:
            return linalg.solve(self.s_d, np.eye(self.dim))
        except linalg.Singular as exc:
            raise NotInvertibleSD(str(exc)) from exc

    def resolvent(self, lam: complex) -> np.ndarray:
        """``(S_D - lam)^{-1}``."""
        return linalg.solve(self.s_d - lam * np.eye(self.dim), np.eye(self.dim))


@dataclass(frozen=True)
class Check:
    name: str
    deviation: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def validate(p: ExtensionProblem, raise_on_failure: bool = True) -> ValidationReport:
    """Check every :class:`ExtensionProblem` invariant and report measured deviations."""
    scale = max(1.0, float(np.max(np.abs(p.s_d))) if p.s_d.size else 1.0)
    checks = []
    sym = linalg.hermitian_deviation(p.form_matrix)
    checks.append(Check("symmetric", sym, VALIDATION_TOL * scale, sym <= VALIDATION_TOL * scale))
    herm = linalg.hermitian_deviation(p.s_d)
    checks.append(Check("s_d_hermitian", herm, VALIDATION_TOL * scale, herm <= VALIDATION_TOL * scale))
    ext = float(np.max(np.abs(p.s_d @ p.domain.basis - p.action))) if p.domain.dim else 0.0
    checks.append(Check("extension", ext, VALIDATION_TOL * scale, ext <= VALIDATION_TOL * scale))
    cond = linalg.condition_number(p.s_d)
    checks.append(Check("s_d_invertible", cond, linalg.COND_LIMIT, bool(cond < linalg.COND_LIMIT)))
    checks.append(Check("zero_in_gap", 0.0, 0.0, 0.0 in p.gap))
    smin = float(np.linalg.svd(p.action, compute_uv=False)[-1]) if p.domain.dim else 1.0
    checks.append(Check("action_injective", smin, DEFAULT_TOL, smin > DEFAULT_TOL))
    report = ValidationReport(checks)
    if raise_on_failure:
        errors = {
            "symmetric": NotSymmetric,
            "s_d_hermitian": NotSymmetric,
            "extension": NotExtension,
            "s_d_invertible": NotInvertibleSD,
            "zero_in_gap": GapExcludesZero,
            "action_injective": NotExtension,
        }
        for c in checks:
            if not c.passed:
                raise errors[c.name](f"{c.name} check failed: deviation {c.deviation:.3e} (threshold {c.threshold:.1e})")
    return report


@dataclass(frozen=True)
class GapVerdict:
    branch: str
    margin: float
    holds: bool


def gap_verdict(domain: Frame, action: np.ndarray, g: GapInterval) -> GapVerdict:
    """Test the gap inequalities on ``S`` given by ``domain``/``action``.

    Semibounded: ``<f, Sf> >= b |f|^2``. Finite: ``|(S - c) f| >= r |f|`` with
    ``c``, ``r`` the midpoint and half-width. ``margin`` is the measured
    slack (negative means violated).
    """
    if domain.dim == 0:
        return GapVerdict("semibounded" if g.semibounded else "finite", math.inf, True)
    if g.semibounded:
        form = domain.basis.conj().T @ action
        lowest = linalg.hermitian_eigs(form)[0][0]
        margin = float(lowest - g.b)
        return GapVerdict("semibounded", margin, margin >= -GAP_SLACK)
    c, r = (g.a + g.b) / 2, (g.b - g.a) / 2
    smin = float(np.linalg.svd(action - c * domain.basis, compute_uv=False)[-1])
    margin = smin - r
    return GapVerdict("finite", margin, margin >= -GAP_SLACK)


def check_gap(p: ExtensionProblem, g: GapInterval) -> bool:
    return gap_verdict(p.domain, p.action, g).holds


def lower_bound(p: ExtensionProblem) -> float:
    """Infimum of ``<f, Sf> / |f|^2`` over the domain."""
    return float(linalg.hermitian_eigs(p.form_matrix)[0][0])


def graph_of_s(p: ExtensionProblem) -> LinearRelation:
    return relations.from_operator_on_subspace(p.domain, p.action)


def adjoint_relation(p: ExtensionProblem, check: bool = True, tol: float = 1e-9) -> LinearRelation:
    """Adjoint of ``S`` assembled from the three-block splitting of its domain.

    With ``check`` the result is compared against the brute-force graph
    adjoint; disagreement means the problem instance is broken.
    """
    k = p.kernel_frame.basis
    n = p.dim
    inputs = np.column_stack([p.domain.basis, p.s_d_inverse @ k, k])
    outputs = np.column_stack([p.action, k, np.zeros_like(k)])
    rel = relations.from_pairs(n, inputs, outputs)
    if check:
        oracle = relations.adjoint(graph_of_s(p))
        dist = rel.distance(oracle)
        expected = p.domain.dim + 2 * p.deficiency_index
        if dist >= tol or rel.dim != expected:
            raise DecompositionMismatch(
                f"assembled adjoint (dim {rel.dim}, expected {expected}) is {dist:.3e} from the graph oracle"
            )
    return rel


@dataclass(frozen=True)
class AdjointTriple:
    """``psi = sum f_i d_i + S_D^{-1} w + u`` and ``phi = sum f_i S d_i + w``."""

    f: np.ndarray
    w: np.ndarray
    u: np.ndarray
    residual: float


def decompose(p: ExtensionProblem, psi, phi) -> AdjointTriple:
    psi = np.asarray(psi, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    k = p.kernel_frame.basis
    m, d = p.domain.dim, p.deficiency_index
    top = np.column_stack([p.domain.basis, p.s_d_inverse @ k, k])
    bottom = np.column_stack([p.action, k, np.zeros_like(k)])
    system = np.vstack([top, bottom])
    rhs = np.concatenate([psi, phi])
    coeffs, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    residual = float(np.linalg.norm(system @ coeffs - rhs))
    if residual > MEMBERSHIP_TOL * max(1.0, float(np.linalg.norm(rhs))):
        raise NotInAdjointDomain(f"pair lies {residual:.3e} away from the adjoint relation")
    f = coeffs[:m]
    w = k @ coeffs[m : m + d]
    u = k @ coeffs[m + d :]
    return AdjointTriple(f, w, u, residual)


def _require_in_gap(p: ExtensionProblem, z: complex):
    if np.isreal(z) and float(np.real(z)) not in p.gap:
        raise NotInGap(f"{np.real(z)} is not inside the gap {p.gap}")


def deficiency_space(p: ExtensionProblem, z: complex) -> Frame:
    """``ker(S* - z)``: all ``psi`` with ``(psi, z psi)`` in the adjoint relation."""
    _require_in_gap(p, z)
    n = p.dim
    rel = adjoint_relation(p, check=False)
    lift = np.vstack([np.eye(n), z * np.eye(n)])
    outside = lift - rel.graph.project(lift)
    return linalg.canonical_basis(linalg.null_space(outside, 1e-9))


def deficiency_index(p: ExtensionProblem) -> int:
    return deficiency_space(p, 0.0).dim


@dataclass(frozen=True)
class BirmanParameter:
    """Self-adjoint ``T`` on a subspace of ``ker S*``.

    ``matrix`` is Hermitian in the coordinates of ``support``. An empty
    support encodes the choice ``T = infinity`` (``S_T = S_D``).
    """

    support: Frame
    matrix: np.ndarray

    def __post_init__(self):
        m = linalg.check_hermitian(np.asarray(self.matrix, complex).reshape(self.support.dim, self.support.dim), 1e-10)
        object.__setattr__(self, "matrix", m)

    @property
    def operator(self) -> np.ndarray:
        """``T`` as an ``N x N`` matrix (zero off the support)."""
        f = self.support.basis
        return f @ self.matrix @ f.conj().T

    def kernel(self) -> Frame:
        if self.support.dim == 0:
            return Frame.empty(self.support.ambient_dim)
        values, vecs = linalg.hermitian_eigs(self.matrix)
        scale = max(1.0, float(np.max(np.abs(values))))
        null = vecs.basis[:, np.abs(values) <= DEFAULT_TOL * scale]
        return linalg.orthonormalize(self.support.basis @ null, DEFAULT_TOL, self.support.ambient_dim)


def scalar_parameter(p: ExtensionProblem, beta: float) -> BirmanParameter:
    """``T = beta`` on all of ``ker S*`` (``beta = inf`` gives the empty support)."""
    if math.isinf(beta):
        return BirmanParameter(Frame.empty(p.dim), np.zeros((0, 0)))
    k = p.kernel_frame
    return BirmanParameter(k, beta * np.eye(k.dim))


@dataclass(frozen=True)
class SelfAdjointExtension:
    relation: LinearRelation
    parameter: BirmanParameter | None = None
    label: str = ""
    notes: dict = field(default_factory=dict)


def build_extension(p: ExtensionProblem, t: BirmanParameter) -> SelfAdjointExtension:
    """``S_T``: the restriction of ``S*`` to ``{f + S_D^{-1}(T v + w) + v}``."""
    k = p.kernel_frame
    if t.support.ambient_dim != p.dim:
        raise ParameterNotInKernel("support lives in the wrong ambient space")
    leak = k.residual(t.support.basis) if t.support.dim else 0.0
    if leak > DEFAULT_TOL:
        raise ParameterNotInKernel(f"support leaves ker S* by {leak:.3e}")
    sup = t.support.basis
    tv = sup @ t.matrix
    # W = ker S* ⊖ support, in kernel coordinates
    w_coords = linalg.complement(linalg.orthonormalize(k.basis.conj().T @ sup, DEFAULT_TOL, k.dim))
    w = k.basis @ w_coords.basis
    inv = p.s_d_inverse
    inputs = np.column_stack([p.domain.basis, inv @ tv + sup, inv @ w])
    outputs = np.column_stack([p.action, tv, w])
    return SelfAdjointExtension(relations.from_pairs(p.dim, inputs, outputs), t, "birman")


@dataclass(frozen=True)
class InvertibilityReport:
    kernel: Frame
    t_kernel: Frame
    kernel_distance: float
    injective: bool
    surjective: bool
    invertible: bool
    t_injective: bool
    t_surjective: bool
    t_invertible: bool

    @property
    def consistent(self) -> bool:
        return (
            self.kernel_distance < 1e-9
            and self.injective == self.t_injective
            and self.surjective == self.t_surjective
            and self.invertible == self.t_invertible
        )


def invertibility_report(ext: SelfAdjointExtension, t: BirmanParameter | None = None) -> InvertibilityReport:
    t = t if t is not None else ext.parameter
    rel = ext.relation
    n = rel.ambient_dim
    ker = relations.kernel(rel)
    ran = relations.range_(rel)
    mult = relations.multivalued_part(rel)
    injective = ker.dim == 0
    surjective = ran.dim == n
    t_ker = t.kernel()
    t_inj = t_ker.dim == 0
    # T acts on a finite-dimensional support, where the three notions coincide
    return InvertibilityReport(
        kernel=ker,
        t_kernel=t_ker,
        kernel_distance=linalg.subspace_distance(ker, t_ker),
        injective=injective,
        surjective=surjective,
        invertible=injective and surjective and mult.dim == 0,
        t_injective=t_inj,
        t_surjective=t_inj,
        t_invertible=t_inj,
    )


def krein_type_extension(p: ExtensionProblem, lam: float) -> SelfAdjointExtension:
    """``S*`` restricted to ``D(S) + ker(S* - lam)``; ``lam`` becomes an eigenvalue."""
    defic = deficiency_space(p, lam)
    inputs = np.column_stack([p.domain.basis, defic.basis])
    outputs = np.column_stack([p.action, lam * defic.basis])
    return SelfAdjointExtension(relations.from_pairs(p.dim, inputs, outputs), None, f"krein_type({lam})")


def beta_unital(p: ExtensionProblem, lam: float) -> float:
    """Scalar Birman parameter of the Krein-type extension at ``lam`` (deficiency 1).

    Returns ``lam * <w0, S_D (S_D - lam)^{-1} w0>`` for the unit kernel vector
    ``w0``, or ``inf`` when its magnitude exceeds 1e12.
    """
    if p.deficiency_index != 1:
        raise NotUnital(f"deficiency index is {p.deficiency_index}, not 1")
    _require_in_gap(p, lam)
    w0 = p.kernel_frame.basis[:, 0]
    try:
        h = linalg.solve(p.s_d - lam * np.eye(p.dim), w0)
    except linalg.Singular:
        # lam in the spectrum of S_D: the Friedrichs-type corner
        return math.inf
    beta = lam * np.vdot(w0, p.s_d @ h)
    if abs(beta) > BETA_INFINITY:
        return math.inf
    return float(beta.real)


def shift(p: ExtensionProblem, c: float) -> ExtensionProblem:
    """The problem for ``S - c`` (with ``S_D - c`` and the gap moved by ``-c``)."""
    q = ExtensionProblem(
        p.domain,
        p.action - c * p.domain.basis,
        p.s_d - c * np.eye(p.dim),
        p.gap.shifted(c),
    )
    cond = linalg.condition_number(q.s_d)
    if not cond < linalg.COND_LIMIT:
        raise NotInvertibleSD(f"S_D - {c} is singular (condition {cond:.3e})")
    validate(q)
    return q


def random_problem(
    rng: np.random.Generator,
    n: int,
    d: int,
    b: float | None = None,
    spread: float = 5.0,
    max_tries: int = 100,
) -> ExtensionProblem:
    """Seeded random semibounded problem with gap ``(-inf, b)`` and deficiency ``d``.

    In a random unitary basis ``[Q P]`` the extension is the block matrix
    ``[[A, B*], [B, C]]`` where ``A >= b + 0.1`` is the form of ``S`` and
    ``C = b + B (A - b)^{-1} B* + R`` with ``R`` positive definite, so
    ``S_D >= b`` and its spectrum avoids the gap.
    """
    if not 1 <= d < n:
        raise ValueError("need 1 <= d < n")
    m = n - d
    for _ in range(max_tries):
        bb = float(rng.uniform(0.5, 2.0)) if b is None else b
        z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        unitary, _ = np.linalg.qr(z)
        q, pc = unitary[:, :m], unitary[:, m:]
        x = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        evs, _ = np.linalg.qr(x)
        a = evs @ np.diag(rng.uniform(bb + 0.1, bb + spread, size=m)) @ evs.conj().T
        bmat = rng.normal(size=(d, m)) + 1j * rng.normal(size=(d, m))
        y = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        r = y @ y.conj().T / d + 0.5 * np.eye(d)
        c = bb * np.eye(d) + bmat @ np.linalg.solve(a - bb * np.eye(m), bmat.conj().T) + r
        block = np.block([[a, bmat.conj().T], [bmat, c]])
        block = (block + block.conj().T) / 2
        s_d = unitary @ block @ unitary.conj().T
        s_d = (s_d + s_d.conj().T) / 2
        frame = linalg.orthonormalize(q, DEFAULT_TOL, n)
        prob = ExtensionProblem(frame, s_d @ frame.basis, s_d, GapInterval(-math.inf, bb))
        try:
            validate(prob)
        except ValidationError:
            continue
        if prob.deficiency_index == d and check_gap(prob, prob.gap):
            return prob
    raise RuntimeError("could not draw a valid random problem")


def toy_t2() -> ExtensionProblem:
    """``N = 2``, ``S e1 = 2 e1``, ``S_D = diag(2, 1)``, gap ``(-inf, 2)``."""
    return ExtensionProblem(Frame(np.eye(2)[:, :1]), np.array([[2.0], [0.0]]), np.diag([2.0, 1.0]), GapInterval(-math.inf, 2.0))


def toy_t4() -> ExtensionProblem:
    """``N = 4``, ``S = diag(2, 3)`` on ``span{e1, e2}``, ``S_D = diag(2, 3, 1, 1)``."""
    e = np.eye(4)
    return ExtensionProblem(
        Frame(e[:, :2]), np.column_stack([2 * e[:, 0], 3 * e[:, 1]]), np.diag([2.0, 3.0, 1.0, 1.0]), GapInterval(-math.inf, 2.0)
    )
