"""Self-adjoint extensions with prescribed eigenvalues inside the gap.

Given targets ``lam_1, lam_2, ...`` in the gap, the pipeline picks an
orthonormal system ``v_n`` with ``S* v_n = lam_n v_n``, lifts it into the
kernel of ``S*`` via ``u_n = (S_D - lam_n) S_D^{-1} v_n``, and defines the
Birman parameter ``T`` on ``span{u_n}`` through the sesquilinear form

    <u_m, T u_n> = lam_n <u_m, v_n>.

The extension ``S_T`` then has every ``lam_n`` as an eigenvalue. Each run
records the intermediate objects and the residuals of the identities that
make this work in an :class:`EngineeringCertificate`.

The pipeline only talks to a :class:`HilbertBackend`, so the same code runs
on the finite relation model (:class:`RelationBackend`) and on the exact
half-line model (:class:`kvbext.halfline.HalfLineBackend`).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

import numpy as np

from . import kvb_core, linalg, relations
from .errors import (
    DeficiencyExhausted,
    EmptyIntersection,
    FormNotHermitian,
    GapMismatch,
    IllConditionedGram,
    NotInGap,
)
from .kvb_core import BirmanParameter, ExtensionProblem, GapInterval, SelfAdjointExtension
from .linalg import DEFAULT_TOL, Frame

GRAM_COND_LIMIT = 1e8
FORM_TOL = 1e-9
CERTIFICATE_TOL = 1e-9


class HilbertBackend(Protocol):
    """Operations the pipeline needs from a model of ``H``, ``S`` and ``S_D``.

    Elements support ``+``, ``-`` and multiplication by complex scalars.
    """

    gap: GapInterval

    def zero(self) -> Any: ...

    def inner(self, f, g) -> complex: ...

    def apply_adjoint(self, f) -> Any:
        """``S* f``."""

    def sd_inverse(self, g) -> Any:
        """``S_D^{-1} g``."""

    def sd_resolvent(self, g, lam: float) -> Any:
        """``(S_D - lam)^{-1} g``."""

    def kernel_frame(self) -> list:
        """Orthonormal basis of ``ker S*``."""

    def deficiency_frame(self, lam: float) -> list:
        """Orthonormal basis of ``ker(S* - lam)``."""

    def sbar_decompose(self, v) -> tuple:
        """``(x, z)`` with ``v = S x + z``, ``x`` in the closed domain, ``z`` in ``ker S*``."""

    def domain_residual(self, x) -> float:
        """How far ``x`` is from the domain of the closure of ``S`` (0 when inside)."""


def norm(backend: HilbertBackend, f) -> float:
    return math.sqrt(max(backend.inner(f, f).real, 0.0))


def combine(backend: HilbertBackend, coeffs, vecs) -> Any:
    out = backend.zero()
    for c, v in zip(coeffs, vecs):
        if c != 0:
            out = out + complex(c) * v
    return out


def gram_matrix(backend: HilbertBackend, left, right=None) -> np.ndarray:
    right = left if right is None else right
    return np.array([[backend.inner(a, b) for b in right] for a in left], dtype=complex).reshape(len(left), len(right))


def orthonormal_complement(backend: HilbertBackend, basis: list, against: list, tol: float = DEFAULT_TOL) -> list:
    """Orthonormal basis of ``span(basis) ⊖ span(against)``; ``against`` must be orthonormal."""
    out: list = []
    for b in basis:
        r = b
        for _ in range(2):
            for q in list(against) + out:
                r = r - backend.inner(q, r) * q
        nrm = norm(backend, r)
        if nrm > tol * max(1.0, norm(backend, b)):
            out.append(r * (1 / nrm))
    return out


# ---------------------------------------------------------------------------
# relation backend


@dataclass(frozen=True, eq=False)
class GraphVector:
    """Element ``psi`` of ``H`` tagged with one ``S*``-image ``phi``.

    In finite dimension ``S*`` is multivalued, so the image has to travel
    with the vector. ``phi`` is ``None`` for vectors not known to lie in
    ``D(S*)`` (for example the output of ``S*`` itself).
    """

    psi: np.ndarray
    phi: np.ndarray | None

    __array_ufunc__ = None

    def __add__(self, other: GraphVector) -> GraphVector:
        phi = None if self.phi is None or other.phi is None else self.phi + other.phi
        return GraphVector(self.psi + other.psi, phi)

    def __sub__(self, other: GraphVector) -> GraphVector:
        return self + (-1.0) * other

    def __mul__(self, s) -> GraphVector:
        return GraphVector(s * self.psi, None if self.phi is None else s * self.phi)

    __rmul__ = __mul__

    def __neg__(self) -> GraphVector:
        return (-1.0) * self


class RelationBackend:
    """:class:`HilbertBackend` over a finite :class:`~kvbext.kvb_core.ExtensionProblem`."""

    def __init__(self, problem: ExtensionProblem):
        self.problem = problem
        self.gap = problem.gap
        self._n = problem.dim

    def zero(self) -> GraphVector:
        z = np.zeros(self._n, dtype=complex)
        return GraphVector(z, z.copy())

    def inner(self, f: GraphVector, g: GraphVector) -> complex:
        return complex(np.vdot(f.psi, g.psi))

    def apply_adjoint(self, f: GraphVector) -> GraphVector:
        if f.phi is None:
            raise ValueError("vector carries no S* image")
        return GraphVector(f.phi, None)

    def sd_inverse(self, g: GraphVector) -> GraphVector:
        return GraphVector(self.problem.s_d_inverse @ g.psi, g.psi.copy())

    def sd_resolvent(self, g: GraphVector, lam: float) -> GraphVector:
        h = linalg.solve(self.problem.s_d - lam * np.eye(self._n), g.psi)
        return GraphVector(h, self.problem.s_d @ h)

    def kernel_frame(self) -> list[GraphVector]:
        z = np.zeros(self._n, dtype=complex)
        return [GraphVector(k, z.copy()) for k in self.problem.kernel_frame.columns]

    def deficiency_frame(self, lam: float) -> list[GraphVector]:
        return [GraphVector(k, lam * k) for k in kvb_core.deficiency_space(self.problem, lam).columns]

    def sbar_decompose(self, v: GraphVector) -> tuple[GraphVector, GraphVector]:
        p = self.problem
        coeffs, *_ = np.linalg.lstsq(p.action, v.psi, rcond=None)
        sx = p.action @ coeffs
        z = v.psi - sx
        return GraphVector(p.domain.basis @ coeffs, sx), GraphVector(z, np.zeros_like(z))

    def domain_residual(self, x: GraphVector) -> float:
        res = self.problem.domain.residual(x.psi)
        if x.phi is not None:
            # the image must be the one S assigns
            coeffs = self.problem.domain.basis.conj().T @ x.psi
            res = max(res, float(np.linalg.norm(x.phi - self.problem.action @ coeffs)))
        return res

    def assemble(self, birman: BirmanData) -> SelfAdjointExtension:
        """``S_T`` as a relation, with ``T`` transported to a kernel frame."""
        p = self.problem
        u = np.column_stack([x.psi for x in birman.us])
        support = linalg.orthonormalize(u, DEFAULT_TOL, p.dim)
        coords, *_ = np.linalg.lstsq(u, support.basis, rcond=None)
        matrix = support.basis.conj().T @ u @ birman.trep @ coords
        return kvb_core.build_extension(p, BirmanParameter(support, linalg.check_hermitian(matrix, 1e-8)))


# ---------------------------------------------------------------------------
# pipeline stages


def check_targets(targets: Sequence[float], gap: GapInterval) -> tuple[float, ...]:
    out = tuple(float(t) for t in targets)
    for lam in out:
        if lam not in gap:
            raise NotInGap(f"target {lam} is not inside the gap {gap}")
    return out


def select_eigensystem(
    backend: HilbertBackend, targets: Sequence[float], rng: np.random.Generator | None = None
) -> list:
    """Orthonormal ``v_n`` with ``S* v_n = lam_n v_n``, chosen one target at a time.

    By default ``v_n`` is the first vector of the canonical basis of
    ``ker(S* - lam_n) ∩ {v_1, ..., v_{n-1}}^⊥``; with ``rng`` a random unit
    vector of that intersection is used instead.
    """
    vs: list = []
    for n, lam in enumerate(targets):
        frame = backend.deficiency_frame(lam)
        if not frame:
            raise DeficiencyExhausted(f"ker(S* - {lam}) is trivial")
        if vs:
            constraints = gram_matrix(backend, vs, frame)
            free = linalg.null_space(constraints, DEFAULT_TOL)
        else:
            free = Frame.full(len(frame))
        if free.dim == 0:
            raise DeficiencyExhausted(
                f"target #{n + 1} ({lam}): ker(S* - {lam}) is exhausted by the {n} vectors already chosen"
            )
        free = linalg.canonical_basis(free)
        if rng is None:
            c = free.basis[:, 0]
        else:
            z = rng.normal(size=free.dim) + 1j * rng.normal(size=free.dim)
            c = free.basis @ (z / np.linalg.norm(z))
        v = combine(backend, c, frame)
        vs.append(v * (1 / norm(backend, v)))
    return vs


def lift_to_kernel(backend: HilbertBackend, v, lam: float):
    """``u = (S_D - lam) S_D^{-1} v = v - lam S_D^{-1} v``."""
    return v - lam * backend.sd_inverse(v)


def gram_check(backend: HilbertBackend, us: list) -> tuple[np.ndarray, float]:
    """Gram matrix of ``us`` and its condition number; rejects dependent or fragile systems."""
    g = gram_matrix(backend, us)
    if not us:
        return g, 1.0
    values, _ = linalg.hermitian_eigs(g)
    if values[0] <= 0:
        raise IllConditionedGram(f"Gram matrix is singular (smallest eigenvalue {values[0]:.3e})")
    cond = float(values[-1] / values[0])
    if cond > GRAM_COND_LIMIT:
        raise IllConditionedGram(f"Gram condition {cond:.3e} exceeds {GRAM_COND_LIMIT:.0e}")
    return g, cond


@dataclass(frozen=True, eq=False)
class BirmanData:
    """``T`` on ``U = span{u_n}``.

    ``trep`` represents ``T`` on the (non-orthonormal) basis ``u``:
    ``T u_n = sum_k trep[k, n] u_k``. ``support`` is an orthonormal basis
    ``q_j = sum_i coeffs[i, j] u_i`` of ``U`` and ``matrix`` is ``T`` in it.
    """

    us: list
    form: np.ndarray
    ttilde: np.ndarray
    gram: np.ndarray
    condition: float
    trep: np.ndarray
    coeffs: np.ndarray
    matrix: np.ndarray
    support: list
    form_hermitian_deviation: float
    form_ttilde_deviation: float

    def apply(self, backend: HilbertBackend, n: int):
        """``T u_n``."""
        return combine(backend, self.trep[:, n], self.us)


def birman_from_targets(backend: HilbertBackend, vs: list, us: list, targets: Sequence[float]) -> BirmanData:
    lam = np.asarray(targets, dtype=float)
    g, cond = gram_check(backend, us)
    form = gram_matrix(backend, us, vs) * lam[None, :]
    vv = gram_matrix(backend, vs)
    sd_inv_v = [backend.sd_inverse(v) for v in vs]
    vsv = gram_matrix(backend, vs, sd_inv_v)
    ttilde = vv * lam[None, :] - np.outer(lam, lam) * vsv
    scale = max(1.0, float(np.max(np.abs(form))) if form.size else 1.0)
    herm_dev = linalg.hermitian_deviation(form)
    if herm_dev > FORM_TOL * scale:
        raise FormNotHermitian(f"form <u_m, T u_n> deviates from Hermitian by {herm_dev:.3e}")
    tt_dev = float(np.max(np.abs(form - ttilde))) if form.size else 0.0
    if tt_dev > FORM_TOL * scale:
        raise FormNotHermitian(f"form disagrees with the v-side matrix elements by {tt_dev:.3e}")
    form = (form + form.conj().T) / 2
    trep = linalg.solve(g, form) if us else np.zeros((0, 0), complex)
    values, vecs = linalg.hermitian_eigs(g) if us else (np.zeros(0), Frame.empty(0))
    coeffs = vecs.basis @ np.diag(values**-0.5) @ vecs.basis.conj().T
    matrix = linalg.check_hermitian(coeffs.conj().T @ form @ coeffs, 1e-8)
    support = [combine(backend, coeffs[:, j], us) for j in range(len(us))]
    return BirmanData(us, form, ttilde, g, cond, trep, coeffs, matrix, support, herm_dev, tt_dev)


@dataclass(frozen=True, eq=False)
class TargetRecord:
    lam: float
    v: Any
    u: Any
    x: Any
    z: Any
    f: Any
    w: Any
    y_norm: float
    eigen_residual: float
    reconstruction_residual: float
    kernel_residual: float
    inverse_residual: float
    sbar_roundtrip: float
    sbar_orthogonality: float
    domain_residual: float

    def residuals(self) -> dict[str, float]:
        return {
            "y_norm": self.y_norm,
            "eigen_residual": self.eigen_residual,
            "reconstruction_residual": self.reconstruction_residual,
            "kernel_residual": self.kernel_residual,
            "inverse_residual": self.inverse_residual,
            "sbar_roundtrip": self.sbar_roundtrip,
            "sbar_orthogonality": self.sbar_orthogonality,
            "domain_residual": self.domain_residual,
        }


@dataclass(frozen=True, eq=False)
class EngineeringCertificate:
    records: list[TargetRecord]
    gram_condition: float
    w_dim: int
    form_hermitian_deviation: float
    form_ttilde_deviation: float

    def max_residual(self) -> float:
        vals = [r for rec in self.records for r in rec.residuals().values()]
        return max(vals + [self.form_hermitian_deviation, self.form_ttilde_deviation], default=0.0)

    def passed(self, tol: float = CERTIFICATE_TOL) -> bool:
        return self.max_residual() < tol

    def to_json(self, tol: float = CERTIFICATE_TOL) -> dict:
        return {
            "targets": [dict(lam=rec.lam, **rec.residuals()) for rec in self.records],
            "gram_condition": self.gram_condition,
            "W_dim": self.w_dim,
            "form_hermitian_deviation": self.form_hermitian_deviation,
            "form_ttilde_deviation": self.form_ttilde_deviation,
            "max_residual": self.max_residual(),
            "tol": tol,
            "passed": self.passed(tol),
        }


@dataclass(frozen=True, eq=False)
class SpectrumRow:
    eigenvalue: float
    multiplicity: int
    residual: float


@dataclass(frozen=True, eq=False)
class EngineeringResult:
    targets: tuple[float, ...]
    certificate: EngineeringCertificate
    birman: BirmanData
    extension: SelfAdjointExtension | None = None
    spectrum: list[SpectrumRow] = field(default_factory=list)
    multiplicities: dict[float, tuple[int, int]] = field(default_factory=dict)
    membership_residual: float = 0.0

    @property
    def multiplicities_ok(self) -> bool:
        return all(observed >= expected for observed, expected in self.multiplicities.values())


def engineer(
    backend: HilbertBackend | ExtensionProblem,
    targets: Sequence[float],
    rng: np.random.Generator | None = None,
) -> EngineeringResult:
    """Run the full pipeline and certify every identity of the construction.

    For each target the certificate records ``x_n, z_n`` (from
    ``v_n = S x_n + z_n``), ``f_n = lam_n x_n``, ``w_n = lam_n P_W z_n``
    with ``W = ker S* ⊖ U`` and ``y_n = T u_n + w_n - lam_n z_n``, which
    must vanish, along with ``|S* v_n - lam_n v_n|`` and the residual of
    ``v_n = f_n + S_D^{-1}(T u_n + w_n) + u_n``.

    On a relation backend the extension is also assembled and its
    eigenvalue multiplicities compared with the target repeat counts.
    """
    if isinstance(backend, ExtensionProblem):
        backend = RelationBackend(backend)
    targets = check_targets(targets, backend.gap)
    vs = select_eigensystem(backend, targets, rng)
    us = [lift_to_kernel(backend, v, lam) for v, lam in zip(vs, targets)]
    birman = birman_from_targets(backend, vs, us, targets)
    w_basis = orthonormal_complement(backend, backend.kernel_frame(), birman.support)

    records = []
    for n, (lam, v, u) in enumerate(zip(targets, vs, us)):
        x, z = backend.sbar_decompose(v)
        sx = backend.apply_adjoint(x)
        f = lam * x
        w = combine(backend, [lam * backend.inner(q, z) for q in w_basis], w_basis)
        tu = birman.apply(backend, n)
        y = tu + w - lam * z
        recon = f + backend.sd_inverse(tu + w) + u
        resolved = backend.sd_resolvent(u, lam)
        records.append(
            TargetRecord(
                lam=lam,
                v=v,
                u=u,
                x=x,
                z=z,
                f=f,
                w=w,
                y_norm=norm(backend, y),
                eigen_residual=norm(backend, backend.apply_adjoint(v) - lam * v),
                reconstruction_residual=norm(backend, recon - v),
                kernel_residual=norm(backend, backend.apply_adjoint(u)),
                inverse_residual=norm(backend, backend.apply_adjoint(resolved) - v),
                sbar_roundtrip=norm(backend, sx + z - v),
                sbar_orthogonality=abs(backend.inner(z, sx)),
                domain_residual=backend.domain_residual(x),
            )
        )
    cert = EngineeringCertificate(
        records, birman.condition, len(w_basis), birman.form_hermitian_deviation, birman.form_ttilde_deviation
    )
    result = EngineeringResult(targets, cert, birman)

    assemble = getattr(backend, "assemble", None)
    if assemble is None:
        return result
    ext = assemble(birman)
    pairs = relations.eigenpairs(ext.relation)
    counts = Counter(targets)
    mults = {}
    for lam, expected in counts.items():
        mults[lam] = (relations.multiplicity(pairs, lam), expected)
    member = max(
        (ext.relation.membership_residual(rec.v.psi, rec.lam * rec.v.psi) for rec in records), default=0.0
    )
    spectrum = [SpectrumRow(p.value, p.multiplicity, p.residual) for p in pairs]
    return EngineeringResult(targets, cert, birman, ext, spectrum, mults, member)


# ---------------------------------------------------------------------------
# direct sums


def common_gap(gaps: Sequence[GapInterval]) -> GapInterval:
    out = gaps[0]
    for g in gaps[1:]:
        out = out.intersect(g)
        if out is None:
            raise GapMismatch("the gaps have empty intersection")
    if 0.0 not in out:
        raise GapMismatch(f"common gap {out} does not contain 0")
    return out


def direct_sum(problems: Sequence[ExtensionProblem]) -> ExtensionProblem:
    """Orthogonal sum of problems; the gap is the common intersection."""
    gap = common_gap([p.gap for p in problems])
    n = sum(p.dim for p in problems)
    m = sum(p.domain.dim for p in problems)
    dom = np.zeros((n, m), dtype=complex)
    act = np.zeros((n, m), dtype=complex)
    s_d = np.zeros((n, n), dtype=complex)
    r = c = 0
    for p in problems:
        dom[r : r + p.dim, c : c + p.domain.dim] = p.domain.basis
        act[r : r + p.dim, c : c + p.domain.dim] = p.action
        s_d[r : r + p.dim, r : r + p.dim] = p.s_d
        r += p.dim
        c += p.domain.dim
    return ExtensionProblem(Frame(dom), act, s_d, gap)


@dataclass(frozen=True, eq=False)
class DirectSumResult:
    problem: ExtensionProblem
    extension: SelfAdjointExtension
    eigenpairs: list
    multiplicities: dict[float, tuple[int, int]]
    selfadjoint_defect: float
    extends_residual: float

    @property
    def multiplicities_equal(self) -> bool:
        return all(obs == exp for obs, exp in self.multiplicities.values())


def direct_sum_engineer(problems: Sequence[ExtensionProblem], lambdas: Sequence[float]) -> DirectSumResult:
    """Blockwise Krein-type extensions; each ``lambdas[k]`` becomes an eigenvalue of block ``k``."""
    if len(problems) != len(lambdas):
        raise ValueError("need exactly one target per block")
    total = direct_sum(problems)
    check_targets(lambdas, total.gap)
    blocks = [kvb_core.krein_type_extension(p, lam).relation for p, lam in zip(problems, lambdas)]
    rel = relations.direct_sum(blocks)
    ext = SelfAdjointExtension(rel, None, "direct_sum")
    pairs = relations.eigenpairs(rel)
    mults = {lam: (relations.multiplicity(pairs, lam), k) for lam, k in Counter(float(x) for x in lambdas).items()}
    return DirectSumResult(
        total,
        ext,
        pairs,
        mults,
        relations.selfadjoint_defect(rel),
        rel.contains(kvb_core.graph_of_s(total)),
    )


# ---------------------------------------------------------------------------
# classical route


@dataclass
class ComparisonReport:
    symmetric_residual: float = math.nan
    reducing_residual: float = math.nan
    hat_dim: int = 0
    hat_domain_dim: int = 0
    closure_cap_dim: int = 0
    hat_gap: kvb_core.GapVerdict | None = None
    found: bool = False
    tau: float | None = None
    scan_log: list = field(default_factory=list)
    extension: SelfAdjointExtension | None = None
    eigenvalues_confirmed: bool = False
    extension_defect: float = math.nan
    extends_residual: float = math.nan
    distance_to_engineered: float | None = None

    @property
    def verdict(self) -> str:
        return "Found" if self.found else "NotFound"

    def to_json(self) -> dict:
        return {
            "symmetric_residual": self.symmetric_residual,
            "reducing_residual": self.reducing_residual,
            "hat_dim": self.hat_dim,
            "hat_domain_dim": self.hat_domain_dim,
            "closure_cap_dim": self.closure_cap_dim,
            "hat_gap": None
            if self.hat_gap is None
            else {"branch": self.hat_gap.branch, "margin": self.hat_gap.margin, "holds": self.hat_gap.holds},
            "verdict": self.verdict,
            "tau": self.tau,
            "scan_log": self.scan_log,
            "eigenvalues_confirmed": self.eigenvalues_confirmed,
            "extension_defect": self.extension_defect,
            "extends_residual": self.extends_residual,
            "distance_to_engineered": self.distance_to_engineered,
        }


def _default_tau_grid(gap: GapInterval) -> list[float]:
    geo = np.geomspace(1e-3, 1e6, 46)
    grid = set(np.concatenate([geo, -geo]).tolist())
    for edge in (gap.a, gap.b):
        if math.isfinite(edge):
            grid.update([edge + s * o for o in (0.0, 1e-3, 0.1, 1.0) for s in (1, -1)])
    return sorted(grid, key=lambda t: (abs(t), t))


def classical_route(
    problem: ExtensionProblem,
    targets: Sequence[float],
    tau_grid: Sequence[float] | None = None,
    rng: np.random.Generator | None = None,
) -> ComparisonReport:
    """Build the symmetric extension ``S'`` on ``D(S) + span{v_n}``, split off the
    reduced part on ``span{v_n}^⊥`` and look for a gap-preserving invertible
    extension of it by scanning ``tau`` in the block completion
    ``[[A, B*], [B, tau I]]``.
    """
    report = ComparisonReport()
    targets = check_targets(targets, problem.gap)
    backend = RelationBackend(problem)
    vs = select_eigensystem(backend, targets, rng)
    n = problem.dim
    vmat = np.column_stack([v.psi for v in vs]) if vs else np.zeros((n, 0), complex)
    lam = np.asarray(targets)
    s_prime = relations.from_pairs(
        n, np.column_stack([problem.domain.basis, vmat]), np.column_stack([problem.action, vmat * lam[None, :]])
    )
    report.symmetric_residual = relations.adjoint(s_prime).contains(s_prime)
    vframe = linalg.orthonormalize(vmat, DEFAULT_TOL, n)
    proj = vframe.projector()
    block = np.vstack([proj @ s_prime.inputs, proj @ s_prime.outputs])
    report.reducing_residual = s_prime.graph.residual(block)

    perp = linalg.complement(vframe)
    e = perp.basis
    hat = relations.from_pairs(e.shape[1], e.conj().T @ s_prime.inputs, e.conj().T @ s_prime.outputs)
    hat_dom = relations.domain(hat)
    coeffs, *_ = np.linalg.lstsq(hat.inputs, hat_dom.basis, rcond=None)
    hat_act = hat.outputs @ coeffs
    report.hat_dim = perp.dim
    report.hat_domain_dim = hat_dom.dim
    report.closure_cap_dim = linalg.intersect(problem.domain, perp).dim
    report.hat_gap = kvb_core.gap_verdict(hat_dom, hat_act, problem.gap)

    # block completion of S-hat inside span{v}^⊥
    hp = linalg.complement(hat_dom)
    a_blk = hat_dom.basis.conj().T @ hat_act
    b_blk = hp.basis.conj().T @ hat_act
    basis = np.column_stack([hat_dom.basis, hp.basis])
    gap = problem.gap
    if hp.dim == 0:
        # S-hat is already everywhere defined on span{v}^⊥: nothing to complete
        grid = [0.0]
    else:
        grid = tau_grid if tau_grid is not None else _default_tau_grid(gap)
    for tau in grid:
        full = np.block([[a_blk, b_blk.conj().T], [b_blk, tau * np.eye(hp.dim)]])
        cand = basis @ full @ basis.conj().T if perp.dim else np.zeros((0, 0), complex)
        cand = (cand + cand.conj().T) / 2
        values = linalg.hermitian_eigs(cand)[0] if perp.dim else np.zeros(0)
        inside = [x for x in values if gap.a + 1e-10 < x < gap.b - 1e-10]
        ok = not inside and bool(np.all(np.abs(values) > 1e-10))
        report.scan_log.append({"tau": float(tau), "eigs_in_gap": len(inside), "accepted": ok})
        if ok:
            report.found, report.tau = True, (float(tau) if hp.dim else None)
            s_hat_d = cand
            break
    if not report.found:
        return report

    full = e @ s_hat_d @ e.conj().T + vmat @ np.diag(lam) @ vmat.conj().T
    rel = relations.from_matrix((full + full.conj().T) / 2)
    report.extension = SelfAdjointExtension(rel, None, "classical")
    report.extension_defect = relations.selfadjoint_defect(rel)
    report.extends_residual = rel.contains(kvb_core.graph_of_s(problem))
    pairs = relations.eigenpairs(rel)
    report.eigenvalues_confirmed = all(
        relations.multiplicity(pairs, x) >= k for x, k in Counter(targets).items()
    )
    try:
        engineered = engineer(RelationBackend(problem), targets, rng)
        report.distance_to_engineered = rel.distance(engineered.extension.relation)
    except Exception:  # informational only
        report.distance_to_engineered = None
    return report


# ---------------------------------------------------------------------------
# epsilon-nets


@dataclass(frozen=True)
class SetSpec:
    """Finite union of closed intervals and isolated points."""

    intervals: tuple[tuple[float, float], ...] = ()
    points: tuple[float, ...] = ()

    def clipped(self, gap: GapInterval) -> SetSpec:
        """Intersection with the closed gap ``[a, b]``."""
        ivs = []
        for x, y in self.intervals:
            lo, hi = max(min(x, y), gap.a), min(max(x, y), gap.b)
            if lo <= hi:
                ivs.append((lo, hi))
        pts = tuple(p for p in self.points if gap.a <= p <= gap.b)
        return SetSpec(tuple(ivs), pts)

    @property
    def empty(self) -> bool:
        return not self.intervals and not self.points


@dataclass(frozen=True)
class NetPlan:
    targets: tuple[float, ...]
    covering_radius: float


def _dyadic_candidates(spec: SetSpec, max_level: int = 60):
    yield from spec.points
    for lo, hi in spec.intervals:
        yield lo
        yield hi
    for level in range(1, max_level + 1):
        for lo, hi in spec.intervals:
            step = (hi - lo) / 2**level
            if step == 0:
                continue
            for j in range(1, 2**level, 2):
                yield lo + j * step


def covering_radius(spec: SetSpec, targets: Sequence[float]) -> float:
    """``max_{x in K} min_n |x - lam_n|``, evaluated exactly.

    The distance to a finite set is piecewise linear, so on an interval its
    maximum sits at an endpoint or at the midpoint of two consecutive targets.
    """
    ts = sorted(targets)
    if not ts:
        return math.inf

    def dist(x):
        return min(abs(x - t) for t in ts)

    cands = list(spec.points)
    for lo, hi in spec.intervals:
        cands += [lo, hi]
        cands += [(s + t) / 2 for s, t in zip(ts, ts[1:]) if lo <= (s + t) / 2 <= hi]
    return max((dist(x) for x in cands), default=0.0)


def net_targets(spec: SetSpec, count: int, gap: GapInterval) -> NetPlan:
    """The first ``count`` points of a deterministic dyadic enumeration of ``K ∩ (a, b)``.

    Isolated points come first, then all interval endpoints, then midpoints
    level by level, sweeping across components within each level. Prefixes
    of the enumeration are nested, so the covering radius never grows with
    ``count``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    k = spec.clipped(gap)
    if k.empty:
        raise EmptyIntersection(f"{spec} does not meet the gap {gap}")
    chosen: list[float] = []
    seen: set[float] = set()
    for x in _dyadic_candidates(k):
        if x in seen or x not in gap:
            continue
        seen.add(x)
        chosen.append(x)
        if len(chosen) == count:
            break
    if not chosen:
        raise EmptyIntersection(f"{spec} meets the gap {gap} only at its edges")
    return NetPlan(tuple(chosen), covering_radius(k, chosen))
