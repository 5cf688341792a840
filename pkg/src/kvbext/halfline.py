"""The operator ``-d^2/dt^2 + 1`` on the half-line, in exact exp-poly arithmetic.

Facts used below (all closed form):

* ``ker S* = span{e^{-t}}`` and ``ker(S* - lam) = span{e^{-s t}}`` with
  ``s = sqrt(1 - lam)``; the lower bound of ``S`` is 1, so the gap is
  ``(-inf, 1)``.
* The distinguished extension is the Friedrichs one (Dirichlet condition
  ``f(0) = 0``); its resolvent is :func:`kvbext.expoly.dirichlet_solve`.
* ``D(S-bar)`` consists of ``H^2`` functions with ``x(0) = x'(0) = 0``. For
  ``x`` with ``x(0) = 0`` one has ``<e^{-t}, -x'' + x> = x'(0)``, so solving
  ``-x'' + x = v - z`` with a Dirichlet condition gives ``x'(0) = 0``
  automatically once ``v - z`` is orthogonal to ``e^{-t}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DecompositionMismatch, NotInGap
from .expoly import ExpPoly, apply_operator, decay_for, dirichlet_solve, friedrichs_solve, inner
from .kvb_core import GapInterval

KERNEL_DECAY = 1.0
COMPAT_TOL = 1e-12
SWEEP_TOL = 1e-10
GAP = GapInterval(-math.inf, 1.0)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam < 1:
        raise NotInGap(f"lambda = {lam} is not in the gap (-inf, 1)")
    return lam


def deficiency_fn(lam: float) -> ExpPoly:
    """``e^{-t sqrt(1 - lam)}``, spanning ``ker(S* - lam)``."""
    return ExpPoly.exp(decay_for(_check_lambda(lam)))


def kernel_fn() -> ExpPoly:
    return ExpPoly.exp(KERNEL_DECAY)


def beta_closed(lam: float) -> float:
    """``2 lam / (sqrt(1 - lam) + 1)``."""
    lam = _check_lambda(lam)
    return 2 * lam / (decay_for(lam) + 1)


def beta_general(lam: float) -> float:
    """``lam <z, S_F (S_F - lam)^{-1} z> / |z|^2`` with ``z = e^{-t}``, via the Green solve."""
    lam = _check_lambda(lam)
    z = kernel_fn()
    resolved = dirichlet_solve(z, lam)
    value = lam * inner(z, apply_operator(resolved)) / inner(z, z)
    return float(value.real)


@dataclass
class ExampleReport:
    lam: float
    p: complex
    beta_closed: float
    beta_general: float
    q: complex | None = None
    v: ExpPoly | None = None
    z: ExpPoly | None = None
    w: ExpPoly | None = None
    u: ExpPoly | None = None
    h: ExpPoly | None = None
    sf_h: ExpPoly | None = None
    sign_flag: str = "UNDEFINED"
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def q_over_p(self) -> complex | None:
        return None if self.q is None else self.q / self.p

    def to_json(self) -> dict:
        def ep(f):
            return None if f is None else f.to_json()

        def cx(c):
            return None if c is None else [c.real, c.imag]

        return {
            "lambda": self.lam,
            "p": cx(self.p),
            "q": cx(self.q),
            "q_over_p": cx(self.q_over_p),
            "v": ep(self.v),
            "z": ep(self.z),
            "w": ep(self.w),
            "u": ep(self.u),
            "h": ep(self.h),
            "S_F_h": ep(self.sf_h),
            "beta_closed": self.beta_closed,
            "beta_general": self.beta_general,
            "sign_flag": self.sign_flag,
            "residuals": self.residuals,
        }


def _sign_flag(computed: ExpPoly, printed: ExpPoly) -> str:
    if computed.is_close(printed):
        return "MATCH"
    if computed.is_close(-printed):
        return "OPPOSITE"
    return "MISMATCH"


def reproduce_example(lam: float, p: complex = 1.0) -> ExampleReport:
    """End-to-end unital computation for the deficiency vector ``v = p e^{-st}``.

    ``w = S_F^{-1} v`` is computed from the ODE and boundary condition and
    compared with the reference closed form ``-(p/lam)(e^{-st} - e^{-t})``;
    ``sign_flag`` says whether they agree, differ by a sign, or neither.
    At ``lam = 0`` only the two values of beta are reported.
    """
    lam = _check_lambda(lam)
    p = complex(p)
    report = ExampleReport(lam, p, beta_closed(lam), beta_general(lam))
    if lam == 0:
        return report
    s = decay_for(lam)
    e1 = kernel_fn()
    es = deficiency_fn(lam)
    v = p * es
    q = inner(e1, v) / inner(e1, e1)
    z = q * e1
    w = friedrichs_solve(v)
    u = v - lam * w
    h = dirichlet_solve(e1, lam)
    sf_h = apply_operator(h)
    printed_w = -(p / lam) * (es - e1)
    report.q, report.v, report.z, report.w, report.u, report.h, report.sf_h = q, v, z, w, u, h, sf_h
    report.sign_flag = _sign_flag(w, printed_w)
    report.residuals = {
        "q_closed_form": abs(q - 2 * p / (s + 1)),
        "u_minus_p_kernel": (u - p * e1).max_abs_coefficient(),
        "S_w_minus_v": (apply_operator(w) - v).max_abs_coefficient(),
        "w_at_zero": abs(w.at_zero()),
        "h_closed_form": (h - (es - e1) / lam).max_abs_coefficient(),
        "S_F_h_minus_deficiency": (sf_h - es).max_abs_coefficient(),
        "h_at_zero": abs(h.at_zero()),
        "beta_routes": abs(report.beta_closed - report.beta_general),
    }
    return report


@dataclass(frozen=True)
class SweepRow:
    lam: float
    beta_closed: float
    beta_general: float

    @property
    def abs_diff(self) -> float:
        return abs(self.beta_closed - self.beta_general)


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]

    @property
    def max_abs_diff(self) -> float:
        return max((r.abs_diff for r in self.rows), default=0.0)

    @property
    def monotone(self) -> bool:
        """Strictly increasing in ``lam`` (over the sorted grid)."""
        rows = sorted(self.rows, key=lambda r: r.lam)
        return all(b.beta_closed > a.beta_closed for a, b in zip(rows, rows[1:]) if b.lam > a.lam)

    @property
    def agrees(self) -> bool:
        return self.max_abs_diff < SWEEP_TOL


def beta_sweep(grid: Sequence[float]) -> SweepResult:
    return SweepResult([SweepRow(float(x), beta_closed(x), beta_general(x)) for x in grid])


def endpoint_probe(exponents: Sequence[int] = range(2, 9)) -> tuple[SweepResult, str]:
    """Sweep ``lam = 1 - 10^{-k}`` and describe what beta does near the gap edge."""
    result = beta_sweep([1 - 10.0 ** (-k) for k in exponents])
    if not result.rows:
        return result, "no points"
    last = result.rows[-1]
    growth = last.beta_closed - result.rows[0].beta_closed
    note = (
        f"beta({last.lam!r}) = {last.beta_closed:.17g}; beta stays bounded near lambda = 1 "
        f"and approaches 2 (sqrt(1 - lambda) -> 0 in the closed form), rising by {growth:.3g} over the probe; "
        f"divergence to +inf is not observed. Both routes agree to {result.max_abs_diff:.3g}."
    )
    return result, note


def rayleigh_quotient(x: ExpPoly) -> float:
    """``<x, S x> / |x|^2``."""
    return float((inner(x, apply_operator(x)) / inner(x, x)).real)


def bump(sigma: float) -> ExpPoly:
    """``(e^{-sigma t} - e^{-2 sigma t})^2``, an element of ``D(S-bar)`` (value and slope vanish at 0)."""
    return ExpPoly.from_terms([(0, 2 * sigma, 1.0), (0, 3 * sigma, -2.0), (0, 4 * sigma, 1.0)])


# ---------------------------------------------------------------------------
# M-copy backend


@dataclass(frozen=True, eq=False)
class HalfLineVector:
    parts: tuple[ExpPoly, ...]

    __array_ufunc__ = None

    def __add__(self, other: HalfLineVector) -> HalfLineVector:
        return HalfLineVector(tuple(a + b for a, b in zip(self.parts, other.parts)))

    def __sub__(self, other: HalfLineVector) -> HalfLineVector:
        return HalfLineVector(tuple(a - b for a, b in zip(self.parts, other.parts)))

    def __mul__(self, s) -> HalfLineVector:
        s = complex(s)
        return HalfLineVector(tuple(s * a for a in self.parts))

    __rmul__ = __mul__

    def __neg__(self) -> HalfLineVector:
        return HalfLineVector(tuple(-a for a in self.parts))

    def to_json(self) -> list:
        return [a.to_json() for a in self.parts]


def _mixing_matrix(m: int) -> np.ndarray:
    """Real orthogonal matrix whose first column is ``(1, ..., 1)/sqrt(m)`` (a Householder reflection)."""
    target = np.full(m, 1 / math.sqrt(m))
    w = np.eye(m)[0] - target
    nrm = np.dot(w, w)
    if nrm == 0:
        return np.eye(m)
    return np.eye(m) - 2 * np.outer(w, w) / nrm


class HalfLineBackend:
    """Orthogonal sum of ``copies`` half-line operators, ``S_D`` the Friedrichs extension in each.

    With ``mixing=True`` the deficiency frames are rotated across copies, so
    the pipeline chooses eigenvectors spread over several copies.
    """

    gap = GAP

    def __init__(self, copies: int, mixing: bool = False):
        if copies < 1:
            raise ValueError("need at least one copy")
        self.copies = copies
        self.mixing = mixing
        self._mix = _mixing_matrix(copies) if mixing else np.eye(copies)

    def _single(self, j: int, f: ExpPoly) -> HalfLineVector:
        return HalfLineVector(tuple(f if i == j else ExpPoly() for i in range(self.copies)))

    def zero(self) -> HalfLineVector:
        return HalfLineVector(tuple(ExpPoly() for _ in range(self.copies)))

    def inner(self, f: HalfLineVector, g: HalfLineVector) -> complex:
        return sum((inner(a, b) for a, b in zip(f.parts, g.parts)), 0j)

    def apply_adjoint(self, f: HalfLineVector) -> HalfLineVector:
        return HalfLineVector(tuple(apply_operator(a) for a in f.parts))

    def sd_inverse(self, g: HalfLineVector) -> HalfLineVector:
        return HalfLineVector(tuple(friedrichs_solve(a) for a in g.parts))

    def sd_resolvent(self, g: HalfLineVector, lam: float) -> HalfLineVector:
        lam = _check_lambda(lam)
        return HalfLineVector(tuple(dirichlet_solve(a, lam) for a in g.parts))

    def kernel_frame(self) -> list[HalfLineVector]:
        unit = math.sqrt(2.0) * kernel_fn()
        return [self._single(j, unit) for j in range(self.copies)]

    def deficiency_frame(self, lam: float) -> list[HalfLineVector]:
        s = decay_for(_check_lambda(lam))
        unit = math.sqrt(2 * s) * ExpPoly.exp(s)
        return [
            HalfLineVector(tuple(float(self._mix[i, j]) * unit for i in range(self.copies)))
            for j in range(self.copies)
        ]

    def sbar_decompose(self, v: HalfLineVector) -> tuple[HalfLineVector, HalfLineVector]:
        z = self.zero()
        for k in self.kernel_frame():
            z = z + self.inner(k, v) * k
        x = self.sd_inverse(v - z)
        scale = max(1.0, math.sqrt(max(self.inner(v, v).real, 0.0)))
        slope = max(abs(a.derivative_at_zero()) for a in x.parts)
        if slope > COMPAT_TOL * scale:
            raise DecompositionMismatch(f"x'(0) = {slope:.3e}; the Dirichlet solve left D(S-bar)")
        return x, z

    def domain_residual(self, x: HalfLineVector) -> float:
        return max(abs(a.at_zero()) + abs(a.derivative_at_zero()) for a in x.parts)


def as_backend(copies: int, mixing: bool = False) -> HalfLineBackend:
    return HalfLineBackend(copies, mixing)
