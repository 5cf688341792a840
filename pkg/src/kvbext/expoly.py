"""Exponential polynomials ``sum c t^k e^{-a t}`` on the half-line.

The class is closed under ``-d^2/dt^2 + kappa^2``, under its Dirichlet
Green solve, and under ``L^2(0, inf)`` inner products, all in closed form:

    ∫_0^∞ t^n e^{-s t} dt = n! / s^(n+1).

Decay rates are compared by exact float equality. They are never computed
approximately except through :func:`decay_for`, which is memoized so equal
spectral parameters always produce the identical double.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache

COEFF_TOL = 1e-14
_EPS = 2.220446049250313e-16


@lru_cache(maxsize=None)
def decay_for(lam: float) -> float:
    """``sqrt(1 - lam)``, the decay of the L^2 solution of ``-f'' + f = lam f``."""
    if not lam < 1:
        raise ValueError(f"no decaying solution for lam={lam} >= 1")
    return math.sqrt(1.0 - lam)


@dataclass(frozen=True)
class ExpPoly:
    """Canonical sorted tuple of ``(k, a, c)`` terms with distinct ``(k, a)``."""

    terms: tuple = ()

    @classmethod
    def from_terms(cls, terms) -> ExpPoly:
        acc: dict = defaultdict(complex)
        scale: dict = defaultdict(float)
        for k, a, c in terms:
            k, a, c = int(k), float(a), complex(c)
            if k < 0:
                raise ValueError("negative degree")
            if not a > 0:
                raise ValueError(f"decay {a} is not positive; the function would not be in L^2")
            acc[(k, a)] += c
            scale[(k, a)] = max(scale[(k, a)], abs(c))
        kept = [(k, a, c) for (k, a), c in acc.items() if abs(c) > COEFF_TOL * scale[(k, a)] and c != 0]
        kept.sort(key=lambda t: (t[1], t[0]))
        return cls(tuple(kept))

    @classmethod
    def exp(cls, a: float, c: complex = 1.0, k: int = 0) -> ExpPoly:
        return cls.from_terms([(k, a, c)])

    @classmethod
    def zero(cls) -> ExpPoly:
        return cls(())

    def __add__(self, other: ExpPoly) -> ExpPoly:
        return ExpPoly.from_terms(self.terms + other.terms)

    def __sub__(self, other: ExpPoly) -> ExpPoly:
        return self + (-other)

    def __neg__(self) -> ExpPoly:
        return ExpPoly(tuple((k, a, -c) for k, a, c in self.terms))

    def __mul__(self, s) -> ExpPoly:
        s = complex(s)
        if s == 0:
            return ExpPoly()
        return ExpPoly(tuple((k, a, s * c) for k, a, c in self.terms))

    __rmul__ = __mul__

    def __truediv__(self, s) -> ExpPoly:
        return self * (1 / complex(s))

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __call__(self, t: float) -> complex:
        return sum(c * t**k * math.exp(-a * t) for k, a, c in self.terms)

    def coefficient(self, k: int, a: float) -> complex:
        for kk, aa, c in self.terms:
            if kk == k and aa == a:
                return c
        return 0j

    def at_zero(self) -> complex:
        return sum((c for k, _, c in self.terms if k == 0), 0j)

    def derivative(self) -> ExpPoly:
        out = []
        for k, a, c in self.terms:
            out.append((k, a, -a * c))
            if k:
                out.append((k - 1, a, k * c))
        return ExpPoly.from_terms(out)

    def derivative_at_zero(self) -> complex:
        return self.derivative().at_zero()

    def conj(self) -> ExpPoly:
        return ExpPoly(tuple((k, a, c.conjugate()) for k, a, c in self.terms))

    def norm(self) -> float:
        return math.sqrt(max(inner(self, self).real, 0.0))

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for *_, c in self.terms), default=0.0)

    def is_close(self, other: ExpPoly, tol: float = 1e-12) -> bool:
        """Coefficientwise comparison, relative to the larger coefficient magnitude."""
        scale = max(1.0, self.max_abs_coefficient(), other.max_abs_coefficient())
        return (self - other).max_abs_coefficient() <= tol * scale

    def to_json(self) -> dict:
        return {"terms": [{"k": k, "a": a, "c": [c.real, c.imag]} for k, a, c in self.terms]}

    @classmethod
    def from_json(cls, data: dict) -> ExpPoly:
        return cls.from_terms((t["k"], t["a"], complex(*t["c"])) for t in data["terms"])

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for k, a, c in self.terms:
            poly = "" if k == 0 else ("t " if k == 1 else f"t^{k} ")
            parts.append(f"({c:.6g}) {poly}e^(-{a:.6g} t)")
        return " + ".join(parts)


def inner(f: ExpPoly, g: ExpPoly) -> complex:
    """``<f, g> = ∫ conj(f) g``, antilinear in the first slot."""
    total = 0j
    for k1, a1, c1 in f.terms:
        for k2, a2, c2 in g.terms:
            n = k1 + k2
            total += c1.conjugate() * c2 * math.factorial(n) / (a1 + a2) ** (n + 1)
    return total


def apply_operator(f: ExpPoly, kappa_sq: float = 1.0) -> ExpPoly:
    """``-f'' + kappa_sq f``, termwise.

    ``(-D^2 + κ²)(t^k e^{-at}) = [(κ² - a²) t^k + 2ak t^{k-1} - k(k-1) t^{k-2}] e^{-at}``.
    """
    out = []
    for k, a, c in f.terms:
        factor = kappa_sq - a * a
        if abs(factor) <= 4 * _EPS * max(kappa_sq, a * a):
            # a is decay_for(lam) and kappa_sq is 1 - lam: equal up to rounding
            factor = 0.0
        out.append((k, a, factor * c))
        if k >= 1:
            out.append((k - 1, a, 2 * a * k * c))
        if k >= 2:
            out.append((k - 2, a, -k * (k - 1) * c))
    return ExpPoly.from_terms(out)


def _solve_class(poly: dict[int, complex], a: float, kappa: float, kappa_sq: float) -> dict[int, complex]:
    """Polynomial ``Q`` with ``(κ²-a²) Q + 2a Q' - Q'' = P`` (``Q(0) = 0`` in the resonant case)."""
    top = max(poly)
    p = [poly.get(j, 0j) for j in range(top + 1)]
    if a != kappa:
        delta = kappa_sq - a * a
        q = [0j] * (top + 3)
        for j in range(top, -1, -1):
            q[j] = (p[j] - 2 * a * (j + 1) * q[j + 1] + (j + 2) * (j + 1) * q[j + 2]) / delta
        return {j: q[j] for j in range(top + 1)}
    # resonant: R = Q' solves 2a R - R' = P, then integrate
    r = [0j] * (top + 2)
    for j in range(top, -1, -1):
        r[j] = (p[j] + (j + 1) * r[j + 1]) / (2 * a)
    return {j + 1: r[j] / (j + 1) for j in range(top + 1)}


def dirichlet_solve(g: ExpPoly, lam: float = 0.0) -> ExpPoly:
    """The L^2 solution of ``-w'' + (1 - lam) w = g`` with ``w(0) = 0``.

    This is ``(S_F - lam)^{-1} g`` for the Friedrichs extension of
    ``-d^2/dt^2 + 1``; ``lam = 0`` gives ``S_F^{-1}``. The only decaying
    homogeneous solution is ``e^{-kappa t}``, whose coefficient is fixed by
    the boundary condition. A source term with decay exactly ``kappa``
    raises the polynomial degree instead of being perturbed.
    """
    kappa = decay_for(lam)
    kappa_sq = 1.0 - lam
    classes: dict[float, dict[int, complex]] = defaultdict(dict)
    for k, a, c in g.terms:
        classes[a][k] = c
    out = []
    for a, poly in classes.items():
        for k, c in _solve_class(poly, a, kappa, kappa_sq).items():
            out.append((k, a, c))
    particular = ExpPoly.from_terms(out)
    return particular - ExpPoly.exp(kappa, particular.at_zero()) if particular.at_zero() != 0 else particular


def friedrichs_solve(g: ExpPoly) -> ExpPoly:
    """``S_F^{-1} g``: the L^2 solution of ``-w'' + w = g`` with ``w(0) = 0``."""
    return dirichlet_solve(g, 0.0)
