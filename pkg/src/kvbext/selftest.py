"""Seeded random-instance invariant suite.

Each instance is a random semibounded problem (``N <= 12``, deficiency
1 to 4) paired with a random Birman parameter. The checked invariants are:

* ``adjoint_oracle``: the three-block adjoint agrees with the graph-adjoint
  computed from the orthogonal complement;
* ``extension_selfadjoint``: ``S_T`` is self-adjoint and contains ``graph S``;
* ``kernel_match``: ``ker S_T = ker T`` as subspaces, with equal dimension;
* ``pipeline_certificate``: the prescribed-eigenvalue pipeline certifies
  random targets and reaches every repeat count.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import engineering, kvb_core, linalg, relations
from .kvb_core import BirmanParameter, ExtensionProblem

INVARIANTS = ("adjoint_oracle", "extension_selfadjoint", "kernel_match", "pipeline_certificate")
ORACLE_TOL = 1e-9


@dataclass
class SelftestReport:
    count: int
    seed: int
    passed: Counter = field(default_factory=Counter)
    failures: list[tuple[int, str, float]] = field(default_factory=list)
    worst: dict[str, float] = field(default_factory=dict)
    runtime: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures

    def record(self, index: int, name: str, value: float, tol: float = ORACLE_TOL):
        self.worst[name] = max(self.worst.get(name, 0.0), value)
        if value < tol:
            self.passed[name] += 1
        else:
            self.failures.append((index, name, value))

    def to_json(self, include_runtime: bool = False) -> dict:
        out = {
            "count": self.count,
            "seed": self.seed,
            "passed": {name: self.passed[name] for name in INVARIANTS},
            "worst": {name: self.worst.get(name, 0.0) for name in INVARIANTS},
            "failures": [{"instance": i, "invariant": n, "value": v} for i, n, v in self.failures],
            "ok": self.ok,
        }
        if include_runtime:
            out["runtime_seconds"] = self.runtime
        return out


def random_parameter(rng: np.random.Generator, p: ExtensionProblem) -> BirmanParameter:
    """Random Hermitian ``T`` on a random subspace of ``ker S*``; half the time with a kernel."""
    k = p.kernel_frame
    r = int(rng.integers(0, k.dim + 1))
    if r == 0:
        return BirmanParameter(linalg.Frame.empty(p.dim), np.zeros((0, 0)))
    mix = rng.normal(size=(k.dim, r)) + 1j * rng.normal(size=(k.dim, r))
    support = linalg.orthonormalize(k.basis @ mix, linalg.DEFAULT_TOL, p.dim)
    values = rng.uniform(-3, 3, size=support.dim)
    if rng.random() < 0.5:
        values[: int(rng.integers(1, support.dim + 1))] = 0.0
    q, _ = np.linalg.qr(rng.normal(size=(support.dim,) * 2) + 1j * rng.normal(size=(support.dim,) * 2))
    return BirmanParameter(support, q @ np.diag(values) @ q.conj().T)


def random_instance(rng: np.random.Generator) -> ExtensionProblem:
    n = int(rng.integers(3, 13))
    d = int(rng.integers(1, min(4, n - 1) + 1))
    return kvb_core.random_problem(rng, n, d)


def random_targets(rng: np.random.Generator, p: ExtensionProblem) -> list[float]:
    """Up to ``d`` targets in the gap, with deliberate repeats."""
    d = p.deficiency_index
    count = int(rng.integers(1, d + 1))
    lo = max(p.gap.a, p.gap.b - 6.0)
    pool = rng.uniform(lo + 0.05, p.gap.b - 0.05, size=count)
    if count > 1 and rng.random() < 0.5:
        pool[1] = pool[0]
    return [float(x) for x in pool]


def check_instance(index: int, rng: np.random.Generator, report: SelftestReport, fault: bool = False):
    p = random_instance(rng)
    graph_s = kvb_core.graph_of_s(p)
    oracle = relations.adjoint(graph_s)
    assembled = kvb_core.adjoint_relation(p, check=False)
    report.record(index, "adjoint_oracle", assembled.distance(oracle))

    t = random_parameter(rng, p)
    ext = kvb_core.build_extension(p, t)
    rel = ext.relation
    if fault:
        # corrupt the extension so that the suite has something to catch
        rel = relations.from_pairs(p.dim, rel.inputs, rel.outputs + 1e-3 * rel.inputs[::-1])
        ext = kvb_core.SelfAdjointExtension(rel, t, "corrupted")
    report.record(index, "extension_selfadjoint", max(relations.selfadjoint_defect(rel), rel.contains(graph_s)))

    inv = kvb_core.invertibility_report(ext, t)
    same_dim = inv.kernel.dim == inv.t_kernel.dim
    report.record(index, "kernel_match", inv.kernel_distance if same_dim else float("inf"))

    targets = random_targets(rng, p)
    result = engineering.engineer(p, targets)
    value = result.certificate.max_residual()
    if not result.multiplicities_ok:
        value = float("inf")
    report.record(index, "pipeline_certificate", value)


def run(count: int = 200, seed: int = 42, inject_fault: bool = False) -> SelftestReport:
    """Run ``count`` seeded instances; with ``inject_fault`` the first one is corrupted."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(seed)
    report = SelftestReport(count, seed)
    start = time.perf_counter()
    for i in range(count):
        check_instance(i, rng, report, fault=inject_fault and i == 0)
    report.runtime = time.perf_counter() - start
    return report
