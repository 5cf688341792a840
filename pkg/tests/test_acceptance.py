"""Acceptance suite: one test per criterion, with the stated tolerances and time budgets.

The terminal summary prints one PASS/FAIL line per criterion (see conftest.py).
"""

import math
import time
from collections import Counter

import numpy as np
import pytest

from kvbext import engineering, halfline, kvb_core, relations, selftest
from kvbext.engineering import SetSpec
from kvbext.expoly import ExpPoly

pytestmark = pytest.mark.usefixtures("criterion")


@pytest.mark.criterion(1, "half-line example at lambda = 3/4 reproduced exactly (< 0.1 s)")
def test_half_line_example():
    start = time.perf_counter()
    rep = halfline.reproduce_example(0.75, 1)
    elapsed = time.perf_counter() - start
    e1, eh = ExpPoly.exp(1.0), ExpPoly.exp(0.5)
    assert rep.q_over_p == pytest.approx(4 / 3, abs=1e-15)
    assert rep.u.terms == e1.terms
    assert rep.h.is_close((4 / 3) * (eh - e1), 1e-15)
    assert rep.sf_h.terms == eh.terms
    assert rep.beta_closed == 1
    assert abs(rep.beta_general - 1) < 1e-12
    assert elapsed < 0.1


@pytest.mark.criterion(2, "closed and general beta agree on a 100-point grid, strictly increasing (< 1 s)")
def test_beta_routes_agree():
    start = time.perf_counter()
    res = halfline.beta_sweep(np.linspace(-50, 0.99, 100))
    elapsed = time.perf_counter() - start
    assert len(res.rows) == 100
    assert res.max_abs_diff < 1e-10
    assert res.monotone
    assert elapsed < 1


@pytest.mark.criterion(3, "relation-model oracle suite, 200 seeded instances (< 10 s)")
def test_oracle_suite():
    report = selftest.run(200, 42)
    assert report.ok, report.failures[:5]
    assert all(report.passed[name] == 200 for name in selftest.INVARIANTS)
    assert report.runtime < 10


@pytest.mark.criterion(4, "toy pipeline with targets (1/2, 1/2) gives diag(2, 3, 1/2, 1/2)")
def test_toy_pipeline():
    result = engineering.engineer(kvb_core.toy_t4(), [0.5, 0.5])
    m = relations.to_matrix(result.extension.relation)
    assert np.abs(m - np.diag([2, 3, 0.5, 0.5])).max() < 1e-12
    for rec in result.certificate.records:
        assert rec.y_norm == 0
        assert rec.eigen_residual < 1e-12
    pairs = relations.eigenpairs(result.extension.relation)
    assert relations.multiplicity(pairs, 0.5) == 2


@pytest.mark.criterion(5, "Krein-type extension equals the unital scalar-parameter extension")
def test_unital_equivalence():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(50):
        p = kvb_core.random_problem(rng, int(rng.integers(2, 13)), 1)
        for offset in (0.05, 0.5, 1.5, 4.0, 10.0):
            lam = p.gap.b - offset
            beta = kvb_core.beta_unital(p, lam)
            built = kvb_core.build_extension(p, kvb_core.scalar_parameter(p, beta)).relation
            krein = kvb_core.krein_type_extension(p, lam).relation
            worst = max(worst, built.distance(krein))
    assert worst < 1e-9
    p = kvb_core.random_problem(np.random.default_rng(0), 6, 1)
    assert kvb_core.beta_unital(p, 0.0) == 0
    ext = kvb_core.build_extension(p, kvb_core.scalar_parameter(p, 0.0))
    assert kvb_core.invertibility_report(ext).kernel.dim == 1


@pytest.mark.criterion(6, "direct sums: repeated target realized with multiplicity equal to its count")
def test_direct_sum_multiplicity():
    targets = [0.5, -1.0, 0.5, 0.25, -3.0, 0.5, 0.0, 0.75]
    backend = halfline.as_backend(8, mixing=True)
    hl = engineering.engineer(backend, targets)
    assert all(rec.eigen_residual < 1e-10 for rec in hl.certificate.records)
    assert hl.certificate.passed(1e-10)
    # the three eigenvectors for 1/2 are orthonormal, so the eigenspace has dimension >= 3
    repeated = [rec.v for rec in hl.certificate.records if rec.lam == 0.5]
    gram = engineering.gram_matrix(backend, repeated)
    assert len(repeated) == 3 and np.abs(gram - np.eye(3)).max() < 1e-12

    rng = np.random.default_rng(6)
    blocks = [kvb_core.random_problem(rng, int(rng.integers(2, 7)), 1, b=1.0) for _ in targets]
    res = engineering.direct_sum_engineer(blocks, targets)
    assert res.multiplicities_equal
    assert res.multiplicities[0.5] == (3, 3)
    assert res.selfadjoint_defect < 1e-9


@pytest.mark.criterion(7, "epsilon-net on {0} u [1/4, 1/2] with 33 targets on deficiency 33 (< 5 s)")
def test_essential_spectrum_net():
    start = time.perf_counter()
    p = kvb_core.random_problem(np.random.default_rng(7), 40, 33, b=1.0)
    spec = SetSpec(((0.25, 0.5),), (0.0,))
    plan = engineering.net_targets(spec, 33, p.gap)
    result = engineering.engineer(p, plan.targets)
    elapsed = time.perf_counter() - start
    assert len(plan.targets) == 33 and plan.covering_radius <= 1 / 64
    assert result.certificate.passed(1e-9)
    assert all(rec.eigen_residual < 1e-9 for rec in result.certificate.records)
    assert all(obs >= 1 for obs, _ in result.multiplicities.values())
    assert Counter(plan.targets) == Counter(set(plan.targets))
    doubled = engineering.net_targets(spec, 66, p.gap)
    assert doubled.covering_radius <= plan.covering_radius
    assert elapsed < 5


@pytest.mark.criterion(8, "endpoint probe reported; beta routes agree as lambda approaches 1")
def test_endpoint_probe(capsys):
    res, note = halfline.endpoint_probe()
    with capsys.disabled():
        print()
        for row in res.rows:
            print(f"  lambda = {row.lam:.10f}  beta = {row.beta_closed:.12f}  |diff| = {row.abs_diff:.1e}")
        print(f"  {note}")
    assert [r.lam for r in res.rows] == pytest.approx([1 - 10.0**-k for k in range(2, 9)])
    assert res.max_abs_diff < 1e-10
    assert all(math.isfinite(r.beta_closed) for r in res.rows)
