import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kvbext import engineering, halfline, kvb_core, linalg, relations
from kvbext.engineering import GraphVector, RelationBackend, SetSpec
from kvbext.errors import (
    DeficiencyExhausted,
    EmptyIntersection,
    FormNotHermitian,
    GapMismatch,
    IllConditionedGram,
    NotInGap,
)
from kvbext.expoly import ExpPoly
from kvbext.kvb_core import ExtensionProblem, GapInterval
from kvbext.linalg import Frame

SETTINGS = settings(max_examples=25, deadline=None)
seeds = st.integers(0, 2**32 - 1)
E4 = np.eye(4)
UNBOUNDED_BELOW_ONE = GapInterval(-math.inf, 1.0)


def psi(vs):
    return np.column_stack([v.psi for v in vs])


# ---------------------------------------------------------------------------
# pipeline stages


def test_select_eigensystem_toy_t4():
    vs = engineering.select_eigensystem(RelationBackend(kvb_core.toy_t4()), [0.5, 0.5])
    assert np.allclose(psi(vs), E4[:, 2:])


def test_select_eigensystem_exhausted():
    with pytest.raises(DeficiencyExhausted):
        engineering.select_eigensystem(RelationBackend(kvb_core.toy_t2()), [0.5, 0.5])


def test_select_eigensystem_mixed_half_line():
    be = halfline.as_backend(2, mixing=True)
    v1, v2 = engineering.select_eigensystem(be, [0.75, -3])
    # v1 ∝ (e^{-t/2}, e^{-t/2}), v2 ∝ (e^{-2t}, -e^{-2t})
    c1 = [p.coefficient(0, 0.5) for p in v1.parts]
    c2 = [p.coefficient(0, 2.0) for p in v2.parts]
    assert c1[0] == pytest.approx(c1[1]) and abs(c1[0]) > 0
    assert c2[0] == pytest.approx(-c2[1]) and abs(c2[0]) > 0
    assert abs(be.inner(v1, v2)) < 1e-15
    assert be.inner(v1, v1) == pytest.approx(1) and be.inner(v2, v2) == pytest.approx(1)


@SETTINGS
@given(seeds)
def test_randomized_selection_keeps_eigenvalues(seed):
    rng = np.random.default_rng(seed)
    p = kvb_core.random_problem(rng, 9, 3)
    targets = [p.gap.b - 0.5, p.gap.b - 0.5, p.gap.b - 2.0]
    a = engineering.engineer(p, targets)
    b = engineering.engineer(p, targets, rng=rng)
    assert a.certificate.passed() and b.certificate.passed()
    assert a.multiplicities == b.multiplicities


def test_lift_to_kernel_examples():
    be = RelationBackend(kvb_core.toy_t4())
    v = GraphVector(E4[:, 2].astype(complex), 0.5 * E4[:, 2].astype(complex))
    u = engineering.lift_to_kernel(be, v, 0.5)
    assert np.allclose(u.psi, 0.5 * E4[:, 2])
    hb = halfline.as_backend(1)
    u = engineering.lift_to_kernel(hb, hb.deficiency_frame(0.75)[0], 0.75)
    # unit deficiency vector is e^{-t/2}; its lift is a multiple of e^{-t}
    assert u.parts[0].terms == ((0, 1.0, u.parts[0].coefficient(0, 1.0)),)
    k = hb.kernel_frame()[0]
    assert engineering.lift_to_kernel(hb, k, 0.0).parts[0].terms == k.parts[0].terms


def test_lift_recovers_v_through_resolvent():
    be = halfline.as_backend(1)
    v = be.deficiency_frame(-3)[0]
    u = engineering.lift_to_kernel(be, v, -3)
    back = be.apply_adjoint(be.sd_resolvent(u, -3))
    assert (back.parts[0] - v.parts[0]).max_abs_coefficient() < 1e-14


def test_gram_check_examples():
    be = RelationBackend(kvb_core.toy_t4())
    us = [GraphVector(0.5 * E4[:, j].astype(complex), np.zeros(4, complex)) for j in (2, 3)]
    g, cond = engineering.gram_check(be, us)
    assert np.allclose(g, np.diag([0.25, 0.25])) and cond == 1
    hb = halfline.as_backend(1)
    g, _ = engineering.gram_check(hb, [halfline.HalfLineVector((ExpPoly.exp(1.0),))])
    assert g[0, 0] == pytest.approx(0.5)
    with pytest.raises(IllConditionedGram):
        engineering.gram_check(be, [us[0], us[0]])


def test_birman_toy_t4():
    be = RelationBackend(kvb_core.toy_t4())
    vs = engineering.select_eigensystem(be, [0.5, 0.5])
    us = [engineering.lift_to_kernel(be, v, 0.5) for v in vs]
    b = engineering.birman_from_targets(be, vs, us, [0.5, 0.5])
    assert np.allclose(b.form, np.diag([0.25, 0.25]))
    assert np.allclose(b.gram, np.diag([0.25, 0.25]))
    assert np.allclose(b.trep, np.eye(2))
    assert np.allclose(b.matrix, np.eye(2))


def test_birman_rejects_corrupted_backend():
    class Corrupted(RelationBackend):
        def sd_inverse(self, g):
            out = super().sd_inverse(g)
            return GraphVector(out.psi + 0.1 * np.roll(g.psi, 1), out.phi)

    p = kvb_core.random_problem(np.random.default_rng(5), 6, 2)
    be = Corrupted(p)
    targets = [p.gap.b - 0.3, p.gap.b - 1.1]
    vs = engineering.select_eigensystem(be, targets)
    us = [engineering.lift_to_kernel(be, v, lam) for v, lam in zip(vs, targets)]
    with pytest.raises(FormNotHermitian):
        engineering.birman_from_targets(be, vs, us, targets)


@SETTINGS
@given(seeds)
def test_single_target_collapses_to_unital_beta(seed):
    rng = np.random.default_rng(seed)
    p = kvb_core.random_problem(rng, int(rng.integers(2, 10)), 1)
    lam = float(rng.uniform(p.gap.b - 6, p.gap.b - 0.05))
    result = engineering.engineer(p, [lam])
    assert result.birman.matrix[0, 0].real == pytest.approx(kvb_core.beta_unital(p, lam), abs=1e-12)


@pytest.mark.parametrize("lam", [0.75, -3.0, 0.3])
def test_single_target_half_line_is_beta_closed(lam):
    result = engineering.engineer(halfline.as_backend(1), [lam])
    assert abs(result.birman.matrix[0, 0] - halfline.beta_closed(lam)) < 1e-12
    assert result.certificate.passed(1e-12)
    assert result.certificate.w_dim == 0


# ---------------------------------------------------------------------------
# engineer


def test_engineer_toy_t4():
    result = engineering.engineer(kvb_core.toy_t4(), [0.5, 0.5])
    m = relations.to_matrix(result.extension.relation)
    assert np.abs(m - np.diag([2, 3, 0.5, 0.5])).max() < 1e-12
    cert = result.certificate
    assert cert.w_dim == 0
    for rec in cert.records:
        assert np.allclose(rec.x.psi, 0) and np.allclose(rec.z.psi, rec.v.psi)
        assert np.allclose(rec.f.psi, 0) and np.allclose(rec.w.psi, 0)
        assert rec.y_norm == 0
    assert result.multiplicities == {0.5: (2, 2)}


def test_engineer_unital_y_identity():
    p = kvb_core.toy_t2()
    result = engineering.engineer(p, [0.5])
    rec = result.certificate.records[0]
    beta = kvb_core.beta_unital(p, 0.5)
    y = beta * rec.u.psi - 0.5 * rec.z.psi
    assert np.linalg.norm(y) < 1e-14 and result.certificate.w_dim == 0


def test_engineer_two_copy_half_line():
    result = engineering.engineer(halfline.as_backend(2, mixing=True), [0.75, -3])
    assert result.certificate.max_residual() < 1e-10
    assert np.allclose(linalg.hermitian_eigs(result.birman.matrix)[0], [-2, 1], atol=1e-12)


def test_engineer_eight_copies_distinct_dyadics():
    targets = [k / 16 for k in (1, 3, 5, 7, 9, 11, 13, 15)]
    result = engineering.engineer(halfline.as_backend(8), targets)
    assert all(rec.eigen_residual < 1e-10 for rec in result.certificate.records)
    assert result.certificate.passed(1e-10)


def test_engineer_rejects_targets_outside_gap():
    with pytest.raises(NotInGap):
        engineering.engineer(kvb_core.toy_t2(), [5.0])


def test_certificate_json_shape():
    cert = engineering.engineer(kvb_core.toy_t4(), [0.5, 0.5]).certificate.to_json()
    assert cert["passed"] and cert["W_dim"] == 0 and cert["gram_condition"] == 1
    assert len(cert["targets"]) == 2 and "y_norm" in cert["targets"][0]


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_pipeline_certificate_random(seed):
    from kvbext.selftest import random_targets

    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    p = kvb_core.random_problem(rng, int(rng.integers(d + 1, 13)), d)
    targets = random_targets(rng, p)
    result = engineering.engineer(p, targets)
    assert result.certificate.passed()
    # observed multiplicity is reported; the guarantee is a lower bound
    assert result.multiplicities_ok
    assert result.membership_residual < 1e-9


@SETTINGS
@given(seeds, st.sampled_from([0.3, -0.2, 0.75]))
def test_shift_covariance(seed, c):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    p = kvb_core.random_problem(rng, int(rng.integers(d + 1, 10)), d)
    targets = list(rng.uniform(p.gap.b - 4, p.gap.b - 0.1, size=int(rng.integers(1, d + 1))))
    q = kvb_core.shift(p, -c)
    a = engineering.engineer(p, targets)
    b = engineering.engineer(q, [t + c for t in targets])
    ea = np.array([s.eigenvalue for s in a.spectrum for _ in range(s.multiplicity)])
    eb = np.array([s.eigenvalue for s in b.spectrum for _ in range(s.multiplicity)])
    assert np.allclose(ea + c, eb, atol=1e-9)


# ---------------------------------------------------------------------------
# direct sums


def test_direct_sum_two_toy_blocks():
    t2 = kvb_core.toy_t2()
    res = engineering.direct_sum_engineer([t2, t2], [0.5, -1.0])
    assert np.allclose(relations.to_matrix(res.extension.relation), np.diag([2, 0.5, 2, -1]))
    assert res.multiplicities == {0.5: (1, 1), -1.0: (1, 1)}
    assert res.selfadjoint_defect < 1e-12 and res.extends_residual < 1e-12


def test_direct_sum_three_equal_targets():
    t2 = kvb_core.toy_t2()
    res = engineering.direct_sum_engineer([t2] * 3, [0.5] * 3)
    assert res.multiplicities_equal and res.multiplicities[0.5] == (3, 3)


def test_direct_sum_single_block_is_krein_type():
    p = kvb_core.toy_t4()
    res = engineering.direct_sum_engineer([p], [0.5])
    assert res.extension.relation.distance(kvb_core.krein_type_extension(p, 0.5).relation) < 1e-12


def test_direct_sum_gap_mismatch():
    e = np.eye(2)
    a = ExtensionProblem(Frame(e[:, :1]), np.array([[2.0], [0.0]]), np.diag([2.0, 1.0]), GapInterval(-math.inf, 0.1))
    b = ExtensionProblem(Frame(e[:, :1]), np.array([[-2.0], [0.0]]), np.diag([-2.0, 1.0]), GapInterval(0.2, 5.0))
    with pytest.raises(GapMismatch):
        engineering.direct_sum([a, b])
    c = ExtensionProblem(Frame(e[:, :1]), np.array([[-2.0], [0.0]]), np.diag([-2.0, 1.0]), GapInterval(-0.5, 0.05))
    with pytest.raises(GapMismatch):
        # common gap (-0.5, 0.05) ∩ (0.2, 5) is empty
        engineering.common_gap([b.gap, c.gap])
    assert engineering.common_gap([a.gap, c.gap]) == GapInterval(-0.5, 0.05)


# ---------------------------------------------------------------------------
# classical route


def test_classical_route_toy_t4():
    rep = engineering.classical_route(kvb_core.toy_t4(), [0.5, 0.5])
    assert rep.symmetric_residual < 1e-12 and rep.reducing_residual < 1e-9
    assert rep.hat_dim == 2 and rep.hat_domain_dim == 2
    assert rep.hat_gap.holds and rep.found and rep.eigenvalues_confirmed
    m = relations.to_matrix(rep.extension.relation)
    assert np.allclose(m, np.diag([2, 3, 0.5, 0.5]))


def test_classical_route_toy_t2():
    rep = engineering.classical_route(kvb_core.toy_t2(), [0.5])
    assert rep.hat_domain_dim == 1 and rep.closure_cap_dim == 1
    assert rep.hat_gap.holds and rep.found


def adversarial():
    e = np.eye(3)
    s_d = np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 2.0]])
    return ExtensionProblem(Frame(e[:, :1]), s_d[:, :1], s_d, GapInterval(-0.5, 0.9))


def test_classical_route_not_found():
    rep = engineering.classical_route(adversarial(), [0.0], tau_grid=[0.0])
    assert rep.verdict == "NotFound"
    assert rep.scan_log == [{"tau": 0.0, "eigs_in_gap": 1, "accepted": False}]
    assert rep.hat_gap.holds


def test_classical_route_default_grid_finds_completion():
    rep = engineering.classical_route(adversarial(), [0.0])
    assert rep.found and rep.eigenvalues_confirmed and rep.extension_defect < 1e-9


@SETTINGS
@given(seeds)
def test_classical_route_random(seed):
    rng = np.random.default_rng(seed)
    p = kvb_core.random_problem(rng, 9, 3)
    rep = engineering.classical_route(p, [p.gap.b - 0.5])
    assert rep.symmetric_residual < 1e-9 and rep.reducing_residual < 1e-9
    assert rep.hat_gap.holds
    if rep.found:
        assert rep.eigenvalues_confirmed and rep.extends_residual < 1e-9


# ---------------------------------------------------------------------------
# nets


def sampled_radius(spec, targets, step=1e-4):
    pts = list(spec.points)
    for lo, hi in spec.intervals:
        pts.extend(np.arange(lo, hi + step / 2, step))
    t = np.asarray(targets)
    return max(np.min(np.abs(t - x)) for x in pts)


def test_net_targets_example():
    spec = SetSpec(((0.25, 0.5),), (0.0,))
    plan = engineering.net_targets(spec, 5, UNBOUNDED_BELOW_ONE)
    assert plan.targets == (0.0, 0.25, 0.5, 0.375, 0.3125)
    assert plan.covering_radius == 1 / 16
    assert abs(sampled_radius(spec, plan.targets) - 1 / 16) < 1e-4


def test_net_targets_single_point_and_empty():
    plan = engineering.net_targets(SetSpec((), (0.2,)), 7, UNBOUNDED_BELOW_ONE)
    assert plan.targets == (0.2,) and plan.covering_radius == 0
    with pytest.raises(EmptyIntersection):
        engineering.net_targets(SetSpec(((2.0, 3.0),)), 4, UNBOUNDED_BELOW_ONE)


def test_net_targets_breadth_first_across_components():
    spec = SetSpec(((-2.0, -1.0), (0.0, 0.5)))
    plan = engineering.net_targets(spec, 6, UNBOUNDED_BELOW_ONE)
    assert plan.targets == (-2.0, -1.0, 0.0, 0.5, -1.5, 0.25)


def test_net_targets_clips_to_gap():
    plan = engineering.net_targets(SetSpec(((0.5, 3.0),)), 3, UNBOUNDED_BELOW_ONE)
    assert all(t < 1 for t in plan.targets)


@pytest.mark.parametrize(
    "spec",
    [SetSpec(((0.25, 0.5),), (0.0,)), SetSpec(((-2.0, -1.0), (0.0, 0.5))), SetSpec(((-1.0, 0.9),))],
)
def test_net_radius_monotone_and_bounded(spec):
    n_int = len(spec.intervals)
    anchors = 2 * n_int + len(spec.points)
    length = max(hi - lo for lo, hi in spec.intervals)
    radii = []
    for m in range(1, 80):
        plan = engineering.net_targets(spec, m, UNBOUNDED_BELOW_ONE)
        radii.append(plan.covering_radius)
        if m >= anchors:
            # after the endpoints, L full dyadic levels use 2^L - 1 midpoints per interval
            levels = int(math.floor(math.log2((m - anchors) / n_int + 1)))
            assert plan.covering_radius <= length / 2 ** (levels + 1) + 1e-15
    assert all(b <= a for a, b in zip(radii, radii[1:]))
    plan = engineering.net_targets(spec, 40, UNBOUNDED_BELOW_ONE)
    assert abs(sampled_radius(spec, plan.targets) - plan.covering_radius) < 1e-4


def test_net_targets_requires_positive_count():
    with pytest.raises(ValueError):
        engineering.net_targets(SetSpec((), (0.0,)), 0, UNBOUNDED_BELOW_ONE)


def test_engineer_on_net_realizes_every_target():
    rng = np.random.default_rng(11)
    p = kvb_core.random_problem(rng, 14, 8, b=1.0)
    plan = engineering.net_targets(SetSpec(((0.25, 0.5),), (0.0,)), 5, p.gap)
    result = engineering.engineer(p, plan.targets)
    assert result.certificate.passed()
    assert Counter(t for t in plan.targets) == Counter({t: 1 for t in plan.targets})
    assert all(obs >= 1 for obs, _ in result.multiplicities.values())
