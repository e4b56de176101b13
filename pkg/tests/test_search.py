import json
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indicatrix import (
    Certificate,
    ConvexityAuditError,
    NoViolation,
    NumericalTrustError,
    RandersNorm,
    RiemannianNorm,
    ToleranceConfig,
    certificates_to_json,
    certify,
    fd_verdict,
    homogeneity_check_certificate,
    load_certificates,
    scan,
)
from indicatrix.search import MATSUMOTO, REVERSE, dumps
from oracles import brute_force_extremes, dsl_norms, random_randers, random_spd

WITNESS_F_MAX = 1.5 / np.sqrt(1.25)
WITNESS_F_MIN = 0.5 / np.sqrt(1.25)


@pytest.fixture(scope="module")
def randers_scan():
    return scan(RandersNorm(np.eye(2), [0.5, 0.0]), 360)


# ------------------------------------------------------------------ certify


def test_certify_matsumoto_example(randers):
    c = certify(randers, [0.0, 1.0], [1.0, 0.0])
    assert isinstance(c, Certificate) and c.direction == MATSUMOTO
    assert c.F_xi == pytest.approx(WITNESS_F_MAX, abs=1e-9)
    assert c.rel_len == pytest.approx(1.0, abs=1e-12)
    assert c.margin == pytest.approx(WITNESS_F_MAX - 1.0, abs=1e-9)
    np.testing.assert_allclose(c.xi, [1.0 / np.sqrt(1.25), 0.0], rtol=1e-12)
    np.testing.assert_array_equal(c.y, [0.0, 1.0])


def test_certify_reverse_example(randers):
    c = certify(randers, [0.0, 1.0], [-1.0, 0.0])
    assert c.direction == REVERSE
    assert c.F_xi == pytest.approx(WITNESS_F_MIN, abs=1e-9)
    assert c.margin == pytest.approx(1.0 - WITNESS_F_MIN, abs=1e-9)


def test_certify_normalizes_y(randers):
    a = certify(randers, [0.0, 1.0], [1.0, 0.0])
    b = certify(randers, [0.0, 7.0], [1.0, 0.0])
    np.testing.assert_allclose(b.y, a.y, rtol=1e-15)
    assert b.margin == pytest.approx(a.margin, abs=1e-12)


def test_riemannian_pairs_are_no_violation():
    rng = np.random.default_rng(0)
    for _ in range(10):
        norm = RiemannianNorm(random_spd(rng, 3))
        v = certify(norm, rng.standard_normal(3), rng.standard_normal(3))
        assert isinstance(v, NoViolation) and v.direction is None
        assert v.margin <= 1e-9


def test_xi_equal_to_y_is_no_violation():
    rng = np.random.default_rng(1)
    for norm in [random_randers(rng, 2), random_randers(rng, 3)] + dsl_norms():
        y = rng.standard_normal(norm.dimension)
        v = certify(norm, y, y)
        assert not v.is_violation and v.margin <= 1e-9


def test_no_violation_dict(euclid):
    d = certify(euclid, [0.0, 1.0], [1.0, 1.0]).to_dict()
    assert d["verdict"] == "no violation"
    assert d["margin"] <= 1e-9


def test_certificate_invariants(randers):
    for xi in ([1.0, 0.0], [-1.0, 0.0], [1.0, 1.0], [-0.3, -2.0]):
        c = certify(randers, [0.0, 1.0], xi)
        assert c.margin > c.tolerances.certify_tol
        assert c.rel_len == pytest.approx(1.0, abs=1e-8)
        F_xi, rel_len = c.recompute()
        assert abs(F_xi - c.F_xi) <= 1e-9 and abs(rel_len - c.rel_len) <= 1e-9


def test_certify_tolerance_decides_ties(randers):
    c = certify(randers, [0.0, 1.0], [1.0, 0.0], ToleranceConfig(certify_tol=0.5))
    assert not c.is_violation and c.margin == pytest.approx(WITNESS_F_MAX - 1.0, abs=1e-9)


def test_certify_rejects_bad_input(randers, quartic):
    from indicatrix import ConvexityError, DomainError

    with pytest.raises(DomainError):
        certify(randers, [0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        certify(randers, [0.0, 1.0], [0.0, 0.0])
    with pytest.raises(ConvexityError):
        certify(quartic, [1.0, 0.0], [0.0, 1.0])


def test_numerical_trust_error_on_inconsistent_hessians(randers):
    # a huge refinement step makes the difference quotients drift away from the jet tensor
    with pytest.raises(NumericalTrustError) as info:
        certify(randers, [0.0, 1.0], [1.0, 0.0], ToleranceConfig(fd_step=0.05))
    assert info.value.spread > 1e-5


# -------------------------------------------------------------- homogeneity


@pytest.mark.parametrize("lam", [3.0, 0.01, 250.0])
def test_homogeneity_of_certificates(randers, lam):
    for xi in ([1.0, 0.0], [-1.0, 0.0]):
        assert homogeneity_check_certificate(certify(randers, [0.0, 1.0], xi), lam)


def test_homogeneity_with_separate_scales(randers):
    c = certify(randers, [0.0, 1.0], [1.0, 0.0])
    assert homogeneity_check_certificate(c, 0.2, 40.0)
    with pytest.raises(ValueError):
        homogeneity_check_certificate(c, 0.0)


def test_homogeneity_keeps_no_violation():
    norm = RiemannianNorm(np.diag([1.0, 4.0]))
    v = certify(norm, [1.0, 1.0], [2.0, -1.0])
    for lam in (3.0, 0.01):
        assert homogeneity_check_certificate(v, lam)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), lam=st.floats(0.01, 100.0), mu=st.floats(0.01, 100.0))
def test_certify_scale_invariance(seed, lam, mu):
    rng = np.random.default_rng(seed)
    norm = random_randers(rng, 2)
    y, xi = rng.standard_normal(2), rng.standard_normal(2)
    a = certify(norm, y, xi)
    b = certify(norm, lam * y, mu * xi)
    assert a.direction == b.direction
    assert abs(a.margin - b.margin) <= 1e-8


# --------------------------------------------------------------------- JSON


def test_certificate_json_round_trip(randers):
    certs = [certify(randers, [0.0, 1.0], [1.0, 0.0]), certify(randers, [0.3, 1.0], [-1.0, 0.2])]
    text = certificates_to_json(certs)
    data = json.loads(text)
    assert data["certificate_version"] == 1
    assert set(data["certificates"][0]) == {
        "certificate_version", "norm", "y", "xi", "F_xi", "rel_len", "direction", "margin", "tolerances",
    }
    again = load_certificates(text)
    for a, b in zip(certs, again):
        assert a.norm == b.norm and a.direction == b.direction
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.xi, b.xi)
        assert (a.F_xi, a.rel_len, a.margin) == (b.F_xi, b.rel_len, b.margin)
        assert a.tolerances == b.tolerances
    assert certificates_to_json(again) == text
    # a single certificate object also loads
    assert len(load_certificates(dumps(certs[0].to_dict()))) == 1


def test_json_reals_have_17_digits():
    assert dumps({"x": 0.1}) == '{\n  "x": 0.10000000000000001\n}\n'
    assert dumps([1, 2.5, 3.0, float("nan"), 1e300]) == "[1, 2.5, 3.0, null, 1.0000000000000001e+300]\n"


def test_load_rejects_wrong_version(randers):
    d = certify(randers, [0.0, 1.0], [1.0, 0.0]).to_dict()
    d["certificate_version"] = 2
    with pytest.raises(ValueError):
        load_certificates(json.dumps(d))
    with pytest.raises(ValueError):
        load_certificates(json.dumps({"certificate_version": 9, "certificates": []}))
    with pytest.raises(ValueError):
        load_certificates("[]")


# --------------------------------------------------------------------- scan


def test_scan_riemannian_example():
    report = scan(RiemannianNorm(np.diag([1.0, 4.0])), 90)
    assert report.certificates == []
    assert report.best_margin(MATSUMOTO) <= 1e-7 and report.best_margin(REVERSE) <= 1e-7
    assert "none found at resolution 90" in report.summary()


def test_scan_randers_examples(randers_scan):
    m, r = randers_scan.certificate(MATSUMOTO), randers_scan.certificate(REVERSE)
    assert m is not None and m.margin >= 0.38
    assert r is not None and r.margin >= 0.61
    assert len(randers_scan.certificates) <= 2
    assert randers_scan.min_eigenvalue > 0


def test_scan_completeness_against_brute_force(randers_scan):
    top, low = brute_force_extremes(np.eye(2), [0.5, 0.0], 1000, 1000)
    assert top == pytest.approx(3.0, rel=1e-6) and low == pytest.approx(1 / 3, rel=1e-6)
    assert randers_scan.best_margin(MATSUMOTO) >= 0.99 * (top - 1.0)
    assert randers_scan.best_margin(REVERSE) >= 0.99 * (1.0 - low)
    assert randers_scan.certificate(MATSUMOTO).margin >= 0.99 * (top - 1.0)
    assert randers_scan.certificate(REVERSE).margin >= 0.99 * (1.0 - low)


def test_scan_recovers_closed_form_witnesses(randers_scan):
    # the certified pair at y = (0, 1) is a lower bound the scan must match or beat
    for direction, witness in ((MATSUMOTO, WITNESS_F_MAX - 1.0), (REVERSE, 1.0 - WITNESS_F_MIN)):
        assert randers_scan.best_margin(direction) >= 0.99 * witness


def test_scan_report_dict(randers_scan):
    d = json.loads(dumps(randers_scan.to_dict()))
    assert d["resolution"] == 360 and len(d["points"]) == 360
    assert d["best_margins"][MATSUMOTO] == pytest.approx(randers_scan.best_margin(MATSUMOTO))
    assert randers_scan.defects == []


def test_scan_random_randers_bracket_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(3):
        norm = random_randers(rng, 2, strength=rng.uniform(0.2, 0.7))
        report = scan(norm, 360)
        top, low = brute_force_extremes(norm.A, norm.b, 720, 720)
        # brute force is a lower bound for the true max, so the scan must come close from above or below
        assert report.best_margin(MATSUMOTO) >= 0.99 * (top - 1.0)
        assert report.best_margin(REVERSE) >= 0.99 * (1.0 - low)
        assert report.best_margin(MATSUMOTO) <= (top - 1.0) * 1.01 + 1e-9


def test_riemannian_null_result():
    rng = np.random.default_rng(5)
    resolutions = [90, 180, 360, 720]
    for k in range(20):
        n = 2 if k % 4 else 3
        norm = RiemannianNorm(random_spd(rng, n, 0.2, 5.0))
        report = scan(norm, resolutions[k % 4] if n == 2 else 90)
        assert report.certificates == []
        assert max(report.best_margin(MATSUMOTO), report.best_margin(REVERSE)) <= 1e-7


def test_monotone_in_resolution():
    norm = random_randers(np.random.default_rng(6), 2, strength=0.6)
    margins = [scan(norm, r) for r in (45, 90, 180, 360)]
    for direction in (MATSUMOTO, REVERSE):
        values = [m.best_margin(direction) for m in margins]
        assert all(b >= a for a, b in zip(values, values[1:])), values


def test_nested_grids_share_point_results():
    norm = RandersNorm(np.eye(2), [0.3, 0.2])
    coarse, fine = scan(norm, 90), scan(norm, 180)
    for k, p in enumerate(coarse.points):
        q = fine.points[2 * k]
        np.testing.assert_allclose(q.y, p.y, rtol=1e-15)
        assert q.max_F == pytest.approx(p.max_F, rel=1e-12)
        assert q.min_F == pytest.approx(p.min_F, rel=1e-12)


def test_scan_is_deterministic():
    norm = RandersNorm(np.eye(2), [0.4, -0.1])
    a, b = scan(norm, 120, seed=7), scan(norm, 120, seed=7)
    assert certificates_to_json(a.certificates) == certificates_to_json(b.certificates)


def test_scan_three_dimensional():
    norm = RandersNorm(np.eye(3), [0.0, 0.0, 0.5])
    report = scan(norm, 100)
    assert report.restarts == 64
    assert report.certificate(MATSUMOTO) is not None and report.certificate(REVERSE) is not None


def test_scan_refuses_non_convex(quartic):
    with pytest.raises(ConvexityAuditError) as info:
        scan(quartic, 360)
    assert set(info.value.failures) == {0, 90, 180, 270}


def test_scan_is_fast_enough():
    start = time.perf_counter()
    scan(RandersNorm(np.eye(2), [0.5, 0.0]), 360)
    assert time.perf_counter() - start < 30


# ----------------------------------------------------------------- soundness


def test_certificates_survive_finite_difference_tensor(randers_scan):
    rng = np.random.default_rng(7)
    certs = list(randers_scan.certificates)
    for norm in [random_randers(rng, 2) for _ in range(3)] + dsl_norms()[:3]:
        certs += scan(norm, 120).certificates
    assert len(certs) >= 10
    for c in certs:
        direction, margin = fd_verdict(c)
        assert direction == c.direction
        assert margin >= 0.9 * c.margin
