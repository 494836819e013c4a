import numpy as np
import pytest

from conftest import fixture_curve
from curvesig.curves import random_curve, transform
from curvesig.equivalence import Reason, Verdict, _closed, equality_test, fixes_curve, symmetry_analyze
from curvesig.groups import EuclideanElement, random_element
from curvesig.sigmaps import dim3_rank
from curvesig.curves import sample
from curvesig.witness import compute_pws


def _consistent(v):
    assert (v.verdict is Verdict.EQUIVALENT) == (v.reason is Reason.MEMBERSHIP_HIT)
    assert (v.verdict is Verdict.INCONCLUSIVE) == (v.reason is Reason.TRACK_FAILURE)


def test_circles_of_different_radius(circle):
    big = fixture_curve("circle_r2")
    v = equality_test(circle, compute_pws("euclid_diff", big, rng_seed=0))
    assert v.verdict is Verdict.NOT_EQUIVALENT and v.reason is Reason.MEMBERSHIP_MISS and v.d == 0
    same = equality_test(circle, compute_pws("euclid_diff", transform(circle, random_element(rng_seed=4))))
    assert same.verdict is Verdict.EQUIVALENT
    _consistent(v)
    _consistent(same)


@pytest.fixture(scope="module")
def cubics():
    C = fixture_curve("cubic")
    g = random_element("euclidean", rng_seed=21)
    return C, transform(C, g), random_curve(3, 77)


def test_cubic_against_its_motion(cubics):
    C, gC, _ = cubics
    v = equality_test(C, compute_pws("euclid_joint", gC, rng_seed=0), rng_seed=1)
    assert v.verdict is Verdict.EQUIVALENT
    assert v.d == 4 and v.dim_expected == 4
    _consistent(v)


def test_independent_cubics_both_ways(cubics):
    C, _, D = cubics
    v = equality_test(C, compute_pws("euclid_joint", D, rng_seed=0), rng_seed=1)
    w = equality_test(D, compute_pws("euclid_joint", C, rng_seed=0), rng_seed=1)
    assert v.verdict is Verdict.NOT_EQUIVALENT and w.verdict is Verdict.NOT_EQUIVALENT
    _consistent(v)
    _consistent(w)


def test_dimension_mismatch(circle):
    v = equality_test(circle, compute_pws("euclid_joint", fixture_curve("conic"), rng_seed=0))
    assert v.verdict is Verdict.NOT_EQUIVALENT and v.reason is Reason.DIMENSION_MISMATCH
    assert v.to_json()["d"] == 3


def test_verdict_invariant_under_common_motion():
    C, D = random_curve(2, 5), random_curve(2, 6)
    g = random_element("euclidean", rng_seed=8)
    for a, b in ((C, C), (C, D)):
        v = equality_test(a, compute_pws("euclid_diff", b, rng_seed=0), rng_seed=2)
        w = equality_test(transform(a, g), compute_pws("euclid_diff", transform(b, g), rng_seed=0), rng_seed=2)
        assert v.verdict is w.verdict


def test_transport_consistency_between_seeds():
    conic = fixture_curve("conic")
    a = compute_pws("euclid_diff", conic, rng_seed=0)
    b = compute_pws("euclid_diff", conic, rng_seed=5)
    assert a.e == b.e
    assert equality_test(conic, a, rng_seed=3).verdict is Verdict.EQUIVALENT
    assert equality_test(conic, b, rng_seed=3).verdict is Verdict.EQUIVALENT


def test_verdict_json_shape(circle):
    v = equality_test(circle, compute_pws("euclid_diff", circle, rng_seed=0))
    data = v.to_json()
    assert set(data) == {"verdict", "reason", "map", "d", "dim_expected", "residuals", "seed"}
    assert v.exit_code == 0


# symmetry


def test_fixes_curve(ellipse):
    assert fixes_curve(ellipse, EuclideanElement.identity())
    assert fixes_curve(ellipse, EuclideanElement(-1.0, 0.0, 1, 0.0, 0.0))
    assert not fixes_curve(ellipse, EuclideanElement(1.0, 0.0, 1, 0.1, 0.0))


def test_circle_is_infinite(circle):
    rep = symmetry_analyze(circle)
    assert rep.classification == "Infinite" and rep.dim_J == 3
    assert rep.diagnostics["dim3_rank"] == 2 and rep.diagnostics["consistent"]
    assert rep.label == "Infinite"


def test_ellipse_is_finite_four(ellipse):
    rep = symmetry_analyze(ellipse)
    assert rep.label == "Finite(4)" and rep.dim_J == 4
    assert len(rep.elements) == 4
    assert rep.diagnostics["validation_failures"] == 0 and rep.diagnostics["closed"]
    assert all(fixes_curve(ellipse, g) for g in rep.elements)
    assert any(g.distance(EuclideanElement.identity()) <= 1e-8 for g in rep.elements)
    assert sorted(g.eps for g in rep.elements) == [-1, -1, 1, 1]


def test_finite_route_agrees_with_triple_rank(ellipse):
    tri = np.array([[p.x, p.y] for p in sample(ellipse, 3, 9)])
    assert dim3_rank(ellipse, tri) == 3


def test_closure_check():
    half = EuclideanElement(-1.0, 0.0, 1, 0.0, 0.0)
    assert _closed([EuclideanElement.identity(), half])
    assert not _closed([EuclideanElement.identity(), EuclideanElement(0.0, 1.0, 1, 0.0, 0.0)])
