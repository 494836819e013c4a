import json

import numpy as np
import pytest

from conftest import FIXTURES, fixture_curve
from curvesig import witness
from curvesig.curves import PARTIALS, monomial_values, monomials, random_curve, transform
from curvesig.errors import DimensionMismatch
from curvesig.groups import EuclideanElement, random_element
from curvesig.sigmaps import MAPS, get_map
from curvesig.witness import (
    HomotopyParams,
    PseudoWitnessSet,
    SignatureHomotopy,
    Slice,
    _random_params,
    _stored_seed,
    build_parameter_homotopy,
    compute_pws,
    compute_seed,
    membership,
    monodromy_populate,
    random_slice,
    seed_incidence,
)
from curvesig.tracking import track_many

COUNTS = json.loads((FIXTURES / "witness_counts.json").read_text())


def _cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _phi(sigmap, coeffs, degree, pts):
    pts = pts.reshape(1, sigmap.arity, 2)
    jets = witness.partials_dense(pts, coeffs, degree, sigmap.jet_order)
    full = np.zeros((1, sigmap.arity, len(PARTIALS)), dtype=complex)
    full[..., : jets.shape[-1]] = jets
    return sigmap.values(pts, full)[0]


def _assert_witness_conditions(pws, tol=1e-9):
    c = pws.curve.normalized_coefficients()
    vals = monomial_values(pws.points.reshape(-1, 2), pws.curve.degree) @ c
    assert np.abs(vals).max() <= tol
    res = np.abs(pws.slice(pws.images)) / np.maximum(1.0, np.abs(pws.images).max(axis=1))[:, None]
    assert res.size == 0 or res.max() <= tol
    if pws.domain_slice is not None:
        assert np.abs(pws.domain_slice(pws.points.reshape(pws.e, -1))).max() <= tol


# slices


def test_random_slice_through_point(rng):
    v = _cplx(rng, 6)
    sl = random_slice(6, 3, through=v, rng=rng)
    assert np.abs(sl(v)).max() <= 1e-14
    assert np.allclose(np.linalg.norm(sl.coefficients, axis=1), 1.0)


def test_random_slice_seeds_differ():
    assert not np.array_equal(random_slice(4, 2, rng_seed=1).coefficients, random_slice(4, 2, rng_seed=2).coefficients)


def test_square_slice_defines_a_point(rng):
    v = _cplx(rng, 4)
    sl = random_slice(4, 4, through=v, rng=rng)
    assert np.abs(np.linalg.solve(sl.coefficients, -sl.constants) - v).max() <= 1e-12
    with pytest.raises(ValueError):
        random_slice(3, 4)


# seeding


@pytest.mark.parametrize("map_id", sorted(MAPS))
@pytest.mark.parametrize("degree", [2, 3])
def test_seed_incidence_lies_on_everything(map_id, degree):
    sigmap = get_map(map_id)
    if len(monomials(degree)) <= sigmap.arity:
        pytest.skip("no curve through a generic tuple")
    coeffs, pts, sl = seed_incidence(sigmap, degree, rng_seed=3)
    assert np.abs(monomial_values(pts, degree) @ coeffs).max() <= 1e-10
    assert np.abs(sl(_phi(sigmap, coeffs, degree, pts))).max() <= 1e-10
    again = seed_incidence(sigmap, degree, rng_seed=3)
    assert np.array_equal(again[0], coeffs) and np.array_equal(again[1], pts)


def test_seed_incidence_solution_space_dimension(rng):
    # four points impose four conditions on the ten cubic coefficients
    V = monomial_values(_cplx(rng, 4, 2), 3)
    assert V.shape == (4, 10)
    assert np.linalg.matrix_rank(V) == 4
    assert witness.scipy.linalg.null_space(V).shape[1] == 6


def test_seed_incidence_rejects_lines():
    with pytest.raises(ValueError):
        seed_incidence("euclid_diff", 1)


# homotopy


@pytest.mark.parametrize("map_id", sorted(MAPS))
def test_signature_homotopy_derivatives(map_id):
    sm = get_map(map_id)
    rng = np.random.default_rng(1)
    deg = 3
    for d in (sm.dim_expected, sm.dim_expected - 1):
        c0 = _cplx(rng, len(monomials(deg)))
        P0 = HomotopyParams(c0, random_slice(sm.ambient, d, rng=rng), random_slice(2 * sm.arity, sm.arity - d, rng=rng))
        H = SignatureHomotopy(sm, deg, P0, _random_params(P0, rng, True))
        x = _cplx(rng, 3, 2 * sm.arity)
        t = np.array([0.1, 0.5, 0.9])
        F, Fx, Ft = H.evaluate(x, t)
        h = 1e-6
        Ftn = (H.evaluate(x, t + h)[0] - H.evaluate(x, t - h)[0]) / (2 * h)
        Fxn = np.stack([(H.evaluate(x + h * e, t)[0] - H.evaluate(x - h * e, t)[0]) / (2 * h)
                        for e in np.eye(2 * sm.arity)], axis=-1)
        assert np.abs(Ft - Ftn).max() <= 1e-6 * np.abs(Ft).max()
        assert np.abs(Fx - Fxn).max() <= 1e-6 * np.abs(Fx).max()
        Fc, Fxc = H.corrector_terms(x, t)
        assert np.array_equal(Fc, F) and np.array_equal(Fxc, Fx)


@pytest.mark.parametrize("map_id", ["euclid_diff", "euclid_joint_diff", "euclid_joint"])
def test_residual_scale_bounds_each_equation(map_id):
    sm = get_map(map_id)
    rng = np.random.default_rng(2)
    deg = 3
    d = sm.dim_expected - 1
    P0 = HomotopyParams(_cplx(rng, len(monomials(deg))), random_slice(sm.ambient, d, rng=rng),
                        random_slice(2 * sm.arity, sm.arity - d, rng=rng))
    H = SignatureHomotopy(sm, deg, P0, _random_params(P0, rng, True))
    x = 30 * _cplx(rng, 4, 2 * sm.arity)
    t = np.array([0.0, 0.3, 0.7, 1.0])
    scale = H.residual_scale(x, t)
    assert (scale >= 1).all()
    # curve rows against a term-by-term sum of |c_m| |x|^a |y|^b
    mons = monomials(deg)
    for b in range(len(x)):
        c = H.params_at(t[b]).coeffs
        for i, (px, py) in enumerate(x[b].reshape(-1, 2)):
            ref = sum(abs(cm) * abs(px) ** a * abs(py) ** e for cm, (a, e) in zip(c, mons))
            assert scale[b, i] == pytest.approx(max(ref, 1.0), rel=1e-12)
    # the scale never falls below the size of the residual it measures
    assert (np.abs(H.evaluate(x, t)[0]) <= scale * (1 + 1e-12)).all()


def test_constant_parameter_homotopy_keeps_points():
    base, fiber = _stored_seed("euclid_diff", 2, 0, None, witness.STALL_LIMIT)
    H = build_parameter_homotopy("euclid_diff", base.coeffs, base.coeffs, base.image)
    res = track_many(H, fiber[:6])
    assert all(r.success for r in res)
    assert np.abs(np.array([r.endpoint for r in res]) - fiber[:6]).max() <= 1e-10


def test_parameter_homotopy_degree_mismatch():
    with pytest.raises(DimensionMismatch):
        build_parameter_homotopy("euclid_diff", random_curve(2, 0), random_curve(3, 0), random_slice(2, 1, rng_seed=0))


# monodromy


def test_stall_limit_zero_returns_known():
    coeffs, pts, sl = seed_incidence("euclid_diff", 2, rng_seed=0)
    base = HomotopyParams(coeffs, sl, Slice.empty(2))
    out = monodromy_populate("euclid_diff", 2, base, [pts.ravel()], stall_limit=0)
    assert np.array_equal(out, pts.reshape(1, -1))


def test_monodromy_loops_close(monkeypatch):
    legs = []
    real = witness.SignatureHomotopy

    def recording(sigmap, degree, start, end):
        legs.append((start, end))
        return real(sigmap, degree, start, end)

    monkeypatch.setattr(witness, "SignatureHomotopy", recording)
    coeffs, pts, sl = seed_incidence("euclid_diff", 2, rng_seed=0)
    base = HomotopyParams(coeffs, sl, Slice.empty(2))
    monodromy_populate("euclid_diff", 2, base, [pts.ravel()], stall_limit=1, max_loops=2)
    assert len(legs) % 3 == 0 and legs
    for i in range(0, len(legs), 3):
        a, b, c = legs[i: i + 3]
        assert a[0] is base and c[1] is base
        assert a[1] is b[0] and b[1] is c[0]


# stored seeds


@pytest.mark.parametrize("map_id", ["euclid_diff", "euclid_joint_diff"])
def test_stored_seed_is_exact_memo(map_id):
    base, fiber = compute_seed(map_id, 2)
    sbase, sfiber = _stored_seed(map_id, 2, 0, None, witness.STALL_LIMIT)
    assert np.array_equal(fiber, sfiber)
    assert np.array_equal(base.coeffs, sbase.coeffs)
    assert np.array_equal(base.image.coefficients, sbase.image.coefficients)
    assert np.array_equal(base.image.constants, sbase.image.constants)


@pytest.mark.parametrize("map_id", ["euclid_diff", "euclid_joint_diff", "euclid_joint"])
@pytest.mark.parametrize("degree", [2, 3, 4])
def test_stored_seed_sanity(map_id, degree):
    sigmap = get_map(map_id)
    base, fiber = _stored_seed(map_id, degree, 0, None, witness.STALL_LIMIT)
    assert len(fiber) == COUNTS["seed_fiber"][map_id][str(degree)]
    assert len(witness.dedupe(fiber, witness.POINT_DEDUP_TOL)) == len(fiber)
    pts = fiber.reshape(-1, sigmap.arity, 2)
    # backward error: a genuine point of norm ~1e2 has |f| ~ eps * sum |c_m x^m| ~ 1e-7
    mono = monomial_values(pts.reshape(-1, 2), degree)
    scale = np.maximum(np.abs(mono) @ np.abs(base.coeffs), 1.0)
    assert (np.abs(mono @ base.coeffs) / scale).max() <= 1e-12
    for p in pts[:: max(1, len(pts) // 50)]:
        v = _phi(sigmap, base.coeffs, degree, p)
        assert np.abs(base.image(v)).max() <= 1e-9 * max(1.0, np.abs(v).max())


def test_stored_seed_only_for_defaults():
    assert _stored_seed("euclid_diff", 2, 1, None, witness.STALL_LIMIT) is None
    assert _stored_seed("euclid_diff", 2, 0, None, 3) is None
    assert _stored_seed("euclid_diff", 7, 0, None, witness.STALL_LIMIT) is None


# pseudowitness sets


def test_conic_count_is_stable_across_seeds():
    conic = fixture_curve("conic")
    counts = set()
    for seed in (0, 1, 2):
        pws = compute_pws("euclid_diff", conic, rng_seed=seed)
        _assert_witness_conditions(pws)
        counts.add(pws.e)
        # every conic has the centre half-turn and two axis reflections, so each image has 4 preimages
        assert pws.e == 4 * pws.e_img
    assert counts == {COUNTS["pws"]["euclid_diff/conic"]}


@pytest.mark.parametrize("map_id", ["euclid_diff", "euclid_joint"])
def test_image_is_invariant_under_motion(map_id):
    conic = fixture_curve("conic")
    g = random_element("euclidean", rng_seed=11)
    a = compute_pws(map_id, conic, rng_seed=0)
    b = compute_pws(map_id, transform(conic, g), rng_seed=0)
    assert a.e_img == b.e_img
    for v in b.distinct_images:
        assert witness.min_relative_distance(a.distinct_images, v) <= 1e-7


def _ellipse_symmetries(curve):
    from curvesig.equivalence import fixes_curve

    half = [EuclideanElement(c, 0.0, eps, 0.0, 0.0) for c in (1.0, -1.0) for eps in (1, -1)]
    return [g for g in half if fixes_curve(curve, g)]


def test_ellipse_fiber_ratio(ellipse):
    syms = _ellipse_symmetries(ellipse)
    assert len(syms) == 4
    # a quarter turn swaps the axes and is not a symmetry
    from curvesig.equivalence import fixes_curve

    assert not fixes_curve(ellipse, EuclideanElement(0.0, 1.0, 1, 0.0, 0.0))
    pws = compute_pws("euclid_joint", ellipse, rng_seed=0)
    _assert_witness_conditions(pws)
    assert pws.e == len(syms) * pws.e_img


def test_circle_uses_domain_slice(circle):
    pws = compute_pws("euclid_joint", circle, rng_seed=0)
    assert pws.dim == 3
    assert pws.domain_slice is not None and pws.domain_slice.rows == 1
    assert pws.e > 0
    _assert_witness_conditions(pws)


def test_jobs_do_not_change_output():
    cubic = fixture_curve("cubic")
    a = compute_pws("euclid_joint", cubic, rng_seed=0, jobs=1)
    b = compute_pws("euclid_joint", cubic, rng_seed=0, jobs=4)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.images, b.images)


# membership and files


@pytest.fixture(scope="module")
def conic_pws():
    return compute_pws("euclid_diff", fixture_curve("conic"), rng_seed=0)


def test_membership(conic_pws):
    for v in conic_pws.images[:5]:
        assert membership(conic_pws, v)
    v = conic_pws.images[0]
    assert not membership(conic_pws, v + 1e-3 * np.abs(v).max(), tol=1e-6)
    with pytest.raises(DimensionMismatch):
        membership(conic_pws, np.zeros(3))


def test_membership_empty(conic_pws):
    empty = PseudoWitnessSet(conic_pws.map_id, conic_pws.curve, conic_pws.slice,
                             np.zeros((0, 1, 2), dtype=complex), np.zeros((0, 2), dtype=complex), 1)
    assert not membership(empty, conic_pws.images[0])


def test_json_round_trip_is_bit_exact(conic_pws, tmp_path):
    path = tmp_path / "w.json"
    path.write_text(json.dumps(conic_pws.to_json()))
    back = PseudoWitnessSet.from_json(json.loads(path.read_text()))
    assert np.array_equal(back.points, conic_pws.points)
    assert np.array_equal(back.images, conic_pws.images)
    assert np.array_equal(back.slice.coefficients, conic_pws.slice.coefficients)
    assert json.dumps(back.to_json()) == path.read_text()


def test_json_counts_checked(conic_pws):
    data = conic_pws.to_json()
    data["e"] += 1
    with pytest.raises(ValueError):
        PseudoWitnessSet.from_json(data)
