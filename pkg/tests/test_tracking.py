import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvesig.tracking import FunctionSystem, PathStatus, SquareSystem, TrackerSettings, track, track_many


class LinearHomotopy(SquareSystem):
    """(1 - t)(A0 x - b0) + t (A1 x - b1)."""

    def __init__(self, A0, b0, A1, b1):
        self.A0, self.b0, self.A1, self.b1 = A0, b0, A1, b1
        self.n = len(b0)

    def evaluate(self, x, t):
        tt = t[:, None]
        r0 = x @ self.A0.T - self.b0
        r1 = x @ self.A1.T - self.b1
        A = (1 - tt[..., None]) * self.A0 + tt[..., None] * self.A1
        return (1 - tt) * r0 + tt * r1, A, r1 - r0


def _cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_linear_homotopy_endpoint(rng):
    A0, A1 = _cplx(rng, 3, 3), _cplx(rng, 3, 3)
    b0, b1 = _cplx(rng, 3), _cplx(rng, 3)
    res = track(LinearHomotopy(A0, b0, A1, b1), np.linalg.solve(A0, b0))
    assert res.success
    assert np.abs(res.endpoint - np.linalg.solve(A1, b1)).max() <= 1e-10


def _scalar(f, fx, ft):
    return FunctionSystem(1, lambda x, t: [f(x[0], t)], lambda x, t: [[fx(x[0], t)]], lambda x, t: [ft(x[0], t)])


def test_fold_is_reported():
    # x^2 = 0.5 - t: the two real paths meet at t = 0.5 and leave the real line; from there H_x is singular
    H = _scalar(lambda x, t: x * x - (0.5 - t), lambda x, t: 2 * x, lambda x, t: 1.0)
    res = track(H, [np.sqrt(0.5)])
    assert res.status is not PathStatus.SUCCESS
    assert res.endpoint is None


def test_degree_drop_is_reported():
    # leading coefficient 1 - 2t vanishes at t = 0.5, sending one root of a x^2 + x - 1 to infinity
    H = _scalar(lambda x, t: (1 - 2 * t) * x * x + x - 1, lambda x, t: 2 * (1 - 2 * t) * x + 1, lambda x, t: -2 * x * x)
    res = track(H, [(-1 - np.sqrt(5)) / 2])
    assert res.status in (PathStatus.DIVERGED, PathStatus.STEP_FAILURE)


def _random_quadratic_system(rng):
    """Total-degree style homotopy for two random quadrics with a gamma factor."""
    C = _cplx(rng, 2, 6)
    gamma = np.exp(2j * np.pi * rng.random())

    def monos(x):
        return np.array([1, x[0], x[1], x[0] ** 2, x[0] * x[1], x[1] ** 2])

    def dmonos(x):
        return np.array([[0, 0], [1, 0], [0, 1], [2 * x[0], 0], [x[1], x[0]], [0, 2 * x[1]]])

    def start(x):
        return np.array([x[0] ** 2 - 1, x[1] ** 2 - 1])

    def dstart(x):
        return np.diag([2 * x[0], 2 * x[1]])

    f = lambda x, t: (1 - t) * gamma * start(x) + t * (C @ monos(x))  # noqa: E731
    fx = lambda x, t: (1 - t) * gamma * dstart(x) + t * (C @ dmonos(x))  # noqa: E731
    ft = lambda x, t: C @ monos(x) - gamma * start(x)  # noqa: E731
    starts = np.array([[a, b] for a in (1, -1) for b in (1, -1)], dtype=complex)
    return FunctionSystem(2, f, fx, ft), starts


def test_success_implies_small_residual(rng):
    H, starts = _random_quadratic_system(rng)
    s = TrackerSettings()
    for r in track_many(H, starts, s):
        if r.success:
            assert np.isfinite(r.endpoint).all()
            assert np.linalg.norm(H.residual(r.endpoint, 1.0)) <= s.endpoint_tol


class ScaledLinearHomotopy(LinearHomotopy):
    """LinearHomotopy with every equation multiplied by ``scale``."""

    def __init__(self, scale, relative, *args):
        super().__init__(*args)
        self.scale, self.relative = scale, relative

    def evaluate(self, x, t):
        H, Hx, Ht = super().evaluate(x, t)
        return self.scale * H, self.scale * Hx, self.scale * Ht

    def residual_scale(self, x, t):
        if self.relative:
            return np.full((len(x), self.n), self.scale)
        return super().residual_scale(x, t)


def test_endpoint_test_uses_residual_scale(rng):
    args = _cplx(rng, 3, 3), _cplx(rng, 3), _cplx(rng, 3, 3), _cplx(rng, 3)
    x0 = np.linalg.solve(args[0], args[1])
    # roundoff in a residual of size 1e14 * eps cannot meet an absolute 1e-8
    absolute = track(ScaledLinearHomotopy(1e14, False, *args), x0)
    relative = track(ScaledLinearHomotopy(1e14, True, *args), x0)
    assert not absolute.success
    assert relative.success
    assert np.abs(relative.endpoint - np.linalg.solve(args[2], args[3])).max() <= 1e-10


def test_batch_independence(rng):
    H, starts = _random_quadratic_system(rng)
    starts = np.concatenate([starts, starts[::-1]])
    whole = track_many(H, starts)
    pieces = track_many(H, starts, chunk_size=3, jobs=4)
    single = [track(H, x) for x in starts]
    for a, b, c in zip(whole, pieces, single):
        assert a.status == b.status == c.status
        if a.success:
            assert np.array_equal(a.endpoint, b.endpoint) and np.array_equal(a.endpoint, c.endpoint)


def test_constant_homotopy_returns_start(rng):
    A, b = _cplx(rng, 2, 2), _cplx(rng, 2)
    x0 = np.linalg.solve(A, b)
    res = track(LinearHomotopy(A, b, A, b), x0)
    assert res.success and np.abs(res.endpoint - x0).max() <= 1e-14


@pytest.mark.parametrize("bad", [dict(dt_min=0.0), dict(dt_init=0.6, dt_max=0.6), dict(dt_init=0.2, dt_max=0.1),
                                 dict(newton_tol=-1.0)])
def test_settings_validation(bad):
    with pytest.raises(ValueError):
        TrackerSettings(**bad)


def test_settings_from_mapping():
    assert TrackerSettings.from_mapping({"dt_max": 0.2}).dt_max == 0.2
    with pytest.raises(ValueError):
        TrackerSettings.from_mapping({"dt_maximum": 0.2})


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_linear_homotopies_property(seed):
    rng = np.random.default_rng(seed)
    A0, A1 = _cplx(rng, 2, 2), _cplx(rng, 2, 2)
    b0, b1 = _cplx(rng, 2), _cplx(rng, 2)
    res = track(LinearHomotopy(A0, b0, A1, b1), np.linalg.solve(A0, b0))
    if res.success:
        assert np.abs(A1 @ res.endpoint - b1).max() <= 1e-8 * (1 + np.abs(res.endpoint).max())
