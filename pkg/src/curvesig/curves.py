"""Plane algebraic curves given by one implicit bivariate polynomial.

Curves are assumed irreducible; nothing here checks it, and reducible
input voids the probability-one guarantees of the witness and equality code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import perm
from typing import Sequence

import numpy as np

from .algebra import MultiPoly, solve_linear, univariate_roots
from .errors import InvalidCurve, NoConvergence, SampleFailure, SingularMatrix

TOL_ON_CURVE = 1e-10
W_EPS = 1e-10
MAX_PARTIAL_ORDER = 4

# partial derivative index pairs (a, b) meaning d^{a+b} f / dx^a dy^b, ordered by total order
PARTIALS: tuple[tuple[int, int], ...] = tuple(
    (a, n - a) for n in range(MAX_PARTIAL_ORDER + 1) for a in range(n, -1, -1)
)
PARTIAL_INDEX = {p: i for i, p in enumerate(PARTIALS)}


def n_partials(order: int) -> int:
    return (order + 1) * (order + 2) // 2


@lru_cache(maxsize=None)
def monomials(degree: int) -> tuple[tuple[int, int], ...]:
    """Exponents of all bivariate monomials of total degree <= degree."""
    return tuple((a, n - a) for n in range(degree + 1) for a in range(n, -1, -1))


@lru_cache(maxsize=None)
def _derivative_operators(degree: int) -> np.ndarray:
    """Array D with D[q] mapping a coefficient vector to that of partial q."""
    mons = monomials(degree)
    index = {m: i for i, m in enumerate(mons)}
    D = np.zeros((len(PARTIALS), len(mons), len(mons)))
    for q, (a, b) in enumerate(PARTIALS):
        for j, (ex, ey) in enumerate(mons):
            if ex >= a and ey >= b:
                D[q, index[(ex - a, ey - b)], j] = perm(ex, a) * perm(ey, b)
    return D


def monomial_values(points: np.ndarray, degree: int) -> np.ndarray:
    """Values of ``monomials(degree)`` at ``points`` of shape (..., 2)."""
    px = _powers(points[..., 0], degree)
    py = _powers(points[..., 1], degree)
    ex, ey = _exponent_arrays(degree)
    return px[..., ex] * py[..., ey]


def _powers(z: np.ndarray, degree: int) -> np.ndarray:
    out = np.empty(z.shape + (degree + 1,), dtype=np.result_type(z, float))
    out[..., 0] = 1.0
    for n in range(1, degree + 1):
        out[..., n] = out[..., n - 1] * z
    return out


@lru_cache(maxsize=None)
def _exponent_arrays(degree: int):
    return tuple(np.array(monomials(degree)).T)


@lru_cache(maxsize=None)
def _derivative_gather(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Source index and factor with partial_q coefficient i = factor[q, i] * c[source[q, i]]."""
    D = _derivative_operators(degree)
    source = np.argmax(D != 0, axis=2)
    factor = np.take_along_axis(D, source[..., None], axis=2)[..., 0]
    return source, factor


def rowdot(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Sum over the last axis of X * Y with broadcasting, in a fixed left-to-right order.

    Used instead of matmul or ``sum`` in batched kernels: numpy may pick a
    different reduction order for different shapes, which would make a
    path's arithmetic depend on the rest of its batch.
    """
    acc = X[..., 0] * Y[..., 0]
    for i in range(1, max(X.shape[-1], Y.shape[-1])):
        acc = acc + X[..., i] * Y[..., i]
    return acc


def partials_dense(points: np.ndarray, coeffs: np.ndarray, degree: int, order: int, mono=None) -> np.ndarray:
    """All partials of order <= ``order`` at ``points``.

    ``points`` has shape (B, k, 2); ``coeffs`` has shape (M,) or (B, M) in the
    basis ``monomials(degree)``. Returns shape (B, k, n_partials(order)).
    ``mono`` may pass precomputed ``monomial_values(points, degree)``.
    """
    Q = n_partials(order)
    source, factor = _derivative_gather(degree)
    if mono is None:
        mono = monomial_values(points, degree)
    if coeffs.ndim == 1:
        dcoef = coeffs[source[:Q]] * factor[:Q]  # (Q, M)
        return rowdot(mono[:, :, None, :], dcoef[None, None])
    dcoef = coeffs[:, source[:Q]] * factor[:Q]  # (B, Q, M)
    return rowdot(mono[:, :, None, :], dcoef[:, None])


@dataclass(frozen=True)
class CurvePoint:
    x: complex
    y: complex
    residual: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=complex)


@dataclass(frozen=True)
class PointTuple:
    """An ordered k-tuple of curve points."""

    points: tuple[CurvePoint, ...]

    @classmethod
    def from_array(cls, arr, curve: "Curve | None" = None) -> "PointTuple":
        arr = np.asarray(arr, dtype=complex).reshape(-1, 2)
        pts = []
        for x, y in arr:
            res = abs(curve.f((x, y))) if curve is not None else 0.0
            pts.append(CurvePoint(complex(x), complex(y), float(res)))
        return cls(tuple(pts))

    @property
    def arity(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.points], dtype=complex)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]


class Curve:
    """A plane curve f(x, y) = 0 of degree at least two."""

    def __init__(self, f: MultiPoly):
        if f.nvars != 2:
            raise InvalidCurve(f"curve polynomial must have 2 variables, got {f.nvars}")
        if f.degree() < 2:
            raise InvalidCurve(f"curve degree must be at least 2, got {f.degree()}")
        self.f = f
        self.degree = f.degree()
        self._partials: dict[tuple[int, int], MultiPoly] = {(0, 0): f}

    def partial(self, a: int, b: int) -> MultiPoly:
        """Cached d^{a+b} f / dx^a dy^b."""
        key = (a, b)
        if key not in self._partials:
            if a > 0:
                self._partials[key] = self.partial(a - 1, b).partial(0)
            else:
                self._partials[key] = self.partial(a, b - 1).partial(1)
        return self._partials[key]

    @cached_property
    def coefficients(self) -> np.ndarray:
        """Dense coefficient vector in the basis ``monomials(self.degree)``."""
        return np.array([self.f.coefficient(m) for m in monomials(self.degree)], dtype=complex)

    @cached_property
    def scale(self) -> float:
        return self.f.coefficient_scale()

    def normalized_coefficients(self, degree: int | None = None) -> np.ndarray:
        degree = self.degree if degree is None else degree
        c = np.array([self.f.coefficient(m) for m in monomials(degree)], dtype=complex)
        return c / self.scale

    def jets(self, points: np.ndarray, order: int = MAX_PARTIAL_ORDER) -> np.ndarray:
        """Partials up to ``order`` at points of shape (B, k, 2), normalized scale."""
        return partials_dense(np.asarray(points, dtype=complex), self.normalized_coefficients(), self.degree, order)

    def residual(self, x: complex, y: complex) -> float:
        return abs(self.f((x, y))) / self.scale

    def gradient(self, x: complex, y: complex) -> np.ndarray:
        return np.array([self.partial(1, 0)((x, y)), self.partial(0, 1)((x, y))], dtype=complex)

    def __eq__(self, other):
        return isinstance(other, Curve) and self.f == other.f

    def __hash__(self):
        return hash(self.f)

    def __repr__(self):
        return f"Curve(degree={self.degree}, terms={len(self.f.terms)})"

    @classmethod
    def from_coefficients(cls, coeffs: Sequence[complex], degree: int) -> "Curve":
        return cls(MultiPoly(2, dict(zip(monomials(degree), coeffs))))

    def to_json(self) -> dict:
        return {"degree_hint": self.degree, "poly": self.f.to_json()}

    @classmethod
    def from_json(cls, data) -> "Curve":
        poly = MultiPoly.from_json(data["poly"])
        if poly.nvars != 2:
            raise InvalidCurve("curve file must hold a bivariate polynomial")
        return cls(poly)

    @classmethod
    def load(cls, path) -> "Curve":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def random_curve(degree: int, seed: int) -> Curve:
    """Curve with iid standard complex Gaussian coefficients."""
    rng = np.random.default_rng(seed)
    n = len(monomials(degree))
    c = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    return Curve.from_coefficients(c, degree)


def line_through(point, direction) -> tuple[complex, complex, complex]:
    """Affine form (alpha, beta, gamma) vanishing on point + s * direction."""
    (x0, y0), (u, v) = point, direction
    return (complex(v), complex(-u), complex(-(v * x0 - u * y0)))


def refine(curve: Curve, approx, line, tol: float = 1e-12, max_iters: int = 30) -> CurvePoint:
    """Newton iteration on (f, line) = 0 starting from ``approx``.

    ``line`` is an affine form (alpha, beta, gamma) for alpha x + beta y + gamma.
    """
    if isinstance(approx, CurvePoint):
        z = approx.as_array()
    else:
        z = np.asarray(approx, dtype=complex)
    alpha, beta, gamma = line
    fx, fy = curve.partial(1, 0), curve.partial(0, 1)
    lscale = max(abs(alpha), abs(beta))

    def jac(z):
        return np.array([[fx(z) / curve.scale, fy(z) / curve.scale], [alpha / lscale, beta / lscale]])

    J = jac(z)
    if abs(np.linalg.det(J)) <= 1e-12 * max(1.0, np.abs(J).max()) ** 2:
        raise SingularMatrix("Jacobian of (f, line) is singular at the starting point")
    for _ in range(max_iters):
        F = np.array([curve.f(z) / curve.scale, (alpha * z[0] + beta * z[1] + gamma) / lscale])
        if abs(F[0]) <= tol and abs(F[1]) <= tol * (1 + np.abs(z).max()):
            return CurvePoint(complex(z[0]), complex(z[1]), float(abs(F[0])))
        z = z - solve_linear(jac(z), F, pivot_eps=1e-12)
    res = abs(curve.f(z)) / curve.scale
    if res <= tol:
        return CurvePoint(complex(z[0]), complex(z[1]), float(res))
    raise NoConvergence(f"refinement stalled at residual {res:.3e}")


def sample(curve: Curve, count: int, rng_seed: int, max_attempts: int = 50) -> list[CurvePoint]:
    """Sample points of the curve by intersecting it with random complex lines.

    Each point is a random root of f restricted to a random line, then
    Newton-refined against that line. Deterministic given ``rng_seed``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng(rng_seed)
    s = MultiPoly.variable(1, 0)
    out: list[CurvePoint] = []
    attempts = 0
    while len(out) < count:
        if attempts >= max_attempts:
            raise SampleFailure(f"only {len(out)} of {count} points after {attempts} attempts")
        attempts += 1
        p0 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        d = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        d /= np.linalg.norm(d)
        restricted = curve.f.compose([s * d[0] + p0[0], s * d[1] + p0[1]])
        pick = rng.integers(curve.degree)
        try:
            roots = univariate_roots(restricted, seed=int(rng.integers(2**31)))
        except (ValueError, NoConvergence):
            continue
        approx = p0 + roots[pick % len(roots)] * d
        try:
            pt = refine(curve, approx, line_through(p0, d))
        except (SingularMatrix, NoConvergence):
            continue
        if pt.residual > TOL_ON_CURVE:
            continue
        out.append(pt)
    return out


def sample_tuple(curve: Curve, k: int, rng_seed: int) -> PointTuple:
    return PointTuple(tuple(sample(curve, k, rng_seed)))


def squared_distances(points: np.ndarray) -> np.ndarray:
    """d_jk for j < k in lexicographic pair order; points shape (..., n, 2)."""
    n = points.shape[-2]
    j, k = np.triu_indices(n, 1)
    diff = points[..., j, :] - points[..., k, :]
    return diff[..., 0] ** 2 + diff[..., 1] ** 2


def in_W(tup, w_eps: float = W_EPS) -> bool:
    """True iff every pairwise squared distance has magnitude above ``w_eps``."""
    arr = tup.as_array() if isinstance(tup, PointTuple) else np.asarray(tup, dtype=complex)
    if arr.shape[0] < 2:
        raise ValueError("need at least two points")
    return bool(np.all(np.abs(squared_distances(arr)) > w_eps))


def transform(curve: Curve, g) -> Curve:
    """The curve g . C, i.e. the zero set of f composed with g^{-1}."""
    A, t = g.inverse().affine()
    X = MultiPoly.variable(2, 0)
    Y = MultiPoly.variable(2, 1)
    subs = [X * A[0, 0] + Y * A[0, 1] + t[0], X * A[1, 0] + Y * A[1, 1] + t[1]]
    return Curve(curve.f.compose(subs))


def is_regular(curve: Curve, point, tol: float = 1e-8) -> bool:
    g = curve.gradient(*np.asarray(point, dtype=complex))
    return bool(np.linalg.norm(g) > tol * curve.scale)
