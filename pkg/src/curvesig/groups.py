"""Complex Euclidean and equi-affine motions of the plane.

Both groups act translate-then-linear: ``g . p = M (p + (a, b))``. For a
Euclidean element ``M = [[c, -eps s], [s, eps c]]`` with ``c^2 + s^2 = 1`` and
``eps`` the orientation sign, so reflections are part of the group.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Union

import numpy as np

from .curves import PointTuple, W_EPS, in_W, squared_distances
from .errors import InvariantMismatch, IsotropicPair

GROUP_TOL = 1e-12


def _c(z) -> complex:
    return complex(z)


@dataclass(frozen=True)
class EuclideanElement:
    c: complex
    s: complex
    eps: int
    a: complex
    b: complex

    def __post_init__(self):
        if self.eps not in (1, -1):
            raise ValueError("eps must be +1 or -1")

    @classmethod
    def identity(cls) -> "EuclideanElement":
        return cls(1 + 0j, 0j, 1, 0j, 0j)

    @property
    def matrix(self) -> np.ndarray:
        c, s, e = self.c, self.s, self.eps
        return np.array([[c, -e * s], [s, e * c]], dtype=complex)

    def is_valid(self, tol: float = GROUP_TOL) -> bool:
        return abs(self.c**2 + self.s**2 - 1) <= tol

    def affine(self) -> tuple[np.ndarray, np.ndarray]:
        """(M, t) with g . p = M p + t."""
        M = self.matrix
        return M, M @ np.array([self.a, self.b])

    def act(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=complex)
        u = p[..., 0] + self.a
        v = p[..., 1] + self.b
        return np.stack([self.c * u - self.eps * self.s * v, self.s * u + self.eps * self.c * v], axis=-1)

    def compose(self, h: "EuclideanElement") -> "EuclideanElement":
        """The element acting as ``self`` after ``h``."""
        g = self
        c = g.c * h.c - g.eps * g.s * h.s
        s = g.s * h.c + g.eps * g.c * h.s
        eps = g.eps * h.eps
        # translation: t_h + M_h^{-1} t_g
        tg = np.array([g.a, g.b])
        th = np.array([h.a, h.b])
        t = th + h.matrix.T @ tg
        return EuclideanElement(_c(c), _c(s), eps, _c(t[0]), _c(t[1]))

    def inverse(self) -> "EuclideanElement":
        t = -(self.matrix @ np.array([self.a, self.b]))
        return EuclideanElement(self.c, _c(-self.eps * self.s), self.eps, _c(t[0]), _c(t[1]))

    def distance(self, other: "EuclideanElement") -> float:
        """Max parameter difference; only meaningful for nearby elements."""
        if self.eps != other.eps:
            return float("inf")
        return max(abs(self.c - other.c), abs(self.s - other.s), abs(self.a - other.a), abs(self.b - other.b))

    def to_json(self) -> dict:
        pair = lambda z: [z.real, z.imag]  # noqa: E731
        return {"kind": "euclidean", "c": pair(self.c), "s": pair(self.s), "eps": self.eps,
                "a": pair(self.a), "b": pair(self.b)}


@dataclass(frozen=True)
class EquiAffineElement:
    m11: complex
    m12: complex
    m21: complex
    m22: complex
    a: complex
    b: complex

    @classmethod
    def identity(cls) -> "EquiAffineElement":
        return cls(1 + 0j, 0j, 0j, 1 + 0j, 0j, 0j)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=complex)

    def is_valid(self, tol: float = GROUP_TOL) -> bool:
        return abs(self.m11 * self.m22 - self.m12 * self.m21 - 1) <= tol

    def affine(self) -> tuple[np.ndarray, np.ndarray]:
        M = self.matrix
        return M, M @ np.array([self.a, self.b])

    def act(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=complex)
        u = p[..., 0] + self.a
        v = p[..., 1] + self.b
        return np.stack([self.m11 * u + self.m12 * v, self.m21 * u + self.m22 * v], axis=-1)

    def compose(self, h: "EquiAffineElement") -> "EquiAffineElement":
        M = self.matrix @ h.matrix
        t = np.array([h.a, h.b]) + np.linalg.solve(h.matrix, np.array([self.a, self.b]))
        return EquiAffineElement(*(complex(z) for z in M.ravel()), complex(t[0]), complex(t[1]))

    def inverse(self) -> "EquiAffineElement":
        M = self.matrix
        Minv = np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]])
        t = -(M @ np.array([self.a, self.b]))
        return EquiAffineElement(*(complex(z) for z in Minv.ravel()), complex(t[0]), complex(t[1]))

    def to_json(self) -> dict:
        pair = lambda z: [z.real, z.imag]  # noqa: E731
        return {"kind": "equiaffine", "m11": pair(self.m11), "m12": pair(self.m12), "m21": pair(self.m21),
                "m22": pair(self.m22), "a": pair(self.a), "b": pair(self.b)}


GroupElement = Union[EuclideanElement, EquiAffineElement]


def element_from_json(data) -> GroupElement:
    z = lambda key: complex(*data[key])  # noqa: E731
    if data["kind"] == "euclidean":
        g = EuclideanElement(z("c"), z("s"), int(data["eps"]), z("a"), z("b"))
    elif data["kind"] == "equiaffine":
        g = EquiAffineElement(z("m11"), z("m12"), z("m21"), z("m22"), z("a"), z("b"))
    else:
        raise ValueError(f"unknown group element kind {data['kind']!r}")
    if not g.is_valid(1e-9):
        raise ValueError("group element violates its defining identity")
    return g


def act(g: GroupElement, p) -> np.ndarray:
    return g.act(p)


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    return g.compose(h)


def inverse(g: GroupElement) -> GroupElement:
    return g.inverse()


# reflections and half-turn in the normalized frame
REFLECT_X = EuclideanElement(1 + 0j, 0j, -1, 0j, 0j)  # (x, y) -> (x, -y)
REFLECT_Y = EuclideanElement(-1 + 0j, 0j, -1, 0j, 0j)  # (x, y) -> (-x, y)
HALF_TURN = EuclideanElement(-1 + 0j, 0j, 1, 0j, 0j)


def moving_frame(p1, p2, w_eps: float = W_EPS) -> EuclideanElement:
    """The motion sending p1 to the origin and p2 to (0, sqrt(d12)).

    Uses the principal branch of the square root.
    """
    x1, y1 = (complex(z) for z in p1)
    x2, y2 = (complex(z) for z in p2)
    d12 = (x1 - x2) ** 2 + (y1 - y2) ** 2
    if abs(d12) <= w_eps:
        raise IsotropicPair(f"squared distance {d12:.3e} too small for a moving frame")
    r = cmath.sqrt(d12)
    return EuclideanElement((y2 - y1) / r, (x2 - x1) / r, 1, -x1, -y1)


def _as_points(tup) -> np.ndarray:
    return tup.as_array() if isinstance(tup, PointTuple) else np.asarray(tup, dtype=complex)


def recover_element(p, q, tol: float = 1e-6, w_eps: float = W_EPS) -> EuclideanElement | None:
    """Find g with g . q_i = p_i for tuples of 3 or 4 points with equal distances.

    Both tuples are normalized by their moving frames and the four frame
    symmetries (identity, the two axis reflections, the half-turn) are tried.
    Returns ``None`` when no candidate matches within ``tol``.
    """
    P, Q = _as_points(p), _as_points(q)
    if P.shape != Q.shape or P.shape[0] not in (3, 4):
        raise ValueError("recover_element needs two tuples of 3 or 4 points")
    if not (in_W(P, w_eps) and in_W(Q, w_eps)):
        raise IsotropicPair("tuple has an isotropic or repeated pair")
    dp, dq = squared_distances(P), squared_distances(Q)
    if np.any(np.abs(dp - dq) > tol * np.maximum(1.0, np.abs(dp))):
        raise InvariantMismatch("squared distances of the two tuples differ")
    gp = moving_frame(P[0], P[1], w_eps)
    gq = moving_frame(Q[0], Q[1], w_eps)
    gp_inv = gp.inverse()
    scale = 1.0 + np.abs(P).max()
    best, best_err = None, np.inf
    for h in (EuclideanElement.identity(), REFLECT_X, REFLECT_Y, HALF_TURN):
        g = gp_inv.compose(h.compose(gq))
        err = np.abs(g.act(Q) - P).max() / scale
        if err < best_err:
            best, best_err = g, err
    return best if best_err <= tol else None


def stabilizer(p, w_eps: float = W_EPS) -> list[EuclideanElement]:
    """Identity and the reflection across the line through the two points."""
    P = _as_points(p)
    g = moving_frame(P[0], P[1], w_eps)
    return [EuclideanElement.identity(), g.inverse().compose(REFLECT_Y.compose(g))]


MAX_ROTATION_ENTRY = 3.0
MAX_EQUIAFFINE_COND = 10.0


def random_element(kind: str = "euclidean", rng_seed: int | None = None, rng=None) -> GroupElement:
    """Random Euclidean (rational parametrization of the circle) or equi-affine motion.

    Draws are resampled when the linear part is badly conditioned (a complex
    rotation with an entry above ``MAX_ROTATION_ENTRY`` or an equi-affine matrix
    with condition number above ``MAX_EQUIAFFINE_COND``), so test fixtures stay
    well within double precision.
    """
    rng = np.random.default_rng(rng_seed) if rng is None else rng
    if kind == "euclidean":
        while True:
            t = complex(rng.standard_normal(), 0.25 * rng.standard_normal())
            if abs(1 + t * t) < 1e-6:
                continue
            c = (1 - t * t) / (1 + t * t)
            s = 2 * t / (1 + t * t)
            if max(abs(c), abs(s)) <= MAX_ROTATION_ENTRY:
                break
        eps = 1 if rng.random() < 0.5 else -1
        a, b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        return EuclideanElement(complex(c), complex(s), eps, complex(a), complex(b))
    if kind == "equiaffine":
        while True:
            M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            det = np.linalg.det(M)
            if abs(det) > 1e-3 and np.linalg.cond(M) <= MAX_EQUIAFFINE_COND:
                break
        M = M / np.sqrt(det)
        a, b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        return EquiAffineElement(*(complex(z) for z in M.ravel()), complex(a), complex(b))
    raise ValueError(f"unknown group kind {kind!r}")
