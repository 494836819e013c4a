"""The four signature maps: values, Jacobians and domain guards.

Every map is written as a function of the tuple coordinates and of the curve
partials ("jets") at each tuple point. Keeping the jet dependence explicit lets
the homotopy code differentiate through a moving curve by the chain rule.

Array conventions: ``pts`` has shape (B, k, 2) and ``jets`` has shape
(B, k, 15) holding the partials listed in :data:`curves.PARTIALS`.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .algebra import RANK_TOL, numeric_rank
from .curves import PARTIAL_INDEX, PARTIALS, Curve, PointTuple, n_partials, rowdot
from .errors import DegenerateChord, DimensionMismatch, IsotropicPoint, SingularCurvePoint

DENOM_EPS = 1e-10

_FX, _FY = PARTIAL_INDEX[(1, 0)], PARTIAL_INDEX[(0, 1)]
_FXX, _FXY, _FYY = PARTIAL_INDEX[(2, 0)], PARTIAL_INDEX[(1, 1)], PARTIAL_INDEX[(0, 2)]
_FXXX, _FXXY, _FXYY, _FYYY = (PARTIAL_INDEX[p] for p in [(3, 0), (2, 1), (1, 2), (0, 3)])

# index of d/dx and d/dy of each partial of order <= 3
_NJ3 = n_partials(3)
_SHIFT_X = np.array([PARTIAL_INDEX[(a + 1, b)] for a, b in PARTIALS[:_NJ3]])
_SHIFT_Y = np.array([PARTIAL_INDEX[(a, b + 1)] for a, b in PARTIALS[:_NJ3]])


def _euclid_diff(pts, jets):
    J = jets[:, 0]
    a, b = J[:, _FX], J[:, _FY]
    fxx, fxy, fyy = J[:, _FXX], J[:, _FXY], J[:, _FYY]
    fxxx, fxxy, fxyy, fyyy = J[:, _FXXX], J[:, _FXXY], J[:, _FXYY], J[:, _FYYY]

    G = a * a + b * b
    K = a * a * fyy - 2 * fxy * a * b + fxx * b * b
    M = (a * a - b * b) * fxy - a * b * (fxx - fyy)
    T = -(b**3) * fxxx + 3 * a * b * b * fxxy - 3 * a * a * b * fxyy + a**3 * fyyy
    N = G * T - 3 * M * K

    def grad(*entries):
        # gradient vector over the jet slots, entries given as (slot, value) pairs
        g = np.zeros(a.shape + (jets.shape[-1],), dtype=complex)
        for slot, val in entries:
            g[:, slot] = val
        return g

    dG = grad((_FX, 2 * a), (_FY, 2 * b))
    dK = grad((_FX, 2 * a * fyy - 2 * fxy * b), (_FY, 2 * b * fxx - 2 * fxy * a),
              (_FXX, b * b), (_FXY, -2 * a * b), (_FYY, a * a))
    dM = grad((_FX, 2 * a * fxy - b * (fxx - fyy)), (_FY, -2 * b * fxy - a * (fxx - fyy)),
              (_FXX, -a * b), (_FXY, a * a - b * b), (_FYY, a * b))
    dT = grad((_FX, 3 * b * b * fxxy - 6 * a * b * fxyy + 3 * a * a * fyyy),
              (_FY, -3 * b * b * fxxx + 6 * a * b * fxxy - 3 * a * a * fxyy),
              (_FXXX, -(b**3)), (_FXXY, 3 * a * b * b), (_FXYY, -3 * a * a * b), (_FYYY, a**3))
    dN = T[:, None] * dG + G[:, None] * dT - 3 * (K[:, None] * dM + M[:, None] * dK)

    G3 = G**3
    G6 = G3 * G3
    kappa2 = K * K / G3
    kappas2 = N * N / G6
    dkappa2 = 2 * (K / G3)[:, None] * dK - 3 * (K * K / (G3 * G))[:, None] * dG
    dkappas2 = 2 * (N / G6)[:, None] * dN - 6 * (N * N / (G6 * G))[:, None] * dG

    vals = np.stack([kappa2, kappas2], axis=1)
    d_pts = np.zeros(vals.shape + (1, 2), dtype=complex)
    d_jets = np.stack([dkappa2, dkappas2], axis=1)[:, :, None, :]
    return vals, d_pts, d_jets


def _euclid_joint_diff(pts, jets):
    dx = pts[:, 0, 0] - pts[:, 1, 0]
    dy = pts[:, 0, 1] - pts[:, 1, 1]
    d12 = dx * dx + dy * dy
    B = pts.shape[0]
    vals = np.empty((B, 3), dtype=complex)
    d_pts = np.zeros((B, 3, 2, 2), dtype=complex)
    d_jets = np.zeros((B, 3, 2, jets.shape[-1]), dtype=complex)
    vals[:, 0] = d12
    d_pts[:, 0, 0] = np.stack([2 * dx, 2 * dy], axis=-1)
    d_pts[:, 0, 1] = -d_pts[:, 0, 0]
    for i in range(2):
        a, b = jets[:, i, _FX], jets[:, i, _FY]
        num = -dy * a + dx * b
        den = dx * a + dy * b
        den2 = den * den
        vals[:, 1 + i] = num / den
        g_dx = dy * (a * a + b * b) / den2
        g_dy = -dx * (a * a + b * b) / den2
        d_pts[:, 1 + i, 0] = np.stack([g_dx, g_dy], axis=-1)
        d_pts[:, 1 + i, 1] = -d_pts[:, 1 + i, 0]
        d_jets[:, 1 + i, i, _FX] = -b * d12 / den2
        d_jets[:, 1 + i, i, _FY] = a * d12 / den2
    return vals, d_pts, d_jets


_PAIRS4 = list(combinations(range(4), 2))


def _euclid_joint(pts, jets):
    B = pts.shape[0]
    vals = np.empty((B, 6), dtype=complex)
    d_pts = np.zeros((B, 6, 4, 2), dtype=complex)
    for r, (j, k) in enumerate(_PAIRS4):
        diff = pts[:, j] - pts[:, k]
        vals[:, r] = diff[:, 0] ** 2 + diff[:, 1] ** 2
        d_pts[:, r, j] = 2 * diff
        d_pts[:, r, k] = -2 * diff
    return vals, d_pts, np.zeros((B, 6, 4, jets.shape[-1]), dtype=complex)


_TRIPLES6 = [(0, 1, 2), (0, 1, 3), (0, 1, 4), (0, 1, 5), (0, 2, 3), (0, 2, 4), (0, 2, 5)]


def signed_area(pts, i, j, k):
    x, y = pts[..., 0], pts[..., 1]
    return x[..., i] * (y[..., j] - y[..., k]) - x[..., j] * (y[..., i] - y[..., k]) + x[..., k] * (y[..., i] - y[..., j])


def _equiaffine_joint(pts, jets):
    B = pts.shape[0]
    x, y = pts[..., 0], pts[..., 1]
    vals = np.empty((B, 7), dtype=complex)
    d_pts = np.zeros((B, 7, 6, 2), dtype=complex)
    for r, (i, j, k) in enumerate(_TRIPLES6):
        vals[:, r] = signed_area(pts, i, j, k)
        d_pts[:, r, i] = np.stack([y[:, j] - y[:, k], x[:, k] - x[:, j]], axis=-1)
        d_pts[:, r, j] = np.stack([y[:, k] - y[:, i], x[:, i] - x[:, k]], axis=-1)
        d_pts[:, r, k] = np.stack([y[:, i] - y[:, j], x[:, j] - x[:, i]], axis=-1)
    return vals, d_pts, np.zeros((B, 7, 6, jets.shape[-1]), dtype=complex)


@dataclass(frozen=True)
class SignatureMap:
    """Descriptor of one signature map.

    ``arity`` is the tuple size k, ``ambient`` the image dimension m and
    ``jet_order`` the highest curve partial the values depend on.
    """

    id: str
    arity: int
    ambient: int
    dim_expected: int
    jet_order: int
    heuristic: bool = False

    @property
    def kernel(self):
        return _KERNELS[self.id]

    def values(self, pts, jets) -> np.ndarray:
        return self.kernel(pts, jets)[0]

    def with_derivatives(self, pts, jets):
        """Values and total derivatives with respect to the tuple coordinates.

        Returns ``(vals, dvals, d_jets)``: ``dvals`` has shape (B, m, k, 2) and
        already includes the dependence through the jets; ``d_jets`` is the
        partial derivative with respect to the jet slots, used for moving curves.
        ``jets`` must hold partials through order ``jet_order + 1``.
        """
        vals, d_pts, d_jets = self.kernel(pts, jets)
        if self.jet_order > 0:
            dj = d_jets[..., :_NJ3]
            d_pts = d_pts.copy()
            d_pts[..., 0] += rowdot(dj, jets[:, None, :, _SHIFT_X])
            d_pts[..., 1] += rowdot(dj, jets[:, None, :, _SHIFT_Y])
        return vals, d_pts, d_jets


EUCLID_DIFF = SignatureMap("euclid_diff", 1, 2, 1, 3)
EUCLID_JOINT_DIFF = SignatureMap("euclid_joint_diff", 2, 3, 2, 1)
EUCLID_JOINT = SignatureMap("euclid_joint", 4, 6, 4, 0)
EQUIAFFINE_JOINT = SignatureMap("equiaffine_joint", 6, 7, 6, 0, heuristic=True)

_KERNELS = {
    "euclid_diff": _euclid_diff,
    "euclid_joint_diff": _euclid_joint_diff,
    "euclid_joint": _euclid_joint,
    "equiaffine_joint": _equiaffine_joint,
}

MAPS = {m.id: m for m in (EUCLID_DIFF, EUCLID_JOINT_DIFF, EUCLID_JOINT, EQUIAFFINE_JOINT)}


def get_map(map_id) -> SignatureMap:
    if isinstance(map_id, SignatureMap):
        return map_id
    try:
        return MAPS[map_id]
    except KeyError:
        raise ValueError(f"unknown signature map {map_id!r}; choose from {sorted(MAPS)}") from None


def _tuple_array(sigmap: SignatureMap, tup) -> np.ndarray:
    arr = tup.as_array() if isinstance(tup, PointTuple) else np.asarray(tup, dtype=complex).reshape(-1, 2)
    if arr.shape[0] != sigmap.arity:
        raise DimensionMismatch(f"{sigmap.id} needs {sigmap.arity} points, got {arr.shape[0]}")
    return arr


def check_domain(sigmap: SignatureMap, pts: np.ndarray, jets: np.ndarray, denom_eps: float = DENOM_EPS):
    """Raise if a denominator of the map is numerically zero at the tuple."""
    if sigmap.jet_order == 0:
        return
    a, b = jets[..., _FX], jets[..., _FY]
    if np.any(np.abs(a * a + b * b) <= denom_eps):
        raise IsotropicPoint("F_x^2 + F_y^2 vanishes at a tuple point")
    if sigmap.id == "euclid_joint_diff":
        dx = pts[..., 0, 0] - pts[..., 1, 0]
        dy = pts[..., 0, 1] - pts[..., 1, 1]
        for i in range(2):
            den = dx * a[..., i] + dy * b[..., i]
            if np.any(np.abs(den) <= denom_eps):
                raise DegenerateChord("chord is tangent-orthogonal at a tuple point")


def eval_sig(sigmap, curve: Curve, tup, denom_eps: float = DENOM_EPS) -> np.ndarray:
    """Signature value of a tuple on ``curve``; returns a length-m complex vector."""
    sigmap = get_map(sigmap)
    pts = _tuple_array(sigmap, tup)[None]
    jets = curve.jets(pts, sigmap.jet_order)
    check_domain(sigmap, pts, jets, denom_eps)
    return sigmap.values(pts, _pad(jets))[0]


def _pad(jets: np.ndarray) -> np.ndarray:
    out = np.zeros(jets.shape[:-1] + (len(PARTIALS),), dtype=complex)
    out[..., : jets.shape[-1]] = jets
    return out


def jacobian_ambient(sigmap, curve: Curve, tup, denom_eps: float = DENOM_EPS) -> np.ndarray:
    """m x 2k matrix of derivatives with respect to (x1, y1, ..., xk, yk)."""
    sigmap = get_map(sigmap)
    pts = _tuple_array(sigmap, tup)[None]
    jets = curve.jets(pts, sigmap.jet_order + 1)
    check_domain(sigmap, pts, jets, denom_eps)
    _, d, _ = sigmap.with_derivatives(pts, _pad(jets))
    return d[0].reshape(sigmap.ambient, 2 * sigmap.arity)


def jacobian_on_curve(sigmap, curve: Curve, tup, denom_eps: float = DENOM_EPS) -> np.ndarray:
    """m x k matrix: derivative along the unit curve tangent at each tuple point."""
    sigmap = get_map(sigmap)
    pts = _tuple_array(sigmap, tup)
    Ja = jacobian_ambient(sigmap, curve, pts, denom_eps)
    jets = curve.jets(pts[None], 1)[0]
    cols = []
    for i in range(sigmap.arity):
        fx, fy = jets[i, _FX], jets[i, _FY]
        norm = np.sqrt(abs(fx) ** 2 + abs(fy) ** 2)
        if norm <= 1e-10:
            raise SingularCurvePoint(f"vanishing gradient at tuple point {i}")
        tangent = np.array([-fy, fx]) / norm
        cols.append(Ja[:, 2 * i: 2 * i + 2] @ tangent)
    return np.stack(cols, axis=1)


def measured_dim(sigmap, curve: Curve, tup, rank_tol: float = RANK_TOL) -> int:
    """Rank of the on-curve Jacobian.

    The Jacobian counts as zero when its logarithmic size ||J|| (1 + ||x||) / ||Phi||
    is below ``rank_tol``; this catches constant images (circles) without
    misreading points far from the origin, where both J and Phi are small.
    """
    pts = _tuple_array(get_map(sigmap), tup)
    J = jacobian_on_curve(sigmap, curve, pts)
    value = float(np.linalg.norm(eval_sig(sigmap, curve, pts)))
    if np.linalg.norm(J, 2) * (1.0 + np.abs(pts).max()) <= rank_tol * value:
        return 0
    return numeric_rank(J, rank_tol)


def dim3_rank(curve: Curve, triple, rank_tol: float = RANK_TOL) -> int:
    """Rank of the on-curve Jacobian of (d12, d13, d23) at a triple of curve points."""
    from .curves import in_W

    pts = triple.as_array() if isinstance(triple, PointTuple) else np.asarray(triple, dtype=complex)
    if pts.shape != (3, 2):
        raise DimensionMismatch("dim3_rank needs three points")
    if not in_W(pts):
        raise ValueError("triple is not in W_3")
    jets = curve.jets(pts[None], 1)[0]
    J = np.zeros((3, 3), dtype=complex)
    for r, (j, k) in enumerate(combinations(range(3), 2)):
        diff = pts[j] - pts[k]
        for idx, sign in ((j, 2), (k, -2)):
            fx, fy = jets[idx, _FX], jets[idx, _FY]
            norm = np.sqrt(abs(fx) ** 2 + abs(fy) ** 2)
            if norm <= 1e-10:
                raise SingularCurvePoint("vanishing gradient")
            J[r, idx] += sign * (diff @ np.array([-fy, fx])) / norm
    return numeric_rank(J, rank_tol)


def sig_to_json(sigmap, value) -> dict:
    return {"map": get_map(sigmap).id, "coords": [[complex(z).real, complex(z).imag] for z in value]}
