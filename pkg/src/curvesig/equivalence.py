"""Probability-one equality test for signature images and symmetry analysis."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .curves import Curve, PARTIALS, in_W, sample, transform
from .errors import CurveSigError, ElementValidationFailure
from .groups import EuclideanElement, recover_element
from .sigmaps import EUCLID_JOINT, check_domain, dim3_rank, get_map, measured_dim
from .tracking import TrackerSettings, track
from .witness import (
    MEMBERSHIP_TOL,
    PseudoWitnessSet,
    build_equality_homotopy,
    compute_pws,
    min_relative_distance,
    random_slice,
    target_dim,
)

log = logging.getLogger(__name__)

RETRY_BUDGET = 3
ELEMENT_TOL = 1e-7
CLOSURE_TOL = 1e-8


class Verdict(str, Enum):
    EQUIVALENT = "Equivalent"
    NOT_EQUIVALENT = "NotEquivalent"
    INCONCLUSIVE = "Inconclusive"


class Reason(str, Enum):
    DIMENSION_MISMATCH = "DimensionMismatch"
    MEMBERSHIP_HIT = "MembershipHit"
    MEMBERSHIP_MISS = "MembershipMiss"
    TRACK_FAILURE = "TrackFailure"


@dataclass
class EqualityVerdict:
    verdict: Verdict
    reason: Reason
    map_id: str
    d: int | None
    dim_expected: int
    residuals: dict = field(default_factory=dict)
    seed: int | None = None
    heuristic: bool = False

    @property
    def exit_code(self) -> int:
        return {Verdict.EQUIVALENT: 0, Verdict.NOT_EQUIVALENT: 3, Verdict.INCONCLUSIVE: 4}[self.verdict]

    def to_json(self) -> dict:
        out = {
            "verdict": self.verdict.value,
            "reason": self.reason.value,
            "map": self.map_id,
            "d": self.d,
            "dim_expected": self.dim_expected,
            "residuals": self.residuals,
            "seed": self.seed,
        }
        if self.heuristic:
            out["heuristic"] = True
        return out


def _values_at(sigmap, curve: Curve, pts: np.ndarray) -> np.ndarray:
    jets = curve.jets(pts[None], sigmap.jet_order)
    check_domain(sigmap, pts[None], jets)
    full = np.zeros((1, sigmap.arity, len(PARTIALS)), dtype=complex)
    full[..., : jets.shape[-1]] = jets
    return sigmap.values(pts[None], full)[0]


def equality_test(
    curve0: Curve,
    pws1: PseudoWitnessSet,
    settings: TrackerSettings | None = None,
    rng_seed: int = 0,
    retry_budget: int = RETRY_BUDGET,
    membership_tol: float = MEMBERSHIP_TOL,
) -> EqualityVerdict:
    """Decide whether the signature image of ``curve0`` equals the one witnessed by ``pws1``."""
    sigmap = pws1.sigmap
    k = sigmap.arity
    rng = np.random.default_rng(rng_seed)

    def verdict(v, r, d, **res):
        return EqualityVerdict(v, r, sigmap.id, d, sigmap.dim_expected, res, rng_seed, sigmap.heuristic)

    # a miss is only reported after every attempt misses: a single endpoint can land on a badly
    # conditioned fiber point that the witness set lost, while a false hit is not a practical concern
    d = None
    miss = None
    for attempt in range(retry_budget):
        try:
            x0 = np.array([[p.x, p.y] for p in sample(curve0, k, int(rng.integers(2**63)))])
            if k > 1 and not in_W(x0):
                continue
            d = measured_dim(sigmap, curve0, x0)
            phi0 = _values_at(sigmap, curve0, x0)
        except CurveSigError as exc:
            log.info("equality test attempt %d: bad sample (%s)", attempt, exc)
            continue
        if d != pws1.dim:
            return verdict(Verdict.NOT_EQUIVALENT, Reason.DIMENSION_MISMATCH, d, witness_dim=pws1.dim)
        if d == 0:
            # point image: nothing to slice, compare the single value directly
            dist = min_relative_distance(pws1.distinct_images, phi0) if pws1.e_img else float("inf")
            hit = dist <= membership_tol
            return verdict(Verdict.EQUIVALENT if hit else Verdict.NOT_EQUIVALENT,
                           Reason.MEMBERSHIP_HIT if hit else Reason.MEMBERSHIP_MISS, d, membership_distance=dist)
        L0 = random_slice(sigmap.ambient, d, through=phi0, rng=rng)
        L0p = random_slice(2 * k, k - d, through=x0.ravel(), rng=rng)
        H = build_equality_homotopy(curve0, sigmap, L0, L0p, pws1.slice)
        res = track(H, x0.ravel(), settings)
        if not res.success:
            log.info("equality test attempt %d: path %s", attempt, res.status.value)
            continue
        x1 = res.endpoint.reshape(k, 2)
        try:
            phi1 = _values_at(sigmap, curve0, x1)
        except CurveSigError:
            continue
        dist = min_relative_distance(pws1.distinct_images, phi1) if pws1.e_img else float("inf")
        endpoint_res = float(np.linalg.norm(H.residual(res.endpoint, 1.0)))
        diag = dict(endpoint=endpoint_res, max_path=res.max_residual_seen, membership_distance=dist)
        if dist <= membership_tol:
            return verdict(Verdict.EQUIVALENT, Reason.MEMBERSHIP_HIT, d, attempts=attempt + 1, **diag)
        log.info("equality test attempt %d: membership miss (distance %.3g)", attempt, dist)
        if miss is None:
            miss = diag
    if miss is not None:
        return verdict(Verdict.NOT_EQUIVALENT, Reason.MEMBERSHIP_MISS, d, attempts=retry_budget, **miss)
    return verdict(Verdict.INCONCLUSIVE, Reason.TRACK_FAILURE, d, attempts=retry_budget)


# symmetry


@dataclass
class SymmetryReport:
    classification: str  # "Finite" or "Infinite"
    dim_J: int
    n: int | None = None
    elements: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return f"Finite({self.n})" if self.classification == "Finite" else "Infinite"

    def to_json(self, with_elements: bool = True) -> dict:
        out = {"classification": self.label, "dim_J": self.dim_J, "n": self.n, "diagnostics": self.diagnostics}
        if with_elements:
            out["elements"] = [g.to_json() for g in self.elements]
        return out


def _comparable(coeffs: np.ndarray, pivot: int) -> np.ndarray:
    return coeffs / coeffs[pivot]


def fixes_curve(curve: Curve, g, tol: float = ELEMENT_TOL) -> bool:
    """Whether g . C = C, comparing coefficient vectors normalized at the same entry."""
    c0 = curve.normalized_coefficients()
    c1 = transform(curve, g).normalized_coefficients(curve.degree)
    pivot = int(np.argmax(np.abs(c0)))
    if abs(c1[pivot]) == 0:
        return False
    a, b = _comparable(c0, pivot), _comparable(c1, pivot)
    return bool(np.abs(a - b).max() <= tol * np.abs(a).max())


def _closed(elements: list, tol: float = CLOSURE_TOL) -> bool:
    for g in elements:
        for h in elements:
            gh = g.compose(h)
            if min(gh.distance(u) for u in elements) > tol * (1 + max(abs(gh.a), abs(gh.b))):
                return False
    return True


def symmetry_analyze(
    curve: Curve,
    rng_seed: int = 0,
    settings: TrackerSettings | None = None,
    jobs: int = 1,
    recover: bool = True,
) -> SymmetryReport:
    """Classify the Euclidean symmetry group of ``curve`` via the four-point distance map."""
    sigmap = EUCLID_JOINT
    dim_J = target_dim(sigmap, curve, rng_seed)
    if dim_J < sigmap.dim_expected:
        rng = np.random.default_rng((rng_seed, 5))
        ranks = []
        for _ in range(3):
            tri = np.array([[p.x, p.y] for p in sample(curve, 3, int(rng.integers(2**63)))])
            ranks.append(dim3_rank(curve, tri))
        d3 = int(np.median(ranks))
        return SymmetryReport("Infinite", dim_J, None, [], {"dim3_rank": d3, "consistent": d3 < 3})

    pws = compute_pws(sigmap, curve, rng_seed, settings, jobs=jobs)
    diag = {"e": pws.e, "e_img": pws.e_img}
    if pws.e_img == 0:
        raise ElementValidationFailure("empty witness set")
    ratio = pws.e / pws.e_img
    n = int(round(ratio))
    if abs(ratio - n) > 1e-9:
        diag["non_integer_ratio"] = ratio
    elements: list[EuclideanElement] = []
    if recover:
        groups = pws.image_groups()
        base = max(groups, key=len)
        p = pws.points[base[0]]
        failures = 0
        for j in base:
            try:
                g = recover_element(p, pws.points[j])
            except CurveSigError:
                g = None
            if g is None or not fixes_curve(curve, g):
                failures += 1
                continue
            if all(g.distance(u) > CLOSURE_TOL * (1 + abs(g.a) + abs(g.b)) for u in elements):
                elements.append(g)
        diag["validation_failures"] = failures
        diag["closed"] = _closed(elements)
    return SymmetryReport("Finite", dim_J, n, elements, diag)
