"""Path tracking for square homotopies H(x, t) = 0 from t = 0 to t = 1.

Paths follow the Davidenko ODE x'(t) = -H_x^{-1} H_t with an RK4 predictor
and a Newton corrector. ``track_many`` advances a whole batch of paths at
once, each with its own time and step size; the arithmetic done for one path
does not depend on which other paths share the batch, so results are
independent of batching and of ``jobs``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Callable, Mapping

import numpy as np

log = logging.getLogger(__name__)

CHUNK_SIZE = 512


@dataclass(frozen=True)
class TrackerSettings:
    dt_init: float = 0.02
    dt_min: float = 1e-9
    dt_max: float = 0.1
    newton_tol: float = 1e-10
    endpoint_tol: float = 1e-8
    max_newton_iters: int = 3
    max_steps: int = 10_000
    step_grow: float = 2.0
    step_shrink: float = 0.5
    divergence_bound: float = 1e8

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max <= 0.5):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max <= 0.5")
        if self.newton_tol <= 0 or self.endpoint_tol <= 0:
            raise ValueError("tolerances must be positive")

    @classmethod
    def from_mapping(cls, data: Mapping | None) -> "TrackerSettings":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown tracker settings: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


class PathStatus(str, Enum):
    SUCCESS = "Success"
    DIVERGED = "Diverged"
    STEP_FAILURE = "StepFailure"
    SINGULAR = "SingularJacobian"


@dataclass
class PathResult:
    status: PathStatus
    endpoint: np.ndarray | None
    steps_taken: int
    max_residual_seen: float

    @property
    def success(self) -> bool:
        return self.status is PathStatus.SUCCESS


class SquareSystem:
    """A homotopy H(x, t) with n equations in n unknowns.

    Subclasses implement :meth:`evaluate` on batches: ``x`` of shape (B, n)
    and ``t`` of shape (B,), returning ``(H, H_x, H_t)`` of shapes (B, n),
    (B, n, n), (B, n).
    """

    n: int

    def evaluate(self, x: np.ndarray, t: np.ndarray):
        raise NotImplementedError

    def corrector_terms(self, x: np.ndarray, t: np.ndarray):
        """``(H, H_x)`` only; subclasses may skip computing H_t here."""
        H, Hx, _ = self.evaluate(x, t)
        return H, Hx

    def residual_scale(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Per-equation magnitude the endpoint residual is measured against, shape (B, n).

        The default of ones makes the endpoint test absolute. Polynomial systems
        may return the size of the terms of each equation, which turns the test
        into a backward-error test that stays meaningful at large ``x``.
        """
        return np.ones((len(x), self.n))

    def _one(self, x, t):
        x = np.asarray(x, dtype=complex)[None]
        return self.evaluate(x, np.array([float(t)]))

    def residual(self, x, t) -> np.ndarray:
        return self._one(x, t)[0][0]

    def jac_x(self, x, t) -> np.ndarray:
        return self._one(x, t)[1][0]

    def jac_t(self, x, t) -> np.ndarray:
        return self._one(x, t)[2][0]


class FunctionSystem(SquareSystem):
    """Square system from three single-point callables (x, t) -> array."""

    def __init__(self, n: int, residual: Callable, jac_x: Callable, jac_t: Callable):
        self.n = n
        self._f, self._fx, self._ft = residual, jac_x, jac_t

    def evaluate(self, x, t):
        H = np.array([self._f(xi, ti) for xi, ti in zip(x, t)], dtype=complex).reshape(len(x), self.n)
        Hx = np.array([self._fx(xi, ti) for xi, ti in zip(x, t)], dtype=complex).reshape(len(x), self.n, self.n)
        Ht = np.array([self._ft(xi, ti) for xi, ti in zip(x, t)], dtype=complex).reshape(len(x), self.n)
        return H, Hx, Ht


def batched_solve(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve a stack of square systems; returns (solutions, ok mask)."""
    try:
        with np.errstate(all="ignore"):
            x = np.linalg.solve(A, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        x = np.full(b.shape, np.nan, dtype=complex)
        for i in range(len(A)):
            try:
                x[i] = np.linalg.solve(A[i], b[i])
            except np.linalg.LinAlgError:
                pass
    ok = np.all(np.isfinite(x), axis=-1)
    return x, ok


def _norm(v: np.ndarray) -> np.ndarray:
    # fixed summation order, see curves.rowdot
    sq = np.abs(v) ** 2
    acc = sq[..., 0].copy()
    for i in range(1, sq.shape[-1]):
        acc += sq[..., i]
    return np.sqrt(acc)


def _velocity(system: SquareSystem, x, t):
    _, Hx, Ht = system.evaluate(x, t)
    v, ok = batched_solve(Hx, -Ht)
    return v, ok


def _track_chunk(system: SquareSystem, X0: np.ndarray, s: TrackerSettings) -> list[PathResult]:
    # diverging paths overflow on purpose; they are caught by the divergence check
    with np.errstate(all="ignore"):
        return _track_chunk_inner(system, X0, s)


def _track_chunk_inner(system: SquareSystem, X0: np.ndarray, s: TrackerSettings) -> list[PathResult]:
    B, n = X0.shape
    x = X0.astype(complex).copy()
    t = np.zeros(B)
    dt = np.full(B, s.dt_init)
    easy = np.zeros(B, dtype=int)
    steps = np.zeros(B, dtype=int)
    maxres = np.zeros(B)
    singular_fail = np.zeros(B, dtype=bool)
    status: list[PathStatus | None] = [None] * B
    active = np.ones(B, dtype=bool)

    H0, _ = system.corrector_terms(x, t)
    maxres[:] = _norm(H0)

    while active.any():
        idx = np.flatnonzero(active)
        xa, ta = x[idx], t[idx]
        h = np.minimum(dt[idx], 1.0 - ta)

        # RK4 predictor on the Davidenko ODE
        k1, ok = _velocity(system, xa, ta)
        k2, ok2 = _velocity(system, xa + 0.5 * h[:, None] * k1, ta + 0.5 * h)
        k3, ok3 = _velocity(system, xa + 0.5 * h[:, None] * k2, ta + 0.5 * h)
        k4, ok4 = _velocity(system, xa + h[:, None] * k3, ta + h)
        solved = ok & ok2 & ok3 & ok4
        t1 = np.where(h >= 1.0 - ta, 1.0, ta + h)
        xp = xa + (h / 6.0)[:, None] * (k1 + 2 * k2 + 2 * k3 + k4)
        xp = np.where(solved[:, None], xp, xa)

        # Newton corrector at t1
        converged = np.zeros(len(idx), dtype=bool)
        for _ in range(s.max_newton_iters):
            # only unfinished paths iterate, so each path's arithmetic is batch independent
            pend = np.flatnonzero(~converged & solved)
            if len(pend) == 0:
                break
            H, Hx = system.corrector_terms(xp[pend], t1[pend])
            delta, ok = batched_solve(Hx, H)
            solved[pend] &= ok
            delta = np.where(ok[:, None], delta, 0.0)
            xp[pend] = xp[pend] - delta
            converged[pend] |= ok & (_norm(delta) <= s.newton_tol * (1.0 + _norm(xp[pend])))
        accept = converged & solved & np.all(np.isfinite(xp), axis=1)

        steps[idx] += 1
        acc = idx[accept]
        x[acc] = xp[accept]
        t[acc] = t1[accept]
        easy[acc] += 1
        grow = acc[easy[acc] >= 3]
        dt[grow] = np.minimum(dt[grow] * s.step_grow, s.dt_max)
        easy[grow] = 0

        rej = idx[~accept]
        dt[rej] *= s.step_shrink
        easy[rej] = 0
        singular_fail[idx] = ~solved

        # bookkeeping of finished paths
        xnorm = _norm(x[idx])
        diverged = ~(xnorm <= s.divergence_bound)
        reached = ~diverged & (t[idx] >= 1.0)
        stuck = ~diverged & ~reached & (dt[idx] < s.dt_min)
        exhausted = ~diverged & ~reached & ~stuck & (steps[idx] >= s.max_steps)
        for i in idx[diverged]:
            status[i] = PathStatus.DIVERGED
        for i in idx[reached]:
            status[i] = PathStatus.SUCCESS  # provisional, polished below
        for i in idx[stuck]:
            status[i] = PathStatus.SINGULAR if singular_fail[i] else PathStatus.STEP_FAILURE
        for i in idx[exhausted]:
            status[i] = PathStatus.STEP_FAILURE
        active[idx[diverged | reached | stuck | exhausted]] = False

    results: list[PathResult] = []
    done = np.array([st is PathStatus.SUCCESS for st in status])
    if done.any():
        di = np.flatnonzero(done)
        xe = x[di]
        te = np.ones(len(di))
        for _ in range(4):
            H, Hx = system.corrector_terms(xe, te)
            delta, ok = batched_solve(Hx, H)
            xe = xe - np.where(ok[:, None], delta, 0.0)
        H, _ = system.corrector_terms(xe, te)
        res = _norm(H / system.residual_scale(xe, te))
        x[di] = xe
        maxres[di] = np.maximum(maxres[di], _norm(H))
        for j, i in enumerate(di):
            if not (res[j] <= s.endpoint_tol and np.all(np.isfinite(xe[j]))):
                status[i] = PathStatus.STEP_FAILURE
    for i in range(B):
        ok = status[i] is PathStatus.SUCCESS
        results.append(PathResult(status[i], x[i].copy() if ok else None, int(steps[i]), float(maxres[i])))
    return results


def track_many(
    system: SquareSystem,
    starts,
    settings: TrackerSettings | None = None,
    jobs: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> list[PathResult]:
    """Track every start point; chunking is fixed so output is independent of ``jobs``."""
    settings = settings or TrackerSettings()
    X0 = np.asarray(starts, dtype=complex)
    if X0.ndim == 1:
        X0 = X0[None]
    if len(X0) == 0:
        return []
    chunks = [X0[i: i + chunk_size] for i in range(0, len(X0), chunk_size)]
    if jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda c: _track_chunk(system, c, settings), chunks))
    else:
        parts = [_track_chunk(system, c, settings) for c in chunks]
    out = [r for part in parts for r in part]
    nfail = sum(not r.success for r in out)
    if nfail:
        log.debug("%d of %d paths failed", nfail, len(out))
    return out


def track(system: SquareSystem, x0, settings: TrackerSettings | None = None) -> PathResult:
    """Track a single path from x0 at t = 0 to t = 1."""
    return track_many(system, np.asarray(x0, dtype=complex)[None], settings)[0]
