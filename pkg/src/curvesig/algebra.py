"""Complex polynomial arithmetic and the small dense linear algebra used everywhere else.

Scalars are plain Python ``complex`` (or numpy ``complex128`` inside arrays).
Polynomials are sparse maps from exponent tuples to coefficients.
"""

from __future__ import annotations

import math
import warnings
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NoConvergence, SingularMatrix

PIVOT_EPS = 1e-14
RANK_TOL = 1e-8
ROOT_TOL = 1e-12
ROOT_MAX_ITERS = 200


def _as_complex(value) -> complex:
    z = complex(value)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"non-finite coefficient {value!r}")
    return z


class MultiPoly:
    """Sparse multivariate polynomial with complex coefficients.

    Instances are immutable and kept in canonical form: no duplicate
    exponents and no stored zero coefficients.
    """

    __slots__ = ("nvars", "_terms")

    def __init__(self, nvars: int, terms: Mapping[Sequence[int], complex] | None = None):
        if nvars < 1:
            raise ValueError("nvars must be positive")
        canon: dict[tuple[int, ...], complex] = {}
        for exp, coef in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != nvars or any(e < 0 for e in exp):
                raise DimensionMismatch(f"bad exponent {exp} for {nvars} variables")
            canon[exp] = canon.get(exp, 0j) + _as_complex(coef)
        self.nvars = nvars
        self._terms = {e: c for e, c in sorted(canon.items()) if c != 0}

    # constructors

    @classmethod
    def constant(cls, nvars: int, value: complex) -> "MultiPoly":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "MultiPoly":
        exp = [0] * nvars
        exp[index] = 1
        return cls(nvars, {tuple(exp): 1.0})

    @classmethod
    def from_coefficients(cls, coeffs: Sequence[complex]) -> "MultiPoly":
        """Univariate polynomial from coefficients in increasing degree order."""
        return cls(1, {(k,): c for k, c in enumerate(coeffs)})

    # basic queries

    @property
    def terms(self) -> dict[tuple[int, ...], complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    def coefficient(self, exp: Sequence[int]) -> complex:
        return self._terms.get(tuple(exp), 0j)

    def coefficient_scale(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def normalized(self) -> "MultiPoly":
        """Divide by the coefficient of largest magnitude (first in exponent order on ties)."""
        if not self._terms:
            return self
        lead = max(self._terms.values(), key=abs)
        return self.scale(1.0 / lead)

    # arithmetic

    def _check(self, other: "MultiPoly"):
        if other.nvars != self.nvars:
            raise DimensionMismatch(f"{self.nvars} vs {other.nvars} variables")

    def __add__(self, other):
        if not isinstance(other, MultiPoly):
            other = MultiPoly.constant(self.nvars, other)
        self._check(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, 0j) + c
        return MultiPoly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        if not isinstance(other, MultiPoly):
            other = MultiPoly.constant(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, factor: complex) -> "MultiPoly":
        factor = complex(factor)
        return MultiPoly(self.nvars, {e: c * factor for e, c in self._terms.items()})

    def __mul__(self, other):
        if not isinstance(other, MultiPoly):
            return self.scale(other)
        self._check(other)
        out: dict[tuple[int, ...], complex] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0j) + c1 * c2
        return MultiPoly(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "MultiPoly":
        if n < 0:
            raise ValueError("negative power")
        result = MultiPoly.constant(self.nvars, 1.0)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        return isinstance(other, MultiPoly) and self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        return hash((self.nvars, tuple(self._terms.items())))

    def __repr__(self):
        body = " + ".join(f"({c:.6g})*{list(e)}" for e, c in self._terms.items()) or "0"
        return f"MultiPoly({self.nvars}: {body})"

    def allclose(self, other: "MultiPoly", tol: float = 1e-10) -> bool:
        """Coefficient-wise comparison relative to the larger coefficient scale."""
        self._check(other)
        diff = self - other
        scale = max(self.coefficient_scale(), other.coefficient_scale(), 1e-300)
        return diff.coefficient_scale() <= tol * scale

    # calculus and evaluation

    def __call__(self, point):
        return evaluate(self, point)

    def partial(self, var: int) -> "MultiPoly":
        return partial(self, var)

    def compose(self, subs: Sequence["MultiPoly"]) -> "MultiPoly":
        """Substitute ``subs[i]`` for variable ``i``.

        All substitutes must share one variable count, which becomes the
        variable count of the result.
        """
        if len(subs) != self.nvars:
            raise DimensionMismatch("need one substitute per variable")
        nv = subs[0].nvars
        powers: list[dict[int, MultiPoly]] = [{0: MultiPoly.constant(nv, 1.0)} for _ in subs]

        def power(i: int, k: int) -> MultiPoly:
            cache = powers[i]
            if k not in cache:
                cache[k] = power(i, k - 1) * subs[i]
            return cache[k]

        out = MultiPoly(nv)
        for exp, coef in self._terms.items():
            term = MultiPoly.constant(nv, coef)
            for i, k in enumerate(exp):
                if k:
                    term = term * power(i, k)
            out = out + term
        return out

    def univariate_coefficients(self) -> np.ndarray:
        """Coefficients in increasing degree order; only for one variable."""
        if self.nvars != 1:
            raise DimensionMismatch("not a univariate polynomial")
        coeffs = np.zeros(max(self.degree(), 0) + 1, dtype=complex)
        for (k,), c in self._terms.items():
            coeffs[k] = c
        return coeffs

    # serialization

    def to_json(self) -> dict:
        return {
            "nvars": self.nvars,
            "terms": [{"exp": list(e), "re": c.real, "im": c.imag} for e, c in self._terms.items()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "MultiPoly":
        nvars = int(data["nvars"])
        terms: dict[tuple[int, ...], complex] = {}
        for t in data["terms"]:
            e = tuple(t["exp"])
            terms[e] = terms.get(e, 0j) + complex(float(t.get("re", 0.0)), float(t.get("im", 0.0)))
        return cls(nvars, terms)


def evaluate(p: MultiPoly, point) -> complex:
    """Evaluate ``p`` at ``point``; entries may be scalars or same-shape numpy arrays."""
    if len(point) != p.nvars:
        raise DimensionMismatch(f"point has {len(point)} coordinates, polynomial has {p.nvars} variables")
    total = 0j
    for exp, coef in p.items():
        term = coef
        for x, k in zip(point, exp):
            if k:
                term = term * x**k
        total = total + term
    return total


def partial(p: MultiPoly, var: int) -> MultiPoly:
    if not 0 <= var < p.nvars:
        raise IndexError(f"variable index {var} out of range")
    out = {}
    for exp, coef in p.items():
        k = exp[var]
        if k:
            e = list(exp)
            e[var] = k - 1
            out[tuple(e)] = coef * k
    return MultiPoly(p.nvars, out)


def solve_linear(A, b, pivot_eps: float = PIVOT_EPS) -> np.ndarray:
    """Solve the square system ``A x = b`` by LU with partial pivoting.

    Raises :class:`SingularMatrix` when a pivot is smaller than ``pivot_eps``
    times the largest entry of ``A``.
    """
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"matrix of shape {A.shape} is not square")
    if b.shape[0] != A.shape[0]:
        raise DimensionMismatch("right-hand side length does not match matrix")
    scale = np.max(np.abs(A)) if A.size else 0.0
    if not np.isfinite(scale):
        raise SingularMatrix("non-finite matrix entries")
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < pivot_eps * scale:
        raise SingularMatrix("pivot below threshold")
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def numeric_rank(A, rank_tol: float = RANK_TOL) -> int:
    """Count singular values above ``rank_tol`` times the largest one."""
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    A = np.asarray(A, dtype=complex)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def _horner(coeffs_high: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.full_like(z, coeffs_high[0])
    dp = np.zeros_like(z)
    for c in coeffs_high[1:]:
        dp = dp * z + p
        p = p * z + c
    return p, dp


def univariate_roots(
    p,
    tol_root: float = ROOT_TOL,
    max_iters: int = ROOT_MAX_ITERS,
    drop_eps: float = 1e-14,
    seed: int = 0,
) -> np.ndarray:
    """All roots of a univariate polynomial via Aberth-Ehrlich iteration.

    ``p`` is a one-variable :class:`MultiPoly` or a coefficient sequence in
    increasing degree order. Roots are returned with multiplicity and
    Newton-polished. Each root satisfies ``|p(r)| <= tol_root * sum_k |c_k| |r|^k``
    or has a Newton correction below ``tol_root * (1 + |r|)``.
    """
    coeffs = p.univariate_coefficients() if isinstance(p, MultiPoly) else np.asarray(p, dtype=complex)
    n = len(coeffs) - 1
    if n < 1:
        raise ValueError("degree must be at least 1")
    scale = np.max(np.abs(coeffs))
    if abs(coeffs[-1]) <= drop_eps * scale:
        raise ValueError("leading coefficient too small")
    high = coeffs[::-1] / coeffs[-1]
    if n == 1:
        return np.array([-high[1]])
    abs_high = np.abs(high)

    # initial guesses on a circle sized by the geometric mean of the roots
    radius = abs(high[-1]) ** (1.0 / n) if high[-1] != 0 else 1.0
    radius = max(radius, 1e-3 * (1 + np.max(abs_high[1:])))
    rng = np.random.default_rng(seed)
    offset = rng.uniform(0, 2 * np.pi)
    z = radius * np.exp(1j * (offset + 2 * np.pi * np.arange(n) / n + 0.4 / n))

    def backward_error(z):
        pz, _ = _horner(high, z)
        size, _ = _horner(abs_high.astype(complex), np.abs(z).astype(complex))
        return np.abs(pz) / np.maximum(size.real, 1e-300)

    done = np.zeros(n, dtype=bool)
    for _ in range(max_iters):
        pz, dpz = _horner(high, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = pz / dpz
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            s = inv.sum(axis=1)
            step = w / (1.0 - w * s)
        step = np.where(np.isfinite(step), step, 0.0)
        step[done] = 0.0
        z = z - step
        done |= np.abs(step) <= 1e-15 * (1.0 + np.abs(z))
        if done.all():
            break
    # Newton polish
    for _ in range(3):
        pz, dpz = _horner(high, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = pz / dpz
        z = np.where(np.isfinite(step) & (np.abs(step) < 1e-3 * (1 + np.abs(z))), z - step, z)
    # the backward error degenerates at a root of exactly zero, so a tiny Newton step also counts
    pz, dpz = _horner(high, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        newton = np.abs(pz / dpz)
    if np.any((backward_error(z) > tol_root) & ~(newton <= tol_root * (1.0 + np.abs(z)))):
        raise NoConvergence("Aberth iteration did not reach the root tolerance")
    return z


def poly_from_roots(roots: Iterable[complex]) -> np.ndarray:
    """Monic coefficients (increasing degree order) of prod (z - r)."""
    c = np.array([1.0 + 0j])
    for r in roots:
        c = np.concatenate([[0j], c]) - r * np.concatenate([c, [0j]])
    return c
