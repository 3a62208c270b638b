"""Utility and expenditure recovery from a demand function.

For a bundle ``x = f(p, m)`` the recovered utility at reference prices
``pbar`` is the income ``c(1; p, pbar, m)`` that the compensation ODE
arrives at: the money needed at ``pbar`` to be as well off as with ``x``.
Bundles outside the range of ``f`` get utility 0 by convention, flagged
with ``in_range=False``. Boundary bundles get the upper semi-continuous
extension ``v(x) = inf_eps sup{u(y) : y interior, |y - x| < eps}``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .compensation import CompensationPath, endpoint, solve_path
from .demand import DemandSpec, PriceIncome, as_bundle
from .errors import IncompletePath, NoConvergence, NonMonotoneEstimate, ValidationError
from .inverse import invert

PATH_TOL = 1e-9


def _ref_price(pbar, n) -> np.ndarray:
    pbar = np.asarray(pbar, dtype=float)
    if pbar.shape != (n,) or np.any(pbar <= 0):
        raise ValidationError(f"reference price must be a strictly positive {n}-vector")
    return pbar


@dataclass
class RecoveryResult:
    x: np.ndarray
    u_value: float
    in_range: bool
    via: PriceIncome | None = None
    path: CompensationPath | None = None

    def to_json(self) -> dict:
        return {
            "x": self.x.tolist(),
            "u": self.u_value,
            "in_range": self.in_range,
            "via": None if self.via is None else self.via.to_json(),
        }


def supporting_price(spec: DemandSpec, x, inversion: str = "auto") -> PriceIncome | None:
    """A ``(p, m)`` with ``f(p, m) = x``, or None when none is found."""
    x = as_bundle(x, spec.n)
    if inversion == "auto":
        inversion = "analytic" if spec.has_inverse else "numeric"
    if inversion == "analytic":
        p = spec.inverse(x)
    elif inversion == "numeric":
        if not np.any(x > 0):
            return None
        try:
            p = invert(spec, x)[0]
        except NoConvergence:
            return None
    else:
        raise ValidationError(f"unknown inversion {inversion!r}")
    if p is None:
        return None
    return PriceIncome(p, float(p @ x))


def recover_u(spec: DemandSpec, pbar, x, inversion: str = "auto",
              tol: float = PATH_TOL) -> RecoveryResult:
    """Recovered utility of ``x`` measured in income at prices ``pbar``."""
    x = as_bundle(x, spec.n)
    pbar = _ref_price(pbar, spec.n)
    via = supporting_price(spec, x, inversion)
    if via is None:
        return RecoveryResult(x, 0.0, False)
    path = solve_path(spec, via.p, pbar, via.m, tol)
    if not path.complete:
        raise IncompletePath(path.status, path)
    return RecoveryResult(x, path.terminal, True, via, path)


def expenditure(spec: DemandSpec, base: PriceIncome, q, tol: float = PATH_TOL) -> float:
    """E(q): cheapest income at prices ``q`` reaching the level of f(base)."""
    return endpoint(spec, base.p, q, base.m, tol)


def shephard_residual(spec: DemandSpec, base: PriceIncome, q, h: float = 1e-4,
                      tol: float = 1e-12) -> float:
    """max_j |dE/dq_j - f_j(q, E(q))| with central differences of E."""
    q = np.asarray(q, dtype=float)
    if not h > 0 or np.any(q - h <= 0):
        raise ValidationError("step must be positive and keep q - h > 0")
    E = expenditure(spec, base, q, tol)
    grad = np.empty(spec.n)
    for j in range(spec.n):
        e = np.zeros(spec.n)
        e[j] = h
        grad[j] = (expenditure(spec, base, q + e, tol) - expenditure(spec, base, q - e, tol)) / (2 * h)
    return float(np.max(np.abs(grad - spec(q, E))))


def concavity_probe(spec: DemandSpec, base: PriceIncome, q1, q2, samples: int = 20,
                    seed: int = 0, tol: float = PATH_TOL) -> float:
    """Smallest midpoint gap ``E((a+b)/2) - (E(a)+E(b))/2``.

    The pair ``(q1, q2)`` is always tested; ``samples`` more pairs are drawn
    uniformly from the box with corners ``q1`` and ``q2``. A concave E gives
    gaps >= 0.
    """
    q1, q2 = np.asarray(q1, dtype=float), np.asarray(q2, dtype=float)
    if np.any(q1 <= 0) or np.any(q2 <= 0):
        raise ValidationError("prices must be strictly positive")
    lo, hi = np.minimum(q1, q2), np.maximum(q1, q2)
    rng = np.random.default_rng(seed)
    pairs = [(q1, q2)] + [
        tuple(lo + (hi - lo) * rng.random((2, spec.n))) for _ in range(samples)
    ]
    gap = np.inf
    for a, b in pairs:
        mid = expenditure(spec, base, 0.5 * (a + b), tol)
        ends = 0.5 * (expenditure(spec, base, a, tol) + expenditure(spec, base, b, tol))
        gap = min(gap, mid - ends)
    return float(gap)


@dataclass
class BoundaryEstimate:
    x: np.ndarray
    value: float
    eps: np.ndarray
    sups: np.ndarray
    monotone: bool


DEFAULT_EPS = 10.0 ** -np.arange(1, 15)


def boundary_v(spec: DemandSpec, pbar, x, eps_sequence=None, points: int = 16,
               inversion: str = "auto", tol: float = PATH_TOL) -> BoundaryEstimate:
    """Upper semi-continuous extension of recovered utility at ``x``.

    For each radius the sup over the interior of the ball is approximated by
    the diagonal ray point ``x + eps e / (2 sqrt(n))`` (which attains the
    limit for monotone preferences) plus a Halton point set. The estimate is
    the smallest sup over the sequence. Interior ``x`` returns ``recover_u``.
    """
    x = as_bundle(x, spec.n)
    pbar = _ref_price(pbar, spec.n)
    if np.all(x > 0):
        r = recover_u(spec, pbar, x, inversion, tol)
        return BoundaryEstimate(x, r.u_value, np.array([]), np.array([]), True)
    eps = DEFAULT_EPS if eps_sequence is None else np.asarray(eps_sequence, dtype=float)
    if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValidationError("eps_sequence must be positive and strictly decreasing")
    n = spec.n
    cloud = 2.0 * qmc.Halton(d=n, scramble=False).random(points + 1)[1:] - 1.0
    cloud = cloud[np.linalg.norm(cloud, axis=1) < 1.0]
    ray = np.ones(n) / (2.0 * np.sqrt(n))
    sups = []
    for e in eps:
        cands = np.vstack([x + e * ray, x + e * cloud])
        cands = cands[np.all(cands > 0, axis=1)]
        sups.append(max(recover_u(spec, pbar, y, inversion, tol).u_value for y in cands))
    sups = np.array(sups)
    slack = 1e-9 * max(1.0, float(np.max(np.abs(sups))))
    monotone = bool(np.all(np.diff(sups) <= slack))
    if not monotone:
        warnings.warn(f"sup estimates at {x} are not nonincreasing in eps", NonMonotoneEstimate)
    return BoundaryEstimate(x, float(sups.min()), eps, sups, monotone)
