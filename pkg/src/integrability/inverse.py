"""Inverse demand: simplex prices supporting a bundle.

``G(x) = {p : sum(p) = 1, f(p, p.x) = x}``. Prices are parametrised by their
first n-1 coordinates (the last is 1 minus their sum) and the residual
``f(p, p.x) - x`` is driven to zero by damped Gauss-Newton with backtracking
that keeps every iterate strictly inside the simplex. Multistart from a
Halton point set probes set-valued ``G``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .demand import DemandSpec, as_bundle
from .errors import EmptyRegion, NoConvergence, ValidationError

MAX_ITER = 200
RESTARTS = 4


def simplex_points(n: int, k: int) -> np.ndarray:
    """``k`` deterministic low-discrepancy points in the open simplex."""
    u = qmc.Halton(d=n, scramble=False)
    u.fast_forward(1)  # the first Halton point is the origin
    pts = -np.log(u.random(k))
    return pts / pts.sum(axis=1, keepdims=True)


def _residual(spec, x, p):
    return spec(p, p @ x) - x


def _jacobian(spec, x, p, h=1e-7):
    """d residual / d z where p = (z, 1 - sum z)."""
    n = p.size
    T = np.vstack([np.eye(n - 1), -np.ones(n - 1)])
    if spec.has_jacobian:
        dp, dm = spec.jacobian(p, p @ x)
        return (dp + np.outer(dm, x)) @ T
    J = np.empty((n, n - 1))
    for j in range(n - 1):
        step = h * max(1.0, p[j])
        step = min(step, 0.5 * p[j], 0.5 * p[-1])
        e = T[:, j] * step
        J[:, j] = (_residual(spec, x, p + e) - _residual(spec, x, p - e)) / (2 * step)
    return J


def _newton(spec, x, p0, threshold):
    p = p0 / p0.sum()
    F = _residual(spec, x, p)
    r = np.linalg.norm(F)
    for _ in range(MAX_ITER):
        if r <= threshold:
            return p, r
        J = _jacobian(spec, x, p)
        dz = np.linalg.lstsq(J, -F, rcond=None)[0]
        dp = np.append(dz, -dz.sum())
        lam = 1.0
        # fraction-to-boundary rule keeps all coordinates positive
        neg = dp < 0
        if np.any(neg):
            lam = min(1.0, 0.9 * np.min(-p[neg] / dp[neg]))
        improved = False
        for _ in range(40):
            cand = p + lam * dp
            F_c = _residual(spec, x, cand)
            r_c = np.linalg.norm(F_c)
            if r_c < r:
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
        p, F, r = cand, F_c, r_c
    return p, r


def invert(spec: DemandSpec, x, start=None, threshold: float | None = None):
    """Find a simplex price ``p`` with ``f(p, p.x) = x``.

    Converged when the residual norm is at most ``1e-9 * |x|``. Tries
    ``start`` (default: barycentre) and then a few Halton restarts.

    Returns ``(price, residual)``; raises ``NoConvergence`` otherwise.
    """
    x = as_bundle(x, spec.n)
    if not np.any(x > 0):
        raise ValidationError("cannot invert the zero bundle")
    thr = 1e-9 * np.linalg.norm(x) if threshold is None else threshold
    n = spec.n
    starts = [np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=float)]
    starts.extend(simplex_points(n, RESTARTS))
    best = np.inf
    for s in starts:
        if np.any(s <= 0):
            raise ValidationError("start must be strictly inside the simplex")
        p, r = _newton(spec, x, s, thr)
        if r <= thr:
            return p, float(r)
        best = min(best, r)
    raise NoConvergence(f"no supporting price for {x} (best residual {best:.3g})")


@dataclass
class InversePriceSet:
    x: np.ndarray
    prices: list
    residuals: list
    multistart_count: int
    failures: int

    def to_json(self) -> dict:
        return {
            "x": self.x.tolist(),
            "prices": [p.tolist() for p in self.prices],
            "residuals": list(self.residuals),
        }


def g_sample(spec: DemandSpec, x, multistarts: int = 16, seed: int | None = None,
             spacing: float = 1e-6) -> InversePriceSet:
    """Run Gauss-Newton from ``multistarts`` simplex points and keep distinct
    converged prices. Their convex hull is an inner approximation of G(x).

    ``seed`` of None uses the deterministic Halton set; an integer draws the
    starts uniformly on the simplex instead.
    """
    x = as_bundle(x, spec.n)
    if seed is None:
        starts = simplex_points(spec.n, multistarts)
    else:
        starts = np.random.default_rng(seed).dirichlet(np.ones(spec.n), multistarts)
    thr = 1e-9 * np.linalg.norm(x)
    prices, residuals, failures = [], [], 0
    for s in starts:
        p, r = _newton(spec, x, s, thr)
        if r > thr:
            failures += 1
            continue
        if any(np.max(np.abs(p - q)) <= spacing for q in prices):
            continue
        prices.append(p)
        residuals.append(float(r))
    return InversePriceSet(x, prices, residuals, multistarts, failures)


def hausdorff(a: list, b: list) -> float:
    if not a or not b:
        return float("inf") if (a or b) else 0.0
    A, B = np.array(a), np.array(b)
    d = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=-1)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def uhc_drift(spec: DemandSpec, x, delta: float = 1e-4, multistarts: int = 16) -> float:
    """Largest Hausdorff distance between sampled G(x) and G(x +/- delta e_i).

    Small drift is consistent with upper hemi-continuity; it does not prove it.
    """
    x = as_bundle(x, spec.n)
    base = g_sample(spec, x, multistarts).prices
    drift = 0.0
    for i in range(spec.n):
        for sgn in (1.0, -1.0):
            y = x.copy()
            y[i] += sgn * delta
            drift = max(drift, hausdorff(base, g_sample(spec, y, multistarts).prices))
    return drift


@dataclass
class PriceFloor:
    nu: int
    floor: float
    argmin_x: np.ndarray
    points: int
    skipped: int


def price_floor_probe(spec: DemandSpec, nu: int, samples: int = 400,
                      margin: float = 1e-9) -> PriceFloor:
    """Estimate M_nu: the smallest price coordinate over G(x), x in ]1/nu, nu[^n.

    Uses a tensor grid of about ``samples`` points inset by ``margin`` from
    the open box's faces; bundles that cannot be inverted are skipped.
    """
    if nu < 1:
        raise ValidationError("nu must be >= 1")
    lo, hi = 1.0 / nu, float(nu)
    if not lo < hi:
        raise EmptyRegion(f"open box ]{lo}, {hi}[ is empty")
    k = max(2, int(round(samples ** (1.0 / spec.n))))
    axis = np.linspace(lo + margin * hi, hi - margin * hi, k)
    mesh = np.meshgrid(*[axis] * spec.n, indexing="ij")
    xs = np.stack([g.ravel() for g in mesh], axis=-1)
    floor, arg, skipped = np.inf, None, 0
    for x in xs:
        try:
            found = g_sample(spec, x, multistarts=1).prices or [invert(spec, x)[0]]
        except NoConvergence:
            skipped += 1
            continue
        for p in found:
            if p.min() < floor:
                floor, arg = float(p.min()), x
    return PriceFloor(nu, floor, arg, len(xs), skipped)
