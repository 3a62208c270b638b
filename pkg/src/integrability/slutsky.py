"""Finite-difference Jacobians, Slutsky matrices, and (S)/(NSD) sweeps.

The Slutsky matrix is ``S = D_p f + D_m f f^T``. Symmetry and negative
semi-definiteness are only required almost everywhere, so a sweep samples
the region uniformly, skips points flagged by a user-supplied kink predicate,
and reports the fraction of remaining points that fail each test. A clean
report is evidence, not a certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np

from .demand import Box, DemandSpec, PriceIncome, _default_region
from .errors import EmptyRegion, StepTooLarge, ValidationError

SQRT_EPS = float(np.sqrt(np.finfo(float).eps))


def jacobian_fd(spec: DemandSpec, pi: PriceIncome, h: float | None = None):
    """Central differences of ``f`` in each price and in income.

    ``h`` is a relative step: axis ``j`` moves by ``h * max(1, |z_j|)``.
    Defaults to sqrt(machine epsilon).

    Returns ``(D_p f, D_m f)`` with shapes ``(n, n)`` and ``(n,)``.
    """
    h = SQRT_EPS if h is None else h
    if h <= 0:
        raise ValidationError("finite-difference step must be positive")
    z = np.append(pi.p, pi.m)
    steps = h * np.maximum(1.0, np.abs(z))
    if np.any(z - steps <= 0):
        raise StepTooLarge(f"step {h} leaves the positive orthant at {z}")
    n = spec.n
    # all 2(n+1) perturbed points in one batched call
    plus = z + np.diag(steps)
    minus = z - np.diag(steps)
    pts = np.concatenate([plus, minus])
    vals = spec(pts[:, :n], pts[:, n])
    d = (vals[: n + 1] - vals[n + 1:]) / (2.0 * steps[:, None])
    return d[:n].T.copy(), d[n].copy()


@dataclass
class SlutskyMatrix:
    entries: np.ndarray
    at: PriceIncome
    fd_step: float | None  # None when the analytic Jacobian was used

    @property
    def symmetry_residual(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.T)))

    @property
    def max_eigenvalue(self) -> float:
        sym = 0.5 * (self.entries + self.entries.T)
        return float(np.linalg.eigvalsh(sym)[-1])


def slutsky_matrix(spec: DemandSpec, pi: PriceIncome, h: float | None = None,
                   analytic: bool | None = None) -> SlutskyMatrix:
    """``S = D_p f + D_m f f^T`` at ``pi``.

    By default uses the demand's analytic Jacobian when it has one and no
    explicit step was requested; ``analytic=False`` forces differences.
    """
    if analytic is None:
        analytic = h is None and spec.has_jacobian
    if analytic:
        dp, dm = spec.jacobian(pi.p, pi.m)
        step = None
    else:
        dp, dm = jacobian_fd(spec, pi, h)
        step = SQRT_EPS if h is None else h
    x = spec(pi.p, pi.m)
    return SlutskyMatrix(dp + np.outer(dm, x), pi, step)


@dataclass
class SlutskyReport:
    samples: int
    max_symmetry_residual: float
    min_eigenvalue: float
    max_eigenvalue: float
    fail_fraction_S: float
    fail_fraction_NSD: float
    excluded_near_kink: int
    seed: int
    tol: float
    h: float | None

    @property
    def passed(self) -> bool:
        return self.fail_fraction_S == 0 and self.fail_fraction_NSD == 0

    def to_json(self) -> dict:
        return asdict(self)


def quasilinear_kink(width: float = 0.05) -> Callable[[np.ndarray, float], bool]:
    """Excludes points with |p2^2 - 4 p1 m| < width (quasilinear corner kink)."""
    def near(p, m):
        return abs(p[1] ** 2 - 4.0 * p[0] * m) < width
    return near


def check_S_NSD(spec: DemandSpec, region: Box | None = None, samples: int = 500,
                tol: float = 1e-5, kink_exclusion: Callable | None = None,
                seed: int = 0, h: float | None = None,
                analytic: bool = False) -> SlutskyReport:
    """Sample the region and test symmetry and NSD of the Slutsky matrix.

    A point fails (S) when ``max|S - S^T| > tol`` and fails (NSD) when the
    largest eigenvalue of ``(S + S^T)/2`` exceeds ``tol``. Fractions are over
    the non-excluded points.
    """
    if samples < 1:
        raise EmptyRegion("need at least one sample")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    region = _default_region(spec, region)
    pts = region.sample(np.random.default_rng(seed), samples)
    sym_res, eig_max, eig_min = [], [], []
    excluded = 0
    for z in pts:
        p, m = z[:-1], float(z[-1])
        if kink_exclusion is not None and kink_exclusion(p, m):
            excluded += 1
            continue
        S = slutsky_matrix(spec, PriceIncome(p, m), h, analytic=analytic)
        eig = np.linalg.eigvalsh(0.5 * (S.entries + S.entries.T))
        sym_res.append(S.symmetry_residual)
        eig_max.append(eig[-1])
        eig_min.append(eig[0])
    used = len(sym_res)
    if used == 0:
        raise EmptyRegion("every sample was excluded by the kink predicate")
    sym_res, eig_max = np.array(sym_res), np.array(eig_max)
    return SlutskyReport(
        samples=samples,
        max_symmetry_residual=float(sym_res.max()),
        min_eigenvalue=float(min(eig_min)),
        max_eigenvalue=float(eig_max.max()),
        fail_fraction_S=float(np.mean(sym_res > tol)),
        fail_fraction_NSD=float(np.mean(eig_max > tol)),
        excluded_near_kink=excluded,
        seed=seed,
        tol=tol,
        h=None if analytic else (SQRT_EPS if h is None else h),
    )
