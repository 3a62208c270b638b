"""Compact-convergence metric on demand functions and convergence experiments.

    rho(f, g) = sum_nu 2^-nu arctan( sup_{Delta_nu} |f - g| ),
    Delta_nu  = [1/nu, nu]^(n+1).

The sum is truncated at ``nu_max`` (tail at most ``2^-nu_max * pi/2``) and each
sup is approximated by a tensor grid, so the computed value is a lower
estimate of the true metric up to the reported truncation bound.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .compensation import solve_path
from .demand import Box, DemandSpec
from .errors import BoxTooSmall, DimensionMismatch, IncompletePath, ValidationError
from .recovery import recover_u

BUILTIN_LINEAR_IN_INCOME = ("cobb_douglas", "ces", "leontief", "quasilinear_sqrt")


@dataclass(frozen=True)
class BoxGrid:
    nu: int
    points_per_axis: int = 20

    def __post_init__(self):
        if self.nu < 1:
            raise ValidationError("nu must be >= 1")
        if self.points_per_axis < 2:
            raise ValidationError("need at least two grid points per axis")

    def points(self, dim: int) -> np.ndarray:
        return Box.cube(1.0 / self.nu, float(self.nu), dim).grid(self.points_per_axis)


def sup_distance(specA: DemandSpec, specB: DemandSpec, grid: BoxGrid) -> float:
    if specA.n != specB.n:
        raise DimensionMismatch(f"specs have {specA.n} and {specB.n} goods")
    pts = grid.points(specA.n + 1)
    p, m = pts[:, :-1], pts[:, -1]
    return float(np.max(np.linalg.norm(specA(p, m) - specB(p, m), axis=-1)))


@dataclass
class RhoResult:
    rho: float
    truncation_bound: float
    nu_max: int
    sups: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"rho": self.rho, "truncation_bound": self.truncation_bound, "nu_max": self.nu_max}


def rho(specA: DemandSpec, specB: DemandSpec, nu_max: int = 8,
        points_per_axis: int = 20) -> RhoResult:
    if specA.n != specB.n:
        raise DimensionMismatch(f"specs have {specA.n} and {specB.n} goods")
    if nu_max < 1:
        raise ValidationError("nu_max must be >= 1")
    sups = [sup_distance(specA, specB, BoxGrid(nu, points_per_axis)) for nu in range(1, nu_max + 1)]
    total = sum(np.arctan(s) / 2.0**nu for nu, s in enumerate(sups, start=1))
    return RhoResult(float(total), 2.0**-nu_max * np.pi / 2, nu_max, sups)


# ---------------------------------------------------------------- Lipschitz


@dataclass
class LipschitzEstimate:
    nu: int
    L_hat: float
    pairs: int
    certified_bound: float | None = None


def certified_lipschitz(spec: DemandSpec, nu: int) -> float | None:
    """Known Lipschitz constant on Delta_nu, when one is available.

    For two-good CES with sigma < 0 the partial-derivative bounds give
    L_nu = nu^5."""
    if spec.family == "ces" and spec.n == 2 and spec.params["sigma"] < 0:
        return float(nu) ** 5
    return None


def lipschitz_estimate(spec: DemandSpec, nu: int, pairs: int = 2000, seed: int = 0,
                       local_radius: float = 1e-3) -> LipschitzEstimate:
    """Largest difference quotient over seeded random pairs in Delta_nu.

    Pair ``k`` is a global pair when ``k`` is even and a local pair (second
    point within ``local_radius`` of the box width) when odd, so steep local
    slopes are seen too. Every quotient is a valid lower bound on L_nu, and
    a longer run extends a shorter one with the same seed.
    """
    if pairs < 1:
        raise ValidationError("need at least one pair")
    dim = spec.n + 1
    lo, hi = 1.0 / nu, float(nu)
    rng = np.random.default_rng(seed)
    draws = rng.random((pairs, 2, dim))
    a = lo + (hi - lo) * draws[:, 0]
    b = lo + (hi - lo) * draws[:, 1]
    local = np.arange(pairs) % 2 == 1
    b[local] = np.clip(a[local] + local_radius * (hi - lo) * (2 * draws[local, 1] - 1), lo, hi)
    fa = spec(a[:, :-1], a[:, -1])
    fb = spec(b[:, :-1], b[:, -1])
    dist = np.linalg.norm(a - b, axis=-1)
    ok = dist > 0
    q = np.linalg.norm(fa - fb, axis=-1)[ok] / dist[ok]
    L = float(q.max()) if q.size else 0.0
    return LipschitzEstimate(nu, L, pairs, certified_lipschitz(spec, nu))


def income_lipschitz_bound(spec: DemandSpec, K: float) -> float | None:
    """Certified bound on |f(r, c) - f(r, c')| / |c - c'| for r in [1/K, K]^n.

    For the built-in families ``D_m f`` equals ``f(r, 1)`` (or is piecewise
    constant with entries ``1/r_i``), and Walras' law with ``r_i >= 1/K``
    gives ``|f(r, 1)|_2 <= |f(r, 1)|_1 <= K``.
    """
    if spec.family in BUILTIN_LINEAR_IN_INCOME:
        return float(K)
    return None


# ---------------------------------------------------------------- Gronwall


@dataclass
class GronwallResult:
    lhs: float
    rhs: float
    K: float
    H_K: float
    L: float
    certified: bool

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def _smallest_box(points: np.ndarray) -> float:
    """Smallest integer K with every coordinate strictly inside ]1/K, K[."""
    K = 1
    while not (np.all(points > 1.0 / K) and np.all(points < K)):
        K += 1
    return float(K)


def gronwall_check(specA: DemandSpec, specB: DemandSpec, p, q, m: float,
                   nu_for_K: float | None = None, points_per_axis: int = 20,
                   tol: float = 1e-10, grid: int = 401) -> GronwallResult:
    """Compare two compensation paths against the Gronwall perturbation bound

        max_t |c_A(t) - c_B(t)| <= H_K(f_A - f_B) / L * (exp(L |q - p|) - 1)

    where H_K is the sup of |f_A - f_B| on [1/K, K]^(n+1) and L bounds the
    income-Lipschitz constant of f_A there. ``K`` defaults to the smallest
    integer box holding both price endpoints and both income trajectories.
    """
    if specA.n != specB.n:
        raise DimensionMismatch(f"specs have {specA.n} and {specB.n} goods")
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    paths = [solve_path(s, p, q, m, tol) for s in (specA, specB)]
    for path in paths:
        if not path.complete:
            raise IncompletePath(path.status, path)
    ts = np.union1d(np.linspace(0.0, 1.0, grid), np.union1d(paths[0].t_samples, paths[1].t_samples))
    cA, cB = paths[0].at(ts), paths[1].at(ts)
    lhs = float(np.max(np.abs(cA - cB)))
    occupied = np.concatenate([p, q, cA, cB])
    if nu_for_K is None:
        K = _smallest_box(occupied)
    else:
        K = float(nu_for_K)
        if not (np.all(occupied > 1.0 / K) and np.all(occupied < K)):
            raise BoxTooSmall(f"trajectories leave ]1/{K}, {K}[")
    box = Box.cube(1.0 / K, K, specA.n + 1).grid(points_per_axis)
    H = float(np.max(np.linalg.norm(specA(box[:, :-1], box[:, -1]) - specB(box[:, :-1], box[:, -1]), axis=-1)))
    L = income_lipschitz_bound(specA, K)
    certified = L is not None
    if L is None:
        L = lipschitz_estimate(specA, int(np.ceil(K))).L_hat
    dist = float(np.linalg.norm(q - p))
    if H == 0.0:
        rhs = 0.0
    elif L == 0.0:
        rhs = H * dist
    else:
        rhs = H / L * np.expm1(L * dist)
    return GronwallResult(lhs, float(rhs), K, H, float(L), certified)


# ---------------------------------------------------------------- experiments


@dataclass
class ConvergenceRow:
    k: int
    label: str
    sup_error: float
    not_in_range_count: int


def _recover_grid(spec, pbar, xs):
    out = []
    for x in xs:
        try:
            r = recover_u(spec, pbar, x)
            out.append(r.u_value if r.in_range else None)
        except IncompletePath:
            out.append(None)
    return out


def bundle_grid(D: Box, points_per_axis: int) -> np.ndarray:
    return D.grid(points_per_axis)


def utility_convergence_experiment(sequence: list, limit: DemandSpec, pbar,
                                   D: Box | None = None, points_per_axis: int = 5,
                                   ks: list | None = None, map_fn=map) -> list:
    """Sup over a bundle grid of |u_k - u_limit| for each spec in ``sequence``.

    Bundles the limit cannot invert (or the k-th spec cannot) are counted in
    ``not_in_range_count`` and left out of the sup. ``map_fn`` lets callers
    evaluate grid points in parallel; results keep grid order.
    """
    n = limit.n
    D = Box.cube(0.5, 2.0, n) if D is None else D
    xs = bundle_grid(D, points_per_axis)
    ks = list(range(1, len(sequence) + 1)) if ks is None else list(ks)
    base = list(map_fn(lambda x: _recover_grid(limit, pbar, [x])[0], xs))
    rows = []
    for k, spec in zip(ks, sequence):
        uk = list(map_fn(lambda x, s=spec: _recover_grid(s, pbar, [x])[0], xs))
        errs = [abs(a - b) for a, b in zip(uk, base) if a is not None and b is not None]
        missing = sum(1 for a, b in zip(uk, base) if a is None or b is None)
        rows.append(ConvergenceRow(k, spec.label(), max(errs) if errs else float("nan"), missing))
    return rows


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "sup_error", "not_in_range_count"])
    for r in rows:
        w.writerow([r.k, f"{r.sup_error:.12g}", r.not_in_range_count])
    return buf.getvalue()


def smoothed_decreasing(values, window: int = 3) -> bool:
    """Moving-average trend test: the 3-point smoothed sequence never rises."""
    v = np.asarray(values, dtype=float)
    if v.size < window:
        return bool(np.all(np.diff(v) <= 0))
    sm = np.convolve(v, np.ones(window) / window, mode="valid")
    return bool(np.all(np.diff(sm) <= 0))
