"""Income-compensation ODE.

Along the price segment ``r(t) = (1 - t) p + t q`` the income needed to keep
the consumer at the utility level of ``f(p, m)`` solves

    c'(t) = f(r(t), c(t)) . (q - p),   c(0) = m.

``c(1)`` is the expenditure at ``q``; with ``q`` the reference price it is
the recovered utility. The integrator is an adaptive Dormand-Prince 5(4)
pair with step rejection, written out here so that income guards and the
"never evaluate f at nonpositive income" rule are enforced stage by stage.
Between accepted steps the path is interpolated by cubic Hermite splines.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .demand import DemandSpec
from .errors import IncompletePath, ValidationError

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

H_INIT = 1e-3
H_MIN = 1e-12
H_MAX = 1.0 / 64  # keeps Hermite dense output well below path tolerance


class Status(str, enum.Enum):
    COMPLETE = "Complete"
    EXIT_LOW_INCOME = "ExitLowIncome"
    EXIT_HIGH_INCOME = "ExitHighIncome"
    STEP_FAILURE = "StepFailure"


@dataclass
class SolverStats:
    steps: int = 0
    rejected: int = 0
    nfev: int = 0
    max_local_error: float = 0.0


@dataclass
class CompensationPath:
    p: np.ndarray
    q: np.ndarray
    m: float
    t_samples: np.ndarray
    c_values: np.ndarray
    dc_values: np.ndarray
    status: Status
    stats: SolverStats = field(default_factory=SolverStats)

    @property
    def complete(self) -> bool:
        return self.status is Status.COMPLETE

    @property
    def terminal(self) -> float | None:
        return float(self.c_values[-1]) if self.complete else None

    def at(self, t) -> np.ndarray:
        """Income at ``t`` by cubic Hermite interpolation of accepted steps."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ts, cs, ds = self.t_samples, self.c_values, self.dc_values
        if np.any(t < ts[0] - 1e-15) or np.any(t > ts[-1] + 1e-15):
            raise ValidationError(f"t outside the integrated interval [{ts[0]}, {ts[-1]}]")
        if ts.size == 1:
            return np.full(t.shape, cs[0])
        i = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 2)
        h = ts[i + 1] - ts[i]
        s = (t - ts[i]) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * cs[i] + h10 * h * ds[i] + h01 * cs[i + 1] + h11 * h * ds[i + 1]

    def prices(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return (1.0 - t)[:, None] * self.p + t[:, None] * self.q

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "c"])
        for t, c in zip(self.t_samples, self.c_values):
            w.writerow([f"{t:.12g}", f"{c:.12g}"])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "p": self.p.tolist(),
            "q": self.q.tolist(),
            "m": self.m,
            "status": self.status.value,
            "terminal": self.terminal,
            "steps": self.stats.steps,
            "rejected": self.stats.rejected,
            "nfev": self.stats.nfev,
            "max_local_error": self.stats.max_local_error,
        }


def _check_inputs(spec: DemandSpec, p, q, m, tol):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != (spec.n,) or q.shape != (spec.n,):
        raise ValidationError(f"price vectors must have {spec.n} entries")
    if np.any(p <= 0) or np.any(q <= 0):
        raise ValidationError("prices must be strictly positive")
    if not m > 0:
        raise ValidationError("income must be strictly positive")
    if not tol > 0:
        raise ValidationError("tol must be positive")
    return p, q, float(m)


def solve_path(spec: DemandSpec, p, q, m: float, tol: float = 1e-9,
               c_floor: float | None = None, c_ceiling: float | None = None,
               h_max: float = H_MAX) -> CompensationPath:
    """Integrate the compensation ODE from ``t=0`` to ``t=1``.

    Local error control uses ``atol = tol * m`` and ``rtol = tol``. The
    path stops early with ``ExitLowIncome``/``ExitHighIncome`` when the income
    leaves ``(c_floor, c_ceiling)`` (defaults ``1e-9 m`` and
    ``1e9 max(m, 1)``) and with ``StepFailure`` when the step underflows.
    """
    p, q, m = _check_inputs(spec, p, q, m, tol)
    floor = 1e-9 * m if c_floor is None else c_floor
    ceiling = 1e9 * max(m, 1.0) if c_ceiling is None else c_ceiling
    dq = q - p
    f = spec._parts[0]
    stats = SolverStats()

    def rhs(t, c):
        stats.nfev += 1
        return float(f(p + t * dq, np.asarray(c)) @ dq)

    atol, rtol = tol * m, tol
    t, c = 0.0, m
    k1 = rhs(t, c)
    ts, cs, ds = [t], [c], [k1]
    h = min(H_INIT, h_max)
    status = Status.COMPLETE
    k = np.empty(7)
    while t < 1.0:
        h = min(h, 1.0 - t)
        if h < H_MIN and 1.0 - t > H_MIN:
            status = Status.STEP_FAILURE
            break
        k[0] = k1
        ok = True
        for s in range(1, 7):
            cs_ = c + h * np.dot(_A[s], k[:s])
            if not cs_ > 0:
                ok = False
                break
            k[s] = rhs(t + _C[s] * h, cs_)
        if not ok:
            stats.rejected += 1
            h *= 0.25
            continue
        c_new = c + h * np.dot(_B5, k)
        err = abs(h * np.dot(_E, k))
        scale = atol + rtol * max(abs(c), abs(c_new))
        ratio = err / scale
        if ratio > 1.0:
            stats.rejected += 1
            h *= max(0.2, 0.9 * ratio ** -0.2)
            continue
        t = 1.0 if 1.0 - (t + h) < 1e-15 else t + h
        c = c_new
        k1 = k[6]  # first-same-as-last
        stats.steps += 1
        stats.max_local_error = max(stats.max_local_error, err)
        ts.append(t)
        cs.append(c)
        ds.append(k1)
        if c <= floor:
            status = Status.EXIT_LOW_INCOME
            break
        if c >= ceiling:
            status = Status.EXIT_HIGH_INCOME
            break
        grow = 5.0 if ratio == 0 else min(5.0, 0.9 * ratio ** -0.2)
        h = min(h * max(grow, 0.2), h_max)
    return CompensationPath(p, q, m, np.array(ts), np.array(cs), np.array(ds), status, stats)


def endpoint(spec: DemandSpec, p, q, m: float, tol: float = 1e-9) -> float:
    """``c(1; p, q, m)``; raises ``IncompletePath`` if the path did not finish."""
    path = solve_path(spec, p, q, m, tol)
    if not path.complete:
        raise IncompletePath(path.status, path)
    return path.terminal


def _complete(path: CompensationPath) -> CompensationPath:
    if not path.complete:
        raise IncompletePath(path.status, path)
    return path


def reverse_check(spec: DemandSpec, p, q, m: float, grid: int | np.ndarray = 101,
                  tol: float = 1e-9) -> float:
    """max_t |c(1-t; p, q, m) - c(t; q, p, c(1; p, q, m))| over a grid."""
    ts = np.linspace(0.0, 1.0, grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    fwd = _complete(solve_path(spec, p, q, m, tol))
    bwd = _complete(solve_path(spec, q, p, fwd.terminal, tol))
    return float(np.max(np.abs(fwd.at(1.0 - ts) - bwd.at(ts))))


def budget_curve(spec: DemandSpec, path: CompensationPath, ts: np.ndarray) -> np.ndarray:
    """d(t) = p . f(r(t), c(t)) along a completed path."""
    x = spec(path.prices(ts), path.at(ts))
    return x @ path.p


def budget_monotonicity_check(spec: DemandSpec, p, q, m: float,
                              grid: int | np.ndarray = 101, tol: float = 1e-9) -> float:
    """Smallest successive difference of d(t) = p . f(r(t), c(t)).

    For a demand function d is nondecreasing, so the result should be
    >= -tolerance."""
    ts = np.linspace(0.0, 1.0, grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    path = _complete(solve_path(spec, p, q, m, tol))
    d = budget_curve(spec, path, ts)
    return float(np.min(np.diff(d)))


def path_csv_and_sidecar(path: CompensationPath) -> tuple[str, str]:
    return path.to_csv(), json.dumps(path.sidecar(), sort_keys=True)
