"""Demand functions: families, evaluation, and budget diagnostics.

A demand spec is a small declarative value (family name, dimension,
parameters) that evaluates to a vectorised function ``f(p, m)`` mapping
strictly positive prices and income to a bundle. Every built-in family
satisfies Walras' law ``p . f(p, m) == m`` up to roundoff.

Evaluation broadcasts over leading axes: ``p`` has shape ``(..., n)`` and
``m`` shape ``(...)``; the result has shape ``(..., n)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable

import numpy as np

from .errors import DimensionMismatch, EmptyRegion, UnknownFamily, ValidationError

FAMILIES = ("cobb_douglas", "ces", "quasilinear_sqrt", "leontief", "external")


@dataclass(frozen=True)
class PriceIncome:
    p: np.ndarray
    m: float

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValidationError("price vector must be 1-d with n >= 2")
        if not np.all(p > 0) or not np.all(np.isfinite(p)):
            raise ValidationError(f"prices must be strictly positive, got {p}")
        if not (self.m > 0 and np.isfinite(self.m)):
            raise ValidationError(f"income must be strictly positive, got {self.m}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "m", float(self.m))

    def to_json(self) -> dict:
        return {"p": self.p.tolist(), "m": self.m}


def as_bundle(x, n: int | None = None) -> np.ndarray:
    """Validate a consumption bundle (nonnegative, n >= 2)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError("bundle must be 1-d with n >= 2")
    if n is not None and x.size != n:
        raise DimensionMismatch(f"bundle has {x.size} goods, expected {n}")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValidationError(f"bundle coordinates must be nonnegative, got {x}")
    return x


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in (p, m)-space, dimension n + 1 (income last)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValidationError("box bounds must be 1-d of equal length")
        if np.any(lo <= 0):
            raise EmptyRegion("box must lie strictly inside the positive orthant")
        if np.any(lo > hi):
            raise EmptyRegion(f"empty box: lower {lo} exceeds upper {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int) -> "Box":
        return cls(np.full(dim, lo), np.full(dim, hi))

    @property
    def dim(self) -> int:
        return self.lower.size

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return self.lower + (self.upper - self.lower) * rng.random((k, self.dim))

    def grid(self, points_per_axis: int) -> np.ndarray:
        axes = [np.linspace(a, b, points_per_axis) for a, b in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)

    def to_json(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Box":
        return cls(obj["lower"], obj["upper"])


# ---------------------------------------------------------------- families


def _cobb_douglas(a):
    def f(p, m):
        return a * m[..., None] / p
    return f


def _cobb_douglas_jac(a):
    def jac(p, m):
        dp = np.diag(-a * m / p**2)
        return dp, a / p
    return jac


def _cobb_douglas_inv(a):
    def inv(x):
        if np.any(x <= 0):
            return None
        p = a / x
        return p / p.sum()
    return inv


def _ces(sigma):
    r = 1.0 / (1.0 - sigma)

    def f(p, m):
        num = p ** (-r)
        den = np.sum(p ** (1.0 - r), axis=-1)
        return num * (m / den)[..., None]
    return f


def _ces_jac(sigma):
    r = 1.0 / (1.0 - sigma)

    def jac(p, m):
        num = p ** (-r)
        den = np.sum(p ** (1.0 - r))
        dp = -m * (1.0 - r) * np.outer(num, p ** (-r)) / den**2
        dp += np.diag(-r * m * p ** (-r - 1.0) / den)
        return dp, num / den
    return jac


def _ces_inv(sigma):
    def inv(x):
        if np.any(x <= 0):
            return None
        p = x ** (sigma - 1.0)
        return p / p.sum()
    return inv


def _quasilinear(p, m):
    # Utility sqrt(x1) + x2; the kink p2^2 == 4 p1 m belongs to the
    # corner branch, where both formulas agree.
    p1, p2 = p[..., 0], p[..., 1]
    corner = p2**2 >= 4.0 * p1 * m
    x1 = np.where(corner, m / p1, p2**2 / (4.0 * p1**2))
    x2 = np.where(corner, 0.0, (4.0 * p1 * m - p2**2) / (4.0 * p1 * p2))
    return np.stack([x1, x2], axis=-1)


def _quasilinear_jac(p, m):
    p1, p2 = p
    if p2**2 >= 4.0 * p1 * m:
        return np.array([[-m / p1**2, 0.0], [0.0, 0.0]]), np.array([1.0 / p1, 0.0])
    dp = np.array(
        [
            [-(p2**2) / (2.0 * p1**3), p2 / (2.0 * p1**2)],
            [p2 / (4.0 * p1**2), -m / p2**2 - 1.0 / (4.0 * p1)],
        ]
    )
    return dp, np.array([0.0, 1.0 / p2])


def _quasilinear_inv(x):
    # With p2 = 1 the interior branch needs p1 = 1 / (2 sqrt(x1)); the same
    # price also supports bundles with x2 == 0 (on the kink).
    if x[0] <= 0:
        return None
    p = np.array([1.0 / (2.0 * np.sqrt(x[0])), 1.0])
    return p / p.sum()


def _leontief(p, m):
    s = np.sum(p, axis=-1)
    return np.repeat((m / s)[..., None], p.shape[-1], axis=-1)


def _leontief_jac(p, m):
    n = p.size
    s = p.sum()
    return np.full((n, n), -m / s**2), np.full(n, 1.0 / s)


def _leontief_inv(x):
    # Range is the diagonal; every simplex price supports a diagonal bundle.
    if x[0] <= 0 or np.max(np.abs(x - x[0])) > 1e-12 * x[0]:
        return None
    return np.full(x.size, 1.0 / x.size)


# ---------------------------------------------------------------- plugins


@dataclass(frozen=True)
class Plugin:
    func: Callable
    n: int | None = None
    jacobian: Callable | None = None
    inverse: Callable | None = None
    vectorized: bool = True


_REGISTRY: dict[str, Plugin] = {}


def register_demand(name: str, func: Callable, *, n: int | None = None,
                    jacobian: Callable | None = None, inverse: Callable | None = None,
                    vectorized: bool = True) -> None:
    """Register a named external demand evaluator ``func(p, m) -> x``."""
    _REGISTRY[name] = Plugin(func, n, jacobian, inverse, vectorized)


def registered_plugins() -> list[str]:
    return sorted(_REGISTRY)


# ---------------------------------------------------------------- spec


@dataclass(frozen=True)
class DemandSpec:
    """Declarative candidate demand function.

    ``params`` per family: ``cobb_douglas`` {"a": [...]}, ``ces``
    {"sigma": s} with s < 1 and s != 0, ``quasilinear_sqrt`` and
    ``leontief`` {}, ``external`` {"name": registered plugin}.
    """

    family: str
    n: int = 2
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnknownFamily(f"unknown demand family {self.family!r}")
        if self.n < 2:
            raise ValidationError("need at least two goods")
        fam, prm = self.family, self.params
        if fam == "cobb_douglas":
            a = np.asarray(prm.get("a", np.full(self.n, 1.0 / self.n)), dtype=float)
            if a.size != self.n:
                raise DimensionMismatch(f"{a.size} weights for {self.n} goods")
            if np.any(a <= 0) or abs(a.sum() - 1.0) > 1e-12:
                raise ValidationError("Cobb-Douglas weights must be positive and sum to 1")
            object.__setattr__(self, "params", {"a": a.tolist()})
        elif fam == "ces":
            sigma = float(prm["sigma"])
            if not sigma < 1 or sigma == 0:
                raise ValidationError(f"CES needs sigma < 1, sigma != 0; got {sigma}")
            object.__setattr__(self, "params", {"sigma": sigma})
        elif fam == "quasilinear_sqrt":
            if self.n != 2:
                raise DimensionMismatch("quasilinear_sqrt is defined for two goods")
        elif fam == "external":
            name = prm.get("name")
            if name not in _REGISTRY:
                raise UnknownFamily(f"no external demand registered as {name!r}")
            plugin_n = _REGISTRY[name].n
            if plugin_n is not None and plugin_n != self.n:
                raise DimensionMismatch(f"plugin {name!r} has n={plugin_n}")

    # constructors ----------------------------------------------------------
    @classmethod
    def cobb_douglas(cls, a) -> "DemandSpec":
        return cls("cobb_douglas", len(a), {"a": list(a)})

    @classmethod
    def ces(cls, sigma: float, n: int = 2) -> "DemandSpec":
        return cls("ces", n, {"sigma": sigma})

    @classmethod
    def quasilinear_sqrt(cls) -> "DemandSpec":
        return cls("quasilinear_sqrt", 2)

    @classmethod
    def leontief(cls, n: int = 2) -> "DemandSpec":
        return cls("leontief", n)

    @classmethod
    def external(cls, name: str, n: int = 2) -> "DemandSpec":
        return cls("external", n, {"name": name})

    # serialization ---------------------------------------------------------
    def to_json(self) -> dict:
        return {"family": self.family, "n": self.n, "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj: dict | str) -> "DemandSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if not isinstance(obj, dict) or "family" not in obj:
            raise ValidationError("demand spec must be an object with a 'family' key")
        return cls(obj["family"], int(obj.get("n", 2)), dict(obj.get("params", {})))

    def label(self) -> str:
        if self.family == "ces":
            return f"ces(sigma={self.params['sigma']:g})"
        if self.family == "external":
            return f"external({self.params['name']})"
        if self.family == "cobb_douglas":
            return "cobb_douglas(a=" + ",".join(f"{a:g}" for a in self.params["a"]) + ")"
        return self.family

    # evaluation ------------------------------------------------------------
    @cached_property
    def _parts(self):
        fam = self.family
        if fam == "cobb_douglas":
            a = np.asarray(self.params["a"])
            return _cobb_douglas(a), _cobb_douglas_jac(a), _cobb_douglas_inv(a)
        if fam == "ces":
            s = self.params["sigma"]
            return _ces(s), _ces_jac(s), _ces_inv(s)
        if fam == "quasilinear_sqrt":
            return _quasilinear, _quasilinear_jac, _quasilinear_inv
        if fam == "leontief":
            return _leontief, _leontief_jac, _leontief_inv
        plugin = _REGISTRY[self.params["name"]]
        func = plugin.func
        if not plugin.vectorized:
            def func(p, m, _f=plugin.func):
                flat_p = p.reshape(-1, p.shape[-1])
                flat_m = np.broadcast_to(m, p.shape[:-1]).ravel()
                out = np.array([_f(pi, mi) for pi, mi in zip(flat_p, flat_m)], dtype=float)
                return out.reshape(p.shape)
        return func, plugin.jacobian, plugin.inverse

    def __call__(self, p, m) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.n:
            raise DimensionMismatch(f"price vector has {p.shape[-1]} goods, spec has {self.n}")
        m = np.asarray(m, dtype=float)
        return self._parts[0](p, m)

    @property
    def has_jacobian(self) -> bool:
        return self._parts[1] is not None

    @property
    def has_inverse(self) -> bool:
        return self._parts[2] is not None

    def jacobian(self, p, m) -> tuple[np.ndarray, np.ndarray]:
        """Analytic ``(D_p f, D_m f)`` at a single point."""
        jac = self._parts[1]
        if jac is None:
            raise ValidationError(f"{self.label()} has no analytic Jacobian")
        return jac(np.asarray(p, dtype=float), float(m))

    def inverse(self, x) -> np.ndarray | None:
        """Analytic simplex-normalised supporting price of ``x``, or None if
        ``x`` is outside the range."""
        inv = self._parts[2]
        if inv is None:
            raise ValidationError(f"{self.label()} has no analytic inverse")
        return inv(np.asarray(x, dtype=float))


def evaluate(spec: DemandSpec, pi: PriceIncome) -> np.ndarray:
    if pi.p.size != spec.n:
        raise DimensionMismatch(f"price vector has {pi.p.size} goods, spec has {spec.n}")
    return spec(pi.p, pi.m)


# ---------------------------------------------------------------- diagnostics


@dataclass
class WalrasReport:
    max_abs_residual: float
    sample_count: int
    worst_point: PriceIncome
    budget_violations: int

    def to_json(self) -> dict:
        return {
            "max_abs_residual": self.max_abs_residual,
            "sample_count": self.sample_count,
            "worst_point": self.worst_point.to_json(),
            "budget_violations": self.budget_violations,
        }


def _default_region(spec: DemandSpec, region: Box | None) -> Box:
    region = region if region is not None else Box.cube(0.5, 2.0, spec.n + 1)
    if region.dim != spec.n + 1:
        raise DimensionMismatch(f"region has dimension {region.dim}, need {spec.n + 1}")
    return region


def check_walras(spec: DemandSpec, region: Box | None = None, samples: int = 100,
                 seed: int = 0, tol: float = 1e-9) -> WalrasReport:
    """Largest |p.f(p,m) - m| over uniform samples; also counts points where
    the budget inequality p.f <= m fails by more than ``tol * m``."""
    if samples < 1:
        raise EmptyRegion("need at least one sample")
    region = _default_region(spec, region)
    pts = region.sample(np.random.default_rng(seed), samples)
    p, m = pts[:, :-1], pts[:, -1]
    spend = np.sum(p * spec(p, m), axis=-1)
    resid = np.abs(spend - m)
    k = int(np.argmax(resid))
    return WalrasReport(
        max_abs_residual=float(resid[k]),
        sample_count=samples,
        worst_point=PriceIncome(p[k], m[k]),
        budget_violations=int(np.sum(spend > m * (1.0 + tol))),
    )


@dataclass
class RangeProbe:
    points: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def extent(self) -> np.ndarray:
        return self.upper - self.lower

    def full_dimensional(self, tol: float = 1e-9) -> bool:
        """Whether the sampled image spreads in every direction.

        Checks the bounding box and, to catch sets like a diagonal whose box
        is fat, the rank of the centred sample cloud."""
        if np.any(self.extent <= tol):
            return False
        centred = self.points - self.points.mean(axis=0)
        sv = np.linalg.svd(centred, compute_uv=False)
        return bool(sv[-1] > tol * max(sv[0], 1.0))


def range_probe(spec: DemandSpec, region: Box | None = None, samples: int = 200,
                seed: int = 0) -> RangeProbe:
    if samples < 1:
        raise EmptyRegion("need at least one sample")
    region = _default_region(spec, region)
    pts = region.sample(np.random.default_rng(seed), samples)
    x = spec(pts[:, :-1], pts[:, -1])
    return RangeProbe(x, x.min(axis=0), x.max(axis=0))


# ---------------------------------------------------------------- anti-examples
# Registered at import so configs can name them. None of these is a demand
# function; they exist to show that the diagnostics catch failures.


def _half_income(p, m):
    return 0.5 * m[..., None] / (p.shape[-1] * p)


def _tilted_share(p, m):
    # Share of good 1 is 1/(1+p1): Walras holds, homogeneity and symmetry fail.
    w = 1.0 / (1.0 + p[..., 0])
    return np.stack([w * m / p[..., 0], (1.0 - w) * m / p[..., 1]], axis=-1)


def _swapped_cobb_douglas(p, m):
    # Cobb-Douglas weights (1/4, 3/4), swapped to (3/4, 1/4) when p1 > p2.
    a1 = np.where(p[..., 0] > p[..., 1], 0.75, 0.25)
    return np.stack([a1 * m / p[..., 0], (1.0 - a1) * m / p[..., 1]], axis=-1)


register_demand("half_income_cobb_douglas", _half_income)
register_demand("tilted_share", _tilted_share, n=2)
register_demand("swapped_cobb_douglas", _swapped_cobb_douglas, n=2)


def builtin_specs() -> list[DemandSpec]:
    """One representative per built-in family, used by the test suites."""
    return [
        DemandSpec.cobb_douglas([0.5, 0.5]),
        DemandSpec.cobb_douglas([0.3, 0.7]),
        DemandSpec.ces(-1.0),
        DemandSpec.ces(-2.0),
        DemandSpec.ces(0.5),
        DemandSpec.quasilinear_sqrt(),
        DemandSpec.leontief(),
    ]


def builtin_jsonable(obj: Any) -> Any:
    """Convert numpy containers to plain Python for JSON output."""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: builtin_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [builtin_jsonable(v) for v in obj]
    return obj
