"""Revealed-preference checks on sampled demand observations.

Weak axiom: if x != y, x = f(p, m), y = f(q, w) and p.y <= m, then q.x > w.
Strong axiom: for every chain x^1..x^k with p^i . x^(i+1) <= m^i, the
closing inequality p^k . x^1 > m^k holds.

Strict inequalities are judged with relative slack ``1e-9``: a closing
value within the slack is a near-tie (warning), below it a violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .demand import Box, DemandSpec, _default_region
from .errors import ValidationError

STRICT_SLACK = 1e-9
MAX_REJECTS = 50


@dataclass
class Observation:
    p: np.ndarray
    m: float
    x: np.ndarray


@dataclass
class Violation:
    indices: tuple
    slack: float


@dataclass
class AxiomReport:
    tested: int
    violations: list = field(default_factory=list)
    near_ties: list = field(default_factory=list)
    failed_chains: int = 0
    seed: int | None = None

    @property
    def consistent(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "tested": self.tested,
            "violations": [{"indices": list(v.indices), "slack": v.slack} for v in self.violations],
            "near_ties": len(self.near_ties),
            "failed_chains": self.failed_chains,
            "seed": self.seed,
        }


def observe(spec: DemandSpec, points: np.ndarray) -> list:
    p, m = points[:, :-1], points[:, -1]
    x = spec(p, m)
    return [Observation(pi, float(mi), xi) for pi, mi, xi in zip(p, m, x)]


def check_pairs(obs: list, tol: float = 1e-9) -> AxiomReport:
    """Weak-axiom test over all ordered pairs of observations.

    A pair (i, j) is tested when the bundles differ by more than ``tol`` and
    x_j is affordable at observation i with margin ``tol * m_i``.
    """
    report = AxiomReport(0)
    for i, a in enumerate(obs):
        for j, b in enumerate(obs):
            if i == j or np.linalg.norm(a.x - b.x) <= tol:
                continue
            if a.p @ b.x > a.m * (1.0 - tol):
                continue
            report.tested += 1
            slack = float(b.p @ a.x - b.m)
            _judge(report, (i, j), slack, b.m)
    return report


def _judge(report, idx, slack, scale):
    band = STRICT_SLACK * scale
    if slack > band:
        return
    if slack >= -band:
        report.near_ties.append(Violation(idx, slack))
    else:
        report.violations.append(Violation(idx, slack))


def weak_axiom_check(spec: DemandSpec, samples: int = 32, seed: int = 0,
                     tol: float = 1e-9, region: Box | None = None) -> AxiomReport:
    """Sample ``samples`` observations and test every ordered pair."""
    if samples < 1:
        raise ValidationError("need at least one observation")
    region = _default_region(spec, region)
    obs = observe(spec, region.sample(np.random.default_rng(seed), samples))
    report = check_pairs(obs, tol)
    report.seed = seed
    return report


def _next_link(spec, rng, region, prev, tol):
    """Rejection-sample an observation whose bundle is affordable at ``prev``."""
    for _ in range(MAX_REJECTS):
        z = region.sample(rng, 1)[0]
        # income scaled toward the previous budget to keep acceptance high
        z[-1] = prev.m * (0.5 + 0.6 * rng.random())
        x = spec(z[:-1], z[-1])
        if prev.p @ x <= prev.m * (1.0 - tol) and np.linalg.norm(x - prev.x) > tol:
            return Observation(z[:-1], float(z[-1]), x)
    return None


def strong_axiom_check(spec: DemandSpec, chain_length: int = 4, chains: int = 100,
                       seed: int = 0, tol: float = 1e-9,
                       region: Box | None = None) -> AxiomReport:
    """Sample revealed-preference chains and test the closing inequality.

    Each chain starts at a uniform observation; every next link is drawn so
    that its bundle is affordable at the previous budget. Chains that cannot
    be extended within ``MAX_REJECTS`` draws are counted in ``failed_chains``.
    """
    if chain_length < 2:
        raise ValidationError("chains need at least two links")
    region = _default_region(spec, region)
    rng = np.random.default_rng(seed)
    report = AxiomReport(0, seed=seed)
    for c in range(chains):
        first = observe(spec, region.sample(rng, 1))[0]
        chain = [first]
        while len(chain) < chain_length:
            nxt = _next_link(spec, rng, region, chain[-1], tol)
            if nxt is None:
                break
            chain.append(nxt)
        if len(chain) < chain_length:
            report.failed_chains += 1
            continue
        last = chain[-1]
        if np.linalg.norm(last.x - first.x) <= tol:
            continue
        report.tested += 1
        _judge(report, (c, chain_length), float(last.p @ first.x - last.m), last.m)
    return report
