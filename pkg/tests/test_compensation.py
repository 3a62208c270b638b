import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from integrability.compensation import (
    Status,
    budget_monotonicity_check,
    endpoint,
    path_csv_and_sidecar,
    reverse_check,
    solve_path,
)
from integrability.demand import DemandSpec, builtin_specs, register_demand
from integrability.errors import IncompletePath, ValidationError

prices = st.lists(st.floats(0.25, 4.0), min_size=2, max_size=2).map(np.array)
incomes = st.floats(0.25, 4.0)


def cd_expenditure(a, p, q, m):
    return m * np.prod((q / p) ** a)


class TestExamples:
    def test_cobb_douglas_doubling_ratio(self, cd):
        E = endpoint(cd, [1.0, 1.0], [4.0, 1.0], 1.0)
        assert E == pytest.approx(2.0, rel=1e-9)

    def test_quasilinear_known_endpoint(self, quasi):
        # f((4, 1), 1) = (1/64, 15/16) has utility 17/16; E at (1, 1) is 17/16 - 1/4
        assert endpoint(quasi, [4.0, 1.0], [1.0, 1.0], 1.0) == pytest.approx(13 / 16, rel=1e-9)

    def test_identity_leg(self, cd):
        path = solve_path(cd, [1.3, 0.7], [1.3, 0.7], 2.5)
        assert path.complete and path.terminal == 2.5

    def test_validation(self, cd):
        with pytest.raises(ValidationError):
            solve_path(cd, [0.0, 1.0], [1.0, 1.0], 1.0)
        with pytest.raises(ValidationError):
            solve_path(cd, [1.0, 1.0], [1.0, 1.0], -1.0)
        with pytest.raises(ValidationError):
            solve_path(cd, [1.0, 1.0, 1.0], [1.0, 1.0], 1.0)


class TestIdentities:
    @pytest.mark.parametrize("spec", builtin_specs(), ids=lambda s: s.label())
    def test_reversal(self, spec):
        assert reverse_check(spec, [1.0, 2.0], [3.0, 0.5], 1.5) <= 1e-6 * 1.5

    @pytest.mark.parametrize("spec", builtin_specs(), ids=lambda s: s.label())
    def test_budget_monotone(self, spec):
        assert budget_monotonicity_check(spec, [1.0, 2.0], [3.0, 0.5], 1.5) >= -1e-9

    @given(prices, prices, incomes, st.floats(0.1, 0.9))
    def test_income_monotone(self, p, q, m, frac):
        spec = DemandSpec.ces(-1.0)
        hi = solve_path(spec, p, q, m)
        lo = solve_path(spec, p, q, m * frac)
        ts = np.linspace(0, 1, 51)
        assert np.all(hi.at(ts) > lo.at(ts))

    @given(prices, prices, prices, incomes)
    def test_path_independence(self, p, q, pbar, m):
        spec = DemandSpec.cobb_douglas([0.3, 0.7])
        two = endpoint(spec, q, pbar, endpoint(spec, p, q, m))
        assert two == pytest.approx(endpoint(spec, p, pbar, m), rel=1e-6)

    def test_base_invariance_leontief(self, leontief):
        # f(p, m) = f(q, w) whenever m/sum(p) = w/sum(q), for any relative prices
        p, q, pbar = np.array([1.0, 3.0]), np.array([2.5, 0.5]), np.array([1.0, 1.0])
        m = 2.0
        w = m * q.sum() / p.sum()
        np.testing.assert_allclose(leontief(p, m), leontief(q, w))
        assert endpoint(leontief, p, pbar, m) == pytest.approx(endpoint(leontief, q, pbar, w), rel=1e-9)

    @given(prices, incomes, st.floats(0.2, 5.0))
    def test_homogeneity_of_expenditure(self, p, m, lam):
        spec = DemandSpec.ces(0.5)
        q = np.array([1.5, 0.8])
        assert endpoint(spec, lam * p, q, lam * m) == pytest.approx(endpoint(spec, p, q, m), rel=1e-7)


class TestSolver:
    def test_tolerance_scaling(self, cd):
        exact = cd_expenditure(np.array([0.5, 0.5]), np.array([1.0, 1.0]), np.array([0.3, 3.5]), 1.0)
        errs = [abs(endpoint(cd, [1.0, 1.0], [0.3, 3.5], 1.0, tol) - exact) for tol in (1e-4, 1e-8)]
        assert errs[1] <= errs[0] + 1e-15
        assert errs[1] <= 1e-7

    def test_matches_scipy(self):
        spec = DemandSpec.ces(-2.0)
        p, q, m = np.array([0.4, 2.0]), np.array([3.0, 0.7]), 1.3

        def rhs(t, c):
            return [float(spec((1 - t) * p + t * q, c[0]) @ (q - p))]

        ref = solve_ivp(rhs, (0, 1), [m], method="DOP853", rtol=1e-12, atol=1e-14).y[0, -1]
        assert endpoint(spec, p, q, m) == pytest.approx(ref, rel=1e-8)

    def test_hermite_dense_output(self, cd):
        path = solve_path(cd, [1.0, 1.0], [4.0, 0.25], 1.0)
        ts = np.linspace(0, 1, 333)
        r = path.prices(ts)
        exact = np.sqrt(r[:, 0] * r[:, 1])
        np.testing.assert_allclose(path.at(ts), exact, rtol=1e-7)
        nodes = np.sqrt(np.prod(path.prices(path.t_samples), axis=1))
        np.testing.assert_allclose(path.c_values, nodes, rtol=1e-10)

    def test_never_evaluates_outside_orthant(self):
        seen = []

        def spend_fast(p, m):
            seen.append(float(np.min(m)))
            # demand that drains income quickly when prices fall
            return np.stack([10 * m / p[..., 0] * 0.5, m / p[..., 1] * 0.5], axis=-1)

        register_demand("spend_fast_probe", spend_fast, n=2, vectorized=True)
        spec = DemandSpec.external("spend_fast_probe")
        path = solve_path(spec, [4.0, 1.0], [0.01, 1.0], 1.0)
        assert min(seen) > 0
        assert path.status in (Status.COMPLETE, Status.EXIT_LOW_INCOME)

    def test_low_income_exit(self):
        def leak(p, m):
            return np.stack([m / p[..., 0], np.zeros_like(m)], axis=-1)

        register_demand("leak_probe", leak, n=2, vectorized=True)
        spec = DemandSpec.external("leak_probe")
        # c is proportional to r1, so c(1) = 1e-7 lies below the floor
        path = solve_path(spec, [1000.0, 1.0], [1e-4, 1.0], 1.0, c_floor=1e-3)
        assert path.status is Status.EXIT_LOW_INCOME
        with pytest.raises(IncompletePath) as err:
            endpoint(spec, [1000.0, 1.0], [1e-8, 1.0], 1.0)
        assert err.value.status in (Status.EXIT_LOW_INCOME, Status.STEP_FAILURE)

    def test_high_income_exit(self, cd):
        path = solve_path(cd, [1.0, 1.0], [1e6, 1e6], 1.0, c_ceiling=1e3)
        assert path.status is Status.EXIT_HIGH_INCOME and path.terminal is None

    def test_csv_and_sidecar(self, cd):
        path = solve_path(cd, [1.0, 1.0], [4.0, 1.0], 1.0)
        text, side = path_csv_and_sidecar(path)
        lines = text.strip().split("\n")
        assert lines[0] == "t,c" and len(lines) == path.t_samples.size + 1
        assert float(lines[-1].split(",")[0]) == 1.0
        meta = json.loads(side)
        assert meta["status"] == "Complete" and meta["terminal"] == pytest.approx(2.0)
        assert meta["steps"] == path.stats.steps
