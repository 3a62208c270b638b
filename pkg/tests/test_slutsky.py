import numpy as np
import pytest
import sympy as sp

from integrability.demand import Box, DemandSpec, PriceIncome, builtin_specs
from integrability.errors import StepTooLarge
from integrability.slutsky import check_S_NSD, jacobian_fd, quasilinear_kink, slutsky_matrix

p1, p2, m = sp.symbols("p1 p2 m", positive=True)


def symbolic_slutsky(f1, f2, at):
    """Slutsky matrix by symbolic differentiation, evaluated at (p1, p2, m)."""
    f = [f1, f2]
    S = sp.Matrix(2, 2, lambda i, j: sp.diff(f[i], [p1, p2][j]) + sp.diff(f[i], m) * f[j])
    return np.array(S.subs(dict(zip((p1, p2, m), at))).evalf(), dtype=float)


SYMBOLIC = {
    "cd": (DemandSpec.cobb_douglas([0.5, 0.5]), m / (2 * p1), m / (2 * p2)),
    "cd37": (DemandSpec.cobb_douglas([0.3, 0.7]), sp.Rational(3, 10) * m / p1, sp.Rational(7, 10) * m / p2),
    "leontief": (DemandSpec.leontief(), m / (p1 + p2), m / (p1 + p2)),
    "ces-1": (
        DemandSpec.ces(-1.0),
        p1 ** sp.Rational(-1, 2) * m / (sp.sqrt(p1) + sp.sqrt(p2)),
        p2 ** sp.Rational(-1, 2) * m / (sp.sqrt(p1) + sp.sqrt(p2)),
    ),
    "tilted": (DemandSpec.external("tilted_share"), m / (p1 * (1 + p1)), m * p1 / (p2 * (1 + p1))),
}


class TestJacobian:
    def test_cobb_douglas_own_price(self, cd):
        dp, dm = jacobian_fd(cd, PriceIncome([1.0, 1.0], 1.0), 1e-5)
        assert dp[0, 0] == pytest.approx(-0.5, abs=1e-6)
        np.testing.assert_allclose(dm, [0.5, 0.5], atol=1e-6)

    def test_second_order(self, cd):
        pi = PriceIncome([1.3, 0.8], 1.7)
        exact = np.append(cd.jacobian(pi.p, pi.m)[0].ravel(), cd.jacobian(pi.p, pi.m)[1])
        errs = []
        for h in (1e-2, 5e-3):
            dp, dm = jacobian_fd(cd, pi, h)
            errs.append(np.max(np.abs(np.append(dp.ravel(), dm) - exact)))
        assert 3.5 < errs[0] / errs[1] < 4.5

    def test_quasilinear_interior_income_free(self, quasi):
        _, dm = jacobian_fd(quasi, PriceIncome([1.0, 1.0], 1.0), 1e-5)
        assert dm[0] == pytest.approx(0.0, abs=1e-6)

    def test_step_too_large(self, cd):
        with pytest.raises(StepTooLarge):
            jacobian_fd(cd, PriceIncome([0.1, 1.0], 1.0), 0.2)

    @pytest.mark.parametrize("spec", builtin_specs(), ids=lambda s: s.label())
    def test_analytic_matches_fd(self, spec, rng):
        for z in rng.uniform(0.5, 2.0, size=(20, 3)):
            pi = PriceIncome(z[:2], z[2])
            if spec.family == "quasilinear_sqrt" and quasilinear_kink(0.05)(pi.p, pi.m):
                continue
            a = slutsky_matrix(spec, pi, analytic=True).entries
            f = slutsky_matrix(spec, pi, analytic=False).entries
            np.testing.assert_allclose(f, a, rtol=1e-5, atol=1e-7)


class TestSlutskyMatrix:
    def test_cobb_douglas_value(self, cd):
        S = slutsky_matrix(cd, PriceIncome([1.0, 1.0], 1.0), analytic=False).entries
        np.testing.assert_allclose(S, [[-0.25, 0.25], [0.25, -0.25]], atol=1e-6)
        np.testing.assert_allclose(np.linalg.eigvalsh(S), [-0.5, 0.0], atol=1e-6)

    def test_leontief_has_no_substitution(self, leontief):
        # f_i = m/(p1+p2): own-price and income terms cancel, S == 0
        expected = symbolic_slutsky(m / (p1 + p2), m / (p1 + p2), (1, 1, 2))
        np.testing.assert_allclose(expected, np.zeros((2, 2)), atol=1e-15)
        S = slutsky_matrix(leontief, PriceIncome([1.0, 1.0], 2.0), analytic=False).entries
        np.testing.assert_allclose(S, expected, atol=1e-6)

    @pytest.mark.parametrize("key", sorted(SYMBOLIC))
    def test_against_symbolic_oracle(self, key, rng):
        spec, f1, f2 = SYMBOLIC[key]
        for z in rng.uniform(0.5, 2.0, size=(5, 3)):
            expected = symbolic_slutsky(f1, f2, z)
            got = slutsky_matrix(spec, PriceIncome(z[:2], z[2]), analytic=False).entries
            np.testing.assert_allclose(got, expected, rtol=1e-6, atol=1e-7)

    def test_tilted_share_is_asymmetric_symbolically(self):
        _, f1, f2 = SYMBOLIC["tilted"]
        S = symbolic_slutsky(f1, f2, (1, 1, 1))
        assert abs(S[0, 1] - S[1, 0]) == pytest.approx(0.25)

    @pytest.mark.parametrize("spec", builtin_specs(), ids=lambda s: s.label())
    def test_walras_and_homogeneity_null_vectors(self, spec, rng):
        for z in rng.uniform(0.5, 2.0, size=(20, 3)):
            pi = PriceIncome(z[:2], z[2])
            if spec.family == "quasilinear_sqrt" and quasilinear_kink(0.05)(pi.p, pi.m):
                continue
            S = slutsky_matrix(spec, pi, analytic=False).entries
            assert np.max(np.abs(pi.p @ S)) <= 1e-6
            assert np.max(np.abs(S @ pi.p)) <= 1e-6


class TestSweep:
    def test_cobb_douglas_passes(self, cd):
        rep = check_S_NSD(cd, Box.cube(0.5, 2.0, 3), 500, 1e-5)
        assert (rep.fail_fraction_S, rep.fail_fraction_NSD) == (0.0, 0.0)
        assert rep.excluded_near_kink == 0

    def test_quasilinear_with_kink_exclusion(self, quasi):
        rep = check_S_NSD(quasi, Box.cube(0.5, 2.0, 3), 500, 1e-5, quasilinear_kink(0.05))
        assert (rep.fail_fraction_S, rep.fail_fraction_NSD) == (0.0, 0.0)
        assert 0 < rep.excluded_near_kink < rep.samples

    def test_tilted_share_fails_symmetry(self):
        rep = check_S_NSD(DemandSpec.external("tilted_share"), samples=200, tol=1e-5)
        assert rep.fail_fraction_S > 0

    def test_monotone_in_tolerance(self):
        spec = DemandSpec.external("tilted_share")
        fracs = [check_S_NSD(spec, samples=200, tol=t).fail_fraction_S for t in (1e-1, 1e-2, 1e-5)]
        assert fracs == sorted(fracs)

    def test_report_json(self, cd):
        obj = check_S_NSD(cd, samples=10, seed=7).to_json()
        assert obj["seed"] == 7 and obj["tol"] == 1e-5 and obj["h"] > 0
        for key in ("samples", "max_symmetry_residual", "min_eigenvalue", "fail_fraction_S",
                    "fail_fraction_NSD", "excluded_near_kink"):
            assert key in obj
