import math

import numpy as np
import pytest

from freewalk import freeprod as fp
from freewalk.errors import NoConvergence, ValidationError
from freewalk.lattice import lazy_srw, theta_of_factor
from freewalk.series import bfs_walk, green_series_freeprod

# bisection outputs, frozen; cross-checked below by tightening the tolerance
ALPHA_STAR = {5: 0.5476102439554291, 6: 0.5660320837101274}
R_STAR_5 = 1.239225846142532


def preset(d2, alpha="1/2"):
    return fp.make_config(lazy_srw(3), lazy_srw(d2), alpha)


@pytest.fixture(scope="module")
def critical5():
    return preset(5).with_alpha(ALPHA_STAR[5])


class TestConfig:
    def test_json_round_trip(self):
        cfg = preset(5, "2/5")
        back = fp.config_from_json(cfg.to_json())
        assert back == cfg and back.alpha_exact == cfg.alpha_exact

    def test_unknown_key(self):
        doc = preset(5).to_json()
        doc["beta"] = 1
        with pytest.raises(ValidationError):
            fp.config_from_json(doc)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2])
    def test_alpha_range(self, alpha):
        with pytest.raises(ValidationError):
            fp.make_config(lazy_srw(3), lazy_srw(5), alpha)


class TestFactorFunctions:
    def test_phi_at_zero(self):
        m = lazy_srw(5)
        assert fp.phi_factor(m, 0.0) == 1.0
        # Phi'(0) = mu(0)
        assert abs(fp.phi_factor_derivs(m, 1e-9)[0] - 0.5) < 1e-6

    @pytest.mark.parametrize("frac", [0.2, 0.6, 0.95])
    def test_phi_derivative_by_differences(self, frac):
        m = lazy_srw(5)
        t = frac * theta_of_factor(m)
        h = 1e-5
        fd = (fp.phi_factor(m, t + h) - fp.phi_factor(m, t - h)) / (2 * h)
        assert abs(fd - fp.phi_factor_derivs(m, t)[0]) < 1e-7

    def test_phi_second_derivative_infinite_at_theta(self):
        m = lazy_srw(5)
        assert math.isinf(fp.phi_factor_derivs(m, theta_of_factor(m))[1])

    def test_psi_at_zero(self):
        assert fp.psi_factor(lazy_srw(3), 0.0) == 1.0

    @pytest.mark.parametrize("d", [3, 5, 6])
    def test_psi_two_routes(self, d):
        m = lazy_srw(d)
        for t in np.linspace(0.05, 0.95, 7) * theta_of_factor(m):
            assert abs(fp.psi_factor(m, t) - fp.psi_factor_via_phi(m, t)) < 1e-8

    def test_psi_decreasing(self):
        m = lazy_srw(5)
        ts = np.linspace(0.0, 1.0, 12) * theta_of_factor(m)
        vals = [fp.psi_factor(m, t) for t in ts]
        assert all(a > b for a, b in zip(vals, vals[1:]))


class TestClassification:
    def test_alpha_c_equal_quotients(self):
        cfg = preset(5)
        ac = fp.theta_bar(cfg).alpha_c
        th1, th2 = theta_of_factor(lazy_srw(3)), theta_of_factor(lazy_srw(5))
        assert abs(th1 / ac - th2 / (1 - ac)) < 1e-9

    def test_small_alpha_convergent(self):
        sol = fp.classify(preset(5).with_alpha(0.01))
        assert sol.classification == fp.DEGENERATE_CONVERGENT
        assert sol.psi_at_theta_bar > 0

    @pytest.mark.parametrize("alpha", [0.57, 0.8, 0.95])
    def test_large_alpha_non_degenerate(self, alpha):
        sol = fp.classify(preset(5).with_alpha(alpha))
        assert sol.classification == fp.NON_DEGENERATE_DIVERGENT
        assert sol.theta < sol.theta_bar

    def test_critical_degenerate_along_two_only(self, critical5):
        sol = fp.classify(critical5)
        assert sol.classification == fp.DEGENERATE_DIVERGENT
        assert sol.degenerate_along == (2,)
        assert abs(sol.R - R_STAR_5) < 1e-9

    def test_swapped_config(self, critical5):
        a, b = fp.classify(critical5), fp.classify(critical5.swapped())
        assert b.degenerate_along == (1,)
        assert abs(a.R - b.R) < 1e-12


class TestGreenFreeProduct:
    @pytest.mark.parametrize("frac", [0.5, 0.9])
    def test_matches_series(self, frac):
        cfg = preset(5)
        R = fp.classify(cfg).R
        c = green_series_freeprod(cfg, 2000).as_float()
        r = frac * R
        n = np.arange(len(c))
        g = fp.green_freeprod(cfg, r)
        assert abs(g.value - np.sum(c * r**n)) < 1e-7
        assert abs(g.d1 - np.sum(n[1:] * c[1:] * r ** (n[1:] - 1))) < 1e-6

    def test_second_derivative_by_differences(self):
        cfg = preset(6)
        r = 0.7 * fp.classify(cfg).R
        h = 1e-5
        fd = (fp.green_freeprod(cfg, r + h).d1 - fp.green_freeprod(cfg, r - h).d1) / (2 * h)
        assert abs(fd / fp.green_freeprod(cfg, r).d2 - 1) < 1e-6

    def test_beyond_radius(self):
        cfg = preset(5)
        with pytest.raises(NoConvergence):
            fp.green_freeprod(cfg, 1.01 * fp.classify(cfg).R)

    def test_zeta_increasing(self, critical5):
        R = fp.classify(critical5).R
        for i in (1, 2):
            zs = [fp.zeta(critical5, i, f * R) for f in np.linspace(0.1, 1.0, 10)]
            assert all(a < b for a, b in zip(zs, zs[1:]))

    def test_degeneracy_marker(self, critical5):
        z1, z2 = fp.classify(critical5).zeta_at_R
        assert abs(z2 - 1) < 1e-6 and z1 < 1 - 1e-3


def _bfs_factor_green(cfg, i, n_max, r):
    """``G(e, x | r)`` for x in factor i, summed from truncated word distributions."""
    d = cfg.factors[i - 1].dimension
    g = {}
    for n, dist in enumerate(bfs_walk(cfg, n_max, target_factor=i)):
        for w, p in dist.items():
            if not w:
                x = (0,) * d
            elif len(w) == 1 and w[0][0] == i:
                x = w[0][1]
            else:
                continue
            g[x] = g.get(x, 0.0) + p * r**n
    return g


class TestMoments:
    @pytest.mark.parametrize("i, n_max, r", [(1, 7, 0.1), (2, 5, 0.05)])
    def test_factor_moments_against_word_sums(self, i, n_max, r):
        # I_i^(1) = sum_x G(e,x)^2 and I_i^(2) = sum_{x,y} G(e,x) G(x,y) G(y,e), x, y in factor i
        cfg = preset(5)
        g = _bfs_factor_green(cfg, i, n_max, r)
        I1 = sum(v * v for v in g.values())
        I2 = sum(g[x] * g.get(tuple(b - a for a, b in zip(x, y)), 0.0) * g[y] for x in g for y in g)
        m = fp.moments_I_J(cfg, r)
        assert abs(m.I1_i[i - 1] / I1 - 1) < 1e-6
        assert abs(m.I2_i[i - 1] / I2 - 1) < 1e-6

    @pytest.mark.parametrize("frac", [0.5, 0.9])
    def test_moment_derivative_identity(self, frac):
        # d/dr (r^2 I_i^(1)) = 2 r I^(1) I_i^(2) / I_i^(1)
        cfg = preset(5)
        r = frac * fp.classify(cfg).R
        h = 1e-5 * r
        up, dn, m = fp.moments_I_J(cfg, r + h), fp.moments_I_J(cfg, r - h), fp.moments_I_J(cfg, r)
        for i in range(2):
            fd = ((r + h) ** 2 * up.I1_i[i] - (r - h) ** 2 * dn.I1_i[i]) / (2 * h)
            assert abs(fd / (2 * r * m.I1 / m.I1_i[i] * m.I2_i[i]) - 1) < 1e-7

    def test_total_first_moment(self):
        cfg = preset(5)
        r = 0.8 * fp.classify(cfg).R
        g = fp.green_freeprod(cfg, r)
        assert abs(fp.moments_I_J(cfg, r).I1 - (r * g.d1 + g.value)) < 1e-12

    def test_critical_flags(self, critical5):
        sol = fp.classify(critical5)
        m = fp.moments_I_J(critical5, sol.R, sol)
        assert m.divergent and math.isinf(m.J2) and not m.spectrally_positive_recurrent

    def test_convergent_flags(self):
        cfg = preset(5).with_alpha(0.3)
        sol = fp.classify(cfg)
        m = fp.moments_I_J(cfg, sol.R, sol)
        assert not m.divergent


class TestAlphaStar:
    @pytest.mark.parametrize("d2", [5, 6])
    def test_value_and_sign(self, d2):
        ast = fp.find_alpha_star(lazy_srw(3), lazy_srw(d2))
        assert abs(ast.alpha - ALPHA_STAR[d2]) < 1e-9
        assert abs(ast.solution.psi_at_theta_bar) < 1e-10
        assert 0.01 < ast.alpha < fp.theta_bar(preset(d2)).alpha_c
        assert ast.root_count == 1

    def test_tolerance_halving(self):
        a = fp.find_alpha_star(lazy_srw(3), lazy_srw(5), tol=1e-10).alpha
        b = fp.find_alpha_star(lazy_srw(3), lazy_srw(5), tol=5e-11, scan_points=65).alpha
        assert abs(a - b) < 1e-7

    def test_endpoint_signs(self):
        f1, f2 = lazy_srw(3), lazy_srw(5)
        ac = fp.theta_bar(preset(5)).alpha_c
        assert fp.psi_at_theta_bar(f1, f2, 0.01) > 0 > fp.psi_at_theta_bar(f1, f2, ac)
