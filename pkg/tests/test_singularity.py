import math

import numpy as np
import pytest

from freewalk import freeprod as fp
from freewalk import singularity as sg
from freewalk.errors import DegenerateDesignMatrix, DomainError, PreconditionFailed, WindowTooShort
from freewalk.lattice import lazy_srw

ALPHA_STAR = {5: 0.5476102439554291, 6: 0.5660320837101274}


def critical(d2):
    return fp.make_config(lazy_srw(3), lazy_srw(d2), ALPHA_STAR[d2])


@pytest.fixture(scope="module")
def profile5():
    return sg.build_profile(critical(5), 4, 22)


class TestProfile:
    def test_shape(self, profile5):
        assert len(profile5) == 19
        assert list(profile5.k) == list(range(4, 23))
        assert profile5.final_decade().sum() == 4

    def test_monotone_columns(self, profile5):
        p = profile5
        assert np.all(p.dG > 0) and np.all(np.diff(p.dG) < 0)
        assert np.all(np.diff(p.delta) < 0) and p.zeta_j[-1] > 1 - 1e-3
        # dG/(R - r) grows like G', so eps/dG decreases
        assert np.all(np.diff(p.eps / p.dG) < 0)

    def test_integral_matches_direct(self, profile5):
        direct = sg.build_profile(critical(5), 8, 12, method="direct")
        rows = profile5.k >= 8
        for name in ("G", "G1", "G2", "delta", "Ij1"):
            got = getattr(profile5, name)[rows][:5]
            assert np.allclose(got, getattr(direct, name), rtol=1e-8), name

    def test_thread_pool_same_rows(self):
        a = sg.build_profile(critical(6), 10, 13, threads=1)
        b = sg.build_profile(critical(6), 10, 13, threads=2)
        for name in sg.COLUMNS:
            assert np.array_equal(a.columns[name], b.columns[name])

    def test_not_critical(self):
        cfg = critical(5).with_alpha(0.8)
        with pytest.raises(PreconditionFailed):
            sg.build_profile(cfg, 4, 8)
        with pytest.raises(PreconditionFailed):
            sg.check_second_order_chain(cfg)

    def test_csv_header(self, profile5):
        head = sg.profile_csv(profile5).splitlines()[0].split(",")
        assert head == list(sg.COLUMNS)


class TestRatioLaws:
    def test_d5_stabilizes(self, profile5):
        by = {r.model: r for r in sg.check_ratio_laws(profile5)}
        assert all(r.drift < sg.RATIO_DRIFT for r in by.values())
        assert by["zeta_vs_factor_green"].details["reference_rel_err"] < sg.CLOSED_FORM_RATIO

    def test_unsupported_dimension(self, profile5):
        with pytest.raises(DomainError):
            sg.check_ratio_laws(profile5, d=4)

    def test_chain_d5(self, profile5):
        reps = sg.check_second_order_chain(critical(5), profile5)
        assert [r.model for r in reps] == [
            "second_derivative_vs_factor", "moment_derivative", "second_derivative_vs_moment_derivative"
        ]
        assert all(r.verdict for r in reps)


class TestModelSelection:
    def test_exact_power_law(self):
        p = sg.synthetic_profile(lambda e: 2.0 * e ** (-1 / 3))
        fit = sg.fit_green_singularity(p)
        assert fit.model == sg.MODEL_THIRD
        assert fit.drift < 1e-10 and abs(fit.exponents["a"] - 1 / 3) < 1e-12
        assert abs(fit.constant - 2.0) < 1e-12

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_noisy_calibration(self, seed):
        p = sg.synthetic_profile(lambda e: e ** (-1 / 3), k_min=4, k_max=60, noise=0.01, seed=seed)
        fit = sg.fit_green_singularity(p, window=np.ones(len(p), bool))
        assert fit.model == sg.MODEL_THIRD
        assert abs(fit.exponents["a"] - 1 / 3) < 0.01

    def test_xlog_law(self):
        p = sg.synthetic_profile(lambda e: (-e * np.log(e)) ** -0.5, k_min=4, k_max=200)
        assert sg.fit_green_singularity(p, expected=sg.MODEL_XLOG).model == sg.MODEL_XLOG

    def test_scale_invariance(self):
        law = lambda e: e ** -0.5
        a = sg.fit_green_singularity(sg.synthetic_profile(law))
        b = sg.fit_green_singularity(sg.synthetic_profile(lambda e: 7.5 * law(e)))
        assert a.model == b.model == sg.MODEL_HALF
        assert abs(b.constant / a.constant - 7.5) < 1e-9

    def test_too_few_rows(self):
        with pytest.raises(DegenerateDesignMatrix):
            sg.fit_green_singularity(sg.synthetic_profile(lambda e: e**-0.5, 4, 14))

    def test_d5_real_profile(self, profile5):
        fit = sg.fit_green_singularity(profile5)
        assert fit.model == sg.MODEL_THIRD
        assert fit.details["residuals"][sg.MODEL_HALF] >= 2 * fit.residual


class TestTauberian:
    n = np.arange(2001, dtype=float)
    n[0] = 1.0

    def test_pure_power(self):
        fit = sg.tauberian_fit(3.0 * self.n**-1.5 * 1.25**-self.n, 1.25)
        assert fit.model == "b0" and abs(fit.exponents["a"] - 1.5) < 1e-9 and fit.verdict
        assert abs(fit.constant - 3.0) < 1e-8

    def test_log_correction(self):
        c = self.n**-1.5 * np.log(np.maximum(self.n, 2)) ** -0.5
        fit = sg.tauberian_fit(c, 1.0)
        assert fit.model == "b_half" and abs(fit.exponents["a"] - 1.5) < 1e-9

    def test_period_two(self):
        c = self.n**-1.5
        c[1::2] = 0.0
        fit = sg.tauberian_fit(c, 1.0, period=2)
        assert abs(fit.exponents["a"] - 1.5) < 1e-9
        assert fit.details["period"] == 2

    def test_short_window(self):
        with pytest.raises(WindowTooShort):
            sg.tauberian_fit(np.ones(100), 1.0)

    def test_json_verdict_string(self):
        fit = sg.tauberian_fit(self.n**-1.5, 1.0)
        assert fit.to_json()["verdict"] == "pass"
        assert math.isfinite(fit.to_json()["drift"])
