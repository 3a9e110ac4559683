"""Acceptance criteria 1-10 as plain functions.

Each ``criterion_N`` returns ``(ok, detail)`` where ``detail`` holds every
number the verdict depends on.  Running this file with ``--digest`` prints
the canonical JSON of all details, which the determinism criterion compares
across fresh processes.
"""

from __future__ import annotations

import math
import sys
import time

import numpy as np
from scipy.special import gamma

from freewalk import freeprod as fp
from freewalk import singularity as sg
from freewalk.lattice import green_eval, srw, lazy_srw, theta_of_factor
from freewalk.provenance import canonical_json
from freewalk.series import bfs_oracle, green_series_freeprod, monte_carlo

SEED = 20240611
THREADS = 1
MC_TRIALS = 10**7

# closed form of the Z^3 simple random walk Green function at 1
WATSON = math.sqrt(6) / (32 * math.pi**3) * gamma(1 / 24) * gamma(5 / 24) * gamma(7 / 24) * gamma(11 / 24)

_cache: dict = {}


def preset(d2: int, alpha="1/2") -> fp.FreeProductConfig:
    return fp.make_config(lazy_srw(3), lazy_srw(d2), alpha)


def alpha_star(d2: int) -> fp.AlphaStar:
    if d2 not in _cache:
        _cache[d2] = fp.find_alpha_star(lazy_srw(3), lazy_srw(d2))
    return _cache[d2]


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def criterion_1():
    g, dt = _timed(lambda: green_eval(srw(3), 1.0).value)
    err = abs(g - WATSON)
    return err < 1e-6 and dt < 5, {"G1": g, "oracle": WATSON, "abs_err": err, "seconds": dt}


def criterion_2():
    cfg = preset(5)

    def run():
        series = green_series_freeprod(cfg, 2000).as_float()
        bfs = bfs_oracle(cfg, 10).as_float()
        mc = {n: monte_carlo(cfg, n, MC_TRIALS, SEED, THREADS) for n in (6, 10, 20)}
        return series, bfs, mc

    (series, bfs, mc), dt = _timed(run)
    bfs_err = float(np.max(np.abs(series[:11] - bfs)))
    z = {n: abs(r.estimate - series[n]) / r.stderr for n, r in mc.items()}
    ok = bfs_err < 1e-12 and all(v < 4 for v in z.values()) and dt < 120
    return ok, {
        "bfs_max_abs_err": bfs_err,
        "mc": {str(n): [r.estimate, r.stderr, float(series[n])] for n, r in mc.items()},
        "mc_z": {str(n): v for n, v in z.items()},
        "seconds": dt,
    }


def criterion_3():
    def run():
        worst = 0.0
        for d in (3, 5, 6):
            m = lazy_srw(d)
            th = theta_of_factor(m)
            for t in np.linspace(0.01, 0.99, 50) * th:
                a = fp.psi_factor_via_phi(m, float(t))
                b = fp.psi_factor(m, float(t))
                worst = max(worst, abs(a - b))
        return worst

    worst, dt = _timed(run)
    return worst < 1e-8 and dt < 30, {"max_abs_diff": worst, "points_per_factor": 50, "seconds": dt}


def criterion_4():
    def run():
        out = {}
        for d2 in (5, 6):
            f1, f2 = lazy_srw(3), lazy_srw(d2)
            alpha_c = fp.theta_bar(preset(d2)).alpha_c
            ast = alpha_star(d2)
            crit = preset(d2).with_alpha(ast.alpha)
            mom = fp.moments_I_J(crit, ast.solution.R, ast.solution)
            out[d2] = {
                "psi_at_0.01": fp.psi_at_theta_bar(f1, f2, 0.01),
                "psi_at_alpha_c": fp.psi_at_theta_bar(f1, f2, alpha_c),
                "alpha_c": alpha_c,
                "alpha_star": ast.alpha,
                "psi_at_alpha_star": ast.solution.psi_at_theta_bar,
                "degenerate_along": list(ast.solution.degenerate_along),
                "divergent": mom.divergent,
                "spr": mom.spectrally_positive_recurrent,
            }
        return out

    out, dt = _timed(run)
    ok = dt < 120
    for v in out.values():
        ok &= v["psi_at_0.01"] > 0 > v["psi_at_alpha_c"]
        ok &= 0.01 < v["alpha_star"] < v["alpha_c"] and abs(v["psi_at_alpha_star"]) < 1e-10
        ok &= v["degenerate_along"] == [2] and v["divergent"] and not v["spr"]
    return bool(ok), {"presets": {str(k): v for k, v in out.items()}, "seconds": dt}


def criterion_5():
    def run():
        return {str(d2): list(alpha_star(d2).solution.zeta_at_R) for d2 in (5, 6)}

    out, dt = _timed(run)
    ok = dt < 30 and all(abs(z2 - 1) < 1e-6 and z1 < 1 - 1e-3 for z1, z2 in out.values())
    return ok, {"zeta_at_R": out, "seconds": dt}


def criterion_6():
    def run():
        out = {}
        for d2 in (5, 6):
            a = alpha_star(d2).alpha
            lo = fp.classify(preset(d2).with_alpha(a - 0.05))
            hi = fp.classify(preset(d2).with_alpha(a + 0.05))
            out[str(d2)] = {"below": lo.classification, "above": hi.classification,
                            "theta": hi.theta, "theta_bar": hi.theta_bar}
        return out

    out, dt = _timed(run)
    ok = dt < 60 and all(
        v["below"] == fp.DEGENERATE_CONVERGENT and v["above"] == fp.NON_DEGENERATE_DIVERGENT
        and v["theta"] < v["theta_bar"]
        for v in out.values()
    )
    return ok, {"classes": out, "seconds": dt}


def _critical_profile(d2: int, k_max: int) -> sg.SingularProfile:
    key = ("profile", d2, k_max)
    if key not in _cache:
        _cache[key] = sg.build_profile(preset(d2).with_alpha(alpha_star(d2).alpha), 4, k_max)
    return _cache[key]


def criterion_7():
    def run():
        return sg.check_ratio_laws(_critical_profile(5, 20), d=5)

    reports, dt = _timed(run)
    by = {r.model: r for r in reports}
    wanted = ("zeta_vs_factor_green", "green_vs_zeta", "inverse_derivative_sqrt")
    lemma = by["zeta_vs_factor_green"]
    ok = dt < 300 and all(by[w].drift < 0.20 for w in wanted) and lemma.details["reference_rel_err"] < 0.15
    return ok, {
        "drifts": {w: by[w].drift for w in wanted},
        "lemma_constant": lemma.constant,
        "lemma_reference": lemma.details["reference"],
        "lemma_rel_err": lemma.details["reference_rel_err"],
        "seconds": dt,
    }


def criterion_8():
    def run():
        return sg.fit_green_singularity(_critical_profile(5, sg.DEFAULT_K[1]), d=5)

    fit, dt = _timed(run)
    res = fit.details["residuals"]
    factor = res[sg.MODEL_HALF] / res[sg.MODEL_THIRD]
    a = fit.exponents["a"]
    ok = dt < 300 and 0.28 <= a <= 0.38 and factor >= 2 and fit.model == sg.MODEL_THIRD
    return ok, {"a": a, "model": fit.model, "residuals": res, "factor_vs_half": factor, "seconds": dt}


def criterion_9():
    def run():
        return sg.fit_green_singularity(_critical_profile(6, sg.DEEP_K_MAX), d=6)

    fit, dt = _timed(run)
    res = fit.details["residuals"]
    ok = dt < 300 and fit.model == sg.MODEL_XLOG and res[sg.MODEL_XLOG] < min(res[sg.MODEL_HALF], res[sg.MODEL_THIRD])
    return ok, {"model": fit.model, "residuals": res, "a": fit.exponents["a"],
                "eps_range": fit.details["eps_range"], "seconds": dt}


def criterion_10():
    def run():
        n = np.arange(2001, dtype=float)
        n[0] = 1.0
        R = 1.25
        pure = sg.tauberian_fit(n**-1.5 * R**-n, R)
        logged = sg.tauberian_fit(n**-1.5 * np.log(np.maximum(n, 2)) ** -0.5 * R**-n, R)
        cfg = preset(5).with_alpha(alpha_star(5).alpha + 0.05)
        sol = fp.classify(cfg)
        real = sg.tauberian_fit(green_series_freeprod(cfg, 2000), sol.R)
        return pure, logged, real, sol.classification

    (pure, logged, real, cls), dt = _timed(run)
    ok = (
        dt < 180
        and pure.model == "b0" and abs(pure.exponents["a"] - 1.5) <= 0.02
        and logged.model == "b_half" and abs(logged.exponents["a"] - 1.5) <= 0.02
        and cls == fp.NON_DEGENERATE_DIVERGENT
        and real.model == "b0" and 1.35 <= real.exponents["a"] <= 1.65
    )
    return ok, {
        "synthetic_pure": [pure.model, pure.exponents["a"]],
        "synthetic_log": [logged.model, logged.exponents["a"]],
        "real": [real.model, real.exponents["a"], real.exponents["a_free"], real.exponents["b_free"]],
        "seconds": dt,
    }


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 11)}


def strip_timing(detail):
    """Drop wall-clock fields, which are the only intended run-to-run difference."""
    if isinstance(detail, dict):
        return {k: strip_timing(v) for k, v in detail.items() if k != "seconds"}
    return detail


def digest() -> str:
    out = {}
    for k, fn in CRITERIA.items():
        ok, detail = fn()
        out[str(k)] = {"ok": ok, "detail": strip_timing(detail)}
    return canonical_json(out)


if __name__ == "__main__":
    if "--digest" in sys.argv:
        print(digest())
    else:
        for k, fn in CRITERIA.items():
            ok, detail = fn()
            print(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {canonical_json(detail)}")
