"""Green functions of adapted walks on a free product Z^{d1} * Z^{d2}.

The walk is driven by ``mu = alpha mu_1 + (1 - alpha) mu_2``.  Everything is
expressed through the implicit functions

    G(r) = Phi(r G(r)),            Psi(t) = Phi(t) - t Phi'(t),
    Phi(t) = Phi_1(a1 t) + Phi_2(a2 t) - 1,

where ``Phi_i`` is obtained from the factor Green function by inverting
``t = r G_i(r)``.  The free-product Green function at ``r`` is evaluated by
locating ``t = r G(r)`` on ``[0, theta]``, which keeps every quantity a
smooth function of well-conditioned factor evaluations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DomainError,
    InfiniteFlag,
    NoConvergence,
    NoSignChange,
    RootBracketFailure,
    ValidationError,
)
from .lattice import FactorMeasure, GreenPoint, green_eval, theta_of_factor, validate_factor

EPS_CRITICAL = 1e-9
THETA_TOL = 1e-12

NON_DEGENERATE_DIVERGENT = "NonDegenerateDivergent"
DEGENERATE_DIVERGENT = "DegenerateDivergent"
DEGENERATE_CONVERGENT = "DegenerateConvergent"


@dataclass(frozen=True)
class FreeProductConfig:
    factor1: FactorMeasure
    factor2: FactorMeasure
    alpha: float
    alpha_exact: Fraction | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValidationError(f"alpha = {self.alpha} must lie in (0, 1)")

    @property
    def weights(self) -> tuple[float, float]:
        """``(alpha_1, alpha_2)``."""
        return self.alpha, 1.0 - self.alpha

    @property
    def factors(self) -> tuple[FactorMeasure, FactorMeasure]:
        return self.factor1, self.factor2

    def swapped(self) -> "FreeProductConfig":
        ex = None if self.alpha_exact is None else 1 - self.alpha_exact
        return FreeProductConfig(self.factor2, self.factor1, 1.0 - self.alpha, ex)

    def with_alpha(self, alpha: float) -> "FreeProductConfig":
        return FreeProductConfig(self.factor1, self.factor2, float(alpha))

    def to_json(self) -> dict[str, Any]:
        alpha = str(self.alpha_exact) if self.alpha_exact is not None else repr(self.alpha)
        return {"factor1": self.factor1.to_json(), "factor2": self.factor2.to_json(), "alpha": alpha}


def make_config(factor1, factor2, alpha) -> FreeProductConfig:
    exact = None
    if isinstance(alpha, (Fraction, str)):
        try:
            exact = Fraction(alpha)
        except ValueError as exc:
            raise ValidationError(f"invalid alpha {alpha!r}") from exc
    elif isinstance(alpha, int):
        exact = Fraction(alpha)
    return FreeProductConfig(
        validate_factor(factor1), validate_factor(factor2), float(alpha if exact is None else exact), exact
    )


def config_from_json(doc: dict) -> FreeProductConfig:
    unknown = set(doc) - {"factor1", "factor2", "alpha"}
    if unknown:
        raise ValidationError(f"unknown keys in config: {sorted(unknown)}")
    try:
        return make_config(doc["factor1"], doc["factor2"], doc.get("alpha", "1/2"))
    except KeyError as exc:
        raise ValidationError(f"config is missing {exc}") from exc


def load_config(path) -> FreeProductConfig:
    with open(path) as fh:
        return config_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# Per-factor implicit functions
# ---------------------------------------------------------------------------


@lru_cache(maxsize=100_000)
def factor_radius_at(m: FactorMeasure, t: float) -> float:
    """The ``r`` in [0, 1] with ``r G_m(r) = t``."""
    theta = theta_of_factor(m)
    if t < 0 or t > theta * (1 + THETA_TOL):
        raise DomainError(f"t = {t} outside [0, theta = {theta}]")
    if t == 0:
        return 0.0
    if t >= theta:
        return 1.0
    return brentq(lambda r: r * green_eval(m, r).value - t, 0.0, 1.0, xtol=1e-16, rtol=1e-15, maxiter=200)


def phi_factor(m: FactorMeasure, t: float) -> float:
    """``Phi_i(t) = G_i(r(t))``."""
    return green_eval(m, factor_radius_at(m, t)).value


def _phi_derivs_from_green(g: GreenPoint) -> tuple[float, float]:
    r, G, G1, G2 = g.r, g.value, g.d1, g.d2
    if math.isinf(G1):
        raise InfiniteFlag(f"G' is infinite at r = {r}; Phi'' is not available")
    den = r * G1 + G
    d1 = G1 / den
    d2 = math.inf if math.isinf(G2) else (G * G2 - 2 * G1**2) / den**3
    return d1, d2


def phi_factor_derivs(m: FactorMeasure, t: float) -> tuple[float, float]:
    """``(Phi_i'(t), Phi_i''(t))``; ``Phi''`` is ``inf`` where ``G''`` diverges."""
    return _phi_derivs_from_green(green_eval(m, factor_radius_at(m, t)))


def _psi_from_green(g: GreenPoint) -> float:
    if math.isinf(g.d1):
        return 0.0
    return g.value**2 / (g.r * g.d1 + g.value)


def psi_factor(m: FactorMeasure, t: float) -> float:
    """``Psi_i(t) = G^2 / (r G' + G)`` at ``t = r G(r)``."""
    return _psi_from_green(green_eval(m, factor_radius_at(m, t)))


def psi_factor_via_phi(m: FactorMeasure, t: float) -> float:
    """``Psi_i(t) = Phi_i(t) - t Phi_i'(t)`` evaluated literally."""
    g = green_eval(m, factor_radius_at(m, t))
    if math.isinf(g.d1):
        # Phi' -> 1 / r at the singular endpoint
        return g.value - t / g.r
    d1, _ = _phi_derivs_from_green(g)
    return g.value - t * d1


# ---------------------------------------------------------------------------
# Combined functions
# ---------------------------------------------------------------------------


def _factor_args(cfg: FreeProductConfig, t: float) -> tuple[float, float]:
    """``(alpha_1 t, alpha_2 t)``, with rounding overshoot past ``theta_i`` clipped."""
    out = []
    for a, m in zip(cfg.weights, cfg.factors):
        s, th = a * t, theta_of_factor(m)
        out.append(th if th < s <= th * (1 + THETA_TOL) else s)
    return out[0], out[1]


def phi_combined(cfg: FreeProductConfig, t: float) -> float:
    s1, s2 = _factor_args(cfg, t)
    return phi_factor(cfg.factor1, s1) + phi_factor(cfg.factor2, s2) - 1.0


def phi_combined_derivs(cfg: FreeProductConfig, t: float) -> tuple[float, float]:
    a1, a2 = cfg.weights
    s1, s2 = _factor_args(cfg, t)
    p1 = phi_factor_derivs(cfg.factor1, s1)
    p2 = phi_factor_derivs(cfg.factor2, s2)
    return a1 * p1[0] + a2 * p2[0], a1**2 * p1[1] + a2**2 * p2[1]


def psi_combined(cfg: FreeProductConfig, t: float) -> float:
    s1, s2 = _factor_args(cfg, t)
    return psi_factor(cfg.factor1, s1) + psi_factor(cfg.factor2, s2) - 1.0


@dataclass(frozen=True)
class ThetaBar:
    theta_bar: float
    alpha_c: float
    argmin: int


def theta_bar(cfg: FreeProductConfig) -> ThetaBar:
    """``min(theta_1 / alpha, theta_2 / (1 - alpha))`` and the crossover weight."""
    th1, th2 = theta_of_factor(cfg.factor1), theta_of_factor(cfg.factor2)
    a1, a2 = cfg.weights
    q1, q2 = th1 / a1, th2 / a2
    return ThetaBar(min(q1, q2), th1 / (th1 + th2), 1 if q1 <= q2 else 2)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralSolution:
    theta: float
    theta_bar: float
    R: float
    G_at_R: float
    zeta_at_R: tuple[float, float]
    psi_at_theta_bar: float
    classification: str
    degenerate_along: tuple[int, ...]
    alpha: float = 0.0

    @property
    def divergent(self) -> bool:
        return self.classification != DEGENERATE_CONVERGENT


def classify(cfg: FreeProductConfig, eps_c: float = EPS_CRITICAL) -> SpectralSolution:
    """Sign of ``Psi(theta_bar)`` and the resulting spectral data at ``R``."""
    for m in cfg.factors:
        if m.dimension < 3:
            raise DomainError("classification needs transient factors (d >= 3)")
    tb = theta_bar(cfg)
    s = psi_combined(cfg, tb.theta_bar)
    if s < -eps_c:
        kind = NON_DEGENERATE_DIVERGENT
        f = lambda t: psi_combined(cfg, t)
        lo = tb.theta_bar * 1e-6
        if not (f(lo) > 0 > s):
            raise RootBracketFailure("Psi has no sign change on [theta_bar/1e6, theta_bar]")
        theta = brentq(f, lo, tb.theta_bar, xtol=1e-15, rtol=1e-15, maxiter=300)
    else:
        kind = DEGENERATE_DIVERGENT if s <= eps_c else DEGENERATE_CONVERGENT
        theta = tb.theta_bar
    G_R = phi_combined(cfg, theta)
    R = theta / G_R
    a1, a2 = cfg.weights
    s1, s2 = _factor_args(cfg, theta)
    zetas = (factor_radius_at(cfg.factor1, s1), factor_radius_at(cfg.factor2, s2))
    if kind == NON_DEGENERATE_DIVERGENT:
        along: tuple[int, ...] = ()
    else:
        th = (theta_of_factor(cfg.factor1) / a1, theta_of_factor(cfg.factor2) / a2)
        along = tuple(i + 1 for i in range(2) if th[i] <= tb.theta_bar * (1 + THETA_TOL))
    return SpectralSolution(
        theta=theta,
        theta_bar=tb.theta_bar,
        R=R,
        G_at_R=G_R,
        zeta_at_R=zetas,
        psi_at_theta_bar=s,
        classification=kind,
        degenerate_along=along,
        alpha=cfg.alpha,
    )


@lru_cache(maxsize=256)
def _classify_cached(cfg: FreeProductConfig) -> SpectralSolution:
    return classify(cfg)


# ---------------------------------------------------------------------------
# Free-product Green function
# ---------------------------------------------------------------------------


def t_of_r(cfg: FreeProductConfig, r: float, sol: SpectralSolution | None = None) -> float:
    """Smallest ``t`` with ``t / Phi(t) = r``, i.e. ``t = r G(r)``."""
    sol = sol or _classify_cached(cfg)
    if r < 0:
        raise DomainError("r must be nonnegative")
    if r > sol.R * (1 + 1e-13):
        raise NoConvergence(f"r = {r} exceeds the radius of convergence R = {sol.R}")
    if r == 0:
        return 0.0
    if r >= sol.R:
        return sol.theta
    return brentq(
        lambda t: t / phi_combined(cfg, t) - r, 0.0, sol.theta, xtol=1e-16, rtol=1e-15, maxiter=300
    )


@dataclass(frozen=True)
class FreeGreenPoint(GreenPoint):
    """A :class:`GreenPoint` that also records ``t = r G(r)`` and ``Psi(t)``."""

    t: float = 0.0
    psi: float = 1.0


def green_at_t(cfg: FreeProductConfig, t: float, sol: SpectralSolution | None = None) -> FreeGreenPoint:
    """Free-product ``G, G', G''`` at the ``r`` whose ``r G(r)`` equals ``t``."""
    sol = sol or _classify_cached(cfg)
    G = phi_combined(cfg, t)
    r = t / G
    psi = psi_combined(cfg, t)
    critical = t >= sol.theta and sol.divergent
    if critical:
        return FreeGreenPoint(r, G, math.inf, math.inf, 0.0, t, psi)
    dphi, ddphi = phi_combined_derivs(cfg, t)
    # G' (1 - r Phi') = G Phi' and 1 - r Phi' = Psi / G
    G1 = G**2 * dphi / psi
    I1 = r * G1 + G
    G2 = (ddphi * I1**3 + 2 * G1**2) / G
    return FreeGreenPoint(r, G, G1, G2, 0.0, t, psi)


def green_freeprod(cfg: FreeProductConfig, r: float, sol: SpectralSolution | None = None) -> FreeGreenPoint:
    """``G(r), G'(r), G''(r)`` for the free-product walk, 0 <= r <= R."""
    sol = sol or _classify_cached(cfg)
    if r == 0:
        a1, a2 = cfg.weights
        c1 = a1 * float(cfg.factor1.origin_weight) + a2 * float(cfg.factor2.origin_weight)
        g = green_at_t(cfg, 0.0, sol)
        return FreeGreenPoint(0.0, 1.0, c1, g.d2, 0.0, 0.0, 1.0)
    t = t_of_r(cfg, r, sol)
    g = green_at_t(cfg, t, sol)
    # report the requested r, not the reconstructed one
    return FreeGreenPoint(float(r), g.value, g.d1, g.d2, abs(g.r - r), t, g.psi)


def zeta_at_t(cfg: FreeProductConfig, i: int, t: float) -> float:
    s = _factor_args(cfg, t)[i - 1]
    m = cfg.factors[i - 1]
    if s > theta_of_factor(m) * (1 + THETA_TOL):
        raise DomainError(f"alpha_{i} r G(r) exceeds theta_{i}")
    return factor_radius_at(m, s)


def zeta(cfg: FreeProductConfig, i: int, r: float, sol: SpectralSolution | None = None) -> float:
    """``zeta_i(r)``, defined by ``zeta G_i(zeta) = alpha_i r G(r)``."""
    if i not in (1, 2):
        raise DomainError("factor index must be 1 or 2")
    return zeta_at_t(cfg, i, t_of_r(cfg, r, sol))


# ---------------------------------------------------------------------------
# Moment sums I^(k), I^(k)_i, J^(2)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentReport:
    r: float
    I1: float
    I2: float
    I1_i: tuple[float, float]
    I2_i: tuple[float, float]
    I1_factor: tuple[float, float]
    I2_factor: tuple[float, float]
    J2: float
    divergent: bool
    spectrally_positive_recurrent: bool


def factor_moments(g: GreenPoint) -> tuple[float, float]:
    """``I_{G_i}^(1)`` and ``I_{G_i}^(2)`` of a factor at ``zeta = g.r``."""
    z, G, G1, G2 = g.r, g.value, g.d1, g.d2
    i1 = z * G1 + G
    # 2 z I^(2) = 2 z G + 4 z^2 G' + z^3 G''
    i2 = G + 2 * z * G1 + z * z * G2 / 2
    return i1, i2


def moments_I_J(cfg: FreeProductConfig, r: float, sol: SpectralSolution | None = None) -> MomentReport:
    """Moment sums at ``r``; ``inf`` marks divergence at ``r = R``."""
    sol = sol or _classify_cached(cfg)
    t = t_of_r(cfg, r, sol)
    g = green_at_t(cfg, t, sol) if r > 0 else green_freeprod(cfg, 0.0, sol)
    G = g.value
    I1 = r * g.d1 + G if math.isfinite(g.d1) else math.inf
    I2 = G + 2 * r * g.d1 + r * r * g.d2 / 2 if math.isfinite(g.d2) else math.inf
    if r == 0:
        I1, I2 = 1.0, 1.0
    i1f, i2f, i1, i2 = [], [], [], []
    for i, m in enumerate(cfg.factors, start=1):
        z = zeta_at_t(cfg, i, t)
        gi = green_eval(m, z)
        f1, f2 = factor_moments(gi)
        ratio = G / gi.value
        i1f.append(f1)
        i2f.append(f2)
        i1.append(ratio**2 * f1)
        i2.append(ratio**3 * f2)
    J2 = i2[0] + i2[1]
    divergent = math.isinf(I1)
    return MomentReport(
        r=float(r),
        I1=I1,
        I2=I2,
        I1_i=tuple(i1),
        I2_i=tuple(i2),
        I1_factor=tuple(i1f),
        I2_factor=tuple(i2f),
        J2=J2,
        divergent=divergent,
        spectrally_positive_recurrent=divergent and math.isfinite(J2),
    )


def solution_record(sol: SpectralSolution, mom: MomentReport) -> dict[str, Any]:
    """Flat JSON record for a spectral solution and its moments at ``R``."""
    return {
        "theta": sol.theta,
        "theta_bar": sol.theta_bar,
        "R": sol.R,
        "G_at_R": sol.G_at_R,
        "zeta1_at_R": sol.zeta_at_R[0],
        "zeta2_at_R": sol.zeta_at_R[1],
        "psi_at_theta_bar": sol.psi_at_theta_bar,
        "classification": sol.classification,
        "degenerate_along": list(sol.degenerate_along),
        "I1": mom.I1,
        "I2": mom.I2,
        "J2": mom.J2,
        "divergent": mom.divergent,
        "spr": mom.spectrally_positive_recurrent,
    }


# ---------------------------------------------------------------------------
# Critical weight
# ---------------------------------------------------------------------------


def psi_at_theta_bar(f1: FactorMeasure, f2: FactorMeasure, alpha: float) -> float:
    cfg = FreeProductConfig(f1, f2, float(alpha))
    return psi_combined(cfg, theta_bar(cfg).theta_bar)


@dataclass(frozen=True)
class AlphaStar:
    alpha: float
    solution: SpectralSolution
    bracket: tuple[float, float]
    root_count: int
    iterations: int


def find_alpha_star(
    f1: FactorMeasure,
    f2: FactorMeasure,
    bracket: tuple[float, float] | None = None,
    tol: float = 1e-10,
    delta: float = 0.01,
    scan_points: int = 33,
) -> AlphaStar:
    """Critical mixing weight where ``Psi(theta_bar)`` changes sign.

    Bisection is used throughout because ``alpha -> Psi(theta_bar)`` has a
    kink at ``alpha_c``.  Sign changes are first counted on a uniform scan of
    the bracket; the smallest root is refined.
    """
    th1, th2 = theta_of_factor(f1), theta_of_factor(f2)
    alpha_c = th1 / (th1 + th2)
    # Psi(theta_bar) < 0 at alpha_c itself, so alpha_c is a valid right end
    lo, hi = bracket if bracket is not None else (delta, alpha_c)
    if not 0 < lo < hi < 1:
        raise DomainError(f"invalid bracket ({lo}, {hi})")
    f = lambda a: psi_at_theta_bar(f1, f2, a)
    grid = np.linspace(lo, hi, scan_points)
    vals = [f(a) for a in grid]
    if vals[0] * vals[-1] > 0 and all(v * vals[0] > 0 for v in vals):
        raise NoSignChange(
            f"Psi(theta_bar) has the same sign at alpha = {lo} and alpha = {hi}"
        )
    changes = [k for k in range(len(grid) - 1) if vals[k] == 0 or vals[k] * vals[k + 1] < 0]
    k = changes[0]
    a, b = float(grid[k]), float(grid[k + 1])
    fa, fb = vals[k], vals[k + 1]
    if fa == 0:
        b, fb = a, fa
    it = 0
    best = (abs(fa), a) if abs(fa) < abs(fb) else (abs(fb), b)
    while it < 200 and b - a > 4e-16 * b:
        mid = 0.5 * (a + b)
        fm = f(mid)
        it += 1
        if abs(fm) < best[0]:
            best = (abs(fm), mid)
        if fm == 0:
            break
        if fa * fm < 0:
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    alpha = best[1]
    if best[0] >= tol:
        raise NoConvergence(f"|Psi(theta_bar)| = {best[0]:.3e} at alpha* exceeds tol {tol:.0e}")
    cfg = FreeProductConfig(f1, f2, alpha)
    sol = classify(cfg, eps_c=max(EPS_CRITICAL, tol))
    return AlphaStar(alpha, sol, (lo, hi), len(changes), it)
