"""Singular behaviour of the free-product Green function near ``r = R``.

At a critical weight the walk is degenerate along one factor ``j`` and every
singular quantity is driven by ``delta = 1 - zeta_j(r)``.  The default
profile route parametrizes the approach to ``R`` by ``delta`` and writes each
difference against the value at ``R`` as an integral of a derivative over
``[1 - delta, 1]``.  Nothing is obtained by subtracting two nearly equal
numbers, so the geometric grid ``R - r = R 2^-k`` can be pushed far past the
``k ~ 22`` limit of direct evaluation.  The direct route is kept as a
cross-check.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from numpy.polynomial import legendre as L
from scipy.optimize import brentq

from .errors import (
    DegenerateDesignMatrix,
    DomainError,
    PreconditionFailed,
    UpstreamAccuracy,
    WindowTooShort,
)
from .freeprod import (
    DEGENERATE_DIVERGENT,
    NON_DEGENERATE_DIVERGENT,
    FreeProductConfig,
    SpectralSolution,
    _classify_cached,
    factor_moments,
    green_at_t,
    t_of_r,
    zeta_at_t,
)
from .lattice import CoefficientSeries, FactorMeasure, GreenPoint, green_eval, green_eval_near_one
from .provenance import config_hash

DEFAULT_K = (4, 22)
DEEP_K_MAX = 300
RATIO_DRIFT = 0.20
CHAIN_DRIFT = 0.25
CLOSED_FORM_RATIO = 0.15
CLOSED_FORM_CHAIN = 0.30
EXPONENT_DRIFT = 0.05
TAUBERIAN_MIN_LENGTH = 500
TAUBERIAN_A_FLOOR = 0.02

# sub-step of the central difference for d/dr(r^2 I_j), as a power of the grid ratio
_FD_STEP = 2.0 ** (1 / 16)
_PANEL_NODES = 8
# factor-o shifts below this use a second-order Taylor expansion
_TAYLOR_SHIFT = 1e-7

MODEL_HALF = "inv_sqrt"
MODEL_THIRD = "inv_cuberoot"
MODEL_XLOG = "inv_sqrt_xlog"
MODELS = (MODEL_HALF, MODEL_THIRD, MODEL_XLOG)

COLUMNS = (
    "k", "r", "eps", "G", "dG", "G1", "G2",
    "zeta_j", "delta", "Gj", "dGj", "Gj1", "Gj2",
    "Ij_factor", "dIj_factor", "Ij1", "Ij2", "X", "dX",
)


# ---------------------------------------------------------------------------
# Profile container
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SingularProfile:
    """Rows approaching ``R`` geometrically.

    Columns (arrays of equal length):
    ``eps = R - r``, ``G, G1, G2`` (free-product ``G, G', G''``),
    ``dG = G(R) - G(r)``, ``zeta_j`` and ``delta = 1 - zeta_j``,
    ``Gj, Gj1, Gj2`` (factor Green triple at ``zeta_j``), ``dGj = G_j(1) - G_j(zeta_j)``,
    ``Ij_factor = zeta G_j' + G_j`` and its drop ``dIj_factor`` below the value at 1,
    ``Ij1, Ij2`` (free-product ``I_j^(1), I_j^(2)``),
    ``X = R^2 I_j^(1)(R) - r^2 I_j^(1)(r)`` and ``dX = d/dr (r^2 I_j^(1)(r))``.
    """

    columns: dict[str, np.ndarray]
    meta: dict[str, Any] = field(default_factory=dict)

    def __getattr__(self, name):
        cols = self.__dict__.get("columns", {})
        if name in cols:
            return cols[name]
        raise AttributeError(name)

    def __len__(self) -> int:
        return len(self.columns["eps"])

    @classmethod
    def from_columns(cls, meta: dict | None = None, **cols) -> "SingularProfile":
        arrays = {k: np.asarray(v, dtype=float) for k, v in cols.items()}
        order = np.argsort(-arrays["eps"], kind="stable")
        return cls({k: v[order] for k, v in arrays.items()}, dict(meta or {}))

    def rows(self) -> list[dict[str, float]]:
        names = [c for c in COLUMNS if c in self.columns]
        return [{c: float(self.columns[c][i]) for c in names} for i in range(len(self))]

    def final_decade(self) -> np.ndarray:
        """Mask of rows whose ``R - r`` lies within a factor 10 of the smallest one."""
        eps = self.columns["eps"]
        return eps <= 10 * eps.min() * (1 + 1e-12)


@dataclass(frozen=True)
class FitReport:
    model: str
    exponents: dict[str, float]
    constant: float
    residual: float
    drift: float
    threshold: float
    verdict: bool
    details: dict[str, Any] = field(default_factory=dict)
    config_hash: str = ""

    def to_json(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "exponents": dict(self.exponents),
            "constant": self.constant,
            "residual": self.residual,
            "drift": self.drift,
            "threshold": self.threshold,
            "verdict": "pass" if self.verdict else "fail",
            "details": self.details,
            "config_hash": self.config_hash,
        }


# ---------------------------------------------------------------------------
# Critical data at R
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Critical:
    cfg: FreeProductConfig
    sol: SpectralSolution
    j: int  # degenerate factor, 0-based
    o: int
    alpha_j: float
    alpha_o: float
    m_j: FactorMeasure
    m_o: FactorMeasure
    theta_j: float
    G1j_at_1: float  # G_j'(1)
    I_j_at_1: float  # G_j'(1) + G_j(1)
    f_j_at_1: float  # Psi_j(theta_j)
    s_o: float
    g_o: GreenPoint  # factor o at zeta_o(R)

    @property
    def dimension(self) -> int:
        return self.m_j.dimension


def _critical(cfg: FreeProductConfig) -> _Critical:
    sol = _classify_cached(cfg)
    if sol.classification != DEGENERATE_DIVERGENT or len(sol.degenerate_along) != 1:
        raise PreconditionFailed(
            f"profile needs a critical configuration degenerate along one factor, got {sol.classification}"
        )
    j = sol.degenerate_along[0] - 1
    o = 1 - j
    ms, al = cfg.factors, cfg.weights
    if ms[j].cosine_form is None:
        raise DomainError("the degenerate factor must be a cosine-sum measure")
    g1 = green_eval(ms[j], 1.0)
    I1 = g1.d1 + g1.value
    s_o = al[o] * sol.theta
    return _Critical(
        cfg, sol, j, o, al[j], al[o], ms[j], ms[o],
        g1.value, g1.d1, I1, g1.value**2 / I1,
        s_o, green_eval(ms[o], sol.zeta_at_R[o]),
    )


def _phi_derivs(g: GreenPoint) -> tuple[float, float]:
    z, G, G1, G2 = g.r, g.value, g.d1, g.d2
    den = z * G1 + G
    return G1 / den, (G * G2 - 2 * G1**2) / den**3


def _other_factor(c: _Critical, tau: float) -> tuple[float, float, float, float, float]:
    """Factor ``o`` at ``s = s_o - alpha_o tau``.

    Returns ``(Phi_o(s_o) - Phi_o(s), Psi_o(s) - Psi_o(s_o), Phi_o'(s), Phi_o''(s), zeta_o)``.
    """
    h = c.alpha_o * tau
    p1, p2 = _phi_derivs(c.g_o)
    if h < _TAYLOR_SHIFT:
        # Psi' = -s Phi''
        return p1 * h - 0.5 * p2 * h * h, c.s_o * p2 * h, p1 - p2 * h, p2, c.g_o.r - h / (c.g_o.d1 * c.g_o.r + c.g_o.value)
    s = c.s_o - h
    z = c.g_o.r
    # Newton on z G(z) = s; the map is increasing and convex
    for _ in range(60):
        g = green_eval(c.m_o, z)
        step = (z * g.value - s) / (z * g.d1 + g.value)
        z -= step
        if abs(step) <= 1e-16 * max(z, 1e-300):
            break
    g = green_eval(c.m_o, z)
    q1, q2 = _phi_derivs(g)
    psi = g.value**2 / (z * g.d1 + g.value)
    psi0 = c.g_o.value**2 / (c.g_o.r * c.g_o.d1 + c.g_o.value)
    return c.g_o.value - g.value, psi - psi0, q1, q2, z


# ---------------------------------------------------------------------------
# Cumulative integrals on geometric panels in log(delta)
# ---------------------------------------------------------------------------


def _integration_matrix(n: int) -> tuple[np.ndarray, np.ndarray]:
    """GL nodes on [-1, 1] and the map from node values to Legendre antiderivative coefficients."""
    x, _ = L.leggauss(n)
    Vinv = np.linalg.inv(L.legvander(x, n - 1))
    A = np.zeros((n + 1, n))
    for col in range(n):
        A[:, col] = L.legint(Vinv[:, col], lbnd=-1)
    return x, A


class _Cumulative:
    """Piecewise-Legendre antiderivative ``F(x) = start + int_{x_0}^x y`` on panels."""

    def __init__(self, lo: np.ndarray, hi: np.ndarray, A: np.ndarray, y: np.ndarray, start: float):
        half = 0.5 * (hi - lo)
        self.lo, self.hi, self.half = lo, hi, half
        self.coef = (y @ A.T) * half[:, None]
        totals = self.coef.sum(axis=1)  # P_n(1) = 1
        self.left = start + np.concatenate([[0.0], np.cumsum(totals)[:-1]])

    def __call__(self, x: float) -> float:
        p = int(np.clip(np.searchsorted(self.hi, x), 0, len(self.hi) - 1))
        xi = (x - self.lo[p]) / self.half[p] - 1.0
        return float(self.left[p] + L.legval(xi, self.coef[p]))

    def nodes(self, xi: np.ndarray) -> np.ndarray:
        return self.left[:, None] + L.legval(xi, self.coef.T)


def _tail(u0: float, y0: float, y1: float, x0: float, x1: float) -> float:
    """``int_0^{u0} h du`` from two integrand samples ``y = h u`` assuming ``h ~ u^p``."""
    if y0 == 0:
        return 0.0
    p = math.log(abs(y1 / y0)) / (x1 - x0) - 1.0
    return y0 / (1.0 + max(p, -0.9))


class _DeltaProfile:
    """Free-product quantities as functions of ``delta = 1 - zeta_j`` at a critical weight."""

    def __init__(self, cfg: FreeProductConfig, eps_min: float, u_max: float = 0.5, threads: int = 1):
        c = self.c = _critical(cfg)
        u_min = min(u_max, eps_min ** (2 / 3)) * 2.0**-60
        if u_min < 1e-290:
            raise DomainError("requested grid is too deep for double precision")
        n_panels = int(math.ceil(math.log2(u_max / u_min)))
        edges = math.log(u_max) - math.log(2.0) * np.arange(n_panels, -1, -1)
        lo, hi = edges[:-1], edges[1:]
        xi, A = _integration_matrix(_PANEL_NODES)
        xs = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * xi[None, :]
        us = np.exp(xs)
        trip = _map(lambda u: _factor_j_terms(c.m_j, u), us.ravel(), threads)
        T = np.array(trip).reshape(us.shape + (4,))
        # integrands in x = log u carry the Jacobian u
        self._fields = {}
        for idx, name in enumerate(("dGj", "H", "F", "dIj")):
            y = T[..., idx] * us
            start = _tail(us[0, 0], y[0, 0], y[0, 1], xs[0, 0], xs[0, 1])
            self._fields[name] = _Cumulative(lo, hi, A, y, start)
        # second pass: the rate d eps / d delta needs Psi at every node
        H = self._fields["H"].nodes(xi)
        F = self._fields["F"].nodes(xi)
        dGj = self._fields["dGj"].nodes(xi)
        rate = np.empty_like(us)
        for p in range(us.shape[0]):
            for q in range(us.shape[1]):
                st = self._state(float(H[p, q]), float(F[p, q]), float(dGj[p, q]))
                rate[p, q] = st["psi"] / st["G"] ** 2 * T[p, q, 1] / c.alpha_j
        y = rate * us
        start = _tail(us[0, 0], y[0, 0], y[0, 1], xs[0, 0], xs[0, 1])
        self.eps_of = _Cumulative(lo, hi, A, y, start)
        self.x_range = (float(lo[0]), float(hi[-1]))
        self.u_grid = us

    def _state(self, H: float, F: float, dGj: float) -> dict[str, float]:
        c = self.c
        tau = H / c.alpha_j
        dPhi_o, dPsi_o, p1_o, p2_o, z_o = _other_factor(c, tau)
        psi = dPsi_o - F
        G = c.sol.G_at_R - dPhi_o - dGj
        return {"tau": tau, "psi": psi, "G": G, "dG": dPhi_o + dGj, "p1_o": p1_o, "p2_o": p2_o, "zeta_o": z_o}

    def delta_at(self, eps: float) -> float:
        lo, hi = self.x_range
        target = math.log(eps)
        f = lambda x: math.log(self.eps_of(x)) - target
        if f(hi) < 0:
            raise DomainError(f"R - r = {eps} is beyond the integration range")
        if f(lo) > 0:
            raise DomainError(f"R - r = {eps} is below the integration range")
        return math.exp(brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200))

    def row(self, eps: float) -> dict[str, float]:
        c = self.c
        delta = self.delta_at(eps)
        x = math.log(delta)
        g = green_eval_near_one(c.m_j, delta)
        fields = {k: f(x) for k, f in self._fields.items()}
        st = self._state(fields["H"], fields["F"], fields["dGj"])
        z = 1.0 - delta
        pj1, pj2 = _phi_derivs(GreenPoint(z, g.value, g.d1, g.d2, 0.0))
        dphi = c.alpha_o * st["p1_o"] + c.alpha_j * pj1
        ddphi = c.alpha_o**2 * st["p2_o"] + c.alpha_j**2 * pj2
        G, R = st["G"], c.sol.R
        r = R - eps
        G1 = G**2 * dphi / st["psi"]
        I1 = r * G1 + G
        G2 = (ddphi * I1**3 + 2 * G1**2) / G
        return _assemble(c, eps, r, G, st["dG"], G1, G2, delta, g, fields["dGj"], fields["dIj"])


def _factor_j_terms(m: FactorMeasure, u: float) -> tuple[float, ...]:
    """``(G_j', I_j, f', I_j')`` at ``zeta = 1 - u`` for the cumulative integrals."""
    g = green_eval_near_one(m, u)
    z = 1.0 - u
    G, G1, G2 = g.value, g.d1, g.d2
    I = G + z * G1
    dI = 2 * G1 + z * G2
    # f = G^2 / I  (Psi_j along the factor), f' = G (2 G' I - G I') / I^2
    fprime = G * (2 * G1 * I - G * dI) / I**2
    return G1, I, fprime, dI


def _assemble(c: _Critical, eps, r, G, dG, G1, G2, delta, g: GreenPoint, dGj, dIj) -> dict[str, float]:
    z = 1.0 - delta
    Ij_factor, Ij2_factor = factor_moments(GreenPoint(z, g.value, g.d1, g.d2, 0.0))
    ratio = G / g.value
    # r G / G_j(zeta) = zeta / alpha_j, so r^2 I_j^(1) = (zeta / alpha_j)^2 I_{G_j}(zeta)
    X = (dIj + (2 * delta - delta * delta) * Ij_factor) / c.alpha_j**2
    return {
        "r": r, "eps": eps, "G": G, "dG": dG, "G1": G1, "G2": G2,
        "zeta_j": z, "delta": delta, "Gj": g.value, "dGj": dGj, "Gj1": g.d1, "Gj2": g.d2,
        "Ij_factor": Ij_factor, "dIj_factor": dIj,
        "Ij1": ratio**2 * Ij_factor, "Ij2": ratio**3 * Ij2_factor, "X": X,
    }


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# Direct route (cross-check, shallow grids only)
# ---------------------------------------------------------------------------


class _DirectProfile:
    def __init__(self, cfg: FreeProductConfig, require_critical: bool = True):
        sol = _classify_cached(cfg)
        if require_critical:
            self.c = _critical(cfg)
        elif sol.classification == NON_DEGENERATE_DIVERGENT or sol.divergent:
            self.c = None
        else:
            raise PreconditionFailed("the direct profile needs a divergent configuration")
        self.cfg, self.sol = cfg, sol

    def row(self, eps: float) -> dict[str, float]:
        cfg, sol = self.cfg, self.sol
        r = sol.R - eps
        t = t_of_r(cfg, r, sol)
        g = green_at_t(cfg, t, sol)
        out = {"r": r, "eps": eps, "G": g.value, "dG": sol.G_at_R - g.value, "G1": g.d1, "G2": g.d2}
        c = self.c
        if c is None:
            return out
        z = zeta_at_t(cfg, c.j + 1, t)
        gj = green_eval(c.m_j, z)
        I_f, _ = factor_moments(gj)
        dGj = c.theta_j - gj.value
        dIj = c.I_j_at_1 - I_f
        acc = 4 * np.finfo(float).eps * max(sol.G_at_R, c.I_j_at_1) + gj.accuracy * max(1.0, gj.value)
        if acc > 0.1 * min(out["dG"], dGj):
            raise UpstreamAccuracy(
                f"accuracy {acc:.1e} exceeds 10% of the resolved increment at R - r = {eps:.3e}"
            )
        return _assemble(c, eps, r, g.value, out["dG"], g.d1, g.d2, 1.0 - z, gj, dGj, dIj)


# ---------------------------------------------------------------------------
# Public profile builder
# ---------------------------------------------------------------------------


def _profile_meta(cfg: FreeProductConfig, sol: SpectralSolution, method: str, ks, c: _Critical | None) -> dict:
    meta = {
        "method": method,
        "k_min": int(ks[0]),
        "k_max": int(ks[-1]),
        "R": sol.R,
        "G_at_R": sol.G_at_R,
        "theta": sol.theta,
        "alpha": cfg.alpha,
        "classification": sol.classification,
        "config_hash": config_hash(cfg.to_json()),
    }
    if c is not None:
        meta.update(
            degenerate_factor=c.j + 1,
            dimension=c.dimension,
            alpha_j=c.alpha_j,
            Gj_at_1=c.theta_j,
            Gj1_at_1=c.G1j_at_1,
            Ij_at_1=c.I_j_at_1,
        )
    else:
        meta["dimension"] = max(m.dimension for m in cfg.factors)
    return meta


def build_profile(
    cfg: FreeProductConfig,
    k_min: int = DEFAULT_K[0],
    k_max: int = DEFAULT_K[1],
    method: str = "integral",
    threads: int = 1,
) -> SingularProfile:
    """Profile at ``R - r = R 2^-k`` for ``k = k_min..k_max``.

    ``method="integral"`` (default) uses the delta parametrization and reaches
    ``k`` in the hundreds; ``method="direct"`` evaluates ``green_freeprod``
    and ``zeta`` at each ``r`` and is limited to ``k`` of about 22.  The direct
    route also accepts non-degenerate divergent weights, for which only the
    free-product columns are filled.
    """
    if k_min < 1 or k_max < k_min:
        raise DomainError("need 1 <= k_min <= k_max")
    sol = _classify_cached(cfg)
    ks = np.arange(k_min, k_max + 1)
    eps = sol.R * 2.0 ** -ks.astype(float)
    if method == "integral":
        prof = _DeltaProfile(cfg, float(eps[-1]), threads=threads)
        c = prof.c
    elif method == "direct":
        prof = _DirectProfile(cfg, require_critical=sol.classification == DEGENERATE_DIVERGENT)
        c = prof.c
    else:
        raise DomainError(f"unknown profile method {method!r}")

    def one(e):
        row = prof.row(e)
        if c is not None:
            hi, lo = prof.row(e * _FD_STEP), prof.row(e / _FD_STEP)
            # X is a function of eps = R - r, and d/dr = d/d eps here
            row["dX"] = (hi["X"] - lo["X"]) / (hi["eps"] - lo["eps"])
        return row

    rows = _map(one, list(eps), threads)
    cols = {name: np.array([row[name] for row in rows]) for name in rows[0]}
    cols["k"] = ks.astype(float)
    return SingularProfile(cols, _profile_meta(cfg, sol, method, ks, c))


# ---------------------------------------------------------------------------
# Ratio laws
# ---------------------------------------------------------------------------


def _drift(ratio: np.ndarray, mask: np.ndarray) -> tuple[float, float]:
    tail = ratio[mask]
    ref = float(tail[-1])
    return float((tail.max() - tail.min()) / abs(ref)), ref


def _ratio_report(
    profile: SingularProfile,
    law: str,
    lhs: np.ndarray,
    rhs: np.ndarray,
    threshold: float,
    reference: float | None = None,
    reference_tol: float | None = None,
) -> FitReport:
    ratio = lhs / rhs
    mask = profile.final_decade()
    if mask.sum() < 2:
        raise DegenerateDesignMatrix("the final decade holds fewer than two rows")
    drift, ref = _drift(ratio, mask)
    details: dict[str, Any] = {"ratios": ratio.tolist(), "rows_in_final_decade": int(mask.sum())}
    verdict = drift < threshold
    if reference is not None:
        rel = abs(ref / reference - 1.0)
        details.update(reference=reference, reference_rel_err=rel)
        if reference_tol is not None:
            details["reference_tol"] = reference_tol
            verdict = verdict and rel < reference_tol
    return FitReport(
        model=law,
        exponents={},
        constant=ref,
        residual=float(np.std(ratio[mask]) / abs(ref)),
        drift=drift,
        threshold=threshold,
        verdict=bool(verdict),
        details=details,
        config_hash=profile.meta.get("config_hash", ""),
    )


def check_ratio_laws(
    profile: SingularProfile,
    d: int | None = None,
    threshold: float = RATIO_DRIFT,
    closed_form_tol: float = CLOSED_FORM_RATIO,
) -> list[FitReport]:
    """Ratio stabilization of the first-order asymptotic relations at a critical weight.

    Laws: ``zeta_vs_factor_green`` (constant ``1/G_j'(1)``, also checked within
    15%), ``green_vs_zeta`` (constant ``I_{G_j}(1) / (alpha_j R)``, reported),
    then for d = 5 ``moment_vs_sqrt_zeta`` and ``inverse_derivative_sqrt`` and
    for d = 6 ``moment_vs_zeta_log`` and ``inverse_derivative_xlogx``.
    """
    meta = profile.meta
    d = d if d is not None else meta.get("dimension")
    if d not in (5, 6):
        raise DomainError("ratio laws are implemented for d = 5 and d = 6")
    p = profile
    reports = []
    g1 = meta.get("Gj1_at_1")
    reports.append(
        _ratio_report(p, "zeta_vs_factor_green", p.delta, p.dGj, threshold,
                      None if g1 is None else 1.0 / g1, closed_form_tol)
    )
    c5 = None
    if "Ij_at_1" in meta:
        c5 = meta["Ij_at_1"] / (meta["alpha_j"] * meta["R"])
    reports.append(_ratio_report(p, "green_vs_zeta", p.dG, p.delta, threshold, c5))
    if d == 5:
        reports.append(_ratio_report(p, "moment_vs_sqrt_zeta", p.dIj_factor, np.sqrt(p.delta), threshold))
        reports.append(_ratio_report(p, "inverse_derivative_sqrt", 1.0 / p.G1, np.sqrt(p.dG), threshold))
    else:
        reports.append(_ratio_report(p, "moment_vs_zeta_log", p.dIj_factor, -p.delta * np.log(p.delta), threshold))
        reports.append(
            _ratio_report(p, "inverse_derivative_xlogx", 1.0 / p.G1, -p.dG * np.log(p.dG), threshold)
        )
    return reports


# ---------------------------------------------------------------------------
# Model selection for G'
# ---------------------------------------------------------------------------


def _model_shape(model: str, eps: np.ndarray) -> np.ndarray:
    """log of the model shape, so that ``log G' = log c + shape``."""
    if model == MODEL_HALF:
        return -0.5 * np.log(eps)
    if model == MODEL_THIRD:
        return -np.log(eps) / 3.0
    if model == MODEL_XLOG:
        return -0.5 * np.log(-eps * np.log(eps))
    raise DomainError(f"unknown model {model!r}")


def _free_exponent(eps: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least squares of ``y = log c - a log eps``; returns ``(a, log c, stderr(a))``."""
    X = np.vstack([np.ones_like(eps), -np.log(eps)]).T
    coef, res, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 2:
        raise DegenerateDesignMatrix("free-exponent design matrix is rank deficient")
    dof = len(y) - 2
    resid = y - X @ coef
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(X.T @ X)
    return float(coef[1]), float(coef[0]), float(math.sqrt(cov[1, 1]))


def expected_model(profile: SingularProfile) -> str | None:
    meta = profile.meta
    if meta.get("classification") == NON_DEGENERATE_DIVERGENT:
        return MODEL_HALF
    return {5: MODEL_THIRD, 6: MODEL_XLOG}.get(meta.get("dimension"))


def fit_green_singularity(
    profile: SingularProfile,
    d: int | None = None,
    window: np.ndarray | None = None,
    expected: str | None = None,
    threshold: float = EXPONENT_DRIFT,
) -> FitReport:
    """Select among the three candidate laws for ``G'`` by least squares in log space.

    Fits use the final decade unless ``window`` (a boolean mask) is given.
    ``drift`` is the spread of the local exponents between consecutive rows
    of the window.
    """
    if len(profile) < 12:
        raise DegenerateDesignMatrix(f"profile has {len(profile)} rows, at least 12 are needed")
    mask = profile.final_decade() if window is None else np.asarray(window, bool)
    if mask.sum() < 3:
        raise DegenerateDesignMatrix("fit window holds fewer than three rows")
    eps = profile.eps[mask]
    y = np.log(profile.G1[mask])
    residuals, constants = {}, {}
    for model in MODELS:
        z = y - _model_shape(model, eps)
        constants[model] = float(np.exp(z.mean()))
        residuals[model] = float(np.sqrt(np.mean((z - z.mean()) ** 2)))
    best = min(MODELS, key=lambda m: residuals[m])
    a, logc, a_err = _free_exponent(eps, y)
    # local exponents between consecutive rows of the window
    local = -np.diff(y) / np.diff(np.log(eps))
    drift = float(local.max() - local.min())
    if expected is None:
        if d is not None and d != profile.meta.get("dimension"):
            expected = {5: MODEL_THIRD, 6: MODEL_XLOG}.get(d)
        else:
            expected = expected_model(profile)
    floor = max(residuals[best], 1e-300)
    verdict = (expected is None or best == expected) and drift < threshold
    return FitReport(
        model=best,
        exponents={"a": a, "a_stderr": a_err},
        constant=constants[best],
        residual=residuals[best],
        drift=drift,
        threshold=threshold,
        verdict=bool(verdict),
        details={
            "expected_model": expected,
            "residuals": residuals,
            "constants": constants,
            "residual_factor": {m: residuals[m] / floor for m in MODELS},
            "free_fit_constant": math.exp(logc),
            "local_exponents": local.tolist(),
            "rows": int(mask.sum()),
            "eps_range": [float(eps.min()), float(eps.max())],
        },
        config_hash=profile.meta.get("config_hash", ""),
    )


# ---------------------------------------------------------------------------
# Second-order chain
# ---------------------------------------------------------------------------


def second_order_constants(cfg: FreeProductConfig) -> dict[str, float]:
    """Closed-form constants of the second-order relations at a critical weight.

    ``c_i = alpha_i^2 G_i / (zeta G_i' + G_i)^3`` at ``zeta_i(R)``; the
    derivative relation for ``G''`` then has constant ``R^3 c_j / G(R)``.
    """
    c = _critical(cfg)
    sol = c.sol
    cs = {}
    for i, (a, m) in enumerate(zip(cfg.weights, cfg.factors)):
        g = green_eval(m, sol.zeta_at_R[i])
        cs[i] = a**2 * g.value / (g.r * g.d1 + g.value) ** 3
    R, GR = sol.R, sol.G_at_R
    c_j = cs[c.j]
    # free-product I_j^(1)(R) = (G(R) / G_j(1))^2 I_{G_j}(1)
    Ij1_R = (GR / c.theta_j) ** 2 * c.I_j_at_1
    prop = R**3 * c_j / GR
    lemma = 2 * R**2 / Ij1_R
    # I_j^(2) ~ (G(R)/G_j(1))^3 G_j''/2 near the singularity
    cor = prop / (lemma * (GR / c.theta_j) ** 3 / 2)
    return {"c1": cs[0], "c2": cs[1], "c_degenerate": c_j, "proposition": prop, "lemma": lemma, "corollary": cor}


def check_second_order_chain(
    cfg: FreeProductConfig,
    profile: SingularProfile | None = None,
    k_min: int = DEFAULT_K[0],
    k_max: int = DEFAULT_K[1],
    threshold: float = CHAIN_DRIFT,
    closed_form_tol: float = CLOSED_FORM_CHAIN,
) -> list[FitReport]:
    """Ratio stabilization of the three second-order relations.

    ``G''/(G'^3 G_j'')`` (checked against ``R^3 c_j / G(R)`` within 30%),
    ``d/dr(r^2 I_j^(1)) / (G' I_j^(2))`` and ``(G''/G'^2) / d/dr(r^2 I_j^(1))``
    (drift below 25%).
    """
    sol = _classify_cached(cfg)
    if sol.classification != DEGENERATE_DIVERGENT:
        raise PreconditionFailed(f"second-order chain needs a critical weight, got {sol.classification}")
    consts = second_order_constants(cfg)
    p = profile if profile is not None else build_profile(cfg, k_min, k_max)
    if "dX" not in p.columns:
        raise PreconditionFailed("profile lacks the d/dr(r^2 I_j) column")
    dense = np.abs(p.dX) * np.finfo(float).eps * 1e3
    if np.any(dense > 0.1 * np.abs(p.dX)):
        raise UpstreamAccuracy("finite-difference column is dominated by rounding")
    return [
        _ratio_report(p, "second_derivative_vs_factor", p.G2, p.G1**3 * p.Gj2, threshold,
                      consts["proposition"], closed_form_tol),
        _ratio_report(p, "moment_derivative", p.dX, p.G1 * p.Ij2, threshold, consts["lemma"]),
        _ratio_report(p, "second_derivative_vs_moment_derivative", p.G2 / p.G1**2, p.dX, threshold,
                      consts["corollary"]),
    ]


# ---------------------------------------------------------------------------
# Coefficient-side exponent fits
# ---------------------------------------------------------------------------


def _ls(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise DegenerateDesignMatrix("tauberian design matrix is rank deficient")
    resid = y - X @ coef
    dof = max(len(y) - X.shape[1], 1)
    cov = float(resid @ resid) / dof * np.linalg.inv(X.T @ X)
    return coef, float(np.sqrt(np.mean(resid**2))), np.sqrt(np.diag(cov))


def _tauberian_fits(n: np.ndarray, y: np.ndarray) -> dict[str, dict[str, float]]:
    ln, lln = np.log(n), np.log(np.log(n))
    one = np.ones_like(ln)
    out = {}
    for name, b in (("b0", 0.0), ("b_half", 0.5)):
        coef, res, se = _ls(np.vstack([one, -ln]).T, y + b * lln)
        out[name] = {"a": float(coef[1]), "b": b, "logC": float(coef[0]), "residual": res, "a_stderr": float(se[1])}
    coef, res, se = _ls(np.vstack([one, -ln, -lln]).T, y)
    out["free"] = {
        "a": float(coef[1]), "b": float(coef[2]), "logC": float(coef[0]), "residual": res,
        "a_stderr": float(se[1]), "b_stderr": float(se[2]),
    }
    return out


def tauberian_fit(
    series: CoefficientSeries | Sequence[float],
    R: float,
    n_min: int | None = None,
    period: int = 1,
    meta: dict | None = None,
    a_floor: float = TAUBERIAN_A_FLOOR,
) -> FitReport:
    """Fit ``log(c_n R^n) = log C - a log n - b log log n`` on a trailing window.

    The window is ``n_min..N`` (default the last three quarters).  Models with
    ``b = 0`` and ``b = 1/2`` are compared by RMS residual and a free ``(a, b)``
    fit is reported.  The verdict checks window-halving stability: the
    preferred model's ``a`` on the trailing half of the window must stay within
    ``max(stderr, 0.02)`` of the full-window value.  ``period = 2`` keeps even
    indices only.
    """
    c = series.as_float() if isinstance(series, CoefficientSeries) else np.asarray(series, float)
    N = len(c) - 1
    if len(c) < TAUBERIAN_MIN_LENGTH:
        raise WindowTooShort(f"series length {len(c)} below {TAUBERIAN_MIN_LENGTH}")
    n_min = max(n_min if n_min is not None else N // 4, 3)
    n = np.arange(n_min, N + 1)
    n = n[n % period == 0]
    cn = c[n]
    if np.any(cn <= 0):
        raise DomainError("tauberian fit needs positive coefficients on the window")
    y = np.log(cn) + n * math.log(R)
    fits = _tauberian_fits(n.astype(float), y)
    preferred = "b0" if fits["b0"]["residual"] <= fits["b_half"]["residual"] else "b_half"
    half = n >= n[len(n) // 2]
    fits_half = _tauberian_fits(n[half].astype(float), y[half])
    a, a_half = fits[preferred]["a"], fits_half[preferred]["a"]
    unc = max(fits[preferred]["a_stderr"], a_floor)
    drift = abs(a - a_half)
    b_res = fits["b_half"]["residual"]
    return FitReport(
        model=preferred,
        exponents={"a": a, "b": fits[preferred]["b"], "a_free": fits["free"]["a"], "b_free": fits["free"]["b"]},
        constant=math.exp(fits[preferred]["logC"]),
        residual=fits[preferred]["residual"],
        drift=drift,
        threshold=unc,
        verdict=bool(drift < unc),
        details={
            "fits": fits,
            "half_window_fits": fits_half,
            "window": [int(n[0]), int(n[-1])],
            "residual_ratio_b0_over_b_half": fits["b0"]["residual"] / b_res if b_res > 0 else math.inf,
            "uncertainty": unc,
            "period": period,
            **(meta or {}),
        },
        config_hash=(meta or {}).get("config_hash", ""),
    )


# ---------------------------------------------------------------------------
# Synthetic profiles for calibration
# ---------------------------------------------------------------------------


def synthetic_profile(
    law: Callable[[np.ndarray], np.ndarray],
    k_min: int = 4,
    k_max: int = 22,
    R: float = 1.0,
    noise: float = 0.0,
    seed: int = 0,
    meta: dict | None = None,
) -> SingularProfile:
    """A profile whose ``G'`` column is ``law(R - r)`` times optional log-normal noise.

    The remaining columns are filled so that each ratio law of d = 5 holds
    exactly: ``delta = eps^(2/3)``, ``dGj = delta``, ``dG = delta``,
    ``dIj_factor = sqrt(delta)``.
    """
    ks = np.arange(k_min, k_max + 1).astype(float)
    eps = R * 2.0**-ks
    G1 = np.asarray(law(eps), float)
    if noise:
        rng = np.random.default_rng(seed)
        G1 = G1 * np.exp(noise * rng.standard_normal(len(eps)))
    delta = eps ** (2 / 3)
    return SingularProfile.from_columns(
        meta={"dimension": 5, "classification": DEGENERATE_DIVERGENT, **(meta or {})},
        k=ks, eps=eps, r=R - eps, G1=G1, delta=delta, dGj=delta, dG=delta,
        dIj_factor=np.sqrt(delta),
    )


def profile_csv(profile: SingularProfile) -> str:
    names = [c for c in COLUMNS if c in profile.columns]
    lines = [",".join(names)]
    for row in profile.rows():
        lines.append(",".join(repr(row[c]) if c != "k" else str(int(row[c])) for c in names))
    return "\n".join(lines) + "\n"
