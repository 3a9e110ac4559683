"""Finitely supported symmetric walks on Z^d.

Validation of step laws, characteristic functions, exact return
probabilities and Green functions ``G(r) = sum_n mu^{*n}(0) r^n`` together
with their first two derivatives.

Two quadrature routes are implemented.  Measures whose characteristic
function has the form ``b + sum_j a_j cos(theta_j)`` (lazy and simple walks,
axis-weighted variants) are reduced to a one dimensional integral

    G^{(k)}(r) = int_0^inf s^k e^{-s} M^{(k)}(r s) ds,
    M(u) = e^{u b} prod_j I_0(u a_j),

which is evaluated with composite Gauss-Legendre in ``log s`` plus an
asymptotic tail.  Everything else goes through a graded tensor
Gauss-Legendre rule on the torus with a cosine-sum model of matching
covariance subtracted near ``theta = 0``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Sequence

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ive

from .errors import (
    BudgetExceeded,
    DomainError,
    FitUnstable,
    InfiniteTheta,
    NegativeWeight,
    NotAdmissible,
    NotSymmetric,
    QuadratureNotConverged,
    ValidationError,
    WeightsNotProbability,
)

DEFAULT_MEMORY_CAP = 2 * 1024**3
DEFAULT_SERIES_ORDER = 4096
GREEN_TOL = 1e-9


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactorMeasure:
    """A validated finitely supported symmetric probability on Z^d.

    ``atoms`` is a sorted tuple of ``(point, weight)`` pairs with exact
    rational weights.  Instances are hashable so that Green function
    evaluations can be memoized per measure.
    """

    dimension: int
    atoms: tuple[tuple[tuple[int, ...], Fraction], ...]
    label: str = ""
    aperiodic: bool = field(default=True, compare=False)

    # inverse spectral radius; 1 for every symmetric walk on Z^d
    radius: float = field(default=1.0, compare=False)

    @property
    def points(self) -> np.ndarray:
        return np.array([p for p, _ in self.atoms], dtype=np.int64).reshape(-1, self.dimension)

    @property
    def weights(self) -> np.ndarray:
        return np.array([float(w) for _, w in self.atoms])

    @property
    def origin_weight(self) -> Fraction:
        zero = (0,) * self.dimension
        for p, w in self.atoms:
            if p == zero:
                return w
        return Fraction(0)

    @property
    def max_radius(self) -> int:
        """Largest sup-norm of a support point."""
        return max(max(abs(c) for c in p) for p, _ in self.atoms)

    @property
    def cosine_form(self) -> tuple[Fraction, tuple[Fraction, ...]] | None:
        """``(b, (a_1..a_d))`` when ``phi = b + sum a_j cos(theta_j)``, else None."""
        d = self.dimension
        b = Fraction(0)
        a = [Fraction(0)] * d
        for p, w in self.atoms:
            nz = [j for j, c in enumerate(p) if c != 0]
            if not nz:
                b += w
            elif len(nz) == 1 and abs(p[nz[0]]) == 1:
                a[nz[0]] += w
            else:
                return None
        return b, tuple(a)

    @property
    def axis_variances(self) -> np.ndarray:
        """Diagonal of the step covariance matrix."""
        return (self.weights[:, None] * self.points.astype(float) ** 2).sum(axis=0)

    @property
    def covariance(self) -> np.ndarray:
        x = self.points.astype(float)
        return (self.weights[:, None, None] * x[:, :, None] * x[:, None, :]).sum(axis=0)

    def to_json(self) -> dict[str, Any]:
        return {
            "dimension": self.dimension,
            "atoms": [{"x": list(p), "w": str(w)} for p, w in self.atoms],
            "label": self.label,
        }


@dataclass(frozen=True)
class GreenPoint:
    """Green function value and derivatives at ``r``; ``math.inf`` flags divergence."""

    r: float
    value: float
    d1: float
    d2: float
    accuracy: float = 0.0

    @property
    def finite(self) -> tuple[bool, bool, bool]:
        return (math.isfinite(self.value), math.isfinite(self.d1), math.isfinite(self.d2))


@dataclass(frozen=True)
class CoefficientSeries:
    """Truncated coefficient sequence ``c_0..c_N``.

    ``coefficients`` is a float array, or a tuple of Fractions in exact mode.
    """

    coefficients: Any
    radius_hint: float = 1.0

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def as_float(self) -> np.ndarray:
        return np.array([float(c) for c in self.coefficients])

    def __len__(self) -> int:
        return len(self.coefficients)

    def __getitem__(self, n):
        return self.coefficients[n]


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _parse_weight(w: Any) -> Fraction:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, bool):
        raise ValidationError(f"invalid weight {w!r}")
    if isinstance(w, int):
        return Fraction(w)
    if isinstance(w, float):
        return Fraction(repr(w))
    if isinstance(w, str):
        try:
            return Fraction(w.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"invalid weight {w!r}") from exc
    raise ValidationError(f"invalid weight {w!r}")


def _invariant_factors(vectors: list[tuple[int, ...]], d: int) -> list[int]:
    """Invariant factors of the lattice spanned by ``vectors`` in Z^d."""
    from sympy import Matrix, ZZ
    from sympy.matrices.normalforms import invariant_factors

    factors = invariant_factors(Matrix(vectors), domain=ZZ)
    return [abs(int(f)) for f in factors if int(f) != 0]


def _is_aperiodic(atoms: Sequence[tuple[tuple[int, ...], Fraction]], d: int) -> bool:
    # symmetric walks have period 1 or 2; period 2 iff some parity character
    # x -> v.x mod 2 maps every support point to 1
    if any(all(c == 0 for c in p) for p, _ in atoms):
        return True
    for v in itertools.product((0, 1), repeat=d):
        if all(sum(vi * xi for vi, xi in zip(v, p)) % 2 == 1 for p, _ in atoms):
            return False
    return True


def validate_factor(raw: Any) -> FactorMeasure:
    """Validate a raw measure description and return a :class:`FactorMeasure`.

    ``raw`` is a mapping ``{"dimension": d, "atoms": [{"x": [...], "w": ...}],
    "label": str}``.  Weights may be exact rationals (``"1/12"``), decimals or
    numbers; duplicate atoms are merged and zero weights dropped.
    """
    if isinstance(raw, FactorMeasure):
        raw = raw.to_json()
    if not isinstance(raw, dict):
        raise ValidationError("factor description must be a JSON object")
    unknown = set(raw) - {"dimension", "atoms", "label"}
    if unknown:
        raise ValidationError(f"unknown keys in factor description: {sorted(unknown)}")
    try:
        d = int(raw["dimension"])
        atoms_raw = raw["atoms"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError("factor description needs 'dimension' and 'atoms'") from exc
    if d < 1:
        raise ValidationError("dimension must be >= 1")
    if not atoms_raw:
        raise ValidationError("support must be nonempty")

    merged: dict[tuple[int, ...], Fraction] = {}
    for atom in atoms_raw:
        try:
            x = tuple(int(c) for c in atom["x"])
            w = _parse_weight(atom["w"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed atom {atom!r}") from exc
        if len(x) != d:
            raise ValidationError(f"atom {list(x)} has wrong dimension (expected {d})")
        if w < 0:
            raise NegativeWeight(f"negative weight {w} at {list(x)}")
        merged[x] = merged.get(x, Fraction(0)) + w
    merged = {x: w for x, w in merged.items() if w > 0}
    if not merged:
        raise WeightsNotProbability("all weights are zero")

    total = sum(merged.values())
    if abs(float(total) - 1.0) > 1e-12:
        raise WeightsNotProbability(f"weights sum to {float(total)!r}, not 1")

    for x, w in merged.items():
        neg = tuple(-c for c in x)
        if merged.get(neg) != w:
            raise NotSymmetric(f"mu({list(x)}) = {w} but mu({list(neg)}) = {merged.get(neg, 0)}")

    nonzero = [x for x in merged if any(x)]
    if not nonzero:
        raise NotAdmissible("support is the origin only")
    inv = _invariant_factors(nonzero, d)
    if len(inv) < d or any(f != 1 for f in inv):
        index = math.prod(inv) if len(inv) == d else math.inf
        raise NotAdmissible(f"support generates a sublattice of index {index}")

    atoms = tuple(sorted(merged.items()))
    return FactorMeasure(
        dimension=d,
        atoms=atoms,
        label=str(raw.get("label", "")),
        aperiodic=_is_aperiodic(atoms, d),
    )


def load_factor(path) -> FactorMeasure:
    with open(path) as fh:
        return validate_factor(json.load(fh))


def lazy_srw(d: int, hold: Fraction | str = Fraction(1, 2), label: str | None = None) -> FactorMeasure:
    """Lazy simple random walk on Z^d holding with probability ``hold``."""
    hold = Fraction(hold)
    step = (1 - hold) / (2 * d)
    atoms = []
    if hold:
        atoms.append({"x": [0] * d, "w": hold})
    for j in range(d):
        for sgn in (1, -1):
            x = [0] * d
            x[j] = sgn
            atoms.append({"x": x, "w": step})
    return validate_factor({"dimension": d, "atoms": atoms, "label": label or f"lazy-srw-Z{d}"})


def srw(d: int) -> FactorMeasure:
    return lazy_srw(d, hold=Fraction(0), label=f"srw-Z{d}")


# ---------------------------------------------------------------------------
# Characteristic function
# ---------------------------------------------------------------------------


def char_function(m: FactorMeasure, theta) -> np.ndarray | float:
    """``phi(theta) = sum_x mu(x) cos(theta . x)``; ``theta`` has trailing axis d."""
    th = np.asarray(theta, dtype=float)
    scalar = th.ndim == 1
    th = np.atleast_2d(th)
    if th.shape[-1] != m.dimension:
        raise DomainError(f"theta must have {m.dimension} components")
    val = np.cos(th @ m.points.T.astype(float)) @ m.weights
    return float(val[0]) if scalar else val


# ---------------------------------------------------------------------------
# Exact return series
# ---------------------------------------------------------------------------


def _cos_moments(n_max: int, exact: bool) -> list:
    """``E[cos(theta)^k]`` for k = 0..n_max, theta uniform on the circle."""
    out = []
    for k in range(n_max + 1):
        if k % 2:
            out.append(Fraction(0) if exact else 0.0)
        else:
            c = Fraction(math.comb(k, k // 2), 2**k)
            out.append(c if exact else float(c))
    return out


def _binomial_mix(p, mom_a: list, mom_b: list, n_max: int, exact: bool) -> list:
    """Moments of ``p X + (1 - p) Y`` for independent X, Y with given moments."""
    if exact:
        q = 1 - p
        out = []
        for n in range(n_max + 1):
            s = Fraction(0)
            for k in range(n + 1):
                if mom_a[k] and mom_b[n - k]:
                    s += math.comb(n, k) * p**k * q ** (n - k) * mom_a[k] * mom_b[n - k]
            out.append(s)
        return out
    from scipy.stats import binom

    a = np.asarray(mom_a, dtype=float)
    b = np.asarray(mom_b, dtype=float)
    out = np.empty(n_max + 1)
    p = float(p)
    for n in range(n_max + 1):
        k = np.arange(n + 1)
        out[n] = np.dot(binom.pmf(k, n, p), a[: n + 1] * b[n::-1]) if 0 < p < 1 else (
            a[n] if p == 1 else b[n]
        )
    return list(out)


def _cosine_return_series(b: Fraction, a: Sequence[Fraction], N: int, exact: bool) -> list:
    # phi = b + A * sum_j (a_j / A) cos(theta_j); mix the axes one at a time,
    # then the holding part. Every term is nonnegative, so no cancellation.
    A = sum(a)
    cos_m = _cos_moments(N, exact)
    mom = cos_m
    acc = a[0]
    for aj in a[1:]:
        p = aj / (acc + aj)
        mom = _binomial_mix(p, cos_m, mom, N, exact)
        acc += aj
    if b == 0:
        return mom
    one = [Fraction(1) if exact else 1.0] * (N + 1)
    # moments of the constant 1 are all 1
    return _binomial_mix(A, mom, one, N, exact)


def _box_return_series(m: FactorMeasure, N: int, exact: bool, memory_cap: int) -> list:
    # mu^{*n}(0) = sum_x mu^{*a}(x) mu^{*b}(x), a + b = n (mu symmetric),
    # so the box only has to reach radius ceil(N/2) * max_radius.
    d = m.dimension
    half = (N + 1) // 2
    rad = half * m.max_radius
    side = 2 * rad + 1
    itemsize = 8 if not exact else 64
    if 3 * side**d * itemsize > memory_cap:
        raise BudgetExceeded(
            f"convolution box of side {side} in dimension {d} exceeds the memory cap"
        )
    if exact:
        den = 1
        for _, w in m.atoms:
            den = den * w.denominator // math.gcd(den, w.denominator)
        ints = [(p, int(w * den)) for p, w in m.atoms]
        dtype = object
    else:
        ints = [(p, float(w)) for p, w in m.atoms]
        dtype = float

    def step(arr, r_old):
        r_new = r_old + m.max_radius
        out = np.zeros((2 * r_new + 1,) * d, dtype=dtype)
        if exact:
            out[...] = 0
        for p, w in ints:
            sl = tuple(slice(r_new - r_old + c, r_new - r_old + c + 2 * r_old + 1) for c in p)
            out[sl] = out[sl] + w * arr
        return out, r_new

    def inner(x, y, rx, ry):
        # both centered; the smaller box sits inside the larger one
        if rx < ry:
            x, y, rx, ry = y, x, ry, rx
        sl = tuple(slice(rx - ry, rx + ry + 1) for _ in range(d))
        return (x[sl] * y).sum()

    arr = np.ones((1,) * d, dtype=dtype)
    if exact:
        arr[...] = 1
    r = 0
    # c_{2a} = <p_a, p_a> and c_{2a+1} = <p_a, p_{a+1}>: two live powers suffice
    out = []
    for n in range(N + 1):
        if n % 2:
            nxt, rn = step(arr, r)
            val = inner(arr, nxt, r, rn)
            arr, r = nxt, rn
        else:
            val = inner(arr, arr, r, r)
        if exact:
            val = Fraction(int(val), den**n)
        out.append(val if exact else float(val))
    return out


def return_series(
    m: FactorMeasure,
    N: int = DEFAULT_SERIES_ORDER,
    exact: bool = False,
    memory_cap: int = DEFAULT_MEMORY_CAP,
) -> CoefficientSeries:
    """Exact return probabilities ``c_n = mu^{*n}(0)``, n = 0..N.

    Cosine-sum measures use a moment recursion that costs O(d N^2);
    other measures are convolved on a growing box, which raises
    :class:`BudgetExceeded` once the box would exceed ``memory_cap`` bytes.
    """
    if N < 0:
        raise DomainError("N must be >= 0")
    form = m.cosine_form
    if form is not None:
        b, a = form
        coeffs = _cosine_return_series(b, a, N, exact)
    else:
        coeffs = _box_return_series(m, N, exact, memory_cap)
    if exact:
        return CoefficientSeries(tuple(coeffs), radius_hint=1.0)
    return CoefficientSeries(np.asarray(coeffs, dtype=float), radius_hint=1.0)


# ---------------------------------------------------------------------------
# Green function quadrature
# ---------------------------------------------------------------------------

_GL_NODES = {n: leggauss(n) for n in (6, 10, 12, 16, 20)}


def _bessel_green(
    b: float, a: np.ndarray, r: float, nodes: int, eps: float | None = None
) -> tuple[list[float], bool]:
    """G, G', G'' for ``phi = b + sum a_j cos``; second value says a tail was added.

    ``eps = 1 - r`` may be passed separately so that it keeps full relative
    precision when ``r`` rounds to 1.
    """
    d = len(a)
    eps = 1.0 - r if eps is None else eps
    s_max = 1e7 / (r * a.min())
    s_cut = min(45.0 / eps, s_max) if eps > 0 else s_max
    v_lo, v_hi = -40.0, math.log(s_cut)
    n_pan = int(math.ceil(v_hi - v_lo))
    x, w = _GL_NODES[nodes]
    edges = np.linspace(v_lo, v_hi, n_pan + 1)
    half = np.diff(edges) / 2
    mid = (edges[1:] + edges[:-1]) / 2
    v = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    s = np.exp(v)

    X = r * s[:, None] * a[None, :]
    i0 = ive(0, X)
    P = np.prod(i0, axis=1) * np.exp(-s * eps)
    rho = ive(1, X) / i0
    small = X < 1e-6
    rho_over = np.where(small, 0.5 - X**2 / 16, rho / np.where(small, 1.0, X))
    L1 = b + (a * rho).sum(axis=1)
    dL1 = (a**2 * (1.0 - rho_over - rho**2)).sum(axis=1)
    shape = (np.ones_like(s), L1, L1**2 + dL1)

    vals = [float(np.sum(wt * s ** (k + 1) * P * shape[k])) for k in range(3)]
    tail = s_cut == s_max
    if tail:
        # s^k M^(k)(rs) e^{-s} ~ A s^{k-d/2} (1 + beta_k / s) e^{-eps s}
        A = float(np.prod((2 * math.pi * r * a) ** -0.5))
        beta0 = float((1.0 / a).sum()) / (8 * r)
        betas = (beta0, beta0 - d / (2 * r), beta0 - d / r)

        def J(q: float) -> float:
            if eps == 0:
                return math.inf if q >= -1 else s_max ** (q + 1) / (-(q + 1))
            return float(mpmath.gammainc(q + 1, eps * s_max)) * eps ** (-(q + 1))

        for k in range(3):
            p = k - d / 2
            lead = J(p)
            if math.isinf(lead):
                vals[k] = math.inf
            else:
                vals[k] += A * (lead + betas[k] * J(p - 1))
    return vals, tail


def _torus_rule(d: int, nodes: int, levels: int):
    """1-D graded Gauss-Legendre rule on [-pi, pi], refined toward 0."""
    x, w = _GL_NODES[nodes]
    cuts = [math.pi * 2.0**-j for j in range(levels + 1)]
    edges = sorted({-c for c in cuts} | set(cuts))
    pts, wts = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        h = (hi - lo) / 2
        pts.append((lo + hi) / 2 + h * x)
        wts.append(h * w)
    return np.concatenate(pts), np.concatenate(wts)


def _integrands(phi: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    den = 1.0 - r * phi
    with np.errstate(divide="ignore", invalid="ignore"):
        f0 = 1.0 / den
        f1 = phi / den**2
        f2 = 2 * phi**2 / den**3
    return f0, f1, f2


_MAX_TORUS_POINTS = 4 * 10**7


def _torus_green(m: FactorMeasure, r: float, nodes: int, levels: int) -> list[float]:
    d = m.dimension
    th1, w1 = _torus_rule(d, nodes, levels)
    n1 = len(th1)
    if n1**d > _MAX_TORUS_POINTS:
        raise BudgetExceeded(f"tensor rule with {n1}^{d} points exceeds the point budget")
    cov = m.covariance
    diagonal = np.allclose(cov, np.diag(np.diag(cov)))
    s = np.diag(cov)
    pts = m.points.astype(float)
    wts = m.weights
    totals = np.zeros(3)
    # chunk over the first axis to bound memory
    rest = [th1] * (d - 1)
    if d > 1:
        grids = np.meshgrid(*rest, indexing="ij")
        tail_th = np.stack([g.ravel() for g in grids], axis=-1)
        tail_w = np.ones(len(tail_th))
        for j, g in enumerate(np.meshgrid(*([w1] * (d - 1)), indexing="ij")):
            tail_w = tail_w * g.ravel()
    else:
        tail_th = np.zeros((1, 0))
        tail_w = np.ones(1)
    for t0, w0 in zip(th1, w1):
        th = np.concatenate([np.full((len(tail_th), 1), t0), tail_th], axis=1)
        phi = np.cos(th @ pts.T) @ wts
        fs = _integrands(phi, r)
        if diagonal:
            phim = (1.0 - s.sum()) + np.cos(th) @ s
            fm = _integrands(phim, r)
            fs = [np.where(np.isfinite(f) & np.isfinite(g), f - g, 0.0) for f, g in zip(fs, fm)]
        else:
            fs = [np.where(np.isfinite(f), f, 0.0) for f in fs]
        for k in range(3):
            totals[k] += w0 * np.dot(tail_w, fs[k])
    totals /= (2 * math.pi) ** d
    out = list(totals)
    if diagonal:
        model, _ = _bessel_green(1.0 - float(s.sum()), s, r, 20) if r > 0 else ([1, 0, 0], False)
        out = [o + mo for o, mo in zip(out, model)]
    return out


def _zero_point(m: FactorMeasure) -> GreenPoint:
    c = return_series(m, 2, exact=True)
    return GreenPoint(0.0, 1.0, float(c[1]), 2 * float(c[2]), 0.0)


@lru_cache(maxsize=200_000)
def _green_cached(m: FactorMeasure, r: float, tol: float) -> GreenPoint:
    if r == 0:
        return _zero_point(m)
    form = m.cosine_form
    if form is not None:
        b, a = form
        a_ = np.array([float(aj) for aj in a])
        fine, _ = _bessel_green(float(b), a_, r, 20)
        coarse, _ = _bessel_green(float(b), a_, r, 12)
        # relative per component: G'' near r = 1 is large in absolute terms
        acc = max(
            (
                abs(f - c) / max(1.0, abs(f))
                for f, c in zip(fine, coarse)
                if math.isfinite(f) and math.isfinite(c)
            ),
            default=0.0,
        )
        if acc > tol:
            raise QuadratureNotConverged(f"Bessel quadrature accuracy {acc:.2e} above {tol:.0e}")
        return GreenPoint(r, float(fine[0]), float(fine[1]), float(fine[2]), float(acc))

    # general measure: flags from the dimension, values from the torus rule
    d = m.dimension
    flags = [r == 1 and d <= 2 * (k + 1) for k in range(3)]
    prev = None
    best = None
    for nodes in (6, 10, 16):
        cur = _torus_green(m, r, nodes, levels=12)
        if prev is not None:
            acc = max(
                abs(c - p)
                for c, p, fl in zip(cur, prev, flags)
                if not fl
            )
            best = (cur, acc)
            if acc < tol * max(1.0, abs(cur[0])):
                break
        prev = cur
    cur, acc = best
    if acc >= tol * max(1.0, abs(cur[0])):
        raise QuadratureNotConverged(f"torus quadrature accuracy {acc:.2e} above {tol:.0e}")
    vals = [math.inf if fl else v for v, fl in zip(cur, flags)]
    return GreenPoint(r, *(float(v) for v in vals), float(acc))


@lru_cache(maxsize=200_000)
def _green_near_one_cached(m: FactorMeasure, eps: float, tol: float) -> GreenPoint:
    b, a = m.cosine_form
    a_ = np.array([float(aj) for aj in a])
    r = 1.0 - eps
    fine, _ = _bessel_green(float(b), a_, r, 20, eps)
    coarse, _ = _bessel_green(float(b), a_, r, 12, eps)
    acc = max(
        (abs(f - c) / max(1.0, abs(f)) for f, c in zip(fine, coarse) if math.isfinite(f)),
        default=0.0,
    )
    if acc > tol:
        raise QuadratureNotConverged(f"Bessel quadrature accuracy {acc:.2e} above {tol:.0e}")
    return GreenPoint(r, float(fine[0]), float(fine[1]), float(fine[2]), float(acc))


def green_eval_near_one(m: FactorMeasure, eps: float, tol: float = GREEN_TOL) -> GreenPoint:
    """Green function at ``r = 1 - eps`` with ``eps`` given exactly.

    Only cosine-sum measures are supported; ``eps`` may be far below the
    double-precision spacing of 1.  The returned ``r`` field is the rounded
    value ``1 - eps``.
    """
    if m.cosine_form is None:
        raise DomainError("near-one evaluation needs a cosine-sum measure")
    eps = float(eps)
    if not 0 <= eps <= 1:
        raise DomainError(f"eps = {eps} outside [0, 1]")
    if eps == 1:
        return _zero_point(m)
    return _green_near_one_cached(m, eps, tol)


def green_eval(m: FactorMeasure, r: float, tol: float = GREEN_TOL) -> GreenPoint:
    """Green function ``G(r)``, ``G'(r)``, ``G''(r)`` of ``m`` for 0 <= r <= 1."""
    r = float(r)
    if r < 0 or r > 1:
        raise DomainError(f"r = {r} outside [0, 1]")
    return _green_cached(m, r, tol)


def theta_of_factor(m: FactorMeasure) -> float:
    """``theta_i = R_i G_i(R_i)`` with ``R_i = 1``."""
    if m.dimension <= 2:
        raise InfiniteTheta(f"G(1) is infinite for a recurrent walk on Z^{m.dimension}")
    return green_eval(m, 1.0).value


# ---------------------------------------------------------------------------
# Singular constants at r = 1
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SingularConstants:
    law: str
    derivative: int
    constant: float
    residual: float
    drift: float
    grid: tuple[float, ...]
    estimates: tuple[float, ...]
    karamata_constant: float | None = None
    llt_constant: float | None = None


def llt_constant(m: FactorMeasure) -> float:
    """``K`` in ``mu^{*n}(0) ~ K n^{-d/2}`` for an aperiodic walk."""
    d = m.dimension
    return float((2 * math.pi) ** (-d / 2) / math.sqrt(np.linalg.det(m.covariance)))


def karamata_constant(m: FactorMeasure, series: CoefficientSeries | None = None) -> float:
    """Singular constant predicted from the coefficient tail of ``m``.

    The tail constant ``K = lim c_n n^{d/2}`` is Richardson-extrapolated in
    ``1/n`` from the exact series, then pushed through the Abelian transfer
    ``sum n^s t^n ~ Gamma(s+1) (1-t)^{-s-1}`` (or ``-log(1-t)`` at s = -1).
    """
    d = m.dimension
    k = 1 if d in (3, 4) else 2
    if series is None:
        series = return_series(m, 2000)
    c = series.as_float()
    N = len(c) - 1
    ns = np.array([N // 2, 3 * N // 4, N])
    kn = c[ns] * ns ** (d / 2)
    # fit K + a/n + b/n^2 through three points
    V = np.vstack([np.ones(3), 1.0 / ns, 1.0 / ns**2]).T
    K = float(np.linalg.solve(V, kn)[0])
    sigma = k - d / 2
    if d % 2:
        return K * math.gamma(sigma + 1)
    return K


def factor_singular_constants(
    m: FactorMeasure, k_min: int = 8, k_max: int = 26, with_series: bool = True
) -> SingularConstants:
    """Constant of the leading singular law of ``m`` at ``t = 1``.

    d = 3, 4: ``G'``; d = 5, 6: ``G''``.  Odd d follow ``C (1-t)^{-1/2}``,
    even d follow ``-C log(1-t)``.  Local constant estimates are taken
    between consecutive points of the grid ``t = 1 - 2^{-k}``.
    """
    d = m.dimension
    if d not in (3, 4, 5, 6):
        raise DomainError("singular constants are defined for d in {3, 4, 5, 6}")
    if not m.aperiodic:
        raise DomainError("singular constants require an aperiodic measure")
    order = 1 if d in (3, 4) else 2
    power = d % 2 == 1
    ks = np.arange(k_min, k_max + 1)
    u = 2.0 ** -ks.astype(float)
    vals = np.array([(green_eval(m, 1.0 - ui).d1 if order == 1 else green_eval(m, 1.0 - ui).d2) for ui in u])
    if power:
        est = np.diff(vals) / np.diff(u**-0.5)
        law = f"(1-t)^(-1/2) for G{chr(39) * order}"
    else:
        est = np.diff(vals) / math.log(2.0)
        law = f"-log(1-t) for G{chr(39) * order}"
    # last decade: the final grid steps spanning a factor 10 in 1 - t
    tail = est[-4:]
    constant = float(tail[-1])
    drift = float((tail.max() - tail.min()) / abs(constant))
    residual = float(np.std(tail))
    kar = llt = None
    if with_series:
        kar = karamata_constant(m)
        K = llt_constant(m)
        llt = K * math.gamma(order - d / 2 + 1) if power else K
    if drift > 0.10:
        raise FitUnstable(f"singular constant drifts by {drift:.1%} over the last decade")
    return SingularConstants(
        law=law,
        derivative=order,
        constant=constant,
        residual=residual,
        drift=drift,
        grid=tuple(1.0 - u),
        estimates=tuple(est),
        karamata_constant=kar,
        llt_constant=llt,
    )
