"""Truncated power series for return probabilities on the free product.

Three independent routes to ``c_n = mu^{*n}(e)``:

* the analytic route: factor series, ``Phi_i`` by reversion of
  ``w = z G_i(z)``, the combined ``Phi`` and a Newton solve of
  ``g = Phi(z g)`` on truncated series;
* breadth-first propagation of the exact distribution over normal-form
  words (small ``n`` only);
* seeded Monte Carlo simulation of the word-reduced walk.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

import numpy as np

from .errors import BudgetExceeded, DomainError, InfiniteTheta, ReversionFailure
from .freeprod import FreeProductConfig, classify
from .lattice import CoefficientSeries, FactorMeasure, return_series

FLOAT_ORDER_CAP = 3000
RATIONAL_ORDER_CAP = 300
BFS_MAX_STEPS = 12
BFS_MAX_WORDS = 5_000_000
MC_SHARD = 1 << 18


# ---------------------------------------------------------------------------
# Truncated arithmetic on coefficient lists
# ---------------------------------------------------------------------------


def _zeros(n: int, exact: bool):
    return [Fraction(0)] * n if exact else np.zeros(n)


def _mul(a, b, n: int, exact: bool):
    """Product truncated to order ``n`` (``n + 1`` coefficients)."""
    if not exact:
        out = np.convolve(a[: n + 1], b[: n + 1])[: n + 1]
        if len(out) < n + 1:
            out = np.concatenate([out, np.zeros(n + 1 - len(out))])
        return out
    out = [Fraction(0)] * (n + 1)
    la, lb = min(len(a), n + 1), min(len(b), n + 1)
    for i in range(la):
        ai = a[i]
        if not ai:
            continue
        for j in range(min(lb, n + 1 - i)):
            if b[j]:
                out[i + j] += ai * b[j]
    return out


def _recip(a, n: int, exact: bool):
    """``1 / a`` to order ``n``; needs ``a[0] != 0``."""
    if a[0] == 0:
        raise ZeroDivisionError("series with zero constant term has no reciprocal")
    if exact:
        inv0 = 1 / Fraction(a[0])
        out = [inv0]
        for k in range(1, n + 1):
            s = sum((a[j] * out[k - j] for j in range(1, min(k, len(a) - 1) + 1)), Fraction(0))
            out.append(-s * inv0)
        return out
    a = np.asarray(a, dtype=float)
    aa = np.zeros(n + 1)
    aa[: min(len(a), n + 1)] = a[: n + 1]
    out = np.zeros(n + 1)
    out[0] = 1.0 / aa[0]
    for k in range(1, n + 1):
        out[k] = -np.dot(aa[1 : k + 1], out[k - 1 :: -1][:k]) * out[0]
    return out


def _compose(f, h, n: int, exact: bool):
    """``f(h(x))`` to order ``n`` for ``h(0) = 0`` (Brent-Kung baby step / giant step)."""
    if h[0] != 0:
        raise DomainError("inner series of a composition must vanish at 0")
    f = list(f[: n + 1]) if exact else np.asarray(f[: n + 1], dtype=float)
    m = len(f)
    k = max(1, math.isqrt(m - 1) + 1)
    one = _zeros(n + 1, exact)
    one[0] = Fraction(1) if exact else 1.0
    powers = [one]
    hh = list(h[: n + 1]) if exact else np.asarray(h[: n + 1], dtype=float)
    if len(hh) < n + 1:
        hh = list(hh) + [Fraction(0)] * (n + 1 - len(hh)) if exact else np.concatenate(
            [hh, np.zeros(n + 1 - len(hh))]
        )
    for _ in range(k):
        powers.append(_mul(powers[-1], hh, n, exact))
    giant = powers[k]
    blocks = -(-m // k)
    if exact:
        P = np.array(powers[:k], dtype=object)
        F = np.array([[f[j * k + i] if j * k + i < m else Fraction(0) for i in range(k)] for j in range(blocks)], dtype=object)
    else:
        P = np.array(powers[:k])
        F = np.zeros(blocks * k)
        F[:m] = f
        F = F.reshape(blocks, k)
    B = F @ P
    acc = list(B[-1]) if exact else B[-1]
    for j in range(blocks - 2, -1, -1):
        prod = _mul(acc, giant, n, exact)
        acc = [x + y for x, y in zip(prod, B[j])] if exact else prod + B[j]
    return list(acc) if exact else np.asarray(acc)


def _deriv(a, exact: bool):
    if exact:
        return [k * a[k] for k in range(1, len(a))] or [Fraction(0)]
    a = np.asarray(a, dtype=float)
    return a[1:] * np.arange(1, len(a)) if len(a) > 1 else np.zeros(1)


def _newton(step: Callable, g0, n: int, exact: bool):
    """Quadratically convergent solve; ``step(g, m)`` returns the update to order m."""
    g = g0
    prec = len(g0)
    while prec < n + 1:
        prec = min(2 * prec, n + 1)
        g = step(g, prec - 1)
    return g


# ---------------------------------------------------------------------------
# PowerSeries
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PowerSeries(CoefficientSeries):
    """Truncated power series in float or exact rational arithmetic."""

    exact: bool = False

    @classmethod
    def from_coefficients(cls, coeffs, exact: bool = False, radius_hint: float = 1.0) -> "PowerSeries":
        if exact:
            return cls(tuple(Fraction(c) for c in coeffs), radius_hint, True)
        return cls(np.asarray(coeffs, dtype=float), radius_hint, False)

    def _wrap(self, coeffs, radius_hint: float | None = None) -> "PowerSeries":
        return PowerSeries.from_coefficients(
            coeffs, self.exact, self.radius_hint if radius_hint is None else radius_hint
        )

    def _coerce(self, other: "PowerSeries") -> tuple[list, list, int]:
        if self.exact != other.exact:
            raise TypeError("cannot mix exact and float series")
        n = min(self.order, other.order)
        return list(self.coefficients[: n + 1]), list(other.coefficients[: n + 1]), n

    def __add__(self, other):
        if isinstance(other, PowerSeries):
            a, b, _ = self._coerce(other)
            return self._wrap([x + y for x, y in zip(a, b)])
        c = list(self.coefficients)
        c[0] = c[0] + other
        return self._wrap(c)

    def __neg__(self):
        return self._wrap([-x for x in self.coefficients])

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, PowerSeries):
            a, b, n = self._coerce(other)
            if not self.exact:
                a, b = np.asarray(a), np.asarray(b)
            return self._wrap(_mul(a, b, n, self.exact))
        return self._wrap([x * other for x in self.coefficients])

    __rmul__ = __mul__

    def truncate(self, n: int) -> "PowerSeries":
        return self._wrap(self.coefficients[: n + 1])

    def derivative(self) -> "PowerSeries":
        return self._wrap(_deriv(self.coefficients, self.exact))

    def reciprocal(self) -> "PowerSeries":
        return self._wrap(_recip(self.coefficients, self.order, self.exact))

    def scale(self, lam) -> "PowerSeries":
        """``f(lam x)``."""
        if self.exact:
            lam = Fraction(lam)
            return self._wrap([c * lam**k for k, c in enumerate(self.coefficients)])
        k = np.arange(len(self.coefficients))
        return self._wrap(np.asarray(self.coefficients) * float(lam) ** k)

    def compose(self, inner: "PowerSeries") -> "PowerSeries":
        """``self(inner(x))``; ``inner`` must have zero constant term."""
        a, b, n = self._coerce(inner)
        if not self.exact:
            a, b = np.asarray(a), np.asarray(b)
        return self._wrap(_compose(a, b, n, self.exact))

    def revert(self) -> "PowerSeries":
        """Compositional inverse ``g`` with ``self(g(w)) = w``."""
        f = self.coefficients
        if f[0] != 0 or len(f) < 2 or f[1] == 0:
            raise ReversionFailure("reversion needs f(0) = 0 and f'(0) != 0")
        n, ex = self.order, self.exact
        fc = list(f) if ex else np.asarray(f, dtype=float)
        df = _deriv(fc, ex)
        g0 = [Fraction(0), 1 / Fraction(f[1])] if ex else np.array([0.0, 1.0 / f[1]])

        def step(g, m):
            g = _pad(g, m, ex)
            fg = _compose(fc, g, m, ex)
            dfg = _compose(df, g, m, ex)
            resid = list(fg) if ex else fg.copy()
            resid[1] -= 1
            corr = _mul(resid, _recip(dfg, m, ex), m, ex)
            return [x - y for x, y in zip(g, corr)] if ex else g - corr

        return self._wrap(_newton(step, g0, n, ex))

    def __call__(self, x: float) -> float:
        acc = 0.0
        for c in reversed(list(self.coefficients)):
            acc = acc * x + float(c)
        return acc


def _pad(a, m: int, exact: bool):
    """``a`` extended with zeros (or cut) to ``m + 1`` coefficients."""
    if exact:
        a = list(a[: m + 1])
        return a + [Fraction(0)] * (m + 1 - len(a))
    out = np.zeros(m + 1)
    a = np.asarray(a, dtype=float)[: m + 1]
    out[: len(a)] = a
    return out


def _check_order(N: int, exact: bool) -> None:
    cap = RATIONAL_ORDER_CAP if exact else FLOAT_ORDER_CAP
    if N < 0 or N > cap:
        raise BudgetExceeded(f"series order {N} outside [0, {cap}] for {'rational' if exact else 'float'} mode")


# ---------------------------------------------------------------------------
# Analytic route
# ---------------------------------------------------------------------------


def series_from_factor(m: FactorMeasure, N: int, exact: bool = False) -> PowerSeries:
    """Factor Green function as a series: ``a_n = mu^{*n}(0)``."""
    s = return_series(m, N, exact=exact)
    return PowerSeries.from_coefficients(s.coefficients, exact, 1.0)


def phi_series(m: FactorMeasure, N: int, exact: bool = False) -> PowerSeries:
    """``Phi_i`` as a power series in ``t``, from ``G_i(r) = Phi_i(r G_i(r))``.

    ``z(w)`` is the reversion of ``w = z G_i(z)`` and ``Phi_i(w) = w / z(w)``.
    The coefficients grow geometrically (complex singularities lie well inside
    ``|t| < theta_i``), so float mode is only meaningful for small ``N``.
    """
    _check_order(N, exact)
    G = series_from_factor(m, N + 1, exact)
    zero = Fraction(0) if exact else 0.0
    W = PowerSeries.from_coefficients([zero] + list(G.coefficients[: N + 1]), exact)
    Z = W.revert()
    phi = PowerSeries.from_coefficients(Z.coefficients[1:], exact).reciprocal()
    return phi.truncate(N)


def _exact_alpha(cfg: FreeProductConfig) -> Fraction:
    return cfg.alpha_exact if cfg.alpha_exact is not None else Fraction(cfg.alpha)


def _series_via_phi(cfg: FreeProductConfig, N: int) -> list[Fraction]:
    """Exact Newton solve of ``g = Phi(z g)`` with ``Phi`` from reverted factor series."""
    a1 = _exact_alpha(cfg)
    P = None
    for a, m in zip((a1, 1 - a1), cfg.factors):
        term = phi_series(m, N, exact=True).scale(a)
        P = term if P is None else P + term
    Pc = list((P - 1).coefficients)
    dP = _deriv(Pc, True)

    def step(g, m):
        g = _pad(g, m, True)
        h = [Fraction(0)] + g[:m]
        Ph = _compose(Pc, h, m, True)
        dPh = _compose(dP, h, m, True)
        resid = [x - y for x, y in zip(g, Ph)]
        jac = [Fraction(1)] + [-c for c in dPh[:m]]
        corr = _mul(resid, _recip(jac, m, True), m, True)
        return [x - y for x, y in zip(g, corr)]

    return _newton(step, [Fraction(1)], N, True)


def _compose_pair(f, df, h, n: int):
    return _compose(f, h, n, False), _compose(df, h, n, False)


def _series_via_zeta(cfg: FreeProductConfig, N: int, rho: float) -> np.ndarray:
    """Float Newton solve for ``U_i(x) = zeta_i(rho x)``; returns ``G(rho x)``.

    Unknowns satisfy ``U_i G_i(U_i) = alpha_i rho x g`` and
    ``g = G_1(U_1) + G_2(U_2) - 1``.  Every composed series has nonnegative
    coefficients and unit-scale partial sums, so no cancellation occurs.
    """
    alphas = cfg.weights
    Gs = [np.asarray(series_from_factor(m, N).coefficients) for m in cfg.factors]
    dGs = [_deriv(G, False) for G in Gs]

    def parts(U, m):
        comps = [_compose_pair(G, dG, u, m) for G, dG, u in zip(Gs, dGs, U)]
        g = comps[0][0] + comps[1][0]
        g[0] -= 1.0
        return comps, g

    def step(U, m):
        U = [_pad(u, m, False) for u in U]
        comps, g = parts(U, m)
        xg = np.concatenate([[0.0], g[:m]])
        F = [_mul(u, c[0], m, False) - a * rho * xg for u, c, a in zip(U, comps, alphas)]
        # J_ij = delta_ij (G_i + U_i G_i')(U_i) - alpha_i rho x G_j'(U_j)
        xB = [np.concatenate([[0.0], c[1][:m]]) for c in comps]
        A = [c[0] + _mul(u, c[1], m, False) for u, c in zip(U, comps)]
        J11 = A[0] - alphas[0] * rho * xB[0]
        J12 = -alphas[0] * rho * xB[1]
        J21 = -alphas[1] * rho * xB[0]
        J22 = A[1] - alphas[1] * rho * xB[1]
        inv_det = _recip(_mul(J11, J22, m, False) - _mul(J12, J21, m, False), m, False)
        d1 = _mul(_mul(J22, F[0], m, False) - _mul(J12, F[1], m, False), inv_det, m, False)
        d2 = _mul(_mul(J11, F[1], m, False) - _mul(J21, F[0], m, False), inv_det, m, False)
        return [U[0] - d1, U[1] - d2]

    prec = 1
    U = [np.zeros(1), np.zeros(1)]
    while prec < N + 1:
        prec = min(2 * prec, N + 1)
        U = step(U, prec - 1)
    return parts([_pad(u, N, False) for u in U], N)[1]


def green_series_freeprod(
    cfg: FreeProductConfig, N: int = 2000, exact: bool = False, radius: float | None = None
) -> PowerSeries:
    """``c_n = mu_alpha^{*n}(e)`` for n = 0..N.

    Exact mode solves ``g = Phi(z g)`` by Newton iteration on rational series.
    The Taylor coefficients of ``Phi_i`` at 0 grow geometrically, so float mode
    instead solves the equivalent system in ``zeta_i`` on ``G(rho x)``, with
    ``rho`` defaulting to the radius ``R``.
    """
    _check_order(N, exact)
    if exact:
        return PowerSeries.from_coefficients(_series_via_phi(cfg, N), True, 1.0)
    if radius is None:
        try:
            radius = classify(cfg).R
        except (InfiniteTheta, DomainError):
            radius = 1.0
    rho = float(radius)
    g = _series_via_zeta(cfg, N, rho)
    c = g * rho ** -np.arange(N + 1, dtype=float)
    return PowerSeries.from_coefficients(c, False, rho)


# ---------------------------------------------------------------------------
# Breadth-first oracle on normal-form words
# ---------------------------------------------------------------------------

Letter = tuple[int, tuple[int, ...]]
Word = tuple[Letter, ...]


def _step_law(cfg: FreeProductConfig, exact: bool) -> list[tuple[int, tuple[int, ...], object]]:
    a1 = _exact_alpha(cfg) if exact else cfg.alpha
    out = []
    for i, (a, m) in enumerate(zip((a1, 1 - a1), cfg.factors), start=1):
        for p, w in m.atoms:
            out.append((i, p, a * w if exact else a * float(w)))
    return out


def multiply_letter(word: Word, i: int, x: tuple[int, ...]) -> Word:
    """Right-multiply a normal-form word by the factor-``i`` element ``x``."""
    if not any(x):
        return word
    if word and word[-1][0] == i:
        y = tuple(u + v for u, v in zip(word[-1][1], x))
        return word[:-1] if not any(y) else word[:-1] + ((i, y),)
    return word + ((i, x),)


def bfs_walk(
    cfg: FreeProductConfig,
    n_max: int,
    exact: bool = False,
    target_factor: int | None = None,
    max_words: int = BFS_MAX_WORDS,
) -> Iterator[dict[Word, object]]:
    """Distributions over normal-form words after 0..n_max steps.

    Words that cannot reach the identity (or, with ``target_factor``, a
    single letter of that factor) within the remaining steps are dropped.
    """
    law = _step_law(cfg, exact)
    reach = [max(sum(abs(c) for c in p) for p, _ in m.atoms) for m in cfg.factors]

    def lc(i: int, p: tuple[int, ...], first: bool) -> int:
        if first and i == target_factor:
            return 0
        return -(-sum(abs(c) for c in p) // reach[i - 1])

    # word -> (probability, lower bound on the steps needed to finish)
    dist: dict[Word, tuple[object, int]] = {(): (Fraction(1) if exact else 1.0, 0)}
    yield {(): dist[()][0]}
    for n in range(1, n_max + 1):
        left = n_max - n
        new: dict[Word, list] = {}
        for word, (pw, cw) in dist.items():
            for i, x, w in law:
                if not any(x):
                    nw, c = word, cw
                elif word and word[-1][0] == i:
                    first = len(word) == 1
                    y = tuple(u + v for u, v in zip(word[-1][1], x))
                    c = cw - lc(i, word[-1][1], first)
                    if any(y):
                        nw = word[:-1] + ((i, y),)
                        c += lc(i, y, first)
                    else:
                        nw = word[:-1]
                else:
                    nw, c = word + ((i, x),), cw + lc(i, x, not word)
                if c > left:
                    continue
                slot = new.get(nw)
                if slot is None:
                    new[nw] = [pw * w, c]
                else:
                    slot[0] += pw * w
        if len(new) > max_words:
            raise BudgetExceeded(f"{len(new)} words after {n} steps exceeds the cap {max_words}")
        dist = {k: (v[0], v[1]) for k, v in new.items()}
        yield {k: v[0] for k, v in dist.items()}


def bfs_oracle(cfg: FreeProductConfig, n_max: int, exact: bool = False) -> CoefficientSeries:
    """Return probabilities ``mu^{*n}(e)``, n <= n_max, by exact word propagation."""
    if n_max > BFS_MAX_STEPS:
        raise BudgetExceeded(f"n_max = {n_max} above the BFS guard {BFS_MAX_STEPS}")
    # mu symmetric: mu^{*n}(e) = sum_w mu^{*a}(w) mu^{*b}(w) with a + b = n
    half = (n_max + 1) // 2
    walk = bfs_walk(cfg, n_max, exact)
    dists = [next(walk) for _ in range(half + 1)]
    coeffs = []
    for n in range(n_max + 1):
        pa, pb = dists[n // 2], dists[n - n // 2]
        coeffs.append(sum((p * pb.get(w, 0) for w, p in pa.items()), Fraction(0) if exact else 0.0))
    if exact:
        return CoefficientSeries(tuple(Fraction(c) for c in coeffs))
    return CoefficientSeries(np.array(coeffs, dtype=float))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def alias_table(p) -> tuple[np.ndarray, np.ndarray]:
    """Walker/Vose alias table ``(prob, alias)`` for a discrete law."""
    p = np.asarray(p, dtype=float)
    K = len(p)
    q = p * K / p.sum()
    prob = np.ones(K)
    alias = np.arange(K)
    small = [k for k in range(K) if q[k] < 1.0]
    large = [k for k in range(K) if q[k] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s], alias[s] = q[s], l
        q[l] -= 1.0 - q[s]
        (small if q[l] < 1.0 else large).append(l)
    return prob, alias


@dataclass(frozen=True)
class MonteCarloResult:
    n: int
    trials: int
    seed: int
    estimate: float
    stderr: float

    def to_json(self) -> dict:
        return {"n": self.n, "trials": self.trials, "seed": self.seed, "estimate": self.estimate, "stderr": self.stderr}


_CODE_BASE = 256
_CODE_OFFSET = 64


def _shard_returns(cfg: FreeProductConfig, n: int, size: int, seed: int, shard: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(shard,))
    rng = np.random.Generator(np.random.Philox(ss))
    # lattice points packed as sum_j (x_j + 64) 256^j: addition stays exact
    # while |x_j| < 64, which the step bound n * max_radius guarantees
    D = max(m.dimension for m in cfg.factors)
    radix = _CODE_BASE ** np.arange(D, dtype=np.int64)
    zero = int(_CODE_OFFSET * radix.sum())
    deltas, probs, aliases, offsets, sizes = [], [], [], [], []
    off = 0
    for m in cfg.factors:
        pts = np.zeros((len(m.atoms), D), dtype=np.int64)
        pts[:, : m.dimension] = m.points
        prob, alias = alias_table(m.weights)
        deltas.append(pts @ radix)
        probs.append(prob)
        aliases.append(alias + off)
        offsets.append(off)
        sizes.append(len(prob))
        off += len(prob)
    delta, prob, alias = np.concatenate(deltas), np.concatenate(probs), np.concatenate(aliases)
    stack = np.full((size, n + 1), zero, dtype=np.int64)
    tags = np.zeros((size, n + 1), dtype=np.int8)
    depth = np.zeros(size, dtype=np.int64)
    for s in range(n):
        size = len(depth)
        rows = np.arange(size)
        u = rng.random((3, size))
        f = np.where(u[0] < cfg.alpha, 1, 2).astype(np.int8)
        first = f == 1
        K = np.where(first, sizes[0], sizes[1])
        j = np.where(first, offsets[0], offsets[1]) + np.minimum((u[1] * K).astype(np.int64), K - 1)
        j = np.where(u[2] < prob[j], j, alias[j])
        step = delta[j]
        moving = step != 0
        top = np.maximum(depth - 1, 0)
        merge = moving & (depth > 0) & (tags[rows, top] == f)
        push = moving & ~merge
        mi, mt = rows[merge], top[merge]
        stack[mi, mt] += step[merge]
        gone = stack[mi, mt] == zero
        gi, gt = mi[gone], mt[gone]
        tags[gi, gt] = 0
        depth[gi] -= 1
        pi, pd = rows[push], depth[push]
        stack[pi, pd] = zero + step[push]
        tags[pi, pd] = f[push]
        depth[push] += 1
        # every letter costs at least one step to remove
        live = depth <= n - s - 1
        if not live.all():
            stack, tags, depth = stack[live], tags[live], depth[live]
    return int(np.count_nonzero(depth == 0))


def default_threads() -> int:
    env = os.environ.get("FREEWALK_THREADS")
    if env:
        return max(1, int(env))
    return 1


def monte_carlo(
    cfg: FreeProductConfig, n: int, trials: int, seed: int, threads: int | None = None
) -> MonteCarloResult:
    """Estimate ``mu^{*n}(e)`` with a binomial standard error.

    Trials are split into fixed-size shards, each driven by a Philox
    stream keyed on ``(seed, shard)``; the result does not depend on
    ``threads``.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if n == 0:
        return MonteCarloResult(0, trials, seed, 1.0, 0.0)
    if n * max(m.max_radius for m in cfg.factors) >= _CODE_OFFSET:
        raise BudgetExceeded(f"n = {n} too large for the packed lattice encoding")
    sizes = [min(MC_SHARD, trials - s) for s in range(0, trials, MC_SHARD)]
    threads = threads or default_threads()
    job = lambda k: _shard_returns(cfg, n, sizes[k], seed, k)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            hits = list(ex.map(job, range(len(sizes))))
    else:
        hits = [job(k) for k in range(len(sizes))]
    p = sum(hits) / trials
    return MonteCarloResult(n, trials, seed, p, math.sqrt(p * (1 - p) / trials))


# ---------------------------------------------------------------------------
# Normalized coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QnSequence(CoefficientSeries):
    """``q~_n = c_n R^n`` with the indices where monotone decay fails after burn-in."""

    burn_in: int = 0
    violations: tuple[int, ...] = ()


def qn_sequence(series: CoefficientSeries, R: float, burn_in: int | None = None) -> QnSequence:
    c = series.as_float()
    n = np.arange(len(c), dtype=float)
    q = np.exp(np.log(np.where(c > 0, c, np.nan)) + n * math.log(R))
    q = np.where(c > 0, q, 0.0)
    burn = len(c) // 10 if burn_in is None else burn_in
    viol = tuple(int(k) for k in range(max(burn, 0), len(q) - 1) if q[k + 1] > q[k])
    return QnSequence(q, float(R), burn, viol)
