"""Markov model of the joint confidence distribution.

The joint density p(x_1, ..., x_k) of per-model confidences is
approximated by a first-order Markov factorization: mixture-of-beta
marginals chained by bivariate Gaussian copulas,

    p(x_1, ..., x_k) ~= p(x_1) * prod_i p(x_i | x_{i-1}).

Everything downstream (closed-form performance metrics, threshold
optimization, synthetic data) works off this model, so the probability
primitives here carry explicit accuracy targets:

* interval probabilities via the regularized incomplete beta function
  (abs error <= 1e-10),
* rectangle probabilities via the bivariate normal CDF computed from
  Owen's T function (abs error well below 1e-7),
* conditional partial expectations via deterministic composite
  Gauss-Legendre quadrature in the Gaussian z-domain (target 1e-8).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, stats
from scipy.interpolate import PchipInterpolator
from scipy.special import betainc, betaln, ndtr, ndtri, owens_t

from .errors import DegenerateFitError, QuadratureError

MAX_COMPONENTS = 3
EM_TOL = 1e-8
EM_MAX_ITER = 500
N_RESTARTS = 5
RHO_CLAMP = 0.999
QUAD_TOL = 1e-8
_Z_MAX = 8.6  # ndtr(8.6) differs from 1 by ~1.7e-18
_MASS_FLOOR = 1e-12  # conditioning intervals below this mass are treated as empty


# ---------------------------------------------------------------------------
# Beta mixture marginals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BetaMixture:
    """Finite mixture of beta distributions on (0, 1)."""

    weights: tuple[float, ...]
    alphas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        m = len(self.weights)
        if not (1 <= m == len(self.alphas) == len(self.betas)):
            raise ValueError("weights/alphas/betas must have equal nonzero length")
        if m > MAX_COMPONENTS:
            raise ValueError(f"at most {MAX_COMPONENTS} components supported, got {m}")
        if any(w <= 0 for w in self.weights):
            raise ValueError("mixture weights must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {sum(self.weights)}, not 1")
        if any(a <= 0 for a in self.alphas) or any(b <= 0 for b in self.betas):
            raise ValueError("beta shape parameters must be positive")

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        w, a, b = _mix_arrays(self)
        lx = np.log(x)[..., None]
        l1x = np.log1p(-x)[..., None]
        comp = (a - 1.0) * lx + (b - 1.0) * l1x - betaln(a, b) + np.log(w)
        m = comp.max(axis=-1)
        return m + np.log(np.exp(comp - m[..., None]).sum(axis=-1))

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        w, a, b = _mix_arrays(self)
        xc = np.clip(x, 0.0, 1.0)
        return betainc(a, b, xc[..., None]) @ w

    def mean(self) -> float:
        w, a, b = _mix_arrays(self)
        return float(w @ (a / (a + b)))

    def partial_mean_above(self, threshold: float) -> float:
        """E[X * 1{X > t}], closed form: x * pdf(a, b) = mean * pdf(a+1, b)."""
        if threshold >= 1.0:
            return 0.0
        t = max(threshold, 0.0)
        w, a, b = _mix_arrays(self)
        return float(w @ ((a / (a + b)) * (1.0 - betainc(a + 1.0, b, t))))

    def quantile(self, v):
        """Exact inverse CDF by bisection (vectorized)."""
        v = np.asarray(v, dtype=float)
        lo = np.zeros_like(v)
        hi = np.ones_like(v)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < v
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


@lru_cache(maxsize=256)
def _mix_arrays(mix: BetaMixture) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return np.array(mix.weights), np.array(mix.alphas), np.array(mix.betas)


@lru_cache(maxsize=128)
def _quantile_map(mix: BetaMixture) -> PchipInterpolator:
    """Monotone interpolant z -> Quantile(ndtr(z)) on z in [-Z_MAX, Z_MAX].

    Backs conditional quadrature and sampling. Interpolation error is
    confined to regions of negligible probability mass (density valleys),
    so integrals computed through it stay within the quadrature target.
    """
    z = np.arange(-_Z_MAX, _Z_MAX + 1e-12, 0.002)
    x = mix.quantile(ndtr(z))
    x = np.maximum.accumulate(x)  # guard bisection ties
    return PchipInterpolator(z, x, extrapolate=False)


def _eval_quantile_map(mix: BetaMixture, z):
    interp = _quantile_map(mix)
    x = interp(np.clip(z, -_Z_MAX, _Z_MAX))
    return np.clip(x, 1e-12, 1.0 - 1e-12)


# ---------------------------------------------------------------------------
# Beta mixture fitting (EM)
# ---------------------------------------------------------------------------


def _beta_mle_from_stats(s_logx, s_log1mx, mean, var, init):
    """Weighted MLE of beta shapes given normalized sufficient statistics.

    Maximizes (a-1)*s_logx + (b-1)*s_log1mx - betaln(a, b) over log-shapes.
    Falls back to the initial point if the optimizer fails to improve.
    """

    def nll(q):
        a, b = np.exp(q)
        return betaln(a, b) - (a - 1.0) * s_logx - (b - 1.0) * s_log1mx

    def grad(q):
        from scipy.special import digamma

        a, b = np.exp(q)
        da = digamma(a) - digamma(a + b) - s_logx
        db = digamma(b) - digamma(a + b) - s_log1mx
        return np.array([a * da, b * db])

    if init is None:
        # method-of-moments start
        v = max(var, 1e-12)
        common = mean * (1.0 - mean) / v - 1.0
        if common <= 0:
            common = 1.0
        init = (max(mean * common, 1e-3), max((1.0 - mean) * common, 1e-3))
    q0 = np.log(np.clip(init, 1e-3, 1e7))
    res = optimize.minimize(
        lambda q: (nll(q), grad(q)),
        q0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(np.log(1e-3), np.log(1e7))] * 2,
    )
    best = res.x if res.fun <= nll(q0) else q0
    a, b = np.exp(best)
    return float(a), float(b)


def _em_fit(samples: np.ndarray, m: int, init: BetaMixture,
            tol: float = EM_TOL, max_iter: int = EM_MAX_ITER):
    """One EM run from a given initialization.

    Returns (mixture, loglik, trace). The trace of per-iteration
    log-likelihoods is nondecreasing up to floating-point noise because
    the M-step never accepts a parameter update that lowers its own
    weighted objective.
    """
    x = samples
    n = x.size
    lx = np.log(x)
    l1x = np.log1p(-x)
    weights = np.array(init.weights)
    alphas = np.array(init.alphas)
    betas = np.array(init.betas)
    trace = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        comp = (
            (alphas - 1.0) * lx[:, None]
            + (betas - 1.0) * l1x[:, None]
            - betaln(alphas, betas)
            + np.log(weights)
        )
        cmax = comp.max(axis=1)
        norm = cmax + np.log(np.exp(comp - cmax[:, None]).sum(axis=1))
        ll = float(norm.sum())
        trace.append(ll)
        if ll - prev_ll < tol * (abs(prev_ll) + 1.0) and len(trace) > 1:
            break
        prev_ll = ll
        resp = np.exp(comp - norm[:, None])
        r_sum = resp.sum(axis=0)
        r_sum = np.maximum(r_sum, 1e-300)
        weights = r_sum / n
        weights = weights / weights.sum()
        for j in range(m):
            r = resp[:, j]
            rj = r_sum[j]
            if rj < 1e-8:
                continue  # starved component: keep parameters
            s1 = float(r @ lx) / rj
            s2 = float(r @ l1x) / rj
            mu = float(r @ x) / rj
            var = float(r @ (x - mu) ** 2) / rj
            old = (alphas[j], betas[j])
            old_obj = betaln(*old) - (old[0] - 1) * s1 - (old[1] - 1) * s2
            a, b = _beta_mle_from_stats(s1, s2, mu, var, init=old)
            new_obj = betaln(a, b) - (a - 1) * s1 - (b - 1) * s2
            if new_obj <= old_obj:
                alphas[j], betas[j] = a, b
    mix = BetaMixture(tuple(weights), tuple(alphas), tuple(betas))
    return mix, trace[-1], trace


def _quantile_spread_init(samples, m, rng=None) -> BetaMixture:
    """Initialize components from m contiguous quantile blocks of the data."""
    xs = np.sort(samples)
    n = xs.size
    if rng is None:
        edges = np.linspace(0, n, m + 1).astype(int)
    else:
        cuts = np.sort(rng.uniform(0.1, 0.9, size=m - 1)) if m > 1 else np.array([])
        edges = np.concatenate([[0], (cuts * n).astype(int), [n]])
        edges = np.maximum.accumulate(np.maximum(edges, np.arange(m + 1)))
    weights, alphas, betas = [], [], []
    for j in range(m):
        block = xs[edges[j] : max(edges[j + 1], edges[j] + 2)]
        mu = float(np.mean(block))
        var = float(np.var(block)) + 1e-6
        common = max(mu * (1 - mu) / var - 1.0, 0.5)
        if rng is not None:
            common *= rng.uniform(0.5, 2.0)
        weights.append(max((edges[j + 1] - edges[j]) / n, 1e-3))
        alphas.append(np.clip(mu * common, 1e-2, 1e4))
        betas.append(np.clip((1 - mu) * common, 1e-2, 1e4))
    w = np.array(weights)
    return BetaMixture(tuple(w / w.sum()), tuple(alphas), tuple(betas))


def fit_beta_mixture(
    samples,
    m: int,
    n_restarts: int = N_RESTARTS,
    seed: int = 0,
    tol: float = EM_TOL,
    max_iter: int = EM_MAX_ITER,
) -> BetaMixture:
    """Maximum-likelihood beta mixture via EM, best of several restarts.

    Requires at least 30 samples strictly inside (0, 1). The first restart
    uses a deterministic quantile-spread initialization; the rest perturb
    it with the seeded generator. Ties go to the highest log-likelihood.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 30:
        raise ValueError(f"need at least 30 samples to fit a mixture, got {x.size}")
    if np.any(x <= 0.0) or np.any(x >= 1.0):
        raise ValueError("samples must lie strictly inside (0, 1)")
    if not 1 <= m <= MAX_COMPONENTS:
        raise ValueError(f"component count must be in 1..{MAX_COMPONENTS}")
    rng = np.random.default_rng(seed)
    best_mix, best_ll = None, -np.inf
    for r in range(max(n_restarts, 1)):
        init = _quantile_spread_init(x, m, rng=None if r == 0 else rng)
        try:
            mix, ll, _ = _em_fit(x, m, init, tol=tol, max_iter=max_iter)
        except (FloatingPointError, ValueError):
            continue
        if ll > best_ll:
            best_mix, best_ll = mix, ll
    if best_mix is None:
        raise DegenerateFitError("all EM restarts failed")
    return best_mix


def mixture_loglik(mix: BetaMixture, samples) -> float:
    return float(np.sum(mix.logpdf(np.asarray(samples, dtype=float))))


def select_beta_mixture(
    samples, m_max: int = MAX_COMPONENTS, n_restarts: int = N_RESTARTS, seed: int = 0
) -> tuple[BetaMixture, dict]:
    """Fit for each m in 1..m_max and pick the lowest BIC (ties: lowest m)."""
    x = np.asarray(samples, dtype=float).ravel()
    results = {}
    best_m, best_bic = None, np.inf
    for m in range(1, m_max + 1):
        mix = fit_beta_mixture(x, m, n_restarts=n_restarts, seed=seed)
        ll = mixture_loglik(mix, x)
        bic = (3 * m - 1) * math.log(x.size) - 2.0 * ll
        results[m] = {"mixture": mix, "loglik": ll, "bic": bic}
        if bic < best_bic - 1e-9:
            best_m, best_bic = m, bic
    diagnostics = {
        "chosen_m": best_m,
        "loglik_by_m": {m: r["loglik"] for m, r in results.items()},
        "bic_by_m": {m: r["bic"] for m, r in results.items()},
    }
    return results[best_m]["mixture"], diagnostics


# ---------------------------------------------------------------------------
# Pair copulas
# ---------------------------------------------------------------------------


class CopulaFamily(enum.Enum):
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class PairCopula:
    """Bivariate Gaussian copula with correlation rho in (-1, 1)."""

    rho: float
    family: CopulaFamily = CopulaFamily.GAUSSIAN

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho {self.rho} outside (-1, 1)")


def bvn_cdf(h, k, rho: float):
    """P(X <= h, Y <= k) for standard bivariate normal (X, Y) with correlation rho.

    Computed from Owen's T via
        Phi2(h, k) = (Phi(h) + Phi(k)) / 2 - T(h, a_h) - T(k, a_k) - delta,
    accurate to near machine precision and fully vectorized in (h, k).
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    if rho == 0.0:
        return ndtr(h) * ndtr(k)
    if abs(rho) >= 1.0:
        if rho > 0:
            return ndtr(np.minimum(h, k))
        return np.maximum(ndtr(h) + ndtr(k) - 1.0, 0.0)
    s = math.sqrt(1.0 - rho * rho)
    # nudge exact zeros: the combined expression is continuous in (h, k)
    hn = np.where(h == 0.0, 1e-12, h)
    kn = np.where(k == 0.0, 1e-12, k)
    a_h = (kn - rho * hn) / (hn * s)
    a_k = (hn - rho * kn) / (kn * s)
    delta = np.where((hn * kn > 0) | ((hn * kn == 0) & (hn + kn >= 0)), 0.0, 0.5)
    val = 0.5 * (ndtr(hn) + ndtr(kn)) - owens_t(hn, a_h) - owens_t(kn, a_k) - delta
    return np.clip(val, 0.0, 1.0)


def copula_cdf(u, v, rho: float):
    """C(u, v) = Phi2(ndtri(u), ndtri(v); rho) with exact boundary behavior."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    uc = np.clip(u, 1e-300, 1.0 - 1e-16)
    vc = np.clip(v, 1e-300, 1.0 - 1e-16)
    inner = bvn_cdf(ndtri(uc), ndtri(vc), rho)
    out = np.where(u <= 0.0, 0.0, np.where(u >= 1.0, v, inner))
    out = np.where(v <= 0.0, 0.0, np.where(v >= 1.0, np.where(u <= 0, 0.0, np.where(u >= 1, 1.0, u)), out))
    return np.clip(out, 0.0, 1.0)


def fit_pair_copula(u, v) -> PairCopula:
    """Estimate rho by inverting Kendall's tau: rho = sin(pi * tau / 2).

    Inputs are pseudo-observations (marginal-CDF transformed samples).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.size != v.size:
        raise ValueError("pseudo-observation arrays must have equal length")
    if u.size < 30:
        raise ValueError(f"need at least 30 pairs to fit a copula, got {u.size}")
    if np.ptp(u) == 0.0 or np.ptp(v) == 0.0:
        raise DegenerateFitError("constant margin: Kendall's tau is undefined")
    tau = stats.kendalltau(u, v).statistic
    rho = math.sin(0.5 * math.pi * tau)
    return PairCopula(rho=float(np.clip(rho, -RHO_CLAMP, RHO_CLAMP)))


# ---------------------------------------------------------------------------
# Markov joint model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarkovJointModel:
    """Beta-mixture marginals chained by pairwise Gaussian copulas."""

    marginals: tuple[BetaMixture, ...]
    copulas: tuple[PairCopula, ...]

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        object.__setattr__(self, "copulas", tuple(self.copulas))
        if len(self.copulas) != len(self.marginals) - 1:
            raise ValueError(
                f"{len(self.marginals)} marginals require "
                f"{len(self.marginals) - 1} copulas, got {len(self.copulas)}"
            )

    @property
    def k(self) -> int:
        return len(self.marginals)


def interval_prob(mix: BetaMixture, lo: float, hi: float) -> float:
    """P(X in [lo, hi]) for a beta mixture; exact via betainc."""
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"invalid interval [{lo}, {hi}]")
    return float(np.clip(mix.cdf(hi) - mix.cdf(lo), 0.0, 1.0))


def conditional_interval_prob(
    model: MarkovJointModel,
    i: int,
    target_lo: float,
    target_hi: float,
    given_lo: float,
    given_hi: float,
) -> float:
    """P(X_i in [target_lo, target_hi] | X_{i-1} in [given_lo, given_hi]).

    i is 1-based and must be >= 2. Uses the copula rectangle formula
    C(u2,v2) - C(u1,v2) - C(u2,v1) + C(u1,v1) on CDF-transformed bounds.
    """
    if not 2 <= i <= model.k:
        raise ValueError(f"index i={i} must be in 2..{model.k}")
    if not 0.0 <= target_lo <= target_hi <= 1.0:
        raise ValueError(f"invalid target interval [{target_lo}, {target_hi}]")
    if not 0.0 <= given_lo <= given_hi <= 1.0:
        raise ValueError(f"invalid conditioning interval [{given_lo}, {given_hi}]")
    prev = model.marginals[i - 2]
    cur = model.marginals[i - 1]
    rho = model.copulas[i - 2].rho
    u1, u2 = prev.cdf(given_lo), prev.cdf(given_hi)
    denom = u2 - u1
    if denom <= _MASS_FLOOR:
        raise ValueError(
            f"conditioning event X_{i - 1} in [{given_lo}, {given_hi}] has "
            f"probability {denom:.3e} below {_MASS_FLOOR}"
        )
    v1, v2 = cur.cdf(target_lo), cur.cdf(target_hi)
    joint = (
        copula_cdf(u2, v2, rho)
        - copula_cdf(u1, v2, rho)
        - copula_cdf(u2, v1, rho)
        + copula_cdf(u1, v1, rho)
    )
    return float(np.clip(joint / denom, 0.0, 1.0))


@lru_cache(maxsize=8)
def _leggauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def _conditional_partial_expectation(
    cur: BetaMixture,
    prev: BetaMixture,
    rho: float,
    region_lo: float,
    given_lo: float,
    given_hi: float,
    tol: float = QUAD_TOL,
) -> float:
    """E[X_i * 1{X_i > region_lo} | X_{i-1} in [given_lo, given_hi]].

    Integrates q(z) * (Phi((c_hi - rho z)/s) - Phi((c_lo - rho z)/s)) * phi(z)
    over z in [ndtri(F_i(region_lo)), Z_MAX], where q is the current
    marginal's quantile map. The integrand is bounded and analytic, so
    composite Gauss-Legendre panels converge fast; panels with the worst
    nested-rule error estimates are bisected until the target is met.
    """
    u1, u2 = prev.cdf(given_lo), prev.cdf(given_hi)
    denom = float(u2 - u1)
    if denom <= _MASS_FLOOR:
        raise ValueError(
            f"conditioning event in [{given_lo}, {given_hi}] has probability "
            f"{denom:.3e} below {_MASS_FLOOR}"
        )
    v0 = float(cur.cdf(max(region_lo, 0.0))) if region_lo > 0.0 else 0.0
    if v0 >= 1.0 - 1e-16:
        return 0.0
    z_lo = float(ndtri(v0)) if v0 > 0.0 else -_Z_MAX
    z_lo = max(z_lo, -_Z_MAX)
    if z_lo >= _Z_MAX:
        return 0.0
    s = math.sqrt(1.0 - rho * rho)
    c_lo = float(ndtri(np.clip(u1, 1e-300, 1 - 1e-16))) if u1 > 0 else -np.inf
    c_hi = float(ndtri(np.clip(u2, 1e-300, 1 - 1e-16))) if u2 < 1 else np.inf

    def weight(z):
        hi = ndtr((c_hi - rho * z) / s) if np.isfinite(c_hi) else np.ones_like(z)
        lo = ndtr((c_lo - rho * z) / s) if np.isfinite(c_lo) else np.zeros_like(z)
        return hi - lo

    def panel_integrals(edges, order):
        nodes, wts = _leggauss(order)
        a = edges[:-1][:, None]
        b = edges[1:][:, None]
        z = 0.5 * (a + b) + 0.5 * (b - a) * nodes[None, :]
        zf = z.ravel()
        f = _eval_quantile_map(cur, zf) * weight(zf) * np.exp(-0.5 * zf * zf)
        f = f.reshape(z.shape) / math.sqrt(2.0 * math.pi)
        return (0.5 * (b - a)[:, 0]) * (f @ wts)

    edges = np.linspace(z_lo, _Z_MAX, 13)
    for _ in range(4):
        coarse = panel_integrals(edges, 10)
        fine = panel_integrals(edges, 20)
        err = np.abs(fine - coarse)
        if err.sum() <= tol:
            return float(fine.sum() / denom)
        # bisect the panels responsible for most of the error estimate
        worst = np.argsort(err)[-max(2, len(err) // 4) :]
        mids = 0.5 * (edges[worst] + edges[worst + 1])
        edges = np.sort(np.concatenate([edges, mids]))
    achieved = float(np.abs(fine - coarse).sum())
    if achieved > 100.0 * tol:
        raise QuadratureError("conditional expectation quadrature did not converge",
                              achieved_error=achieved)
    return float(fine.sum() / denom)


def _conditional_q_raw(
    cur: BetaMixture,
    z_lo: float,
    c_lo: float,
    c_hi: float,
    rho: float,
    n_panels: int = 12,
    order: int = 20,
) -> float:
    """Unnormalized E[X_i 1{X_i > t} 1{Z_prev in [c_lo, c_hi]}] in the z-domain.

    Single-pass composite Gauss-Legendre, no error estimate: the hot path
    for the optimizer. z_lo = ndtri(F_i(t)); c_* are normal-space bounds of
    the conditioning interval (+-inf allowed).
    """
    if z_lo >= _Z_MAX:
        return 0.0
    z_lo = max(z_lo, -_Z_MAX)
    nodes, wts = _leggauss(order)
    edges = np.linspace(z_lo, _Z_MAX, n_panels + 1)
    a = edges[:-1][:, None]
    b = edges[1:][:, None]
    z = (0.5 * (a + b) + 0.5 * (b - a) * nodes[None, :]).ravel()
    s = math.sqrt(1.0 - rho * rho)
    hi = ndtr((c_hi - rho * z) / s) if math.isfinite(c_hi) else 1.0
    lo = ndtr((c_lo - rho * z) / s) if math.isfinite(c_lo) else 0.0
    f = _eval_quantile_map(cur, z) * (hi - lo) * np.exp(-0.5 * z * z)
    f = f.reshape(n_panels, nodes.size) / math.sqrt(2.0 * math.pi)
    return float(((f @ wts) * (0.5 * (b - a)[:, 0])).sum())


def partial_expectation(
    model: MarkovJointModel,
    i: int,
    answer_threshold: float,
    given_lo: float | None = None,
    given_hi: float | None = None,
    tol: float = QUAD_TOL,
) -> float:
    """E[X_i * 1{X_i > threshold}], optionally conditioned on X_{i-1} in an interval.

    The unconditional case has a closed form through the incomplete beta
    function; the conditional case uses quadrature (see above). i is 1-based.
    """
    if not 1 <= i <= model.k:
        raise ValueError(f"index i={i} must be in 1..{model.k}")
    if not 0.0 <= answer_threshold <= 1.0:
        raise ValueError(f"threshold {answer_threshold} outside [0, 1]")
    if given_lo is None and given_hi is None:
        return model.marginals[i - 1].partial_mean_above(answer_threshold)
    if given_lo is None or given_hi is None:
        raise ValueError("provide both conditioning bounds or neither")
    if i < 2:
        raise ValueError("conditional expectation needs i >= 2")
    if not 0.0 <= given_lo <= given_hi <= 1.0:
        raise ValueError(f"invalid conditioning interval [{given_lo}, {given_hi}]")
    return _conditional_partial_expectation(
        model.marginals[i - 1],
        model.marginals[i - 2],
        model.copulas[i - 2].rho,
        answer_threshold,
        given_lo,
        given_hi,
        tol=tol,
    )


def sample_joint(model: MarkovJointModel, n: int, seed: int) -> np.ndarray:
    """Draw n confidence vectors from the Markov model, shape (n, k).

    Deterministic given the seed; every output lies strictly inside (0, 1).
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    k = model.k
    out = np.empty((n, k))
    first = model.marginals[0]
    comps = rng.choice(first.n_components, size=n, p=np.array(first.weights))
    a = np.array(first.alphas)[comps]
    b = np.array(first.betas)[comps]
    out[:, 0] = np.clip(rng.beta(a, b), 1e-12, 1.0 - 1e-12)
    for i in range(1, k):
        prev = model.marginals[i - 1]
        rho = model.copulas[i - 1].rho
        u_prev = np.clip(prev.cdf(out[:, i - 1]), 1e-300, 1.0 - 1e-16)
        z_prev = ndtri(u_prev)
        z = rho * z_prev + math.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
        out[:, i] = _eval_quantile_map(model.marginals[i], z)
    return out


# ---------------------------------------------------------------------------
# Fitting the full model and (de)serialization
# ---------------------------------------------------------------------------


def fit_markov_model(
    confidences: np.ndarray,
    m: int | None = None,
    m_max: int = MAX_COMPONENTS,
    n_restarts: int = N_RESTARTS,
    seed: int = 0,
) -> tuple[MarkovJointModel, dict]:
    """Fit marginals (BIC-selected mixture size unless m is given) and copulas.

    confidences is an (n, k) array of calibrated scores strictly in (0, 1).
    Returns the model plus fit diagnostics (per-marginal log-likelihood and
    BIC, per-copula rho).
    """
    x = np.asarray(confidences, dtype=float)
    if x.ndim != 2:
        raise ValueError("confidence matrix must be 2-dimensional")
    n, k = x.shape
    marginals = []
    marg_diag = []
    for i in range(k):
        if m is None:
            mix, diag = select_beta_mixture(
                x[:, i], m_max=m_max, n_restarts=n_restarts, seed=seed + i
            )
        else:
            mix = fit_beta_mixture(x[:, i], m, n_restarts=n_restarts, seed=seed + i)
            diag = {
                "chosen_m": m,
                "loglik_by_m": {m: mixture_loglik(mix, x[:, i])},
                "bic_by_m": {
                    m: (3 * m - 1) * math.log(n) - 2.0 * mixture_loglik(mix, x[:, i])
                },
            }
        marginals.append(mix)
        marg_diag.append(diag)
    copulas = []
    for i in range(1, k):
        u = marginals[i - 1].cdf(x[:, i - 1])
        v = marginals[i].cdf(x[:, i])
        copulas.append(fit_pair_copula(u, v))
    model = MarkovJointModel(tuple(marginals), tuple(copulas))
    diagnostics = {
        "n": n,
        "marginals": marg_diag,
        "copulas": [{"rho": c.rho} for c in copulas],
    }
    return model, diagnostics


def model_to_dict(model: MarkovJointModel) -> dict:
    return {
        "k": model.k,
        "marginals": [
            {"weights": list(m.weights), "alphas": list(m.alphas), "betas": list(m.betas)}
            for m in model.marginals
        ],
        "copulas": [{"family": c.family.value, "rho": c.rho} for c in model.copulas],
    }


def model_from_dict(doc: dict) -> MarkovJointModel:
    marginals = tuple(
        BetaMixture(tuple(m["weights"]), tuple(m["alphas"]), tuple(m["betas"]))
        for m in doc["marginals"]
    )
    copulas = tuple(
        PairCopula(rho=c["rho"], family=CopulaFamily(c["family"])) for c in doc["copulas"]
    )
    model = MarkovJointModel(marginals, copulas)
    if model.k != doc["k"]:
        raise ValueError(f"declared k={doc['k']} does not match {model.k} marginals")
    return model


def save_model(model: MarkovJointModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> MarkovJointModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
