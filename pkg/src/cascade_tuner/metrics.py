"""Closed-form cascade performance metrics under the Markov confidence model.

For thresholds (phi, xi) the three metrics decompose over the deciding
model. With D_i the defer event {xi_i <= X_i <= phi_i} and the final
model's answer region [xi_k, 1] (it has no deferral threshold, so its
defer probability is zero):

    P(Correct)    = Q_1 + sum_i  reach_i * Q_i
    E[Cost]       = (1 - P_1) E[C_1] + sum_i reach_i (1 - P_i) sum_{j<=i} E[C_j]
    P(Abstention) = P(X_1 < xi_1) + sum_i reach_i * P(X_i < xi_i | reached i)

where reach_i is the probability of deferring all the way to model i,
P_i the conditional defer probability there, and Q_i the conditional
partial expectation of the confidence over the answer region (confidence
is read as correctness probability). For k <= 2 these are the one-step
conditional quantities P(X_2 in . | X_1 in [xi_1, phi_1]), computable
directly from the pair copula. For k >= 3, conditioning on the single
previous interval is no longer exact under the Markov law (the earlier
gates tilt the distribution inside the interval), so the reach
distribution is propagated exactly instead: working in the Gaussian
z-domain, the unnormalized density of Z_i given all earlier defer events
satisfies

    g_2(z) = phi(z) * [Phi((b_1 - r z)/s) - Phi((a_1 - r z)/s)]   (closed form)
    g_{i+1}(z') = int_{[a_i, b_i]} g_i(z) N(z'; r z, s^2) dz      (quadrature)

with [a_i, b_i] the defer interval mapped through ndtri of the marginal
CDF. All per-model answer/abstain/defer masses are integrals against
g_i, evaluated on fixed Gauss-Legendre node schedules so the result is a
smooth deterministic function of the thresholds. Conditioning intervals
whose mass falls below a floor truncate the whole downstream branch, the
limit of the exact expression.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from scipy.special import ndtr

from .cascade import CascadeSpec, ThresholdVector, validate_thresholds
from .density import (
    _MASS_FLOOR,
    MarkovJointModel,
    _conditional_q_raw,
    _leggauss,
    copula_cdf,
)

PARTITION_TOL = 1e-7  # slack for accumulated quadrature error
GRADIENT_STEP = 1e-6


@dataclass(frozen=True)
class AnalyticPerformance:
    """Model-based (P(Correct), E[Cost], P(Abstention)) and the implied error rate."""

    p_correct: float
    expected_cost: float
    p_abstention: float
    p_error_no_abstain: float

    def __post_init__(self):
        for name in ("p_correct", "p_abstention", "p_error_no_abstain"):
            v = getattr(self, name)
            if not -PARTITION_TOL <= v <= 1.0 + PARTITION_TOL:
                raise ValueError(f"{name} = {v} outside [0, 1]")
        residual = 1.0 - self.p_correct - self.p_abstention - self.p_error_no_abstain
        if abs(residual) > 1e-9:
            raise ValueError(f"event probabilities do not partition: residual {residual}")


def _safe_ndtri(p: float) -> float:
    if p <= 0.0:
        return -np.inf
    if p >= 1.0:
        return np.inf
    return float(ndtri(p))


_Z_MAX = 8.6
_PROP_PANELS = 24  # fixed schedules keep the evaluation smooth in the thresholds
_PROP_ORDER = 12
_EPS_PANELS = 6
_EPS_ORDER = 12


def _panel_nodes(lo: float, hi: float, n_panels: int, order: int):
    nodes, wts = _leggauss(order)
    edges = np.linspace(lo, hi, n_panels + 1)
    a = edges[:-1][:, None]
    b = edges[1:][:, None]
    z = (0.5 * (a + b) + 0.5 * (b - a) * nodes[None, :]).ravel()
    w = (0.5 * (b - a) * wts[None, :]).ravel()
    return z, w


def _nodes_partial_q(marg, mu: np.ndarray, weights: np.ndarray, s: float,
                     region_lo_z: float) -> float:
    """sum_j w_j * E[q(Z) 1{Z > region_lo_z}] with Z ~ N(mu_j, s^2).

    Integrated per node in the innovation variable so narrow kernels stay
    resolved: Z = mu_j + s * eps with eps standard normal.
    """
    from .density import _eval_quantile_map

    if region_lo_z == -np.inf:
        lo = np.full(mu.shape, -_Z_MAX)
    else:
        lo = np.clip((region_lo_z - mu) / s, -_Z_MAX, _Z_MAX)
    nodes, wts = _leggauss(_EPS_ORDER)
    edges = lo[:, None] + (_Z_MAX - lo)[:, None] * np.linspace(0.0, 1.0, _EPS_PANELS + 1)
    a = edges[:, :-1, None]
    b = edges[:, 1:, None]
    eps = 0.5 * (a + b) + 0.5 * (b - a) * nodes[None, None, :]
    w_eps = 0.5 * (b - a) * wts[None, None, :]
    z = mu[:, None, None] + s * eps
    f = _eval_quantile_map(marg, z.ravel()).reshape(z.shape)
    f *= np.exp(-0.5 * eps * eps) / math.sqrt(2.0 * math.pi)
    return float(weights @ (f * w_eps).sum(axis=(1, 2)))


def _performance_terms(
    model: MarkovJointModel,
    costs: tuple[float, ...],
    deferral: np.ndarray,
    abstention: np.ndarray,
) -> tuple[float, float, float]:
    """(p_correct, expected_cost, p_abstention) for raw threshold arrays.

    k <= 2 uses the one-step conditional closed forms; k >= 3 additionally
    propagates the reach density through the chain on fixed node schedules
    (see module docstring).
    """
    k = model.k
    marg0 = model.marginals[0]
    if k == 1:
        pc = marg0.partial_mean_above(abstention[0])
        pa = float(marg0.cdf(abstention[0]))
        return pc, costs[0], pa

    pc = marg0.partial_mean_above(deferral[0])
    u_lo = float(marg0.cdf(min(abstention[0], deferral[0])))
    u_hi = float(marg0.cdf(deferral[0]))
    pa = u_lo  # = P(X_1 < xi_1) since cdf(min(xi, phi)) = cdf(xi) on valid inputs
    p1 = max(u_hi - u_lo, 0.0)
    cost = (1.0 - p1) * costs[0]
    cum_cost = np.cumsum(costs)

    # model 2 quantities conditional on the first defer interval: exact
    # one-step formulas through the pair copula
    marg1 = model.marginals[1]
    rho = model.copulas[0].rho
    if p1 > _MASS_FLOOR:
        c_lo, c_hi = _safe_ndtri(u_lo), _safe_ndtri(u_hi)
        v_xi = float(marg1.cdf(min(abstention[1], deferral[1]) if k > 2 else abstention[1]))
        if k > 2:
            v_phi = float(marg1.cdf(deferral[1]))
            corners = copula_cdf(
                np.array([u_hi, u_lo, u_hi, u_lo]),
                np.array([v_xi, v_xi, v_phi, v_phi]),
                rho,
            )
            rect_xi = corners[0] - corners[1]
            defer2 = min(max(corners[2] - corners[3] - rect_xi, 0.0), p1)
            z_region = _safe_ndtri(v_phi)
        else:
            corners = copula_cdf(np.array([u_hi, u_lo]), np.array([v_xi, v_xi]), rho)
            rect_xi = corners[0] - corners[1]
            defer2 = 0.0
            z_region = _safe_ndtri(v_xi)
        pa += min(max(rect_xi, 0.0), p1)
        pc += _conditional_q_raw(marg1, max(z_region, -_Z_MAX), c_lo, c_hi, rho)
        cost += (p1 - defer2) * cum_cost[1]
        if k == 2:
            return float(pc), float(cost), float(pa)
        if defer2 <= _MASS_FLOOR:
            return float(pc), float(cost), float(pa)
        # node representation of the reach measure on model 2's defer
        # interval; its density there is closed form
        z_lo2 = max(min(_safe_ndtri(v_xi), _safe_ndtri(v_phi)), -_Z_MAX)
        z_hi2 = min(max(_safe_ndtri(v_phi), z_lo2), _Z_MAX)
        z_nodes, w_nodes = _panel_nodes(z_lo2, z_hi2, _PROP_PANELS, _PROP_ORDER)
        s1 = math.sqrt(1.0 - rho * rho)
        gate_hi = ndtr((c_hi - rho * z_nodes) / s1) if math.isfinite(c_hi) else 1.0
        gate_lo = ndtr((c_lo - rho * z_nodes) / s1) if math.isfinite(c_lo) else 0.0
        w_meas = w_nodes * np.exp(-0.5 * z_nodes**2) / math.sqrt(2 * math.pi)
        w_meas = w_meas * (gate_hi - gate_lo)
    else:
        return float(pc), float(cost), float(pa)

    # models 3..k against the propagated reach measure
    for i in range(3, k + 1):
        reach = float(w_meas.sum())
        if reach <= _MASS_FLOOR:
            break
        marg = model.marginals[i - 1]
        rho = model.copulas[i - 2].rho
        s = math.sqrt(1.0 - rho * rho)
        mu = rho * z_nodes
        z_abst = _safe_ndtri(float(marg.cdf(abstention[i - 1])))
        pa_i = float(w_meas @ ndtr((z_abst - mu) / s)) if z_abst > -np.inf else 0.0
        if i < k:
            z_lo = _safe_ndtri(float(marg.cdf(min(abstention[i - 1], deferral[i - 1]))))
            z_hi = _safe_ndtri(float(marg.cdf(deferral[i - 1])))
            hi_term = ndtr((z_hi - mu) / s) if math.isfinite(z_hi) else 1.0
            lo_term = ndtr((z_lo - mu) / s) if z_lo > -np.inf else 0.0
            defer_i = float(w_meas @ np.maximum(hi_term - lo_term, 0.0))
            defer_i = min(defer_i, reach)
            region = z_hi
        else:
            defer_i = 0.0
            region = z_abst
        pc += _nodes_partial_q(marg, mu, w_meas, s, region)
        pa += pa_i
        cost += (reach - defer_i) * cum_cost[i - 1]
        if i < k:
            if defer_i <= _MASS_FLOOR:
                break
            lo_c = max(min(z_lo, z_hi), -_Z_MAX)
            hi_c = min(max(z_hi, lo_c), _Z_MAX)
            new_z, new_w = _panel_nodes(lo_c, hi_c, _PROP_PANELS, _PROP_ORDER)
            kernel = np.exp(
                -0.5 * ((new_z[:, None] - mu[None, :]) / s) ** 2
            ) / (s * math.sqrt(2 * math.pi))
            w_meas = new_w * (kernel @ w_meas)
            z_nodes = new_z
    return float(pc), float(cost), float(pa)


def analytic_performance(
    model: MarkovJointModel, spec: CascadeSpec, t: ThresholdVector
) -> AnalyticPerformance:
    """Evaluate the closed-form performance equations at a threshold vector."""
    validate_thresholds(spec, t)
    if model.k != spec.k:
        raise ValueError(f"model has k={model.k}, cascade has k={spec.k}")
    pc, cost, pa = _performance_terms(
        model, spec.expected_costs, np.array(t.deferral), np.array(t.abstention)
    )
    if pc + pa > 1.0 + PARTITION_TOL:
        raise ValueError(f"p_correct + p_abstention = {pc + pa} exceeds 1")
    pc = min(max(pc, 0.0), 1.0)
    pa = min(max(pa, 0.0), 1.0)
    p_err = min(max(1.0 - pc - pa, 0.0), 1.0)
    # keep the partition exact after clipping
    pc = 1.0 - pa - p_err
    return AnalyticPerformance(
        p_correct=pc, expected_cost=cost, p_abstention=pa, p_error_no_abstain=p_err
    )


def loss_from_performance(
    perf: AnalyticPerformance, lambda_cost: float, lambda_abstain: float
) -> float:
    return (
        perf.p_error_no_abstain
        + lambda_cost * perf.expected_cost
        + lambda_abstain * perf.p_abstention
    )


def analytic_loss(
    model: MarkovJointModel,
    spec: CascadeSpec,
    t: ThresholdVector,
    lambda_cost: float,
    lambda_abstain: float,
) -> float:
    """P(Error and not Abstention) + lambda_cost E[Cost] + lambda_abstain P(Abstention)."""
    if lambda_cost < 0 or lambda_abstain < 0:
        raise ValueError("preference parameters must be nonnegative")
    return loss_from_performance(
        analytic_performance(model, spec, t), lambda_cost, lambda_abstain
    )


def _loss_from_array(
    model: MarkovJointModel,
    costs: tuple[float, ...],
    x: np.ndarray,
    lambda_cost: float,
    lambda_abstain: float,
) -> float:
    """Loss at a flat [phi..., xi...] vector without architecture validation.

    Used by the gradient stencil and the optimizer's inner loop, both of
    which probe points the public validator would reject.
    """
    k = model.k
    deferral = x[: k - 1]
    abstention = x[k - 1 :]
    pc, cost, pa = _performance_terms(model, costs, deferral, abstention)
    p_err = min(max(1.0 - pc - pa, 0.0), 1.0)
    return p_err + lambda_cost * cost + lambda_abstain * min(max(pa, 0.0), 1.0)


def loss_gradient(
    model: MarkovJointModel,
    spec: CascadeSpec,
    t: ThresholdVector,
    lambda_cost: float,
    lambda_abstain: float,
    step: float = GRADIENT_STEP,
) -> np.ndarray:
    """Gradient of analytic_loss w.r.t. (phi_1..phi_{k-1}, xi_1..xi_k).

    Central differences with a small step on the smooth deterministic loss
    evaluation. Requires the whole stencil to stay strictly inside the
    feasible region: every component in (step, 1 - step) and each
    xi_i at least 2*step below phi_i - SEPARATION.
    """
    from .cascade import SEPARATION

    validate_thresholds(spec, t)
    if model.k != spec.k:
        raise ValueError(f"model has k={model.k}, cascade has k={spec.k}")
    x = t.as_array()
    k = spec.k
    if np.any(x < step) or np.any(x > 1.0 - step):
        raise ValueError("gradient stencil leaves (0, 1): move off the boundary")
    for i in range(k - 1):
        if x[k - 1 + i] > x[i] - SEPARATION - 2 * step:
            raise ValueError(
                f"abstention threshold {i + 1} too close to its deferral threshold "
                "for a finite-difference stencil"
            )
    costs = spec.expected_costs
    grad = np.empty(x.size)
    for j in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[j] += step
        lo[j] -= step
        grad[j] = (
            _loss_from_array(model, costs, hi, lambda_cost, lambda_abstain)
            - _loss_from_array(model, costs, lo, lambda_cost, lambda_abstain)
        ) / (2.0 * step)
    return grad
