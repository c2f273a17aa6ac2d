"""Constrained threshold optimization and preference-grid sweeps.

Each user-preference pair (lambda_cost, lambda_abstain) gets its own
constrained minimization of the analytic cascade loss over the threshold
vector, run multi-start with a sequential-least-squares solver. Sweeping
a preference grid and averaging the per-cell optima yields the overall
loss used to compare the early-abstention and final-model-abstention
architectures. A light outlier-smoothing pass cleans numerical artifacts
from the optimal-threshold grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize
from scipy.special import ndtr

from .cascade import (
    SEPARATION,
    Architecture,
    CascadeSpec,
    PerformanceVector,
    QueryRecord,
    ThresholdVector,
    empirical_loss,
    evaluate_empirical,
    validate_thresholds,
)
from .density import MarkovJointModel, copula_cdf
from .metrics import (
    AnalyticPerformance,
    analytic_performance,
    loss_from_performance,
    _loss_from_array,
)

BOX_MARGIN = 1e-4  # deferral thresholds live in [BOX_MARGIN, 1 - BOX_MARGIN]
ORACLE_MAX_K = 2


@dataclass(frozen=True)
class PreferenceGrid:
    """The grid of user preferences Lambda_cost x Lambda_abstain."""

    lambdas_cost: tuple[float, ...]
    lambdas_abs: tuple[float, ...]

    def __post_init__(self):
        for name in ("lambdas_cost", "lambdas_abs"):
            vals = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            if len(vals) == 0:
                raise ValueError(f"{name} must be nonempty")
            if any(v < 0 for v in vals):
                raise ValueError(f"{name} must be nonnegative")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"{name} must be strictly increasing")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.lambdas_cost), len(self.lambdas_abs)


def default_preference_grid(
    spec: CascadeSpec, n_cost: int = 10, n_abs: int = 10
) -> PreferenceGrid:
    """Cost weights log-spaced so lambda_c * total cost spans [1e-2, 1] of the
    loss scale; abstention weights linear in [0, 1]."""
    total_cost = sum(spec.expected_costs)
    lc = np.logspace(-2.0, 0.0, n_cost) / max(total_cost, 1e-12)
    la = np.linspace(0.0, 1.0, n_abs)
    return PreferenceGrid(tuple(lc), tuple(la))


@dataclass(frozen=True)
class OptimizerOptions:
    n_starts: int = 12
    warm_n_starts: int = 3  # per-cell starts once a warm start is available
    seed: int = 0
    max_iter: int = 150
    ftol: float = 1e-12


@dataclass(frozen=True)
class SweepCell:
    lambda_cost: float
    lambda_abs: float
    thresholds: ThresholdVector
    train_loss: float
    performance: AnalyticPerformance
    converged: bool
    n_restarts_used: int


@dataclass(frozen=True)
class SweepResult:
    grid: PreferenceGrid
    architecture: Architecture
    cells: tuple[tuple[SweepCell, ...], ...]  # [i_cost][j_abs]
    overall_loss: float
    smoothing: dict | None = None

    def cell_losses(self) -> np.ndarray:
        return np.array([[c.train_loss for c in row] for row in self.cells])

    def threshold_arrays(self) -> np.ndarray:
        return np.array([[c.thresholds.as_array() for c in row] for row in self.cells])


# ---------------------------------------------------------------------------
# Per-preference optimization
# ---------------------------------------------------------------------------


def _decision_indices(spec: CascadeSpec) -> np.ndarray:
    """Indices of free coordinates in the flat [phi..., xi...] layout."""
    k = spec.k
    if spec.architecture is Architecture.FINAL:
        # deferral thresholds plus the final abstention threshold only
        return np.concatenate([np.arange(k - 1), [2 * k - 2]]).astype(int)
    return np.arange(2 * k - 1)


def _embed(spec: CascadeSpec, decision: np.ndarray) -> np.ndarray:
    x = np.zeros(2 * spec.k - 1)
    x[_decision_indices(spec)] = decision
    return x


def _repair(spec: CascadeSpec, x: np.ndarray) -> np.ndarray:
    """Project a flat threshold vector into the closed feasible set."""
    k = spec.k
    x = x.copy()
    x[: k - 1] = np.clip(x[: k - 1], BOX_MARGIN, 1.0 - BOX_MARGIN)
    x[k - 1 :] = np.clip(x[k - 1 :], 0.0, 1.0 - BOX_MARGIN)
    if spec.architecture is Architecture.FINAL:
        x[k - 1 : 2 * k - 2] = 0.0
    for i in range(k - 1):
        x[k - 1 + i] = min(x[k - 1 + i], x[i] - SEPARATION)
    return x


def _structured_starts(model: MarkovJointModel, spec: CascadeSpec) -> list[np.ndarray]:
    """Feasible starting points covering the characteristic regimes.

    Marginal-quantile starts plus the no-deferral (abstain-or-answer at the
    small model), no-abstention, and defer-everything corners: the loss
    landscape has distinct basins at these configurations.
    """
    k = spec.k

    def quantiles(q_phi, q_xi, xi_at_phi=False):
        x = np.zeros(2 * k - 1)
        for i in range(k - 1):
            x[i] = float(model.marginals[i].quantile(q_phi))
            x[k - 1 + i] = x[i] if xi_at_phi else float(model.marginals[i].quantile(q_xi))
        x[2 * k - 2] = float(model.marginals[k - 1].quantile(q_phi if xi_at_phi else q_xi))
        return _repair(spec, x)

    defer_all = np.zeros(2 * k - 1)
    defer_all[: k - 1] = 1.0 - BOX_MARGIN
    answer_all = np.zeros(2 * k - 1)
    answer_all[: k - 1] = BOX_MARGIN
    return [
        quantiles(0.4, 0.1),
        quantiles(0.5, 0.5, xi_at_phi=True),  # no deferral
        quantiles(0.9, 0.85),  # abstain-heavy
        quantiles(0.4, 0.0),  # no abstention
        quantiles(0.75, 0.75, xi_at_phi=True),  # abstain-or-answer, high bar
        quantiles(0.6, 0.02),
        _repair(spec, defer_all),
        quantiles(0.25, 0.25, xi_at_phi=True),
        quantiles(0.2, 0.05),
        _repair(spec, answer_all),
    ]


def optimize_thresholds(
    model: MarkovJointModel,
    spec: CascadeSpec,
    lambda_cost: float,
    lambda_abs: float,
    opts: OptimizerOptions | None = None,
    extra_starts: tuple[ThresholdVector, ...] = (),
    n_starts: int | None = None,
    rng: np.random.Generator | None = None,
) -> SweepCell:
    """Minimize the analytic cascade loss over feasible thresholds.

    Multi-start sequential least squares under the separation constraints
    xi_i <= phi_i - SEPARATION (early architecture) or with the early
    abstention thresholds pinned to zero (final-model architecture). Every
    start's end point is compared against its own initial point, so the
    returned loss never exceeds the loss of any supplied start.
    """
    if lambda_cost < 0 or lambda_abs < 0:
        raise ValueError("preference parameters must be nonnegative")
    if model.k != spec.k:
        raise ValueError(f"model has k={model.k}, cascade has k={spec.k}")
    opts = opts or OptimizerOptions()
    if n_starts is None:
        n_starts = opts.n_starts
    if n_starts < 1:
        raise ValueError("need at least one start")
    if rng is None:
        rng = np.random.default_rng(opts.seed)
    k = spec.k
    costs = spec.expected_costs
    idx = _decision_indices(spec)

    def objective(decision: np.ndarray) -> float:
        x = _repair(spec, _embed(spec, decision))
        return _loss_from_array(model, costs, x, lambda_cost, lambda_abs)

    bounds = []
    for j in idx:
        if j < k - 1:
            bounds.append((BOX_MARGIN, 1.0 - BOX_MARGIN))
        else:
            bounds.append((0.0, 1.0 - BOX_MARGIN))
    constraints = []
    if spec.architecture is Architecture.EARLY:
        for i in range(k - 1):
            pos_phi = int(np.where(idx == i)[0][0])
            pos_xi = int(np.where(idx == (k - 1 + i))[0][0])

            def sep(decision, a=pos_phi, b=pos_xi):
                return decision[a] - decision[b] - SEPARATION

            constraints.append({"type": "ineq", "fun": sep})

    starts = _structured_starts(model, spec)[:n_starts]
    starts.extend(_repair(spec, t.as_array()) for t in extra_starts)
    while len(starts) < n_starts + len(extra_starts):
        x = np.zeros(2 * k - 1)
        x[: k - 1] = rng.uniform(BOX_MARGIN, 1.0 - BOX_MARGIN, size=k - 1)
        x[k - 1 :] = rng.uniform(0.0, 1.0 - BOX_MARGIN, size=k)
        starts.append(_repair(spec, x))

    best_x, best_loss, converged = None, np.inf, False
    for start in starts:
        d0 = start[idx]
        with warnings.catch_warnings():
            # SLSQP steps occasionally poke outside the box and get clipped
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.minimize(
                objective,
                d0,
                method="SLSQP",
                bounds=bounds,
                constraints=constraints,
                options={"maxiter": opts.max_iter, "ftol": opts.ftol},
            )
        for cand in (res.x, d0):  # never lose to the start itself
            x = _repair(spec, _embed(spec, cand))
            loss = _loss_from_array(model, costs, x, lambda_cost, lambda_abs)
            better = loss < best_loss - 1e-12
            tie_smaller = abs(loss - best_loss) <= 1e-12 and (
                best_x is None or tuple(x) < tuple(best_x)
            )
            if better or tie_smaller:
                best_x, best_loss = x, loss
        converged = converged or bool(res.success)

    thresholds = ThresholdVector.from_array(best_x, k)
    validate_thresholds(spec, thresholds)
    perf = analytic_performance(model, spec, thresholds)
    return SweepCell(
        lambda_cost=float(lambda_cost),
        lambda_abs=float(lambda_abs),
        thresholds=thresholds,
        train_loss=float(loss_from_performance(perf, lambda_cost, lambda_abs)),
        performance=perf,
        converged=converged,
        n_restarts_used=len(starts),
    )


# ---------------------------------------------------------------------------
# Brute-force grid oracle (k <= 2)
# ---------------------------------------------------------------------------


def brute_force_oracle(
    model: MarkovJointModel,
    spec: CascadeSpec,
    lambda_cost: float,
    lambda_abs: float,
    resolution: int,
) -> tuple[ThresholdVector, float]:
    """Exhaustive evaluation of the analytic loss on a uniform feasible grid.

    Deliberately accepts the grid-search runtime at small k to certify the
    continuous optimizer. The loss cube is assembled from vectorized
    closed-form pieces that agree pointwise with analytic_loss (tested).
    """
    if resolution < 11:
        raise ValueError(f"resolution must be >= 11, got {resolution}")
    if model.k != spec.k:
        raise ValueError(f"model has k={model.k}, cascade has k={spec.k}")
    if spec.k > ORACLE_MAX_K:
        raise ValueError(
            f"grid oracle supports k <= {ORACLE_MAX_K} (2k-1 <= 3 dimensions); "
            f"got k={spec.k}"
        )
    if lambda_cost < 0 or lambda_abs < 0:
        raise ValueError("preference parameters must be nonnegative")
    k = spec.k
    costs = spec.expected_costs
    marg0 = model.marginals[0]
    xi_grid = np.linspace(0.0, 1.0 - BOX_MARGIN, resolution)

    if k == 1:
        w = np.array(marg0.weights)
        a = np.array(marg0.alphas)
        b = np.array(marg0.betas)
        from scipy.special import betainc

        pc = ((a / (a + b)) * (1.0 - betainc(a + 1.0, b, xi_grid[:, None]).T)).T @ w
        pa = marg0.cdf(xi_grid)
        loss = (1.0 - pc - pa) + lambda_cost * costs[0] + lambda_abs * pa
        j = int(np.argmin(loss))
        return ThresholdVector((), (float(xi_grid[j]),)), float(loss[j])

    phi_grid = np.linspace(BOX_MARGIN, 1.0 - BOX_MARGIN, resolution)
    if spec.architecture is Architecture.FINAL:
        xi1_grid = np.array([0.0])
    else:
        xi1_grid = xi_grid
    marg1 = model.marginals[1]
    rho = model.copulas[0].rho

    from scipy.special import betainc, ndtri

    w0 = np.array(marg0.weights); a0 = np.array(marg0.alphas); b0 = np.array(marg0.betas)
    w1 = np.array(marg1.weights); a1 = np.array(marg1.alphas); b1 = np.array(marg1.betas)

    cdf0_phi = marg0.cdf(phi_grid)
    cdf0_xi = marg0.cdf(xi1_grid)
    q1_phi = ((a0 / (a0 + b0)) * (1.0 - betainc(a0 + 1.0, b0, phi_grid[:, None]))) @ w0
    pa1_xi = cdf0_xi.copy()
    p1 = np.clip(cdf0_phi[None, :] - cdf0_xi[:, None], 0.0, 1.0)  # (i_xi1, j_phi)

    # G(t, b) = E[X2 1{X2 > t} 1{X1 <= b}] on the xi2 grid for both b-grids,
    # integrated in the Gaussian z-domain of X2 with panel edges at the grid.
    v_t = np.clip(marg1.cdf(xi_grid), 1e-300, 1.0 - 1e-16)
    z_t = ndtri(v_t)
    z_edges = np.unique(np.concatenate([np.clip(z_t, -8.6, 8.6), [-8.6, 8.6]]))
    nodes, wts = np.polynomial.legendre.leggauss(16)
    az = z_edges[:-1][:, None]
    bz = z_edges[1:][:, None]
    zs = 0.5 * (az + bz) + 0.5 * (bz - az) * nodes[None, :]
    half = 0.5 * (bz - az)[:, 0]
    from .density import _eval_quantile_map

    zf = zs.ravel()
    qphi = _eval_quantile_map(marg1, zf) * np.exp(-0.5 * zf * zf) / math.sqrt(2 * math.pi)
    s = math.sqrt(1.0 - rho * rho)

    def g_table(b_vals, cdf_b):
        c = ndtri(np.clip(cdf_b, 1e-300, 1.0 - 1e-16))
        hw = ndtr((c[:, None] - rho * zf[None, :]) / s)  # (n_b, n_z)
        hw = np.where(cdf_b[:, None] >= 1.0 - 1e-16, 1.0, hw)
        hw = np.where(cdf_b[:, None] <= 1e-300, 0.0, hw)
        integ = (hw * qphi[None, :]).reshape(len(b_vals), len(half), nodes.size)
        panel = integ @ wts * half[None, :]
        suffix = np.concatenate(
            [np.cumsum(panel[:, ::-1], axis=1)[:, ::-1], np.zeros((len(b_vals), 1))], axis=1
        )
        # integral from z_t to +inf = suffix sum at the edge position of z_t
        pos = np.searchsorted(z_edges, np.clip(z_t, -8.6, 8.6))
        return suffix[:, pos]  # (n_b, n_t)

    G_phi = g_table(phi_grid, cdf0_phi)
    G_xi = g_table(xi1_grid, cdf0_xi)
    # A(t, b) = P(X2 < t, X1 <= b) via the copula CDF
    A_phi = copula_cdf(cdf0_phi[:, None], v_t[None, :], rho)
    A_xi = copula_cdf(cdf0_xi[:, None], v_t[None, :], rho)

    # loss = const + T_ij + T_jl + T_il over (i=xi1, j=phi, l=xi2)
    const = 1.0 + lambda_cost * costs[0]
    T_ij = (
        lambda_cost * costs[1] * p1
        + (lambda_abs - 1.0) * pa1_xi[:, None]
        - q1_phi[None, :]
    )
    T_jl = -G_phi + (lambda_abs - 1.0) * A_phi  # (j, l)
    T_il = G_xi - (lambda_abs - 1.0) * A_xi  # (i, l)

    feasible = xi1_grid[:, None] <= phi_grid[None, :] - SEPARATION
    best = (np.inf, 0, 0, 0)
    for j in range(resolution):
        col = T_jl[j][None, :] + T_il  # (i, l)
        l_star = np.argmin(col, axis=1)
        vals = T_ij[:, j] + col[np.arange(len(xi1_grid)), l_star]
        vals = np.where(feasible[:, j], vals, np.inf)
        i_star = int(np.argmin(vals))
        if vals[i_star] < best[0]:
            best = (float(vals[i_star]), i_star, j, int(l_star[i_star]))
    loss, i, j, l = best
    if not math.isfinite(loss):
        raise ValueError("no feasible grid point at this resolution")
    t = ThresholdVector(
        (float(phi_grid[j]),), (float(xi1_grid[i]), float(xi_grid[l]))
    )
    return t, loss + const


# ---------------------------------------------------------------------------
# Preference-grid sweep, smoothing, architecture comparison
# ---------------------------------------------------------------------------


def sweep_preference_grid(
    model: MarkovJointModel,
    spec: CascadeSpec,
    grid: PreferenceGrid,
    opts: OptimizerOptions | None = None,
    extra_start_grid: list[list[ThresholdVector]] | None = None,
) -> SweepResult:
    """One optimization per preference cell, row-major with warm starts.

    Each cell reuses the previous cell's solution (left neighbor, or the
    cell above at the start of a row) as an additional start. The overall
    loss is the mean of the per-cell optimal losses.
    """
    opts = opts or OptimizerOptions()
    n_c, n_a = grid.shape
    cells: list[list[SweepCell]] = []
    for i, lc in enumerate(grid.lambdas_cost):
        row: list[SweepCell] = []
        for j, la in enumerate(grid.lambdas_abs):
            extras: list[ThresholdVector] = []
            if j > 0:
                extras.append(row[j - 1].thresholds)
            elif i > 0:
                extras.append(cells[i - 1][0].thresholds)
            if extra_start_grid is not None:
                extras.append(extra_start_grid[i][j])
            rng = np.random.default_rng((opts.seed, i, j))
            n_starts = opts.n_starts if (i == 0 and j == 0) else opts.warm_n_starts
            row.append(
                optimize_thresholds(
                    model, spec, lc, la, opts,
                    extra_starts=tuple(extras), n_starts=n_starts, rng=rng,
                )
            )
        cells.append(row)
    overall = float(np.mean([[c.train_loss for c in row] for row in cells]))
    return SweepResult(
        grid=grid,
        architecture=spec.architecture,
        cells=tuple(tuple(row) for row in cells),
        overall_loss=overall,
    )


def _neighbor_indices(i: int, j: int, n_i: int, n_j: int):
    if i > 0:
        yield i - 1, j
    if i < n_i - 1:
        yield i + 1, j
    if j > 0:
        yield i, j - 1
    if j < n_j - 1:
        yield i, j + 1


def smooth_threshold_grid(
    result: SweepResult,
    model: MarkovJointModel,
    spec: CascadeSpec,
    r: float = 10.0,
) -> SweepResult:
    """Flag and replace outlier threshold vectors on the preference grid.

    Step 1 flags every cell whose component-mean threshold deviates from
    the mean of its (up to four) neighbors by more than r times the
    neighbors' variance, i.e. (tbar - mean_N)^2 > r * Var_N. Step 2
    replaces each flagged cell's thresholds with the componentwise mean of
    its non-flagged neighbors and re-evaluates the loss there. Cells whose
    neighbors are all flagged are left unchanged and reported.
    """
    if r <= 0:
        raise ValueError(f"outlier factor r must be positive, got {r}")
    n_i, n_j = result.grid.shape
    if n_i < 2 or n_j < 2:
        raise ValueError("smoothing needs a grid of at least 2x2 cells")
    thetas = result.threshold_arrays()  # (n_i, n_j, 2k-1)
    tbar = thetas.mean(axis=2)
    flagged = np.zeros((n_i, n_j), dtype=bool)
    for i in range(n_i):
        for j in range(n_j):
            nb = [tbar[a, b] for a, b in _neighbor_indices(i, j, n_i, n_j)]
            nb = np.array(nb)
            if (tbar[i, j] - nb.mean()) ** 2 > r * nb.var():
                flagged[i, j] = True

    new_cells = [list(row) for row in result.cells]
    unreplaced = 0
    for i in range(n_i):
        for j in range(n_j):
            if not flagged[i, j]:
                continue
            donors = [
                thetas[a, b]
                for a, b in _neighbor_indices(i, j, n_i, n_j)
                if not flagged[a, b]
            ]
            if not donors:
                unreplaced += 1
                continue
            cell = result.cells[i][j]
            t = ThresholdVector.from_array(np.mean(donors, axis=0), spec.k)
            validate_thresholds(spec, t)
            perf = analytic_performance(model, spec, t)
            loss = loss_from_performance(perf, cell.lambda_cost, cell.lambda_abs)
            new_cells[i][j] = replace(
                cell, thresholds=t, train_loss=float(loss), performance=perf
            )
    overall = float(np.mean([[c.train_loss for c in row] for row in new_cells]))
    return SweepResult(
        grid=result.grid,
        architecture=result.architecture,
        cells=tuple(tuple(row) for row in new_cells),
        overall_loss=overall,
        smoothing={
            "r": float(r),
            "flagged_fraction": float(flagged.mean()),
            "unreplaced_cells": unreplaced,
        },
    )


@dataclass(frozen=True)
class ArchitectureComparison:
    """Early vs final-model abstention over the same model and grid."""

    label: str
    grid: PreferenceGrid
    early: SweepResult  # smoothed
    final: SweepResult  # smoothed
    early_raw: SweepResult
    final_raw: SweepResult
    test_early: tuple[tuple[PerformanceVector, ...], ...] | None = None
    test_final: tuple[tuple[PerformanceVector, ...], ...] | None = None


def _pct_delta(early: float, final: float) -> float | None:
    if abs(final) < 1e-15:
        return None if abs(early) >= 1e-15 else 0.0
    return (early - final) / final * 100.0


def compare_architectures(
    model: MarkovJointModel,
    spec: CascadeSpec,
    grid: PreferenceGrid,
    opts: OptimizerOptions | None = None,
    smooth_r: float = 10.0,
    test_data: list[QueryRecord] | None = None,
    label: str = "",
) -> ArchitectureComparison:
    """Sweep both architectures, smooth, and (optionally) score on test data.

    The final-model sweep runs first and its per-cell solutions seed the
    early sweep, so the early architecture's richer feasible set can never
    lose to its own restriction.
    """
    opts = opts or OptimizerOptions()
    final_spec = CascadeSpec(spec.models, Architecture.FINAL)
    early_spec = CascadeSpec(spec.models, Architecture.EARLY)
    final_raw = sweep_preference_grid(model, final_spec, grid, opts)
    warm = [[cell.thresholds for cell in row] for row in final_raw.cells]
    early_raw = sweep_preference_grid(
        model, early_spec, grid, opts, extra_start_grid=warm
    )
    do_smooth = min(grid.shape) >= 2
    final_sm = (
        smooth_threshold_grid(final_raw, model, final_spec, r=smooth_r)
        if do_smooth
        else final_raw
    )
    early_sm = (
        smooth_threshold_grid(early_raw, model, early_spec, r=smooth_r)
        if do_smooth
        else early_raw
    )
    test_early = test_final = None
    if test_data is not None:
        test_early = tuple(
            tuple(evaluate_empirical(early_spec, c.thresholds, test_data) for c in row)
            for row in early_sm.cells
        )
        test_final = tuple(
            tuple(evaluate_empirical(final_spec, c.thresholds, test_data) for c in row)
            for row in final_sm.cells
        )
    return ArchitectureComparison(
        label=label,
        grid=grid,
        early=early_sm,
        final=final_sm,
        early_raw=early_raw,
        final_raw=final_raw,
        test_early=test_early,
        test_final=test_final,
    )


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------


def sweep_result_to_dict(result: SweepResult) -> dict:
    cells = []
    for row in result.cells:
        out_row = []
        for c in row:
            out_row.append(
                {
                    "lc": c.lambda_cost,
                    "la": c.lambda_abs,
                    "phi": list(c.thresholds.deferral),
                    "xi": list(c.thresholds.abstention),
                    "loss": c.train_loss,
                    "error": c.performance.p_error_no_abstain,
                    "cost": c.performance.expected_cost,
                    "abstention": c.performance.p_abstention,
                    "converged": c.converged,
                }
            )
        cells.append(out_row)
    return {
        "grid": {
            "lambdas_cost": list(result.grid.lambdas_cost),
            "lambdas_abs": list(result.grid.lambdas_abs),
        },
        "cells": cells,
        "overall_loss": result.overall_loss,
        "architecture": result.architecture.value,
        "smoothing": result.smoothing,
    }


def comparison_to_dict(cmp: ArchitectureComparison) -> dict:
    """Comparison report: per-cell and overall percentage deltas.

    Loss/error/cost deltas are percentage changes (early - final) / final;
    abstention is reported as an absolute difference since final-model
    abstention often uses none at all.
    """
    n_i, n_j = cmp.grid.shape
    use_test = cmp.test_early is not None

    def cell_metrics(sweep, test, i, j):
        c = sweep.cells[i][j]
        base = {
            "phi": list(c.thresholds.deferral),
            "xi": list(c.thresholds.abstention),
            "train_loss": c.train_loss,
            "error": c.performance.p_error_no_abstain,
            "cost": c.performance.expected_cost,
            "abstention": c.performance.p_abstention,
        }
        if use_test:
            p = test[i][j]
            base["test"] = {
                "loss": empirical_loss(p, c.lambda_cost, c.lambda_abs),
                "error": p.error,
                "cost": p.cost,
                "abstention": p.abstention,
            }
        return base

    cells = []
    for i in range(n_i):
        row = []
        for j in range(n_j):
            e = cell_metrics(cmp.early, cmp.test_early, i, j)
            f = cell_metrics(cmp.final, cmp.test_final, i, j)
            e_loss = e["test"]["loss"] if use_test else e["train_loss"]
            f_loss = f["test"]["loss"] if use_test else f["train_loss"]
            row.append(
                {
                    "lc": cmp.early.cells[i][j].lambda_cost,
                    "la": cmp.early.cells[i][j].lambda_abs,
                    "early": e,
                    "final": f,
                    "pct_delta_loss": _pct_delta(e_loss, f_loss),
                }
            )
        cells.append(row)

    def aggregate(sweep, test):
        if use_test:
            losses = [
                empirical_loss(test[i][j], c.lambda_cost, c.lambda_abs)
                for i, row in enumerate(sweep.cells)
                for j, c in enumerate(row)
            ]
            errs = [p.error for row in test for p in row]
            costs = [p.cost for row in test for p in row]
            absts = [p.abstention for row in test for p in row]
        else:
            losses = [c.train_loss for row in sweep.cells for c in row]
            errs = [c.performance.p_error_no_abstain for row in sweep.cells for c in row]
            costs = [c.performance.expected_cost for row in sweep.cells for c in row]
            absts = [c.performance.p_abstention for row in sweep.cells for c in row]
        return (
            float(np.mean(losses)),
            float(np.mean(errs)),
            float(np.mean(costs)),
            float(np.mean(absts)),
        )

    e_loss, e_err, e_cost, e_abs = aggregate(cmp.early, cmp.test_early)
    f_loss, f_err, f_cost, f_abs = aggregate(cmp.final, cmp.test_final)
    return {
        "label": cmp.label,
        "basis": "test" if use_test else "train",
        "grid": {
            "lambdas_cost": list(cmp.grid.lambdas_cost),
            "lambdas_abs": list(cmp.grid.lambdas_abs),
        },
        "cells": cells,
        "overall": {
            "early_loss": e_loss,
            "final_loss": f_loss,
            "pct_delta_loss": _pct_delta(e_loss, f_loss),
            "early_error": e_err,
            "final_error": f_err,
            "pct_delta_error": _pct_delta(e_err, f_err),
            "early_cost": e_cost,
            "final_cost": f_cost,
            "pct_delta_cost": _pct_delta(e_cost, f_cost),
            "early_abstention": e_abs,
            "final_abstention": f_abs,
            "delta_abstention": e_abs - f_abs,
        },
        "smoothing": {
            "early": cmp.early.smoothing,
            "final": cmp.final.smoothing,
        },
    }
