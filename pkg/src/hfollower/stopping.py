"""Optimal stopping of the uncontrolled diffusion against the affine payoff.

Two solvers cover the two regimes.  When the payoff depends on the control
mode alone, the problem reduces to a 1-D obstacle problem

    min{ (rho - lambda) u - lambda y u' - 1/2 sigma^2 u'', u - phi } = 0

solved by projected SOR with central differences.  For payoffs coupling
several modes, least-squares Monte Carlo runs the dynamic-programming
backward induction on polynomial features of the full mode vector.

Never stopping is admissible and worth 0 (the discounted payoff of a
bounded-growth function vanishes at infinity), which is why grid edges
clamp u = max(phi, 0) and the LSMC terminal value is max(phi, 0).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, mc, serialize
from .costs import CostSpec
from .dynamics import mode_decay, mode_step_std
from .errors import (
    DegenerateNoise,
    IllConditionedRegression,
    NoBoundary,
    NoConvergence,
    UnsupportedCostKind,
)
from .grids import Grid1D, TimeGrid
from .model import SpectralModel, phi_closed_form

STOP, CONTINUE = "stop", "continue"


def reduced_payoff(model: SpectralModel, cost: CostSpec) -> tuple[float, float]:
    """(slope, intercept) of the payoff as a function of the control mode alone.

    Requires the payoff's slope to be supported on the control mode, which
    holds for every separable cost and for rank-one costs aligned with it.
    """
    phi = phi_closed_form(model, cost)
    k = model.control_mode
    others = np.delete(np.arange(model.n_modes), k)
    if np.any(phi.slope[others] != 0.0):
        raise UnsupportedCostKind(
            "payoff couples several modes; use the regression solver"
        )
    return float(phi.slope[k]), float(phi.intercept)


def default_stopping_grid(model: SpectralModel, cost: CostSpec,
                          spacing: float = 1e-2,
                          margin_stds: float = 6.0) -> Grid1D:
    """Interval covering the payoff's sign change and the origin with margin."""
    slope, intercept = reduced_payoff(model, cost)
    sd = max(model.stationary_std(), 1e-6)
    zero = -intercept / slope if slope != 0.0 else 0.0
    lo = min(zero, 0.0) - (margin_stds + 2.0) * sd
    hi = max(zero, 0.0) + margin_stds * sd
    n = int(round((hi - lo) / spacing)) + 1
    return Grid1D(lo=lo, hi=hi, n_points=max(n, 3))


@dataclass(frozen=True)
class StoppingSolution:
    grid: Grid1D
    u_values: np.ndarray
    phi_values: np.ndarray
    region: np.ndarray          # array of {"stop", "continue"}
    boundary: float | None
    du_values: np.ndarray       # centered first differences
    residuals: np.ndarray       # PDE operator applied to u
    phi_slope: float
    phi_intercept: float
    meta: dict = field(default_factory=dict)

    def interp_u(self, y):
        return np.interp(y, self.grid.nodes, self.u_values)

    def value(self, model: SpectralModel, x) -> float:
        """U at a full state; the payoff only reads the control mode."""
        x = np.asarray(x, dtype=float)
        return float(self.interp_u(x[..., model.control_mode]))

    def to_csv(self, path_or_buf=None) -> str:
        return serialize.write_csv(
            path_or_buf,
            ["y", "u", "phi", "region", "du", "residual"],
            [self.grid.nodes, self.u_values, self.phi_values, self.region,
             self.du_values, self.residuals],
        )


def _psor_sweep_arrays(y, lam, sig2, rho_eff, dy):
    alpha = lam * y / (2.0 * dy) - sig2 / (2.0 * dy * dy)
    gamma = -lam * y / (2.0 * dy) - sig2 / (2.0 * dy * dy)
    beta = rho_eff + sig2 / (dy * dy)
    return alpha, beta, gamma


def estimate_relaxation(alpha, beta, gamma, n):
    """Young's optimal SOR factor from a Jacobi-radius bound for the tridiagonal."""
    prod = np.maximum(alpha[1:-1] * gamma[1:-1], 0.0)
    rj = 2.0 * np.sqrt(prod).max() / beta * math.cos(math.pi / (n - 1))
    rj = min(rj, 1.0 - 1e-12)
    return min(2.0 / (1.0 + math.sqrt(1.0 - rj * rj)), 1.98)


def solve_vi_fd(model: SpectralModel, cost: CostSpec, grid1d: Grid1D,
                tol_update: float = 1e-10, tol_residual: float = 1e-9,
                relax: float | None = None, max_iter: int = 100_000,
                project: bool = True) -> StoppingSolution:
    """Projected SOR for the 1-D obstacle problem on the control mode.

    Edges clamp u = max(phi, 0); `relax=None` picks Young's optimal factor
    for the assembled system.  `project=False` disables the obstacle
    projection (negative-control hook: the result then solves the bare PDE
    and must fail the obstacle and smooth-fit diagnostics).
    """
    k = model.control_mode
    sig = float(model.noise_coeffs[k])
    if sig <= 0.0:
        raise DegenerateNoise("control mode carries no noise")
    slope, intercept = reduced_payoff(model, cost)
    lam = model.control_eigenvalue
    rho_eff = model.discount - lam
    y = grid1d.nodes
    dy = grid1d.spacing
    phi = slope * y + intercept
    alpha, beta, gamma = _psor_sweep_arrays(y, lam, sig * sig, rho_eff, dy)
    omega = estimate_relaxation(alpha, beta, gamma, len(y)) if relax is None else relax

    u = np.maximum(phi, 0.0)
    u[0] = max(phi[0], 0.0)
    u[-1] = max(phi[-1], 0.0)
    idx = np.arange(1, len(y) - 1)
    reds = idx[idx % 2 == 1]
    blacks = idx[idx % 2 == 0]
    obstacle = phi if project else np.full_like(phi, -np.inf)

    def sweep_color(nodes):
        gs = -(alpha[nodes] * u[nodes - 1] + gamma[nodes] * u[nodes + 1]) / beta
        new = np.maximum(obstacle[nodes], u[nodes] + omega * (gs - u[nodes]))
        delta = np.abs(new - u[nodes]).max() if len(nodes) else 0.0
        u[nodes] = new
        return delta

    def residual():
        r = np.empty_like(u)
        r[0] = r[-1] = 0.0
        r[1:-1] = alpha[1:-1] * u[:-2] + beta * u[1:-1] + gamma[1:-1] * u[2:]
        return r

    iterations = 0
    converged = False
    while iterations < max_iter:
        delta = max(sweep_color(reds), sweep_color(blacks))
        iterations += 1
        if delta < tol_update and (iterations % 16 == 0 or delta == 0.0):
            r = residual()
            contact = (u - phi) <= 10.0 * tol_update
            cont_res = np.abs(r[1:-1][~contact[1:-1]])
            ok_cont = cont_res.max() < tol_residual if cont_res.size else True
            ok_sign = r[1:-1].min() > -tol_residual if project else True
            if ok_cont and ok_sign:
                converged = True
                break
    if not converged:
        raise NoConvergence(
            f"projected SOR: {iterations} sweeps, last update {delta:.3e}"
        )

    r = residual()
    contact = (u - phi) <= 10.0 * tol_update
    region = np.where(contact, STOP, CONTINUE)
    region[0] = STOP if u[0] <= phi[0] + 10.0 * tol_update else CONTINUE
    region[-1] = STOP if u[-1] <= phi[-1] + 10.0 * tol_update else CONTINUE
    boundary = _lower_boundary(y, region)
    du = np.gradient(u, dy)
    return StoppingSolution(
        grid=grid1d, u_values=u, phi_values=phi, region=region,
        boundary=boundary, du_values=du, residuals=r,
        phi_slope=slope, phi_intercept=intercept,
        meta={"iterations": iterations, "relaxation": float(omega),
              "tol_update": tol_update, "tol_residual": tol_residual,
              "projected": bool(project)},
    )


def _lower_boundary(y, region):
    """Largest node of the contiguous stop block growing from the lower edge."""
    if region[0] != STOP:
        return None
    j = 0
    while j + 1 < len(y) and region[j + 1] == STOP:
        j += 1
    return float(y[j])


# ---------------------------------------------------------------------------
# least-squares Monte Carlo for multi-mode payoffs

def _total_degree_exponents(n_modes: int, degree: int):
    exps = []
    for combo in itertools.product(range(degree + 1), repeat=n_modes):
        if sum(combo) <= degree:
            exps.append(combo)
    exps.sort(key=lambda e: (sum(e), e))
    return exps


def _features(X, exps, center, scale):
    Z = (X - center) / scale
    cols = [np.ones(Z.shape[0])]
    for e in exps[1:]:
        col = np.ones(Z.shape[0])
        for k, p in enumerate(e):
            if p:
                col = col * Z[:, k] ** p
        cols.append(col)
    return np.column_stack(cols)


def _regress(F, yvec):
    """Normal equations, falling back to SVD least squares when ill-conditioned."""
    A = F.T @ F
    cond = np.linalg.cond(A)
    if cond > 1e8:
        coef, *_ = np.linalg.lstsq(F, yvec, rcond=None)
        return coef, cond
    coef = np.linalg.solve(A, F.T @ yvec)
    return coef, cond


def _NEVER_STOP_COEF(n_features: int) -> np.ndarray:
    """Continuation stand-in so large that no payoff beats it."""
    out = np.zeros(n_features)
    out[0] = 1e300
    return out


@dataclass(frozen=True)
class LsmcSolution:
    model: SpectralModel
    cost: CostSpec
    grid: TimeGrid
    degree: int
    exponents: tuple
    center: np.ndarray
    scale: np.ndarray
    coefficients: np.ndarray      # (M, n_features); rule at steps 0..M-1
    phi_slope: np.ndarray
    phi_intercept: float
    init_lo: np.ndarray
    init_hi: np.ndarray
    seed: int

    @property
    def discount_rate(self) -> float:
        return self.model.discount - self.model.control_eigenvalue

    def payoff(self, X):
        return X @ self.phi_slope + self.phi_intercept

    def continuation(self, X, step: int):
        F = _features(np.atleast_2d(X), self.exponents, self.center, self.scale)
        return F @ self.coefficients[step]

    def should_stop(self, X, step: int):
        """Stop where the payoff is nonnegative and beats the fitted continuation.

        Waiting forever is worth 0, so the stop region lives inside
        {payoff >= 0}; the regression is trained there (in-the-money paths)
        and is never consulted outside.
        """
        X = np.atleast_2d(X)
        pay = self.payoff(X)
        if step >= self.grid.n_steps:
            return pay >= 0.0
        return (pay >= 0.0) & (pay >= self.continuation(X, step))

    def frontier(self, step: int, scan: Grid1D, partner_values=None) -> np.ndarray:
        """Largest control-mode value still classified stop, scanning from below.

        With `partner_values` (only for 2-mode models) returns one frontier
        per partner value, otherwise a single value with the remaining modes
        frozen at the scan of the control mode alone.
        """
        k = self.model.control_mode
        n = self.model.n_modes
        ys = scan.nodes
        if partner_values is None:
            partners = [None]
        else:
            partners = list(partner_values)
        out = np.full(len(partners), np.nan)
        for j, pv in enumerate(partners):
            X = np.zeros((len(ys), n))
            X[:, k] = ys
            if pv is not None:
                other = 1 - k  # two-mode contract
                X[:, other] = pv
            stop = self.should_stop(X, step)
            b = np.nan
            for i in range(len(ys)):
                if stop[i]:
                    b = ys[i]
                else:
                    break
            out[j] = b
        return out if partner_values is not None else float(out[0])

    def value_at(self, x0, mc_config) -> tuple[float, float]:
        """Low-bias value by forward resimulation under the fitted rule.

        Paths come from noise stream 1, independent of the training stream.
        """
        x0 = self.model.check_dim(np.asarray(x0, dtype=float))
        out = mc.run_chunks(
            _lsmc_forward_chunk,
            (self, x0, mc_config.seed),
            mc_config.n_paths,
            self.grid.n_steps * self.model.n_modes,
            mc_config,
        )
        return mc.mean_se(out["payoff"])

    def coefficients_text(self) -> str:
        pairs = [
            ("schema", "lsmc_coefficients/1"),
            ("degree", self.degree),
            ("n_steps", self.grid.n_steps),
            ("horizon", self.grid.horizon),
            ("center", self.center),
            ("scale", self.scale),
        ]
        for i in range(self.coefficients.shape[0]):
            pairs.append((f"step_{i}", self.coefficients[i]))
        return serialize.dump_kv(pairs)


def _lsmc_forward_chunk(args, start, n, ci):
    sol, x0, seed = args
    model, grid = sol.model, sol.grid
    noise = mc.draw_noise(seed, ci, n, grid.n_steps, model.n_modes, stream=1)
    a = mode_decay(model, grid.step)
    s = mode_step_std(model, grid.step)
    X = _kernels.ou_fill(noise, a, s, np.tile(x0, (n, 1)))
    rl = sol.discount_rate
    h = grid.step
    alive = np.ones(n, dtype=bool)
    payoff = np.zeros(n)
    for i in range(grid.n_steps):
        if not alive.any():
            break
        Xi = X[alive, i, :]
        stop = sol.should_stop(Xi, i)
        if stop.any():
            idx = np.flatnonzero(alive)[stop]
            payoff[idx] = np.exp(-rl * h * i) * sol.payoff(X[idx, i, :])
            alive[idx] = False
    if alive.any():
        XT = X[alive, grid.n_steps, :]
        payoff[alive] = np.exp(-rl * grid.horizon) * np.maximum(sol.payoff(XT), 0.0)
    return {"payoff": payoff}


def default_stopping_time_grid(model: SpectralModel, step: float = 0.05,
                               horizon_factor: float = 12.0) -> TimeGrid:
    """Horizon set by the stopping discount rho - lambda."""
    rl = model.discount - model.control_eigenvalue
    return TimeGrid.from_step(horizon_factor / rl, step)


def lsmc_init_box(model: SpectralModel, cost: CostSpec,
                  spread_stds: float = 4.0):
    """Per-mode training-start box; the control mode brackets the payoff's sign change."""
    lo = np.empty(model.n_modes)
    hi = np.empty(model.n_modes)
    for k in range(model.n_modes):
        sd = max(model.stationary_std(k), 1e-6)
        lo[k], hi[k] = -spread_stds * sd, spread_stds * sd
    phi = phi_closed_form(model, cost)
    k = model.control_mode
    if phi.slope[k] != 0.0:
        zero = -phi.intercept / phi.slope[k]
        sd = max(model.stationary_std(k), 1e-6)
        lo[k] = min(-2.0 * sd, zero - (spread_stds + 2.0) * sd)
        hi[k] = max(2.0 * sd, zero + spread_stds * sd)
    return lo, hi


def solve_lsmc(model: SpectralModel, cost: CostSpec, grid: TimeGrid,
               mc_config, basis_degree: int = 3,
               init_box=None) -> LsmcSolution:
    """Backward cashflow regression on total-degree polynomial features.

    Training paths start uniformly inside `init_box` so the regressions see
    both sides of the frontier at every step, including step 0.  Regression
    falls back to SVD least squares past condition 1e8 and reduces the
    degree when even that stays ill-conditioned.
    """
    phi = phi_closed_form(model, cost)
    exps = _total_degree_exponents(model.n_modes, basis_degree)
    if mc_config.n_paths < 10 * len(exps):
        raise ValueError(
            f"need n_paths >= {10 * len(exps)} for {len(exps)} basis functions"
        )
    if init_box is None:
        init_box = lsmc_init_box(model, cost)
    lo, hi = (np.asarray(v, dtype=float) for v in init_box)
    n = mc_config.n_paths
    gen = mc.chunk_generator(mc_config.seed, 0, stream=2)
    x0 = lo + (hi - lo) * gen.random((n, model.n_modes))
    noise = gen.standard_normal((n, grid.n_steps, model.n_modes))
    # float32 storage: training paths cost memory, not accuracy (regression
    # error dominates by orders of magnitude)
    X = _kernels.ou_fill(noise, mode_decay(model, grid.step),
                         mode_step_std(model, grid.step), x0).astype(np.float32)
    del noise
    rl = model.discount - model.control_eigenvalue
    beta = math.exp(-rl * grid.step)
    center = (lo + hi) / 2.0
    scale = np.maximum((hi - lo) / 2.0, 1e-12)

    degree = basis_degree
    while True:
        exps = _total_degree_exponents(model.n_modes, degree)
        coeffs = np.zeros((grid.n_steps, len(exps)))
        payoff_T = X[:, grid.n_steps, :] @ phi.slope + phi.intercept
        cash = np.maximum(payoff_T, 0.0)
        worst_cond = 0.0
        for i in range(grid.n_steps - 1, -1, -1):
            cash *= beta
            Xi = X[:, i, :].astype(np.float64)
            imm = Xi @ phi.slope + phi.intercept
            itm = imm > 0.0
            # fit continuation where the stop decision is live; elsewhere the
            # coefficients are never consulted
            if np.count_nonzero(itm) >= 10 * len(exps):
                F_itm = _features(Xi[itm], exps, center, scale)
                coef, cond = _regress(F_itm, cash[itm])
                worst_cond = max(worst_cond, cond)
                coeffs[i] = coef
                stop = np.zeros(len(imm), dtype=bool)
                stop[itm] = imm[itm] >= F_itm @ coef
            else:
                coeffs[i] = _NEVER_STOP_COEF(len(exps))
                stop = np.zeros(len(imm), dtype=bool)
            cash = np.where(stop, imm, cash)
        if worst_cond <= 1e16 or degree == 1:
            break
        degree -= 1
    if worst_cond > 1e16 and degree == 1:
        raise IllConditionedRegression(
            f"design condition {worst_cond:.3e} at degree 1"
        )
    return LsmcSolution(
        model=model, cost=cost, grid=grid, degree=degree, exponents=tuple(exps),
        center=center, scale=scale, coefficients=coeffs,
        phi_slope=phi.slope, phi_intercept=phi.intercept,
        init_lo=lo, init_hi=hi, seed=mc_config.seed,
    )


# ---------------------------------------------------------------------------
# smooth fit across the free boundary

@dataclass(frozen=True)
class SmoothFitReport:
    mismatch: float
    spacing: float
    refinement_slope: float | None
    ladder: tuple = ()

    @property
    def halving_ratios(self) -> tuple:
        out = []
        for (d0, m0), (d1, m1) in zip(self.ladder, self.ladder[1:]):
            out.append(m0 / m1 if m1 > 0 else math.inf)
        return tuple(out)


def derivative_mismatch(solution: StoppingSolution) -> float:
    """|u'(b* + dy) - phi'(b* - dy)|, one-sided across the boundary.

    On the stop side u coincides with the affine payoff, so phi' is its exact
    derivative; an all-stop solution has mismatch 0 by convention.
    """
    if solution.boundary is None:
        raise NoBoundary("no stop region grows from the lower edge")
    region = solution.region
    if all(r == STOP for r in region):
        return 0.0
    j = int(round((solution.boundary - solution.grid.lo) / solution.grid.spacing))
    if j + 1 >= len(region):
        raise NoBoundary("boundary sits on the upper grid edge")
    return abs(float(solution.du_values[j + 1]) - solution.phi_slope)


def smooth_fit_diagnostic(solution: StoppingSolution,
                          refinements=()) -> SmoothFitReport:
    """Derivative mismatch at the boundary plus its refinement decay order.

    `refinements` are solutions of the same instance on finer grids; the
    fitted slope is the least-squares order of mismatch against spacing in
    log2, or None when no refinements are given.
    """
    ladder = [(solution.grid.spacing, derivative_mismatch(solution))]
    for sol in refinements:
        ladder.append((sol.grid.spacing, derivative_mismatch(sol)))
    slope = None
    if len(ladder) >= 2:
        ds = np.array([d for d, _ in ladder])
        ms = np.array([max(m, 1e-300) for _, m in ladder])
        if np.all(ms < 1e-14):
            slope = math.inf  # mismatch exact zero at every level
        else:
            slope = float(np.polyfit(np.log2(ds), np.log2(ms), 1)[0])
    return SmoothFitReport(
        mismatch=ladder[0][1], spacing=ladder[0][0],
        refinement_slope=slope, ladder=tuple(ladder),
    )
