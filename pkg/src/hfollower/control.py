"""Reflection policies and Monte Carlo estimation of the control value.

The optimal control is realized as a discrete Skorokhod reflection: after
each uncontrolled transition the control mode is pushed back up to the
threshold, with the initial jump at t = 0 a first-class slot.  Optimality
of a threshold is never assumed; `optimize_threshold` sweeps candidates
under common random numbers as the independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, mc
from .costs import (
    CostSpec,
    diagonal_quadratic,
    discount_weights,
    null_cost_per_mode,
    shifted_quadratic,
)
from .dynamics import mode_decay, mode_step_std
from .errors import StepTooSmall, UnsupportedCostKind
from .grids import TimeGrid
from .model import SpectralModel, build_diagonal_model

_EMPTY = np.zeros(1)


@dataclass(frozen=True)
class ReflectionPolicy:
    """Keep the control mode at or above a constant threshold."""

    boundary: float
    mode: int
    n_component: float  # direction coefficient on the control mode

    def kernel_params(self, model: SpectralModel, grid: TimeGrid):
        return 1, float(self.boundary), 0.0, -1, _EMPTY, _EMPTY

    def describe(self) -> str:
        return f"reflect(b={self.boundary!r})"


@dataclass(frozen=True)
class CurveReflectionPolicy:
    """Reflect at a threshold read off a table over one partner mode."""

    table_x: np.ndarray
    table_b: np.ndarray
    partner: int
    mode: int

    def kernel_params(self, model: SpectralModel, grid: TimeGrid):
        return (
            3, 0.0, 0.0, int(self.partner),
            np.ascontiguousarray(self.table_x, dtype=float),
            np.ascontiguousarray(self.table_b, dtype=float),
        )

    def describe(self) -> str:
        return f"reflect_curve(partner={self.partner},n={len(self.table_x)})"


def reflected_policy(boundary: float, model: SpectralModel) -> ReflectionPolicy:
    if not np.isfinite(boundary):
        raise ValueError(f"boundary must be finite, got {boundary}")
    return ReflectionPolicy(
        boundary=float(boundary),
        mode=model.control_mode,
        n_component=model.n_norm,
    )


@dataclass(frozen=True)
class ValueSample:
    x0: np.ndarray
    estimate: float
    std_error: float
    policy: str
    horizon: float
    step: float
    n_paths: int
    seed: int

    def provenance(self) -> str:
        from . import serialize

        return serialize.dump_kv(
            [
                ("schema", "value_sample/1"),
                ("x0", self.x0),
                ("estimate", self.estimate),
                ("std_error", self.std_error),
                ("policy", self.policy),
                ("horizon", self.horizon),
                ("step", self.step),
                ("n_paths", self.n_paths),
                ("seed", self.seed),
            ]
        )


def _multi_cost_chunk(args, start, n, ci):
    (model, cost, arms, grid, seed) = args
    noise = mc.draw_noise(seed, ci, n, grid.n_steps, model.n_modes)
    a = mode_decay(model, grid.step)
    s = mode_step_std(model, grid.step)
    wG, dj = discount_weights(model, grid)
    W, m, r1, hvec = cost.kernel_quadratic()
    out = np.empty((n, len(arms)))
    for j, (x0, params) in enumerate(arms):
        pmode, p1, p2, partner, bx, by = params
        total, _, _ = _kernels.policy_cost(
            noise, a, s, x0, model.control_mode, model.n_norm,
            pmode, p1, p2, partner, bx, by, W, m, r1, hvec,
            grid.step, wG, dj,
        )
        out[:, j] = total
    return {"cost": out}


def estimate_V_batch(model: SpectralModel, cost: CostSpec, points_policies,
                     grid: TimeGrid, mc_config):
    """Evaluate several (x0, policy) arms on shared noise; per-path cost matrix.

    The shared draw makes pairwise differences of columns low-variance
    (common random numbers); reductions over paths stay with the caller.
    """
    arms = []
    for x0, policy in points_policies:
        x0 = model.check_dim(np.asarray(x0, dtype=float))
        arms.append((x0, policy.kernel_params(model, grid)))
    out = mc.run_chunks(
        _multi_cost_chunk,
        (model, cost, arms, grid, mc_config.seed),
        mc_config.n_paths,
        grid.n_steps * model.n_modes,
        mc_config,
    )
    return out["cost"]


def estimate_V(model: SpectralModel, cost: CostSpec, x0, policy,
               grid: TimeGrid, mc_config) -> ValueSample:
    """Discounted cost of following `policy` from x0 (an upper proxy for V)."""
    from .costs import estimate_cost_functional

    est = estimate_cost_functional(model, cost, x0, policy, grid, mc_config)
    return ValueSample(
        x0=np.asarray(x0, dtype=float), estimate=est.mean, std_error=est.std_error,
        policy=policy.describe(), horizon=grid.horizon, step=grid.step,
        n_paths=est.n_paths, seed=est.seed,
    )


def optimize_threshold(model: SpectralModel, cost: CostSpec, x0,
                       candidate_boundaries, grid: TimeGrid, mc_config):
    """Value of the reflection policy at each candidate threshold, shared noise.

    Returns (best_boundary, curve) with curve rows (boundary, mean, se).
    """
    cands = np.asarray(candidate_boundaries, dtype=float)
    if cands.ndim != 1 or len(cands) == 0:
        raise ValueError("need a nonempty 1-D candidate array")
    if np.any(np.diff(cands) < 0):
        raise ValueError("candidates must be sorted ascending")
    x0 = model.check_dim(np.asarray(x0, dtype=float))
    arms = [(x0, reflected_policy(b, model)) for b in cands]
    costs_matrix = estimate_V_batch(model, cost, arms, grid, mc_config)
    means = np.array([math.fsum(costs_matrix[:, j]) / costs_matrix.shape[0]
                      for j in range(len(cands))])
    ses = costs_matrix.std(axis=0, ddof=1) / math.sqrt(costs_matrix.shape[0])
    best = int(np.argmin(means))
    curve = np.column_stack([cands, means, ses])
    return float(cands[best]), curve


def directional_derivative_V(model: SpectralModel, cost: CostSpec, x0, policy,
                             eps: float, grid: TimeGrid, mc_config,
                             resolve_fn=None, noise_floor: float = 5e-3):
    """Central difference of the policy value along the control direction.

    The same boundary is reused at both ends by default (envelope argument);
    pass `resolve_fn(x0) -> policy` to re-derive it instead.  Raises
    StepTooSmall when the estimate is noise-dominated: propagated std error
    above 25% of the estimate and above the absolute noise floor.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be > 0, got {eps}")
    x0 = model.check_dim(np.asarray(x0, dtype=float))
    nhat = model.direction
    xp, xm = x0 + eps * nhat, x0 - eps * nhat
    pol_p = resolve_fn(xp) if resolve_fn is not None else policy
    pol_m = resolve_fn(xm) if resolve_fn is not None else policy
    cost_matrix = estimate_V_batch(
        model, cost, [(xp, pol_p), (xm, pol_m)], grid, mc_config
    )
    diffs = (cost_matrix[:, 0] - cost_matrix[:, 1]) / (2.0 * eps)
    mean, se = mc.mean_se(diffs)
    if se > 0.25 * abs(mean) and se > noise_floor:
        raise StepTooSmall(
            f"derivative {mean:.4g} +- {se:.4g}: eps={eps:g} is below the noise floor"
        )
    return mean, se


# ---------------------------------------------------------------------------
# separable value-function surrogate used by the programming-principle checks

def reduce_to_control_mode(model: SpectralModel, cost: CostSpec):
    """Single-mode model/cost pair seen by the control; needs a separable cost."""
    sep = cost.separable_mode_costs()
    if sep is None:
        raise UnsupportedCostKind("value surrogate requires a mode-separable cost")
    w, m, _ = sep
    k = model.control_mode
    model1 = build_diagonal_model(
        eigenvalues=[model.eigenvalues[k]],
        noise_coeffs=[model.noise_coeffs[k]],
        price_coeffs=[model.price_coeffs[k]],
        control_mode=0,
        discount=model.discount,
        price_floor=model.price_floor,
    )
    if cost.kind == "diagonal_quadratic":
        cost1 = diagonal_quadratic([w[k]])
    else:
        cost1 = shifted_quadratic([m[k]], cost.scale)
    return model1, cost1


@dataclass(frozen=True)
class ValueSurrogate:
    """V(x) ~ interpolated 1-D table on the control mode + exact null cost of the rest.

    Valid for mode-separable costs, where the uncontrolled modes contribute
    their closed-form discounted cost additively.
    """

    model: SpectralModel
    cost: CostSpec
    ys: np.ndarray
    values: np.ndarray
    ses: np.ndarray
    boundary: float
    seed: int

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = self.model.control_mode
        head = np.interp(x[..., k], self.ys, self.values)
        rest = _null_cost_excluding(self.model, self.cost, x)
        return head + rest

    @property
    def table_se(self) -> float:
        return float(self.ses.max())


def _null_cost_excluding(model: SpectralModel, cost: CostSpec, x):
    """Closed-form null cost of every mode except the control mode."""
    per_mode = null_cost_per_mode(model, cost, x)
    k = model.control_mode
    return per_mode.sum(axis=-1) - per_mode[..., k]


def value_surrogate(model: SpectralModel, cost: CostSpec, boundary: float,
                    ys, grid: TimeGrid, mc_config) -> ValueSurrogate:
    """Tabulate the reflected-policy value on the reduced single-mode problem."""
    model1, cost1 = reduce_to_control_mode(model, cost)
    pol = reflected_policy(boundary, model1)
    ys = np.asarray(ys, dtype=float)
    arms = [(np.array([y]), pol) for y in ys]
    costs_matrix = estimate_V_batch(model1, cost1, arms, grid, mc_config)
    n = costs_matrix.shape[0]
    values = np.array([math.fsum(costs_matrix[:, j]) / n for j in range(len(ys))])
    ses = costs_matrix.std(axis=0, ddof=1) / math.sqrt(n)
    return ValueSurrogate(
        model=model, cost=cost, ys=ys, values=values, ses=ses,
        boundary=float(boundary), seed=mc_config.seed,
    )


# ---------------------------------------------------------------------------
# Dynkin identity and martingale-increment measurements

def _scan_chunk(args, start, n, ci):
    (model, cost, x0, params, grid, aq, bq, cpidx, seed) = args
    noise = mc.draw_noise(seed, ci, n, grid.n_steps, model.n_modes)
    a = mode_decay(model, grid.step)
    s = mode_step_std(model, grid.step)
    wG, dj = discount_weights(model, grid)
    W, m, r1, hvec = cost.kernel_quadratic()
    pmode, p1, p2, partner, bx, by = params
    (cp_states, g_plain, nu_run, g_at, g0,
     dyn_lhs, dyn_int, dyn_jump, total) = _kernels.policy_scan(
        noise, a, s, x0, model.control_mode, model.n_norm,
        pmode, p1, p2, partner, bx, by, W, m, r1, hvec,
        aq, bq, model.discount, model.eigenvalues,
        model.noise_coeffs**2, grid.step, cpidx, wG, dj,
    )
    flat = cp_states.reshape(n, -1)
    return {
        "cp_states": flat, "g_plain": g_plain, "nu_run": nu_run,
        "g_at": g_at, "g0": g0, "dyn_lhs": dyn_lhs, "dyn_int": dyn_int,
        "dyn_jump": dyn_jump, "cost": total,
    }


def _run_scan(model, cost, x0, policy, grid, mc_config, aq, bq, cp_times):
    x0 = model.check_dim(np.asarray(x0, dtype=float))
    cpidx = np.unique(
        np.clip(np.round(np.asarray(cp_times) / grid.step).astype(np.int64),
                0, grid.n_steps)
    )
    params = policy.kernel_params(model, grid)
    out = mc.run_chunks(
        _scan_chunk,
        (model, cost, x0, params, grid,
         np.asarray(aq, dtype=float), np.asarray(bq, dtype=float),
         cpidx, mc_config.seed),
        mc_config.n_paths,
        grid.n_steps * model.n_modes,
        mc_config,
    )
    n = out["g_plain"].shape[0]
    out["cp_states"] = out["cp_states"].reshape(n, len(cpidx), model.n_modes)
    out["cp_times"] = cpidx * grid.step
    return out


def dynkin_gap(model: SpectralModel, cost: CostSpec, x0, policy,
               grid: TimeGrid, mc_config, aq, bq):
    """Mean and se of  e^{-rho T} phi(X_T) - phi(x0) - integral - jump terms.

    Zero in expectation for quadratic test functions phi = sum aq x^2 + bq x
    under any admissible policy; the per-path pairing keeps the variance low.
    """
    out = _run_scan(model, cost, x0, policy, grid, mc_config, aq, bq, [0.0])
    x0 = np.asarray(x0, dtype=float)
    phi0_pre = float(np.sum(np.asarray(aq) * x0**2 + np.asarray(bq) * x0))
    gaps = out["dyn_lhs"] - phi0_pre - out["dyn_int"] - out["dyn_jump"]
    return mc.mean_se(gaps)


def martingale_increments(model: SpectralModel, cost: CostSpec, x0, policy,
                          grid: TimeGrid, mc_config, cp_times, value_fn):
    """Mean increments of M_t = running discounted cost + e^{-rho t} V(X_t).

    Returns rows (t_left, t_right, mean, se) for consecutive checkpoints;
    the first checkpoint is t = 0 (after the initial jump).
    """
    out = _run_scan(model, cost, x0, policy, grid, mc_config,
                    np.zeros(model.n_modes), np.zeros(model.n_modes),
                    sorted(set([0.0] + list(cp_times))))
    times = out["cp_times"]
    h = grid.step
    rho = model.discount
    mart = []
    for j, t in enumerate(times):
        disc = math.exp(-rho * t)
        run_cost = (
            h * (out["g_plain"][:, j] - 0.5 * (out["g0"] + disc * out["g_at"][:, j]))
            + out["nu_run"][:, j]
        )
        vhat = value_fn(out["cp_states"][:, j, :])
        mart.append(run_cost + disc * vhat)
    rows = []
    for j in range(len(times) - 1):
        inc = mart[j + 1] - mart[j]
        mean, se = mc.mean_se(inc)
        rows.append((float(times[j]), float(times[j + 1]), mean, se))
    return rows
