"""Running-cost specifications and their exact evaluators.

Three quadratic-family kinds ship: `diagonal_quadratic` (G = 1/2 sum w_k x_k^2),
`rank_one` (G = 1/2 <x,h>^2), and `shifted_quadratic` (G = a |x - m|^2).  They
are convex, semiconcave with constant equal to the top Hessian eigenvalue,
and admit closed-form discounted null-control costs (except rank_one, whose
cross terms are out of contract).  Every kind has an affine directional
derivative along the control direction, which is what keeps the stopping
payoff exactly affine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import serialize
from .errors import (
    DimensionMismatch,
    GridMismatch,
    NonlinearDirectionalDerivative,
    UnsupportedCostKind,
)
from .model import SpectralModel

KINDS = ("diagonal_quadratic", "rank_one", "shifted_quadratic")


@dataclass(frozen=True)
class CostSpec:
    kind: str
    weights: np.ndarray | None = None   # diagonal_quadratic
    h: np.ndarray | None = None         # rank_one
    shift: np.ndarray | None = None     # shifted_quadratic
    scale: float = 1.0                  # shifted_quadratic

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedCostKind(f"unknown cost kind {self.kind!r}")

    @property
    def n_modes(self) -> int:
        if self.kind == "diagonal_quadratic":
            return len(self.weights)
        if self.kind == "rank_one":
            return len(self.h)
        return len(self.shift)

    # -- stored regularity constants ------------------------------------
    @property
    def semiconcavity(self) -> float:
        """Top Hessian eigenvalue; these quadratics are exactly that semiconcave."""
        if self.kind == "diagonal_quadratic":
            return float(np.max(self.weights))
        if self.kind == "rank_one":
            return float(self.h @ self.h)
        return 2.0 * self.scale

    @property
    def growth_constants(self) -> tuple[float, float, float]:
        """(kappa_1, kappa_2, c_o) with kappa_1|x|^2 - kappa_2 <= G <= c_o(1+|x|^2)."""
        if self.kind == "diagonal_quadratic":
            w = np.asarray(self.weights)
            return float(np.min(w)) / 2.0, 0.0, max(float(np.max(w)) / 2.0, 1e-300)
        if self.kind == "rank_one":
            hn2 = float(self.h @ self.h)
            return 0.0, 0.0, hn2 / 2.0
        a = self.scale
        m2 = float(self.shift @ self.shift)
        # a|x-m|^2 >= a(|x|^2/2 - |m|^2) and <= 2a(|x|^2 + |m|^2)
        return a / 2.0, a * m2, 2.0 * a * max(1.0, m2)

    @property
    def directional_semiconcavity(self) -> float:
        """Semiconcavity constant of the directional derivative (affine, so 0)."""
        return 0.0

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_modes:
            raise DimensionMismatch(
                f"cost on {self.n_modes} modes, state shape {x.shape}"
            )
        return x

    # -- evaluation ------------------------------------------------------
    def value(self, x):
        """G(x); vectorized over leading axes."""
        x = self._check(x)
        if self.kind == "diagonal_quadratic":
            return 0.5 * (x * x) @ self.weights
        if self.kind == "rank_one":
            return 0.5 * (x @ self.h) ** 2
        d = x - self.shift
        return self.scale * np.sum(d * d, axis=-1)

    def gradient(self, x):
        x = self._check(x)
        if self.kind == "diagonal_quadratic":
            return self.weights * x
        if self.kind == "rank_one":
            return np.multiply.outer(x @ self.h, self.h)
        return 2.0 * self.scale * (x - self.shift)

    def directional(self, model: SpectralModel, x):
        """<DG(x), n_hat> along the model's normalized control direction."""
        g, c = self.directional_affine(model)
        x = self._check(x)
        return x @ g + c

    def directional_affine(self, model: SpectralModel) -> tuple[np.ndarray, float]:
        """The affine representation (g, c) of x -> <DG(x), n_hat>.

        Raises NonlinearDirectionalDerivative if the dimensions disagree with
        the model (there is then no certified representation to hand out).
        """
        if self.n_modes != model.n_modes:
            raise NonlinearDirectionalDerivative(
                f"cost has {self.n_modes} modes but model has {model.n_modes}"
            )
        k = model.control_mode
        n = model.n_norm
        g = np.zeros(model.n_modes)
        if self.kind == "diagonal_quadratic":
            g[k] = self.weights[k] * n
            return g, 0.0
        if self.kind == "rank_one":
            g = (self.h[k] * n) * np.asarray(self.h, dtype=float)
            return g, 0.0
        g[k] = 2.0 * self.scale * n
        return g, -2.0 * self.scale * n * float(self.shift[k])

    def kernel_quadratic(self):
        """(W, m, r1, hvec) with G(x) = 1/2 sum W_k (x_k-m_k)^2 + 1/2 r1 <h,x>^2."""
        n = self.n_modes
        if self.kind == "diagonal_quadratic":
            return (
                np.asarray(self.weights, float),
                np.zeros(n),
                0.0,
                np.zeros(n),
            )
        if self.kind == "rank_one":
            return np.zeros(n), np.zeros(n), 1.0, np.asarray(self.h, float)
        return (
            2.0 * self.scale * np.ones(n),
            np.asarray(self.shift, float),
            0.0,
            np.zeros(n),
        )

    def separable_mode_costs(self):
        """Per-mode (w_k, m_k) with G(x) = sum_k w_k/2 (x_k - m_k)^2 + const, or None.

        rank_one couples modes and is not separable.
        """
        if self.kind == "diagonal_quadratic":
            return np.asarray(self.weights, float), np.zeros(self.n_modes), 0.0
        if self.kind == "shifted_quadratic":
            return (
                2.0 * self.scale * np.ones(self.n_modes),
                np.asarray(self.shift, float),
                0.0,
            )
        return None

    # -- serialization ---------------------------------------------------
    def to_text(self) -> str:
        pairs = [("schema", "cost_spec/1"), ("kind", self.kind)]
        if self.kind == "diagonal_quadratic":
            pairs.append(("weights", self.weights))
        elif self.kind == "rank_one":
            pairs.append(("h", self.h))
        else:
            pairs.append(("shift", self.shift))
            pairs.append(("scale", self.scale))
        return serialize.dump_kv(pairs)

    @staticmethod
    def from_text(text: str) -> "CostSpec":
        kv = serialize.parse_kv(text)
        kind = kv["kind"]
        if kind == "diagonal_quadratic":
            return diagonal_quadratic(serialize.as_floats(kv["weights"]))
        if kind == "rank_one":
            return rank_one(serialize.as_floats(kv["h"]))
        if kind == "shifted_quadratic":
            return shifted_quadratic(
                serialize.as_floats(kv["shift"]), serialize.as_float(kv["scale"])
            )
        raise UnsupportedCostKind(f"unknown cost kind {kind!r}")


def diagonal_quadratic(weights) -> CostSpec:
    w = np.asarray(weights, dtype=float).copy()
    if np.any(w < 0.0):
        raise ValueError(f"weights must be >= 0, got {w}")
    w.setflags(write=False)
    return CostSpec(kind="diagonal_quadratic", weights=w)


def rank_one(h) -> CostSpec:
    hv = np.asarray(h, dtype=float).copy()
    hv.setflags(write=False)
    return CostSpec(kind="rank_one", h=hv)


def shifted_quadratic(shift, scale: float = 1.0) -> CostSpec:
    if scale <= 0.0:
        raise ValueError(f"scale must be > 0, got {scale}")
    m = np.asarray(shift, dtype=float).copy()
    m.setflags(write=False)
    return CostSpec(kind="shifted_quadratic", shift=m, scale=float(scale))


# convenience wrappers matching the operation names used elsewhere
def eval_cost(cost: CostSpec, x):
    return cost.value(x)


def eval_gradient(cost: CostSpec, x):
    return cost.gradient(x)


def eval_directional(cost: CostSpec, model: SpectralModel, x):
    return cost.directional(model, x)


def null_cost_per_mode(model: SpectralModel, cost: CostSpec, x0) -> np.ndarray:
    """Per-mode discounted null-control cost for a mode-separable cost.

    Per independent mode with weight w, center m, start x:

        int_0^inf e^{-rho t} w/2 E[(X_t - m)^2] dt
          = w/2 [ x^2/(rho+2|l|) - 2 m x/(rho+|l|) + m^2/rho
                  + (s^2/(2|l|)) (1/rho - 1/(rho+2|l|)) ].
    """
    sep = cost.separable_mode_costs()
    if sep is None:
        raise UnsupportedCostKind(
            f"closed form requires a mode-separable cost, not {cost.kind!r}"
        )
    w, m, _ = sep
    x0 = np.asarray(x0, dtype=float)
    rho = model.discount
    sig = model.noise_coeffs
    absl = -model.eigenvalues
    return (w / 2.0) * (
        x0**2 / (rho + 2.0 * absl)
        - 2.0 * m * x0 / (rho + absl)
        + m**2 / rho
        + (sig**2 / (2.0 * absl)) * (1.0 / rho - 1.0 / (rho + 2.0 * absl))
    )


def closed_form_null_cost(model: SpectralModel, cost: CostSpec, x0) -> float:
    """Exact discounted cost of doing nothing (sum of the per-mode terms)."""
    x0 = model.check_dim(np.asarray(x0, dtype=float))
    return float(null_cost_per_mode(model, cost, x0).sum())


# ---------------------------------------------------------------------------
# Monte Carlo evaluation of the discounted cost functional

@dataclass(frozen=True)
class CostEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int


def discount_weights(model: SpectralModel, grid):
    """(wG, dj): trapezoid dt-weights h e^{-rho t_i} tau_i and jump discounts e^{-rho t_i}."""
    t = grid.times
    dj = np.exp(-model.discount * t)
    wG = dj * grid.step
    wG[0] *= 0.5
    wG[-1] *= 0.5
    return wG, dj


def _cost_chunk(args, start, n, ci):
    from . import _kernels, dynamics, mc as _mc

    (model, cost, x0, policy, grid, seed) = args
    noise = _mc.draw_noise(seed, ci, n, grid.n_steps, model.n_modes)
    a = dynamics.mode_decay(model, grid.step)
    s = dynamics.mode_step_std(model, grid.step)
    wG, dj = discount_weights(model, grid)
    W, m, r1, hvec = cost.kernel_quadratic()
    if isinstance(policy, dynamics.OpenLoopControl):
        X = _kernels.ou_fill(noise, a, s, np.tile(x0, (n, 1)))
        ctrl = policy.control
        if ctrl.grid != grid:
            raise GridMismatch("open-loop control grid differs from simulation grid")
        inc = ctrl.increments()
        corr = np.empty((grid.n_steps + 1, model.n_modes))
        corr[0] = inc[0]
        for i in range(1, corr.shape[0]):
            corr[i] = a * corr[i - 1] + inc[i]
        X = X + corr[None, :, :]
        g = cost.value(X)
        total = g @ wG + float(dj @ ctrl.intensity_increments)
        return {"cost": total}
    pmode, p1, p2, partner, bx, by = policy.kernel_params(model, grid)
    total, _, _ = _kernels.policy_cost(
        noise, a, s, np.asarray(x0, float), model.control_mode, model.n_norm,
        pmode, p1, p2, partner, bx, by, W, m, r1, hvec, grid.step, wG, dj,
    )
    return {"cost": total}


def estimate_cost_functional(model: SpectralModel, cost: CostSpec, x0, policy,
                             grid, mc_config) -> CostEstimate:
    """Sample mean of sum_i e^{-rho t_i}(G(X_i) h tau_i + dnu_i) under a policy.

    The t=0 jump is charged in full (the control measure has an atom there)
    and the dt-integral uses trapezoid weights on post-jump states.
    """
    from . import mc as _mc

    x0 = model.check_dim(np.asarray(x0, dtype=float))
    out = _mc.run_chunks(
        _cost_chunk,
        (model, cost, x0, policy, grid, mc_config.seed),
        mc_config.n_paths,
        grid.n_steps * model.n_modes,
        mc_config,
    )
    mean, se = _mc.mean_se(out["cost"])
    return CostEstimate(mean=mean, std_error=se, n_paths=mc_config.n_paths,
                        seed=mc_config.seed)


def _phi_chunk(args, start, n, ci):
    from . import _kernels, dynamics, mc as _mc

    (model, g, c0, x0, grid, seed) = args
    noise = _mc.draw_noise(seed, ci, n, grid.n_steps, model.n_modes)
    a = dynamics.mode_decay(model, grid.step)
    s = dynamics.mode_step_std(model, grid.step)
    rl = model.discount - model.control_eigenvalue
    w = -grid.step * np.exp(-rl * grid.times)
    w[0] *= 0.5
    w[-1] *= 0.5
    vals = _kernels.affine_payoff_scan(noise, a, s, np.asarray(x0, float),
                                       np.asarray(g, float), c0, w)
    return {"phi": vals}


def estimate_phi(model: SpectralModel, cost: CostSpec, x0, grid,
                 mc_config) -> CostEstimate:
    """Monte Carlo value of the stopping payoff integral

        -E[ int_0^T e^{-(rho-lambda) t} (G_n(X_t) + rho - lambda) dt ],

    an oracle for the closed-form affine payoff (horizon tail is below
    e^{-(rho-lambda) T} and should be made negligible via the grid).
    """
    from . import mc as _mc

    x0 = model.check_dim(np.asarray(x0, dtype=float))
    g, c = cost.directional_affine(model)
    rl = model.discount - model.control_eigenvalue
    out = _mc.run_chunks(
        _phi_chunk,
        (model, g, c + rl, x0, grid, mc_config.seed),
        mc_config.n_paths,
        grid.n_steps * model.n_modes,
        mc_config,
    )
    mean, se = _mc.mean_se(out["phi"])
    return CostEstimate(mean=mean, std_error=se, n_paths=mc_config.n_paths,
                        seed=mc_config.seed)
