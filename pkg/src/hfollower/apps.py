"""Application presets: energy-capacity investment and climate balance models.

Both live on the Neumann cosine basis of the unit interval, where the
diagonal truncation is exact: eigenvalue -(k pi)^2 for the Laplacian part,
shifted by the zeroth-order coefficients.  A constant price field puts all
its mass on mode 0, which is also the control direction in both models, so
the eigenvector requirement on the direction holds by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import CostSpec, diagonal_quadratic, shifted_quadratic
from .errors import InvalidParams
from .model import SpectralModel, build_diagonal_model


@dataclass(frozen=True)
class EnergyParams:
    depreciation: float = 0.5        # delta > 0
    demand_reversion: float = 0.0    # scalar stand-in for the demand operator
    n_modes: int = 4
    noise: tuple = (0.5, 0.3, 0.2, 0.1)
    price_level: float = 1.0         # constant investment price q(xi) = q0
    supply_minus_demand: tuple = (-0.5, 0.2, -0.1, 0.05)  # x0 = e - a coefficients
    surplus_scale: float = 0.5       # the quadratic-vs-half ambiguity knob
    discount: float = 0.5


@dataclass(frozen=True)
class ClimateParams:
    radiation_slope: float = 1.0     # eta > 0
    n_modes: int = 4
    noise: tuple = (0.4, 0.2, 0.1, 0.05)
    carbon_price: float = 2.0        # scalar q > 0
    target_offset: tuple = (0.1, 0.0, 0.0, 0.0)  # hat T - T* coefficients
    temperature_start: tuple = (0.0, 0.0, 0.0, 0.0)  # T_0 - T* coefficients
    scale: float = 1.0
    domain_factor: float = 0.25      # [-1,1] domain rescales the spectrum by 1/4
    discount: float = 0.5


def neumann_spectrum(n_modes: int, factor: float = 1.0) -> np.ndarray:
    """Eigenvalues -(k pi)^2 * factor, k = 0..n-1, of the Neumann Laplacian."""
    k = np.arange(n_modes)
    return -((k * np.pi) ** 2) * factor


def build_energy_model(params: EnergyParams) -> tuple[SpectralModel, CostSpec, np.ndarray]:
    """Diagonal model for irreversible capacity investment; returns (model, cost, x0)."""
    if params.depreciation <= 0.0 or params.demand_reversion < 0.0:
        raise InvalidParams("need depreciation > 0 and demand_reversion >= 0")
    if params.price_level <= 0.0:
        raise InvalidParams("price level must be > 0")
    n = params.n_modes
    if not (len(params.noise) == len(params.supply_minus_demand) == n):
        raise InvalidParams("noise and initial coefficients must have n_modes entries")
    lam = neumann_spectrum(n) - params.depreciation - params.demand_reversion
    q = np.zeros(n)
    q[0] = params.price_level  # constant fields live on mode 0
    model = build_diagonal_model(
        eigenvalues=lam,
        noise_coeffs=np.asarray(params.noise, dtype=float),
        price_coeffs=q,
        control_mode=0,
        discount=params.discount,
        price_floor=params.price_level,
    )
    cost = shifted_quadratic(np.zeros(n), params.surplus_scale)
    x0 = np.asarray(params.supply_minus_demand, dtype=float)
    return model, cost, x0


def build_climate_model(params: ClimateParams) -> tuple[SpectralModel, CostSpec, np.ndarray]:
    """Diagonal model for the energy-balance climate problem; returns (model, cost, x0)."""
    if params.radiation_slope <= 0.0:
        raise InvalidParams("radiation slope must be > 0")
    if params.carbon_price <= 0.0:
        raise InvalidParams("carbon price must be > 0")
    n = params.n_modes
    if not (len(params.noise) == len(params.target_offset)
            == len(params.temperature_start) == n):
        raise InvalidParams("per-mode parameter lengths must equal n_modes")
    lam = neumann_spectrum(n, params.domain_factor) - params.radiation_slope
    q = np.zeros(n)
    q[0] = params.carbon_price
    model = build_diagonal_model(
        eigenvalues=lam,
        noise_coeffs=np.asarray(params.noise, dtype=float),
        price_coeffs=q,
        control_mode=0,
        discount=params.discount,
        price_floor=params.carbon_price,
    )
    cost = shifted_quadratic(np.asarray(params.target_offset, dtype=float),
                             params.scale)
    x0 = np.asarray(params.temperature_start, dtype=float)
    return model, cost, x0


# ---------------------------------------------------------------------------
# named presets loadable from the command line

@dataclass(frozen=True)
class Preset:
    name: str
    model: SpectralModel
    cost: CostSpec
    x0: np.ndarray
    grid_lo: float
    grid_hi: float
    test_points: tuple = ()

    def describe(self) -> str:
        return f"{self.name}: N={self.model.n_modes}, cost={self.cost.kind}"


def _bench1d() -> Preset:
    model = build_diagonal_model(
        eigenvalues=[-1.0], noise_coeffs=[1.0], price_coeffs=[1.0],
        control_mode=0, discount=0.5, price_floor=1.0,
    )
    return Preset(
        name="bench1d", model=model, cost=diagonal_quadratic([1.0]),
        x0=np.array([1.0]), grid_lo=-8.0, grid_hi=5.0,
        test_points=(-3.0, -2.0, -1.0, 0.0, 1.0),
    )


def _bench2d() -> Preset:
    model = build_diagonal_model(
        eigenvalues=[-1.0, -2.0], noise_coeffs=[1.0, 0.8],
        price_coeffs=[1.0, 1.0], control_mode=0, discount=0.5, price_floor=1.0,
    )
    h = np.array([1.0, 1.0]) / np.sqrt(2.0)
    from .costs import rank_one

    return Preset(
        name="bench2d", model=model, cost=rank_one(h),
        x0=np.array([0.5, 0.0]), grid_lo=-12.0, grid_hi=6.0,
    )


def _energy() -> Preset:
    model, cost, x0 = build_energy_model(EnergyParams())
    return Preset(name="energy", model=model, cost=cost, x0=x0,
                  grid_lo=-9.0, grid_hi=5.0)


def _climate() -> Preset:
    model, cost, x0 = build_climate_model(ClimateParams())
    return Preset(name="climate", model=model, cost=cost, x0=x0,
                  grid_lo=-7.0, grid_hi=4.0)


_PRESETS = {
    "bench1d": _bench1d,
    "bench2d": _bench2d,
    "energy": _energy,
    "climate": _climate,
}


def preset_names() -> tuple:
    return tuple(sorted(_PRESETS))


def load_preset(name: str) -> Preset:
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise InvalidParams(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None
    return factory()
