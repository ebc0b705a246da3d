"""Diagonal spectral truncations of the controlled operator/noise environment.

A model bundles the mode eigenvalues, per-mode noise intensities, the
discount rate, the spectral price coefficients, and the designated control
direction (a single eigenmode rescaled to unit price mass).  Everything is
immutable after construction and all derived quantities are closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import serialize
from .errors import (
    DimensionMismatch,
    InvalidDiscount,
    NonDissipative,
    NonlinearDirectionalDerivative,
    ZeroPriceOnDirection,
)


@dataclass(frozen=True)
class SpectralModel:
    eigenvalues: np.ndarray          # lambda_k < 0, units 1/time
    noise_coeffs: np.ndarray         # sigma_k >= 0, diagonal noise intensities
    discount: float                  # rho > 0
    price_coeffs: np.ndarray         # q_k, spectral coefficients of the price
    price_floor: float               # certified lower bound q >= q_o * 1 (metadata)
    control_mode: int                # index of the eigenmode carrying the direction
    n_norm: float                    # |n_hat|; the direction is n_norm * e_{k*}
    dissipativity_margin: float      # delta = -max_k lambda_k
    positivity_preserving: bool = field(default=True)  # recorded, not checked

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    @property
    def control_eigenvalue(self) -> float:
        """Eigenvalue of the control direction (lambda <= -delta < 0)."""
        return float(self.eigenvalues[self.control_mode])

    @property
    def direction(self) -> np.ndarray:
        """The control direction n_hat in mode coefficients."""
        n = np.zeros(self.n_modes)
        n[self.control_mode] = self.n_norm
        return n

    @property
    def hilbert_schmidt_sq(self) -> float:
        """Sum of sigma_k^2, the (finite) Hilbert-Schmidt norm proxy of the noise."""
        return float(np.sum(self.noise_coeffs**2))

    def stationary_std(self, k: int | None = None) -> float:
        """Long-run standard deviation sigma_k / sqrt(2|lambda_k|) of mode k."""
        if k is None:
            k = self.control_mode
        return float(self.noise_coeffs[k] / np.sqrt(2.0 * abs(self.eigenvalues[k])))

    def check_dim(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_modes:
            raise DimensionMismatch(
                f"expected {self.n_modes} modes, got shape {x.shape}"
            )
        return x

    def to_text(self) -> str:
        return serialize.dump_kv(
            [
                ("schema", "spectral_model/1"),
                ("eigenvalues", self.eigenvalues),
                ("noise", self.noise_coeffs),
                ("price", self.price_coeffs),
                ("price_floor", self.price_floor),
                ("control_mode", self.control_mode),
                ("discount", self.discount),
            ]
        )

    @staticmethod
    def from_text(text: str) -> "SpectralModel":
        kv = serialize.parse_kv(text)
        return build_diagonal_model(
            eigenvalues=serialize.as_floats(kv["eigenvalues"]),
            noise_coeffs=serialize.as_floats(kv["noise"]),
            price_coeffs=serialize.as_floats(kv["price"]),
            control_mode=serialize.as_int(kv["control_mode"]),
            discount=serialize.as_float(kv["discount"]),
            price_floor=serialize.as_float(kv["price_floor"])
            if "price_floor" in kv
            else None,
        )


@dataclass(frozen=True)
class AffineFunctional:
    """Exact affine functional x -> <slope, x> + intercept on mode coefficients."""

    slope: np.ndarray
    intercept: float

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        return x @ self.slope + self.intercept

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.slope))


def build_diagonal_model(
    eigenvalues,
    noise_coeffs,
    price_coeffs,
    control_mode: int,
    discount: float,
    price_floor: float | None = None,
    positivity_preserving: bool = True,
) -> SpectralModel:
    """Validate and normalize a diagonal truncation.

    The control direction is the eigenmode `control_mode` rescaled so that its
    price mass is one; the dissipativity margin is -max_k lambda_k.
    """
    lam = np.asarray(eigenvalues, dtype=float).copy()
    sig = np.asarray(noise_coeffs, dtype=float).copy()
    q = np.asarray(price_coeffs, dtype=float).copy()
    if not (lam.ndim == 1 and lam.shape == sig.shape == q.shape):
        raise DimensionMismatch(
            f"eigenvalues/noise/price must be equal-length vectors, got "
            f"{lam.shape}/{sig.shape}/{q.shape}"
        )
    if np.any(lam >= 0.0):
        raise NonDissipative(f"all eigenvalues must be < 0, got {lam}")
    if not np.isfinite(discount) or discount <= 0.0:
        raise InvalidDiscount(f"discount must be > 0, got {discount}")
    if np.any(sig < 0.0):
        raise ValueError(f"noise coefficients must be >= 0, got {sig}")
    if not 0 <= control_mode < len(lam):
        raise DimensionMismatch(f"control_mode {control_mode} out of range")
    qk = q[control_mode]
    if qk <= 0.0:
        # <q, e_k*> must be positive for a direction inside the nonnegative cone
        raise ZeroPriceOnDirection(
            f"price coefficient on control mode is {qk}; cannot normalize"
        )
    if price_floor is None:
        positive = np.abs(q[q != 0.0])
        price_floor = float(positive.min()) if positive.size else qk
    if price_floor <= 0.0:
        raise ValueError(f"price_floor must be > 0, got {price_floor}")
    lam.setflags(write=False)
    sig.setflags(write=False)
    q.setflags(write=False)
    return SpectralModel(
        eigenvalues=lam,
        noise_coeffs=sig,
        discount=float(discount),
        price_coeffs=q,
        price_floor=float(price_floor),
        control_mode=int(control_mode),
        n_norm=1.0 / float(qk),
        dissipativity_margin=float(-lam.max()),
        positivity_preserving=bool(positivity_preserving),
    )


def resolvent_weight(model: SpectralModel, k: int) -> float:
    """The positive scalar 1/(rho - lambda - lambda_k) for mode k."""
    return 1.0 / (model.discount - model.control_eigenvalue - model.eigenvalues[k])


def phi_closed_form(model: SpectralModel, cost) -> AffineFunctional:
    """Stopping payoff as an exact affine functional of the state.

    With an affine directional derivative <g, x> + c of the running cost
    along the control direction, averaging the uncontrolled mean dynamics and
    integrating the discounted payoff termwise in time gives

        phi(x) = -sum_k g_k x_k / (rho - lambda - lambda_k)
                 - (c + rho - lambda) / (rho - lambda).
    """
    try:
        g, c = cost.directional_affine(model)
    except NonlinearDirectionalDerivative:
        raise
    except AttributeError as exc:
        raise NonlinearDirectionalDerivative(
            f"cost {cost!r} does not expose an affine directional derivative"
        ) from exc
    rl = model.discount - model.control_eigenvalue
    weights = np.array([resolvent_weight(model, k) for k in range(model.n_modes)])
    slope = -np.asarray(g, dtype=float) * weights
    intercept = -(c + rl) / rl
    return AffineFunctional(slope=slope, intercept=float(intercept))


def phi_lipschitz_bound(model: SpectralModel, cost) -> float:
    """Lipschitz estimate |g| / (rho - lambda + delta) for the stopping payoff."""
    g, _ = cost.directional_affine(model)
    k_gn = float(np.linalg.norm(g))
    return k_gn / (
        model.discount - model.control_eigenvalue + model.dissipativity_margin
    )
