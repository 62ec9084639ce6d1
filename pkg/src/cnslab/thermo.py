"""Barotropic pressure law P = a*rho^gamma and derived thermodynamic functions.

All functions are evaluated pointwise in physical space; callers dealias
when feeding the results into spectral pipelines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import ScalarField, VectorField, divergence


class PressureLawError(ValueError):
    pass


class NegativeDensityError(ValueError):
    pass


@dataclass(frozen=True)
class PressureLaw:
    a: float
    gamma: float

    def __post_init__(self):
        if self.a <= 0:
            raise PressureLawError(f"coefficient a must be positive, got {self.a}")
        if self.gamma < 1:
            raise PressureLawError(
                f"exponent gamma must be >= 1, got {self.gamma}"
            )

    def P(self, rho: np.ndarray) -> np.ndarray:
        return self.a * rho**self.gamma

    def Pprime(self, rho: np.ndarray) -> np.ndarray:
        return self.a * self.gamma * rho ** (self.gamma - 1)

    def sound_speed_max(self, rho_max: float) -> float:
        """sqrt(max P'(rho)) over [0, rho_max]; P' is nondecreasing."""
        return float(np.sqrt(self.Pprime(np.asarray(rho_max))))


@dataclass(frozen=True)
class ThermoScalars:
    P_star: float
    P_bar: float
    e_total: float
    h_sup: float


def _check_nonneg(rho: np.ndarray) -> None:
    if np.any(rho < 0):
        idx = np.argwhere(rho < 0)[0]
        raise NegativeDensityError(
            f"negative density {rho[tuple(idx)]:g} at index {tuple(idx)}"
        )


def pressure(rho: ScalarField, law: PressureLaw) -> ScalarField:
    _check_nonneg(rho.values)
    return ScalarField(rho.grid, law.P(rho.values))


def pressure_potential(rho: ScalarField, law: PressureLaw, floor: float) -> ScalarField:
    """Q with Q' = P'/rho, evaluated at max(rho, floor).

    grad Q equals the pressure acceleration grad P / rho wherever rho is
    above the floor, but stays a pure gradient of a bounded scalar; Q is
    constant on the floored vacuum so the force vanishes there naturally.
    gamma = 1: a log rho; gamma > 1: a gamma rho^(gamma-1)/(gamma-1).
    """
    if floor <= 0:
        raise ValueError(f"floor must be positive, got {floor}")
    r = np.maximum(rho.values, floor)
    a, g = law.a, law.gamma
    if g == 1.0:
        q = a * np.log(r)
    else:
        q = a * g / (g - 1.0) * r ** (g - 1.0)
    return ScalarField(rho.grid, q)


def potential_energy(rho: ScalarField, law: PressureLaw) -> ScalarField:
    """Potential energy density, normalized so e(1) = e'(1) = 0, e >= 0.

    gamma = 1: e = a (rho log rho + 1 - rho), extended by e(0) = a.
    gamma > 1: e = a (rho^g - g rho + g - 1)/(g - 1).
    """
    _check_nonneg(rho.values)
    r = rho.values
    a, g = law.a, law.gamma
    if g == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            e = a * (r * np.log(np.where(r > 0, r, 1.0)) + 1.0 - r)
        e = np.where(r > 0, e, a)
    else:
        e = a * (r**g - g * r + g - 1.0) / (g - 1.0)
    return ScalarField(rho.grid, np.maximum(e, 0.0))


def h_of(rho: ScalarField, law: PressureLaw) -> ScalarField:
    """h = rho P' - P = a (gamma-1) rho^gamma."""
    _check_nonneg(rho.values)
    return ScalarField(rho.grid, law.a * (law.gamma - 1.0) * rho.values**law.gamma)


def k_of(rho: ScalarField, law: PressureLaw) -> ScalarField:
    """Closed form of k = P^2 - (rho/2) * int_1^rho P^2(s)/s^2 ds.

    Solves k - rho k' = -P^2/2 - 2 P h with k(1) = P(1)^2; the closed form
    is finite at rho = 0 for gamma >= 1.
    """
    _check_nonneg(rho.values)
    r = rho.values
    a, g = law.a, law.gamma
    # int_1^rho s^(2g-2) ds = (rho^(2g-1) - 1)/(2g-1), valid for g >= 1
    integ = (r ** (2 * g - 1) - 1.0) / (2 * g - 1.0)
    k = a**2 * r ** (2 * g) - 0.5 * r * a**2 * integ
    return ScalarField(rho.grid, k)


def pressure_tail_integral(rho: ScalarField, law: PressureLaw) -> ScalarField:
    """rho * int_rho^1 P^2(s)/s^2 ds, closed form for the gamma-law."""
    _check_nonneg(rho.values)
    r = rho.values
    a, g = law.a, law.gamma
    vals = a**2 * r * (1.0 - r ** (2 * g - 1)) / (2 * g - 1.0)
    return ScalarField(rho.grid, vals)


def thermo_scalars(rho: ScalarField, law: PressureLaw) -> ThermoScalars:
    P = pressure(rho, law)
    e = potential_energy(rho, law)
    h = h_of(rho, law)
    return ThermoScalars(
        P_star=float(P.values.max()),
        P_bar=float(P.values.mean()),
        e_total=float(e.values.mean()),
        h_sup=float(np.abs(h.values).max()),
    )


def effective_viscous_flux(
    rho: ScalarField, v: VectorField, law: PressureLaw, nu: float
) -> tuple[ScalarField, ScalarField]:
    """G = nu div v - P and its mean-free part.

    div v has exact zero mean spectrally, so mean(G) = -mean(P) holds and
    is asserted to 1e-10.
    """
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    P = pressure(rho, law)
    G = ScalarField(rho.grid, nu * divergence(v).values - P.values)
    drift = abs(G.mean() + P.mean())
    if drift > 1e-10 * max(1.0, abs(P.mean())):
        raise AssertionError(f"mean(G) + mean(P) = {drift:g}, spectral div leaked mass")
    Gt = G - G.mean()
    return G, Gt


def check_admissible(a: float, gamma: float, samples: int = 200) -> dict:
    """Admissibility report for the (a, gamma) law.

    Requires a > 0, gamma >= 1, and samples rho -> P(rho)/rho for
    monotonicity on a log grid.
    """
    report = {"a": a, "gamma": gamma, "admissible": True, "reason": ""}
    if a <= 0:
        report["admissible"] = False
        report["reason"] = "a <= 0"
        return report
    if gamma < 1:
        report["admissible"] = False
        report["reason"] = "gamma < 1: rho^(gamma-1) is decreasing"
        return report
    rho = np.logspace(-6, 6, samples)
    ratio = a * rho ** (gamma - 1.0)
    if np.any(np.diff(ratio) < -1e-12 * np.abs(ratio[:-1])):
        report["admissible"] = False
        report["reason"] = "sampled P(rho)/rho not nondecreasing"
    return report
