"""Time integration of the compressible system.

Hybrid discretization: density by conservative finite-volume upwind
transport (discontinuous data stay clean), velocity by pseudo-spectral
IMEX with the constant-coefficient viscous operator treated by
Crank-Nicolson per Fourier mode and the advection/pressure terms by a
Heun predictor-corrector.  Strang composition density-momentum-density.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .spectral import (
    ScalarField,
    TorusGrid,
    VectorField,
    dealias,
    divergence,
    gradient,
    leray_project,
    norm,
    norm_vec,
    to_physical,
)
from .thermo import PressureLaw, h_of, pressure, pressure_potential


class StepFailure(RuntimeError):
    pass


@dataclass
class FluidState:
    rho: ScalarField
    v: VectorField
    t: float = 0.0

    def __post_init__(self):
        vals = self.rho.values
        if vals.min() < -1e-14:
            raise ValueError(f"density below tolerance: min {vals.min():g}")
        if vals.min() < 0:
            self.rho = ScalarField(self.rho.grid, np.maximum(vals, 0.0))

    @property
    def grid(self) -> TorusGrid:
        return self.rho.grid

    def mass(self) -> float:
        return float(self.rho.values.mean())

    def momentum(self) -> tuple[float, float]:
        return (
            float(np.mean(self.rho.values * self.v.x.values)),
            float(np.mean(self.rho.values * self.v.y.values)),
        )


@dataclass
class SolverConfig:
    grid: TorusGrid
    law: PressureLaw
    mu: float
    lam: float
    cfl: float = 0.4
    dt_max: float = 1.0
    t_end: float = 1.0
    limiter: str = "minmod"
    rho_floor: float = 1e-6
    # lower clamp for the density entering the viscous coefficient 1/rho;
    # in true vacuum the velocity carries no momentum, so capping the
    # coefficient there is a modeling cutoff of measure O(h)
    rho_visc_floor: float = 0.5
    conserve_momentum: bool = True
    c_const: float = 1.0  # stand-in for the unproven absolute constant

    def __post_init__(self):
        if self.mu <= 0 or self.nu <= 0:
            raise ValueError(f"need mu > 0 and nu = lam + 2 mu > 0, got mu={self.mu}, nu={self.nu}")
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must be in (0,1], got {self.cfl}")
        if self.limiter not in ("none", "minmod"):
            raise ValueError(f"unknown limiter {self.limiter!r}")

    @property
    def nu(self) -> float:
        return self.lam + 2 * self.mu


@dataclass
class StepReport:
    dt: float
    max_speed: float
    sup_rho: float
    mass_drift: float
    momentum_drift: tuple[float, float]
    halvings: int = 0


def compute_dt(state: FluidState, config: SolverConfig) -> float:
    """Explicit advective/acoustic CFL limit; viscosity is implicit."""
    vmax = norm_vec(state.v, "Linf")
    cs = config.law.sound_speed_max(max(float(state.rho.values.max()), 1e-300))
    dt = config.cfl * state.grid.h / max(vmax + cs, 1e-300)
    return float(max(min(dt, config.dt_max), 1e-12 * config.dt_max))


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _sweep(rho: np.ndarray, u: np.ndarray, dt: float, h: float, axis: int, limiter: str) -> np.ndarray:
    """One conservative upwind sweep along `axis` with face-centered velocity."""
    u_face = 0.5 * (u + np.roll(u, -1, axis))
    if limiter == "minmod":
        d_minus = rho - np.roll(rho, 1, axis)
        d_plus = np.roll(rho, -1, axis) - rho
        slope = _minmod(d_minus, d_plus)
        rho_l = rho + 0.5 * slope
        rho_r = np.roll(rho, -1, axis) - 0.5 * np.roll(slope, -1, axis)
    else:
        rho_l = rho
        rho_r = np.roll(rho, -1, axis)
    flux = np.where(u_face >= 0, u_face * rho_l, u_face * rho_r)
    out = rho - (dt / h) * (flux - np.roll(flux, 1, axis))
    return np.where(out < 0, np.where(out > -1e-14, 0.0, out), out)


def advance_density(rho: ScalarField, v: VectorField, dt: float, limiter: str = "minmod") -> ScalarField:
    """Transport rho by div(rho v) = -rho_t, Strang-split x/y, exact mass."""
    h = rho.grid.h
    speed = max(norm(v.x, "Linf"), norm(v.y, "Linf"))
    if speed * dt / h > 1.0:
        raise StepFailure(f"transport CFL violated: {speed * dt / h:.3f} > 1")
    vals = _sweep(rho.values, v.x.values, 0.5 * dt, h, 0, limiter)
    vals = _sweep(vals, v.y.values, dt, h, 1, limiter)
    vals = _sweep(vals, v.x.values, 0.5 * dt, h, 0, limiter)
    if vals.min() < -1e-14:
        raise StepFailure(f"density went negative: min {vals.min():g}")
    return ScalarField(rho.grid, np.maximum(vals, 0.0))


class _ViscousOperator:
    """Per-mode action of mu*Lap + (lam+mu)*grad div in the (k, k_perp) basis."""

    def __init__(self, grid: TorusGrid, mu: float, nu: float):
        self.grid = grid
        k2 = grid.k2.astype(np.float64)
        self.k2w = 4 * np.pi**2 * k2
        k2safe = k2.copy()
        k2safe[0, 0] = 1.0
        self.kx = grid.kx
        self.ky = grid.ky
        self.k2safe = k2safe
        self.mu = mu
        self.nu = nu

    def _split(self, cx, cy):
        kdot = (self.kx * cx + self.ky * cy) / self.k2safe
        px = self.kx * kdot
        py = self.ky * kdot
        return px, py, cx - px, cy - py

    def combine(self, cx, cy, fac_par, fac_perp):
        px, py, qx, qy = self._split(cx, cy)
        return px * fac_par + qx * fac_perp, py * fac_par + qy * fac_perp

    def cn_step(self, cx, cy, dt, rhs_x=None, rhs_y=None, scale=1.0):
        """(I - dt/2 sL)^-1 [(I + dt/2 sL)(cx,cy) + (rhs_x,rhs_y)], s=scale."""
        a = 0.5 * dt * scale
        num_par = 1.0 - a * self.nu * self.k2w
        num_perp = 1.0 - a * self.mu * self.k2w
        den_par = 1.0 + a * self.nu * self.k2w
        den_perp = 1.0 + a * self.mu * self.k2w
        nx, ny = self.combine(cx, cy, num_par, num_perp)
        if rhs_x is not None:
            nx = nx + rhs_x
            ny = ny + rhs_y
        return self.combine(nx, ny, 1.0 / den_par, 1.0 / den_perp)

    def apply_physical(self, v: VectorField) -> VectorField:
        """mu*Lap v + (lam+mu)*grad div v in physical space."""
        cx, cy = v.x.spectral(), v.y.spectral()
        ox, oy = self.combine(cx, cy, -self.nu * self.k2w, -self.mu * self.k2w)
        return VectorField(to_physical(self.grid, ox), to_physical(self.grid, oy))


def _implicit_coefficient(rho: ScalarField, config: SolverConfig) -> float:
    """Largest 1/rho_hat over the grid; the implicit solve uses this constant."""
    return float(1.0 / np.maximum(rho.values, config.rho_visc_floor).min())


def _explicit_rhs(rho: ScalarField, v: VectorField, config: SolverConfig, visc: _ViscousOperator) -> VectorField:
    """Advection, pressure acceleration and viscous density-variation correction."""
    g = rho.grid
    mask = g.dealias_mask
    vx_d = to_physical(g, v.x.spectral() * mask)
    vy_d = to_physical(g, v.y.spectral() * mask)
    gx = gradient(v.x)
    gy = gradient(v.y)
    adv_x = vx_d.values * gx.x.values + vy_d.values * gx.y.values
    adv_y = vx_d.values * gy.x.values + vy_d.values * gy.y.values

    # pressure acceleration in enthalpy-gradient form: grad Q(max(rho, floor))
    # with Q' = P'/rho.  Keeping it a pure gradient confines the vacuum-
    # interface stiffness to longitudinal modes, where the implicit volume
    # viscosity resists it; pointwise division by rho would leak enormous
    # transverse forcing instead.
    Q = dealias(pressure_potential(rho, config.law, config.rho_floor))
    gQ = gradient(Q)
    pacc_x = gQ.x.values
    pacc_y = gQ.y.values

    # density variation of the viscous term relative to the implicit
    # constant coefficient b = max(1/rho_hat).  By construction the factor
    # is <= 0 everywhere, so the explicit sweep never works against the
    # implicit diffusion on stiff modes (a positive factor is amplified
    # by the trapezoidal update)
    Lv = visc.apply_physical(v)
    b = _implicit_coefficient(rho, config)
    corr = 1.0 / np.maximum(rho.values, config.rho_visc_floor) - b
    out_x = -adv_x - pacc_x + corr * Lv.x.values
    out_y = -adv_y - pacc_y + corr * Lv.y.values
    fx = to_physical(g, np.fft.fft2(out_x) / g.n**2 * mask)
    fy = to_physical(g, np.fft.fft2(out_y) / g.n**2 * mask)
    return VectorField(fx, fy)


def advance_momentum(rho: ScalarField, v: VectorField, config: SolverConfig, dt: float) -> VectorField:
    """One IMEX step: Crank-Nicolson viscosity, Heun for the explicit terms."""
    g = rho.grid
    visc = _ViscousOperator(g, config.mu, config.nu)
    b = _implicit_coefficient(rho, config)
    cx, cy = v.x.spectral(), v.y.spectral()

    n1 = _explicit_rhs(rho, v, config, visc)
    r1x, r1y = dt * n1.x.spectral(), dt * n1.y.spectral()
    sx, sy = visc.cn_step(cx, cy, dt, r1x, r1y, scale=b)
    v_star = VectorField(to_physical(g, sx), to_physical(g, sy))

    n2 = _explicit_rhs(rho, v_star, config, visc)
    r2x = 0.5 * dt * (n1.x.spectral() + n2.x.spectral())
    r2y = 0.5 * dt * (n1.y.spectral() + n2.y.spectral())
    fx, fy = visc.cn_step(cx, cy, dt, r2x, r2y, scale=b)
    mask = g.dealias_mask
    return VectorField(to_physical(g, fx * mask), to_physical(g, fy * mask))


def step(state: FluidState, config: SolverConfig, dt: float | None = None) -> tuple[FluidState, StepReport]:
    """Strang step density(dt/2) -> momentum(dt) -> density(dt/2)."""
    if dt is None:
        dt = compute_dt(state, config)
    mass0 = state.mass()
    mom0 = state.momentum()
    halvings = 0
    while True:
        try:
            rho_half = advance_density(state.rho, state.v, 0.5 * dt, config.limiter)
            v_new = advance_momentum(rho_half, state.v, config, dt)
            vmax = norm_vec(v_new, "Linf")
            if vmax * dt / state.grid.h > 1.0:
                raise StepFailure(f"post-hoc CFL violated: {vmax * dt / state.grid.h:.3f}")
            rho_new = advance_density(rho_half, v_new, 0.5 * dt, config.limiter)
            break
        except StepFailure:
            halvings += 1
            dt *= 0.5
            if halvings >= 3:
                raise StepFailure("three consecutive dt halvings, aborting run")

    new = FluidState(rho_new, v_new, state.t + dt)
    mom_drift = (new.momentum()[0] - mom0[0], new.momentum()[1] - mom0[1])
    if config.conserve_momentum:
        # re-impose the discrete momentum invariant by a Galilean shift;
        # the raw pre-correction drift is what the report carries
        mx, my = new.momentum()
        m = new.mass()
        new = FluidState(
            rho_new,
            VectorField(v_new.x - mx / m, v_new.y - my / m),
            new.t,
        )
    report = StepReport(
        dt=dt,
        max_speed=norm_vec(new.v, "Linf"),
        sup_rho=float(rho_new.values.max()),
        mass_drift=new.mass() - mass0,
        momentum_drift=mom_drift,
        halvings=halvings,
    )
    return new, report


# ---------------------------------------------------------------------------
# parameter-condition checkers

def nu_threshold(rho_star: float, mu: float, law: PressureLaw, c_const: float = 1.0) -> float:
    """max(mu, C sqrt(rho* log(e+rho*)/mu) P(rho*), P(rho*)/2, 4 sqrt(rho*(1+h(rho*)))).

    C is the paper-unspecified absolute constant, supplied by configuration.
    """
    P_star = float(law.P(np.asarray(rho_star)))
    h_star = law.a * (law.gamma - 1.0) * rho_star**law.gamma
    return float(
        max(
            mu,
            c_const * np.sqrt(rho_star * np.log(np.e + rho_star) / mu) * P_star,
            P_star / 2.0,
            4.0 * np.sqrt(rho_star * (1.0 + h_star)),
        )
    )


def largenu_conditions(nu: float, mu: float, rho_star: float, law: PressureLaw, c_const: float = 1.0) -> list[dict]:
    """The four 2D largeness conditions on nu, each as lhs >= rhs."""
    P_star = float(law.P(np.asarray(rho_star)))
    h_sup = law.a * (law.gamma - 1.0) * rho_star**law.gamma
    conds = [
        ("nu >= mu", nu, mu),
        (
            "nu^2 >= 2C/mu rho* log(e+rho*) P*^2",
            nu**2,
            2 * c_const / mu * rho_star * np.log(np.e + rho_star) * P_star**2,
        ),
        ("nu >= 8 rho* (2 |h|_inf / nu + 1)", nu, 8 * rho_star * (2 * h_sup / nu + 1)),
        ("nu >= P*/2", nu, P_star / 2.0),
    ]
    return [
        {"name": name, "lhs": float(lhs), "rhs": float(rhs), "ok": bool(lhs >= rhs)}
        for name, lhs, rhs in conds
    ]


def largenu_threshold(mu: float, rho_star: float, law: PressureLaw, c_const: float = 1.0) -> float:
    """Smallest nu satisfying all four 2D conditions (closed form)."""
    P_star = float(law.P(np.asarray(rho_star)))
    h_sup = law.a * (law.gamma - 1.0) * rho_star**law.gamma
    third = 4 * rho_star + np.sqrt(16 * rho_star**2 + 16 * rho_star * h_sup)
    return float(
        max(
            mu,
            np.sqrt(2 * c_const / mu * rho_star * np.log(np.e + rho_star)) * P_star,
            third,
            P_star / 2.0,
        )
    )


def condnu3_conditions(nu: float, mu: float, rho_star: float, law: PressureLaw) -> list[dict]:
    """The 3D largeness conditions on nu."""
    P_star = float(law.P(np.asarray(rho_star)))
    h_sup = law.a * (law.gamma - 1.0) * rho_star**law.gamma
    conds = [
        ("nu >= 8 rho*^3 P*/mu", nu, 8 * rho_star**3 * P_star / mu),
        ("nu^2 >= 8 |h|_inf rho*", nu**2, 8 * h_sup * rho_star),
    ]
    return [
        {"name": name, "lhs": float(lhs), "rhs": float(rhs), "ok": bool(lhs >= rhs)}
        for name, lhs, rhs in conds
    ]


def smallness_3d_check(
    rho0: ScalarField,
    v0: VectorField,
    law: PressureLaw,
    mu: float,
    nu: float,
    rho_star: float,
    E0: float,
    c0: float = 1.0,
) -> tuple[bool, float]:
    """Scaling-invariant smallness condition (2D fields as the desk-scale stand-in).

    Returns (passes, lhs/rhs ratio); ratio 0 means zero data.
    """
    Pv, _ = leray_project(v0)
    gPx = gradient(Pv.x)
    gPy = gradient(Pv.y)
    grad_pv_sq = (
        norm(gPx.x, "L2") ** 2
        + norm(gPx.y, "L2") ** 2
        + norm(gPy.x, "L2") ** 2
        + norm(gPy.y, "L2") ** 2
    )
    P = pressure(rho0, law)
    Pt = P - P.mean()
    lhs = mu * grad_pv_sq + norm(Pt, "L2") ** 2 / nu + nu * norm(divergence(v0), "L2") ** 2
    if E0 <= 0:
        return True, 0.0
    rhs = c0 * mu**5 / (rho_star**3 * E0)
    ratio = lhs / rhs
    return ratio <= 1.0, float(ratio)


def run_to_time(state: FluidState, config: SolverConfig, t_end: float, callback=None) -> FluidState:
    """Advance until t_end, clipping the final step; optional per-step callback."""
    while state.t < t_end - 1e-14:
        dt = min(compute_dt(state, config), t_end - state.t)
        state, report = step(state, config, dt)
        if callback is not None:
            callback(state, report)
    return state
