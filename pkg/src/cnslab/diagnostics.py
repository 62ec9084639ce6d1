"""Monitored functionals of a fluid state and their CSV export.

Everything here is a pure function of a state snapshot (plus parameters);
time accumulation (trapezoid quadratures of dissipation, weighted series)
lives in the harness which owns the record cadence.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

from .spectral import (
    ScalarField,
    VectorField,
    dealias,
    divergence,
    gradient,
    inner_l2,
    inverse_laplacian,
    leray_project,
    norm,
    to_physical,
)
from .solver import FluidState, SolverConfig, _ViscousOperator
from .thermo import (
    PressureLaw,
    effective_viscous_flux,
    potential_energy,
    pressure,
    pressure_tail_integral,
)

LOG_FLOOR = 1e-12


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    mom_x: float
    mom_y: float
    E: float
    calE: float
    intD: float
    sup_rho: float
    rho_bound_margin: float
    sup_Fplus: float
    div_L2: float
    div_Linf: float
    gradPv_L2: float
    gradPv_Linf: float
    Gt_L2: float
    Pt_L2: float
    rho_vdot_L2: float
    wt_rho_vdot_L2: float
    wt_grad_vdot_acc: float
    energy_residual: float


CSV_COLUMNS = [f.name for f in dc_fields(DiagnosticsRecord)]


@dataclass
class DifferenceMetrics:
    t: float
    drho_Hm1: float
    dv_weighted: float


def write_csv(path: str | Path, records: list[DiagnosticsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([f"{getattr(r, c):.17g}" for c in CSV_COLUMNS])


def read_csv(path: str | Path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header in {path}")
    return [DiagnosticsRecord(*(float(x) for x in row)) for row in rows[1:]]


# ---------------------------------------------------------------------------
# energy functionals

def total_energy(state: FluidState, law: PressureLaw) -> float:
    """E = int( rho |v|^2 / 2 + e(rho) ) dx."""
    kin = 0.5 * state.rho.values * (state.v.x.values ** 2 + state.v.y.values ** 2)
    pot = potential_energy(state.rho, law).values
    return float(np.mean(kin + pot))


def _grad_sq_l2(v: VectorField) -> float:
    gx = gradient(v.x)
    gy = gradient(v.y)
    return (
        norm(gx.x, "L2") ** 2
        + norm(gx.y, "L2") ** 2
        + norm(gy.x, "L2") ** 2
        + norm(gy.y, "L2") ** 2
    )


def _grad_sup(v: VectorField) -> float:
    gx = gradient(v.x)
    gy = gradient(v.y)
    frob = np.sqrt(
        gx.x.values**2 + gx.y.values**2 + gy.x.values**2 + gy.y.values**2
    )
    return float(frob.max())


def modified_energy(
    state: FluidState, law: PressureLaw, nu: float, mu: float
) -> tuple[float, float]:
    """Lyapunov functional and its domination margin over the reduced form.

    calE = 1/2 int( rho|v|^2 + mu|grad Pv|^2
                    + (1/nu)(Gt^2 + Pt^2 + rho int_rho^1 P^2/s^2 ds
                             + (P* - P(1)) P(1))
                    + 4 e ) dx
    The margin is calE minus the reduced lower form with coefficients
    (1, mu, 1/nu, 1/nu, 2); it must be >= 0 whenever nu >= P*/2.
    """
    rho, v = state.rho, state.v
    kin = float(np.mean(rho.values * (v.x.values**2 + v.y.values**2)))
    Pv, _ = leray_project(v)
    grad_pv = _grad_sq_l2(Pv)
    _, Gt = effective_viscous_flux(rho, v, law, nu)
    P = pressure(rho, law)
    Pt = P - P.mean()
    gt2 = norm(Gt, "L2") ** 2
    pt2 = norm(Pt, "L2") ** 2
    tail = float(pressure_tail_integral(rho, law).values.mean())
    P_star = float(P.values.max())
    P1 = law.a
    const = (P_star - P1) * P1
    e_tot = float(potential_energy(rho, law).values.mean())
    calE = 0.5 * (
        kin + mu * grad_pv + (gt2 + pt2 + tail + const) / nu + 4.0 * e_tot
    )
    reduced = 0.5 * (kin + mu * grad_pv + (gt2 + pt2) / nu + 2.0 * e_tot)
    return calE, calE - reduced


def material_derivative(state: FluidState, config: SolverConfig) -> VectorField:
    """Acceleration from the momentum balance (no time differencing).

    vdot = (mu Lap v + (lam+mu) grad div v - grad P) / max(rho, rho_floor),
    zeroed where rho < rho_floor (velocity there carries no momentum).
    """
    g = state.grid
    visc = _ViscousOperator(g, config.mu, config.nu)
    Lv = visc.apply_physical(state.v)
    P = dealias(pressure(state.rho, config.law))
    gP = gradient(P)
    rho_hat = np.maximum(state.rho.values, config.rho_floor)
    live = state.rho.values >= config.rho_floor
    ax = np.where(live, (Lv.x.values - gP.x.values) / rho_hat, 0.0)
    ay = np.where(live, (Lv.y.values - gP.y.values) / rho_hat, 0.0)
    return VectorField.from_arrays(g, ax, ay)


def dissipation_functional(
    state: FluidState,
    law: PressureLaw,
    nu: float,
    mu: float,
    rho_star: float,
    vdot: VectorField,
) -> tuple[float, dict]:
    """Six-term dissipation functional; returns (total, per-term dict)."""
    rho, v = state.rho, state.v
    g = state.grid
    t1 = 0.25 * float(np.mean(rho.values * (vdot.x.values**2 + vdot.y.values**2)))

    Pv, _ = leray_project(v)
    k2w = (4 * np.pi**2 * g.k2.astype(float)) ** 2
    hess = float(
        np.sum(np.abs(Pv.x.spectral()) ** 2 * k2w)
        + np.sum(np.abs(Pv.y.spectral()) ** 2 * k2w)
    )
    t2 = mu**2 / (4 * rho_star) * hess

    G, _ = effective_viscous_flux(rho, v, law, nu)
    gG = gradient(G)
    t3 = (norm(gG.x, "L2") ** 2 + norm(gG.y, "L2") ** 2) / (8 * rho_star)

    P = pressure(rho, law)
    Pt = P - P.mean()
    t4 = norm(Pt, "L2") ** 2 / (4 * nu)

    div = divergence(v)
    h_vals = law.a * (law.gamma - 1.0) * rho.values**law.gamma
    t5 = float(np.mean(0.5 * (nu + h_vals) * div.values**2))

    t6 = 0.5 * mu * _grad_sq_l2(v)
    terms = {
        "rho_vdot": t1,
        "hessian_Pv": t2,
        "grad_G": t3,
        "Pt": t4,
        "weighted_div": t5,
        "grad_v": t6,
    }
    return t1 + t2 + t3 + t4 + t5 + t6, terms


def damped_mode(state: FluidState, nu: float) -> tuple[ScalarField, float]:
    """F = log rho - (1/nu) (-Lap)^{-1} div(rho v); returns (F, sup F+).

    log rho uses the floor max(rho, 1e-12); vacuum cells drive F to large
    negative values, which max(0, F) ignores.
    """
    g = state.grid
    logr = np.log(np.maximum(state.rho.values, LOG_FLOOR))
    m = VectorField(state.rho * state.v.x, state.rho * state.v.y)
    q = divergence(m)
    q = q - q.mean()
    inv = inverse_laplacian(q)
    F = ScalarField(g, logr - inv.values / nu)
    return F, float(np.maximum(F.values, 0.0).max())


def density_bound_check(
    sup_rho_series, gamma: float, E0: float, rho0_star: float
) -> tuple[bool, np.ndarray, float]:
    """sup_x rho(t) <= 2 exp(((gamma-1)/gamma) E0) rho0*; returns margins."""
    bound = 2.0 * np.exp((gamma - 1.0) / gamma * E0) * rho0_star
    sup = np.asarray(sup_rho_series, dtype=float)
    margins = bound - sup
    return bool(np.all(margins >= 0)), margins, float(bound)


# ---------------------------------------------------------------------------
# commutator monitor

def _riesz(c: np.ndarray, grid, i: int, j: int) -> np.ndarray:
    """Spectral coefficients of (-Lap)^{-1} d_i d_j applied to c."""
    k = (grid.kx, grid.ky)
    k2 = grid.k2.astype(float)
    k2[0, 0] = 1.0
    out = -(k[i] * k[j]) / k2 * c
    out[0, 0] = 0.0
    return out


def commutator_field(state: FluidState) -> VectorField:
    """[v^j, (-Lap)^{-1} d_i d_j](rho v^i), summed over j, per component i.

    All pointwise products are dealiased before transforming.
    """
    g = state.grid
    mask = g.dealias_mask
    vd = [dealias(state.v.x), dealias(state.v.y)]
    md = [dealias(state.rho * state.v.x), dealias(state.rho * state.v.y)]
    out = []
    for i in range(2):
        acc = np.zeros((g.n, g.n))
        for jj in range(2):
            Rm = to_physical(g, _riesz(md[i].spectral(), g, i, jj))
            prod = dealias(ScalarField(g, vd[jj].values * md[i].values))
            Rp = to_physical(g, _riesz(prod.spectral(), g, i, jj))
            acc = acc + vd[jj].values * Rm.values - Rp.values
        out.append(acc)
    return VectorField.from_arrays(g, out[0], out[1])


# ---------------------------------------------------------------------------
# time series built on record sequences

def weighted_instant(state: FluidState, vdot: VectorField) -> float:
    """||sqrt(rho t) vdot||_2 at the state's own time."""
    s = float(np.mean(state.rho.values * (vdot.x.values**2 + vdot.y.values**2)))
    return float(np.sqrt(max(state.t, 0.0) * s))


def weighted_gradient_rate(vdot: VectorField, mu: float, nu: float, t: float) -> float:
    """t (mu ||grad P vdot||_2^2 + nu ||div vdot||_2^2), trapezoid integrand."""
    Pvd, _ = leray_project(vdot)
    return t * (mu * _grad_sq_l2(Pvd) + nu * norm(divergence(vdot), "L2") ** 2)


def lp_time_norm(times, sup_values, p: float) -> float:
    """(int |f|^p dt)^{1/p} by trapezoid; degenerate single sample uses dt=t."""
    t = np.asarray(times, dtype=float)
    f = np.abs(np.asarray(sup_values, dtype=float)) ** p
    if t.size == 1:
        return float((max(t[0], 0.0) * f[0]) ** (1.0 / p))
    return float(np.trapezoid(f, t) ** (1.0 / p))


def linfty_norm_series(times, div_sup, grad_pv_sup, eps: float) -> dict:
    """Time-Lebesgue L_{2-eps} norms of the two sup-in-space series."""
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0,1), got {eps}")
    p = 2.0 - eps
    return {
        "eps": eps,
        "div_L2meps_Linf": lp_time_norm(times, div_sup, p),
        "gradPv_L2meps_Linf": lp_time_norm(times, grad_pv_sup, p),
    }


def difference_metrics(state_a: FluidState, state_b: FluidState) -> DifferenceMetrics:
    """||drho||_{Hdot^-1} and ||sqrt(rho_a) dv||_2 between same-grid states."""
    if state_a.grid != state_b.grid:
        raise ValueError("states live on different grids")
    drho = state_a.rho - state_b.rho
    if abs(drho.mean()) > 1e-9:
        raise ValueError(f"mass mismatch {drho.mean():g} exceeds 1e-9")
    drho = drho - drho.mean()
    dv = state_a.v - state_b.v
    w = float(
        np.sqrt(np.mean(state_a.rho.values * (dv.x.values**2 + dv.y.values**2)))
    )
    return DifferenceMetrics(t=state_a.t, drho_Hm1=norm(drho, "Hdot-1"), dv_weighted=w)


def elliptic_identity_gap(v: VectorField, mu: float, lam: float) -> float:
    """Gap of mu||grad v||^2 + (lam+mu)||div v||^2 = mu||grad Pv||^2 + nu||div v||^2."""
    nu = lam + 2 * mu
    div2 = norm(divergence(v), "L2") ** 2
    Pv, _ = leray_project(v)
    lhs = mu * _grad_sq_l2(v) + (lam + mu) * div2
    rhs = mu * _grad_sq_l2(Pv) + nu * div2
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# per-record assembly helpers (instantaneous part only)

def instantaneous(state: FluidState, config: SolverConfig) -> dict:
    """All instantaneous record entries except accumulated/time-weighted ones."""
    law, nu, mu = config.law, config.nu, config.mu
    rho, v = state.rho, state.v
    E = total_energy(state, law)
    calE, margin = modified_energy(state, law, nu, mu)
    vdot = material_derivative(state, config)
    rho_star = max(float(rho.values.max()), 1e-300)
    D, _ = dissipation_functional(state, law, nu, mu, rho_star, vdot)
    _, Gt = effective_viscous_flux(rho, v, law, nu)
    P = pressure(rho, law)
    Pt = P - P.mean()
    div = divergence(v)
    Pv, _ = leray_project(v)
    _, sup_fplus = damped_mode(state, nu)
    rho_vdot = float(
        np.sqrt(np.mean(rho.values * (vdot.x.values**2 + vdot.y.values**2)))
    )
    return {
        "t": state.t,
        "mass": state.mass(),
        "mom_x": state.momentum()[0],
        "mom_y": state.momentum()[1],
        "E": E,
        "calE": calE,
        "equivE_margin": margin,
        "D": D,
        "sup_rho": float(rho.values.max()),
        "sup_Fplus": sup_fplus,
        "div_L2": norm(div, "L2"),
        "div_Linf": norm(div, "Linf"),
        "gradPv_L2": float(np.sqrt(_grad_sq_l2(Pv))),
        "gradPv_Linf": _grad_sup(Pv),
        "Gt_L2": norm(Gt, "L2"),
        "Pt_L2": norm(Pt, "L2"),
        "rho_vdot_L2": rho_vdot,
        "wt_rho_vdot_L2": weighted_instant(state, vdot),
        "wt_grad_vdot_rate": weighted_gradient_rate(vdot, mu, nu, state.t),
        "energy_flux": mu * _grad_sq_l2(Pv) + nu * norm(div, "L2") ** 2,
        "vdot": vdot,
    }
