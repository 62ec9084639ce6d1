"""Experiment orchestration: configured runs, viscosity sweeps, perturbation
studies, parameter-condition tables, and all on-disk artifacts.

Config files are TOML with sections [grid], [fluid], [initial], [run],
[constants].  A run directory holds diagnostics.csv, CNSF snapshots at the
record cadence, and manifest.json.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    CSV_COLUMNS,
    DiagnosticsRecord,
    density_bound_check,
    difference_metrics,
    elliptic_identity_gap,
    instantaneous,
    linfty_norm_series,
    lp_time_norm,
    write_csv,
)
from .prep import (
    clamp_and_renormalize,
    make_density,
    make_velocity,
    mollify,
    mollify_vec,
    normalize_data,
    random_band_limited,
)
from .snapshot import read_snapshot, write_snapshot
from .solver import (
    FluidState,
    SolverConfig,
    compute_dt,
    condnu3_conditions,
    largenu_conditions,
    largenu_threshold,
    nu_threshold,
    smallness_3d_check,
    step,
)
from .spectral import ScalarField, TorusGrid, VectorField, divergence, norm
from .thermo import PressureLaw


@dataclass
class RunConfig:
    n: int = 64
    mu: float = 0.01
    lam: float = 1.0
    a: float = 1.0
    gamma: float = 1.0
    density: str = "uniform"
    density_params: dict = field(default_factory=dict)
    density_path: str = ""
    velocity: str = "zero"
    velocity_params: dict = field(default_factory=dict)
    clamp_delta: float = 0.0
    mollify_delta: float = 0.0
    cfl: float = 0.4
    t_end: float = 1.0
    record_interval: float = 0.05
    seed: int = 0
    out: str = ""
    K: float = 0.0
    c_nu: float = 1.0
    c0: float = 1.0
    constants_file: str = ""
    limiter: str = "minmod"
    conserve_momentum: bool = True

    @property
    def nu(self) -> float:
        return self.lam + 2 * self.mu

    def with_nu(self, nu: float) -> "RunConfig":
        from dataclasses import replace

        return replace(self, lam=nu - 2 * self.mu)

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()


_SECTION_KEYS = {
    "grid": {"n"},
    "fluid": {"mu", "lam", "a", "gamma"},
    "initial": {
        "density",
        "density_params",
        "density_path",
        "velocity",
        "velocity_params",
        "clamp_delta",
        "mollify_delta",
    },
    "run": {
        "cfl",
        "t_end",
        "record_interval",
        "seed",
        "out",
        "K",
        "limiter",
        "conserve_momentum",
    },
    "constants": {"c_nu", "c0", "constants_file"},
}


def load_config(path: str | Path) -> RunConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    kwargs = {}
    for section, keys in _SECTION_KEYS.items():
        for key, value in raw.get(section, {}).items():
            if key not in keys:
                raise ValueError(f"unknown key {key!r} in [{section}]")
            kwargs[key] = value
    return RunConfig(**kwargs)


def build_initial_state(config: RunConfig) -> FluidState:
    grid = TorusGrid(config.n)
    if config.density_path:
        rho0 = read_snapshot(config.density_path)
        if rho0.grid.n != config.n:
            raise ValueError("snapshot grid does not match configured grid")
    else:
        rho0 = make_density(grid, config.density, **config.density_params)
    v0 = make_velocity(grid, config.velocity, seed=config.seed, **config.velocity_params)
    if config.clamp_delta > 0:
        rho0 = clamp_and_renormalize(rho0, config.clamp_delta)
    if config.mollify_delta > 0:
        rho0 = mollify(rho0, config.mollify_delta)
        v0 = mollify_vec(v0, config.mollify_delta)
    if config.K > 0:
        # impose ||div v0||_2 = K / sqrt(nu)
        target = config.K / np.sqrt(config.nu)
        d = norm(divergence(v0), "L2")
        if d > 0:
            from .spectral import leray_project

            P, Q = leray_project(v0)
            v0 = P + Q.scaled(target / d)
    data = normalize_data(rho0, v0)
    return FluidState(data.rho0, data.v0, 0.0)


def solver_config(config: RunConfig) -> SolverConfig:
    return SolverConfig(
        grid=TorusGrid(config.n),
        law=PressureLaw(config.a, config.gamma),
        mu=config.mu,
        lam=config.lam,
        cfl=config.cfl,
        t_end=config.t_end,
        limiter=config.limiter,
        conserve_momentum=config.conserve_momentum,
        c_const=config.c_nu,
    )


@dataclass
class RunResult:
    config: RunConfig
    times: np.ndarray
    records: list
    states: list            # FluidState at each record
    equiv_margins: np.ndarray
    elliptic_gaps: np.ndarray
    E0: float
    rho0_star: float
    manifest: dict


def run(config: RunConfig, out_dir: str | Path | None = None) -> RunResult:
    """Full pipeline: initial data -> time march -> per-record diagnostics."""
    t0_wall = time.perf_counter()
    scfg = solver_config(config)
    state = build_initial_state(config)
    rho0_star = float(state.rho.values.max())

    record_times = np.arange(
        0.0, config.t_end + 0.5 * config.record_interval, config.record_interval
    )
    if record_times[-1] < config.t_end - 1e-12:
        record_times = np.append(record_times, config.t_end)
    record_times[-1] = config.t_end

    records: list[DiagnosticsRecord] = []
    states: list[FluidState] = []
    margins, gaps = [], []
    intD = 0.0
    flux_acc = 0.0
    wt_acc = 0.0
    prev = None  # (t, D, wt_rate)
    prev_flux = None  # (t, flux), accumulated every solver step
    E0 = None

    def energy_flux(st: FluidState) -> float:
        from .diagnostics import _grad_sq_l2
        from .spectral import leray_project

        Pv, _ = leray_project(st.v)
        return scfg.mu * _grad_sq_l2(Pv) + scfg.nu * norm(divergence(st.v), "L2") ** 2

    def accumulate_flux(st: FluidState):
        # the energy-balance residual needs the dissipation history at the
        # solver's own dt; record-cadence quadrature would dominate the error
        nonlocal flux_acc, prev_flux
        f = energy_flux(st)
        if prev_flux is not None:
            flux_acc += 0.5 * (st.t - prev_flux[0]) * (prev_flux[1] + f)
        prev_flux = (st.t, f)

    def emit(st: FluidState):
        nonlocal intD, wt_acc, prev, E0
        inst = instantaneous(st, scfg)
        if E0 is None:
            E0 = inst["E"]
        if prev is not None:
            dt = st.t - prev[0]
            intD += 0.5 * dt * (prev[1] + inst["D"])
            wt_acc += 0.5 * dt * (prev[2] + inst["wt_grad_vdot_rate"])
        prev = (st.t, inst["D"], inst["wt_grad_vdot_rate"])
        bound = 2.0 * np.exp((config.gamma - 1.0) / config.gamma * E0) * rho0_star
        rec = DiagnosticsRecord(
            t=inst["t"],
            mass=inst["mass"],
            mom_x=inst["mom_x"],
            mom_y=inst["mom_y"],
            E=inst["E"],
            calE=inst["calE"],
            intD=intD,
            sup_rho=inst["sup_rho"],
            rho_bound_margin=bound - inst["sup_rho"],
            sup_Fplus=inst["sup_Fplus"],
            div_L2=inst["div_L2"],
            div_Linf=inst["div_Linf"],
            gradPv_L2=inst["gradPv_L2"],
            gradPv_Linf=inst["gradPv_Linf"],
            Gt_L2=inst["Gt_L2"],
            Pt_L2=inst["Pt_L2"],
            rho_vdot_L2=inst["rho_vdot_L2"],
            wt_rho_vdot_L2=inst["wt_rho_vdot_L2"],
            wt_grad_vdot_acc=wt_acc,
            energy_residual=inst["E"] + flux_acc - E0,
        )
        records.append(rec)
        states.append(st)
        margins.append(inst["equivE_margin"])
        gaps.append(elliptic_identity_gap(st.v, config.mu, config.lam))

    accumulate_flux(state)
    emit(state)
    error = None
    try:
        for target in record_times[1:]:
            while state.t < target - 1e-12:
                dt = min(compute_dt(state, scfg), target - state.t)
                state, _ = step(state, scfg, dt)
                accumulate_flux(state)
            emit(state)
    except Exception as exc:  # recorded in the manifest, then re-raised
        error = f"{type(exc).__name__}: {exc}"

    manifest = {
        "config_hash": config.digest(),
        "config": config.to_dict(),
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0_wall,
        "n_records": len(records),
        "nu": config.nu,
        "E0": E0,
        "rho0_star": rho0_star,
        "constants": {"c_nu": config.c_nu, "c0": config.c0},
        "error": error,
    }
    result = RunResult(
        config=config,
        times=np.array([r.t for r in records]),
        records=records,
        states=states,
        equiv_margins=np.array(margins),
        elliptic_gaps=np.array(gaps),
        E0=E0 if E0 is not None else 0.0,
        rho0_star=rho0_star,
        manifest=manifest,
    )
    if out_dir is not None:
        write_run_directory(result, out_dir)
    if error is not None:
        raise RuntimeError(error)
    return result


def write_run_directory(result: RunResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "diagnostics.csv", result.records)
    for i, st in enumerate(result.states):
        write_snapshot(out / f"rho_{i:04d}.cnsf", st.rho)
        write_snapshot(out / f"vx_{i:04d}.cnsf", st.v.x)
        write_snapshot(out / f"vy_{i:04d}.cnsf", st.v.y)
    (out / "manifest.json").write_text(json.dumps(result.manifest, indent=2))


# ---------------------------------------------------------------------------
# viscosity sweep

def _fit_slope(x, y) -> tuple[float, float]:
    """Least-squares slope of log y vs log x with a rough 1-sigma interval."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    dof = max(len(lx) - 2, 1)
    sigma = float(np.sqrt((res[0] if res.size else 0.0) / dof))
    sx = float(np.sqrt(np.sum((lx - lx.mean()) ** 2)))
    return float(coef[0]), sigma / max(sx, 1e-300)


def _velocity_l2l2_distance(result_a: RunResult, result_b: RunResult) -> float:
    if len(result_a.states) != len(result_b.states):
        raise ValueError("sweep members recorded different cadences")
    vals = []
    for sa, sb in zip(result_a.states, result_b.states):
        dv = sa.v - sb.v
        vals.append(norm(dv.x, "L2") ** 2 + norm(dv.y, "L2") ** 2)
    return float(np.sqrt(np.trapezoid(vals, result_a.times)))


def _sweep_worker(args):
    config, nu = args
    return run(config.with_nu(nu), out_dir=None)


def sweep_nu(config: RunConfig, nu_list, eps: float = 0.5, out_dir=None) -> dict:
    """Run the family over nu from identical initial data and fit decay rates."""
    nus = sorted(float(x) for x in nu_list)
    if len(nus) < 3:
        raise ValueError("sweep needs at least three viscosity values")
    condition_tables = {
        f"{nu:g}": largenu_conditions(nu, config.mu, 1.0, PressureLaw(config.a, config.gamma), config.c_nu)
        for nu in nus
    }
    workers = int(os.environ.get("CNS_THREADS", os.cpu_count() or 1))
    results: list[RunResult] = []
    failures = {}
    if workers > 1 and len(nus) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(nus))) as pool:
            futs = list(pool.map(_sweep_worker, [(config, nu) for nu in nus]))
        results = futs
    else:
        for nu in nus:
            results.append(_sweep_worker((config, nu)))

    div_l2l2, div_linfl2, div_lpeinf = [], [], []
    for res in results:
        div2 = [r.div_L2 for r in res.records]
        div_l2l2.append(float(np.sqrt(np.trapezoid(np.asarray(div2) ** 2, res.times))))
        div_linfl2.append(float(np.max(div2)))
        div_lpeinf.append(
            lp_time_norm(res.times, [r.div_Linf for r in res.records], 2.0 - eps)
        )
    slope_l2l2, ci_l2l2 = _fit_slope(nus, div_l2l2)
    slope_lpeinf, ci_lpeinf = _fit_slope(nus, div_lpeinf)
    cauchy = [
        _velocity_l2l2_distance(results[i], results[i + 1])
        for i in range(len(results) - 1)
    ]
    out = {
        "nu": nus,
        "eps": eps,
        "div_L2L2": div_l2l2,
        "div_LinfL2": div_linfl2,
        "div_L2mepsLinf": div_lpeinf,
        "slope_div_L2L2": slope_l2l2,
        "slope_ci_div_L2L2": ci_l2l2,
        "slope_div_L2mepsLinf": slope_lpeinf,
        "slope_ci_div_L2mepsLinf": ci_lpeinf,
        "cauchy_v_L2L2": cauchy,
        "conditions": condition_tables,
        "failures": failures,
    }
    if out_dir is not None:
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        (out_path / "sweep.json").write_text(json.dumps(out, indent=2))
        for nu, res in zip(nus, results):
            write_run_directory(res, out_path / f"nu_{nu:g}")
    out["results"] = results
    return out


# ---------------------------------------------------------------------------
# perturbation stability

def perturb_experiment(config: RunConfig, etas, out_dir=None) -> dict:
    """Response of the run to band-limited velocity perturbations of size eta."""
    base = run(config, out_dir=None)
    grid = TorusGrid(config.n)
    rng = np.random.default_rng(config.seed + 1)
    noise = VectorField(
        random_band_limited(grid, rng, kmax=8),
        random_band_limited(grid, rng, kmax=8),
    )
    terminal_dv, sup_z = [], []
    series = {}
    for eta in etas:
        state0 = build_initial_state(config)
        pert = FluidState(state0.rho, state0.v + noise.scaled(float(eta)), 0.0)
        # re-run from the perturbed state through the same machinery
        scfg = solver_config(config)
        times = base.times
        states = [pert]
        st = pert
        for target in times[1:]:
            while st.t < target - 1e-12:
                dt = min(compute_dt(st, scfg), target - st.t)
                st, _ = step(st, scfg, dt)
            states.append(st)
        metrics = [difference_metrics(sa, sb) for sa, sb in zip(states, base.states)]
        terminal_dv.append(metrics[-1].dv_weighted)
        z = [
            m.drho_Hm1 / np.sqrt(t) if t > 0 else 0.0
            for m, t in zip(metrics, times)
        ]
        sup_z.append(float(np.max(z)))
        series[f"{eta:g}"] = {
            "t": list(times),
            "drho_Hm1": [m.drho_Hm1 for m in metrics],
            "dv_weighted": [m.dv_weighted for m in metrics],
        }
    slope, ci = _fit_slope(etas, np.maximum(terminal_dv, 1e-300))
    out = {
        "etas": [float(e) for e in etas],
        "terminal_dv_weighted": terminal_dv,
        "sup_Z": sup_z,
        "slope_dv_vs_eta": slope,
        "slope_ci": ci,
        "series": series,
    }
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "perturb.json").write_text(json.dumps(out, indent=2))
    return out


# ---------------------------------------------------------------------------
# vacuum tracking

def track_vacuum(config: RunConfig, eps_rel: float = 1e-3, out_dir=None, result: RunResult | None = None) -> dict:
    """Vacuum-set transport report for a configured run.

    eps_rel scales the numerical-vacuum threshold by the initial density sup.
    """
    from .flow import (
        boundary_segments,
        holder_exponent,
        ll_norm,
        vacuum_indicator,
        vacuum_transport_check,
        write_boundary_csv,
    )

    if result is None:
        result = run(config, out_dir=None)
    eps_vac = eps_rel * result.rho0_star
    velocities = [st.v for st in result.states]
    densities = [st.rho for st in result.states]
    report = vacuum_transport_check(result.times, velocities, densities, eps_vac)
    ll = [ll_norm(v)["bound"] for v in velocities]
    alpha = holder_exponent(result.times, ll)
    report["t"] = list(result.times)
    report["ll_bound"] = ll
    report["alpha_t"] = list(alpha)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "vacuum.json").write_text(
            json.dumps({k: v for k, v in report.items()}, indent=2)
        )
        if not report.get("empty", False):
            ind0 = vacuum_indicator(densities[0], eps_vac)
            indT = vacuum_indicator(densities[-1], eps_vac)
            write_snapshot(out / "vacuum_0.cnsf", ScalarField(densities[0].grid, ind0.indicator.astype(float)))
            write_snapshot(out / "vacuum_T.cnsf", ScalarField(densities[-1].grid, indT.indicator.astype(float)))
            segs = boundary_segments(ScalarField(densities[-1].grid, indT.indicator.astype(float)))
            write_boundary_csv(out / "vacuum_boundary_T.csv", segs)
    return report


# ---------------------------------------------------------------------------
# condition tables

def check_conditions(config: RunConfig, rho_star: float | None = None) -> dict:
    """All viscosity-largeness conditions with the configured constants."""
    law = PressureLaw(config.a, config.gamma)
    if rho_star is None:
        state = build_initial_state(config)
        rho_star = float(state.rho.values.max())
    nu = config.nu
    table = {
        "nu": nu,
        "mu": config.mu,
        "rho_star": rho_star,
        "nu0_footnote": nu_threshold(rho_star, config.mu, law, config.c_nu),
        "largenu_threshold": largenu_threshold(config.mu, rho_star, law, config.c_nu),
        "conditions_2d": largenu_conditions(nu, config.mu, rho_star, law, config.c_nu),
        "conditions_3d": condnu3_conditions(nu, config.mu, rho_star, law),
    }
    state = build_initial_state(config)
    E0 = None
    ok, ratio = smallness_3d_check(
        state.rho,
        state.v,
        law,
        config.mu,
        nu,
        rho_star,
        E0=max(_initial_energy(state, law), 1e-300),
        c0=config.c0,
    )
    table["smallness_3d"] = {"ok": ok, "ratio": ratio}
    table["all_2d_ok"] = all(c["ok"] for c in table["conditions_2d"])
    return table


def _initial_energy(state: FluidState, law: PressureLaw) -> float:
    from .diagnostics import total_energy

    return total_energy(state, law)
