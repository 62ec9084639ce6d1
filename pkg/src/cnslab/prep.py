"""Initial-data pipeline: normalization, lower clamping, mollification.

Also ships the canonical "ripped" data library: indicator densities
(disc, square, star) renormalized to unit mass, and a small family of
initial velocities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    ScalarField,
    TorusGrid,
    VectorField,
    dealias_vec,
    divergence,
    leray_project,
    norm,
    to_physical,
)


@dataclass
class InitialData:
    rho0: ScalarField
    v0: VectorField
    provenance: str = ""


def normalize_data(rho0: ScalarField, v0: VectorField, provenance: str = "") -> InitialData:
    """Rescale rho0 to unit mass and shift v0 so the total momentum vanishes.

    The shift is the Galilean constant (int rho v)/(int rho).
    """
    mass = rho0.values.mean()
    if mass <= 0:
        raise ValueError(f"total mass must be positive, got {mass:g}")
    rho = ScalarField(rho0.grid, rho0.values / mass)
    mx = float(np.mean(rho.values * v0.x.values))
    my = float(np.mean(rho.values * v0.y.values))
    v = VectorField(v0.x - mx, v0.y - my)
    return InitialData(rho, v, provenance)


def clamp_and_renormalize(rho0: ScalarField, delta: float, tol: float = 1e-12) -> ScalarField:
    """min(xi, max(rho0, delta)) with xi chosen by bisection so mass stays 1."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0,1), got {delta}")
    raised = np.maximum(rho0.values, delta)

    def mass(xi: float) -> float:
        return float(np.minimum(xi, raised).mean())

    lo, hi = 1.0, float(raised.max())
    if mass(lo) > 1.0 + tol:
        raise ValueError("no admissible clamp level: mass at xi=1 already exceeds 1")
    if mass(hi) < 1.0 - tol:
        raise ValueError("no admissible clamp level: raised density has mass < 1")
    if hi <= lo:
        return ScalarField(rho0.grid, np.minimum(1.0, raised))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mass(mid) < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, hi):
            break
    xi = 0.5 * (lo + hi)
    return ScalarField(rho0.grid, np.minimum(xi, raised))


def mollify(f: ScalarField, delta: float) -> ScalarField:
    """Periodized-Gaussian mollification, spectral multiplier exp(-2 pi^2 s^2 |k|^2).

    Width s = delta.  The zero mode is untouched, so the mean is preserved
    exactly; the kernel is positive so min/max bounds are preserved up to
    round-off.
    """
    if delta <= 0:
        raise ValueError(f"mollifier width must be positive, got {delta}")
    g = f.grid
    mult = np.exp(-2 * np.pi**2 * delta**2 * g.k2)
    return to_physical(g, f.spectral() * mult)


def mollify_vec(v: VectorField, delta: float) -> VectorField:
    return VectorField(mollify(v.x, delta), mollify(v.y, delta))


# ---------------------------------------------------------------------------
# canonical data library

def indicator_disc(grid: TorusGrid, cx=0.5, cy=0.5, radius=0.3) -> ScalarField:
    xx, yy = grid.meshgrid()
    return ScalarField(grid, ((xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2).astype(float))


def indicator_square(grid: TorusGrid, cx=0.5, cy=0.5, half=0.25) -> ScalarField:
    xx, yy = grid.meshgrid()
    inside = (np.abs(xx - cx) <= half) & (np.abs(yy - cy) <= half)
    return ScalarField(grid, inside.astype(float))


def indicator_star(grid: TorusGrid, cx=0.5, cy=0.5, r0=0.25, wobble=0.3, arms=5) -> ScalarField:
    """Star-shaped Lipschitz set r(theta) = r0 (1 + wobble cos(arms*theta))."""
    xx, yy = grid.meshgrid()
    dx, dy = xx - cx, yy - cy
    r = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    return ScalarField(grid, (r <= r0 * (1 + wobble * np.cos(arms * theta))).astype(float))


def taylor_green(grid: TorusGrid, amplitude: float = 1.0) -> VectorField:
    xx, yy = grid.meshgrid()
    vx = amplitude * np.sin(2 * np.pi * xx) * np.cos(2 * np.pi * yy)
    vy = -amplitude * np.cos(2 * np.pi * xx) * np.sin(2 * np.pi * yy)
    return VectorField.from_arrays(grid, vx, vy)


def shear_wave(grid: TorusGrid, amplitude: float = 1.0) -> VectorField:
    xx, yy = grid.meshgrid()
    return VectorField.from_arrays(grid, amplitude * np.sin(2 * np.pi * yy), 0.0 * xx)


def random_band_limited(
    grid: TorusGrid,
    rng: np.random.Generator,
    kmax: int = 8,
    slope: float = 2.0,
    amplitude: float = 1.0,
) -> ScalarField:
    """Random real field with |k|^(-slope) spectral envelope, modes |k_i| <= kmax."""
    n = grid.n
    phase = rng.uniform(0, 2 * np.pi, (n, n))
    c = np.exp(1j * phase)
    k2 = grid.k2.astype(float)
    k2[0, 0] = 1.0
    env = k2 ** (-slope / 2.0)
    keep = (np.abs(grid.kx) <= kmax) & (np.abs(grid.ky) <= kmax)
    env = env * keep
    env[0, 0] = 0.0
    f = to_physical(grid, c * env)
    s = norm(f, "L2")
    if s == 0:
        return f
    return ScalarField(grid, f.values * (amplitude / s))


def random_velocity_with_divergence(
    grid: TorusGrid,
    rng: np.random.Generator,
    div_l2_target: float,
    kmax: int = 8,
    amplitude: float = 1.0,
) -> VectorField:
    """Band-limited H1 velocity whose ||div v||_2 is set exactly.

    The solenoidal part has L2 norm `amplitude`; the potential part is
    rescaled so the divergence norm matches the target (e.g. K/sqrt(nu)).
    """
    raw = VectorField(
        random_band_limited(grid, rng, kmax=kmax),
        random_band_limited(grid, rng, kmax=kmax),
    )
    P, Q = leray_project(raw)
    sP = np.hypot(norm(P.x, "L2"), norm(P.y, "L2"))
    if sP > 0:
        P = P.scaled(amplitude / sP)
    d = norm(divergence(Q), "L2")
    if div_l2_target == 0 or d == 0:
        return dealias_vec(P)
    return dealias_vec(P + Q.scaled(div_l2_target / d))


_DENSITY_SHAPES = {
    "disc": indicator_disc,
    "square": indicator_square,
    "star": indicator_star,
}


def make_density(grid: TorusGrid, shape: str, **params) -> ScalarField:
    """Named density shapes, renormalized to unit mass.

    'uniform' is rho = 1; 'disc'/'square'/'star' are indicators; 'smooth'
    is a mollified bump 1 + amp*sin(2 pi x) sin(2 pi y).
    """
    if shape == "uniform":
        return ScalarField.constant(grid, 1.0)
    if shape == "smooth":
        amp = params.get("amp", 0.3)
        xx, yy = grid.meshgrid()
        f = ScalarField(grid, 1.0 + amp * np.sin(2 * np.pi * xx) * np.sin(2 * np.pi * yy))
        return ScalarField(grid, f.values / f.values.mean())
    if shape in _DENSITY_SHAPES:
        f = _DENSITY_SHAPES[shape](grid, **params)
        m = f.values.mean()
        if m == 0:
            raise ValueError(f"shape {shape!r} produced an empty set")
        return ScalarField(grid, f.values / m)
    raise ValueError(f"unknown density shape {shape!r}")


def make_velocity(grid: TorusGrid, shape: str, seed: int = 0, **params) -> VectorField:
    if shape == "zero":
        return VectorField.zero(grid)
    if shape == "taylor-green":
        return taylor_green(grid, params.get("amplitude", 1.0))
    if shape == "shear":
        return shear_wave(grid, params.get("amplitude", 1.0))
    if shape == "random":
        rng = np.random.default_rng(seed)
        return random_velocity_with_divergence(
            grid,
            rng,
            div_l2_target=params.get("div_l2", 0.0),
            kmax=int(params.get("kmax", 8)),
            amplitude=params.get("amplitude", 1.0),
        )
    raise ValueError(f"unknown velocity shape {shape!r}")
