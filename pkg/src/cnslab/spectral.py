"""Spectral substrate: torus grid, transforms, calculus, projections, norms.

Everything lives on the unit torus [0,1)^2 sampled on a uniform n x n grid.
Transform convention: the forward transform divides by n^2, so the (0,0)
coefficient is the field mean and Parseval reads ||f||_2^2 = sum |c_k|^2.
Mode k corresponds to the angular frequency 2*pi*k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MEAN_ZERO_TOL = 1e-10


class FieldError(ValueError):
    """Raised for invalid field data (non-finite samples, grid mismatch...)."""


@dataclass(frozen=True)
class TorusGrid:
    """Uniform n x n grid on [0,1)^2 with wavenumber bookkeeping."""

    n: int

    def __post_init__(self):
        if self.n < 8 or self.n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def meshgrid(self):
        x = self.x
        return np.meshgrid(x, x, indexing="ij")

    @property
    def k(self) -> np.ndarray:
        """Integer wavenumbers along one axis, FFT layout."""
        return np.fft.fftfreq(self.n, d=self.h).astype(np.int64)

    @property
    def kx(self) -> np.ndarray:
        return self.k[:, None] * np.ones(self.n, dtype=np.int64)[None, :]

    @property
    def ky(self) -> np.ndarray:
        return np.ones(self.n, dtype=np.int64)[:, None] * self.k[None, :]

    @property
    def kd(self) -> np.ndarray:
        """Wavenumbers for odd-derivative multipliers, Nyquist zeroed.

        The -n/2 frequency has no +n/2 partner in FFT layout, so any odd
        multiplier (i*k) applied there breaks Hermitian symmetry of real
        data; zeroing it is the standard convention.
        """
        k = self.k.copy()
        k[self.n // 2] = 0
        return k

    @property
    def kdx(self) -> np.ndarray:
        return self.kd[:, None] * np.ones(self.n, dtype=np.int64)[None, :]

    @property
    def kdy(self) -> np.ndarray:
        return np.ones(self.n, dtype=np.int64)[:, None] * self.kd[None, :]

    @property
    def k2(self) -> np.ndarray:
        """|k|^2 per mode (integer)."""
        k = self.k
        return (k**2)[:, None] + (k**2)[None, :]

    @property
    def dealias_cutoff(self) -> int:
        """Largest retained |k_i| under the 2/3 rule."""
        return self.n // 3

    @property
    def dealias_mask(self) -> np.ndarray:
        k = np.abs(self.k)
        keep = k <= self.dealias_cutoff
        return keep[:, None] & keep[None, :]


@dataclass
class ScalarField:
    grid: TorusGrid
    values: np.ndarray
    spectral_cache: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise FieldError(
                f"values shape {self.values.shape} does not match grid {self.grid.n}"
            )
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise FieldError(f"non-finite sample at index {tuple(bad)}")

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "ScalarField":
        xx, yy = grid.meshgrid()
        return cls(grid, fn(xx, yy))

    @classmethod
    def constant(cls, grid: TorusGrid, c: float) -> "ScalarField":
        return cls(grid, np.full((grid.n, grid.n), float(c)))

    def spectral(self) -> np.ndarray:
        if self.spectral_cache is None:
            self.spectral_cache = to_spectral(self)
        return self.spectral_cache

    def mean(self) -> float:
        return float(self.values.mean())

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * _vals(other))

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, ScalarField) else x


@dataclass
class VectorField:
    x: ScalarField
    y: ScalarField

    def __post_init__(self):
        if self.x.grid is not self.y.grid and self.x.grid != self.y.grid:
            raise FieldError("vector components must share one grid")

    @property
    def grid(self) -> TorusGrid:
        return self.x.grid

    @classmethod
    def from_arrays(cls, grid: TorusGrid, vx, vy) -> "VectorField":
        return cls(ScalarField(grid, vx), ScalarField(grid, vy))

    @classmethod
    def zero(cls, grid: TorusGrid) -> "VectorField":
        return cls(ScalarField.constant(grid, 0.0), ScalarField.constant(grid, 0.0))

    def __add__(self, other):
        return VectorField(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return VectorField(self.x - other.x, self.y - other.y)

    def scaled(self, s: float) -> "VectorField":
        return VectorField(s * self.x, s * self.y)


def to_spectral(f: ScalarField) -> np.ndarray:
    """Forward transform, zero mode = mean."""
    return np.fft.fft2(f.values) / f.grid.n**2


def to_physical(grid: TorusGrid, c: np.ndarray) -> ScalarField:
    vals = np.fft.ifft2(c * grid.n**2).real
    return ScalarField(grid, vals)


def dealias(f: ScalarField) -> ScalarField:
    c = f.spectral() * f.grid.dealias_mask
    return to_physical(f.grid, c)


def dealias_vec(v: VectorField) -> VectorField:
    return VectorField(dealias(v.x), dealias(v.y))


def gradient(f: ScalarField) -> VectorField:
    g = f.grid
    c = f.spectral()
    fac = 2j * np.pi
    dx = to_physical(g, fac * g.kdx * c)
    dy = to_physical(g, fac * g.kdy * c)
    return VectorField(dx, dy)


def divergence(v: VectorField) -> ScalarField:
    g = v.grid
    fac = 2j * np.pi
    c = fac * g.kdx * v.x.spectral() + fac * g.kdy * v.y.spectral()
    return to_physical(g, c)


def curl2d(v: VectorField) -> ScalarField:
    g = v.grid
    fac = 2j * np.pi
    c = fac * g.kdx * v.y.spectral() - fac * g.kdy * v.x.spectral()
    return to_physical(g, c)


def laplacian(f: ScalarField) -> ScalarField:
    g = f.grid
    c = -4 * np.pi**2 * g.k2 * f.spectral()
    return to_physical(g, c)


def inverse_laplacian(f: ScalarField) -> ScalarField:
    """Solve -Lap(g) = f for the mean-zero g; f must be mean-zero."""
    m = f.mean()
    if abs(m) > MEAN_ZERO_TOL:
        raise FieldError(f"inverse_laplacian needs a mean-zero source, mean={m:g}")
    g = f.grid
    k2 = g.k2.astype(np.float64)
    k2[0, 0] = 1.0
    c = f.spectral() / (4 * np.pi**2 * k2)
    c[0, 0] = 0.0
    return to_physical(g, c)


def leray_project(v: VectorField) -> tuple[VectorField, VectorField]:
    """Split v = Pv + Qv with div Pv = 0, curl Qv = 0.

    The constant Fourier mode goes to Pv.
    """
    g = v.grid
    cx, cy = v.x.spectral(), v.y.spectral()
    kdx, kdy = g.kdx, g.kdy
    # denominator must match the derivative wavenumbers or P is no projection
    k2 = (kdx**2 + kdy**2).astype(np.float64)
    k2[k2 == 0.0] = 1.0
    kdot = (kdx * cx + kdy * cy) / k2
    qx = kdx * kdot
    qy = kdy * kdot
    Q = VectorField(to_physical(g, qx), to_physical(g, qy))
    P = VectorField(to_physical(g, cx - qx), to_physical(g, cy - qy))
    return P, Q


def spectral_truncate(b: ScalarField, n: int) -> ScalarField:
    """Sum of modes with 1 <= |k| <= n; the zero mode is excluded."""
    if n < 1:
        raise ValueError("truncation order must be >= 1")
    g = b.grid
    k2 = g.k2
    keep = (k2 >= 1) & (k2 <= n * n)
    return to_physical(g, b.spectral() * keep)


def norm(f: ScalarField, spec: str) -> float:
    """Norm of a scalar field.

    spec: 'L1', 'L2', 'Lp' via 'L<p>', 'Linf', 'Hdot1', 'Hdot-1', 'H1'.
    Lp norms are equal-weight quadrature over grid samples; Linf is the
    grid max; Hdot norms use the multiplier (2*pi*|k|)^s.
    """
    v = f.values
    if spec == "Linf":
        return float(np.abs(v).max())
    if spec.startswith("L"):
        p = float(spec[1:])
        if p < 1:
            raise ValueError(f"L_p norm needs p >= 1, got {p}")
        return float((np.mean(np.abs(v) ** p)) ** (1.0 / p))
    if spec in ("Hdot1", "Hdot-1"):
        s = 1.0 if spec == "Hdot1" else -1.0
        c = f.spectral()
        if s < 0 and abs(c[0, 0].real) > MEAN_ZERO_TOL:
            raise FieldError("Hdot-1 norm needs a mean-zero field")
        k2 = f.grid.k2.astype(np.float64)
        k2[0, 0] = 1.0
        mult = (4 * np.pi**2 * k2) ** s
        mult[0, 0] = 0.0  # the constant mode has no homogeneous content
        return float(np.sqrt(np.sum(np.abs(c) ** 2 * mult)))
    if spec == "H1":
        return float(np.hypot(norm(f, "L2"), norm(f, "Hdot1")))
    raise ValueError(f"unknown norm spec {spec!r}")


def norm_vec(v: VectorField, spec: str) -> float:
    if spec == "Linf":
        mag = np.hypot(v.x.values, v.y.values)
        return float(mag.max())
    a, b = norm(v.x, spec), norm(v.y, spec)
    if spec.startswith("L") and spec != "L2":
        p = float(spec[1:])
        mag = np.hypot(v.x.values, v.y.values)
        return float((np.mean(mag**p)) ** (1.0 / p))
    return float(np.hypot(a, b))


def grad_norm_l2(v: VectorField) -> float:
    """||grad v||_2 over both components."""
    gx = gradient(v.x)
    gy = gradient(v.y)
    return float(
        np.sqrt(
            norm(gx.x, "L2") ** 2
            + norm(gx.y, "L2") ** 2
            + norm(gy.x, "L2") ** 2
            + norm(gy.y, "L2") ** 2
        )
    )


def integral(f: ScalarField) -> float:
    """Equal-weight quadrature of f over the torus."""
    return float(f.values.mean())


def inner_l2(f: ScalarField, g: ScalarField) -> float:
    return float(np.mean(f.values * g.values))


def inner_l2_vec(u: VectorField, v: VectorField) -> float:
    return inner_l2(u.x, v.x) + inner_l2(u.y, v.y)
