"""Periodic grid, Fourier transform conventions and multiplier operators.

Everything else in the package is built on the uniform periodic grid defined
here.  The domain is the torus [0, 2*pi*L) sampled at N points, so the
admissible wavenumbers are xi_k = k/L for integer k in [-N/2, N/2).

Transform normalization: the forward transform divides by N, i.e. the stored
coefficients are mode amplitudes,

    f(x_j) = sum_k c_k exp(i xi_k x_j),   c_k = (1/N) sum_j f(x_j) exp(-i xi_k x_j).

With this convention a field cos(x) on an L=1 grid has coefficients 1/2 at
xi = +-1 and the Parseval identity reads

    dx * sum_j |f(x_j)|^2 = 2*pi*L * sum_k |c_k|^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "MultiplierSymbol",
    "make_grid",
    "apply_multiplier",
    "ddx",
    "lambda_inv_dx",
    "dealias",
    "lp_norm",
    "dx_symbol",
    "lambda_inv_dx_symbol",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [0, 2*pi*L) with N samples.

    Attributes:
        N: number of samples, even, >= 8.
        L: torus circumference scale; domain length is 2*pi*L.
    """

    N: int
    L: float

    @property
    def dx(self) -> float:
        return 2.0 * np.pi * self.L / self.N

    @property
    def x(self) -> np.ndarray:
        """Sample locations x_j = j*dx."""
        return np.arange(self.N) * self.dx

    @property
    def k(self) -> np.ndarray:
        """Integer mode indices in FFT order: 0,...,N/2-1, -N/2,...,-1."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Physical wavenumbers xi_k = k/L in FFT order."""
        return self.k / self.L

    @property
    def xi_max(self) -> float:
        return (self.N // 2) / self.L


def make_grid(N: int, L: float) -> Grid:
    """Build a periodic grid, rejecting odd or tiny N and non-positive L."""
    if N % 2 != 0:
        raise ValueError(f"N must be even, got {N}")
    if N < 8:
        raise ValueError(f"N must be at least 8, got {N}")
    if L <= 0:
        raise ValueError(f"L must be positive, got {L}")
    return Grid(N=int(N), L=float(L))


def _hermitian_project(coefficients: np.ndarray) -> np.ndarray:
    """Project a coefficient array onto the conjugate-symmetric subspace.

    Pairs mode k with mode -k; the self-paired modes (k = 0 and Nyquist)
    keep only their real part, which zeroes the Nyquist output of any odd
    imaginary symbol such as i*xi.
    """
    n = coefficients.shape[-1]
    rev = (-np.arange(n)) % n
    return 0.5 * (coefficients + np.conj(coefficients[..., rev]))


@dataclass(frozen=True)
class GridFunction:
    """A real periodic field with consistent physical and spectral data.

    Immutable: samples and coefficients are frozen numpy arrays kept in sync,
    with coefficients in FFT order under the amplitude normalization.
    """

    grid: Grid
    samples: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.samples.setflags(write=False)
        self.coefficients.setflags(write=False)

    @classmethod
    def from_samples(cls, grid: Grid, samples: np.ndarray) -> "GridFunction":
        samples = np.asarray(samples, dtype=float)
        if samples.shape != (grid.N,):
            raise ValueError(
                f"samples shape {samples.shape} does not match grid N={grid.N}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or Inf")
        coeffs = np.fft.fft(samples) / grid.N
        return cls(grid=grid, samples=samples.copy(), coefficients=coeffs)

    @classmethod
    def from_coefficients(cls, grid: Grid, coefficients: np.ndarray) -> "GridFunction":
        coefficients = np.asarray(coefficients, dtype=complex)
        if coefficients.shape != (grid.N,):
            raise ValueError(
                f"coefficient shape {coefficients.shape} does not match grid N={grid.N}"
            )
        coeffs = _hermitian_project(coefficients)
        samples = np.fft.ifft(coeffs * grid.N).real
        return cls(grid=grid, samples=samples, coefficients=coeffs)

    def mean(self) -> float:
        return float(self.coefficients[0].real)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _require_same_grid(self.grid, other.grid)
        return GridFunction.from_samples(self.grid, self.samples + other.samples)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _require_same_grid(self.grid, other.grid)
        return GridFunction.from_samples(self.grid, self.samples - other.samples)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            _require_same_grid(self.grid, other.grid)
            return GridFunction.from_samples(self.grid, self.samples * other.samples)
        return GridFunction.from_samples(self.grid, self.samples * float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction.from_samples(self.grid, -self.samples)


def _require_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


@dataclass(frozen=True)
class MultiplierSymbol:
    """A Fourier multiplier xi -> m(xi), applied mode-by-mode in spectral space."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]

    def evaluate(self, grid: Grid) -> np.ndarray:
        values = np.asarray(self.func(grid.wavenumbers), dtype=complex)
        values = np.broadcast_to(values, (grid.N,)).copy()
        if not np.all(np.isfinite(values)):
            raise ValueError(f"symbol {self.name!r} is not finite on the grid")
        return values

    def __mul__(self, other: "MultiplierSymbol") -> "MultiplierSymbol":
        f, g = self.func, other.func
        return MultiplierSymbol(
            name=f"({self.name})*({other.name})",
            func=lambda xi: np.asarray(f(xi), dtype=complex)
            * np.asarray(g(xi), dtype=complex),
        )


def dx_symbol() -> MultiplierSymbol:
    """Symbol of d/dx: m(xi) = i*xi."""
    return MultiplierSymbol(name="d/dx", func=lambda xi: 1j * xi)


def lambda_inv_dx_symbol() -> MultiplierSymbol:
    """Symbol of (1 - d^2/dx^2)^{-1} d/dx: m(xi) = i*xi / (1 + xi^2)."""
    return MultiplierSymbol(name="Lambda^-1 d/dx", func=lambda xi: 1j * xi / (1.0 + xi**2))


def apply_multiplier(f: GridFunction, m: MultiplierSymbol) -> GridFunction:
    """Multiply the spectral coefficients of f by m(xi).

    The multiplier must have Hermitian symmetry on the grid (m(-xi) equal to
    conj(m(xi))) so that real fields map to real fields; the output is
    re-symmetrized, which in particular zeroes the unpaired Nyquist mode for
    odd imaginary symbols.
    """
    values = m.evaluate(f.grid)
    rev = (-np.arange(f.grid.N)) % f.grid.N
    paired = rev != np.arange(f.grid.N)  # exclude k = 0 and the Nyquist mode
    if not np.allclose(values[paired], np.conj(values[rev][paired]),
                       rtol=1e-12, atol=1e-12):
        raise ValueError(f"symbol {m.name!r} lacks Hermitian symmetry on the grid")
    return GridFunction.from_coefficients(f.grid, values * f.coefficients)


def ddx(f: GridFunction) -> GridFunction:
    """Spectral derivative d/dx."""
    return apply_multiplier(f, dx_symbol())


def lambda_inv_dx(f: GridFunction) -> GridFunction:
    """The nonlocal operator (1 - d^2/dx^2)^{-1} d/dx.

    This is the right-hand-side operator of the two-component
    Fornberg-Whitham system; it annihilates constants.
    """
    return apply_multiplier(f, lambda_inv_dx_symbol())


def dealias_mask(grid: Grid) -> np.ndarray:
    """Boolean 2/3-rule mask: True on modes with |k| <= N/3."""
    return np.abs(grid.k) <= grid.N / 3.0


def dealias(f: GridFunction) -> GridFunction:
    """Zero the coefficients with |k| > N/3 (2/3-rule truncation)."""
    mask = dealias_mask(f.grid)
    return GridFunction.from_coefficients(f.grid, np.where(mask, f.coefficients, 0.0))


def lp_norm(f: GridFunction, p: float) -> float:
    """Discrete L^p norm: (dx * sum |f_j|^p)^(1/p), or max |f_j| for p = inf."""
    return lp_norm_samples(f.samples, f.grid.dx, p)


def lp_norm_samples(samples: np.ndarray, dx: float, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be in [1, inf], got {p}")
    a = np.abs(samples)
    if np.isinf(p):
        return float(a.max(axis=-1)) if a.ndim == 1 else a.max(axis=-1)
    out = (dx * np.sum(a**p, axis=-1)) ** (1.0 / p)
    return float(out) if np.ndim(out) == 0 else out
