"""Concrete Hamiltonians: the tridiagonal model and 1-D Fourier collocation
with a Poschl-Teller well.

Both expose the operator protocol (``dim``, ``apply``) plus ``spectral_bounds``
so propagators can build the spectral shift without estimating eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TridiagonalLaplacian",
    "PoschlTellerPotential",
    "FourierCollocation1D",
    "tridiagonal_apply",
    "poschl_teller_value",
    "fourier_apply",
    "spectral_bounds",
    "fourier_grid",
    "gaussian_state",
]


class TridiagonalLaplacian:
    """N x N matrix with diagonal 1 and off-diagonals -1/2; spectrum in [0, 2]."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.dim = int(n)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return tridiagonal_apply(self.dim, v)

    def bounds(self):
        return (0.0, 2.0)

    def dense(self) -> np.ndarray:
        m = np.eye(self.dim)
        off = -0.5 * np.eye(self.dim, k=1)
        return m + off + off.T


def tridiagonal_apply(n: int, v: np.ndarray) -> np.ndarray:
    """w_j = (2 v_j - v_{j-1} - v_{j+1}) / 2 with out-of-range neighbors zero."""
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"length mismatch: expected {n}, got {v.shape}")
    w = v.copy()
    w[:-1] -= 0.5 * v[1:]
    w[1:] -= 0.5 * v[:-1]
    return w


@dataclass(frozen=True)
class PoschlTellerPotential:
    """V(x) = -(a^2/2mu) * lam*(lam-1) / cosh^2(a x): solvable anharmonic well."""

    a: float = 2.0
    lam: float = 24.5
    mass: float = 1745.0

    def __post_init__(self):
        if self.a <= 0 or self.lam <= 1 or self.mass <= 0:
            raise ValueError("need a > 0, lam > 1, mass > 0")


def poschl_teller_value(pot: PoschlTellerPotential, x) -> float:
    depth = (pot.a**2 / (2.0 * pot.mass)) * pot.lam * (pot.lam - 1.0)
    return -depth / np.cosh(pot.a * np.asarray(x, dtype=float)) ** 2


def fourier_grid(n_modes: int, domain_length: float) -> np.ndarray:
    """Uniform periodic grid x_j = -L/2 + j L/N, j = 0..N-1."""
    L = float(domain_length)
    return -L / 2.0 + np.arange(n_modes) * (L / n_modes)


@dataclass
class FourierCollocation1D:
    """Pseudospectral -d^2/(2 mu dx^2) + V on a periodic grid of N modes.

    Kinetic multipliers use wavenumbers 2*pi*j/L, j = -N/2..N/2-1, with the
    Nyquist mode assigned the positive multiplier (pi N/L)^2/(2 mu) so the
    upper spectral bound is tight.
    """

    n_modes: int
    domain_length: float
    mass: float
    potential_grid: np.ndarray
    _kinetic: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n, L = self.n_modes, float(self.domain_length)
        if n < 2 or n % 2:
            raise ValueError("n_modes must be a positive even integer")
        if L <= 0 or self.mass <= 0:
            raise ValueError("need domain_length > 0 and mass > 0")
        self.potential_grid = np.asarray(self.potential_grid, dtype=float)
        if self.potential_grid.shape != (n,):
            raise ValueError("potential_grid length must equal n_modes")
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)  # Nyquist lands at -pi*N/L
        self._kinetic = k * k / (2.0 * self.mass)  # squared, so Nyquist multiplier positive

    @property
    def dim(self) -> int:
        return self.n_modes

    def grid(self) -> np.ndarray:
        return fourier_grid(self.n_modes, self.domain_length)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return fourier_apply(self, v)

    def bounds(self):
        return spectral_bounds(self)

    @classmethod
    def poschl_teller(cls, n_modes: int, domain_length: float = 10.0,
                      pot: PoschlTellerPotential | None = None) -> "FourierCollocation1D":
        pot = pot or PoschlTellerPotential()
        x = fourier_grid(n_modes, domain_length)
        return cls(n_modes, domain_length, pot.mass, poschl_teller_value(pot, x))


def fourier_apply(op: FourierCollocation1D, v: np.ndarray) -> np.ndarray:
    """(T + V) v: one forward and one inverse DFT plus a pointwise multiply."""
    v = np.asarray(v)
    if v.shape != (op.n_modes,):
        raise ValueError(f"length mismatch: expected {op.n_modes}, got {v.shape}")
    if np.iscomplexobj(v):
        kin = np.fft.ifft(op._kinetic * np.fft.fft(v))
    else:
        kin = np.fft.irfft(op._kinetic[: op.n_modes // 2 + 1] * np.fft.rfft(v), n=op.n_modes)
    return kin + op.potential_grid * v


def spectral_bounds(op) -> tuple[float, float]:
    """(e_min, e_max) with e_min = min V and e_max = (pi N/L)^2/(2 mu) + max V."""
    if isinstance(op, FourierCollocation1D):
        kin_max = (np.pi * op.n_modes / op.domain_length) ** 2 / (2.0 * op.mass)
        return (float(op.potential_grid.min()), float(kin_max + op.potential_grid.max()))
    if hasattr(op, "bounds"):
        lo, hi = op.bounds()
        return (float(lo), float(hi))
    raise TypeError(f"no spectral bounds available for {type(op).__name__}")


def gaussian_state(op_or_grid, width_factor: float = 3.0):
    """Initial Gaussian sigma * exp(-(width_factor*x)^2), normalized to unit 2-norm."""
    from .core import WaveState

    x = op_or_grid.grid() if hasattr(op_or_grid, "grid") else np.asarray(op_or_grid, dtype=float)
    q = np.exp(-((width_factor * x) ** 2))
    q /= np.linalg.norm(q)
    return WaveState(q, np.zeros_like(q))
