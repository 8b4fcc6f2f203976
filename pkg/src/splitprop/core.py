"""States, operator protocol, spectral shifting, and global phase restoration.

A wavefunction is stored as two real arrays (q = real part, p = imaginary
part) so every kernel downstream pays one *real* matrix-vector product per
operator application.  An operator is anything with a ``dim`` and an
``apply(v)`` taking and returning a real array; dense symmetric matrices are
adapted on the fly.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "WaveState",
    "MatrixOperator",
    "ShiftedOperator",
    "SpectralShift",
    "as_operator",
    "spectral_shift",
    "apply_shifted",
    "restore_phase",
    "save_state_csv",
    "load_state_csv",
    "save_state_binary",
    "load_state_binary",
]


@dataclass
class WaveState:
    """Discretized wavefunction, real part q and imaginary part p."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.q.shape != self.p.shape or self.q.ndim != 1 or self.q.size < 1:
            raise ValueError("q and p must be 1-d real arrays of identical length >= 1")

    @property
    def dim(self) -> int:
        return self.q.size

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.q, self.q) + np.dot(self.p, self.p)))

    def to_complex(self) -> np.ndarray:
        return self.q + 1j * self.p

    @classmethod
    def from_complex(cls, u) -> "WaveState":
        u = np.asarray(u, dtype=complex)
        return cls(u.real.copy(), u.imag.copy())

    def copy(self) -> "WaveState":
        return WaveState(self.q.copy(), self.p.copy())


class MatrixOperator:
    """Adapter giving a dense/sparse symmetric matrix the operator protocol."""

    def __init__(self, mat):
        self.mat = np.asarray(mat, dtype=float)
        if self.mat.ndim != 2 or self.mat.shape[0] != self.mat.shape[1]:
            raise ValueError("matrix operator must be square")
        self.dim = self.mat.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.mat @ v


def as_operator(H):
    """Normalize H (operator object, square ndarray, or callable+dim) to the protocol."""
    if hasattr(H, "apply") and hasattr(H, "dim"):
        return H
    if isinstance(H, np.ndarray):
        return MatrixOperator(H)
    raise TypeError("expected an operator with .apply/.dim or a square ndarray")


@dataclass(frozen=True)
class SpectralShift:
    """Spectrum center alpha and half-width beta of H; H_bar = H - alpha*I."""

    alpha: float
    beta: float


def spectral_shift(e_min: float, e_max: float) -> SpectralShift:
    """Center/half-width shift mapping spectrum [e_min, e_max] onto [-beta, beta]."""
    if not (e_max >= e_min):
        raise ValueError(f"invalid spectral bounds: e_max={e_max} < e_min={e_min}")
    return SpectralShift(alpha=(e_max + e_min) / 2.0, beta=(e_max - e_min) / 2.0)


class ShiftedOperator:
    """H_bar = H - alpha*I, with spectrum inside [-beta, beta]."""

    def __init__(self, H, shift: SpectralShift):
        self.base = as_operator(H)
        self.shift = shift
        self.dim = self.base.dim

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.base.apply(v) - self.shift.alpha * v


def apply_shifted(H, shift: SpectralShift, v: np.ndarray) -> np.ndarray:
    """One application of the shifted operator: Hv - alpha*v."""
    op = as_operator(H)
    v = np.asarray(v, dtype=float)
    if v.shape != (op.dim,):
        raise ValueError(f"dimension mismatch: operator dim {op.dim}, vector shape {v.shape}")
    return op.apply(v) - shift.alpha * v


def restore_phase(u: WaveState, alpha: float, t: float) -> WaveState:
    """Undo the spectral shift's global phase: multiply (q + ip) by e^{-i*alpha*t}."""
    c, s = np.cos(alpha * t), np.sin(alpha * t)
    return WaveState(c * u.q + s * u.p, -s * u.q + c * u.p)


# ---------------------------------------------------------------------------
# serialization

def save_state_csv(state: WaveState, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "q", "p"])
        for j in range(state.dim):
            w.writerow([j, repr(float(state.q[j])), repr(float(state.p[j]))])


def load_state_csv(path) -> WaveState:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if [h.strip() for h in header] != ["index", "q", "p"]:
            raise ValueError(f"bad CSV header: {header!r}")
        q, p = [], []
        for row in rd:
            if not row:
                continue
            q.append(float(row[1]))
            p.append(float(row[2]))
    return WaveState(np.array(q), np.array(p))


_MAGIC = b"WST1"


def save_state_binary(state: WaveState, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", state.dim))
        fh.write(state.q.astype("<f8").tobytes())
        fh.write(state.p.astype("<f8").tobytes())


def load_state_binary(path) -> WaveState:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(16 * n), dtype="<f8")
        if data.size != 2 * n:
            raise ValueError("truncated state file")
    return WaveState(data[:n].copy(), data[n:].copy())
