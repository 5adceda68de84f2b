"""States as amplitude vectors in the Hamiltonian eigenbasis."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    InvalidParameterError,
    ZeroNormError,
)
from .rng import make_rng
from .spectra import Spectrum

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class StateVector:
    """Complex amplitudes ``z_n = <n|state>``.

    The constructor does not normalize; use the module-level constructors or
    :meth:`normalized` to get a unit vector.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        z = np.array(self.amplitudes, dtype=complex)
        if z.ndim != 1 or z.size < 1:
            raise InvalidParameterError(f"amplitudes must be a nonempty vector, got shape {z.shape}")
        if not np.all(np.isfinite(z)):
            raise InvalidParameterError("amplitudes contain non-finite values")
        z.setflags(write=False)
        object.__setattr__(self, "amplitudes", z)

    @property
    def Q(self) -> int:
        return int(self.amplitudes.size)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0.0:
            raise ZeroNormError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / n)

    def __len__(self) -> int:
        return self.Q


def _check_pair(state: StateVector, spec: Spectrum) -> None:
    if state.Q != spec.Q:
        raise DimensionMismatchError(f"state has {state.Q} amplitudes but spectrum has {spec.Q} levels")


def uniform_state(Q: int) -> StateVector:
    if Q < 1:
        raise InvalidParameterError(f"Q must be positive, got {Q}")
    return StateVector(np.full(Q, 1.0 / math.sqrt(Q)))


def basis_state(Q: int, n: int) -> StateVector:
    """Eigenstate ``|n>`` with 1-based ``n``."""
    if Q < 1:
        raise InvalidParameterError(f"Q must be positive, got {Q}")
    if not 1 <= n <= Q:
        raise IndexOutOfRangeError(f"basis index {n} outside 1..{Q}")
    z = np.zeros(Q)
    z[n - 1] = 1.0
    return StateVector(z)


def concentrated_state(Q: int, weights: Mapping[int, float]) -> StateVector:
    """Real state with populations proportional to ``weights`` (1-based keys)."""
    if not weights:
        raise InvalidParameterError("weights must be nonempty")
    w = np.zeros(Q)
    for n, value in weights.items():
        if not 1 <= n <= Q:
            raise IndexOutOfRangeError(f"weight index {n} outside 1..{Q}")
        if value < 0:
            raise InvalidParameterError(f"weights must be nonnegative, got {value} at {n}")
        w[n - 1] = value
    total = w.sum()
    if total <= 0:
        raise InvalidParameterError("at least one weight must be positive")
    return StateVector(np.sqrt(w / total))


def random_state(Q: int, seed: int) -> StateVector:
    """Normalized vector of i.i.d. U[0, 1] draws."""
    if Q < 1:
        raise InvalidParameterError(f"Q must be positive, got {Q}")
    phi = make_rng(seed).uniform(0.0, 1.0, size=Q)
    if not np.any(phi):
        raise ZeroNormError("random draw was identically zero")
    return StateVector(phi / np.linalg.norm(phi))


def phases(energies: np.ndarray, t) -> np.ndarray:
    """``exp(-i E t)`` with ``E t`` reduced modulo 2 pi first.

    Broadcasts: with ``t`` an array of shape (m,), the result is (m, Q).
    """
    arg = np.multiply.outer(np.asarray(t, dtype=float), energies)
    return np.exp(-1j * np.remainder(arg, TWO_PI))


def evolve(state: StateVector, spec: Spectrum, t: float) -> StateVector:
    _check_pair(state, spec)
    if not math.isfinite(t):
        raise InvalidParameterError(f"evolution time must be finite, got {t}")
    return StateVector(state.amplitudes * phases(spec.energies, t))


def population(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def rayleigh_quotient(state: StateVector, spec: Spectrum) -> float:
    _check_pair(state, spec)
    w = population(state)
    total = w.sum()
    if total == 0.0:
        raise ZeroNormError("Rayleigh quotient of the zero vector")
    return float(np.dot(w, spec.energies) / total)


def is_uniform(state: StateVector, rtol: float = 1e-12) -> bool:
    p = population(state)
    return bool(np.all(np.abs(p - p.mean()) <= rtol * p.mean()))


def read_state(path: str | Path) -> StateVector:
    """Read ``re im`` amplitude pairs, one per line, ``#`` comments allowed."""
    rows = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if len(parts) == 1:
                rows.append(complex(float(parts[0]), 0.0))
            elif len(parts) == 2:
                rows.append(complex(float(parts[0]), float(parts[1])))
            else:
                raise ValueError
        except ValueError:
            raise InvalidParameterError(f"{path}:{lineno}: expected 're im', got {line!r}") from None
    state = StateVector(np.array(rows))
    if abs(state.norm - 1.0) > 1e-6:
        log.warning("state in %s has norm %.9g; normalizing", path, state.norm)
    return state.normalized()


def format_state(state: StateVector) -> str:
    return "".join(f"{z.real:.17g} {z.imag:.17g}\n" for z in state.amplitudes)


def write_state(state: StateVector, path: str | Path) -> None:
    Path(path).write_text(format_state(state), encoding="utf-8")
