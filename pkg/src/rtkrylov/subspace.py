"""Real-time Krylov matrices and the truncated generalized eigensolver.

The basis vectors are ``|Phi_j> = exp(-i H t_j) |Phi_0>``. Because the state
is stored in the eigenbasis, every matrix element is a spectral sum over the
populations ``w_n = |z_n|^2``::

    S_jk = sum_n w_n exp(-i E_n (t_k - t_j))
    H_jk = sum_n w_n E_n exp(-i E_n (t_k - t_j))

On a uniform grid the entries only depend on ``k - j`` (Toeplitz), so only
``N_T + 1`` lags are summed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptySubspaceError,
    IndexOutOfRangeError,
    InvalidParameterError,
)
from .spectra import Spectrum
from .states import StateVector, _check_pair, phases

DEFAULT_SSV_REL = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    times: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise InvalidParameterError("time grid must be a nonempty vector")
        if t[0] != 0.0:
            raise InvalidParameterError(f"time grid must start at t_0 = 0, got {t[0]}")
        if not np.all(np.isfinite(t)):
            raise InvalidParameterError("time grid contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise InvalidParameterError("time grid must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @property
    def N_T(self) -> int:
        return int(self.times.size - 1)

    @property
    def steps(self) -> np.ndarray:
        """``Delta t_j = t_j - t_{j-1}`` for ``j = 1..N_T``."""
        return np.diff(self.times)

    @property
    def is_linear(self) -> bool:
        if self.N_T < 2:
            return True
        dt = self.steps
        return bool(np.all(np.abs(dt - dt[0]) <= 1e-12 * dt[0]))

    def prefix(self, j: int) -> "TimeGrid":
        """Grid ``t_0..t_j``."""
        if not 0 <= j <= self.N_T:
            raise IndexOutOfRangeError(f"prefix {j} outside 0..{self.N_T}")
        return TimeGrid(self.times[: j + 1])

    def __len__(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class SubspaceMatrices:
    H: np.ndarray
    S: np.ndarray
    grid: TimeGrid

    @property
    def dim(self) -> int:
        return int(self.S.shape[0])

    def leading(self, j: int) -> "SubspaceMatrices":
        """Matrices for the grid prefix ``t_0..t_j``."""
        return SubspaceMatrices(self.H[: j + 1, : j + 1], self.S[: j + 1, : j + 1], self.grid.prefix(j))

    def to_json(self, s_sv=None) -> str:
        def pairs(m):
            return [[float(v.real), float(v.imag)] for v in m.ravel()]

        doc = {
            "dim": self.dim,
            "grid": [float(t) for t in self.grid.times],
            "s_sv": s_sv,
            "H": pairs(self.H),
            "S": pairs(self.S),
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SubspaceMatrices":
        doc = json.loads(text)
        n = doc["dim"]

        def unpack(key):
            a = np.array(doc[key], dtype=float)
            return (a[:, 0] + 1j * a[:, 1]).reshape(n, n)

        return cls(unpack("H"), unpack("S"), TimeGrid(doc["grid"]))


def _toeplitz_hermitian(first_row: np.ndarray) -> np.ndarray:
    n = first_row.size
    lag = np.arange(n)[None, :] - np.arange(n)[:, None]
    m = first_row[np.abs(lag)]
    return np.where(lag >= 0, m, m.conj())


def _hermitize(m: np.ndarray) -> np.ndarray:
    upper = np.triu(m, 1)
    out = upper + upper.conj().T
    out[np.diag_indices_from(out)] = m.diagonal().real
    return out


def assemble(spec: Spectrum, state: StateVector, grid: TimeGrid) -> SubspaceMatrices:
    _check_pair(state, spec)
    w = np.abs(state.amplitudes) ** 2
    w = w / w.sum()
    E = spec.energies
    if grid.is_linear:
        ph = phases(E, grid.times)  # (N+1, Q): lag m uses t_m - t_0
        s_row = ph @ w
        h_row = ph @ (w * E)
        s_row[0] = 1.0
        h_row[0] = float(np.dot(w, E))
        return SubspaceMatrices(_toeplitz_hermitian(h_row), _toeplitz_hermitian(s_row), grid)
    ph = phases(E, grid.times)
    S = (ph.conj() * w) @ ph.T
    H = (ph.conj() * (w * E)) @ ph.T
    S = _hermitize(S)
    H = _hermitize(H)
    S[np.diag_indices_from(S)] = 1.0
    H[np.diag_indices_from(H)] = float(np.dot(w, E))
    return SubspaceMatrices(H, S, grid)


@dataclass(frozen=True)
class SolveResult:
    ritz_values: np.ndarray
    coefficient_vectors: np.ndarray  # columns, in the real-time basis
    retained_rank: int
    discarded_singular_values: np.ndarray
    singular_values: np.ndarray

    @property
    def ground(self) -> float:
        return float(self.ritz_values[0])


def _tie_break(values: np.ndarray, vectors: np.ndarray, tol: float) -> np.ndarray:
    """Order ascending; near-equal values ordered by their dominant coefficient index."""
    order = list(np.argsort(values, kind="stable"))
    dominant = np.argmax(np.abs(vectors), axis=0)
    out, i = [], 0
    while i < len(order):
        j = i + 1
        while j < len(order) and values[order[j]] - values[order[j - 1]] <= tol:
            j += 1
        out.extend(sorted(order[i:j], key=lambda k: (dominant[k], values[k])))
        i = j
    return np.array(out, dtype=int)


def solve(
    mats: SubspaceMatrices,
    s_sv: float = DEFAULT_SSV_REL,
    *,
    absolute: bool = False,
) -> SolveResult:
    """Solve ``H c = E S c`` on the well-conditioned part of ``S``.

    ``S`` is diagonalized and eigenpairs below the threshold are dropped; by
    default the threshold is ``s_sv * s_max``, with ``absolute=True`` it is
    ``s_sv`` itself. The kept directions define ``B = U s^{-1/2}`` with
    ``B^H S B = I``; the Hermitian problem ``B^H H B d = E d`` is solved and
    mapped back as ``c = B d``.
    """
    if not s_sv >= 0:
        raise InvalidParameterError(f"singular-value threshold must be >= 0, got {s_sv}")
    s, U = np.linalg.eigh(mats.S)
    s = np.clip(s, 0.0, None)
    s_max = float(s.max())
    threshold = s_sv if absolute else s_sv * s_max
    keep = s > 0.0 if s_sv == 0.0 else s >= threshold
    if not np.any(keep):
        raise EmptySubspaceError(f"all singular values fall below threshold {threshold:g}")
    B = U[:, keep] / np.sqrt(s[keep])
    Ht = B.conj().T @ mats.H @ B
    Ht = 0.5 * (Ht + Ht.conj().T)
    vals, d = np.linalg.eigh(Ht)
    C = B @ d
    scale = max(1.0, float(np.max(np.abs(vals))))
    order = _tie_break(vals, C, 1e-12 * scale)
    return SolveResult(
        ritz_values=vals[order],
        coefficient_vectors=C[:, order],
        retained_rank=int(keep.sum()),
        discarded_singular_values=np.sort(s[~keep])[::-1],
        singular_values=np.sort(s)[::-1],
    )


def ritz_state(
    result: SolveResult,
    which: int,
    spec: Spectrum,
    state: StateVector,
    grid: TimeGrid,
) -> StateVector:
    """Eigenbasis amplitudes of the Ritz vector ``sum_j c_j |Phi_j>``, normalized."""
    _check_pair(state, spec)
    if not 0 <= which < result.retained_rank:
        raise IndexOutOfRangeError(f"Ritz index {which} outside 0..{result.retained_rank - 1}")
    c = result.coefficient_vectors[:, which]
    if c.size != len(grid):
        raise DimensionMismatchError(f"{c.size} coefficients for a grid of {len(grid)} times")
    filt = c @ phases(spec.energies, grid.times)
    return StateVector(state.amplitudes * filt).normalized()


def residual_norms(mats: SubspaceMatrices, result: SolveResult) -> np.ndarray:
    """``||B^H (H c - E S c)||`` per Ritz pair, i.e. the residual inside the kept subspace."""
    s, U = np.linalg.eigh(mats.S)
    Uk = U[:, np.argsort(s)[::-1][: result.retained_rank]]
    C = result.coefficient_vectors
    R = mats.H @ C - (mats.S @ C) * result.ritz_values[None, :]
    return np.linalg.norm(Uk.conj().T @ R, axis=0)
