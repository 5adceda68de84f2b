"""Ground-state drivers: vanilla and iterative real-time subspace runs, scans, LCU probabilities."""

from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .analytic import suppression_energy
from .errors import InvalidParameterError, ZeroNormError
from .spectra import Spectrum
from .states import StateVector, _check_pair, phases, population, rayleigh_quotient
from .subspace import DEFAULT_SSV_REL, TimeGrid, assemble, ritz_state, solve


class GridKind(str, enum.Enum):
    LINEAR = "linear"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class GridSpec:
    """``t_j = t1 * (1 + gamma + ... + gamma^(j-1))``; the linear grid is ``gamma = 1``."""

    kind: GridKind
    t1: float
    N_T: int
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", GridKind(self.kind))
        if not (math.isfinite(self.t1) and self.t1 > 0):
            raise InvalidParameterError(f"t1 must be positive and finite, got {self.t1}")
        if int(self.N_T) != self.N_T or self.N_T < 1:
            raise InvalidParameterError(f"N_T must be a positive integer, got {self.N_T}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidParameterError(f"gamma must be positive, got {self.gamma}")
        if self.kind is GridKind.LINEAR and self.gamma != 1.0:
            raise InvalidParameterError("a linear grid has gamma = 1")

    @classmethod
    def linear(cls, t1: float, N_T: int) -> "GridSpec":
        return cls(GridKind.LINEAR, t1, N_T)

    @classmethod
    def adaptive(cls, t1: float, N_T: int, gamma: float) -> "GridSpec":
        return cls(GridKind.ADAPTIVE, t1, N_T, gamma)


def make_grid(spec: GridSpec) -> TimeGrid:
    j = np.arange(spec.N_T + 1)
    if spec.kind is GridKind.LINEAR or spec.gamma == 1.0:
        return TimeGrid(spec.t1 * j)
    steps = spec.t1 * spec.gamma ** np.arange(spec.N_T)
    return TimeGrid(np.concatenate([[0.0], np.cumsum(steps)]))


def kappa_to_t1(kappa: float, spec: Spectrum) -> float:
    """``t1 * dE = kappa * 2 pi / Q`` with ``dE`` the mean level spacing."""
    if not kappa > 0:
        raise InvalidParameterError(f"kappa must be positive, got {kappa}")
    return kappa * 2.0 * math.pi / (spec.Q * spec.mean_spacing)


def t1_to_kappa(t1: float, spec: Spectrum) -> float:
    return t1 * spec.Q * spec.mean_spacing / (2.0 * math.pi)


# --------------------------------------------------------------------------
# traces


class RunStatus(str, enum.Enum):
    CONVERGED = "converged"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class StepRecord:
    j: int
    t_j: float
    E_g: float
    delta_E1: float
    retained_rank: int
    wall_time: float


@dataclass(frozen=True)
class RunTrace:
    """Per-step records starting at ``j = 0`` (the Rayleigh quotient of the input state)."""

    steps: tuple[StepRecord, ...]
    status: RunStatus
    final_state: StateVector

    @property
    def final(self) -> StepRecord:
        return self.steps[-1]

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.E_g for s in self.steps])

    @property
    def errors(self) -> np.ndarray:
        return np.array([s.delta_E1 for s in self.steps])

    def error_at(self, j: int) -> float:
        """``delta_E1`` at step ``j``; a converged run holds its last value."""
        k = min(j, len(self.steps) - 1)
        return self.steps[k].delta_E1


def _resolve_grid(grid: GridSpec | TimeGrid) -> TimeGrid:
    return make_grid(grid) if isinstance(grid, GridSpec) else grid


def _converged(prev: float, cur: float, eps_tol: float, relative: bool) -> bool:
    eps = abs(cur - prev)
    if relative:
        eps /= max(abs(cur), np.finfo(float).tiny)
    return eps <= eps_tol


def _check_tol(eps_tol: float) -> None:
    if not eps_tol >= 0:
        raise InvalidParameterError(f"eps_tol must be >= 0, got {eps_tol}")


def vqpe_run(
    spec: Spectrum,
    state: StateVector,
    grid: GridSpec | TimeGrid,
    eps_tol: float = 1e-12,
    s_sv_rel: float = DEFAULT_SSV_REL,
    *,
    relative: bool = False,
) -> RunTrace:
    """Grow the real-time basis one evolved state at a time until the estimate stalls.

    Step ``j`` solves the ``(j+1)``-dimensional problem on ``t_0..t_j``. The run
    stops at the first ``j`` with ``|E_g(j) - E_g(j-1)| <= eps_tol`` (relative
    to ``|E_g(j)|`` with ``relative=True``) or when the grid runs out.
    """
    _check_pair(state, spec)
    _check_tol(eps_tol)
    tg = _resolve_grid(grid)
    mats = assemble(spec, state, tg)
    E1 = spec.ground
    t0 = time.perf_counter()
    E_g = rayleigh_quotient(state, spec)
    records = [StepRecord(0, 0.0, E_g, E_g - E1, 1, time.perf_counter() - t0)]
    status = RunStatus.EXHAUSTED
    result = None
    for j in range(1, tg.N_T + 1):
        t0 = time.perf_counter()
        result = solve(mats.leading(j), s_sv_rel)
        new = result.ground
        records.append(StepRecord(j, float(tg.times[j]), new, new - E1, result.retained_rank, time.perf_counter() - t0))
        done = _converged(E_g, new, eps_tol, relative)
        E_g = new
        if done:
            status = RunStatus.CONVERGED
            break
    if result is None:
        final = state.normalized()
    else:
        final = ritz_state(result, 0, spec, state, tg.prefix(records[-1].j))
    return RunTrace(tuple(records), status, final)


def ivqpe_run(
    spec: Spectrum,
    state: StateVector,
    grid: GridSpec | TimeGrid,
    N_I: int = 1,
    eps_tol: float = 1e-12,
    s_sv_rel: float = DEFAULT_SSV_REL,
    *,
    relative: bool = False,
) -> RunTrace:
    """Iterative variant: after each step the reference is replaced by the lowest Ritz state.

    Step ``j`` spans ``{U(k dt_j / N_I) psi : k = 0..N_I}`` with ``psi`` the
    reference from step ``j-1``; the step interval is split uniformly.
    """
    _check_pair(state, spec)
    _check_tol(eps_tol)
    if int(N_I) != N_I or N_I < 1:
        raise InvalidParameterError(f"N_I must be a positive integer, got {N_I}")
    tg = _resolve_grid(grid)
    E1 = spec.ground
    t0 = time.perf_counter()
    ref = state.normalized()
    E_g = rayleigh_quotient(ref, spec)
    records = [StepRecord(0, 0.0, E_g, E_g - E1, 1, time.perf_counter() - t0)]
    status = RunStatus.EXHAUSTED
    fractions = np.arange(N_I + 1) / N_I
    for j, dt in enumerate(tg.steps, start=1):
        t0 = time.perf_counter()
        local = TimeGrid(dt * fractions)
        result = solve(assemble(spec, ref, local), s_sv_rel)
        ref = ritz_state(result, 0, spec, ref, local)
        new = result.ground
        records.append(StepRecord(j, float(tg.times[j]), new, new - E1, result.retained_rank, time.perf_counter() - t0))
        done = _converged(E_g, new, eps_tol, relative)
        E_g = new
        if done:
            status = RunStatus.CONVERGED
            break
    return RunTrace(tuple(records), status, ref)


def halving_grid(spec: Spectrum) -> GridSpec:
    """Steps ``pi/dE, pi/(2 dE), ...``, one per binary digit of ``Q``.

    Each step removes every other remaining level of a linear spectrum, so
    ``log2 Q`` iterative steps isolate the ground state when ``Q`` is a power of two.
    """
    N = max(1, math.ceil(math.log2(spec.Q)))
    return GridSpec.adaptive(math.pi / spec.mean_spacing, N, 0.5)


# --------------------------------------------------------------------------
# parameter scans


class RunMode(str, enum.Enum):
    VQPE = "vqpe"
    IVQPE = "ivqpe"


def _grid_for(spec: Spectrum, kappa: float, gamma: float, N_T: int) -> GridSpec:
    t1 = kappa_to_t1(kappa, spec)
    if gamma == 1.0:
        return GridSpec.linear(t1, N_T)
    return GridSpec.adaptive(t1, N_T, gamma)


def final_error(
    spec: Spectrum,
    state: StateVector,
    kappa: float,
    gamma: float,
    N_T: int,
    mode: RunMode | str = RunMode.VQPE,
    N_I: int = 1,
    s_sv_rel: float = DEFAULT_SSV_REL,
) -> float:
    """``delta_E1`` after all ``N_T`` steps (no early stopping)."""
    g = _grid_for(spec, kappa, gamma, N_T)
    if RunMode(mode) is RunMode.VQPE:
        trace = vqpe_run(spec, state, g, 0.0, s_sv_rel)
    else:
        trace = ivqpe_run(spec, state, g, N_I, 0.0, s_sv_rel)
    return trace.final.delta_E1


@dataclass(frozen=True)
class ScanResult:
    kappas: np.ndarray
    gammas: np.ndarray
    errors: np.ndarray  # shape (len(kappas), len(gammas))
    mode: RunMode

    @property
    def argmin(self) -> tuple[int, int]:
        i, j = np.unravel_index(int(np.argmin(self.errors)), self.errors.shape)
        return int(i), int(j)

    @property
    def minimum(self) -> float:
        return float(self.errors.min())

    @property
    def best(self) -> tuple[float, float]:
        i, j = self.argmin
        return float(self.kappas[i]), float(self.gammas[j])


def scan(
    spec: Spectrum,
    state: StateVector,
    kappas,
    gammas,
    N_T: int,
    mode: RunMode | str = RunMode.VQPE,
    *,
    N_I: int = 1,
    s_sv_rel: float = DEFAULT_SSV_REL,
    threads: int = 1,
) -> ScanResult:
    kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    if kappas.size == 0 or gammas.size == 0:
        raise InvalidParameterError("scan ranges must be nonempty")
    mode = RunMode(mode)
    cells = [(k, g) for k in kappas for g in gammas]

    def run(cell):
        return final_error(spec, state, cell[0], cell[1], N_T, mode, N_I, s_sv_rel)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(run, cells))
    else:
        values = [run(c) for c in cells]
    return ScanResult(kappas, gammas, np.array(values).reshape(kappas.size, gammas.size), mode)


def optimal_kappa(
    spec: Spectrum,
    state: StateVector,
    N_T: int,
    mode: RunMode | str = RunMode.VQPE,
    gamma: float = 1.0,
    *,
    kappa_max: float = 1.5,
    coarse: int = 64,
    N_I: int = 1,
    s_sv_rel: float = DEFAULT_SSV_REL,
) -> tuple[float, float]:
    """``(kappa*, delta_E1(kappa*))`` from a coarse scan on (0, kappa_max] refined by bounded Brent search."""

    def objective(k):
        err = final_error(spec, state, k, gamma, N_T, mode, N_I, s_sv_rel)
        return math.log10(max(err, 1e-300))

    ks = kappa_max * np.arange(1, coarse + 1) / coarse
    vals = np.array([objective(k) for k in ks])
    i = int(np.argmin(vals))
    lo = ks[i - 1] if i > 0 else 0.5 * ks[0]
    hi = ks[min(i + 1, coarse - 1)]
    best_k, best_v = float(ks[i]), float(vals[i])
    if hi > lo:
        res = optimize.minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
        if res.fun < best_v:
            best_k, best_v = float(res.x), float(res.fun)
    return best_k, final_error(spec, state, best_k, gamma, N_T, mode, N_I, s_sv_rel)


# --------------------------------------------------------------------------
# LCU preparation probabilities


def lcu_success(state: StateVector, spec: Spectrum, E_x: float, t1: float) -> float:
    """Post-selection probability ``sum_n |z_n|^2 sin^2((E_x - E_n) t1 / 2)``."""
    _check_pair(state, spec)
    if not t1 > 0:
        raise InvalidParameterError(f"t1 must be positive, got {t1}")
    w = population(state)
    w = w / w.sum()
    factor = np.sin(0.5 * np.remainder((E_x - spec.energies) * t1, 2.0 * math.pi)) ** 2
    return float(min(1.0, max(0.0, np.dot(w, factor))))


def lcu_postselect(state: StateVector, spec: Spectrum, E_x: float, dt: float) -> StateVector:
    """State after a successful LCU step; amplitudes pick up ``1 - exp(-i (E_n - E_x) dt)``."""
    _check_pair(state, spec)
    filt = 1.0 - np.exp(-1j * np.remainder((spec.energies - E_x) * dt, 2.0 * math.pi))
    out = state.amplitudes * filt
    if not np.any(np.abs(out) > 0):
        raise ZeroNormError("LCU step annihilates the state")
    return StateVector(out).normalized()


def suppression_node(spec: Spectrum, state: StateVector, dt: float) -> float:
    """Energy zeroed by the one-step Ritz filter ``c0 + c1 exp(-i E dt)``.

    Returned in the period window containing the spectrum's lower edge.
    """
    grid = TimeGrid([0.0, dt])
    c = solve(assemble(spec, state, grid)).coefficient_vectors[:, 0]
    if c[0] == 0:
        raise ZeroNormError("one-step filter has no constant term")
    period = 2.0 * math.pi / dt
    node = np.angle(-c[1] / c[0]) / dt
    return float(spec.ground + np.remainder(node - spec.ground, period))


def lcu_cumulative(
    state: StateVector,
    spec: Spectrum,
    grid: GridSpec | TimeGrid,
    E_x: float | str = "center",
) -> tuple[np.ndarray, float]:
    """Per-step success probabilities and their product.

    ``E_x`` is a fixed energy, ``"center"`` (suppression energy of the input
    state, held fixed) or ``"node"`` (recomputed each step from the current
    state's one-step filter).
    """
    _check_pair(state, spec)
    tg = _resolve_grid(grid)
    if isinstance(E_x, str):
        if E_x not in ("center", "node"):
            raise InvalidParameterError(f"unknown E_x policy {E_x!r}")
        policy = E_x
    else:
        policy = None
    fixed = suppression_energy(spec, state) if policy == "center" else E_x
    current = state.normalized()
    probs = []
    for dt in tg.steps:
        ex = suppression_node(spec, current, dt) if policy == "node" else fixed
        probs.append(lcu_success(current, spec, ex, dt))
        current = lcu_postselect(current, spec, ex, dt)
    probs = np.array(probs)
    return probs, float(np.prod(probs))


__all__ = [
    "GridKind",
    "GridSpec",
    "RunMode",
    "RunStatus",
    "RunTrace",
    "ScanResult",
    "StepRecord",
    "final_error",
    "halving_grid",
    "ivqpe_run",
    "kappa_to_t1",
    "lcu_cumulative",
    "lcu_postselect",
    "lcu_success",
    "make_grid",
    "optimal_kappa",
    "scan",
    "suppression_node",
    "t1_to_kappa",
    "vqpe_run",
]
