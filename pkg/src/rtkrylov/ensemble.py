"""Disorder ensembles: convergence envelopes over random spectra and spacing diagnostics."""

from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import InsufficientSamplesError, InvalidParameterError, RTKrylovError
from .rng import make_rng
from .solver import GridSpec, vqpe_run
from .spectra import (
    DensityOfStates,
    SpacingDistribution,
    SpacingKind,
    Spectrum,
    dos_sampled_spectrum,
    effective_mean_spectrum,
    gue_matrix_spectrum,
    random_spacing_spectrum,
    rescale_spectrum,
)
from .states import StateVector, uniform_state
from .subspace import DEFAULT_SSV_REL

log = logging.getLogger(__name__)


class GeneratorKind(str, enum.Enum):
    SPACING = "spacing"
    DOS = "dos"
    GUE = "gue"


@dataclass(frozen=True)
class SpectrumGenerator:
    """Recipe for one member of a random-spectrum ensemble.

    DOS and GUE draws are affinely rescaled to ground energy ``E1`` and mean
    spacing ``D`` unless ``rescale`` is off; spacing draws already have both.
    """

    kind: GeneratorKind
    Q: int
    E1: float = 1.0
    D: float = 1.0
    dist: SpacingDistribution | None = None
    dos: DensityOfStates | None = None
    rescale: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", GeneratorKind(self.kind))
        if self.Q < 2:
            raise InvalidParameterError(f"Q must be >= 2, got {self.Q}")
        if self.kind is GeneratorKind.SPACING and self.dist is None:
            raise InvalidParameterError("spacing generator needs a SpacingDistribution")
        if self.kind is GeneratorKind.DOS and self.dos is None:
            raise InvalidParameterError("dos generator needs a DensityOfStates")

    @classmethod
    def spacing(cls, Q: int, dist: SpacingDistribution, E1: float = 1.0) -> "SpectrumGenerator":
        return cls(GeneratorKind.SPACING, Q, E1, dist.D, dist=dist)

    @classmethod
    def from_dos(cls, Q: int, dos: DensityOfStates, E1: float = 1.0, D: float = 1.0) -> "SpectrumGenerator":
        return cls(GeneratorKind.DOS, Q, E1, D, dos=dos)

    @classmethod
    def gue(cls, Q: int, E1: float = 1.0, D: float = 1.0) -> "SpectrumGenerator":
        return cls(GeneratorKind.GUE, Q, E1, D)

    def sample(self, seed: int, realization: int) -> Spectrum:
        if self.kind is GeneratorKind.SPACING:
            return random_spacing_spectrum(self.Q, self.E1, self.dist, seed, realization=realization)
        if self.kind is GeneratorKind.DOS:
            spec = dos_sampled_spectrum(self.Q, self.dos, seed, realization=realization)
        else:
            spec = gue_matrix_spectrum(self.Q, seed, realization=realization)
        return rescale_spectrum(spec, self.E1, self.D) if self.rescale else spec

    def benchmark(self) -> Spectrum:
        """Evenly spaced spectrum with the ensemble's ground energy and mean spacing."""
        if self.kind is GeneratorKind.SPACING:
            return effective_mean_spectrum(self.dist, self.Q, self.E1)
        return Spectrum(self.E1 + self.D * np.arange(self.Q, dtype=float))

    def describe(self) -> dict:
        out = {"kind": self.kind.value, "Q": self.Q, "E1": self.E1, "D": self.D, "rescale": self.rescale}
        if self.dist is not None:
            out["spacing"] = {"kind": self.dist.kind.value, "D": self.dist.D, "a": self.dist.a, "eta": self.dist.eta}
        if self.dos is not None:
            out["dos"] = {
                "kind": self.dos.kind.value,
                "center": self.dos.center,
                "scale": self.dos.scale,
                "truncate": self.dos.truncate,
            }
        return out


class StatePolicy(str, enum.Enum):
    UNIFORM = "uniform"
    RANDOM = "random"


def _initial_state(policy: StatePolicy, Q: int, seed: int, realization: int) -> StateVector:
    if policy is StatePolicy.UNIFORM:
        return uniform_state(Q)
    phi = make_rng(seed, realization, 1).uniform(0.0, 1.0, size=Q)
    return StateVector(phi / np.linalg.norm(phi))


@dataclass(frozen=True)
class Envelope:
    steps: np.ndarray
    min: np.ndarray
    max: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    benchmark: np.ndarray
    realizations: int
    failures: int
    base_seed: int
    failure_messages: tuple[str, ...] = field(default=())

    def contains_benchmark(self, rtol: float = 1e-12) -> np.ndarray:
        """Per-step flag for ``min <= benchmark <= max`` (with a relative slack for ties)."""
        slack = rtol * np.maximum(np.abs(self.benchmark), 1e-300)
        return (self.min - slack <= self.benchmark) & (self.benchmark <= self.max + slack)


def resolve_threads(threads: int | None) -> int:
    """Worker count from the argument, else ``RTKRYLOV_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("RTKRYLOV_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise InvalidParameterError(f"thread count must be >= 1, got {threads}")
    return threads


def convergence_envelope(
    generator: SpectrumGenerator,
    grid: GridSpec,
    realizations: int,
    base_seed: int,
    state_policy: StatePolicy | str = StatePolicy.UNIFORM,
    *,
    kappa: float | None = None,
    s_sv_rel: float = DEFAULT_SSV_REL,
    threads: int | None = None,
) -> Envelope:
    """Statistics of ``delta_E1(j)`` over ``realizations`` random spectra, plus the benchmark trace.

    With ``kappa`` set, ``t1`` is recomputed per spectrum from its own mean
    spacing (``grid.t1`` is then ignored); otherwise every realization shares
    ``grid``. Failed realizations are counted and left out of the statistics.
    """
    if realizations < 1:
        raise InvalidParameterError(f"realizations must be >= 1, got {realizations}")
    policy = StatePolicy(state_policy)
    n_workers = resolve_threads(threads)

    def grid_for(spec: Spectrum) -> GridSpec:
        if kappa is None:
            return grid
        t1 = kappa * 2.0 * math.pi / (spec.Q * spec.mean_spacing)
        return GridSpec(grid.kind, t1, grid.N_T, grid.gamma)

    def trace_errors(spec: Spectrum, state: StateVector) -> np.ndarray:
        tr = vqpe_run(spec, state, grid_for(spec), 0.0, s_sv_rel)
        return np.array([tr.error_at(j) for j in range(grid.N_T + 1)])

    def one(r: int):
        try:
            spec = generator.sample(base_seed, r)
            return trace_errors(spec, _initial_state(policy, generator.Q, base_seed, r)), None
        except RTKrylovError as exc:
            return None, f"realization {r}: {type(exc).__name__}: {exc}"

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(one, range(realizations)))
    else:
        results = [one(r) for r in range(realizations)]

    rows = [res for res, _ in results if res is not None]
    messages = tuple(msg for _, msg in results if msg is not None)
    for msg in messages:
        log.warning("excluded %s", msg)
    bench_spec = generator.benchmark()
    bench_state = _initial_state(policy, generator.Q, base_seed, 0)
    bench = trace_errors(bench_spec, bench_state)
    steps = np.arange(grid.N_T + 1)
    if rows:
        data = np.vstack(rows)
        stats_ = (data.min(0), data.max(0), data.mean(0), data.std(0))
    else:
        nan = np.full(steps.size, np.nan)
        stats_ = (nan, nan, nan, nan)
    return Envelope(steps, *stats_, bench, len(rows), len(messages), base_seed, messages)


# --------------------------------------------------------------------------
# spacing statistics


@dataclass(frozen=True)
class JensenGap:
    lhs: float
    rhs: float
    stderr: float


def jensen_gap(
    dist: SpacingDistribution,
    n: int,
    dt: float,
    samples: int = 100_000,
    seed: int = 0,
) -> JensenGap:
    """Monte-Carlo phase-averaging gap of level ``n`` against its bound.

    ``lhs = |E[exp(-i E_n dt)] - exp(-i E_n^eff dt)|`` with ``E_n - E_1`` a sum
    of ``n-1`` spacings; ``rhs = eta (n-1) (dt D)^2 / sqrt(2)``.
    """
    if int(n) != n or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n}")
    if samples < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {samples}")
    m = n - 1
    rhs = dist.eta * m * (dt * dist.D) ** 2 / math.sqrt(2.0)
    if m == 0:
        return JensenGap(0.0, rhs, 0.0)
    rng = make_rng(seed)
    total = np.zeros(samples)
    for _ in range(m):  # one spacing per level keeps memory at O(samples)
        total += dist.sample(rng, samples)
    target = m * dist.D
    # relative phase removes the common factor exp(-i E^eff dt)
    rel = np.exp(-1j * np.remainder((total - target) * dt, 2.0 * math.pi))
    mean = rel.mean()
    lhs = abs(mean - 1.0)
    # delta method on |mean - 1|
    direction = (mean - 1.0) / lhs if lhs > 0 else 1.0
    proj = (rel * np.conj(direction)).real
    stderr = float(proj.std(ddof=1) / math.sqrt(samples))
    return JensenGap(float(lhs), float(rhs), stderr)


@dataclass(frozen=True)
class SpacingDiagnostics:
    mean: float
    variance: float
    eta_hat: float
    ks_statistic: float
    p_value: float
    ks_pass: bool
    test: str


def spacing_diagnostics(samples, dist: SpacingDistribution, level: float = 0.01) -> SpacingDiagnostics:
    """Moments and a goodness-of-fit test of ``samples`` against ``dist``.

    Continuous laws use Kolmogorov-Smirnov against the analytic CDF. The
    two-point Bernoulli law uses an exact binomial test on the fraction of
    upper values (the KS distance is still reported). A degenerate law passes
    iff every sample equals ``D``.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 100:
        raise InsufficientSamplesError(f"need at least 100 samples, got {x.size}")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    eta_hat = var / mean**2 if mean != 0 else math.inf
    if dist.is_degenerate:
        ok = bool(np.all(np.abs(x - dist.D) <= 1e-12 * dist.D))
        return SpacingDiagnostics(mean, var, eta_hat, 0.0 if ok else 1.0, 1.0 if ok else 0.0, ok, "exact")
    ks = stats.kstest(x, dist.cdf)
    if dist.kind is SpacingKind.BERNOULLI:
        hi = dist.D * (1.0 + dist.a)
        lo = dist.D * (1.0 - dist.a)
        on_support = np.isclose(x, hi) | np.isclose(x, lo)
        if not np.all(on_support):
            return SpacingDiagnostics(mean, var, eta_hat, float(ks.statistic), 0.0, False, "binomial")
        k = int(np.count_nonzero(np.isclose(x, hi)))
        p = float(stats.binomtest(k, x.size, 0.5).pvalue)
        return SpacingDiagnostics(mean, var, eta_hat, float(ks.statistic), p, p >= level, "binomial")
    p = float(ks.pvalue)
    return SpacingDiagnostics(mean, var, eta_hat, float(ks.statistic), p, p >= level, "ks")


def small_spacing_fit(samples, cutoff: float) -> tuple[float, float]:
    """Fit ``density ~ c * s^k`` on ``(0, cutoff]`` from the empirical CDF; returns ``(c, k)``.

    The CDF of such a law is ``c s^(k+1) / (k+1)``; a log-log line through the
    empirical CDF over ``[cutoff/10, cutoff]`` gives slope ``k+1``.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size < 100:
        raise InsufficientSamplesError(f"need at least 100 samples, got {x.size}")
    s = np.geomspace(cutoff / 10.0, cutoff, 12)
    F = np.searchsorted(x, s, side="right") / x.size
    if np.any(F == 0):
        raise InsufficientSamplesError("too few samples below the fit window")
    slope, intercept = np.polyfit(np.log(s), np.log(F), 1)
    k = slope - 1.0
    c = slope * math.exp(intercept)
    return float(c), float(k)


__all__ = [
    "Envelope",
    "GeneratorKind",
    "JensenGap",
    "SpacingDiagnostics",
    "SpectrumGenerator",
    "StatePolicy",
    "convergence_envelope",
    "jensen_gap",
    "resolve_threads",
    "small_spacing_fit",
    "spacing_diagnostics",
]
