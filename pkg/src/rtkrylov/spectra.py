"""Model spectra, level-spacing laws, densities of states and noise broadening.

Hamiltonians are carried around as their sorted eigenvalues only. Everything
downstream (time evolution, subspace matrices, populations) depends on the
spectrum and on the initial-state amplitudes in the eigenbasis, so dense
matrices show up only in :func:`gue_matrix_spectrum` and
:func:`perturbed_spectrum`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, special, stats

from .errors import DegenerateInputError, InvalidParameterError
from .rng import make_rng


@dataclass(frozen=True)
class Spectrum:
    """Sorted, finite eigenvalues of a diagonal model Hamiltonian."""

    energies: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float).copy()
        if e.ndim != 1 or e.size < 2:
            raise InvalidParameterError(f"a spectrum needs at least 2 levels, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise InvalidParameterError("spectrum contains non-finite energies")
        e.sort(kind="stable")
        e.setflags(write=False)
        object.__setattr__(self, "energies", e)

    @property
    def Q(self) -> int:
        return int(self.energies.size)

    @property
    def ground(self) -> float:
        return float(self.energies[0])

    @property
    def width(self) -> float:
        return float(self.energies[-1] - self.energies[0])

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0])

    @property
    def top_gap(self) -> float:
        return float(self.energies[-1] - self.energies[-2])

    @property
    def mean_spacing(self) -> float:
        return self.width / (self.Q - 1)

    def __len__(self) -> int:
        return self.Q


def linear_spectrum(Q: int, dE: float) -> Spectrum:
    """Harmonic ladder ``E_n = n * dE`` for ``n = 1..Q``."""
    if Q < 2 or not dE > 0:
        raise InvalidParameterError(f"linear spectrum needs Q >= 2 and dE > 0 (got Q={Q}, dE={dE})")
    return Spectrum(dE * np.arange(1, Q + 1, dtype=float))


def gapped_linear_spectrum(Q: int, dE: float, eps12: float) -> Spectrum:
    """Harmonic ladder with the first excitation shifted by ``eps12``."""
    if Q < 2 or not dE > 0:
        raise InvalidParameterError(f"gapped spectrum needs Q >= 2 and dE > 0 (got Q={Q}, dE={dE})")
    if not eps12 > -dE:
        raise InvalidParameterError(f"eps12 must exceed -dE={-dE}, got {eps12}")
    e = dE * np.arange(1, Q + 1, dtype=float)
    e[1:] += eps12
    return Spectrum(e)


def search_spectrum(Q: int, E1: float, E2: float) -> Spectrum:
    """One marked level ``E1`` below ``Q - 1`` degenerate levels at ``E2``."""
    if Q < 2:
        raise InvalidParameterError(f"Q must be >= 2, got {Q}")
    if not E1 < E2:
        raise InvalidParameterError(f"search spectrum needs E1 < E2 (got {E1}, {E2})")
    e = np.full(Q, float(E2))
    e[0] = E1
    return Spectrum(e)


def rescale_spectrum(spec: Spectrum, E1: float, D: float) -> Spectrum:
    """Affinely map ``spec`` so its lowest level is ``E1`` and its mean spacing is ``D``."""
    if not D > 0:
        raise InvalidParameterError(f"mean spacing must be positive, got {D}")
    if spec.width <= 0:
        raise DegenerateInputError("cannot rescale a spectrum of zero width")
    scale = D * (spec.Q - 1) / spec.width
    e = E1 + (spec.energies - spec.energies[0]) * scale
    e[0] = E1
    return Spectrum(e)


# --------------------------------------------------------------------------
# level-spacing laws


class SpacingKind(str, enum.Enum):
    BERNOULLI = "bernoulli"
    UNIFORM = "uniform"
    EXPONENTIAL = "exponential"
    WIGNER = "wigner"


_DEFAULT_SHAPE = {SpacingKind.BERNOULLI: 0.5, SpacingKind.UNIFORM: 1.0}


@dataclass(frozen=True)
class SpacingDistribution:
    """i.i.d. level-spacing law with mean ``D``.

    ``a`` is a shape parameter used by the two bounded laws: Bernoulli spacings
    take the values ``D(1 - a)`` and ``D(1 + a)`` with equal probability, and
    uniform spacings are drawn from ``[D(1 - a), D(1 + a)]``. It is ignored by
    the exponential and Wigner-surmise laws.
    """

    kind: SpacingKind
    D: float = 1.0
    a: float | None = None

    def __post_init__(self):
        kind = SpacingKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (self.D > 0 and math.isfinite(self.D)):
            raise InvalidParameterError(f"mean spacing D must be positive, got {self.D}")
        a = _DEFAULT_SHAPE.get(kind, 0.0) if self.a is None else float(self.a)
        if kind is SpacingKind.BERNOULLI and not 0 <= a < 1:
            raise InvalidParameterError(f"Bernoulli shape must lie in [0, 1), got {a}")
        if kind is SpacingKind.UNIFORM and not 0 <= a <= 1:
            raise InvalidParameterError(f"uniform shape must lie in [0, 1], got {a}")
        object.__setattr__(self, "a", a)

    @property
    def mean(self) -> float:
        return self.D

    @property
    def eta(self) -> float:
        """Nondimensional variance ``var(spacing) / D**2``."""
        if self.kind is SpacingKind.BERNOULLI:
            return self.a**2
        if self.kind is SpacingKind.UNIFORM:
            return self.a**2 / 3.0
        if self.kind is SpacingKind.EXPONENTIAL:
            return 1.0
        return 3.0 * math.pi / 8.0 - 1.0

    @property
    def variance(self) -> float:
        return self.eta * self.D**2

    @property
    def is_degenerate(self) -> bool:
        return self.kind in (SpacingKind.BERNOULLI, SpacingKind.UNIFORM) and self.a == 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        D, a = self.D, self.a
        if self.is_degenerate:
            return np.full(size, D)
        if self.kind is SpacingKind.BERNOULLI:
            signs = rng.integers(0, 2, size=size) * 2 - 1
            return D * (1.0 + a * signs)
        if self.kind is SpacingKind.UNIFORM:
            return rng.uniform(D * (1 - a), D * (1 + a), size=size)
        if self.kind is SpacingKind.EXPONENTIAL:
            return rng.exponential(D, size=size)
        # GUE surmise: s^2 exp(-4 s^2 / pi D^2) is a chi(3) law rescaled
        g = rng.standard_normal((size, 3))
        return D * math.sqrt(math.pi / 8.0) * np.sqrt(np.einsum("ij,ij->i", g, g))

    def pdf(self, x) -> np.ndarray:
        """Density; for the Bernoulli law this raises (it has atoms)."""
        x = np.asarray(x, dtype=float)
        D, a = self.D, self.a
        if self.kind is SpacingKind.BERNOULLI or self.is_degenerate:
            raise InvalidParameterError(f"{self.kind.value} spacing with a={a} has no density")
        if self.kind is SpacingKind.UNIFORM:
            lo, hi = D * (1 - a), D * (1 + a)
            return np.where((x >= lo) & (x <= hi), 1.0 / (hi - lo), 0.0)
        if self.kind is SpacingKind.EXPONENTIAL:
            return np.where(x >= 0, np.exp(-np.clip(x, 0, None) / D) / D, 0.0)
        xp = np.clip(x, 0, None)
        return np.where(
            x >= 0,
            32.0 * xp**2 * np.exp(-4.0 * xp**2 / (math.pi * D**2)) / (math.pi**2 * D**3),
            0.0,
        )

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        D, a = self.D, self.a
        if self.is_degenerate:
            return np.where(x >= D, 1.0, 0.0)
        if self.kind is SpacingKind.BERNOULLI:
            return np.where(x < D * (1 - a), 0.0, np.where(x < D * (1 + a), 0.5, 1.0))
        if self.kind is SpacingKind.UNIFORM:
            lo, hi = D * (1 - a), D * (1 + a)
            return np.clip((x - lo) / (hi - lo), 0.0, 1.0)
        if self.kind is SpacingKind.EXPONENTIAL:
            return np.where(x > 0, -np.expm1(-np.clip(x, 0, None) / D), 0.0)
        s = np.clip(x, 0, None) / D
        return special.erf(2.0 * s / math.sqrt(math.pi)) - 4.0 * s / math.pi * np.exp(-4.0 * s**2 / math.pi)


def _stream(seed: int, realization: int | None) -> np.random.Generator:
    return make_rng(seed) if realization is None else make_rng(seed, realization)


def random_spacing_spectrum(
    Q: int, E1: float, dist: SpacingDistribution, seed: int, *, realization: int | None = None
) -> Spectrum:
    """Spectrum with fixed ground energy ``E1`` and i.i.d. spacings from ``dist``.

    ``realization`` selects an independent substream of ``seed`` for ensemble members.
    """
    if Q < 2:
        raise InvalidParameterError(f"Q must be >= 2, got {Q}")
    if dist.is_degenerate:
        return Spectrum(E1 + dist.D * np.arange(Q, dtype=float))
    spacings = dist.sample(_stream(seed, realization), Q - 1)
    e = np.empty(Q)
    e[0] = E1
    e[1:] = E1 + np.cumsum(spacings)
    return Spectrum(e)


def effective_mean_spectrum(dist: SpacingDistribution, Q: int, E1: float) -> Spectrum:
    """Disorder-averaged spectrum ``E1 + (n - 1) * D``; only the mean spacing matters."""
    if Q < 2:
        raise InvalidParameterError(f"Q must be >= 2, got {Q}")
    return Spectrum(E1 + dist.D * np.arange(Q, dtype=float))


# --------------------------------------------------------------------------
# densities of states


class DOSKind(str, enum.Enum):
    FLAT = "flat"
    SEMICIRCLE = "semicircle"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class DensityOfStates:
    """Continuous density of states normalized to ``Q`` levels.

    ``center`` and ``scale`` mean: for FLAT the support is
    ``[center - scale, center + scale]``; for SEMICIRCLE ``scale`` is the
    radius (``scale=2`` reproduces ``Q sqrt(4 - E^2) / 2 pi``); for GAUSSIAN it
    is the standard deviation. A Gaussian may be truncated to ``truncate``.
    """

    kind: DOSKind
    Q: int
    center: float = 0.0
    scale: float = 1.0
    truncate: tuple[float, float] | None = None
    _trunc_mass: float = field(init=False, repr=False, compare=False, default=1.0)

    def __post_init__(self):
        object.__setattr__(self, "kind", DOSKind(self.kind))
        if self.Q < 1:
            raise InvalidParameterError(f"Q must be positive, got {self.Q}")
        if not self.scale > 0:
            raise InvalidParameterError(f"scale must be positive, got {self.scale}")
        if self.truncate is not None:
            if self.kind is not DOSKind.GAUSSIAN:
                raise InvalidParameterError("only the Gaussian DOS can be truncated")
            lo, hi = map(float, self.truncate)
            if not lo < hi:
                raise InvalidParameterError(f"empty truncation window {self.truncate}")
            object.__setattr__(self, "truncate", (lo, hi))
            mass = stats.norm.cdf(hi, self.center, self.scale) - stats.norm.cdf(lo, self.center, self.scale)
            if mass <= 0:
                raise InvalidParameterError("truncation window carries no mass")
            object.__setattr__(self, "_trunc_mass", float(mass))

    @classmethod
    def flat(cls, Q: int, lo: float, hi: float) -> "DensityOfStates":
        if not lo < hi:
            raise InvalidParameterError(f"flat DOS needs lo < hi, got [{lo}, {hi}]")
        return cls(DOSKind.FLAT, Q, 0.5 * (lo + hi), 0.5 * (hi - lo))

    @classmethod
    def semicircle(cls, Q: int, radius: float = 2.0, center: float = 0.0) -> "DensityOfStates":
        return cls(DOSKind.SEMICIRCLE, Q, center, radius)

    @classmethod
    def gaussian(cls, Q: int, sigma: float, center: float = 0.0, truncate=None) -> "DensityOfStates":
        return cls(DOSKind.GAUSSIAN, Q, center, sigma, truncate)

    @property
    def support(self) -> tuple[float, float]:
        if self.kind in (DOSKind.FLAT, DOSKind.SEMICIRCLE):
            return (self.center - self.scale, self.center + self.scale)
        if self.truncate is not None:
            return self.truncate
        return (-math.inf, math.inf)

    def density(self, E) -> np.ndarray:
        """``omega(E)``, integrating to ``Q``."""
        E = np.asarray(E, dtype=float)
        c, s = self.center, self.scale
        if self.kind is DOSKind.FLAT:
            return np.where(np.abs(E - c) <= s, self.Q / (2 * s), 0.0)
        if self.kind is DOSKind.SEMICIRCLE:
            u = np.clip(s**2 - (E - c) ** 2, 0, None)
            return self.Q * 2.0 * np.sqrt(u) / (math.pi * s**2)
        rho = stats.norm.pdf(E, c, s) / self._trunc_mass
        if self.truncate is not None:
            lo, hi = self.truncate
            rho = np.where((E >= lo) & (E <= hi), rho, 0.0)
        return self.Q * rho

    def mean_energy(self) -> float:
        if self.truncate is None:
            return self.center
        lo, hi = self.truncate
        a, b = (lo - self.center) / self.scale, (hi - self.center) / self.scale
        return float(stats.truncnorm.mean(a, b, loc=self.center, scale=self.scale))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        c, s = self.center, self.scale
        if self.kind is DOSKind.FLAT:
            return rng.uniform(c - s, c + s, size=size)
        if self.kind is DOSKind.SEMICIRCLE:
            return c + s * (2.0 * rng.beta(1.5, 1.5, size=size) - 1.0)
        if self.truncate is None:
            return rng.normal(c, s, size=size)
        lo, hi = self.truncate
        a, b = (lo - c) / s, (hi - c) / s
        return stats.truncnorm.rvs(a, b, loc=c, scale=s, size=size, random_state=rng)

    def cdf(self, E) -> np.ndarray:
        """Cumulative fraction of levels below ``E`` (mass normalized to 1)."""
        E = np.asarray(E, dtype=float)
        c, s = self.center, self.scale
        if self.kind is DOSKind.FLAT:
            return np.clip((E - c + s) / (2 * s), 0.0, 1.0)
        if self.kind is DOSKind.SEMICIRCLE:
            u = np.clip((E - c) / s, -1.0, 1.0)
            return 0.5 + (u * np.sqrt(1 - u**2) + np.arcsin(u)) / math.pi
        if self.truncate is None:
            return stats.norm.cdf(E, c, s)
        lo, hi = self.truncate
        a, b = (lo - c) / s, (hi - c) / s
        return stats.truncnorm.cdf(E, a, b, loc=c, scale=s)

    def total_mass(self) -> float:
        """``Q`` recomputed by adaptive quadrature (a self-check on ``density``)."""
        lo, hi = self.support
        if math.isinf(lo):
            lo, hi = self.center - 40 * self.scale, self.center + 40 * self.scale
        val, _ = integrate.quad(lambda e: float(self.density(e)), lo, hi, limit=200, points=[self.center])
        return val


def dos_sampled_spectrum(Q: int, dos: DensityOfStates, seed: int, *, realization: int | None = None) -> Spectrum:
    """``Q`` i.i.d. energies drawn from ``omega(E) / Q``, sorted."""
    if Q < 2:
        raise InvalidParameterError(f"Q must be >= 2, got {Q}")
    return Spectrum(dos.sample(_stream(seed, realization), Q))


# --------------------------------------------------------------------------
# random matrices


def sample_gue(Q: int, rng: np.random.Generator) -> np.ndarray:
    """Hermitian matrix with N(0, 1/Q) diagonal and N(0, 1/2Q) + i N(0, 1/2Q) off-diagonal entries."""
    h = np.zeros((Q, Q), dtype=complex)
    h[np.diag_indices(Q)] = rng.normal(0.0, math.sqrt(1.0 / Q), size=Q)
    iu = np.triu_indices(Q, 1)
    sd = math.sqrt(1.0 / (2 * Q))
    upper = rng.normal(0.0, sd, size=iu[0].size) + 1j * rng.normal(0.0, sd, size=iu[0].size)
    h[iu] = upper
    h[(iu[1], iu[0])] = upper.conj()
    return h


def gue_matrix_spectrum(Q: int, seed: int, *, realization: int | None = None) -> Spectrum:
    if Q < 2:
        raise InvalidParameterError(f"Q must be >= 2, got {Q}")
    h = sample_gue(Q, _stream(seed, realization))
    return Spectrum(np.linalg.eigvalsh(h))


class PerturbationOrder(str, enum.Enum):
    FIRST = "first"
    SECOND = "second"


def _goe_diagonal(rng: np.random.Generator, Q: int) -> np.ndarray:
    # exp(-Q tr V^2 / 4): diagonal variance 2/Q, off-diagonal variance 1/Q
    return rng.normal(0.0, math.sqrt(2.0 / Q), size=Q)


def _goe_offdiagonal(rng: np.random.Generator, Q: int) -> np.ndarray:
    iu = np.triu_indices(Q, 1)
    v = np.zeros((Q, Q))
    v[iu] = rng.normal(0.0, math.sqrt(1.0 / Q), size=iu[0].size)
    return v + v.T


def sample_goe(Q: int, rng: np.random.Generator) -> np.ndarray:
    """Real symmetric matrix distributed as ``exp(-Q tr V^2 / 4)``.

    The diagonal is drawn first so that first-order perturbation theory and
    the full matrix see the same diagonal for a given stream.
    """
    diag = _goe_diagonal(rng, Q)
    v = _goe_offdiagonal(rng, Q)
    v[np.diag_indices(Q)] = diag
    return v


def _perturb(E: np.ndarray, strength: float, order: PerturbationOrder, rng: np.random.Generator) -> np.ndarray:
    Q = E.size
    out = E + strength * _goe_diagonal(rng, Q)
    if order is PerturbationOrder.SECOND:
        diffs = E[:, None] - E[None, :]
        off = ~np.eye(Q, dtype=bool)
        if np.any(np.abs(diffs[off]) < 1e-12):
            raise DegenerateInputError("second-order correction needs a nondegenerate spectrum")
        v = strength * _goe_offdiagonal(rng, Q)
        out = out + np.where(off, v**2 / np.where(off, diffs, 1.0), 0.0).sum(axis=1)
    return out


def perturbed_spectrum(
    spec: Spectrum,
    strength: float,
    order: PerturbationOrder | str = PerturbationOrder.FIRST,
    seed: int = 0,
) -> Spectrum:
    """Levels shifted by perturbation theory in ``strength * V`` with V drawn from the GOE."""
    if not strength >= 0:
        raise InvalidParameterError(f"strength must be nonnegative, got {strength}")
    return Spectrum(_perturb(spec.energies, strength, PerturbationOrder(order), make_rng(seed)))


def perturbed_level_shifts(spec: Spectrum, strength: float, order, seed: int, realization: int) -> np.ndarray:
    """Perturbed level ``n`` for one noise realization, *without* re-sorting.

    Keeping the label ``n`` attached is what lets the per-level broadening
    ``g_n`` be studied; :func:`perturbed_spectrum` returns the sorted version.
    """
    if not strength >= 0:
        raise InvalidParameterError(f"strength must be nonnegative, got {strength}")
    return _perturb(spec.energies, strength, PerturbationOrder(order), make_rng(seed, realization))


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    realizations: int

    @property
    def density(self) -> np.ndarray:
        """Levels per unit energy per realization, so it integrates to ``Q``."""
        return self.counts / (self.realizations * np.diff(self.edges))

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / self.counts.sum()


def broadened_dos(
    spec: Spectrum,
    strength: float,
    realizations: int,
    bins: int,
    seed: int,
    order: PerturbationOrder | str = PerturbationOrder.FIRST,
    range_: tuple[float, float] | None = None,
) -> Histogram:
    """Histogram of perturbed levels aggregated over independent noise realizations."""
    if realizations < 1 or bins < 2:
        raise InvalidParameterError(f"need realizations >= 1 and bins >= 2 (got {realizations}, {bins})")
    samples = np.empty((realizations, spec.Q))
    for r in range(realizations):
        samples[r] = perturbed_level_shifts(spec, strength, order, seed, r)
    if range_ is None:
        pad = max(6.0 * strength * math.sqrt(2.0 / spec.Q), 0.5 * spec.mean_spacing)
        range_ = (spec.energies[0] - pad, spec.energies[-1] + pad)
    counts, edges = np.histogram(samples.ravel(), bins=bins, range=range_)
    return Histogram(edges, counts, realizations)


# --------------------------------------------------------------------------
# file format


def read_spectrum(path: str | Path) -> Spectrum:
    """One energy per line; ``#`` starts a comment; order does not matter."""
    values = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise InvalidParameterError(f"{path}:{lineno}: cannot parse energy {line!r}") from None
    return Spectrum(np.array(values))


def format_spectrum(spec: Spectrum, header: str | None = None) -> str:
    lines = [f"# {h}" for h in header.splitlines()] if header else []
    lines += [f"{e:.17g}" for e in spec.energies]
    return "\n".join(lines) + "\n"


def write_spectrum(spec: Spectrum, path: str | Path, header: str | None = None) -> None:
    Path(path).write_text(format_spectrum(spec, header), encoding="utf-8")
