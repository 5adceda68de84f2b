"""Rogers-Szego trial polynomials and a-priori error bounds for real-time subspace runs.

The ground-state bound reads

    delta_E1(j) <= (E_Q - E_1) * eps12^(-2j) * sin^2(Xi) / cos^2(Xi)

with ``cos^2(Xi) = |<Phi_0|1>|^2`` and ``eps12 = 1 + 3 (E_2 - E_1) dt / 2 pi``,
valid for any step ``dt`` that fits the spectrum into the angular window of
the trial polynomials. Window checks are done on the flipped spectrum
``-E``, where the ground state becomes the top level and the gap to
``E_2`` becomes the top gap.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    IndexOutOfRangeError,
    InvalidParameterError,
    NumericalError,
    WindowViolationError,
    ZeroOverlapError,
)
from .spectra import Spectrum
from .states import StateVector, _check_pair, population
from .subspace import DEFAULT_SSV_REL, TimeGrid, assemble, solve

GAMMA = 1.0
OMEGA = math.pi / 3.0
OMEGA_C = math.pi - OMEGA

_WINDOW_SLACK = 1e-12


def _check_q(q: float) -> None:
    if not 0.0 < q <= 1.0:
        raise InvalidParameterError(f"q must lie in (0, 1], got {q}")


def rogers_szego(j: int, q: float, theta) -> np.ndarray | complex:
    """``W_j(z|q)`` at ``z = -q^(-1/2) exp(-i theta)`` by the three-term recursion."""
    if int(j) != j or j < 0:
        raise InvalidParameterError(f"degree must be a nonnegative integer, got {j}")
    _check_q(q)
    theta = np.asarray(theta, dtype=float)
    z = -np.exp(-1j * theta) / math.sqrt(q)
    prev, cur = np.ones_like(z), z + 1.0
    if j == 0:
        out = prev
    else:
        for k in range(2, j + 1):
            prev, cur = cur, (1.0 + z) * cur - (1.0 - q ** (k - 1)) * z * prev
        out = cur
    return complex(out) if out.ndim == 0 else out


def rogers_szego_binomial(j: int, theta) -> np.ndarray:
    """``q = 1`` closed form ``sum_k C(j, k) exp(-i k (theta + pi))``."""
    theta = np.asarray(theta, dtype=float)
    k = np.arange(j + 1)
    coeff = np.array([math.comb(j, int(m)) for m in k], dtype=float)
    return np.exp(-1j * np.multiply.outer(theta + math.pi, k)) @ coeff


def rs_window_check(j: int, q: float = 1.0, samples: int = 4096) -> float:
    """Largest ``Omega`` with ``|W_j(theta)| <= 1`` on ``|theta| <= Omega``.

    ``|W_j|`` is even in ``theta``, so only ``[0, pi]`` is sampled; the first
    crossing is refined by Brent root finding.
    """
    if j < 1:
        raise InvalidParameterError(f"degree must be >= 1, got {j}")
    _check_q(q)
    theta = np.linspace(0.0, math.pi, samples + 1)
    excess = np.abs(rogers_szego(j, q, theta)) - 1.0
    above = np.nonzero(excess > 0)[0]
    if above.size == 0:
        return math.pi
    k = int(above[0])
    if k == 0:
        return 0.0
    f = lambda x: abs(rogers_szego(j, q, x)) - 1.0  # noqa: E731
    return float(optimize.brentq(f, theta[k - 1], theta[k], xtol=1e-15, rtol=4 * np.finfo(float).eps))


def rs_growth_monotone(j: int, q: float = 1.0, samples: int = 2048) -> bool:
    """Whether ``|W_j|`` is nondecreasing on ``[Omega, pi]``."""
    omega = rs_window_check(j, q)
    theta = np.linspace(omega, math.pi, samples)
    mod = np.abs(rogers_szego(j, q, theta))
    return bool(np.all(np.diff(mod) >= -1e-12 * mod[1:]))


def gap_growth_inequality(eps) -> tuple[np.ndarray, np.ndarray]:
    """``(sqrt(2 - 2 cos(eps Omega^c + Omega)), 1 + Gamma eps)`` on ``eps`` in [0, 1]."""
    eps = np.asarray(eps, dtype=float)
    lhs = np.sqrt(np.maximum(2.0 - 2.0 * np.cos(eps * OMEGA_C + OMEGA), 0.0))
    return lhs, 1.0 + GAMMA * eps


# --------------------------------------------------------------------------
# step admissibility


def _sector(spec: Spectrum, n: int) -> tuple[float, float, float]:
    """``(gap to the next level, spread above it, full spread)`` of the sector starting at level ``n``."""
    E = spec.energies
    if not 1 <= n < spec.Q:
        raise IndexOutOfRangeError(f"sector index {n} outside 1..{spec.Q - 1}")
    gap = E[n] - E[n - 1]
    rest = E[-1] - E[n]
    return float(gap), float(rest), float(E[-1] - E[n - 1])


def window_conditions(
    spec: Spectrum, dt: float, n: int = 1, omega: float = OMEGA, slack: float = _WINDOW_SLACK
) -> tuple[bool, bool, bool]:
    """Window conditions on the flipped sector ``-E_Q..-E_n``.

    Returns ``(top gap <= pi - Omega, lower spread <= 2 Omega,
    2 Omega <= full spread <= pi + Omega)`` in phase units, each with a
    relative ``slack`` for roundoff in user-supplied steps.
    """
    gap, rest, full = _sector(spec, n)
    tol = slack * max(1.0, full * dt)
    return (
        gap * dt <= math.pi - omega + tol,
        rest * dt <= 2.0 * omega + tol,
        2.0 * omega - tol <= full * dt <= math.pi + omega + tol,
    )


def validate_dt(spec: Spectrum, dt: float, n: int = 1, omega: float = OMEGA) -> None:
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    top, lower, full = window_conditions(spec, dt, n, omega)
    if not (top and lower and full):
        raise WindowViolationError(
            f"dt = {dt!r} violates the angular window (top gap ok: {top}, lower spread ok: {lower}, full spread ok: {full})"
        )


def auto_dt(spec: Spectrum, n: int = 1, omega: float = OMEGA) -> float:
    """Supremum of steps keeping the top gap within ``pi - Omega`` and the rest within ``2 Omega``.

    Both constraints are monotone in the step, so bisection on the first two
    window conditions converges to the supremum.
    """
    gap, rest, _ = _sector(spec, n)
    scale = max(gap, rest)
    if scale <= 0:
        raise DegenerateInputError("sector has zero width")
    lo, hi = 0.0, 4.0 * math.pi / scale

    def ok(tau):
        top, lower, _ = window_conditions(spec, tau, n, omega, slack=0.0)
        return top and lower

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo


def epsilon_tilde(spec: Spectrum, dt: float, n: int = 1) -> float:
    gap, _, _ = _sector(spec, n)
    return 1.0 + GAMMA * gap * dt / OMEGA_C


# --------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class BoundReport:
    j: int
    n: int
    dt: float
    measured_error: float
    bound_value: float
    epsilon_tilde: float
    cos2_Xi: float
    satisfied: bool
    margin: float

    def to_dict(self) -> dict:
        return asdict(self)


def _satisfied(measured: float, bound: float, width: float) -> bool:
    # the absolute floor absorbs roundoff when the bound is exactly zero
    return measured <= bound * (1.0 + 1e-9) + 1e-12 * width


def _overlap(state: StateVector, n: int) -> float:
    w = population(state)
    cos2 = float(w[n - 1] / w.sum())
    if cos2 < 1e-14:
        raise ZeroOverlapError(f"initial state has overlap {cos2:g} with level {n}")
    return cos2


def _ritz_values_at(spec: Spectrum, state: StateVector, dt: float, j: int, s_sv_rel: float) -> np.ndarray:
    grid = TimeGrid(dt * np.arange(j + 1))
    return solve(assemble(spec, state, grid), s_sv_rel).ritz_values


def thm11_bound(
    spec: Spectrum,
    state: StateVector,
    dt: float | str,
    j: int,
    s_sv_rel: float = DEFAULT_SSV_REL,
) -> BoundReport:
    """Ground-state bound after ``j`` steps on the linear grid ``t_k = k dt`` versus the measured error."""
    return cor12_bound(spec, state, dt, 1, j, None, s_sv_rel)


def thm11_reports(spec, state, dt, j_max: int, s_sv_rel: float = DEFAULT_SSV_REL) -> list[BoundReport]:
    return [thm11_bound(spec, state, dt, j, s_sv_rel) for j in range(1, j_max + 1)]


def cor12_bound(
    spec: Spectrum,
    state: StateVector,
    dt: float | str,
    n: int,
    j: int,
    ritz_values=None,
    s_sv_rel: float = DEFAULT_SSV_REL,
) -> BoundReport:
    """Bound on the ``n``-th Ritz value after ``j`` steps.

    The prefactor ``Y`` uses the ``n-1`` lower Ritz values; pass them in
    ``ritz_values`` or leave ``None`` to take them from the same run.
    """
    _check_pair(state, spec)
    if int(j) != j or int(n) != n or not j >= n >= 1:
        raise InvalidParameterError(f"need integers j >= n >= 1, got j={j}, n={n}")
    if dt == "auto":
        dt = auto_dt(spec, n)
    dt = float(dt)
    validate_dt(spec, dt, n)
    cos2 = _overlap(state, n)
    sin2 = max(0.0, 1.0 - cos2)
    E = spec.energies
    eps_t = epsilon_tilde(spec, dt, n)

    ritz = _ritz_values_at(spec, state, dt, j, s_sv_rel)
    width = float(E[-1] - E[0])
    if sin2 <= 1e-14:
        # an eigenvector spans a one-dimensional subspace whose only Ritz value is E_n
        measured = float(ritz[0] - E[n - 1])
        return BoundReport(int(j), int(n), dt, measured, 0.0, eps_t, cos2, _satisfied(measured, 0.0, width), -measured)
    if ritz.size < n:
        raise NumericalError(f"only {ritz.size} Ritz values retained, need {n}")
    measured = float(ritz[n - 1] - E[n - 1])

    Y = 1.0
    if n >= 2:
        lower = np.asarray(ritz[: n - 1] if ritz_values is None else ritz_values, dtype=float)
        if lower.size < n - 1:
            raise DimensionMismatchError(f"need {n - 1} lower Ritz values, got {lower.size}")
        nodes = np.exp(-1j * np.remainder(lower[: n - 1] * dt, 2.0 * math.pi))
        lam = np.exp(-1j * np.remainder(E * dt, 2.0 * math.pi))
        denom = np.abs(lam[n - 1] - nodes)
        if np.any(denom < 1e-12):
            raise DegenerateInputError("a lower Ritz phase coincides with the target phase")
        ratios = np.abs(lam[n:, None] - nodes[None, :]) / denom[None, :]
        Y = float(np.max(np.prod(ratios, axis=1)))

    bound = (E[-1] - E[n - 1]) * Y * eps_t ** (-2 * (j - n + 1)) * sin2 / cos2
    return BoundReport(
        j=int(j),
        n=int(n),
        dt=dt,
        measured_error=measured,
        bound_value=float(bound),
        epsilon_tilde=eps_t,
        cos2_Xi=cos2,
        satisfied=_satisfied(measured, bound, width),
        margin=float(bound - measured),
    )

