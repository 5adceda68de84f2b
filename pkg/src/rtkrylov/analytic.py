"""Closed-form single-step machinery.

For one time step the subspace is two-dimensional and, with a uniform
initial state, the ground-state estimate has eigenstate populations

    p_n = (sin(chi + E_n t1) + 1) / Z

with the phase offset ``chi`` and normalization ``Z`` given by a handful of
auxiliary variables built from ``H00``, ``H01`` and ``S01``. This module
evaluates them, locates the suppressed region of the spectrum, gives the
continuum (density-of-states) version of the matrix elements, and evaluates
the nested phase recursion that rewrites a multi-step Ritz vector as a chain
of Moebius maps.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    IndexOutOfRangeError,
    InvalidParameterError,
    NumericalError,
    QuadratureError,
)
from .spectra import DensityOfStates, DOSKind, Spectrum
from .states import StateVector, _check_pair, is_uniform, phases, population
from .subspace import TimeGrid, assemble, ritz_state, solve

log = logging.getLogger(__name__)


# below this 1 - |S01| the closed-form normalization loses more than ~6 digits
_COLLINEAR = 1e-6


def wrap_angle(x: float) -> float:
    """Map an angle onto (-pi, pi]."""
    y = math.remainder(x, 2.0 * math.pi)
    return math.pi if y == -math.pi else y


@dataclass(frozen=True)
class SingleStepAuxiliaries:
    lambda_plus: float
    lambda_minus: float
    g: float
    rho: float
    rho_tilde: float
    mu: float
    mu_tilde: float
    chi: float
    Z: float

    def population(self, energies: np.ndarray, t1: float) -> np.ndarray:
        arg = np.remainder(self.chi + np.asarray(energies) * t1, 2.0 * math.pi)
        return (np.sin(arg) + 1.0) / self.Z


def single_step_aux(H00: float, H01: complex, S01: complex, Q: int) -> SingleStepAuxiliaries:
    """Auxiliary variables of the one-step problem for a uniform state on ``Q`` levels.

    Raises :class:`DegenerateInputError` on the measure-zero set where the
    expressions break down: ``|S01|`` equal to 0 or 1, or ``g = 0`` with
    ``rho <= 0`` (detected as ``rho_tilde + rho`` vanishing relative to
    ``rho_tilde``). A vanishing ``rho_tilde`` means the two Ritz values
    coincide and is rejected as well. Callers fall back to the 2x2 pencil.
    """
    a = abs(S01)
    if not 1e-12 < a < 1.0 - 1e-12:
        raise DegenerateInputError(f"|S01| = {a!r} is outside (0, 1)")
    lp = 1.0 / math.sqrt(1.0 + a)
    lm = 1.0 / math.sqrt(1.0 - a)
    sr, si = S01.real, S01.imag
    hr, hi = H01.real, H01.imag
    g = (sr * hi - si * hr) / a * lm * lp
    rho = (sr * hr + si * hi) / (2.0 * a) * (lm**2 + lp**2) - 0.5 * H00 * (lm**2 - lp**2)
    rho_t = math.hypot(g, rho)
    s = rho_t + rho
    scale = (abs(H00) + abs(H01)) * lm**2
    if rho_t <= 1e-12 * scale or s <= 1e-12 * rho_t:
        raise DegenerateInputError(f"g = {g:g}, rho = {rho:g}: auxiliary variables undefined")
    mu = 2.0 * g * lp / (s * lm)
    mu_t = (-(g**2) * (lm**2 - lp**2) - 2.0 * rho * s * lm**2) / (s**2 * lm**2)
    chi = wrap_angle(math.atan2(mu_t, mu) + math.atan2(si, sr))
    Z = 2.0 * Q * rho_t * s / (s**2 * lm**2 + g**2 * lp**2)
    return SingleStepAuxiliaries(lp, lm, g, rho, rho_t, mu, mu_t, chi, Z)


def single_step_elements(spec: Spectrum, state: StateVector, t1: float) -> tuple[float, complex, complex]:
    mats = assemble(spec, state, TimeGrid([0.0, t1]))
    return float(mats.H[0, 0].real), complex(mats.H[0, 1]), complex(mats.S[0, 1])


def numeric_single_step_population(spec: Spectrum, state: StateVector, t1: float) -> np.ndarray:
    """Populations from the 2x2 pencil.

    When both Ritz values coincide every vector of the span is a Ritz vector;
    the one with the largest ground-level population is returned.
    """
    grid = TimeGrid([0.0, t1])
    result = solve(assemble(spec, state, grid))
    vals = result.ritz_values
    scale = max(1.0, float(np.max(np.abs(vals))))
    if result.retained_rank == 2 and vals[1] - vals[0] <= 1e-10 * scale:
        # columns of B are S-orthonormal, so maximizing |<1|psi>|^2 is a rank-one eigenproblem
        ground_row = state.amplitudes[0] * phases(spec.energies[:1], grid.times)[:, 0]
        a = ground_row @ result.coefficient_vectors
        c = result.coefficient_vectors @ a.conj()
        filt = c @ phases(spec.energies, grid.times)
        return population(StateVector(state.amplitudes * filt).normalized())
    return population(ritz_state(result, 0, spec, state, grid))


def single_step_population(spec: Spectrum, state: StateVector, t1: float) -> np.ndarray:
    """Ground-estimate populations after one step of length ``t1``.

    Uses the closed form for uniform states and the 2x2 pencil otherwise, or
    whenever the closed form is undefined or the two basis vectors are
    nearly collinear.
    """
    _check_pair(state, spec)
    if not t1 > 0:
        raise InvalidParameterError(f"t1 must be positive, got {t1}")
    if is_uniform(state):
        H00, H01, S01 = single_step_elements(spec, state, t1)
        if 1.0 - abs(S01) < _COLLINEAR:
            log.info("closed form ill-conditioned at t1=%g (|S01| = %.17g); using the 2x2 pencil", t1, abs(S01))
            return numeric_single_step_population(spec, state, t1)
        try:
            aux = single_step_aux(H00, H01, S01, spec.Q)
        except DegenerateInputError as exc:
            log.info("closed form unavailable at t1=%g (%s); using the 2x2 pencil", t1, exc)
        else:
            return aux.population(spec.energies, t1)
    return numeric_single_step_population(spec, state, t1)


def chi_of_t(spec: Spectrum, t1: float) -> float:
    """Phase offset ``chi(t1)`` for the uniform state."""
    from .states import uniform_state

    H00, H01, S01 = single_step_elements(spec, uniform_state(spec.Q), t1)
    return single_step_aux(H00, H01, S01, spec.Q).chi


def chi_slope_at_zero(spec: Spectrum, h: float | None = None) -> float:
    """``lim_{t->0+} chi'(t)`` from symmetric differences, Richardson-extrapolated in t.

    The slope is sampled at ``t0 = h`` and ``t0 = h/2`` (symmetric stencils of
    half-width ``t0/2``) and the linear-in-``t0`` error is cancelled. The
    default ``h`` puts ``t0 * width`` at 4e-3, small enough to sit in the
    linear regime and large enough to keep cancellation error out.
    """
    if h is None:
        h = 4e-3 / spec.width

    def slope(t0):
        d = 0.5 * t0
        return (_unwrapped_chi(spec, t0 + d, t0) - _unwrapped_chi(spec, t0 - d, t0)) / (2 * d)

    return 2.0 * slope(0.5 * h) - slope(h)


def _unwrapped_chi(spec: Spectrum, t: float, ref_t: float) -> float:
    ref = chi_of_t(spec, ref_t)
    return ref + wrap_angle(chi_of_t(spec, t) - ref)


def _is_linear_family(spec: Spectrum) -> bool:
    d = np.diff(spec.energies)
    return bool(np.all(np.abs(d - d[0]) <= 1e-9 * abs(d[0]))) and d[0] > 0


def _profile_minimum(spec: Spectrum, state: StateVector, t1: float) -> float:
    grid = TimeGrid([0.0, t1])
    result = solve(assemble(spec, state, grid))
    c = result.coefficient_vectors[:, 0]
    lo, hi = spec.energies[0], spec.energies[-1]

    def profile(E):
        return np.abs(c[0] + c[1] * np.exp(-1j * np.asarray(E) * t1)) ** 2

    grid_e = np.linspace(lo, hi, 2049)
    values = profile(grid_e)
    if values.max() - values.min() < 1e-14 * max(values.max(), 1e-300):
        raise NumericalError("population profile is flat; no suppression to locate")
    k = int(np.argmin(values))
    a, b = grid_e[max(k - 1, 0)], grid_e[min(k + 1, grid_e.size - 1)]
    if a == b:
        return float(grid_e[k])
    res = optimize.minimize_scalar(profile, bounds=(a, b), method="bounded", options={"xatol": 1e-12 * (hi - lo)})
    return float(res.x)


def suppression_center(spec: Spectrum, state: StateVector | None = None) -> float:
    """Fractional position ``x`` in [0, 1] of the small-step suppression.

    The suppressed energy is ``E_x = (1 - x) E_1 + x E_Q``. For a linear
    spectrum with a uniform state this uses ``x = -(chi'(0) + dE) / ((Q-1) dE)``;
    for anything else the continuous profile ``|c0 + c1 exp(-i E t1)|^2`` is
    minimized at two small ``t1`` and extrapolated to ``t1 -> 0``.
    """
    from .states import uniform_state

    if state is None:
        state = uniform_state(spec.Q)
    _check_pair(state, spec)
    if spec.width <= 0:
        raise NumericalError("spectrum has zero width")
    if _is_linear_family(spec) and is_uniform(state):
        dE = spec.mean_spacing
        # chi is invariant under a shift of the spectrum only up to E_shift * t;
        # the formula assumes E_n = n dE
        shifted = Spectrum(spec.energies - spec.energies[0] + dE)
        slope = chi_slope_at_zero(shifted)
        x = -(slope + dE) / ((spec.Q - 1) * dE)
    else:
        h = 0.02 / spec.width
        e1 = _profile_minimum(spec, state, h)
        e2 = _profile_minimum(spec, state, 0.5 * h)
        Ex = 2.0 * e2 - e1
        x = (Ex - spec.energies[0]) / spec.width
    return float(min(max(x, 0.0), 1.0))


def suppression_energy(spec: Spectrum, state: StateVector | None = None) -> float:
    x = suppression_center(spec, state)
    return float((1.0 - x) * spec.energies[0] + x * spec.energies[-1])


def suppression_index(spec: Spectrum, state: StateVector | None = None) -> int:
    """1-based index of the level closest to the suppression energy."""
    Ex = suppression_energy(spec, state)
    return int(np.argmin(np.abs(spec.energies - Ex))) + 1


# --------------------------------------------------------------------------
# continuum matrix elements


def _quad_complex(f, lo, hi):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            re, _ = integrate.quad(lambda e: f(e).real, lo, hi, limit=400)
            im, _ = integrate.quad(lambda e: f(e).imag, lo, hi, limit=400)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from exc
    return complex(re, im)


def continuum_elements(dos: DensityOfStates, t1: float, *, quadrature: bool = False) -> tuple[complex, complex]:
    """``(H01, S01)`` with sums over levels replaced by integrals against ``omega / Q``.

    Closed forms are used for the flat, semicircle and untruncated Gaussian
    densities; a truncated Gaussian (or ``quadrature=True``) goes through
    adaptive quadrature.
    """
    if not math.isfinite(t1):
        raise InvalidParameterError(f"t1 must be finite, got {t1}")
    if quadrature or (dos.kind is DOSKind.GAUSSIAN and dos.truncate is not None):
        lo, hi = dos.support
        if math.isinf(lo):
            lo, hi = dos.center - 40 * dos.scale, dos.center + 40 * dos.scale
        w = lambda e: float(dos.density(e)) / dos.Q  # noqa: E731
        S01 = _quad_complex(lambda e: w(e) * np.exp(-1j * e * t1), lo, hi)
        H01 = _quad_complex(lambda e: e * w(e) * np.exp(-1j * e * t1), lo, hi)
        return H01, S01
    c, s = dos.center, dos.scale
    shift = np.exp(-1j * c * t1)
    if dos.kind is DOSKind.FLAT:
        x = s * t1
        if abs(x) < 1e-4:
            s0 = 1.0 - x * x / 6.0
            h0 = -1j * s * s * t1 / 3.0
        else:
            s0 = math.sin(x) / x
            h0 = 1j * (x * math.cos(x) - math.sin(x)) / (x * t1)
    elif dos.kind is DOSKind.SEMICIRCLE:
        x = s * t1
        if abs(x) < 1e-6:
            s0 = 1.0 - x * x / 8.0
            h0 = -1j * s * s * t1 / 4.0
        else:
            s0 = 2.0 * special.j1(x) / x
            h0 = -2j * special.jv(2, x) / t1
    else:
        s0 = math.exp(-0.5 * (s * t1) ** 2)
        h0 = -1j * s * s * t1 * s0
    S01 = complex(shift * s0)
    H01 = complex(shift * (c * s0 + h0))
    return H01, S01


def continuum_population(dos: DensityOfStates, t1: float, energies: np.ndarray) -> np.ndarray:
    """Single-step populations at ``energies`` using continuum matrix elements."""
    H01, S01 = continuum_elements(dos, t1)
    aux = single_step_aux(dos.mean_energy(), H01, S01, dos.Q)
    return aux.population(energies, t1)


# --------------------------------------------------------------------------
# nested phase recursion


def nested_coefficients(c: np.ndarray) -> np.ndarray:
    """Ratios ``c_j / c_{j-1}`` so that ``sum_j c_j U(t_j)`` nests as ``1 + r_1 U(dt_1)(1 + r_2 U(dt_2)(...))``."""
    c = np.asarray(c, dtype=complex)
    if np.any(c[:-1] == 0):
        raise DegenerateInputError("a vanishing coefficient breaks the nested form")
    return c[1:] / c[:-1]


def phase_trajectory(spec: Spectrum, grid: TimeGrid, coeffs, n: int) -> np.ndarray:
    """Moebius recursion ``z_j = 1 + r_{N-j+1} exp(-i E_n dt_{N-j+1}) z_{j-1}``, ``z_0 = 1``.

    ``coeffs`` are the nested ratios ``r_1..r_N`` and ``n`` is 1-based.
    Returns ``z_0..z_N``.
    """
    r = np.asarray(coeffs, dtype=complex)
    if r.size != grid.N_T:
        raise DimensionMismatchError(f"{r.size} coefficients for a grid with N_T = {grid.N_T}")
    if not 1 <= n <= spec.Q:
        raise IndexOutOfRangeError(f"level index {n} outside 1..{spec.Q}")
    E = spec.energies[n - 1]
    rot = phases(np.array([E]), grid.steps)[:, 0]
    N = grid.N_T
    z = np.empty(N + 1, dtype=complex)
    z[0] = 1.0
    for j in range(1, N + 1):
        k = N - j  # zero-based index of r_{N-j+1} and dt_{N-j+1}
        z[j] = 1.0 + r[k] * rot[k] * z[j - 1]
    return z
