import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rtkrylov.bounds import (
    OMEGA,
    auto_dt,
    cor12_bound,
    epsilon_tilde,
    gap_growth_inequality,
    rogers_szego,
    rogers_szego_binomial,
    rs_growth_monotone,
    rs_window_check,
    thm11_bound,
    thm11_reports,
    validate_dt,
    window_conditions,
)
from rtkrylov.errors import InvalidParameterError, WindowViolationError, ZeroOverlapError
from rtkrylov.rng import make_rng
from rtkrylov.spectra import Spectrum, gapped_linear_spectrum, linear_spectrum
from rtkrylov.states import basis_state, concentrated_state, random_state, uniform_state


def test_low_degree_polynomials():
    theta = 0.7
    z = -np.exp(-1j * theta)
    assert rogers_szego(0, 1.0, theta) == 1
    assert abs(rogers_szego(1, 1.0, theta) - (z + 1)) < 1e-15
    q = 0.6
    zq = z / math.sqrt(q)
    # W_2 = z^2 + (1 + q) z + 1 in the Gaussian-binomial form
    expected = zq**2 + (1 + q) * zq + 1
    assert abs(rogers_szego(2, q, theta) - expected) < 1e-14


@pytest.mark.parametrize("j", [0, 1, 5, 20])
def test_in_phase_value(j):
    assert rogers_szego(j, 1.0, -math.pi) == pytest.approx(2.0**j, rel=1e-14)


def test_recursion_matches_binomial_sum():
    theta = make_rng(11).uniform(-math.pi, math.pi, 100)
    for j in range(21):
        dev = np.abs(rogers_szego(j, 1.0, theta) - rogers_szego_binomial(j, theta))
        # magnitudes reach 2^j; compare relative to that scale
        assert np.max(dev) / 2.0**j <= 1e-10


def test_invalid_q_and_degree():
    with pytest.raises(InvalidParameterError):
        rogers_szego(3, 0.0, 0.1)
    with pytest.raises(InvalidParameterError):
        rogers_szego(3, 1.5, 0.1)
    with pytest.raises(InvalidParameterError):
        rogers_szego(-1, 1.0, 0.1)
    with pytest.raises(InvalidParameterError):
        rs_window_check(0)


def test_window_tends_to_a_third_of_pi():
    assert abs(rs_window_check(10) - math.pi / 3) < 0.01
    assert abs(rs_window_check(40) - math.pi / 3) < abs(rs_window_check(10) - math.pi / 3) + 1e-12


@pytest.mark.parametrize("j", [1, 3, 6, 10])
def test_window_boundary_has_unit_modulus(j):
    om = rs_window_check(j)
    if om < math.pi:
        assert abs(abs(rogers_szego(j, 1.0, om)) - 1.0) < 1e-6
        assert abs(abs(rogers_szego(j, 1.0, -om)) - 1.0) < 1e-6


@pytest.mark.parametrize("j", range(1, 11))
def test_growth_outside_window(j):
    assert rs_growth_monotone(j)


def test_gap_growth_concavity_inequality():
    eps = np.linspace(0.0, 1.0, 1000)
    lhs, rhs = gap_growth_inequality(eps)
    assert np.all(lhs >= rhs - 1e-12)


# ---- window and step -------------------------------------------------------


def test_auto_dt_matches_closed_form():
    for spec in (linear_spectrum(100, 1.0), gapped_linear_spectrum(100, 1.0, 100.0), gapped_linear_spectrum(40, 1.0, 5.0)):
        E = spec.energies
        expected = 2 * math.pi / (3 * max(E[-1] - E[1], E[1] - E[0]))
        assert auto_dt(spec) == pytest.approx(expected, rel=1e-12)
        assert all(window_conditions(spec, auto_dt(spec)))


def test_epsilon_tilde_maximal_value():
    spec = Spectrum(np.array([0.0, 1.0]))
    assert epsilon_tilde(spec, 2 * math.pi / 3) == pytest.approx(2.0)


def test_epsilon_tilde_in_range_for_admissible_steps():
    rng = make_rng(5)
    for spec in (linear_spectrum(100, 1.0), gapped_linear_spectrum(100, 1.0, 100.0)):
        hi = auto_dt(spec)
        lo = 2 * OMEGA / spec.width
        for dt in rng.uniform(lo, hi, 50):
            validate_dt(spec, dt)
            assert 1.0 <= epsilon_tilde(spec, dt) <= 2.0


def test_window_violation():
    spec = linear_spectrum(100, 1.0)
    with pytest.raises(WindowViolationError):
        validate_dt(spec, 3 * auto_dt(spec))
    with pytest.raises(WindowViolationError):
        thm11_bound(spec, uniform_state(100), 0.1 * auto_dt(spec), 3)


# ---- reports ----------------------------------------------------------------


@pytest.mark.parametrize(
    "spec",
    [linear_spectrum(100, 1.0), gapped_linear_spectrum(100, 1.0, 100.0), gapped_linear_spectrum(100, 1.0, 5.0)],
    ids=["linear", "gap100", "gap5"],
)
def test_measured_error_below_bound(spec):
    reports = thm11_reports(spec, uniform_state(spec.Q), "auto", 10)
    assert all(r.satisfied for r in reports)
    assert all(1.0 <= r.epsilon_tilde <= 2.0 for r in reports)


def test_bound_is_geometric_in_steps():
    spec = linear_spectrum(100, 1.0)
    reps = thm11_reports(spec, uniform_state(100), "auto", 6)
    ratio = reps[0].epsilon_tilde ** -2
    for a, b in zip(reps, reps[1:]):
        assert b.bound_value / a.bound_value == pytest.approx(ratio, rel=1e-13)


def test_ground_basis_state_has_zero_bound_and_error():
    spec = linear_spectrum(30, 1.0)
    r = thm11_bound(spec, basis_state(30, 1), "auto", 4)
    assert r.bound_value == 0.0 and abs(r.measured_error) < 1e-12 and r.satisfied


def test_zero_overlap_rejected():
    with pytest.raises(ZeroOverlapError):
        thm11_bound(linear_spectrum(10, 1.0), basis_state(10, 4), "auto", 2)


def test_first_corollary_level_equals_theorem():
    spec = linear_spectrum(50, 1.0)
    a = thm11_bound(spec, random_state(50, 1), "auto", 5)
    b = cor12_bound(spec, random_state(50, 1), "auto", 1, 5)
    assert a == b


def test_second_level_bound_holds():
    spec = linear_spectrum(50, 1.0)
    for j in range(3, 9):
        r = cor12_bound(spec, uniform_state(50), "auto", 2, j)
        assert r.satisfied, r


def test_second_level_basis_state():
    spec = linear_spectrum(20, 1.0)
    r = cor12_bound(spec, basis_state(20, 2), "auto", 2, 3)
    assert r.bound_value == 0.0 and abs(r.measured_error) < 1e-12 and r.satisfied


def test_corollary_validates_indices():
    spec = linear_spectrum(20, 1.0)
    with pytest.raises(InvalidParameterError):
        cor12_bound(spec, uniform_state(20), "auto", 3, 2)


@given(st.integers(0, 10_000))
def test_random_concentrated_states_respect_bound(seed):
    rng = make_rng(seed)
    Q = int(rng.integers(10, 80))
    weights = {n: float(w) for n, w in zip(range(1, Q + 1), rng.uniform(0.05, 1.0, Q))}
    spec = linear_spectrum(Q, 1.0)
    r = thm11_bound(spec, concentrated_state(Q, weights), "auto", int(rng.integers(1, 8)))
    assert r.satisfied


def test_report_serializes():
    r = thm11_bound(linear_spectrum(10, 1.0), uniform_state(10), "auto", 2)
    d = r.to_dict()
    assert set(d) >= {"j", "measured_error", "bound_value", "epsilon_tilde", "cos2_Xi", "satisfied", "margin"}
