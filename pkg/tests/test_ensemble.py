import math

import numpy as np
import pytest

from rtkrylov.ensemble import (
    SpectrumGenerator,
    StatePolicy,
    convergence_envelope,
    jensen_gap,
    resolve_threads,
    small_spacing_fit,
    spacing_diagnostics,
)
from rtkrylov.errors import InsufficientSamplesError, InvalidParameterError
from rtkrylov.rng import make_rng
from rtkrylov.solver import GridSpec, kappa_to_t1, vqpe_run
from rtkrylov.spectra import DensityOfStates, SpacingDistribution, linear_spectrum
from rtkrylov.states import uniform_state

GRID10 = GridSpec.linear(1.0, 10)  # t1 replaced per spectrum when kappa is given


def test_single_realization_collapses_envelope():
    gen = SpectrumGenerator.spacing(50, SpacingDistribution("uniform", 1.0, 0.5))
    env = convergence_envelope(gen, GRID10, 1, 7, kappa=0.4)
    assert np.array_equal(env.min, env.max) and np.array_equal(env.min, env.mean)
    assert np.all(env.std == 0)


def test_envelope_invariants_and_thread_determinism():
    gen = SpectrumGenerator.spacing(80, SpacingDistribution("exponential", 1.0))
    a = convergence_envelope(gen, GRID10, 12, 3, kappa=0.4, threads=1)
    b = convergence_envelope(gen, GRID10, 12, 3, kappa=0.4, threads=4)
    for f in ("min", "max", "mean", "std", "benchmark"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert np.all(a.min <= a.mean + 1e-12) and np.all(a.mean <= a.max + 1e-12)
    assert np.all(a.std >= 0) and a.realizations == 12 and a.failures == 0


def test_benchmark_is_linear_run():
    gen = SpectrumGenerator.spacing(60, SpacingDistribution("bernoulli", 1.0, 0.5), E1=1.0)
    env = convergence_envelope(gen, GRID10, 2, 0, kappa=0.4)
    spec = linear_spectrum(60, 1.0)
    ref = vqpe_run(spec, uniform_state(60), GridSpec.linear(kappa_to_t1(0.4, spec), 10), 0.0).errors
    assert np.allclose(env.benchmark, ref, atol=1e-12)


@pytest.mark.parametrize("kind,a", [("bernoulli", 0.5), ("uniform", 0.5), ("exponential", None)])
def test_benchmark_inside_envelope(kind, a):
    dist = SpacingDistribution(kind, 1.0, a) if a is not None else SpacingDistribution(kind, 1.0)
    env = convergence_envelope(SpectrumGenerator.spacing(1000, dist), GRID10, 1000, 2024, kappa=0.4)
    assert env.failures == 0
    assert np.all(env.contains_benchmark())


def test_gaussian_dos_converges_faster_than_semicircle():
    Q = 1000
    gauss = SpectrumGenerator.from_dos(Q, DensityOfStates.gaussian(Q, 1.0))
    semi = SpectrumGenerator.from_dos(Q, DensityOfStates.semicircle(Q))
    g = convergence_envelope(gauss, GRID10, 30, 11, kappa=0.4)
    s = convergence_envelope(semi, GRID10, 30, 11, kappa=0.4)
    assert g.mean[10] < s.mean[10]


def test_gue_drifts_from_benchmark():
    env = convergence_envelope(SpectrumGenerator.gue(1000), GRID10, 30, 5, kappa=0.4)
    assert abs(env.mean[10] - env.benchmark[10]) > env.std[10]


def test_random_initial_states_spread_shrinks_with_Q():
    dist = SpacingDistribution("bernoulli", 1.0, 0.0)
    widths = []
    for Q in (100, 1000):
        env = convergence_envelope(SpectrumGenerator.spacing(Q, dist), GRID10, 20, 9, "random", kappa=0.4)
        widths.append(env.std[10] / env.mean[10])
    assert widths[1] < widths[0]


def test_failures_are_recorded_not_fatal(monkeypatch):
    gen = SpectrumGenerator.spacing(30, SpacingDistribution("uniform", 1.0, 0.5))
    import rtkrylov.ensemble as ens
    from rtkrylov.errors import EmptySubspaceError

    real = ens.vqpe_run
    calls = {"n": 0}

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 2:
            raise EmptySubspaceError("forced")
        return real(*args, **kw)

    monkeypatch.setattr(ens, "vqpe_run", flaky)
    env = convergence_envelope(gen, GRID10, 4, 1, kappa=0.4)
    assert env.failures == 1 and env.realizations == 3
    assert "forced" in env.failure_messages[0]


def test_validation():
    gen = SpectrumGenerator.spacing(30, SpacingDistribution("uniform", 1.0, 0.5))
    with pytest.raises(InvalidParameterError):
        convergence_envelope(gen, GRID10, 0, 1)
    with pytest.raises(InvalidParameterError):
        SpectrumGenerator("spacing", 30)
    with pytest.raises(InvalidParameterError):
        resolve_threads(0)


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("RTKRYLOV_THREADS", "3")
    assert resolve_threads(None) == 3
    monkeypatch.delenv("RTKRYLOV_THREADS")
    assert resolve_threads(None) == 1


# ---- phase averaging -------------------------------------------------------


def test_jensen_gap_ground_level():
    g = jensen_gap(SpacingDistribution("exponential", 1.0), 1, 0.3)
    assert g.lhs == 0.0 and g.rhs == 0.0


def test_jensen_gap_bound_holds():
    g = jensen_gap(SpacingDistribution("exponential", 1.0), 50, 0.02, samples=100_000, seed=1)
    assert g.lhs <= g.rhs + 3 * g.stderr


def test_jensen_gap_is_second_order_in_dt():
    dist = SpacingDistribution("uniform", 1.0, 0.5)
    a = jensen_gap(dist, 10, 0.02, samples=200_000, seed=2)
    b = jensen_gap(dist, 10, 0.01, samples=200_000, seed=2)
    assert b.rhs == pytest.approx(a.rhs / 4)
    assert 2.5 < a.lhs / b.lhs < 6.0


# ---- spacing statistics ----------------------------------------------------


@pytest.mark.parametrize("kind", ["uniform", "exponential", "wigner", "bernoulli"])
def test_self_consistency_pass_rate(kind):
    dist = SpacingDistribution(kind, 1.0)
    passes = sum(spacing_diagnostics(dist.sample(make_rng(77, t), 10_000), dist).ks_pass for t in range(100))
    assert passes >= 95


def test_wrong_law_fails():
    dist = SpacingDistribution("wigner", 1.0)
    samples = SpacingDistribution("exponential", 1.0).sample(make_rng(1), 10_000)
    assert not spacing_diagnostics(samples, dist).ks_pass


def test_degenerate_law():
    dist = SpacingDistribution("uniform", 2.0, 0.0)
    d = spacing_diagnostics(dist.sample(make_rng(0), 500), dist)
    assert d.variance == 0 and d.eta_hat == 0 and d.ks_pass


def test_wigner_vanishes_quadratically():
    samples = SpacingDistribution("wigner", 1.0).sample(make_rng(3), 2_000_000)
    c, k = small_spacing_fit(samples, 0.2)
    assert c > 0 and abs(k - 2.0) < 0.15
    # surmise density near zero: (32 / pi^2) s^2
    assert c == pytest.approx(32 / math.pi**2, rel=0.15)


def test_insufficient_samples():
    with pytest.raises(InsufficientSamplesError):
        spacing_diagnostics(np.ones(50), SpacingDistribution("uniform", 1.0))
