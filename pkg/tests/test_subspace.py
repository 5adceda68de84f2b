import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import linalg

from rtkrylov.errors import EmptySubspaceError, IndexOutOfRangeError, InvalidParameterError
from rtkrylov.spectra import Spectrum, linear_spectrum
from rtkrylov.states import basis_state, evolve, random_state, uniform_state
from rtkrylov.subspace import SubspaceMatrices, TimeGrid, assemble, residual_norms, ritz_state, solve


def brute_matrices(spec, state, times):
    """Explicit evolved vectors and inner products."""
    vecs = np.array([evolve(state, spec, t).amplitudes for t in times])
    S = vecs.conj() @ vecs.T
    H = (vecs.conj() * spec.energies) @ vecs.T
    return H, S


def test_grid_validation():
    with pytest.raises(InvalidParameterError):
        TimeGrid([0.1, 0.2])
    with pytest.raises(InvalidParameterError):
        TimeGrid([0.0, 0.2, 0.2])
    g = TimeGrid([0.0, 1.0, 3.0])
    assert g.N_T == 2 and not g.is_linear
    assert np.allclose(g.steps, [1.0, 2.0])
    assert g.prefix(1).times.tolist() == [0.0, 1.0]
    with pytest.raises(IndexOutOfRangeError):
        g.prefix(3)


@pytest.mark.parametrize("times", [np.arange(6) * 0.37, np.array([0.0, 0.2, 0.9, 1.1, 2.5])])
def test_assembly_matches_explicit_inner_products(times):
    spec = Spectrum(np.sort(np.random.default_rng(0).uniform(0, 5, 12)))
    state = random_state(12, 2)
    mats = assemble(spec, state, TimeGrid(times))
    H, S = brute_matrices(spec, state, times)
    assert np.allclose(mats.S, S, atol=1e-13)
    assert np.allclose(mats.H, H, atol=1e-12)


@given(st.integers(2, 40), st.floats(0.01, 3.0), st.integers(1, 8))
def test_matrices_hermitian_with_unit_diagonal(Q, dt, N):
    spec = linear_spectrum(Q, 1.0)
    mats = assemble(spec, random_state(Q, Q), TimeGrid(dt * np.arange(N + 1)))
    assert np.array_equal(mats.S, mats.S.conj().T)
    assert np.array_equal(mats.H, mats.H.conj().T)
    assert np.all(mats.S.diagonal() == 1.0)
    assert np.all(np.linalg.eigvalsh(mats.S) >= -1e-12)


def test_linear_grid_is_toeplitz():
    mats = assemble(linear_spectrum(9, 1.0), uniform_state(9), TimeGrid(0.3 * np.arange(5)))
    for k in range(1, 5):
        d = np.diagonal(mats.S, k)
        assert np.allclose(d, d[0], atol=1e-15)


def test_solve_matches_scipy_generalized_eigh_when_well_conditioned():
    spec = Spectrum(np.array([0.3, 1.1, 2.0, 2.9, 4.4]))
    mats = assemble(spec, random_state(5, 0), TimeGrid([0.0, 0.5, 1.3]))
    ref = linalg.eigh(mats.H, mats.S, eigvals_only=True)
    res = solve(mats)
    assert np.allclose(res.ritz_values, ref, atol=1e-10)
    assert res.retained_rank == 3
    assert np.all(residual_norms(mats, res) < 1e-10)


@given(st.integers(3, 25), st.integers(0, 10_000))
def test_ritz_values_lie_inside_spectrum(Q, seed):
    spec = Spectrum(np.sort(np.random.default_rng(seed).uniform(-2, 3, Q)) + np.arange(Q) * 1e-3)
    mats = assemble(spec, random_state(Q, seed), TimeGrid(0.4 * np.arange(4)))
    res = solve(mats)
    # forward error of the pencil grows like eps / (smallest retained singular value)
    sv = np.linalg.svd(mats.S, compute_uv=False)[: res.retained_rank]
    w = (1e-9 + 100 * np.finfo(float).eps * sv[0] / sv[-1]) * spec.width
    assert res.ritz_values[0] >= spec.ground - w
    assert res.ritz_values[-1] <= spec.energies[-1] + w


def test_truncation_removes_null_directions():
    # two levels span at most two dimensions
    spec = Spectrum(np.array([1.0, 2.0]))
    mats = assemble(spec, uniform_state(2), TimeGrid(0.7 * np.arange(4)))
    res = solve(mats)
    assert res.retained_rank == 2
    assert np.allclose(res.ritz_values, [1.0, 2.0], atol=1e-9)
    assert res.discarded_singular_values.size == 2


def test_absolute_threshold_and_empty_subspace():
    mats = assemble(linear_spectrum(4, 1.0), uniform_state(4), TimeGrid([0.0, 0.5]))
    with pytest.raises(EmptySubspaceError):
        solve(mats, 10.0, absolute=True)
    with pytest.raises(InvalidParameterError):
        solve(mats, -1.0)


def test_ritz_state_energy_matches_ritz_value():
    spec = linear_spectrum(10, 1.0)
    state = random_state(10, 5)
    grid = TimeGrid(0.45 * np.arange(4))
    res = solve(assemble(spec, state, grid))
    psi = ritz_state(res, 0, spec, state, grid)
    w = np.abs(psi.amplitudes) ** 2
    assert math.isclose(float(w @ spec.energies), res.ground, rel_tol=1e-10)


def test_basis_state_gives_exact_energy():
    spec = linear_spectrum(5, 1.0)
    res = solve(assemble(spec, basis_state(5, 3), TimeGrid([0.0, 0.4, 0.8])))
    assert res.retained_rank == 1
    assert math.isclose(res.ground, 3.0, rel_tol=1e-14)


def test_matrices_json_round_trip():
    mats = assemble(linear_spectrum(4, 1.0), uniform_state(4), TimeGrid([0.0, 0.5, 1.5]))
    back = SubspaceMatrices.from_json(mats.to_json(1e-10))
    assert np.array_equal(back.H, mats.H) and np.array_equal(back.S, mats.S)
    assert json.loads(mats.to_json(1e-10))["s_sv"] == 1e-10
