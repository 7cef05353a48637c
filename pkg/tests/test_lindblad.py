from types import SimpleNamespace

import numpy as np
import pytest

from errors import InvalidHamiltonianError, NegativeTimeError, PositivityLossError, StiffnessFailure
from hilbert import (DensityMatrix, HilbertSpace, Operator, adjoint_superop, apply, choi_min_eigenvalue,
                     devectorize, gaussian_packet, pauli_ops, random_density_matrix, scale, trace_norm,
                     vectorize)
from lindblad import (LindbladGenerator, adjoint_generator, dyson_terms, effective_K, evolve_expm,
                      evolve_expm_times, evolve_ode, evolve_observable, generator_superop,
                      jump_superop, no_jump_superop, propagator)
from models import (DHOParams, QBMParams, TwoLevelParams, dho_generator, qbm_generator,
                    two_level_generator)


@pytest.fixture
def thermal_qubit():
    return two_level_generator(TwoLevelParams.from_n_beta(1.0, 0.7, 0.5))


@pytest.fixture
def decaying_qubit():
    return two_level_generator(TwoLevelParams(omega=1.0, eta=1.0))


def test_superop_matches_matrix_action(rng):
    gen = dho_generator(DHOParams(omega=1.0, eta=0.3, beta=1.0, dim=6))
    X = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    S = generator_superop(gen)
    assert np.allclose(devectorize(S.matrix @ vectorize(X), gen.space).matrix, gen.apply(X), atol=1e-12)
    assert np.allclose(no_jump_superop(gen).matrix + jump_superop(gen).matrix, S.matrix)


def test_trace_preservation_and_duality(thermal_qubit, rng):
    X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = random_density_matrix(thermal_qubit.space, rng).matrix
    assert abs(np.trace(thermal_qubit.apply(X))) < 1e-13
    lhs = np.trace(X.conj().T @ thermal_qubit.apply(rho))
    rhs = np.trace(thermal_qubit.adjoint_apply(X).conj().T @ rho)
    assert abs(lhs - rhs) < 1e-12
    S = generator_superop(thermal_qubit)
    assert np.allclose(adjoint_generator(thermal_qubit).matrix, S.matrix.conj().T)


def test_propagator_semigroup(thermal_qubit):
    t, s = 0.4, 1.1
    P = propagator(thermal_qubit, t + s).matrix
    assert np.allclose(P, propagator(thermal_qubit, t).matrix @ propagator(thermal_qubit, s).matrix, atol=1e-13)


def test_ode_agrees_with_expm(thermal_qubit, rng):
    rho0 = random_density_matrix(thermal_qubit.space, rng)
    a = evolve_expm(thermal_qubit, rho0, 2.0).matrix
    b = evolve_ode(thermal_qubit, rho0, 2.0, rel_tol=1e-10).matrix
    assert np.max(np.abs(a - b)) < 1e-7


def test_time_axis_matches_single_times(thermal_qubit, rng):
    rho0 = random_density_matrix(thermal_qubit.space, rng)
    times = [0.0, 0.5, 0.5, 1.0, 3.0]
    states = evolve_expm_times(thermal_qubit, rho0, times)
    assert len(states) == len(times)
    for t, s in zip(times, states):
        assert np.allclose(s.matrix, evolve_expm(thermal_qubit, rho0, t).matrix, atol=1e-12)


def test_heisenberg_picture_duality(thermal_qubit, rng):
    rho0 = random_density_matrix(thermal_qubit.space, rng)
    sx, _, _, _, _ = pauli_ops(thermal_qubit.space)
    t = 0.9
    schrodinger = np.trace(sx.matrix @ evolve_expm(thermal_qubit, rho0, t).matrix)
    heisenberg = np.trace(evolve_observable(thermal_qubit, sx, t).matrix @ rho0.matrix)
    assert abs(schrodinger - heisenberg) < 1e-12


def test_dyson_terms_sum_to_propagator(decaying_qubit):
    t = 1.3
    terms = dyson_terms(decaying_qubit, t, max_jumps=3)
    total = sum(T.matrix for T in terms)
    assert np.allclose(total, propagator(decaying_qubit, t).matrix, atol=1e-12)
    for T in terms:
        assert choi_min_eigenvalue(T) > -1e-12
    # sigma_- squares to zero, so at most one jump contributes
    assert np.max(np.abs(terms[2].matrix)) < 1e-12


def test_invalid_inputs(thermal_qubit, qubit):
    rho = DensityMatrix.maximally_mixed(qubit)
    with pytest.raises(NegativeTimeError):
        evolve_expm(thermal_qubit, rho, -0.1)
    with pytest.raises(NegativeTimeError):
        evolve_ode(thermal_qubit, rho, -1.0)
    with pytest.raises(ValueError, match='rel_tol'):
        evolve_ode(thermal_qubit, rho, 1.0, rel_tol=1e-2)
    with pytest.raises(InvalidHamiltonianError):
        LindbladGenerator(Operator(qubit, np.array([[0, 1], [0, 0]])), [])


def test_zero_time_returns_initial_state(thermal_qubit, qubit):
    rho = DensityMatrix.maximally_mixed(qubit)
    assert evolve_expm(thermal_qubit, rho, 0.0) is rho


def test_hamiltonian_only_evolution_is_unitary():
    space = HilbertSpace.qubit()
    _, _, sz, _, _ = pauli_ops(space)
    gen = LindbladGenerator(0.5 * sz, [])
    plus = DensityMatrix.pure(space, np.array([1.0, 1.0]) / np.sqrt(2))
    rho_t = evolve_expm(gen, plus, np.pi).matrix
    # half a period of the sigma_z precession maps |+> to |->
    assert np.allclose(rho_t, 0.5 * np.array([[1, -1], [-1, 1]]), atol=1e-12)


def test_effective_k_examples(qubit, rng):
    _, _, sz, _, sm = pauli_ops(qubit)
    closed = LindbladGenerator(0.5 * sz, [])
    assert np.allclose(effective_K(closed).matrix, 0.5j * sz.matrix)
    eta = 0.7
    decay = LindbladGenerator(Operator.zeros(qubit), [np.sqrt(eta) * sm])
    assert np.allclose(effective_K(decay).matrix, np.diag([0.0, eta / 2]))

    gen = dho_generator(DHOParams(omega=1.0, eta=0.3, beta=1.0, dim=6))
    K = effective_K(gen).matrix
    assert np.max(np.abs(K - np.diag(np.diag(K)))) < 1e-14
    rho = random_density_matrix(gen.space, rng).matrix
    split = -K @ rho - rho @ K.conj().T + sum(L.matrix @ rho @ L.matrix.conj().T for L in gen.lindblad_ops)
    assert np.allclose(split, devectorize(generator_superop(gen).matrix @ vectorize(rho), gen.space).matrix,
                       atol=1e-12)


def test_adjoint_superop_of_dho_generator(rng):
    gen = dho_generator(DHOParams(omega=1.0, eta=0.3, beta=1.0, dim=6))
    S = generator_superop(gen)
    S_adj = adjoint_superop(S)
    for _ in range(20):
        X = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        rho = random_density_matrix(gen.space, rng)
        lhs = np.trace(X.conj().T @ apply(S, rho).matrix)
        rhs = np.trace(apply(S_adj, Operator(gen.space, X)).matrix.conj().T @ rho.matrix)
        assert abs(lhs - rhs) < 1e-12


def test_ode_agrees_with_expm_on_qbm_grid():
    grid = HilbertSpace.grid1d(32, 0.25, x_min=-4.0)
    gen = qbm_generator(QBMParams(mass=1.0, eta=0.25, beta=2.0, grid=grid))
    rho0 = DensityMatrix.pure(grid, gaussian_packet(grid, 0.0, 0.5, 0.5))
    a = evolve_expm(gen, rho0, 0.5)
    b = evolve_ode(gen, rho0, 0.5, rel_tol=1e-10)
    assert trace_norm(a.matrix - b.matrix) < 1e-7
    assert abs(np.trace(b.matrix) - 1) < 1e-9


def test_solver_breakdown_is_a_stiffness_failure(thermal_qubit, qubit, monkeypatch):
    failed = SimpleNamespace(status=-1, message='Required step size is less than spacing between numbers.')
    monkeypatch.setattr('lindblad.solve_ivp', lambda *args, **kwargs: failed)
    with pytest.raises(StiffnessFailure, match='step size'):
        evolve_ode(thermal_qubit, DensityMatrix.maximally_mixed(qubit), 1.0)


def test_non_physical_propagator_reports_positivity_loss(decaying_qubit, qubit):
    # running the decay backwards pushes the ground population below zero after t = ln 2
    backwards = scale(generator_superop(decaying_qubit), -1.0)
    mixed = DensityMatrix.maximally_mixed(qubit)
    assert evolve_expm(decaying_qubit, mixed, 0.5, superop=backwards).matrix[1, 1].real > 0.5
    with pytest.raises(PositivityLossError):
        evolve_expm(decaying_qubit, mixed, 2.0, superop=backwards)
