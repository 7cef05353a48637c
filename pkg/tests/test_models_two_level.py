import numpy as np
import pytest

from errors import InvalidTemperatureError
from hilbert import DensityMatrix, random_density_matrix
from lindblad import evolve_expm, generator_superop
from models import (RotCovParams, TwoLevelParams, gibbs_state, rotation_covariant_explicit,
                    rotation_covariant_generator, spherical_tensor_ops, two_level_generator,
                    two_level_oracles)


@pytest.mark.parametrize('n_beta', [0.0, 0.5, 2.0])
def test_bloch_solution(n_beta, rng):
    p = TwoLevelParams.from_n_beta(1.0, 0.4, n_beta)
    gen = two_level_generator(p)
    rho0 = random_density_matrix(p.space, rng)
    for t in [0.3, 1.0, 4.0]:
        rho_t = evolve_expm(gen, rho0, t).matrix
        p_e, coh = two_level_oracles(p, rho0, t)
        assert rho_t[1, 1].real == pytest.approx(p_e, abs=1e-12)
        assert abs(rho_t[1, 0] - coh) < 1e-12


@pytest.mark.parametrize('n_beta', [0.0, 0.5, 2.0])
def test_asymptote_is_gibbs(n_beta):
    p = TwoLevelParams.from_n_beta(1.0, 0.4, n_beta)
    excited = DensityMatrix.pure(p.space, np.array([0.0, 1.0]))
    rho = evolve_expm(two_level_generator(p), excited, 200.0).matrix
    assert rho[1, 1].real == pytest.approx(n_beta / (2 * n_beta + 1), abs=1e-12)
    w = gibbs_state(p.space, p.omega, p.beta)
    assert np.max(np.abs(two_level_generator(p).apply(w.matrix))) < 1e-12


def test_n_beta_round_trip():
    p = TwoLevelParams.from_n_beta(2.0, 0.1, 0.75)
    assert p.n_beta == pytest.approx(0.75, rel=1e-12)
    assert p.eta_bar == pytest.approx(0.1 * 2.5)
    assert TwoLevelParams.from_n_beta(2.0, 0.1, 0.0).beta == np.inf
    with pytest.raises(InvalidTemperatureError):
        TwoLevelParams.from_n_beta(1.0, 0.1, -0.5)


def test_spherical_tensors(qubit):
    t_plus, t_zero, t_minus = spherical_tensor_ops(qubit)
    assert np.allclose(t_plus.matrix, -np.sqrt(2) * np.array([[0, 0], [1, 0]]))
    assert np.allclose(t_minus.matrix, np.sqrt(2) * np.array([[0, 1], [0, 0]]))
    assert np.allclose(t_zero.matrix, np.diag([-1, 1]))


@pytest.mark.parametrize('c', [(0.3, 0.2, 0.1), (0.0, 0.7, 0.0), (1.0, 0.0, 0.25)])
def test_explicit_form_matches_generator(c):
    p = RotCovParams(*c, hamiltonian_coeff=0.8)
    S = generator_superop(rotation_covariant_generator(p))
    assert np.max(np.abs(S.matrix - rotation_covariant_explicit(p).matrix)) < 1e-13


def test_reduces_to_thermal_bloch_generator():
    p = TwoLevelParams.from_n_beta(1.5, 0.6, 0.4)
    nb = p.n_beta
    rot = RotCovParams(c_minus=p.eta * (nb + 1) / 2, c_zero=0.0, c_plus=p.eta * nb / 2,
                       hamiltonian_coeff=0.5 * p.hbar * p.omega)
    a = generator_superop(rotation_covariant_generator(rot)).matrix
    b = generator_superop(two_level_generator(p)).matrix
    assert np.max(np.abs(a - b)) < 1e-13


def test_pure_dephasing(rng, qubit):
    p = RotCovParams(0.0, 0.3, 0.0)
    rho0 = random_density_matrix(qubit, rng)
    rho = evolve_expm(rotation_covariant_generator(p), rho0, 2.0).matrix
    assert np.allclose(np.diag(rho), np.diag(rho0.matrix), atol=1e-13)
    assert abs(rho[0, 1] - rho0.matrix[0, 1] * np.exp(-2 * 0.3 * 2.0)) < 1e-13


def test_negative_coefficient_rejected():
    with pytest.raises(ValueError, match='nonnegative'):
        RotCovParams(-0.1, 0.0, 0.0)
