import numpy as np
import pytest

from covariance import UnitaryRep, covariance_residual
from errors import InvalidTemperatureError, TruncationTooSmallError
from hilbert import DensityMatrix, coherent_state, fock_ops, leakage, random_density_matrix
from lindblad import evolve_expm, evolve_expm_times
from models import (DHOParams, ShiftCovParams, cat_state, coherence_ratio, dho_cat_coherence,
                    dho_generator, dho_moment_oracles, gibbs_state, shift_covariant_generator,
                    thermal_occupation, thermal_occupation_coth)


@pytest.mark.parametrize('x', [0.1, 1.0, 5.0])
def test_thermal_occupation_forms_agree(x):
    assert thermal_occupation(x, 1.0) == pytest.approx(thermal_occupation_coth(x, 1.0), rel=1e-12)


def test_thermal_occupation_limits():
    assert thermal_occupation(1.0, np.inf) == 0.0
    assert thermal_occupation(1.0, 1e-3) == pytest.approx(1e3 - 0.5, rel=1e-6)
    with pytest.raises(InvalidTemperatureError):
        thermal_occupation(1.0, 0.0)
    with pytest.raises(InvalidTemperatureError):
        DHOParams(omega=1.0, eta=0.1, beta=-1.0)


def test_moments_follow_closed_forms():
    p = DHOParams(omega=1.0, eta=0.2, beta=2.0, dim=20)
    rho0 = DensityMatrix.pure(p.space, coherent_state(p.space, 1.0 + 0.5j))
    gen = dho_generator(p)
    times = np.linspace(0.0, 10.0, 6)
    a_t, n_t = dho_moment_oracles(p, rho0, times)
    a, _, N = fock_ops(p.space)
    for rho, ea, en in zip(evolve_expm_times(gen, rho0, times), a_t, n_t):
        assert abs(np.trace(rho.matrix @ a.matrix) - ea) < 1e-6
        assert abs(np.trace(rho.matrix @ N.matrix).real - en) < 1e-6
        assert leakage(rho) < 1e-8


def test_gibbs_state_is_stationary():
    p = DHOParams(omega=1.0, eta=0.3, beta=0.8, dim=15)
    gen = dho_generator(p)
    w = gibbs_state(p.space, p.omega, p.beta)
    assert np.max(np.abs(gen.apply(w.matrix))) < 1e-12


def test_relaxation_to_gibbs(rng):
    p = DHOParams(omega=1.0, eta=1.0, beta=1.5, dim=12)
    w = gibbs_state(p.space, p.omega, p.beta)
    rho = evolve_expm(dho_generator(p), random_density_matrix(p.space, rng), 60.0)
    assert np.max(np.abs(rho.matrix - w.matrix)) < 1e-8


def test_truncation_guard():
    with pytest.raises(TruncationTooSmallError):
        ShiftCovParams(eta_0=0.1, eta_m=(0.1, 0.1, 0.1), dim=6)
    with pytest.raises(ValueError, match='nonnegative'):
        ShiftCovParams(eta_0=-0.1, dim=6)


def test_shift_covariant_generator_is_phase_covariant(rng):
    p = ShiftCovParams(eta_0=0.05, eta_m=(0.3, 0.1, 0.02), omega=1.0, beta=1.0, dim=12)
    gen = shift_covariant_generator(p)
    samples = [random_density_matrix(gen.space, rng) for _ in range(3)]
    assert covariance_residual(gen, UnitaryRep('U1_phase', gen.space), [0.4, 2.5], samples) < 1e-10
    # the one-photon channel alone is the damped oscillator
    single = shift_covariant_generator(ShiftCovParams(eta_0=0.0, eta_m=(0.3,), beta=1.0, dim=12))
    dho = dho_generator(DHOParams(omega=1.0, eta=0.3, beta=1.0, dim=12))
    rho = samples[0].matrix
    assert np.allclose(single.apply(rho), dho.apply(rho), atol=1e-12)


def test_fresh_cat_has_full_coherence():
    p = DHOParams(omega=1.0, eta=0.5, dim=30)
    rho = cat_state(p.space, 1.5, -1.5)
    assert coherence_ratio(rho, p.space, 1.5, -1.5) == pytest.approx(1.0, abs=1e-10)
    assert dho_cat_coherence(1.5, -1.5, 0.5, 0.0) == 1.0


@pytest.mark.parametrize('t', [0.5, 2.0])
def test_cat_coherence_decays_as_predicted(t):
    omega, eta, alpha = 1.0, 0.5, 1.5
    p = DHOParams(omega=omega, eta=eta, dim=30)
    rho_t = evolve_expm(dho_generator(p), cat_state(p.space, alpha, -alpha), t)
    decay = np.exp(-1j * omega * t - 0.5 * eta * t)
    numeric = coherence_ratio(rho_t, p.space, alpha * decay, -alpha * decay)
    assert numeric == pytest.approx(dho_cat_coherence(alpha, -alpha, eta, t), abs=1e-8)
