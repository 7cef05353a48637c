import json

import numpy as np
import pytest

from covariance import (ResidualReport, ShiftIsometry, UnitaryRep, covariance_residual,
                        generalized_weyl_residual, povm_covariance_residual,
                        representation_residual, unitarity_residual, weyl_residual,
                        write_residual_reports)
from errors import OffLatticeShiftWarning, SpaceMismatchError
from hilbert import HilbertSpace, fock_ops, random_density_matrix, windowed_density_matrix
from lindblad import LindbladGenerator, generator_superop
from measurement import Region, gaussian_smearing, smeared_position_povm
from models import (DHOParams, QBMParams, RotCovParams, ShiftCovParams, TwoLevelParams,
                    dho_generator, qbm_generator, rotation_covariant_generator,
                    shift_covariant_generator, two_level_generator)


PHASES = [0.3, 1.7, np.pi]


@pytest.fixture
def fock_samples(rng):
    space = HilbertSpace.fock(10)
    return [random_density_matrix(space, rng) for _ in range(3)]


def test_dho_is_phase_covariant(fock_samples):
    gen = dho_generator(DHOParams(omega=1.0, eta=0.4, beta=1.2, dim=10))
    rep = UnitaryRep('U1_phase', gen.space)
    assert covariance_residual(gen, rep, PHASES, fock_samples) < 1e-10
    assert covariance_residual(generator_superop(gen), rep, PHASES, fock_samples) < 1e-10


def test_shift_covariant_family(fock_samples):
    p = ShiftCovParams(eta_0=0.1, eta_m=(0.2, 0.05), omega=1.0, beta=2.0, dim=10)
    rep = UnitaryRep('U1_phase', HilbertSpace.fock(10))
    assert covariance_residual(shift_covariant_generator(p), rep, PHASES, fock_samples) < 1e-10


def test_displacement_generator_breaks_phase_covariance(fock_samples):
    space = HilbertSpace.fock(10)
    a, ad, N = fock_ops(space)
    gen = LindbladGenerator(N, [a + ad])
    rep = UnitaryRep('U1_phase', space)
    assert covariance_residual(gen, rep, [0.7], fock_samples) > 1e-3


@pytest.mark.parametrize('gen', [
    two_level_generator(TwoLevelParams.from_n_beta(1.0, 0.5, 0.5)),
    rotation_covariant_generator(RotCovParams(0.3, 0.2, 0.1, hamiltonian_coeff=0.5)),
])
def test_qubit_models_are_rotation_covariant(gen, rng):
    samples = [random_density_matrix(gen.space, rng) for _ in range(4)]
    rep = UnitaryRep('SO2_spin', gen.space)
    assert covariance_residual(gen, rep, [0.5, 2.0, -1.1], samples) < 1e-12


def test_frictionless_qbm_translation_covariance(rng):
    grid = HilbertSpace.grid1d(32, 0.25, x_min=-4.0)
    gen = qbm_generator(QBMParams(1.0, 0.25, 2.0, grid, include_friction=False))
    samples = [windowed_density_matrix(grid, rng, 8, 20) for _ in range(3)]
    rep = UnitaryRep('translation_1d', grid)
    assert covariance_residual(gen, rep, [grid.dx, 3 * grid.dx, -2 * grid.dx], samples) < 1e-10


def test_weyl_relations():
    grid = HilbertSpace.grid1d(32, 1.0, x_min=-16.0)
    assert weyl_residual(grid, 2 * grid.dx, 3 * grid.dp) < 1e-10
    assert weyl_residual(grid, -5 * grid.dx, grid.dp) < 1e-10
    fock = HilbertSpace.fock(20)
    for theta, m in [(0.7, 1), (2.1, 3)]:
        assert generalized_weyl_residual(fock, theta, m) < 1e-10


def test_off_lattice_shift_warns():
    grid = HilbertSpace.grid1d(16, 1.0, x_min=-8.0)
    with pytest.warns(OffLatticeShiftWarning):
        value = weyl_residual(grid, 0.3, grid.dp)
    assert np.isfinite(value)


@pytest.mark.parametrize('label,space,params', [
    ('U1_phase', HilbertSpace.fock(6), [0.2, 1.4]),
    ('SO2_spin', HilbertSpace.qubit(), [0.5, 3.0]),
    ('translation_1d', HilbertSpace.grid1d(16, 0.5, x_min=-4.0), [0.5, 1.5]),
    ('boost_1d', HilbertSpace.grid1d(16, 0.5, x_min=-4.0), [2 * np.pi / 8, 3 * 2 * np.pi / 8]),
])
def test_representations(label, space, params):
    rep = UnitaryRep(label, space)
    for g in params:
        assert unitarity_residual(rep(g)) < 1e-12
        for h in params:
            assert representation_residual(rep, g, h) < 1e-10


def test_rep_validation():
    with pytest.raises(ValueError, match='unknown group'):
        UnitaryRep('SU3', HilbertSpace.qubit())
    with pytest.raises(SpaceMismatchError):
        UnitaryRep('SO2_spin', HilbertSpace.fock(4))


def test_shift_isometry():
    fock = HilbertSpace.fock(8)
    W = ShiftIsometry(fock, 2)
    assert W.isometry_residual() == 0.0
    P = W.projector.matrix
    assert np.allclose(P @ P, P)
    assert np.allclose(np.diag(P).real, [0, 0, 1, 1, 1, 1, 1, 1])
    with pytest.raises(ValueError):
        ShiftIsometry(fock, 8)


def test_smeared_position_povm_is_translation_covariant():
    grid = HilbertSpace.grid1d(32, 1.0, x_min=-16.0)
    povm = smeared_position_povm(grid, gaussian_smearing(grid, 2.0))
    region = Region.interval(4, 10, 32)
    assert povm_covariance_residual(povm, UnitaryRep('translation_1d', grid), 3.0, region) < 1e-12
    assert povm_covariance_residual(povm, UnitaryRep('boost_1d', grid), 2 * grid.dp, region) < 1e-12


def test_residual_reports(tmp_path):
    reports = [ResidualReport('weyl', {'a': 1}, 1e-14), ResidualReport('weyl', {'a': 2}, 0.5)]
    assert [r.passed for r in reports] == [True, False]
    path = tmp_path / 'residuals.json'
    write_residual_reports(reports, str(path))
    rows = json.loads(path.read_text())
    assert rows[0] == {'relation': 'weyl', 'params': {'a': 1}, 'residual': 1e-14, 'tolerance': 1e-10,
                       'pass': True}
