"""
Damped harmonic oscillator and its U(1)-covariant many-photon generalization.
"""
from dataclasses import dataclass, field

import numpy as np

from errors import InvalidTemperatureError, TruncationTooSmallError
from hilbert import HilbertSpace, Operator, DensityMatrix, coherent_state, fock_ops
from lindblad import LindbladGenerator

__all__ = ['DHOParams', 'ShiftCovParams', 'thermal_occupation', 'thermal_occupation_coth',
           'dho_generator', 'shift_covariant_generator', 'gibbs_state', 'dho_moment_oracles',
           'dho_cat_coherence', 'cat_state', 'coherence_ratio']


def thermal_occupation(omega, beta, hbar=1.0):
    """N_beta(omega) = 1 / (exp(beta hbar omega) - 1); beta = inf is the zero-temperature limit."""
    x = beta * hbar * omega
    if not x > 0:
        raise InvalidTemperatureError('beta*hbar*omega must be positive, got {}'.format(x))
    if np.isinf(x):
        return 0.0
    return float(1.0 / np.expm1(x))


def thermal_occupation_coth(omega, beta, hbar=1.0):
    x = beta * hbar * omega
    if not x > 0:
        raise InvalidTemperatureError('beta*hbar*omega must be positive, got {}'.format(x))
    if np.isinf(x):
        return 0.0
    return float(0.5 * (1.0 / np.tanh(0.5 * x) - 1.0))


@dataclass(frozen=True)
class DHOParams:
    omega: float
    eta: float
    beta: float = np.inf
    dim: int = 40
    hbar: float = 1.0
    zero_temperature: bool = False

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError('omega must be positive, got {}'.format(self.omega))
        if not self.eta > 0:
            raise ValueError('eta must be positive, got {}'.format(self.eta))
        if not self.beta > 0:
            raise InvalidTemperatureError('beta must be positive, got {}'.format(self.beta))

    @property
    def n_beta(self):
        if self.zero_temperature:
            return 0.0
        return thermal_occupation(self.omega, self.beta, self.hbar)

    @property
    def space(self):
        return HilbertSpace.fock(self.dim, hbar=self.hbar)


@dataclass(frozen=True)
class ShiftCovParams:
    eta_0: float
    eta_m: tuple = field(default_factory=tuple)
    omega: float = 1.0
    beta: float = np.inf
    dim: int = 40
    hbar: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'eta_m', tuple(float(e) for e in self.eta_m))
        if self.eta_0 < 0 or any(e < 0 for e in self.eta_m):
            raise ValueError('all rates must be nonnegative')
        if not self.omega > 0:
            raise ValueError('omega must be positive, got {}'.format(self.omega))
        if not self.beta > 0:
            raise InvalidTemperatureError('beta must be positive, got {}'.format(self.beta))
        m_max = len(self.eta_m)
        if 2 * m_max >= self.dim:
            raise TruncationTooSmallError('m_max={} needs dim > {}, got dim={}'.format(m_max, 2 * m_max, self.dim))

    @property
    def n_beta(self):
        return thermal_occupation(self.omega, self.beta, self.hbar)


def dho_generator(p):
    space = p.space
    a, ad, N = fock_ops(space)
    nb = p.n_beta
    H = (p.hbar * p.omega) * N
    ops = [np.sqrt(p.eta * (nb + 1)) * a]
    if nb > 0:
        ops.append(np.sqrt(p.eta * nb) * ad)
    return LindbladGenerator(H, ops)


def shift_covariant_generator(p):
    """
    Phase damping sqrt(2 eta_0) N plus the m-photon pairs
    sqrt(eta_m (N_beta+1)^m) a^m and sqrt(eta_m N_beta^m) a^dag^m.
    """
    space = HilbertSpace.fock(p.dim, hbar=p.hbar)
    a, ad, N = fock_ops(space)
    nb = p.n_beta
    H = (p.hbar * p.omega) * N
    ops = []
    if p.eta_0 > 0:
        ops.append(np.sqrt(2 * p.eta_0) * N)
    for m, eta in enumerate(p.eta_m, start=1):
        if eta == 0:
            continue
        am = Operator(space, np.linalg.matrix_power(a.matrix, m))
        ops.append(np.sqrt(eta * (nb + 1) ** m) * am)
        if nb > 0:
            ops.append(np.sqrt(eta * nb ** m) * am.dag())
    return LindbladGenerator(H, ops)


def gibbs_state(space, omega, beta):
    """w ∝ exp(-beta hbar omega N) on a Fock space, or exp(-beta hbar omega sigma_z / 2) on a qubit."""
    if space.kind == 'qubit':
        energies = 0.5 * space.hbar * omega * np.array([-1.0, 1.0])
    else:
        space.require('fock')
        energies = space.hbar * omega * np.arange(space.dim)
    if np.isinf(beta):
        weights = (energies == energies.min()).astype(float)
    else:
        weights = np.exp(-beta * (energies - energies.min()))
    return DensityMatrix.from_matrix(space, np.diag(weights / weights.sum()))


def dho_moment_oracles(p, rho0, t):
    """Closed forms <a(t)> = <a> e^{-i omega t - eta t/2}, <N(t)> = <N> e^{-eta t} + N_beta (1 - e^{-eta t})."""
    a, _, N = fock_ops(p.space)
    mean_a = complex(np.trace(rho0.matrix @ a.matrix))
    mean_n = float(np.real(np.trace(rho0.matrix @ N.matrix)))
    t = np.asarray(t, dtype=float)
    a_t = mean_a * np.exp(-1j * p.omega * t - 0.5 * p.eta * t)
    n_t = mean_n * np.exp(-p.eta * t) + p.n_beta * (1 - np.exp(-p.eta * t))
    return a_t, n_t


def dho_cat_coherence(alpha, beta_amp, eta, t):
    return float(np.exp(-0.5 * abs(alpha - beta_amp) ** 2 * (1 - np.exp(-eta * t))))


def cat_state(space, alpha, beta_amp):
    """Normalized |alpha> + |beta>, the superposition whose coherence the oracle tracks."""
    psi = coherent_state(space, alpha) + coherent_state(space, beta_amp)
    return DensityMatrix.pure(space, psi)


def coherence_ratio(rho, space, alpha_t, beta_t):
    """
    Writes rho = V C V^dag on V = [|alpha_t>, |beta_t>] and returns
    |C_ab| / sqrt(C_aa C_bb), the modulus of the coherence coefficient.
    """
    V = np.stack([coherent_state(space, alpha_t), coherent_state(space, beta_t)], axis=1)
    G_inv = np.linalg.inv(V.conj().T @ V)
    C = G_inv @ V.conj().T @ rho.matrix @ V @ G_inv
    return float(abs(C[0, 1]) / np.sqrt(abs(C[0, 0] * C[1, 1])))
