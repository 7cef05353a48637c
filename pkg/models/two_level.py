"""
Two-level system: the thermal Bloch generator and the rotation-covariant family
built from the rank-one spherical tensor operators T_11, T_10, T_1-1.
"""
from dataclasses import dataclass

import numpy as np

from errors import InvalidTemperatureError
from hilbert import HilbertSpace, Superoperator, pauli_ops
from lindblad import LindbladGenerator
from models.dho import thermal_occupation

__all__ = ['TwoLevelParams', 'RotCovParams', 'two_level_generator', 'two_level_oracles',
           'spherical_tensor_ops', 'rotation_covariant_generator', 'rotation_covariant_explicit']


@dataclass(frozen=True)
class TwoLevelParams:
    omega: float
    eta: float
    beta: float = np.inf
    hbar: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError('omega must be positive, got {}'.format(self.omega))
        if not self.eta > 0:
            raise ValueError('eta must be positive, got {}'.format(self.eta))
        if not self.beta > 0:
            raise InvalidTemperatureError('beta must be positive, got {}'.format(self.beta))

    @classmethod
    def from_n_beta(cls, omega, eta, n_beta, hbar=1.0):
        if n_beta < 0:
            raise InvalidTemperatureError('N_beta must be nonnegative, got {}'.format(n_beta))
        beta = np.inf if n_beta == 0 else float(np.log1p(1.0 / n_beta) / (hbar * omega))
        return cls(omega=omega, eta=eta, beta=beta, hbar=hbar)

    @property
    def n_beta(self):
        return thermal_occupation(self.omega, self.beta, self.hbar)

    @property
    def eta_bar(self):
        """Total transition rate eta (2 N_beta + 1)."""
        return self.eta * (2 * self.n_beta + 1)

    @property
    def space(self):
        return HilbertSpace.qubit(hbar=self.hbar)


@dataclass(frozen=True)
class RotCovParams:
    c_minus: float
    c_zero: float
    c_plus: float
    hamiltonian_coeff: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        if min(self.c_minus, self.c_zero, self.c_plus) < 0:
            raise ValueError('c_m must be nonnegative, got {}'.format((self.c_minus, self.c_zero, self.c_plus)))


def two_level_generator(p):
    space = p.space
    _, _, sz, sp, sm = pauli_ops(space)
    nb = p.n_beta
    H = (0.5 * p.hbar * p.omega) * sz
    ops = [np.sqrt(p.eta * (nb + 1)) * sm]
    if nb > 0:
        ops.append(np.sqrt(p.eta * nb) * sp)
    return LindbladGenerator(H, ops)


def two_level_oracles(p, rho0, t):
    """
    P_e(t) = P_e e^{-eta_bar t} + N/(2N+1) (1 - e^{-eta_bar t}) and
    C(t) = C e^{-i omega t - eta_bar t / 2}, with C = Tr(rho sigma_-).
    """
    t = np.asarray(t, dtype=float)
    nb = p.n_beta
    p_e = float(np.real(rho0.matrix[1, 1]))
    coh = complex(rho0.matrix[1, 0])
    decay = np.exp(-p.eta_bar * t)
    p_e_t = p_e * decay + nb / (2 * nb + 1) * (1 - decay)
    coh_t = coh * np.exp(-1j * p.omega * t - 0.5 * p.eta_bar * t)
    return p_e_t, coh_t


def spherical_tensor_ops(space):
    """(T_11, T_10, T_1-1) = (-(sx + i sy)/sqrt2, sz, (sx - i sy)/sqrt2)."""
    sx, sy, sz, _, _ = pauli_ops(space)
    t_plus = (-1 / np.sqrt(2)) * (sx + 1j * sy)
    t_minus = (1 / np.sqrt(2)) * (sx - 1j * sy)
    return t_plus, sz, t_minus


def rotation_covariant_generator(p):
    space = HilbertSpace.qubit(hbar=p.hbar)
    _, _, sz, _, _ = pauli_ops(space)
    t_plus, t_zero, t_minus = spherical_tensor_ops(space)
    ops = []
    for c, T in ((p.c_plus, t_plus), (p.c_zero, t_zero), (p.c_minus, t_minus)):
        if c > 0:
            ops.append(np.sqrt(c) * T)
    return LindbladGenerator(p.hamiltonian_coeff * sz, ops)


def _commutator(A):
    I = np.eye(A.shape[0])
    return np.kron(I, A) - np.kron(A.T, I)


def _dissipator(L):
    I = np.eye(L.shape[0])
    LdL = L.conj().T @ L
    return np.kron(L.conj(), L) - 0.5 * (np.kron(I, LdL) + np.kron(LdL.T, I))


def rotation_covariant_explicit(p):
    """-(i/hbar)[H, .] - (c0/2)[sz,[sz, .]] + 2 c_-1 D[s_-] + 2 c_1 D[s_+] as a superoperator."""
    space = HilbertSpace.qubit(hbar=p.hbar)
    _, _, sz, sp, sm = pauli_ops(space)
    ad_z = _commutator(sz.matrix)
    m = (-1j / p.hbar) * p.hamiltonian_coeff * ad_z
    m = m - 0.5 * p.c_zero * (ad_z @ ad_z)
    m = m + 2 * p.c_minus * _dissipator(sm.matrix) + 2 * p.c_plus * _dissipator(sp.matrix)
    return Superoperator(space, m)
