"""
Quantum linear Boltzmann equation for a test particle in a Maxwell-Boltzmann gas,
realized on the momentum lattice of a periodic 1D grid.

Each momentum transfer q carries the Lindblad operator

    L_q = sqrt(gamma_q) exp(i q x / hbar) sqrt(S(q, E(q, p)))

with gamma_q = (2 pi / hbar)(2 pi hbar) n |t(q)|^2. Transfers that would carry a
lattice momentum out of the grid are masked out of both the jump and the
anticommutator, so the generator stays trace preserving.
"""
from dataclasses import dataclass, field

import numpy as np

from errors import (InvalidTemperatureError, OffLatticeMomentumTransferError,
                    ZeroMomentumTransferError)
from hilbert import (HilbertSpace, Operator, boost_operator, momentum_function,
                     to_momentum_basis)
from lindblad import LindbladGenerator, generator_superop
from models.qbm import momentum_gibbs_state

__all__ = ['QLBEParams', 'dynamic_structure_factor_mb', 'energy_transfer', 'transfer_rate',
           'qlbe_lindblad', 'qlbe_generator', 'qlbe_boundary_weight', 'population_rate_matrix',
           'qlbe_gibbs_state']


def dynamic_structure_factor_mb(q, E, m, beta):
    """S_MB(q, E) = sqrt(beta m / 2 pi) / |q| exp(-(beta / 8m)(2mE + q^2)^2 / q^2)."""
    q = np.asarray(q, dtype=float)
    if np.any(q == 0):
        raise ZeroMomentumTransferError()
    E = np.asarray(E, dtype=float)
    return np.sqrt(beta * m / (2 * np.pi)) / np.abs(q) * np.exp(
        -(beta / (8 * m)) * (2 * m * E + q ** 2) ** 2 / q ** 2)


def energy_transfer(q, p, M):
    """E(q, p) = (p + q)^2 / 2M - p^2 / 2M."""
    return ((p + q) ** 2 - p ** 2) / (2 * M)


@dataclass(frozen=True)
class QLBEParams:
    """
    transfers holds (q, t_tilde(q)) pairs; each q must be a nonzero multiple of the
    grid's momentum spacing. translate=False replaces exp(iqx/hbar) by the identity.
    """
    mass: float
    gas_mass: float
    beta: float
    density: float
    grid: HilbertSpace
    transfers: tuple = field(default_factory=tuple)
    translate: bool = True

    def __post_init__(self):
        if not (self.mass > 0 and self.gas_mass > 0):
            raise ValueError('masses must be positive, got M={} m={}'.format(self.mass, self.gas_mass))
        if not self.beta > 0 or np.isinf(self.beta):
            raise InvalidTemperatureError('beta must be positive and finite, got {}'.format(self.beta))
        if self.density < 0:
            raise ValueError('gas density must be nonnegative, got {}'.format(self.density))
        self.grid.require('grid1d')
        pairs = tuple((float(q), complex(amp)) for q, amp in self.transfers)
        dp = self.grid.dp
        for q, _ in pairs:
            if q == 0:
                raise ZeroMomentumTransferError()
            if not self.grid.is_on_lattice(q, dp):
                raise OffLatticeMomentumTransferError(q, dp)
        object.__setattr__(self, 'transfers', pairs)

    @classmethod
    def from_cells(cls, mass, gas_mass, beta, density, grid, cells, amplitude=1.0, translate=True):
        """Transfers given as integer multiples of the momentum spacing with a constant amplitude."""
        transfers = []
        for c in cells:
            if float(c) != int(c):
                raise OffLatticeMomentumTransferError(float(c) * grid.dp, grid.dp)
            transfers.append((int(c) * grid.dp, amplitude))
        return cls(mass, gas_mass, beta, density, grid, tuple(transfers), translate)

    @property
    def hbar(self):
        return self.grid.hbar

    def cells(self):
        return [int(round(q / self.grid.dp)) for q, _ in self.transfers]


def transfer_rate(p, amplitude):
    """(2 pi / hbar)(2 pi hbar) n |t(q)|^2, the 1D reduction of the collision prefactor."""
    return (2 * np.pi / p.hbar) * (2 * np.pi * p.hbar) * p.density * abs(amplitude) ** 2


def _in_range_mask(space, q):
    p = space.p_values
    tol = 1e-9 * space.dp
    target = p + q
    return ((target >= space.p_sorted[0] - tol) & (target <= space.p_sorted[-1] + tol)).astype(float)


def _structure_on_lattice(p, q):
    """S(q, E(q, p)) at every lattice momentum, DFT order."""
    E = energy_transfer(q, p.grid.p_values, p.mass)
    return dynamic_structure_factor_mb(q, E, p.gas_mass, p.beta)


def qlbe_lindblad(p):
    space = p.grid
    H = momentum_function(space, space.p_values ** 2 / (2 * p.mass))
    H = Operator(space, 0.5 * (H.matrix + H.matrix.conj().T))
    ops = []
    for q, amp in p.transfers:
        rate = transfer_rate(p, amp)
        if rate == 0:
            continue
        s = _structure_on_lattice(p, q) * _in_range_mask(space, q)
        L = momentum_function(space, np.sqrt(rate * s))
        if p.translate:
            L = boost_operator(space, q) @ L
        ops.append(L)
    return LindbladGenerator(H, ops)


def qlbe_generator(p):
    return generator_superop(qlbe_lindblad(p))


def qlbe_gibbs_state(p):
    return momentum_gibbs_state(p.grid, p.mass, p.beta)


def qlbe_boundary_weight(p):
    """Gibbs-weighted total rate of the transfers dropped at the edges of the momentum range."""
    space = p.grid
    w = np.exp(-p.beta * space.p_values ** 2 / (2 * p.mass))
    w = w / w.sum()
    total = 0.0
    for q, amp in p.transfers:
        dropped = 1.0 - _in_range_mask(space, q)
        total += float(np.sum(w * transfer_rate(p, amp) * _structure_on_lattice(p, q) * dropped))
    return total


def population_rate_matrix(gen):
    """
    Classical rate matrix R on the ascending momentum lattice: R[i, j] is the rate
    from p_j to p_i, the diagonal carries minus the total escape rate.
    """
    space = gen.space
    space.require('grid1d')
    n = space.n_points
    basis = np.fft.fftshift(np.fft.fft(np.eye(n), axis=0, norm='ortho'), axes=0)
    R = np.zeros((n, n))
    for j in range(n):
        v = basis[j].conj()
        out = to_momentum_basis(space, gen.apply(np.outer(v, v.conj())))
        R[:, j] = np.real(np.diag(out))
    return R
