"""
Quantum Brownian motion of a test particle on a periodic 1D grid.

The bilinear master equation

    L[rho] = -(i/hbar)[p^2/2M, rho] - (i eta / 2 hbar)[x, {p, rho}]
             - (D_pp/hbar^2)[x, [x, rho]] - (D_xx/hbar^2)[p, [p, rho]]

with D_pp = eta M / beta and D_xx = eta beta hbar^2 / 16 M is realized in Lindblad
form by H = p^2/2M + (eta/4){x, p} and the single operator sqrt(eta) a,
a = (x + i lambda^2 p / hbar) / (sqrt2 lambda), lambda^2 = beta hbar^2 / 4M.
The two forms agree as matrices for any Hermitian x and p.
"""
from dataclasses import dataclass

import numpy as np

from errors import ThermalLengthUnresolvedError, InvalidTemperatureError
from hilbert import (DensityMatrix, HilbertSpace, Operator, Superoperator,
                     free_evolution, from_momentum_basis, grid_ops,
                     momentum_function, to_momentum_basis)
from lindblad import LindbladGenerator

__all__ = ['QBMParams', 'qbm_generator', 'qbm_four_term_superop', 'frictionless_generator',
           'qbm_moment_oracles', 'qbm_exact_momentum', 'qbm_exact_position', 'qbm_exact_solutions',
           'momentum_gibbs_state']


@dataclass(frozen=True)
class QBMParams:
    mass: float
    eta: float
    beta: float
    grid: HilbertSpace
    include_friction: bool = True

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError('mass must be positive, got {}'.format(self.mass))
        if self.eta < 0:
            raise ValueError('eta must be nonnegative, got {}'.format(self.eta))
        if not self.beta > 0 or np.isinf(self.beta):
            raise InvalidTemperatureError('beta must be positive and finite, got {}'.format(self.beta))
        self.grid.require('grid1d')
        if self.thermal_length < 2 * self.grid.dx:
            raise ThermalLengthUnresolvedError(self.thermal_length, self.grid.dx)

    @property
    def hbar(self):
        return self.grid.hbar

    @property
    def d_pp(self):
        return self.eta * self.mass / self.beta

    @property
    def d_xx(self):
        return self.eta * self.beta * self.hbar ** 2 / (16 * self.mass)

    @property
    def thermal_length(self):
        return float(np.sqrt(self.beta * self.hbar ** 2 / (4 * self.mass)))


def _kinetic(space, mass):
    return momentum_function(space, space.p_values ** 2 / (2 * mass))


def frictionless_generator(space, d_pp, d_xx, mass=None):
    """
    -(D_pp/hbar^2)[x,[x,.]] - (D_xx/hbar^2)[p,[p,.]] plus free motion p^2/2M;
    mass=None switches the kinetic term off.
    """
    x, p = grid_ops(space)
    H = Operator.zeros(space) if mass is None else _kinetic(space, mass)
    ops = []
    if d_pp > 0:
        ops.append((np.sqrt(2 * d_pp) / space.hbar) * x)
    if d_xx > 0:
        ops.append((np.sqrt(2 * d_xx) / space.hbar) * p)
    return LindbladGenerator(H, ops)


def qbm_generator(p):
    space = p.grid
    if not p.include_friction:
        return frictionless_generator(space, p.d_pp, p.d_xx, p.mass)
    x, mom = grid_ops(space)
    lam = p.thermal_length
    a = (1 / (np.sqrt(2) * lam)) * (x + (1j * lam ** 2 / p.hbar) * mom)
    H = _kinetic(space, p.mass) + (p.eta / 4) * (x @ mom + mom @ x)
    # symmetrize away the roundoff of the products
    H = Operator(space, 0.5 * (H.matrix + H.matrix.conj().T))
    return LindbladGenerator(H, [np.sqrt(p.eta) * a])


def qbm_four_term_superop(p):
    space = p.grid
    x, mom = grid_ops(space)
    I = np.eye(space.d)

    def ad(A):
        return np.kron(I, A) - np.kron(A.T, I)

    def anti(A):
        return np.kron(I, A) + np.kron(A.T, I)

    hbar = p.hbar
    ad_x, ad_p = ad(x.matrix), ad(mom.matrix)
    m = (-1j / hbar) * ad(_kinetic(space, p.mass).matrix)
    m = m - (p.d_pp / hbar ** 2) * (ad_x @ ad_x) - (p.d_xx / hbar ** 2) * (ad_p @ ad_p)
    if p.include_friction:
        m = m - (1j * p.eta / (2 * hbar)) * (ad_x @ anti(mom.matrix))
    return Superoperator(space, m)


def qbm_moment_oracles(p, rho0, t):
    """<p(t)> = <p> e^{-eta t}; <E(t)> = <E> e^{-2 eta t} + (1/2 beta)(1 - e^{-2 eta t}) in 1D."""
    _, mom = grid_ops(p.grid)
    mean_p = float(np.real(np.trace(rho0.matrix @ mom.matrix)))
    mean_e = float(np.real(np.trace(rho0.matrix @ _kinetic(p.grid, p.mass).matrix)))
    t = np.asarray(t, dtype=float)
    return (mean_p * np.exp(-p.eta * t),
            mean_e * np.exp(-2 * p.eta * t) + (1 - np.exp(-2 * p.eta * t)) / (2 * p.beta))


def _shifted(matrix, m):
    """out[i, j] = matrix[i - m, j - m], zero where the source index leaves the grid."""
    n = matrix.shape[0]
    out = np.zeros_like(matrix)
    if m >= 0:
        out[m:, m:] = matrix[:n - m, :n - m]
    else:
        out[:n + m, :n + m] = matrix[-m:, -m:]
    return out


def _gaussian_weights(offsets, width2):
    """Normalized samples of exp(-z^2 / 4 width2) on the offsets; a delta when width2 == 0."""
    if width2 <= 0:
        return (offsets == 0).astype(float)
    w = np.exp(-offsets ** 2 / (4 * width2))
    return w / w.sum()


def qbm_exact_momentum(space, rho0, t, d_pp, d_xx, mass=None):
    """
    Closed-form frictionless solution in the momentum representation, with
    r = p - q and P = (p + q)/2:

        rho_t(p, q) = exp(-D_xx r^2 t / hbar^2 - D_pp r^2 t^3 / 12 hbar^2 M^2)
                      sum_k w_k exp(-i r t (2P - k) / 2 hbar M) rho_0(p - k, q - k)

    w_k the normalized kernel exp(-k^2 / 4 D_pp t) on the momentum lattice. Returns
    the state in the position basis.
    """
    hbar = space.hbar
    n = space.n_points
    rho_p = to_momentum_basis(space, rho0)
    p = space.p_sorted
    r = p[:, None] - p[None, :]
    P = 0.5 * (p[:, None] + p[None, :])
    m_range = np.arange(-(n - 1), n)
    weights = _gaussian_weights(m_range * space.dp, d_pp * t)
    out = np.zeros_like(rho_p)
    for m, w in zip(m_range, weights):
        if w == 0:
            continue
        term = w * _shifted(rho_p, m)
        if mass is not None:
            term = term * np.exp(-1j * r * t * (2 * P - m * space.dp) / (2 * hbar * mass))
        out += term
    envelope = -d_xx * r ** 2 * t / hbar ** 2
    if mass is not None:
        envelope = envelope - d_pp * r ** 2 * t ** 3 / (12 * hbar ** 2 * mass ** 2)
    return Operator(space, from_momentum_basis(space, np.exp(envelope) * out))


def qbm_exact_position(space, rho0, t, d_pp, d_xx, mass=None):
    """
    Closed-form frictionless solution in the position representation, r = x - y:

        rho_t(x, y) = exp(-(D_pp/hbar^2) r^2 t [1 - D_pp t^2 / 4 M^2 Dt])
                      sum_z K(z) exp((i/hbar)(D_pp / 2M) z r t / Dt) rho^free_t(x - z, y - z)

    with Dt = D_xx + D_pp t^2 / 3M^2 and K the normalized kernel exp(-z^2 / 4 Dt t)
    on the position lattice. mass=None leaves only the localization factor.
    """
    hbar = space.hbar
    n = space.n_points
    x = space.x_values
    r = x[:, None] - x[None, :]
    rho0_m = np.asarray(rho0.matrix if hasattr(rho0, 'matrix') else rho0)
    if mass is None:
        # without free motion the D_xx part is a pure momentum-space convolution
        localized = np.exp(-d_pp * r ** 2 * t / hbar ** 2) * rho0_m
        if d_xx == 0:
            return Operator(space, localized)
        return qbm_exact_momentum(space, Operator(space, localized), t, 0.0, d_xx)
    d_tilde = d_xx + d_pp * t ** 2 / (3 * mass ** 2)
    free = free_evolution(space, rho0_m, t, mass).matrix
    m_range = np.arange(-(n - 1), n)
    offsets = m_range * space.dx
    weights = _gaussian_weights(offsets, d_tilde * t)
    out = np.zeros_like(free)
    for m, z, w in zip(m_range, offsets, weights):
        if w == 0:
            continue
        phase = 1.0 if d_tilde == 0 else np.exp(1j * d_pp * z * r * t / (2 * mass * d_tilde * hbar))
        out += w * phase * _shifted(free, m)
    if d_tilde == 0:
        factor = np.exp(-d_pp * r ** 2 * t / hbar ** 2)
    else:
        factor = np.exp(-(d_pp / hbar ** 2) * r ** 2 * t * (1 - d_pp * t ** 2 / (4 * mass ** 2 * d_tilde)))
    return Operator(space, factor * out)


def qbm_exact_solutions(p, rho0, t):
    """Both closed forms for frictionless parameters, as position-basis operators."""
    if p.include_friction:
        raise ValueError('exact solutions neglect friction; set include_friction=False')
    args = (p.grid, rho0, t, p.d_pp, p.d_xx, p.mass)
    return qbm_exact_momentum(*args), qbm_exact_position(*args)


def momentum_gibbs_state(space, mass, beta):
    """w = exp(-beta p^2 / 2M) / Z on the grid."""
    weights = np.exp(-beta * space.p_values ** 2 / (2 * mass))
    w = momentum_function(space, weights / weights.sum()).matrix
    return DensityMatrix.from_matrix(space, 0.5 * (w + w.conj().T))
