"""
Translation-covariant decoherence with a classical momentum-transfer label.

    Psi(x) = i b x + D x^2 / 2 - sum_q w_q [exp(i q x / hbar) - 1 - (i/hbar) q x / (1 + q^2)]
    Phi(t, x) = exp(-t Psi(x))

Neglecting free motion, position matrix elements evolve as
<x|rho_t|y> = Phi(t, x - y) <x|rho_0|y>.
"""
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from errors import (InvalidDensityMatrixError, NegativeTimeError,
                    NonPSDDecoherenceError)
from hilbert import DensityMatrix, Operator, boost_operator, grid_ops
from lindblad import LindbladGenerator

SEPARATIONS = ('direct', 'minimal_image')
BOCHNER_TOL = 1e-10


@dataclass(frozen=True)
class LevyTriplet:
    b: float = 0.0
    D: float = 0.0
    jumps: tuple = field(default_factory=tuple)
    hbar: float = 1.0

    def __post_init__(self):
        jumps = tuple((float(q), float(w)) for q, w in self.jumps)
        if self.D < 0:
            raise ValueError('Gaussian coefficient D must be nonnegative, got {}'.format(self.D))
        if any(w < 0 for _, w in jumps):
            raise ValueError('jump weights must be nonnegative, got {}'.format([w for _, w in jumps]))
        object.__setattr__(self, 'jumps', jumps)

    @classmethod
    def from_config(cls, cfg, hbar=1.0):
        """cfg = {b, D, jumps: [[q, weight], ...]}"""
        return cls(b=float(cfg.get('b', 0.0)), D=float(cfg.get('D', 0.0)),
                   jumps=tuple(tuple(j) for j in cfg.get('jumps', ())), hbar=hbar)

    def levy_integral(self):
        """sum_q w_q q^2 / (1 + q^2); finite for every finite jump list."""
        return float(sum(w * q ** 2 / (1 + q ** 2) for q, w in self.jumps))


def characteristic_exponent(trip, x):
    x = np.asarray(x, dtype=float)
    psi = 1j * trip.b * x + 0.5 * trip.D * x ** 2
    for q, w in trip.jumps:
        psi = psi - w * (np.exp(1j * q * x / trip.hbar) - 1 - 1j * q * x / (trip.hbar * (1 + q ** 2)))
    return psi


def decoherence_factor(trip, t, x):
    if t < 0:
        raise NegativeTimeError(t)
    return np.exp(-t * characteristic_exponent(trip, x))


@dataclass(frozen=True)
class DecoherenceField:
    triplet: LevyTriplet

    def evaluate(self, t, x):
        return decoherence_factor(self.triplet, t, x)

    __call__ = evaluate


def _separations(space, separation):
    if separation not in SEPARATIONS:
        raise ValueError('separation must be one of {}, got {}'.format(SEPARATIONS, separation))
    x = space.x_values
    r = x[:, None] - x[None, :]
    if separation == 'minimal_image':
        r = space.minimal_image(r)
    return r


def decoherence_matrix(trip, t, space, separation='direct'):
    """Phi(t, x_i - x_j) over all grid pairs."""
    space.require('grid1d')
    return decoherence_factor(trip, t, _separations(space, separation))


def apply_decoherence(rho, trip, t, separation='direct'):
    """
    <x_i|rho_t|x_j> = Phi(t, r_ij) <x_i|rho|x_j>. The default 'direct' separation
    r_ij = x_i - x_j matches the propagator of levy_generator; 'minimal_image' folds
    r_ij onto the periodic grid and agrees with it only for states away from the edges.
    """
    space = rho.space
    phi = decoherence_matrix(trip, t, space, separation)
    try:
        return DensityMatrix.from_matrix(space, phi * rho.matrix)
    except InvalidDensityMatrixError:
        out = phi * rho.matrix
        min_eig = float(np.linalg.eigvalsh(0.5 * (out + out.conj().T))[0])
        raise NonPSDDecoherenceError(min_eig)


def bochner_check(trip, t, space, separation='direct'):
    """(passed, smallest eigenvalue) of the matrix Phi(t, x_i - x_j)."""
    phi = decoherence_matrix(trip, t, space, separation)
    min_eig = float(np.linalg.eigvalsh(0.5 * (phi + phi.conj().T))[0])
    return min_eig >= -BOCHNER_TOL, min_eig


def levy_generator(trip, space):
    """
    H = (hbar b + sum_q w_q q / (1 + q^2)) x with Lindblad operators sqrt(D) x and
    sqrt(w_q) exp(i q x / hbar); its propagator is apply_decoherence with direct
    separations.
    """
    x, _ = grid_ops(space)
    coeff = trip.hbar * trip.b + sum(w * q / (1 + q ** 2) for q, w in trip.jumps)
    ops = []
    if trip.D > 0:
        ops.append(np.sqrt(trip.D) * x)
    for q, w in trip.jumps:
        if w > 0:
            ops.append(np.sqrt(w) * boost_operator(space, q))
    return LindbladGenerator(coeff * x, ops)


def decoherence_surface(trip, times, xs):
    """Long table {t, x, re, im, abs} of Phi over the grid of times and separations."""
    rows = []
    for t in times:
        phi = decoherence_factor(trip, t, xs)
        for x, v in zip(xs, phi):
            rows.append({'t': float(t), 'x': float(x), 're': float(v.real), 'im': float(v.imag), 'abs': float(abs(v))})
    return pd.DataFrame(rows, columns=['t', 'x', 're', 'im', 'abs'])
