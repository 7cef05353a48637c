"""
Unitary group representations and covariance checks for maps, POVMs and the Weyl
relations.
"""
import logging
import warnings
from dataclasses import dataclass, asdict, field

import numpy as np

from errors import OffLatticeShiftWarning
from hilbert import (HilbertSpace, Operator, Superoperator, boost_operator,
                     translation_operator, trace_norm)
from utils import write_json


_logger = logging.getLogger('covariance')

GROUP_LABELS = ('U1_phase', 'SO2_spin', 'translation_1d', 'boost_1d')
_GROUP_SPACES = {'U1_phase': 'fock', 'SO2_spin': 'qubit', 'translation_1d': 'grid1d', 'boost_1d': 'grid1d'}


@dataclass(frozen=True)
class UnitaryRep:
    """
    g -> U(g) for the four groups used by the models:
    U1_phase exp(i theta N), SO2_spin exp((i/hbar) phi S_z), translation_1d
    exp((i/hbar) a p) and boost_1d exp((i/hbar) q x).
    """
    group_label: str
    space: HilbertSpace

    def __post_init__(self):
        if self.group_label not in GROUP_LABELS:
            raise ValueError('unknown group {}, choose from {}'.format(self.group_label, GROUP_LABELS))
        self.space.require(_GROUP_SPACES[self.group_label])

    def spacing(self):
        if self.group_label == 'translation_1d':
            return self.space.dx
        if self.group_label == 'boost_1d':
            return self.space.dp
        return None

    def on_lattice(self, g):
        step = self.spacing()
        return step is None or self.space.is_on_lattice(g, step)

    def __call__(self, g):
        space = self.space
        if not self.on_lattice(g):
            warnings.warn('off-lattice shift: {}={} is not a multiple of {:.6g}'.format(
                self.group_label, g, self.spacing()), OffLatticeShiftWarning)
        if self.group_label == 'U1_phase':
            return Operator(space, np.diag(np.exp(1j * g * np.arange(space.dim))))
        if self.group_label == 'SO2_spin':
            # S_z = (hbar/2) sigma_z
            return Operator(space, np.diag(np.exp(0.5j * g * np.array([-1.0, 1.0]))))
        if self.group_label == 'translation_1d':
            return translation_operator(space, g)
        return boost_operator(space, g)

    @staticmethod
    def compose(g, h):
        return g + h


@dataclass(frozen=True)
class ShiftIsometry:
    """W^m with W = sum_n |n+1><n| on a truncated Fock space."""
    space: HilbertSpace
    power: int = 1

    def __post_init__(self):
        self.space.require('fock')
        if not 0 <= self.power < self.space.dim:
            raise ValueError('power must lie in [0, dim), got {}'.format(self.power))

    @property
    def matrix(self):
        W = np.eye(self.space.dim, k=-1)
        return np.linalg.matrix_power(W, self.power)

    @property
    def projector(self):
        """P_m = W^m W^dag^m."""
        Wm = self.matrix
        return Operator(self.space, Wm @ Wm.T)

    def isometry_residual(self):
        """max |W^dag^m W^m - 1| on the lowest dim - m basis states."""
        Wm = self.matrix
        keep = self.space.dim - self.power
        return float(np.max(np.abs((Wm.T @ Wm)[:keep, :keep] - np.eye(keep))))


def _action(L):
    if isinstance(L, Superoperator):
        d = L.space.d
        return lambda rho: (L.matrix @ rho.reshape(-1, order='F')).reshape(d, d, order='F')
    return L.apply


def covariance_residual(L, rep, params, samples):
    """max over g and rho of || L[U rho U^dag] - U L[rho] U^dag ||_1."""
    act = _action(L)
    worst = 0.0
    for g in params:
        U = rep(g).matrix
        Ud = U.conj().T
        for rho in samples:
            r = np.asarray(rho.matrix)
            lhs = act(U @ r @ Ud)
            rhs = U @ act(r) @ Ud
            worst = max(worst, trace_norm(lhs - rhs))
    return worst


def representation_residual(rep, g, h):
    """|| U(g) U(h) - c U(g + h) ||_max with the best global phase c."""
    A = rep(g).matrix @ rep(h).matrix
    B = rep(UnitaryRep.compose(g, h)).matrix
    overlap = np.vdot(B, A)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.max(np.abs(A - phase * B)))


def unitarity_residual(U):
    m = U.matrix
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


def weyl_residual(space, a, q):
    """|| U(a) U(q) - exp(i q a / hbar) U(q) U(a) ||_max; off-lattice shifts warn but still report."""
    space.require('grid1d')
    Ua = UnitaryRep('translation_1d', space)(a).matrix
    Uq = UnitaryRep('boost_1d', space)(q).matrix
    phase = np.exp(1j * q * a / space.hbar)
    return float(np.max(np.abs(Ua @ Uq - phase * (Uq @ Ua))))


def generalized_weyl_residual(space, theta, m):
    """U(theta) W^m = exp(i theta m) W^m U(theta), checked on the lowest dim - m states."""
    U = UnitaryRep('U1_phase', space)(theta).matrix
    Wm = ShiftIsometry(space, m).matrix
    diff = U @ Wm - np.exp(1j * theta * m) * (Wm @ U)
    keep = space.dim - m
    return float(np.max(np.abs(diff[:, :keep])))


def povm_covariance_residual(povm, rep, param, region, shifted_region=None):
    """
    || U^dag(g) F(M) U(g) - F(M') ||_max. With translations U^dag(a) F(M) U(a) = F(M + a)
    and with boosts U^dag(q) F(M x N) U(q) = F(M x (N - q)); boosts leave position
    effects untouched. shifted_region overrides the computed M'.
    """
    U = rep(param).matrix
    if shifted_region is None:
        shifted_region = _transformed_region(rep, param, region)
    lhs = U.conj().T @ povm.effect(region).matrix @ U
    return float(np.max(np.abs(lhs - povm.effect(shifted_region).matrix)))


def _transformed_region(rep, param, region):
    space = rep.space
    if rep.group_label == 'translation_1d':
        k = int(round(param / space.dx))
        if hasattr(region, 'x_cells'):
            return region.shift(k, 0)
        return region.shift(k)
    if rep.group_label == 'boost_1d':
        k = int(round(param / space.dp))
        if hasattr(region, 'x_cells'):
            return region.shift(0, -k)
        return region
    raise ValueError('POVM covariance is defined for translation_1d and boost_1d, got {}'.format(
        rep.group_label))


@dataclass
class ResidualReport:
    relation: str
    params: dict = field(default_factory=dict)
    residual: float = 0.0
    tolerance: float = 1e-10
    passed: bool = field(init=False)

    def __post_init__(self):
        self.residual = float(self.residual)
        self.passed = bool(self.residual <= self.tolerance)

    def to_dict(self):
        d = asdict(self)
        d['pass'] = d.pop('passed')
        return d


def write_residual_reports(reports, path):
    write_json([r.to_dict() for r in reports], path)
    _logger.info('wrote {} residual rows to {}'.format(len(reports), path))
