"""
Effects, POVMs and instruments on a periodic 1D grid (plus generic finite spaces for
the von Neumann instrument).

Position outcomes are grid cells, momentum outcomes are cells of the ascending
momentum lattice p_sorted. Phase-space integrals become cell sums with weight
dx dp / 2 pi hbar = 1/n.
"""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd

from errors import (FrameIncompletenessError, InvalidDensityError,
                    InvalidPVMError, NullEventError, RegionOverflowError)
from hilbert import (DensityMatrix, HilbertSpace, Operator, compose,
                     gaussian_packet, kraus_superop, momentum_function,
                     to_momentum_basis)


_logger = logging.getLogger('measurement')

EFFECT_TOL = 1e-10


@dataclass(frozen=True)
class Region:
    """A set of cell indices in range(n); periodic regions wrap when shifted."""
    cells: tuple
    n: int
    periodic: bool = True

    def __post_init__(self):
        cells = tuple(sorted(set(int(c) for c in self.cells)))
        if any(c < 0 or c >= self.n for c in cells):
            raise RegionOverflowError('cells {} outside range({})'.format(cells, self.n))
        object.__setattr__(self, 'cells', cells)

    @classmethod
    def interval(cls, start, stop, n, periodic=True):
        return cls(tuple(range(start, stop)), n, periodic)

    @classmethod
    def full(cls, n):
        return cls(tuple(range(n)), n)

    def shift(self, k):
        if self.periodic:
            return Region(tuple((c + k) % self.n for c in self.cells), self.n, True)
        moved = [c + k for c in self.cells]
        if any(c < 0 or c >= self.n for c in moved):
            raise RegionOverflowError('shift by {} cells leaves range({})'.format(k, self.n))
        return Region(tuple(moved), self.n, False)

    def indicator(self):
        chi = np.zeros(self.n)
        chi[list(self.cells)] = 1.0
        return chi

    def intersect(self, other):
        return Region(tuple(set(self.cells) & set(other.cells)), self.n, self.periodic)

    def isdisjoint(self, other):
        return not set(self.cells) & set(other.cells)

    def __or__(self, other):
        return Region(self.cells + other.cells, self.n, self.periodic)

    def __len__(self):
        return len(self.cells)


@dataclass(frozen=True)
class ProductRegion:
    """Rectangle M x N of position cells times momentum cells."""
    x_cells: Region
    p_cells: Region

    @classmethod
    def full(cls, n):
        return cls(Region.full(n), Region.full(n))

    def shift(self, kx, kp):
        return ProductRegion(self.x_cells.shift(kx), self.p_cells.shift(kp))


@dataclass(frozen=True, eq=False)
class POVM:
    space: HilbertSpace
    effect_of: Callable
    total_region: object
    normalization_defect: float = 0.0
    label: str = ''
    seed: object = None

    def effect(self, region):
        return self.effect_of(region)


@dataclass(frozen=True, eq=False)
class JointPOVM(POVM):
    frames: np.ndarray = None
    p_cells: tuple = ()


@dataclass(frozen=True, eq=False)
class SeedState:
    """Operator S generating the joint POVM; sigma is set for Gaussian seeds."""
    S: DensityMatrix
    sigma: float = None

    @classmethod
    def gaussian(cls, space, sigma):
        """Pure Gaussian packet of width sigma centred on the reference cell."""
        x0 = space.x_values[space.ref_index]
        psi = gaussian_packet(space, x0, 0.0, sigma, periodic=True)
        return cls(DensityMatrix.pure(space, psi), sigma)

    @property
    def space(self):
        return self.S.space

    def components(self, cutoff=1e-14):
        """(weights, vectors) with S = sum_k w_k |s_k><s_k|, vectors as rows."""
        w, V = np.linalg.eigh(self.S.matrix)
        keep = w > cutoff
        return w[keep], V[:, keep].T

    def position_density(self):
        """h_S^x indexed by cyclic displacement from the reference cell."""
        diag = np.clip(np.real(np.diag(self.S.matrix)), 0.0, None)
        return np.roll(diag, -self.space.ref_index)

    def momentum_density(self):
        """h_S^p indexed by DFT momentum displacement."""
        space = self.space
        # DFT round-off leaves weights of order -1e-18 on the tails
        sorted_diag = np.clip(np.real(np.diag(to_momentum_basis(space, self.S.matrix))), 0.0, None)
        return np.fft.ifftshift(sorted_diag)


def _check_density(h, n):
    h = np.asarray(h, dtype=float)
    if h.shape != (n,):
        raise InvalidDensityError('expected {} weights, got shape {}'.format(n, h.shape))
    if np.any(h < 0):
        raise InvalidDensityError('negative weight {:.3e}'.format(h.min()))
    if abs(h.sum() - 1) > 1e-10:
        raise InvalidDensityError('weights sum to {:.12g}'.format(h.sum()))
    return h


def _cyclic_smear(chi, h):
    """(chi * h)[j] = sum_j0 chi[j0] h[(j - j0) mod n]."""
    out = np.zeros_like(h)
    for j0 in np.flatnonzero(chi):
        out += chi[j0] * np.roll(h, j0)
    return out


def gaussian_smearing(space, sigma):
    """Normalized exp(-d^2 / 2 sigma^2) over cyclic displacements d."""
    d = space.minimal_image(space.dx * np.arange(space.n_points))
    h = np.exp(-d ** 2 / (2 * sigma ** 2))
    return h / h.sum()


def smeared_position_povm(space, h):
    space.require('grid1d')
    h = _check_density(h, space.n_points)

    def effect_of(region):
        return Operator(space, np.diag(_cyclic_smear(region.indicator(), h)))

    return POVM(space, effect_of, Region.full(space.n_points), label='position')


def sharp_position_pvm(space):
    h = np.zeros(space.n_points)
    h[0] = 1.0
    return smeared_position_povm(space, h)


def _sorted_to_dft(space, cells):
    n = space.n_points
    return [(c - n // 2) % n for c in cells]


def smeared_momentum_povm(space, h_p):
    """Effects diag_p((chi_N * h_p)(p)) with h_p indexed by DFT momentum displacement."""
    space.require('grid1d')
    h_p = _check_density(h_p, space.n_points)

    def effect_of(region):
        chi = np.zeros(space.n_points)
        chi[_sorted_to_dft(space, region.cells)] = 1.0
        values = _cyclic_smear(chi, h_p)
        m = momentum_function(space, values).matrix
        return Operator(space, 0.5 * (m + m.conj().T))

    return POVM(space, effect_of, Region.full(space.n_points), label='momentum')


def _phase_space_frames(space, seed, p_cells):
    """
    Frame vectors psi_{x0,p0,k} = sqrt(w_k) B(p0) T(x0) s_k, shape
    (n_x, n_p, rank, n): T rolls the seed from the reference cell to x0 and B
    multiplies by exp(i p0 (x - x0) / hbar).
    """
    n = space.n_points
    weights, vecs = seed.components()
    x = space.x_values
    p = space.p_sorted[list(p_cells)]
    frames = np.empty((n, len(p), len(weights), n), dtype=complex)
    for j0 in range(n):
        shifted = np.roll(vecs, j0 - space.ref_index, axis=1) * np.sqrt(weights)[:, None]
        phases = np.exp(1j * np.outer(p, x - x[j0]) / space.hbar)
        frames[j0] = phases[:, None, :] * shifted[None, :, :]
    return frames


def joint_xp_povm(space, seed, tolerance=1e-6, interior=None, momentum_cutoff=None):
    """
    F(M x N) = (1/n) sum_{x0 in M, p0 in N} W(x0, p0) S W(x0, p0)^dag. The
    normalization defect ||F(total) - 1||_max is measured on the interior cells
    (all cells by default) and stored on the POVM.
    """
    space.require('grid1d')
    n = space.n_points
    if momentum_cutoff is None:
        p_cells = tuple(range(n))
    else:
        p_cells = tuple(int(i) for i in np.flatnonzero(np.abs(space.p_sorted) <= momentum_cutoff))
    frames = _phase_space_frames(space, seed, p_cells)
    column = {c: i for i, c in enumerate(p_cells)}

    def effect_of(region):
        js = list(region.x_cells.cells)
        ks = [column[c] for c in region.p_cells.cells if c in column]
        V = frames[js][:, ks].reshape(-1, n)
        return Operator(space, V.T @ V.conj() / n)

    total = ProductRegion.full(n)
    F_total = effect_of(total).matrix
    block = slice(None) if interior is None else list(interior.cells)
    defect = float(np.max(np.abs((F_total - np.eye(n))[block][:, block])))
    _logger.debug('joint POVM frame defect %.3e over %d momentum cells', defect, len(p_cells))
    if defect > tolerance:
        raise FrameIncompletenessError(defect, tolerance)
    return JointPOVM(space, effect_of, total, normalization_defect=defect, label='joint_xp', seed=seed,
                     frames=frames, p_cells=p_cells)


def marginals(povm):
    """(F^x, F^p) with F^x(M) = F(M x all) and F^p(N) = F(all x N)."""
    if not isinstance(povm, JointPOVM):
        raise ValueError('marginals need a joint position-momentum POVM, got {!r}'.format(povm.label))
    n = povm.space.n_points
    full = Region.full(n)
    fx = POVM(povm.space, lambda M: povm.effect(ProductRegion(M, full)), full,
              povm.normalization_defect, label='position_marginal')
    fp = POVM(povm.space, lambda N: povm.effect(ProductRegion(full, N)), full,
              povm.normalization_defect, label='momentum_marginal')
    return fx, fp


def smearing_variances(seed):
    """(Var h_S^x, Var h_S^p) over displacements from the reference cell and zero momentum."""
    space = seed.space
    n = space.n_points
    hx = seed.position_density()
    dx_disp = space.minimal_image(space.dx * np.arange(n))
    hp = seed.momentum_density()
    dp_disp = space.p_values

    def variance(h, d):
        mean = np.sum(h * d)
        return float(np.sum(h * (d - mean) ** 2))

    return variance(hx, dx_disp), variance(hp, dp_disp)


def outcome_probability(rho, povm, region):
    """Tr(rho F(M)), clipped to [0, 1] after the bound check."""
    p = float(np.real(np.trace(rho.matrix @ povm.effect(region).matrix)))
    assert -EFFECT_TOL <= p <= 1 + EFFECT_TOL, 'probability {} outside [0, 1]'.format(p)
    return min(max(p, 0.0), 1.0)


def outcome_statistics(rho, povm, regions):
    """Table {region_id, probability}; regions is a mapping id -> region or a list."""
    items = regions.items() if isinstance(regions, dict) else enumerate(regions)
    rows = [{'region_id': k, 'probability': outcome_probability(rho, povm, r)} for k, r in items]
    return pd.DataFrame(rows, columns=['region_id', 'probability'])


@dataclass(frozen=True, eq=False)
class Instrument:
    """
    Region-indexed CP maps. kraus_of(region) yields Kraus matrices; operate_of,
    when set, applies the operation to a matrix directly.
    """
    space: HilbertSpace
    kraus_of: Callable
    total_region: object
    label: str = ''
    operate_of: Callable = None

    def operate(self, region, rho):
        r = np.asarray(rho.matrix if hasattr(rho, 'matrix') else rho)
        if self.operate_of is not None:
            return self.operate_of(region, r)
        out = np.zeros_like(r, dtype=complex)
        for K in self.kraus_of(region):
            out += K @ r @ K.conj().T
        return out

    def superop(self, region):
        return kraus_superop(self.space, list(self.kraus_of(region)))


def joint_xp_instrument(space, seed, tolerance=1e-6, interior=None):
    """
    Operations rho -> (1/n) sum_{(x0,p0) in M x N} W sqrt(S) W^dag rho W sqrt(S) W^dag;
    for a pure seed each Kraus operator is |psi_{x0,p0}><psi_{x0,p0}| / sqrt(n).
    """
    povm = joint_xp_povm(space, seed, tolerance=tolerance, interior=interior)
    n = space.n_points
    weights, vecs = seed.components()
    unit = povm.frames / np.sqrt(weights)[None, None, :, None]
    root_w = np.sqrt(np.sqrt(weights))

    def cells(region):
        for j in region.x_cells.cells:
            for k in region.p_cells.cells:
                yield j, k

    def kraus_of(region):
        # sqrt(S) = sum_k sqrt(w_k) |s_k><s_k|, moved along with the frame
        for j, k in cells(region):
            Psi = unit[j, k] * root_w[:, None]
            yield (Psi.T @ Psi.conj()) / np.sqrt(n)

    def operate_of(region, rho):
        js = list(region.x_cells.cells)
        ks = list(region.p_cells.cells)
        Psi = (unit[js][:, ks] * root_w[None, None, :, None]).reshape(len(js) * len(ks), len(weights), n)
        # G_c = Psi_c^* rho Psi_c^T, then sum_c Psi_c^T G_c Psi_c^*
        G = np.einsum('cki,ij,clj->ckl', Psi.conj(), rho, Psi)
        return np.einsum('cki,ckl,clj->ij', Psi, G, Psi.conj()) / n

    return Instrument(space, kraus_of, povm.total_region, label='joint_xp', operate_of=operate_of)


def instrument_effect(inst, region):
    """F'(region)[1] = sum_K K^dag K."""
    out = np.zeros((inst.space.d, inst.space.d), dtype=complex)
    for K in inst.kraus_of(region):
        out += K.conj().T @ K
    return Operator(inst.space, out)


def apply_instrument(inst, rho, region, min_probability=1e-12):
    """(F(region)[rho], probability, a-posteriori state)."""
    out = inst.operate(region, rho)
    prob = float(np.real(np.trace(out)))
    if prob <= min_probability:
        raise NullEventError(prob)
    post = out / prob
    post = 0.5 * (post + post.conj().T)
    return Operator(inst.space, out), prob, DensityMatrix.from_matrix(inst.space, post)


def a_priori_state(inst, rho):
    out = inst.operate(inst.total_region, rho)
    return DensityMatrix.from_matrix(inst.space, 0.5 * (out + out.conj().T))


def von_neumann_instrument(projectors, tol=1e-12):
    """Repeatable instrument rho -> sum_{i in M} E_i rho E_i over outcome indices."""
    projectors = list(projectors)
    if not projectors:
        raise InvalidPVMError('no projectors given')
    space = projectors[0].space
    d = space.d
    mats = [P.matrix for P in projectors]
    for i, P in enumerate(mats):
        if np.max(np.abs(P - P.conj().T)) > tol or np.max(np.abs(P @ P - P)) > tol:
            raise InvalidPVMError('element {} is not an orthogonal projector'.format(i))
        for j in range(i):
            if np.max(np.abs(P @ mats[j])) > tol:
                raise InvalidPVMError('elements {} and {} are not orthogonal'.format(j, i))
    if np.max(np.abs(sum(mats) - np.eye(d))) > tol:
        raise InvalidPVMError('projectors do not sum to the identity')
    k = len(mats)

    def kraus_of(region):
        for i in region.cells:
            yield mats[i]

    return Instrument(space, kraus_of, Region.full(k), label='von_neumann')


def compose_operations(inst, first_region, second_region):
    """F(first) after F(second) as a superoperator."""
    return compose(inst.superop(first_region), inst.superop(second_region))
