"""
Finite-dimensional operator algebra: spaces, operators, density matrices and
superoperators acting on column-stacked operators.

Column stacking gives vec(A X B) = (B^T kron A) vec(X), so the Kraus map
X -> sum_i V_i X V_i^dag has the matrix sum_i conj(V_i) kron V_i.
"""
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy import linalg

from errors import (DimensionMismatchError, InvalidDensityMatrixError,
                    SpaceMismatchError)


HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-10

SPACE_KINDS = ('fock', 'qubit', 'grid1d', 'generic')


@dataclass(frozen=True)
class HilbertSpace:
    """Truncated Fock space, qubit, periodic 1D grid, or a bare generic space."""
    kind: str
    dim: int = 0
    n_points: int = 0
    dx: float = 0.0
    x_min: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.kind not in SPACE_KINDS:
            raise ValueError('unknown space kind {}, choose from {}'.format(self.kind, SPACE_KINDS))
        if not self.hbar > 0:
            raise ValueError('hbar must be positive, got {}'.format(self.hbar))
        if self.kind == 'fock' and self.dim < 2:
            raise ValueError('fock dim must be >= 2, got {}'.format(self.dim))
        if self.kind == 'generic' and self.dim < 1:
            raise ValueError('generic dim must be >= 1, got {}'.format(self.dim))
        if self.kind == 'grid1d':
            n = self.n_points
            if n < 4 or (n & (n - 1)) != 0:
                raise ValueError('grid n_points must be a power of two >= 4, got {}'.format(n))
            if not self.dx > 0:
                raise ValueError('grid dx must be positive, got {}'.format(self.dx))

    @classmethod
    def fock(cls, dim, hbar=1.0):
        return cls('fock', dim=int(dim), hbar=float(hbar))

    @classmethod
    def qubit(cls, hbar=1.0):
        return cls('qubit', hbar=float(hbar))

    @classmethod
    def grid1d(cls, n_points, dx, x_min=0.0, hbar=1.0):
        return cls('grid1d', n_points=int(n_points), dx=float(dx), x_min=float(x_min), hbar=float(hbar))

    @classmethod
    def generic(cls, dim, hbar=1.0):
        return cls('generic', dim=int(dim), hbar=float(hbar))

    @property
    def d(self):
        if self.kind == 'qubit':
            return 2
        if self.kind == 'grid1d':
            return self.n_points
        return self.dim

    def require(self, *kinds):
        if self.kind not in kinds:
            raise SpaceMismatchError('expected {} space, got {}'.format('/'.join(kinds), self.kind))

    ## grid geometry
    @property
    def length(self):
        self.require('grid1d')
        return self.n_points * self.dx

    @property
    def x_values(self):
        self.require('grid1d')
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def dp(self):
        self.require('grid1d')
        return 2 * np.pi * self.hbar / (self.n_points * self.dx)

    @property
    def p_values(self):
        """Momentum lattice in DFT order, negative frequencies wrapped."""
        self.require('grid1d')
        return 2 * np.pi * self.hbar * np.fft.fftfreq(self.n_points, d=self.dx)

    @property
    def p_sorted(self):
        return np.fft.fftshift(self.p_values)

    @property
    def ref_index(self):
        """Cell that carries the centre of seeds and smearing densities."""
        self.require('grid1d')
        return self.n_points // 2

    def minimal_image(self, separation):
        length = self.length
        return (np.asarray(separation) + length / 2) % length - length / 2

    def is_on_lattice(self, value, spacing, tol=1e-9):
        ratio = value / spacing
        return abs(ratio - round(ratio)) <= tol * max(1.0, abs(ratio))


def _check_same_space(a, b):
    if a != b:
        raise SpaceMismatchError('{} vs {}'.format(a, b))


@dataclass(frozen=True, eq=False)
class Operator:
    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.space.d
        if m.shape != (d, d):
            raise DimensionMismatchError('matrix shape {} on a space of dimension {}'.format(m.shape, d))
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)

    @property
    def d(self):
        return self.space.d

    def dag(self):
        return Operator(self.space, self.matrix.conj().T)

    def hermiticity_defect(self):
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def is_hermitian(self, tol=HERMITIAN_TOL):
        return self.hermiticity_defect() <= tol

    def __matmul__(self, other):
        _check_same_space(self.space, other.space)
        return Operator(self.space, self.matrix @ other.matrix)

    def __add__(self, other):
        _check_same_space(self.space, other.space)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        _check_same_space(self.space, other.space)
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar):
        return Operator(self.space, scalar * self.matrix)

    __rmul__ = __mul__

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    @classmethod
    def identity(cls, space):
        return cls(space, np.eye(space.d))

    @classmethod
    def zeros(cls, space):
        return cls(space, np.zeros((space.d, space.d)))


def density_defects(matrix):
    """Hermiticity, trace and eigenvalue-floor diagnostics of a candidate state."""
    m = np.asarray(matrix)
    herm = float(np.max(np.abs(m - m.conj().T)))
    trace = float(abs(np.trace(m) - 1))
    min_eig = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
    return {'hermiticity': herm, 'trace': trace, 'min_eig': min_eig}


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    op: Operator
    eig_floor: float = POSITIVITY_TOL

    def __post_init__(self):
        defects = density_defects(self.op.matrix)
        if defects['hermiticity'] > HERMITIAN_TOL:
            raise InvalidDensityMatrixError('not Hermitian (defect {:.3e})'.format(defects['hermiticity']))
        if defects['trace'] > TRACE_TOL:
            raise InvalidDensityMatrixError('trace off by {:.3e}'.format(defects['trace']))
        if defects['min_eig'] < -self.eig_floor:
            raise InvalidDensityMatrixError('smallest eigenvalue {:.3e}'.format(defects['min_eig']))

    @classmethod
    def from_matrix(cls, space, matrix, eig_floor=POSITIVITY_TOL):
        return cls(Operator(space, matrix), eig_floor=eig_floor)

    @classmethod
    def pure(cls, space, psi):
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(Operator(space, np.outer(psi, psi.conj())))

    @classmethod
    def maximally_mixed(cls, space):
        return cls(Operator(space, np.eye(space.d) / space.d))

    @property
    def space(self):
        return self.op.space

    @property
    def matrix(self):
        return self.op.matrix


@dataclass(frozen=True, eq=False)
class Superoperator:
    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d2 = self.space.d ** 2
        if m.shape != (d2, d2):
            raise DimensionMismatchError('superoperator shape {} on a space of dimension {}'.format(
                m.shape, self.space.d))
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)


def _as_matrix(x):
    if isinstance(x, (Operator, DensityMatrix)):
        return x.matrix
    return np.asarray(x)


## vectorization plumbing
def vectorize(op):
    return _as_matrix(op).reshape(-1, order='F')


def devectorize(vector, space):
    vector = np.asarray(vector)
    if vector.shape != (space.d ** 2,):
        raise DimensionMismatchError('vector of length {} for dimension {}'.format(vector.shape, space.d))
    return Operator(space, vector.reshape(space.d, space.d, order='F'))


def apply(S, rho):
    if isinstance(rho, (Operator, DensityMatrix)):
        _check_same_space(S.space, rho.space)
    return devectorize(S.matrix @ vectorize(rho), S.space)


def compose(S1, S2):
    """S1 after S2."""
    _check_same_space(S1.space, S2.space)
    return Superoperator(S1.space, S1.matrix @ S2.matrix)


def add(S1, S2):
    _check_same_space(S1.space, S2.space)
    return Superoperator(S1.space, S1.matrix + S2.matrix)


def scale(S, c):
    return Superoperator(S.space, c * S.matrix)


def adjoint_superop(S):
    """Map M' with Tr(X^dag M[rho]) = Tr((M'[X])^dag rho), i.e. the Hilbert-Schmidt adjoint."""
    return Superoperator(S.space, S.matrix.conj().T)


def identity_superop(space):
    return Superoperator(space, np.eye(space.d ** 2))


def kraus_superop(space, kraus_ops):
    d = space.d
    m = np.zeros((d * d, d * d), dtype=complex)
    for V in kraus_ops:
        V = _as_matrix(V)
        m += np.kron(V.conj(), V)
    return Superoperator(space, m)


def unitary_superop(U):
    return kraus_superop(U.space, [U])


def transpose_superop(space):
    """Transposition rho -> rho^T, the standard positive but not completely positive map."""
    d = space.d
    m = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            m[j + i * d, i + j * d] = 1.0
    return Superoperator(space, m)


def choi_matrix(S):
    """
    Choi matrix C = sum_ij |i><j| kron S[|i><j|], returned as an operator on a
    generic d^2-dimensional space. S is completely positive iff C >= 0.
    """
    d = S.space.d
    # S.matrix[k + l*d, i + j*d] = <k|S[|i><j|]|l>
    blocks = S.matrix.reshape(d, d, d, d)
    C = blocks.transpose(3, 1, 2, 0).reshape(d * d, d * d)
    return Operator(HilbertSpace.generic(d * d, hbar=S.space.hbar), C)


def choi_min_eigenvalue(S):
    C = choi_matrix(S).matrix
    return float(np.linalg.eigvalsh(0.5 * (C + C.conj().T))[0])


## standard operators
def fock_ops(space):
    space.require('fock')
    n = np.arange(space.dim)
    a = np.diag(np.sqrt(n[1:]), k=1)
    A = Operator(space, a)
    return A, A.dag(), Operator(space, np.diag(n.astype(float)))


def pauli_ops(space):
    """Pauli matrices in the basis (|0> ground, |1> excited), sigma_z = |1><1| - |0><0|."""
    space.require('qubit')
    sp = np.array([[0, 0], [1, 0]], dtype=complex)
    sm = sp.T.copy()
    sx = sp + sm
    sy = -1j * (sp - sm)
    sz = np.diag([-1.0, 1.0])
    return tuple(Operator(space, m) for m in (sx, sy, sz, sp, sm))


def dft_matrix(n):
    """Unitary DFT, F[k, j] = exp(-2 pi i k j / n) / sqrt(n)."""
    return np.fft.fft(np.eye(n), axis=0, norm='ortho')


def grid_ops(space):
    space.require('grid1d')
    F = dft_matrix(space.n_points)
    p = F.conj().T @ np.diag(space.p_values) @ F
    p = 0.5 * (p + p.conj().T)
    return Operator(space, np.diag(space.x_values)), Operator(space, p)


def momentum_function(space, values):
    """Operator f(p_hat) from the values of f on the DFT-ordered momentum lattice."""
    space.require('grid1d')
    F = dft_matrix(space.n_points)
    m = F.conj().T @ np.diag(values) @ F
    return Operator(space, m)


def translation_operator(space, a):
    """U(a) = exp((i/hbar) a p_hat); maps |x_j> to |x_j - a> for on-lattice a."""
    return momentum_function(space, np.exp(1j * a * space.p_values / space.hbar))


def boost_operator(space, q):
    """U(q) = exp((i/hbar) q x_hat)."""
    space.require('grid1d')
    return Operator(space, np.diag(np.exp(1j * q * space.x_values / space.hbar)))


def matrix_exponential(A, normal=False):
    """
    exp(A) by scaling-and-squaring Pade, or by a unitary eigendecomposition when the
    caller declares A normal.
    """
    A = np.asarray(A)
    if normal:
        T, Z = linalg.schur(A, output='complex')
        return Z @ np.diag(np.exp(np.diag(T))) @ Z.conj().T
    return linalg.expm(A)


## states
def fock_state(space, n):
    space.require('fock')
    psi = np.zeros(space.dim, dtype=complex)
    psi[n] = 1.0
    return psi


def coherent_state(space, alpha):
    """Coherent amplitude vector, renormalized on the truncated basis."""
    space.require('fock')
    n = np.arange(space.dim)
    log_norms = np.array([0.5 * np.log(float(factorial(int(k)))) for k in n])
    if alpha == 0:
        psi = np.zeros(space.dim, dtype=complex)
        psi[0] = 1.0
        return psi
    psi = np.exp(n * np.log(complex(alpha)) - log_norms - 0.5 * abs(alpha) ** 2)
    return psi / np.linalg.norm(psi)


def gaussian_packet(space, x0, p0, sigma, periodic=False):
    """Normalized samples of exp(-(x-x0)^2/4 sigma^2 + (i/hbar) p0 (x-x0))."""
    space.require('grid1d')
    disp = space.x_values - x0
    if periodic:
        disp = space.minimal_image(disp)
    psi = np.exp(-disp ** 2 / (4 * sigma ** 2) + 1j * p0 * disp / space.hbar)
    return psi / np.linalg.norm(psi)


def random_pure_state(space, rng):
    psi = rng.normal(size=space.d) + 1j * rng.normal(size=space.d)
    return psi / np.linalg.norm(psi)


def random_density_matrix(space, rng, rank=None):
    rank = space.d if rank is None else rank
    G = rng.normal(size=(space.d, rank)) + 1j * rng.normal(size=(space.d, rank))
    rho = G @ G.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix.from_matrix(space, rho / np.trace(rho).real)


def windowed_density_matrix(space, rng, start, stop, rank=None):
    """Random state supported on grid cells start..stop-1."""
    space.require('grid1d')
    width = stop - start
    rank = width if rank is None else rank
    G = np.zeros((space.d, rank), dtype=complex)
    G[start:stop] = rng.normal(size=(width, rank)) + 1j * rng.normal(size=(width, rank))
    rho = G @ G.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix.from_matrix(space, rho / np.trace(rho).real)


## diagnostics
def trace_norm(A):
    return float(np.sum(np.linalg.svd(_as_matrix(A), compute_uv=False)))


def trace_distance(rho, sigma):
    return 0.5 * trace_norm(_as_matrix(rho) - _as_matrix(sigma))


def expectation(op, rho):
    return complex(np.trace(_as_matrix(rho) @ _as_matrix(op)))


def fidelity(rho, sigma):
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    r = _as_matrix(rho)
    s = _as_matrix(sigma)
    w, V = np.linalg.eigh(0.5 * (r + r.conj().T))
    sr = (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T
    inner = sr @ s @ sr
    ev = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(ev, 0, None))) ** 2)


def leakage(rho):
    """Population of the two highest retained Fock states."""
    rho.space.require('fock')
    diag = np.real(np.diag(rho.matrix))
    return float(np.sum(diag[-2:]))


## momentum representation
def _sorted_dft(space):
    return np.fft.fftshift(dft_matrix(space.n_points), axes=0)


def to_momentum_basis(space, matrix):
    """Matrix elements <p|A|q> on the ascending momentum lattice p_sorted."""
    space.require('grid1d')
    F = _sorted_dft(space)
    return F @ _as_matrix(matrix) @ F.conj().T


def from_momentum_basis(space, matrix):
    space.require('grid1d')
    F = _sorted_dft(space)
    return F.conj().T @ np.asarray(matrix) @ F


def free_evolution(space, rho, t, mass):
    """Exact grid Schrodinger evolution under p_hat^2 / 2M."""
    U = momentum_function(space, np.exp(-1j * space.p_values ** 2 * t / (2 * mass * space.hbar))).matrix
    return Operator(space, U @ _as_matrix(rho) @ U.conj().T)
