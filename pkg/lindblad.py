"""
Lindblad generators and their propagators.

    L[rho] = -(i/hbar)[H, rho] + sum_j (L_j rho L_j^dag - 1/2 {L_j^dag L_j, rho})
           = -K rho - rho K^dag + sum_j L_j rho L_j^dag,   K = (i/hbar) H + 1/2 sum_j L_j^dag L_j
"""
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from errors import (InvalidDensityMatrixError, InvalidHamiltonianError,
                    NegativeTimeError, PositivityLossError, SpaceMismatchError,
                    StiffnessFailure)
from hilbert import (HERMITIAN_TOL, POSITIVITY_TOL, DensityMatrix, Operator,
                     Superoperator, devectorize, vectorize)


_logger = logging.getLogger('lindblad')


@dataclass(frozen=True, eq=False)
class LindbladGenerator:
    H: Operator
    lindblad_ops: tuple = ()

    def __post_init__(self):
        ops = tuple(self.lindblad_ops)
        object.__setattr__(self, 'lindblad_ops', ops)
        for L in ops:
            if L.space != self.H.space:
                raise SpaceMismatchError('Lindblad operator on {} for H on {}'.format(L.space, self.H.space))
        defect = self.H.hermiticity_defect()
        if defect > HERMITIAN_TOL:
            raise InvalidHamiltonianError('max |H - H^dag| = {:.3e}'.format(defect))

    @property
    def space(self):
        return self.H.space

    @property
    def hbar(self):
        return self.H.space.hbar

    @cached_property
    def K(self):
        d = self.space.d
        k = (1j / self.hbar) * self.H.matrix
        for L in self.lindblad_ops:
            k = k + 0.5 * (L.matrix.conj().T @ L.matrix)
        return k.reshape(d, d)

    def apply(self, rho):
        """Action on an arbitrary operator matrix."""
        rho = np.asarray(rho)
        out = -self.K @ rho - rho @ self.K.conj().T
        for L in self.lindblad_ops:
            out = out + L.matrix @ rho @ L.matrix.conj().T
        return out

    def apply_hermitian(self, rho):
        """Action on a Hermitian matrix, returned exactly Hermitian."""
        rho = np.asarray(rho)
        half = -self.K @ rho
        for L in self.lindblad_ops:
            half = half + 0.5 * (L.matrix @ rho @ L.matrix.conj().T)
        return half + half.conj().T

    def adjoint_apply(self, X):
        """Heisenberg-picture generator L'[X] = -K^dag X - X K + sum_j L_j^dag X L_j."""
        X = np.asarray(X)
        out = -self.K.conj().T @ X - X @ self.K
        for L in self.lindblad_ops:
            out = out + L.matrix.conj().T @ X @ L.matrix
        return out


def generator_superop(gen):
    d = gen.space.d
    I = np.eye(d)
    K = gen.K
    m = -np.kron(I, K) - np.kron(K.conj(), I)
    for L in gen.lindblad_ops:
        m = m + np.kron(L.matrix.conj(), L.matrix)
    return Superoperator(gen.space, m)


def effective_K(gen):
    return Operator(gen.space, gen.K)


def jump_superop(gen):
    d = gen.space.d
    m = np.zeros((d * d, d * d), dtype=complex)
    for L in gen.lindblad_ops:
        m += np.kron(L.matrix.conj(), L.matrix)
    return Superoperator(gen.space, m)


def no_jump_superop(gen):
    d = gen.space.d
    I = np.eye(d)
    return Superoperator(gen.space, -np.kron(I, gen.K) - np.kron(gen.K.conj(), I))


def adjoint_generator(gen):
    S = generator_superop(gen)
    return Superoperator(gen.space, S.matrix.conj().T)


def propagator(gen, t, superop=None):
    if t < 0:
        raise NegativeTimeError(t)
    S = generator_superop(gen) if superop is None else superop
    return Superoperator(gen.space, linalg.expm(t * S.matrix))


def _as_state(space, matrix, eig_floor=POSITIVITY_TOL):
    try:
        return DensityMatrix.from_matrix(space, matrix, eig_floor=eig_floor)
    except InvalidDensityMatrixError as e:
        raise PositivityLossError(str(e)) from e


def evolve_expm(gen, rho0, t, superop=None):
    if t < 0:
        raise NegativeTimeError(t)
    if t == 0:
        return rho0
    U = propagator(gen, t, superop=superop)
    return _as_state(gen.space, devectorize(U.matrix @ vectorize(rho0), gen.space).matrix)


def evolve_expm_times(gen, rho0, times, superop=None):
    """States at every entry of a nondecreasing time axis, reusing the propagator of each increment."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise NegativeTimeError(float(times.min()))
    if np.any(np.diff(times) < 0):
        raise ValueError('times must be nondecreasing')
    S = generator_superop(gen) if superop is None else superop
    cache = {}
    v = vectorize(rho0).astype(complex)
    t_prev = 0.0
    states = []
    for t in times:
        dt = t - t_prev
        if dt > 0:
            key = round(dt, 12)
            if key not in cache:
                cache[key] = linalg.expm(dt * S.matrix)
            v = cache[key] @ v
        t_prev = t
        states.append(_as_state(gen.space, devectorize(v, gen.space).matrix))
    return states


def evolve_ode(gen, rho0, t, rel_tol=1e-8, times=None):
    """
    Adaptive RK45 integration of d rho/dt = L[rho] through matrix products only.
    Returns the state at t, or the list of states at `times` when given.
    """
    if t < 0:
        raise NegativeTimeError(t)
    if not 1e-14 < rel_tol < 1e-3:
        raise ValueError('rel_tol must lie in (1e-14, 1e-3), got {}'.format(rel_tol))
    d = gen.space.d
    rho0_m = np.array(rho0.matrix, dtype=complex)
    eig_floor = max(POSITIVITY_TOL, 1e3 * rel_tol)
    if t == 0:
        if times is not None:
            return [rho0 for _ in times]
        return rho0

    def rhs(_, y):
        return gen.apply_hermitian(y.reshape(d, d)).ravel()

    t_eval = None if times is None else np.asarray(times, dtype=float)
    sol = solve_ivp(rhs, (0.0, float(t)), rho0_m.ravel(), method='RK45',
                    rtol=rel_tol, atol=rel_tol, t_eval=t_eval)
    if sol.status != 0:
        raise StiffnessFailure(sol.message)
    _logger.debug('evolve_ode: %d rhs evaluations to t=%.4g', sol.nfev, t)
    if times is None:
        return _as_state(gen.space, sol.y[:, -1].reshape(d, d), eig_floor=eig_floor)
    return [_as_state(gen.space, sol.y[:, k].reshape(d, d), eig_floor=eig_floor) for k in range(sol.y.shape[1])]


def evolve_observable(gen, X, t):
    """Heisenberg-picture observable U'_t[X]."""
    if t < 0:
        raise NegativeTimeError(t)
    S = adjoint_generator(gen)
    v = linalg.expm(t * S.matrix) @ vectorize(X)
    return devectorize(v, gen.space)


def dyson_terms(gen, t, max_jumps):
    """
    The n-jump terms U_t^(n), n = 0..max_jumps, of the time-ordered expansion
    U_t = sum_n int K_{t-t_n} J ... J K_{t_1}, read off one block-bidiagonal exponential.
    """
    if t < 0:
        raise NegativeTimeError(t)
    D = gen.space.d ** 2
    S0 = no_jump_superop(gen).matrix
    J = jump_superop(gen).matrix
    n_blocks = max_jumps + 1
    B = np.zeros((n_blocks * D, n_blocks * D), dtype=complex)
    for n in range(n_blocks):
        B[n * D:(n + 1) * D, n * D:(n + 1) * D] = S0
        if n + 1 < n_blocks:
            B[n * D:(n + 1) * D, (n + 1) * D:(n + 2) * D] = J
    E = linalg.expm(t * B)
    return [Superoperator(gen.space, E[:D, n * D:(n + 1) * D]) for n in range(n_blocks)]
