"""
Quantum-jump unraveling of a Lindblad generator.

Between jumps a trajectory evolves under exp(-K t); the next jump happens when
||exp(-K s) psi||^2 falls to a uniform draw u, located by coarse steps of dt_max
followed by bisection. At a jump the channel j is chosen with probability
proportional to ||L_j psi||^2.

Each trajectory i draws from its own Philox stream keyed by master_seed XOR i, so
results do not depend on the number of workers.
"""
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np
from scipy import linalg

from errors import NegativeTimeError, TrajectoryLostError
from hilbert import DensityMatrix
from utils import MetricLogger, SmoothedValue

try:
    import ujson as json
except ImportError:
    try:
        import simplejson as json
    except ImportError:
        import json


_logger = logging.getLogger('trajectories')

_MASK64 = (1 << 64) - 1
_BISECT_STEPS = 60
_COND_LIMIT = 1e8


@dataclass(frozen=True)
class JumpConfig:
    """
    Trajectory i draws from Philox keyed by master_seed XOR i. Master seeds that
    differ only below the bit length of n_trajectories permute the same key set and
    give identical averages; pick seeds far apart (the scenarios shift --seed by 32 bits).
    """
    n_trajectories: int = 1000
    master_seed: int = 0
    dt_max: float = 0.1
    norm_tolerance: float = 1e-12
    workers: int = 1
    max_lost_fraction: float = 1e-3

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError('n_trajectories must be >= 1, got {}'.format(self.n_trajectories))
        if not self.dt_max > 0:
            raise ValueError('dt_max must be positive, got {}'.format(self.dt_max))
        if self.workers < 1:
            raise ValueError('workers must be >= 1, got {}'.format(self.workers))


@dataclass
class TrajectoryRecord:
    trajectory_id: int
    jump_times: list = field(default_factory=list)
    channels: list = field(default_factory=list)
    final_state: np.ndarray = None
    lost: bool = False

    def to_dict(self):
        return {'trajectory_id': self.trajectory_id, 'jump_times': list(self.jump_times),
                'channels': list(self.channels)}


def trajectory_rng(master_seed, trajectory_id):
    return np.random.Generator(np.random.Philox(key=(int(master_seed) ^ int(trajectory_id)) & _MASK64))


class NoJumpPropagator:
    """psi -> exp(-K s) psi, spectrally when K has a well-conditioned eigenbasis."""

    def __init__(self, K):
        self.K = np.asarray(K)
        w, V = np.linalg.eig(-self.K)
        self.spectral = np.linalg.cond(V) < _COND_LIMIT
        if self.spectral:
            self.w = w
            self.V = V
            self.V_inv = np.linalg.inv(V)

    def __call__(self, s, psi):
        if self.spectral:
            return self.V @ (np.exp(self.w * s) * (self.V_inv @ psi))
        return linalg.expm(-s * self.K) @ psi


def _norm2(psi):
    return float(np.real(np.vdot(psi, psi)))


def _run_one(trajectory_id, K, ops, psi0, t, config, step, prop):
    rng = trajectory_rng(config.master_seed, trajectory_id)
    record = TrajectoryRecord(trajectory_id)
    psi = np.array(psi0, dtype=complex)
    now = 0.0
    while True:
        u = rng.uniform()
        # coarse search for the interval in which the norm crosses u
        start, phi_start = now, psi
        crossed = False
        while start < t:
            dt = min(config.dt_max, t - start)
            phi_end = step @ phi_start if dt == config.dt_max else prop(dt, phi_start)
            if _norm2(phi_end) <= u:
                crossed = True
                break
            start, phi_start = start + dt, phi_end
        if not crossed:
            psi = phi_start
            break
        lo, hi = 0.0, dt
        for _ in range(_BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            if _norm2(prop(mid, phi_start)) > u:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * max(1.0, t):
                break
        now = start + hi
        phi = prop(hi, phi_start)
        rates = np.array([_norm2(L @ phi) for L in ops])
        total = rates.sum()
        if not np.isfinite(total) or total <= config.norm_tolerance * _norm2(phi):
            record.lost = True
            return record
        j = int(rng.choice(len(ops), p=rates / total))
        psi = ops[j] @ phi
        psi = psi / np.sqrt(_norm2(psi))
        record.jump_times.append(float(now))
        record.channels.append(j)
    n2 = _norm2(psi)
    if not np.isfinite(n2) or n2 <= config.norm_tolerance:
        record.lost = True
        return record
    record.final_state = psi / np.sqrt(n2)
    return record


def _run_block(args):
    ids, K, ops, psi0, t, config = args
    prop = NoJumpPropagator(K)
    step = linalg.expm(-config.dt_max * K)
    return [_run_one(i, K, ops, psi0, t, config, step, prop) for i in ids]


def _blocks(n, n_blocks):
    edges = np.linspace(0, n, n_blocks + 1).astype(int)
    return [list(range(edges[k], edges[k + 1])) for k in range(n_blocks)]


def unravel_jumps(gen, psi0, t, config, print_freq=None):
    """
    Returns (rho_avg, records): the mean of |psi_i(t)><psi_i(t)| over trajectories
    that finished, and one record per trajectory in id order.
    """
    if t < 0:
        raise NegativeTimeError(t)
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(_norm2(psi0) - 1) > 1e-10:
        raise ValueError('psi0 must be normalized, |psi0|^2 = {:.12g}'.format(_norm2(psi0)))
    K = np.array(gen.K)
    ops = [np.array(L.matrix) for L in gen.lindblad_ops]
    n_blocks = max(config.workers, min(config.n_trajectories, 4 * config.workers))
    chunks = [(ids, K, ops, psi0, t, config) for ids in _blocks(config.n_trajectories, n_blocks) if ids]

    metric_logger = MetricLogger(delimiter='  ')
    metric_logger.add_meter('jumps', SmoothedValue(window_size=len(chunks), fmt='{global_avg:.3f}'))
    header = 'Trajectories (workers={})'.format(config.workers)
    print_freq = print_freq or max(1, len(chunks) // 10)

    records = []
    if config.workers == 1:
        for chunk in metric_logger.log_every(chunks, print_freq, header, logger=_logger):
            block = _run_block(chunk)
            metric_logger.update(jumps=float(np.mean([len(r.jump_times) for r in block])))
            records.extend(block)
    else:
        with Pool(processes=config.workers) as pool:
            results = pool.imap(_run_block, chunks)
            for block in metric_logger.log_every(results, print_freq, header, logger=_logger,
                                                 total=len(chunks)):
                metric_logger.update(jumps=float(np.mean([len(r.jump_times) for r in block])))
                records.extend(block)

    lost = sum(r.lost for r in records)
    if lost > config.max_lost_fraction * config.n_trajectories:
        raise TrajectoryLostError(lost, config.n_trajectories)
    if lost:
        _logger.warning('{} of {} trajectories lost to norm underflow'.format(lost, config.n_trajectories))

    d = gen.space.d
    rho = np.zeros((d, d), dtype=complex)
    kept = 0
    for r in records:
        if r.lost:
            continue
        rho += np.outer(r.final_state, r.final_state.conj())
        kept += 1
    rho = rho / kept
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix.from_matrix(gen.space, rho), records


def first_jump_times(records):
    return np.array([r.jump_times[0] for r in records if r.jump_times])


def write_trajectory_records(records, path):
    """JSON lines {trajectory_id, jump_times, channels}."""
    with open(path, 'w') as f:
        for r in records:
            f.write(json.dumps(r.to_dict()) + '\n')
    _logger.info('wrote {} trajectory records to {}'.format(len(records), path))
