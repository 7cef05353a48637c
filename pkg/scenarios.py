"""
Named experiments. Each scenario builds its models from a parameter mapping, writes
its curve files into the run directory and returns the criteria it is judged on
together with a dict of reported defects (leakage, frame defect, dropped weight).
"""
import copy
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import unitary_group

from covariance import (ResidualReport, ShiftIsometry, UnitaryRep,
                        covariance_residual, generalized_weyl_residual,
                        povm_covariance_residual, representation_residual,
                        unitarity_residual, weyl_residual, write_residual_reports)
from hilbert import (DensityMatrix, HilbertSpace, Operator, apply,
                     choi_min_eigenvalue, coherent_state, expectation, fock_ops, fock_state,
                     gaussian_packet, grid_ops, leakage, momentum_function,
                     random_density_matrix, to_momentum_basis, trace_distance, trace_norm,
                     transpose_superop, windowed_density_matrix)
from levy import (LevyTriplet, apply_decoherence, bochner_check,
                  decoherence_factor, decoherence_surface, levy_generator)
from lindblad import (evolve_expm, evolve_expm_times, evolve_ode,
                      generator_superop, propagator)
from measurement import (ProductRegion, Region, SeedState,
                         apply_instrument, compose_operations, instrument_effect,
                         joint_xp_instrument, joint_xp_povm, marginals,
                         outcome_statistics, smeared_momentum_povm,
                         smeared_position_povm, smearing_variances,
                         von_neumann_instrument)
from models import (DHOParams, QBMParams, QLBEParams, RotCovParams,
                    ShiftCovParams, TwoLevelParams, cat_state, coherence_ratio,
                    dho_cat_coherence, dho_generator, dho_moment_oracles,
                    dynamic_structure_factor_mb, gibbs_state, population_rate_matrix,
                    qbm_exact_position, qbm_exact_solutions, qbm_four_term_superop,
                    qbm_generator, qbm_moment_oracles, qlbe_boundary_weight,
                    qlbe_gibbs_state, qlbe_lindblad,
                    rotation_covariant_explicit, rotation_covariant_generator,
                    shift_covariant_generator, two_level_generator, two_level_oracles)
from trajectories import JumpConfig, unravel_jumps, write_trajectory_records
from utils import MetricLogger, deep_update, loglog_slope, write_csv, write_json


_logger = logging.getLogger('scenarios')

CURVE_COLUMNS = ['t', 'observable', 'analytic', 'numeric', 'abs_error']


@dataclass
class Criterion:
    """One acceptance check: value <= tolerance ('le') or value >= tolerance ('ge')."""
    name: str
    value: float
    tolerance: float
    comparison: str = 'le'
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.comparison not in ('le', 'ge'):
            raise ValueError('comparison must be le or ge, got {}'.format(self.comparison))
        self.value = float(self.value)
        self.tolerance = float(self.tolerance)
        if self.comparison == 'le':
            self.passed = bool(self.value <= self.tolerance)
        else:
            self.passed = bool(self.value >= self.tolerance)

    def to_dict(self):
        return {'name': self.name, 'value': self.value, 'tolerance': self.tolerance,
                'comparison': self.comparison, 'pass': self.passed}


@dataclass
class RunReport:
    scenario: str
    config_hash: str
    criteria: list = field(default_factory=list)
    wall_time: float = 0.0
    defects: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    error: str = ''

    @property
    def passed(self):
        return not self.error and bool(self.criteria) and all(c.passed for c in self.criteria)

    def max_errors(self):
        return {c.name: c.value for c in self.criteria if c.comparison == 'le'}

    def to_dict(self):
        return {'scenario': self.scenario, 'config_hash': self.config_hash,
                'pass': self.passed, 'criteria': [c.to_dict() for c in self.criteria],
                'max_errors': self.max_errors(), 'wall_time': self.wall_time,
                'defects': self.defects, 'outputs': self.outputs, 'error': self.error}


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    fn: object
    criteria: tuple
    outputs: tuple


SCENARIOS = {}


def register_scenario(name, description, criteria, outputs=()):
    def wrapper(fn):
        SCENARIOS[name] = Scenario(name, description, fn, tuple(criteria), tuple(outputs))
        return fn
    return wrapper


def list_scenarios():
    return [(s.name, s.description) for s in SCENARIOS.values()]


def _grid(g, hbar):
    return HilbertSpace.grid1d(g['n_points'], g['dx'], x_min=g.get('x_min', 0.0), hbar=hbar)


def _out(args, filename):
    return os.path.join(args.output_dir, filename)


def _max_abs(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


@register_scenario(
    'dho_moments', 'Damped oscillator <a(t)> and <N(t)> against the closed forms; leakage; Gibbs stationarity',
    criteria=('max_abs_error_a', 'max_abs_error_n', 'max_leakage', 'gibbs_residual'),
    outputs=('dho_moments.csv',))
def dho_moments(p, args, _logger):
    omega = p['omega']
    params = DHOParams(omega=omega, eta=p['eta_over_omega'] * omega,
                       beta=p['beta_hbar_omega'] / (args.hbar * omega), dim=p['dim'], hbar=args.hbar)
    space = params.space
    gen = dho_generator(params)
    rho0 = DensityMatrix.pure(space, coherent_state(space, complex(*p['alpha'])))
    times = np.linspace(0.0, p['t_max_eta'] / params.eta, p['n_times'])
    states = evolve_expm_times(gen, rho0, times)

    a, _, N = fock_ops(space)
    a_num = np.array([expectation(a, s) for s in states])
    n_num = np.array([expectation(N, s).real for s in states])
    a_ref, n_ref = dho_moment_oracles(params, rho0, times)
    rows = []
    for k, t in enumerate(times):
        for name, ref, num in (('a_re', a_ref[k].real, a_num[k].real),
                               ('a_im', a_ref[k].imag, a_num[k].imag),
                               ('n', n_ref[k], n_num[k])):
            rows.append({'t': t, 'observable': name, 'analytic': ref, 'numeric': num,
                         'abs_error': abs(ref - num)})
    write_csv(pd.DataFrame(rows, columns=CURVE_COLUMNS), _out(args, 'dho_moments.csv'))

    leak = max(leakage(s) for s in states)
    w = gibbs_state(space, omega, params.beta)
    criteria = [
        Criterion('max_abs_error_a', np.max(np.abs(a_num - a_ref)), p['tolerance']),
        Criterion('max_abs_error_n', np.max(np.abs(n_num - n_ref)), p['tolerance']),
        Criterion('max_leakage', leak, p['leakage_tolerance']),
        Criterion('gibbs_residual', trace_norm(gen.apply(w.matrix)), p['gibbs_tolerance']),
    ]
    return criteria, {'leakage': leak, 'n_beta': params.n_beta}


@register_scenario(
    'dho_cat', 'Zero-temperature decoherence of a two-coherent-state superposition',
    criteria=('max_abs_error_coherence', 'max_leakage'),
    outputs=('dho_cat.csv',))
def dho_cat(p, args, _logger):
    omega, eta = p['omega'], p['eta']
    params = DHOParams(omega=omega, eta=eta, dim=p['dim'], hbar=args.hbar, zero_temperature=True)
    space = params.space
    gen = dho_generator(params)
    S = generator_superop(gen)
    times = [float(t) for t in p['times']]
    props = [propagator(gen, t, superop=S) for t in times]

    rows = []
    leak = 0.0
    metric_logger = MetricLogger(delimiter='  ')
    for amp in metric_logger.log_every(p['amplitudes'], 1, 'Cat amplitudes', logger=_logger):
        alpha = complex(amp)
        rho0 = cat_state(space, alpha, -alpha)
        for t, U in zip(times, props):
            rho_t = apply(U, rho0)
            decay = np.exp(-1j * omega * t - 0.5 * eta * t)
            numeric = coherence_ratio(rho_t, space, alpha * decay, -alpha * decay)
            analytic = dho_cat_coherence(alpha, -alpha, eta, t)
            leak = max(leak, leakage(rho_t))
            rows.append({'t': t, 'observable': 'coherence_alpha_{:g}'.format(abs(alpha)),
                         'analytic': analytic, 'numeric': numeric, 'abs_error': abs(analytic - numeric)})
        metric_logger.update(max_error=max(r['abs_error'] for r in rows))
    df = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    write_csv(df, _out(args, 'dho_cat.csv'))
    criteria = [
        Criterion('max_abs_error_coherence', df['abs_error'].max(), p['tolerance']),
        Criterion('max_leakage', leak, p['leakage_tolerance']),
    ]
    return criteria, {'leakage': leak}


@register_scenario(
    'two_level', 'Bloch equations: P_e(t) and C(t) against the closed forms; asymptote; Gibbs stationarity',
    criteria=('max_abs_error_p_e', 'max_abs_error_coherence', 'asymptote_error', 'gibbs_residual'),
    outputs=('two_level.csv',))
def two_level(p, args, _logger):
    rng = np.random.default_rng(args.seed)
    rows = []
    err_pe = err_c = err_asym = gibbs = 0.0
    for nb in p['n_betas']:
        params = TwoLevelParams.from_n_beta(p['omega'], p['eta'], nb, hbar=args.hbar)
        space = params.space
        gen = two_level_generator(params)
        S = generator_superop(gen)
        for _ in range(p['n_samples']):
            rho0 = random_density_matrix(space, rng)
            t = float(rng.uniform(0.0, p['t_max']))
            rho_t = evolve_expm(gen, rho0, t, superop=S).matrix
            pe_ref, c_ref = two_level_oracles(params, rho0, t)
            err_pe = max(err_pe, abs(pe_ref - rho_t[1, 1].real))
            err_c = max(err_c, abs(c_ref - rho_t[1, 0]))
            rows.append({'n_beta': nb, 't': t, 'observable': 'p_e', 'analytic': float(pe_ref),
                         'numeric': rho_t[1, 1].real, 'abs_error': abs(pe_ref - rho_t[1, 1].real)})
            rows.append({'n_beta': nb, 't': t, 'observable': 'coherence_abs', 'analytic': abs(c_ref),
                         'numeric': abs(rho_t[1, 0]), 'abs_error': abs(abs(c_ref) - abs(rho_t[1, 0]))})

        excited = DensityMatrix.pure(space, [0.0, 1.0])
        t_inf = p['asymptote_eta_bar'] / params.eta_bar
        pe_inf = evolve_expm(gen, excited, t_inf, superop=S).matrix[1, 1].real
        err_asym = max(err_asym, abs(pe_inf - nb / (2 * nb + 1)))
        w = gibbs_state(space, params.omega, params.beta)
        gibbs = max(gibbs, trace_norm(gen.apply(w.matrix)))

    write_csv(pd.DataFrame(rows, columns=['n_beta'] + CURVE_COLUMNS), _out(args, 'two_level.csv'))
    criteria = [
        Criterion('max_abs_error_p_e', err_pe, p['tolerance']),
        Criterion('max_abs_error_coherence', err_c, p['tolerance']),
        Criterion('asymptote_error', err_asym, p['tolerance']),
        Criterion('gibbs_residual', gibbs, p['gibbs_tolerance']),
    ]
    return criteria, {}


@register_scenario(
    'rotation_covariant', 'Rotation-covariant qubit generator: explicit form, reduction to the Bloch equations, '
                          'SO(2) covariance and pure dephasing',
    criteria=('explicit_form_error', 'two_level_reduction_error', 'so2_covariance',
              'dephasing_population_drift', 'dephasing_coherence_error'),
    outputs=('rotation_covariant.csv',))
def rotation_covariant(p, args, _logger):
    rng = np.random.default_rng(args.seed)
    hbar = args.hbar
    space = HilbertSpace.qubit(hbar=hbar)
    rep = UnitaryRep('SO2_spin', space)
    samples = [random_density_matrix(space, rng) for _ in range(p['n_samples'])]

    explicit = cov = 0.0
    for c_minus, c_zero, c_plus in p['c_sets']:
        rc = RotCovParams(c_minus, c_zero, c_plus, hamiltonian_coeff=p['hamiltonian_coeff'], hbar=hbar)
        S = generator_superop(rotation_covariant_generator(rc))
        explicit = max(explicit, _max_abs(S.matrix, rotation_covariant_explicit(rc).matrix))
        cov = max(cov, covariance_residual(S, rep, p['angles'], samples))

    nb, omega, eta = p['reduction_n_beta'], p['omega'], p['eta']
    tl = TwoLevelParams.from_n_beta(omega, eta, nb, hbar=hbar)
    rc = RotCovParams(c_minus=0.5 * eta * (tl.n_beta + 1), c_zero=0.0, c_plus=0.5 * eta * tl.n_beta,
                      hamiltonian_coeff=0.5 * hbar * omega, hbar=hbar)
    reduction = _max_abs(generator_superop(rotation_covariant_generator(rc)).matrix,
                         generator_superop(two_level_generator(tl)).matrix)

    c0 = p['dephasing_rate']
    gen = rotation_covariant_generator(RotCovParams(0.0, c0, 0.0, hbar=hbar))
    plus = DensityMatrix.pure(space, np.array([1.0, 1.0]) / np.sqrt(2))
    rows = []
    drift = coh = 0.0
    for t in p['times']:
        rho_t = evolve_expm(gen, plus, t).matrix
        ref = 0.5 * np.exp(-2 * c0 * t)
        drift = max(drift, _max_abs(np.diag(rho_t).real, [0.5, 0.5]))
        coh = max(coh, abs(abs(rho_t[1, 0]) - ref))
        rows.append({'t': t, 'observable': 'coherence_abs', 'analytic': ref,
                     'numeric': abs(rho_t[1, 0]), 'abs_error': abs(abs(rho_t[1, 0]) - ref)})
    write_csv(pd.DataFrame(rows, columns=CURVE_COLUMNS), _out(args, 'rotation_covariant.csv'))

    criteria = [
        Criterion('explicit_form_error', explicit, p['matrix_tolerance']),
        Criterion('two_level_reduction_error', reduction, p['matrix_tolerance']),
        Criterion('so2_covariance', cov, p['covariance_tolerance']),
        Criterion('dephasing_population_drift', drift, p['tolerance']),
        Criterion('dephasing_coherence_error', coh, p['tolerance']),
    ]
    return criteria, {}


@register_scenario(
    'qbm_moments', 'Quantum Brownian motion with friction: momentum relaxation rate and energy equipartition',
    criteria=('decay_rate_rel_error', 'max_abs_error_p', 'max_abs_error_energy'),
    outputs=('qbm_moments.csv',))
def qbm_moments(p, args, _logger):
    grid = _grid(p['grid'], args.hbar)
    params = QBMParams(p['mass'], p['eta'], p['beta'], grid, include_friction=True)
    rho0 = DensityMatrix.pure(grid, gaussian_packet(grid, p['x0'], p['p0'], p['sigma']))
    times = np.linspace(0.0, p['t_max'], p['n_times'])
    states = evolve_ode(qbm_generator(params), rho0, p['t_max'], rel_tol=args.rel_tol, times=times)

    _, mom = grid_ops(grid)
    kinetic = momentum_function(grid, grid.p_values ** 2 / (2 * params.mass))
    mean_p = np.array([expectation(mom, s).real for s in states])
    mean_e = np.array([expectation(kinetic, s).real for s in states])
    p_ref, e_ref = qbm_moment_oracles(params, rho0, times)
    slope = np.polyfit(times, np.log(mean_p), 1)[0]

    rows = []
    for k, t in enumerate(times):
        rows.append({'t': t, 'observable': 'p', 'analytic': p_ref[k], 'numeric': mean_p[k],
                     'abs_error': abs(p_ref[k] - mean_p[k])})
        rows.append({'t': t, 'observable': 'energy', 'analytic': e_ref[k], 'numeric': mean_e[k],
                     'abs_error': abs(e_ref[k] - mean_e[k])})
    write_csv(pd.DataFrame(rows, columns=CURVE_COLUMNS), _out(args, 'qbm_moments.csv'))
    criteria = [
        Criterion('decay_rate_rel_error', abs(-slope / params.eta - 1), p['rate_tolerance']),
        Criterion('max_abs_error_p', _max_abs(mean_p, p_ref), p['tolerance']),
        Criterion('max_abs_error_energy', _max_abs(mean_e, e_ref), p['tolerance']),
    ]
    return criteria, {'fitted_rate': float(-slope), 'thermal_length': params.thermal_length}


@register_scenario(
    'qbm_exact', 'Quantum Brownian motion: Lindblad vs four-term form, frictionless closed forms vs ODE',
    criteria=('four_term_error', 'momentum_form_error', 'position_form_error'),
    outputs=('qbm_exact.csv',))
def qbm_exact(p, args, _logger):
    small = _grid(p['four_term_grid'], args.hbar)
    with_friction = QBMParams(p['mass'], p['eta'], p['beta'], small, include_friction=True)
    four_term = _max_abs(generator_superop(qbm_generator(with_friction)).matrix,
                         qbm_four_term_superop(with_friction).matrix)

    grid = _grid(p['grid'], args.hbar)
    params = QBMParams(p['mass'], p['eta'], p['beta'], grid, include_friction=False)
    half = 0.5 * p['separation']
    psi = gaussian_packet(grid, -half, 0.0, p['sigma']) + gaussian_packet(grid, half, 0.0, p['sigma'])
    rho0 = DensityMatrix.pure(grid, psi)
    t = p['t']
    rho_t = evolve_ode(qbm_generator(params), rho0, t, rel_tol=args.rel_tol).matrix
    exact_p, exact_x = qbm_exact_solutions(params, rho0, t)

    x = grid.x_values
    numeric = np.real(np.diag(rho_t))
    analytic = np.real(np.diag(exact_p.matrix))
    df = pd.DataFrame({'x': x, 'analytic': analytic, 'numeric': numeric, 'abs_error': np.abs(analytic - numeric)},
                      columns=['x', 'analytic', 'numeric', 'abs_error'])
    write_csv(df, _out(args, 'qbm_exact.csv'))

    i, j = int(np.argmin(np.abs(x + half))), int(np.argmin(np.abs(x - half)))
    ratio = abs(rho_t[i, j]) / abs(rho0.matrix[i, j])
    criteria = [
        Criterion('four_term_error', four_term, p['matrix_tolerance']),
        Criterion('momentum_form_error', trace_norm(exact_p.matrix - rho_t), p['tolerance']),
        Criterion('position_form_error', trace_norm(exact_x.matrix - rho_t), p['tolerance']),
    ]
    return criteria, {'coherence_ratio': float(ratio), 'd_pp': params.d_pp, 'd_xx': params.d_xx}


@register_scenario(
    'qlbe_gibbs', 'Quantum linear Boltzmann equation: trace preservation, detailed balance, rate matrix, '
                  'Gibbs stationarity',
    criteria=('trace_preservation', 'detailed_balance', 'population_column_sums', 'gibbs_residual'),
    outputs=('qlbe_populations.csv',))
def qlbe_gibbs(p, args, _logger):
    rng = np.random.default_rng(args.seed)
    grid = _grid(p['grid'], args.hbar)
    params = QLBEParams.from_cells(p['mass'], p['gas_mass'], p['beta'], p['density'], grid,
                                   p['transfer_cells'], amplitude=p['amplitude'])
    gen = qlbe_lindblad(params)

    samples = [random_density_matrix(grid, rng) for _ in range(p['n_samples'])]
    tp = max(abs(np.trace(gen.apply(s.matrix))) for s in samples)

    db = 0.0
    for q, E in p['detailed_balance_points']:
        ratio = (dynamic_structure_factor_mb(q, E, params.gas_mass, params.beta)
                 / dynamic_structure_factor_mb(q, -E, params.gas_mass, params.beta))
        db = max(db, abs(float(ratio) * np.exp(params.beta * E) - 1))

    R = population_rate_matrix(gen)
    w = qlbe_gibbs_state(params)
    gibbs_pop = np.real(np.diag(to_momentum_basis(grid, w.matrix)))
    df = pd.DataFrame({'p': grid.p_sorted, 'gibbs_population': gibbs_pop, 'escape_rate': -np.diag(R),
                       'stationarity': R @ gibbs_pop},
                      columns=['p', 'gibbs_population', 'escape_rate', 'stationarity'])
    write_csv(df, _out(args, 'qlbe_populations.csv'))

    boundary = qlbe_boundary_weight(params)
    _logger.info('qlbe: Gibbs-weighted rate dropped at the momentum edges {:.3e}'.format(boundary))
    criteria = [
        Criterion('trace_preservation', tp, p['trace_tolerance']),
        Criterion('detailed_balance', db, p['detailed_balance_tolerance']),
        Criterion('population_column_sums', np.max(np.abs(R.sum(axis=0))), p['trace_tolerance']),
        Criterion('gibbs_residual', trace_norm(gen.apply(w.matrix)), p['gibbs_tolerance']),
    ]
    return criteria, {'boundary_weight': boundary}


@register_scenario(
    'povm_joint', 'Joint position-momentum POVM: frame completeness, marginals, variances, instrument '
                  'consistency and covariance',
    criteria=('frame_defect', 'variance_product_rel_error', 'marginal_position_error',
              'marginal_momentum_error', 'instrument_consistency', 'duality', 'instrument_trace',
              'povm_covariance', 'outcome_total_probability'),
    outputs=('povm_joint_outcomes.csv',))
def povm_joint(p, args, _logger):
    rng = np.random.default_rng(args.seed)
    hbar = args.hbar
    grid = _grid(p['grid'], hbar)
    n = grid.n_points
    seed = SeedState.gaussian(grid, p['sigma_cells'] * grid.dx)
    lo, hi = p['interior']
    interior = Region.interval(lo, hi, n)
    povm = joint_xp_povm(grid, seed, tolerance=p['frame_tolerance'], interior=interior)

    fx, fp = marginals(povm)
    sx = smeared_position_povm(grid, seed.position_density())
    sp = smeared_momentum_povm(grid, seed.momentum_density())
    regions = [Region.interval(s, s + p['region_width'], n) for s in p['region_starts']]
    marg_x = max(_max_abs(fx.effect(M).matrix, sx.effect(M).matrix) for M in regions)
    marg_p = max(_max_abs(fp.effect(N).matrix, sp.effect(N).matrix) for N in regions)
    vx, vp = smearing_variances(seed)
    var_err = abs(vx * vp / (hbar ** 2 / 4) - 1)

    inst = joint_xp_instrument(grid, seed, tolerance=p['frame_tolerance'], interior=interior)
    c = n // 2
    rect = ProductRegion(Region.interval(c - 2, c + 2, n), Region.interval(c - 2, c + 2, n))
    consistency = _max_abs(instrument_effect(inst, rect).matrix, povm.effect(rect).matrix)
    rho = random_density_matrix(grid, rng)
    duality = abs(np.trace(inst.operate(rect, rho)) - np.trace(rho.matrix @ povm.effect(rect).matrix))
    total_trace = abs(np.trace(inst.operate(inst.total_region, rho)) - 1)

    translate = UnitaryRep('translation_1d', grid)
    boost = UnitaryRep('boost_1d', grid)
    cov = 0.0
    for k in p['shift_cells']:
        cov = max(cov,
                  povm_covariance_residual(sx, translate, k * grid.dx, regions[0]),
                  povm_covariance_residual(sx, boost, k * grid.dp, regions[0]),
                  povm_covariance_residual(povm, translate, k * grid.dx, rect),
                  povm_covariance_residual(povm, boost, k * grid.dp, rect))

    b = p['tile_cells']
    tiles = {}
    for i in range(n // b):
        for j in range(n // b):
            tiles['x{}_p{}'.format(i, j)] = ProductRegion(Region.interval(i * b, (i + 1) * b, n),
                                                          Region.interval(j * b, (j + 1) * b, n))
    stats = outcome_statistics(seed.S, povm, tiles)
    write_csv(stats, _out(args, 'povm_joint_outcomes.csv'))

    criteria = [
        Criterion('frame_defect', povm.normalization_defect, p['frame_tolerance']),
        Criterion('variance_product_rel_error', var_err, p['variance_tolerance']),
        Criterion('marginal_position_error', marg_x, p['marginal_tolerance']),
        Criterion('marginal_momentum_error', marg_p, p['marginal_tolerance']),
        Criterion('instrument_consistency', consistency, p['instrument_tolerance']),
        Criterion('duality', duality, p['duality_tolerance']),
        Criterion('instrument_trace', total_trace, p['frame_tolerance']),
        Criterion('povm_covariance', cov, p['marginal_tolerance']),
        Criterion('outcome_total_probability', abs(stats['probability'].sum() - 1), p['frame_tolerance']),
    ]
    return criteria, {'normalization_defect': povm.normalization_defect,
                      'position_variance': vx, 'momentum_variance': vp}


@register_scenario(
    'instrument_repeat', 'Von Neumann instrument: repeatability, composition law and qubit projection',
    criteria=('repeatability', 'composition_law', 'qubit_projection_error', 'trace_preservation'),
    outputs=('instrument_log.json',))
def instrument_repeat(p, args, _logger):
    rng = np.random.default_rng(args.seed)
    d = sum(p['outcome_ranks'])
    space = HilbertSpace.generic(d, hbar=args.hbar)
    V = unitary_group.rvs(d, random_state=rng)
    projectors, start = [], 0
    for r in p['outcome_ranks']:
        cols = V[:, start:start + r]
        projectors.append(Operator(space, cols @ cols.conj().T))
        start += r
    inst = von_neumann_instrument(projectors)
    k = len(projectors)

    repeat = trace = 0.0
    log = []
    for s in range(p['n_samples']):
        rho = random_density_matrix(space, rng)
        for i in range(k):
            once = inst.operate(Region((i,), k), rho)
            twice = inst.operate(Region((i,), k), once)
            repeat = max(repeat, _max_abs(twice, once))
            if s == 0:
                log.append({'outcome': i, 'probability': float(np.real(np.trace(once)))})
        trace = max(trace, abs(np.trace(inst.operate(inst.total_region, rho)) - 1))
    write_json(log, _out(args, 'instrument_log.json'))

    law = 0.0
    for M, N in p['region_pairs']:
        M, N = Region(tuple(M), k), Region(tuple(N), k)
        law = max(law, _max_abs(compose_operations(inst, M, N).matrix, inst.superop(M.intersect(N)).matrix))

    qubit = HilbertSpace.qubit(hbar=args.hbar)
    qinst = von_neumann_instrument([Operator(qubit, np.diag([1.0, 0.0])), Operator(qubit, np.diag([0.0, 1.0]))])
    plus = DensityMatrix.pure(qubit, np.array([1.0, 1.0]) / np.sqrt(2))
    qerr = 0.0
    for i in range(2):
        _, prob, post = apply_instrument(qinst, plus, Region((i,), 2))
        target = np.zeros((2, 2))
        target[i, i] = 1.0
        qerr = max(qerr, abs(prob - 0.5), _max_abs(post.matrix, target))

    criteria = [
        Criterion('repeatability', repeat, p['tolerance']),
        Criterion('composition_law', law, p['tolerance']),
        Criterion('qubit_projection_error', qerr, p['tolerance']),
        Criterion('trace_preservation', trace, p['tolerance']),
    ]
    return criteria, {}


@register_scenario(
    'levy_surface', 'Translation-covariant decoherence: characteristic-function invariants, Bochner check, '
                    'Gaussian/QBM equivalence',
    criteria=('phi_at_zero', 'phi_modulus_excess', 'multiplicativity', 'bochner_min_eig',
              'gaussian_qbm_equivalence', 'generator_equivalence'),
    outputs=('levy_surface.csv',))
def levy_surface(p, args, _logger):
    rng = np.random.default_rng(args.seed)
    hbar = args.hbar
    triplets = {name: LevyTriplet.from_config(cfg, hbar=hbar) for name, cfg in p['triplets'].items()}
    times = [float(t) for t in p['times']]
    xs = np.linspace(-p['x_extent'], p['x_extent'], p['n_x'])

    at_zero = excess = mult = 0.0
    for trip in triplets.values():
        for t in times:
            phi = decoherence_factor(trip, t, xs)
            at_zero = max(at_zero, abs(decoherence_factor(trip, t, 0.0) - 1))
            excess = max(excess, float(np.max(np.abs(phi))) - 1.0, 0.0)
            for s in times:
                mult = max(mult, _max_abs(decoherence_factor(trip, t + s, xs),
                                          phi * decoherence_factor(trip, s, xs)))

    grid = _grid(p['grid'], hbar)
    min_eig = np.inf
    for trip in triplets.values():
        for t in p['bochner_times']:
            _, e = bochner_check(trip, t, grid)
            min_eig = min(min_eig, e)

    rho = random_density_matrix(grid, rng)
    d_pp = p['d_pp']
    gaussian = LevyTriplet(D=2 * d_pp / hbar ** 2, hbar=hbar)
    t = p['t']
    equiv = _max_abs(apply_decoherence(rho, gaussian, t).matrix,
                     qbm_exact_position(grid, rho, t, d_pp, 0.0).matrix)
    gen_err = 0.0
    for trip in triplets.values():
        gen_err = max(gen_err, _max_abs(evolve_expm(levy_generator(trip, grid), rho, t).matrix,
                                        apply_decoherence(rho, trip, t).matrix))

    write_csv(decoherence_surface(triplets[p['surface_triplet']], times, xs), _out(args, 'levy_surface.csv'))
    criteria = [
        Criterion('phi_at_zero', at_zero, p['exact_tolerance']),
        Criterion('phi_modulus_excess', excess, p['exact_tolerance']),
        Criterion('multiplicativity', mult, p['multiplicativity_tolerance']),
        Criterion('bochner_min_eig', min_eig, -p['bochner_tolerance'], comparison='ge'),
        Criterion('gaussian_qbm_equivalence', equiv, p['equivalence_tolerance']),
        Criterion('generator_equivalence', gen_err, p['generator_tolerance']),
    ]
    return criteria, {}


def _audit_models(p, hbar):
    """(name, generator, group label, group parameters, samples) per audited model."""
    rng = np.random.default_rng(p['sample_seed'])
    k = p['n_samples']
    out = []

    dim = p['fock_dim']
    dho = DHOParams(omega=p['omega'], eta=p['eta'], beta=p['beta'], dim=dim, hbar=hbar)
    shift = ShiftCovParams(eta_0=p['eta_0'], eta_m=tuple(p['eta_m']), omega=p['omega'], beta=p['beta'],
                           dim=dim, hbar=hbar)
    fock_samples = [random_density_matrix(dho.space, rng) for _ in range(k)]
    out.append(('dho', dho_generator(dho), 'U1_phase', p['phases'], fock_samples))
    out.append(('shift_covariant', shift_covariant_generator(shift), 'U1_phase', p['phases'], fock_samples))

    qubit = HilbertSpace.qubit(hbar=hbar)
    qubit_samples = [random_density_matrix(qubit, rng) for _ in range(k)]
    tl = TwoLevelParams.from_n_beta(p['omega'], p['eta'], p['n_beta'], hbar=hbar)
    rc = RotCovParams(*p['c_set'], hamiltonian_coeff=p['hamiltonian_coeff'], hbar=hbar)
    out.append(('two_level', two_level_generator(tl), 'SO2_spin', p['angles'], qubit_samples))
    out.append(('rotation_covariant', rotation_covariant_generator(rc), 'SO2_spin', p['angles'], qubit_samples))

    grid = _grid(p['qbm']['grid'], hbar)
    qbm = QBMParams(p['qbm']['mass'], p['qbm']['eta'], p['qbm']['beta'], grid, include_friction=False)
    lo, hi = p['qbm']['window']
    windowed = [windowed_density_matrix(grid, rng, lo, hi) for _ in range(k)]
    shifts = [c * grid.dx for c in p['shift_cells']]
    out.append(('qbm_frictionless', qbm_generator(qbm), 'translation_1d', shifts, windowed))
    trip = LevyTriplet.from_config(p['levy'], hbar=hbar)
    out.append(('levy', levy_generator(trip, grid), 'translation_1d', shifts, windowed))

    qg = _grid(p['qlbe']['grid'], hbar)
    qlbe = QLBEParams.from_cells(p['qlbe']['mass'], p['qlbe']['gas_mass'], p['qlbe']['beta'],
                                 p['qlbe']['density'], qg, p['qlbe']['transfer_cells'])
    out.append(('qlbe', qlbe_lindblad(qlbe), 'translation_1d', [c * qg.dx for c in p['shift_cells']],
                [random_density_matrix(qg, rng) for _ in range(k)]))
    return out


def _cp_generators(p, hbar):
    """Small instances of every model for the Choi check."""
    dim = p['cp_fock_dim']
    dho = DHOParams(omega=p['omega'], eta=p['eta'], beta=p['beta'], dim=dim, hbar=hbar)
    shift = ShiftCovParams(eta_0=p['eta_0'], eta_m=tuple(p['eta_m']), omega=p['omega'], beta=p['beta'],
                           dim=dim, hbar=hbar)
    tl = TwoLevelParams.from_n_beta(p['omega'], p['eta'], p['n_beta'], hbar=hbar)
    rc = RotCovParams(*p['c_set'], hamiltonian_coeff=p['hamiltonian_coeff'], hbar=hbar)
    grid = _grid(p['cp_grid'], hbar)
    qbm = QBMParams(p['qbm']['mass'], p['qbm']['eta'], p['qbm']['beta'], grid, include_friction=True)
    qlbe = QLBEParams.from_cells(p['qlbe']['mass'], p['qlbe']['gas_mass'], p['qlbe']['beta'],
                                 p['qlbe']['density'], grid, p['qlbe']['transfer_cells'])
    trip = LevyTriplet.from_config(p['levy'], hbar=hbar)
    return [
        ('dho', dho_generator(dho)),
        ('shift_covariant', shift_covariant_generator(shift)),
        ('two_level', two_level_generator(tl)),
        ('rotation_covariant', rotation_covariant_generator(rc)),
        ('qbm', qbm_generator(qbm)),
        ('qlbe', qlbe_lindblad(qlbe)),
        ('levy', levy_generator(trip, grid)),
    ]


@register_scenario(
    'covariance_audit', 'Covariance of every model under its group, Weyl relations, representation checks and '
                        'complete positivity of the propagators',
    criteria=('model_covariance', 'trace_preservation', 'weyl', 'generalized_weyl', 'representation',
              'unitarity', 'complete_positivity', 'transpose_control'),
    outputs=('covariance_residuals.json',))
def covariance_audit(p, args, _logger):
    hbar = args.hbar
    tol = p['tolerance']
    reports = []
    metric_logger = MetricLogger(delimiter='  ')
    audited = _audit_models(p, hbar)
    for name, gen, group, params, samples in metric_logger.log_every(audited, 1, 'Covariance', logger=_logger):
        rep = UnitaryRep(group, gen.space)
        for g in params:
            r = covariance_residual(gen, rep, [g], samples)
            reports.append(ResidualReport('covariance', {'model': name, 'group': group, 'g': g}, r, tol))
        tp = max(abs(np.trace(gen.apply(s.matrix))) for s in samples)
        reports.append(ResidualReport('trace_preservation', {'model': name}, tp, p['trace_tolerance']))
        metric_logger.update(residual=max(r.residual for r in reports))

    grid = _grid(p['weyl_grid'], hbar)
    for a_cells, q_cells in p['weyl_pairs']:
        r = weyl_residual(grid, a_cells * grid.dx, q_cells * grid.dp)
        reports.append(ResidualReport('weyl', {'a_cells': a_cells, 'q_cells': q_cells}, r, tol))
    fock = HilbertSpace.fock(p['weyl_fock_dim'], hbar=hbar)
    for theta, m in p['generalized_weyl_pairs']:
        r = generalized_weyl_residual(fock, theta, m)
        reports.append(ResidualReport('generalized_weyl', {'theta': theta, 'm': m}, r, tol))
        reports.append(ResidualReport('isometry', {'m': m}, ShiftIsometry(fock, m).isometry_residual(), tol))

    reps = [(UnitaryRep('U1_phase', fock), p['phases']),
            (UnitaryRep('SO2_spin', HilbertSpace.qubit(hbar=hbar)), p['angles']),
            (UnitaryRep('translation_1d', grid), [c * grid.dx for c in p['shift_cells']]),
            (UnitaryRep('boost_1d', grid), [c * grid.dp for c in p['shift_cells']])]
    for rep, params in reps:
        for g in params:
            reports.append(ResidualReport('unitarity', {'group': rep.group_label, 'g': g},
                                          unitarity_residual(rep(g)), tol))
            for h in params:
                reports.append(ResidualReport('representation', {'group': rep.group_label, 'g': g, 'h': h},
                                              representation_residual(rep, g, h), tol))

    min_eig = np.inf
    for name, gen in _cp_generators(p, hbar):
        S = generator_superop(gen)
        for t in p['cp_times']:
            e = choi_min_eigenvalue(propagator(gen, t, superop=S))
            min_eig = min(min_eig, e)
            reports.append(ResidualReport('complete_positivity', {'model': name, 't': t}, max(0.0, -e),
                                          p['cp_tolerance']))
    control = choi_min_eigenvalue(transpose_superop(HilbertSpace.qubit(hbar=hbar)))
    write_residual_reports(reports, _out(args, 'covariance_residuals.json'))

    def worst(relation):
        return max(r.residual for r in reports if r.relation == relation)

    criteria = [
        Criterion('model_covariance', worst('covariance'), tol),
        Criterion('trace_preservation', worst('trace_preservation'), p['trace_tolerance']),
        Criterion('weyl', worst('weyl'), tol),
        Criterion('generalized_weyl', max(worst('generalized_weyl'), worst('isometry')), tol),
        Criterion('representation', worst('representation'), tol),
        Criterion('unitarity', worst('unitarity'), tol),
        Criterion('complete_positivity', min_eig, -p['cp_tolerance'], comparison='ge'),
        Criterion('transpose_control', control, -p['cp_tolerance']),
    ]
    return criteria, {'residual_rows': len(reports)}


@register_scenario(
    'jump_convergence', 'Quantum-jump unraveling against exact evolution; Monte-Carlo error scaling',
    criteria=('qubit_standard_errors', 'qubit_trace_distance', 'dho_standard_errors', 'dho_trace_distance',
              'slope_deviation'),
    outputs=('jump_convergence.csv', 'dho_trajectories.jsonl'))
def jump_convergence(p, args, _logger):
    t = p['t']
    # trajectory keys are master_seed XOR id, so --seed moves the master above the id bits
    master_seed = int(p['master_seed']) + (int(args.seed) << 32)
    q = p['qubit']
    tl = TwoLevelParams(omega=q['omega'], eta=q['eta'], hbar=args.hbar)
    gen = two_level_generator(tl)
    excited = np.array([0.0, 1.0], dtype=complex)
    exact_rho = evolve_expm(gen, DensityMatrix.pure(tl.space, excited), t)
    exact = exact_rho.matrix[1, 1].real
    config = JumpConfig(n_trajectories=p['total_trajectories'], master_seed=master_seed, dt_max=p['dt_max'],
                        workers=args.workers)
    rho_avg, records = unravel_jumps(gen, excited, t, config, print_freq=args.print_freq)
    values = np.array([abs(r.final_state[1]) ** 2 for r in records if not r.lost])
    qubit_distance = trace_distance(rho_avg, exact_rho)

    n_check = p['n_check']
    head = values[:n_check]
    qubit_z = abs(head.mean() - exact) / (head.std(ddof=1) / np.sqrt(n_check))

    rows = []
    for n in p['n_values']:
        n_batches = len(values) // n
        est = values[:n_batches * n].reshape(n_batches, n).mean(axis=1)
        rows.append({'n_trajectories': n, 'n_batches': n_batches,
                     'rms_error': float(np.sqrt(np.mean((est - exact) ** 2))),
                     'standard_error': float(values.std(ddof=1) / np.sqrt(n))})
    df = pd.DataFrame(rows, columns=['n_trajectories', 'n_batches', 'rms_error', 'standard_error'])
    write_csv(df, _out(args, 'jump_convergence.csv'))
    slope = loglog_slope(df['n_trajectories'], df['rms_error'])

    # a Fock start jumps down the ladder, so <N> spreads across trajectories
    d = p['dho']
    dho = DHOParams(omega=d['omega'], eta=d['eta'], dim=d['dim'], hbar=args.hbar)
    dgen = dho_generator(dho)
    psi0 = fock_state(dho.space, d['fock_level'])
    _, _, N = fock_ops(dho.space)
    exact_dho = evolve_expm(dgen, DensityMatrix.pure(dho.space, psi0), t)
    exact_n = expectation(N, exact_dho).real
    dconfig = JumpConfig(n_trajectories=d['n_trajectories'], master_seed=master_seed, dt_max=p['dt_max'],
                         workers=args.workers)
    dho_avg, drecords = unravel_jumps(dgen, psi0, t, dconfig, print_freq=args.print_freq)
    write_trajectory_records(drecords, _out(args, 'dho_trajectories.jsonl'))
    n_vals = np.array([np.real(np.vdot(r.final_state, N.matrix @ r.final_state)) for r in drecords if not r.lost])
    dho_z = abs(n_vals.mean() - exact_n) / (n_vals.std(ddof=1) / np.sqrt(len(n_vals)))
    dho_distance = trace_distance(dho_avg, exact_dho)

    criteria = [
        Criterion('qubit_standard_errors', qubit_z, p['standard_errors']),
        Criterion('qubit_trace_distance', qubit_distance, 4.0 / np.sqrt(len(values))),
        Criterion('dho_standard_errors', dho_z, p['standard_errors']),
        Criterion('dho_trace_distance', dho_distance, 4.0 / np.sqrt(len(n_vals))),
        Criterion('slope_deviation', abs(slope - p['slope_target']), p['slope_tolerance']),
    ]
    return criteria, {'slope': slope, 'lost': int(sum(r.lost for r in records))}


def resolve_params(cfg):
    """Scenario defaults from cfg['scenarios'][name], overridden by cfg['params']."""
    name = cfg.get('scenario')
    base = copy.deepcopy((cfg.get('scenarios') or {}).get(name) or {})
    return deep_update(base, copy.deepcopy(cfg.get('params') or {}))


_POSITIVE = frozenset(['omega', 'eta', 'mass', 'gas_mass', 'beta', 'density', 'dx', 'sigma', 'sigma_cells', 't',
                       't_max', 'dt_max', 'beta_hbar_omega', 'eta_over_omega', 't_max_eta', 'separation',
                       'amplitudes', 'x_extent', 'd_pp', 'dephasing_rate'])
_NONNEGATIVE = frozenset(['n_betas', 'n_beta', 'fock_level', 'master_seed', 'reduction_n_beta', 'c_sets', 'c_set', 'eta_0', 'eta_m', 'D',
                          'times', 'bochner_times', 'cp_times', 'amplitude', 'asymptote_eta_bar'])
_COUNTS = frozenset(['dim', 'fock_dim', 'cp_fock_dim', 'weyl_fock_dim', 'n_times', 'n_samples', 'n_x',
                     'n_trajectories', 'total_trajectories', 'n_values', 'n_check', 'n_points', 'region_width',
                     'tile_cells', 'outcome_ranks'])


def _flatten(value):
    if isinstance(value, (list, tuple)):
        for v in value:
            yield from _flatten(v)
    else:
        yield value


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_field(key, value, path):
    diagnostics = []
    for v in _flatten(value):
        if not _is_number(v):
            if key in _POSITIVE | _NONNEGATIVE | _COUNTS:
                diagnostics.append('{}: expected a number, got {!r}'.format(path, v))
            continue
        if key in _POSITIVE and not v > 0:
            diagnostics.append('{}: must be positive, got {}'.format(path, v))
        elif key in _NONNEGATIVE and v < 0:
            diagnostics.append('{}: must be nonnegative, got {}'.format(path, v))
        elif key in _COUNTS and (float(v) != int(v) or v < 1):
            diagnostics.append('{}: must be a positive integer, got {}'.format(path, v))
        elif key == 'n_points' and (int(v) < 4 or int(v) & (int(v) - 1)):
            diagnostics.append('{}: grid size must be a power of two >= 4, got {}'.format(path, v))
    if key == 'transfer_cells':
        for i, c in enumerate(value):
            if not _is_number(c) or float(c) != int(c):
                diagnostics.append('{}[{}]: off-lattice momentum transfer {} (transfers are integer multiples '
                                   'of the momentum spacing)'.format(path, i, c))
            elif c == 0:
                diagnostics.append('{}[{}]: zero momentum transfer singularity'.format(path, i))
    if key == 'jumps':
        for i, pair in enumerate(value):
            if len(pair) != 2 or pair[1] < 0:
                diagnostics.append('{}[{}]: expected [q, weight] with weight >= 0, got {}'.format(path, i, pair))
    return diagnostics


def _walk(obj, path):
    diagnostics = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            sub = '{}.{}'.format(path, k)
            if isinstance(v, dict):
                diagnostics += _walk(v, sub)
            else:
                diagnostics += _check_field(k, v, sub)
    return diagnostics


def validate_config(cfg):
    """Field-level diagnostics for a merged config; an empty list means valid. Never runs numerics."""
    diagnostics = []
    name = cfg.get('scenario')
    if name not in SCENARIOS:
        return ['scenario: unknown {!r}, choose from {}'.format(name, list(SCENARIOS))]
    if not (cfg.get('scenarios') or {}).get(name):
        diagnostics.append('scenarios.{}: no default parameters found'.format(name))
    hbar = cfg.get('hbar', 1.0)
    if not _is_number(hbar) or not hbar > 0:
        diagnostics.append('hbar: must be positive, got {}'.format(hbar))
    rel_tol = cfg.get('rel_tol', 1e-8)
    if not _is_number(rel_tol) or not 1e-14 < rel_tol < 1e-3:
        diagnostics.append('rel_tol: must lie in (1e-14, 1e-3), got {}'.format(rel_tol))
    for key in ('seed', 'workers'):
        v = cfg.get(key)
        lowest = 0 if key == 'seed' else 1
        if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < lowest):
            diagnostics.append('{}: must be an integer >= {}, got {!r}'.format(key, lowest, v))
    diagnostics += _walk(resolve_params(cfg), 'params')
    return diagnostics


def run_scenario(cfg, args, config_hash):
    """Run the configured scenario into args.output_dir and return its RunReport."""
    scenario = SCENARIOS[cfg['scenario']]
    params = resolve_params(cfg)
    report = RunReport(scenario.name, config_hash, outputs=list(scenario.outputs))
    _logger.info('Running {}: {}'.format(scenario.name, scenario.description))
    start_time = time.time()
    try:
        criteria, defects = scenario.fn(params, args, _logger)
    except (ValueError, RuntimeError) as e:
        _logger.exception('scenario {} failed'.format(scenario.name))
        report.error = '{}: {}'.format(type(e).__name__, e)
        report.wall_time = time.time() - start_time
        return report
    report.wall_time = time.time() - start_time
    names = [c.name for c in criteria]
    assert sorted(names) == sorted(scenario.criteria), 'criteria {} differ from declared {}'.format(
        names, scenario.criteria)
    report.criteria = criteria
    report.defects = defects
    for c in criteria:
        _logger.info('{:<28s} {:>12.4e} ({} {:.1e}) {}'.format(
            c.name, c.value, '<=' if c.comparison == 'le' else '>=', c.tolerance, 'pass' if c.passed else 'FAIL'))
    return report
