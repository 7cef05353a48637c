"""
Exceptions raised across the toolkit.

Every class carries the short phrase used in reports and CLI diagnostics as its
message prefix, so callers can match on either the type or the text.
"""


class SpaceMismatchError(ValueError):
    def __init__(self, detail=''):
        super().__init__('space mismatch' + (': ' + detail if detail else ''))


class DimensionMismatchError(ValueError):
    def __init__(self, detail=''):
        super().__init__('dimension mismatch' + (': ' + detail if detail else ''))


class InvalidHamiltonianError(ValueError):
    def __init__(self, detail=''):
        super().__init__('invalid Hamiltonian' + (': ' + detail if detail else ''))


class InvalidDensityMatrixError(ValueError):
    def __init__(self, detail=''):
        super().__init__('invalid density matrix' + (': ' + detail if detail else ''))


class NegativeTimeError(ValueError):
    def __init__(self, t):
        super().__init__('negative time: t={}'.format(t))


class PositivityLossError(RuntimeError):
    def __init__(self, detail=''):
        super().__init__('positivity loss' + (': ' + detail if detail else ''))


class StiffnessFailure(RuntimeError):
    def __init__(self, detail=''):
        super().__init__('stiffness failure' + (': ' + detail if detail else ''))


class TrajectoryLostError(RuntimeError):
    def __init__(self, n_lost, n_total):
        self.n_lost = n_lost
        self.n_total = n_total
        super().__init__('trajectory lost: {} of {} trajectories underflowed'.format(n_lost, n_total))


class OffLatticeShiftWarning(UserWarning):
    pass


class RegionOverflowError(ValueError):
    def __init__(self, detail=''):
        super().__init__('region overflow' + (': ' + detail if detail else ''))


class InvalidDensityError(ValueError):
    def __init__(self, detail=''):
        super().__init__('invalid density' + (': ' + detail if detail else ''))


class FrameIncompletenessError(ValueError):
    def __init__(self, defect, tolerance):
        self.defect = defect
        super().__init__('frame incompleteness: defect {:.3e} exceeds {:.1e}'.format(defect, tolerance))


class NullEventError(ValueError):
    def __init__(self, probability):
        super().__init__('conditioning on null event: probability {:.3e}'.format(probability))


class InvalidPVMError(ValueError):
    def __init__(self, detail=''):
        super().__init__('invalid PVM' + (': ' + detail if detail else ''))


class InvalidTemperatureError(ValueError):
    def __init__(self, detail=''):
        super().__init__('invalid temperature' + (': ' + detail if detail else ''))


class TruncationTooSmallError(ValueError):
    def __init__(self, detail=''):
        super().__init__('truncation too small' + (': ' + detail if detail else ''))


class ThermalLengthUnresolvedError(ValueError):
    def __init__(self, thermal_length, dx):
        super().__init__('thermal length unresolved: lambda_th={:.4g} < 2*dx={:.4g}'.format(
            thermal_length, 2 * dx))


class ZeroMomentumTransferError(ValueError):
    def __init__(self):
        super().__init__('zero momentum transfer singularity')


class OffLatticeMomentumTransferError(ValueError):
    def __init__(self, q, dp):
        super().__init__('off-lattice momentum transfer: q={:.6g} is not a multiple of dp={:.6g}'.format(q, dp))


class NonPSDDecoherenceError(RuntimeError):
    def __init__(self, min_eig):
        self.min_eig = min_eig
        super().__init__('non-PSD decoherence field: smallest eigenvalue {:.3e}'.format(min_eig))
