from .operators import (
    DensityOperator,
    HermitianOperator,
    HilbertDim,
    PureState,
    SpectralDecomposition,
    commutator,
    commutator_observable,
    density_expectation,
    density_from_state,
    eig,
    expectation,
    matrix_norm,
    pauli,
    schmidt_coefficients,
    schmidt_rank,
    spectral_norm,
    symmetrized,
    tensor_product,
    tensor_states,
)

__all__ = [
    'DensityOperator',
    'HermitianOperator',
    'HilbertDim',
    'PureState',
    'SpectralDecomposition',
    'commutator',
    'commutator_observable',
    'density_expectation',
    'density_from_state',
    'eig',
    'expectation',
    'matrix_norm',
    'pauli',
    'schmidt_coefficients',
    'schmidt_rank',
    'spectral_norm',
    'symmetrized',
    'tensor_product',
    'tensor_states',
]
