"""Unitary design of quantum channels from constrained environment resources."""
from .average import AverageRealization, extreme_decompose, realize_on_average, sample_realization
from .channels import Channel, channel_distance_1to1, choi_to_kraus, extremality_test, kraus_rank, kraus_to_choi
from .dilation import (
    DilationReport,
    Initialization,
    SubsystemDecomposition,
    dilate,
    dilate_via_subsystem,
    find_eps_pure_subsystem,
    stinespring_complete,
    verify_dilation,
)
from .errors import DecompositionError, DimensionError, InfeasibleError, InvariantError, ParseError, QdfError
from .linalg import CompositeSpace, DensityOperator, Isometry, UnitaryOperator, partial_trace, tv_distance
from .majorization import (
    ConvexCombinationSpec,
    ProbabilityVector,
    StochasticUnitarySpec,
    block_convex_design,
    design_stochastic_unitary,
    majorizes,
    unistochastic_connect,
)

__version__ = "0.1.0"
