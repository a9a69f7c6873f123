"""Constructive nonincreasing loss paths in wide feedforward networks.

The library builds explicit piecewise-affine parameter paths from any point of
a constrained empirical-risk landscape to a global minimum, and numerically
verifies every claim along the way: constant-loss reparametrizations, block
structure, convexity of the connecting segment, and constraint feasibility.
"""

from .blocks import (BlockSide, ReparamStep, block_factor, embed_sum_hidden,
                     is_block, mix_block, sparsify_layer_pair, to_block)
from .caratheodory import reduce_combination
from .errors import (CapabilityError, DomainError, ParameterError, ParseError,
                     PreconditionError, ReductionFailureError, StructureError,
                     WidepathsError)
from .globalmin import OracleResult, brute_force_min, outer_layer_solve
from .netcore import (ActivationKind, Architecture, Dataset, NetworkParams,
                      apply_activation, forward, forward_batch, permute_hidden)
from .objective import (ConstraintSpec, LossKind, constraint_value,
                        empirical_risk, is_feasible, pointwise_loss,
                        rowwise_lq_norm)
from .paths import (CompositePath, EscapePath, PathSegment, build_escape_path,
                    convex_outer_segment, is_path_constant, is_path_convex,
                    required_width, restrict_nonincreasing, segment_at)
from .verify import (TrialReport, VerificationReport, VerifyTolerances,
                     verify_block_identity, verify_path, verify_symmetry)

__version__ = "0.1.0"
