"""The eleven primitives: parameter records, nodes, forward/adjoint maps."""

from opgraph.physics import klein_nishina_kernel
from opgraph.operators.node import (MATERIALIZE_CAP, LinearizationWarning,
                                    PrimitiveNode, adjoint, forward,
                                    linearize, lipschitz_constant, materialize)
from opgraph.operators.params import (ALL_KINDS, ASCII_SYMBOLS,
                                      DETECT_FAMILIES, LINEAR_KINDS, SYMBOLS,
                                      TRANSFORM_FAMILIES, AccumulateParams,
                                      ConvolveParams, DetectParams,
                                      DisperseParams, EncodeParams, Kind,
                                      ModulateParams, ProjectParams,
                                      PropagateParams, SampleParams,
                                      ScatterParams, TransformParams)
from opgraph.operators.primitives import propagating_band, wrap_phase

__all__ = [
    "ALL_KINDS", "ASCII_SYMBOLS", "DETECT_FAMILIES", "LINEAR_KINDS", "MATERIALIZE_CAP",
    "SYMBOLS", "TRANSFORM_FAMILIES", "AccumulateParams", "ConvolveParams",
    "DetectParams", "DisperseParams", "EncodeParams", "Kind", "LinearizationWarning",
    "ModulateParams", "PrimitiveNode", "ProjectParams", "PropagateParams",
    "SampleParams", "ScatterParams", "TransformParams", "adjoint", "forward",
    "klein_nishina_kernel", "linearize", "lipschitz_constant", "materialize",
    "propagating_band", "wrap_phase",
]
