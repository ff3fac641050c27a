"""Adjoint checks, fidelity error, operator norms and error bounds."""

from opgraph.metrics.adjoint_check import (EPS_GUARD, THRESHOLD,
                                           DotTestReport, dot_test)
from opgraph.metrics.bounds import (B_DEFAULT, BoundCheckReport, BoundInputs,
                                    BoundResult, bound_check,
                                    composition_bound, perturb_distance,
                                    perturb_gain, perturb_modulate,
                                    perturb_pixel_size)
from opgraph.metrics.fidelity import DELTA, FidelityReport, e_img
from opgraph.metrics.linmap import LinearMap, as_linear_map
from opgraph.metrics.norms import (NormEstimate, operator_norm,
                                   power_iteration, stage_norm)
from opgraph.metrics.phantoms import (PHANTOMS, gaussian_objects,
                                      phantom_object, s1_test_set)

__all__ = [
    "B_DEFAULT", "DELTA", "EPS_GUARD", "PHANTOMS", "THRESHOLD", "BoundCheckReport",
    "BoundInputs", "BoundResult", "DotTestReport", "FidelityReport", "LinearMap",
    "NormEstimate", "as_linear_map", "bound_check", "composition_bound", "dot_test",
    "e_img", "gaussian_objects", "operator_norm", "perturb_distance", "perturb_gain",
    "perturb_modulate", "perturb_pixel_size", "phantom_object", "power_iteration",
    "s1_test_set", "stage_norm",
]
