"""Modality registry, stage classifier, Born unrolling and basis growth."""

from opgraph.registry.born import born_residuals, born_unroll
from opgraph.registry.classify import (ClassifiedStage, StageDescriptor, classify_stage, compile_chain,
                                       worked_examples)
from opgraph.registry.growth import GrowthStep, basis_growth
from opgraph.registry.records import (CARRIERS, TIERS, ModalityRecord, build_modality, check_record,
                                      get_record, load_registry, render_chain)

__all__ = [
    "born_residuals", "born_unroll", "ClassifiedStage", "StageDescriptor", "classify_stage", "compile_chain",
    "worked_examples", "GrowthStep", "basis_growth", "CARRIERS", "TIERS", "ModalityRecord",
    "build_modality", "check_record", "get_record", "load_registry", "render_chain",
]
