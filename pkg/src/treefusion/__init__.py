"""Multimodal sparse representation classification with tree-structured
group sparsity and possibilistic quality weighting."""

from ._backend import COMPILED
from .classify import (
    ClassificationResult, Method, PipelineSettings, class_residuals, classify_pipeline,
    classify_residual,
)
from .fusion import FusionResult, FusionSettings, QualityWeights, solve_weighted, update_weights
from .model import (
    ModelError, MultimodalDictionary, MultimodalSample, TreeGroupStructure, build_dictionary,
    class_select, validate_tree,
)
from .prox import group_soft_threshold, prox_joint, prox_tree, soft_threshold, tree_norm
from .solver import (
    PriorKind, SolveResult, SolverError, SolverSettings, SparsityPrior, StepRule, solve,
)

__version__ = "0.1.0"

__all__ = [
    "COMPILED", "ClassificationResult", "FusionResult", "FusionSettings", "Method",
    "ModelError", "MultimodalDictionary", "MultimodalSample", "PipelineSettings", "PriorKind",
    "QualityWeights", "SolveResult", "SolverError", "SolverSettings", "SparsityPrior",
    "StepRule", "TreeGroupStructure", "build_dictionary", "class_residuals", "class_select",
    "classify_pipeline", "classify_residual", "group_soft_threshold", "prox_joint",
    "prox_tree", "soft_threshold", "solve", "solve_weighted", "tree_norm", "update_weights",
    "validate_tree",
]
