from app.models.base import BaseModelSchema
from app.models.atdm import BlaParams, CompactBla, ZoneAggregation
from app.models.masking import (
    FeasibilityBlocks,
    MaskedBla,
    MaskingKeys,
    MaskingPolicy,
    UnrelaxedMaskedBla,
)
from app.models.milp import MilpProblem, ProblemBuilder, Sense, VariableLayout, VarKind
from app.models.grid import (
    Battery,
    BlaPlacement,
    Branch,
    Bus,
    GridBlock,
    NetworkModel,
    Renewable,
    TieLine,
)
from app.models.scenario import ExperimentSpec, PpdcConfig, Scenario, SolverOptions
from app.models.session import MaskedBlaUpload

__all__ = [
    "BaseModelSchema",
    "BlaParams",
    "CompactBla",
    "ZoneAggregation",
    "FeasibilityBlocks",
    "MaskedBla",
    "MaskingKeys",
    "MaskingPolicy",
    "UnrelaxedMaskedBla",
    "MilpProblem",
    "ProblemBuilder",
    "Sense",
    "VariableLayout",
    "VarKind",
    "Battery",
    "BlaPlacement",
    "Branch",
    "Bus",
    "GridBlock",
    "NetworkModel",
    "Renewable",
    "TieLine",
    "ExperimentSpec",
    "PpdcConfig",
    "Scenario",
    "SolverOptions",
    "MaskedBlaUpload",
]
