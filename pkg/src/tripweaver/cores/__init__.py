from .base import (
    CoreFailure,
    DecisionContext,
    DecisionCore,
    DeclaredTrip,
    PlanDraft,
    StageTrace,
    ValidationFinding,
    derive_seed,
    network_brief,
)
from .oracle import OracleCore, OracleRules

__all__ = [
    "CoreFailure",
    "DecisionContext",
    "DecisionCore",
    "DeclaredTrip",
    "OracleCore",
    "OracleRules",
    "PlanDraft",
    "StageTrace",
    "ValidationFinding",
    "derive_seed",
    "network_brief",
]
