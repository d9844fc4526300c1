from .base import (
    PS_TOKEN,
    SEP_TOKEN,
    GenerationResult,
    GradientPair,
    ReferenceScore,
    SerializedInput,
    StopLossParams,
    VictimModel,
    serialize_input,
)
from .conformance import check_victim_contract
from .remote import RemoteVictim, connect_remote
from .toy import BOS, EOS, UNK, ToyVictim, ToyVictimConfig, mean_reference_confidence

__all__ = [
    "PS_TOKEN",
    "SEP_TOKEN",
    "BOS",
    "EOS",
    "UNK",
    "GenerationResult",
    "GradientPair",
    "ReferenceScore",
    "SerializedInput",
    "StopLossParams",
    "VictimModel",
    "serialize_input",
    "check_victim_contract",
    "RemoteVictim",
    "connect_remote",
    "ToyVictim",
    "ToyVictimConfig",
    "mean_reference_confidence",
]
