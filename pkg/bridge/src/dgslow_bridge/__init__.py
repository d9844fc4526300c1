from .model import BridgeConfig, BridgeModel, BridgeStartupError
from .serialization import PS_TOKEN, SEP_TOKEN, serialize_words, word_tokenize
from .server import PROTOCOL_VERSION, create_app

__all__ = [
    "BridgeConfig",
    "BridgeModel",
    "BridgeStartupError",
    "PS_TOKEN",
    "SEP_TOKEN",
    "serialize_words",
    "word_tokenize",
    "PROTOCOL_VERSION",
    "create_app",
]
