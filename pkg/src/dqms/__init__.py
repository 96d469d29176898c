"""Asymptotic structure and one-shot capacity bounds of iterated quantum channels."""

from . import capacities, channels, divergences, linalg, protocols, sdp, spectral, structure, zoo
from .channels import Channel, from_choi, from_json, from_kraus, from_superop
from .estimator import PeripheralAnalyzer
from .structure import decompose

__all__ = [
    "Channel",
    "PeripheralAnalyzer",
    "capacities",
    "channels",
    "decompose",
    "divergences",
    "from_choi",
    "from_json",
    "from_kraus",
    "from_superop",
    "linalg",
    "protocols",
    "sdp",
    "spectral",
    "structure",
    "zoo",
]

__version__ = "0.1.0"
