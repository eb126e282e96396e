from .checks import INCONCLUSIVE, SATISFIED, VIOLATED, Verdict, check_authenticity, check_confidentiality, verify
from .explore import Bounds, GlobalState, Move, ReachabilitySet, WitnessItem, explore, replay
from .knowledge import KnowledgeBase, saturate

__all__ = [
    "INCONCLUSIVE",
    "SATISFIED",
    "VIOLATED",
    "Bounds",
    "GlobalState",
    "KnowledgeBase",
    "Move",
    "ReachabilitySet",
    "Verdict",
    "WitnessItem",
    "check_authenticity",
    "check_confidentiality",
    "explore",
    "replay",
    "saturate",
    "verify",
]
