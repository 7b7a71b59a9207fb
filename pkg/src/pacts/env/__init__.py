from .pushbarrier import EnvConfig, EnvState, PushBarrierEnv, PREDICATE_NAMES
from .expert import ScriptedExpert, generate_demonstrations

__all__ = [
    "EnvConfig",
    "EnvState",
    "PushBarrierEnv",
    "PREDICATE_NAMES",
    "ScriptedExpert",
    "generate_demonstrations",
]
