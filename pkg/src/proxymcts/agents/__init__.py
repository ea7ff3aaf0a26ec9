from .base import (
    AgentError,
    BackendUnavailable,
    BuggyVerdict,
    CandidatePayload,
    EvaluationAgent,
    FullEvalResult,
    GenerationAgent,
    GenerationContext,
    MalformedReport,
    MalformedResponse,
    Mode,
    ProxyReport,
    SandboxFailure,
    SandboxLimits,
    SiblingSummary,
    builtin_proxies,
    content_hash,
)
from .llm import LLMGenerator
from .sandbox import SandboxEvaluator

__all__ = [
    "AgentError",
    "BackendUnavailable",
    "BuggyVerdict",
    "CandidatePayload",
    "EvaluationAgent",
    "FullEvalResult",
    "GenerationAgent",
    "GenerationContext",
    "LLMGenerator",
    "MalformedReport",
    "MalformedResponse",
    "Mode",
    "ProxyReport",
    "SandboxEvaluator",
    "SandboxFailure",
    "SandboxLimits",
    "SiblingSummary",
    "builtin_proxies",
    "content_hash",
]
