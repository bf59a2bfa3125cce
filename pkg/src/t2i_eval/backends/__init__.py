"""Backend clients: wire protocol, HTTP clients, offline mocks, response cache."""

from .base import BackendEndpoint, Role, VqaResponse
from .cache import CachedIqa, CachedVqa, CacheKey, ResponseCache, cache_get, cache_put
from .http import (
    IQA_RAW_SANITY_BOUND,
    HttpIqa,
    HttpLlm,
    HttpVqa,
    iqa_score,
    llm_generate,
    vqa_ask,
)
from .mocks import (
    ORACLE_BACKEND_ID,
    SIDECAR_BACKEND_ID,
    STOP_WORDS,
    AttributeTable,
    FixedIqa,
    FixedVqa,
    OracleVqa,
    SidecarIqa,
    mock_iqa,
    oracle_vqa,
    question_span,
)

__all__ = [
    "AttributeTable",
    "BackendEndpoint",
    "CacheKey",
    "CachedIqa",
    "CachedVqa",
    "FixedIqa",
    "FixedVqa",
    "HttpIqa",
    "HttpLlm",
    "HttpVqa",
    "IQA_RAW_SANITY_BOUND",
    "ORACLE_BACKEND_ID",
    "OracleVqa",
    "ResponseCache",
    "Role",
    "SIDECAR_BACKEND_ID",
    "STOP_WORDS",
    "SidecarIqa",
    "VqaResponse",
    "cache_get",
    "cache_put",
    "iqa_score",
    "llm_generate",
    "mock_iqa",
    "oracle_vqa",
    "question_span",
    "vqa_ask",
]
