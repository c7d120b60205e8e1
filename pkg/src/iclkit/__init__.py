"""Retrieval-backed text classification: kNN, weighted kNN, LR-on-top-k, and
LLM in-context learning over shared neighbor evidence, with agreement
statistics, relevance correlation, and a relevance-gated router."""

from .analysis import (
    AccuracyReport,
    AgreementReport,
    ContingencyMatrix,
    CorrelationReport,
    InclusionReport,
    RelevanceScore,
    SameLabelReport,
    accuracy,
    accuracy_diff_grid,
    cohen_kappa,
    contingency,
    inclusion_score,
    pearson,
    relevance_score,
    same_label_stats,
    verdict_contingency,
)
from .classifiers import (
    LogRegModel,
    LrHyper,
    Prediction,
    TfidfModel,
    knn_predict,
    logreg_train,
    lr_on_topk,
    tfidf_fit,
    tfidf_transform,
    tokenize,
)
from .corpus import (
    Dataset,
    DatasetError,
    Example,
    LabelSpace,
    SplitSample,
    export_dataset,
    load_dataset,
    sample_test,
)
from .embedding import (
    EmbeddingCache,
    EmbeddingError,
    HashingEmbedder,
    RemoteEmbeddingProvider,
    TransportError,
    cosine_similarity,
    embed_corpus,
    embed_text,
)
from .llm import (
    AnnotationFailed,
    ChatMessage,
    LlmClient,
    LlmResponse,
    ParseFailure,
    PromptSpec,
    QueryFailed,
    RelevanceVerdict,
    ScriptedChatBackend,
    TokenBucket,
    build_icl_prompt,
    build_zero_shot_prompt,
    llm_annotate_relevance,
    llm_predict,
    parse_label,
)
from .retrieval import Index, Neighbor, NeighborSet, RetrievalError, index_build, topk
from .router import RouteDecision, RouterAuditLog, proxy_relevance, route

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "AgreementReport",
    "AnnotationFailed",
    "ChatMessage",
    "ContingencyMatrix",
    "CorrelationReport",
    "Dataset",
    "DatasetError",
    "EmbeddingCache",
    "EmbeddingError",
    "Example",
    "HashingEmbedder",
    "InclusionReport",
    "Index",
    "LabelSpace",
    "LlmClient",
    "LlmResponse",
    "LogRegModel",
    "LrHyper",
    "Neighbor",
    "NeighborSet",
    "ParseFailure",
    "Prediction",
    "PromptSpec",
    "QueryFailed",
    "RelevanceScore",
    "RelevanceVerdict",
    "RemoteEmbeddingProvider",
    "RetrievalError",
    "RouteDecision",
    "RouterAuditLog",
    "SameLabelReport",
    "ScriptedChatBackend",
    "SplitSample",
    "TfidfModel",
    "TokenBucket",
    "TransportError",
    "accuracy",
    "accuracy_diff_grid",
    "build_icl_prompt",
    "build_zero_shot_prompt",
    "cohen_kappa",
    "contingency",
    "cosine_similarity",
    "embed_corpus",
    "embed_text",
    "export_dataset",
    "inclusion_score",
    "index_build",
    "knn_predict",
    "llm_annotate_relevance",
    "llm_predict",
    "load_dataset",
    "logreg_train",
    "lr_on_topk",
    "parse_label",
    "pearson",
    "proxy_relevance",
    "relevance_score",
    "route",
    "same_label_stats",
    "sample_test",
    "tfidf_fit",
    "tfidf_transform",
    "tokenize",
    "topk",
    "verdict_contingency",
]
