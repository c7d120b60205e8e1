"""Chat-completion bridge: ICL prompt construction, label parsing, relevance
annotation, and the retrying client.

Prompts carry retrieved neighbors as per-example system messages so the LLM
sees exactly the evidence the kNN and LR predictors vote on. Scripted
backends reproduce the wire contract offline; their behavior is a pure
function of the messages, so reruns and resumed runs agree byte for byte.
"""

from __future__ import annotations

import hashlib
import os
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import requests

from .classifiers import Prediction, tokenize
from .corpus import Example, LabelSpace
from .retrieval import Neighbor, NeighborSet

_ROLES = ("system", "user")

PARSE_RETRY_REMINDER = "Answer with exactly one label."
ANNOTATE_RETRY_REMINDER = "Answer Yes or No."


class ParseFailure(ValueError):
    """The response text matched zero labels or more than one."""

    def __init__(self, raw: str, reason: str):
        super().__init__(f"cannot parse label from {raw!r}: {reason}")
        self.raw = raw
        self.reason = reason


class LlmTransportError(RuntimeError):
    """Retryable transport-level failure (connection, timeout, 5xx)."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class LlmProtocolError(RuntimeError):
    """Non-retryable endpoint failure (4xx, malformed response body)."""


class QueryFailed(RuntimeError):
    """llm_predict gave up on a query; it is excluded pairwise and counted."""

    def __init__(self, query_id: str, reason: str):
        super().__init__(f"query {query_id!r} failed: {reason}")
        self.query_id = query_id
        self.reason = reason


class AnnotationFailed(RuntimeError):
    """The annotator returned no parseable yes/no in two attempts."""

    def __init__(self, query_id: str, example_id: str, reason: str):
        super().__init__(f"annotation ({query_id!r}, {example_id!r}) failed: {reason}")
        self.query_id = query_id
        self.example_id = example_id
        self.reason = reason


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in _ROLES:
            raise ValueError(f"role must be one of {_ROLES}, got {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")


@dataclass(frozen=True)
class PromptSpec:
    mode: str  # plain | weighted | zeroshot
    messages: tuple[ChatMessage, ...]
    label_space: LabelSpace
    query_id: str

    def serialized(self) -> str:
        """Canonical text form used for determinism checks."""
        parts = [f"{m.role}\x1f{m.content}" for m in self.messages]
        return f"{self.mode}\x1e{self.query_id}\x1e" + "\x1e".join(parts)


@dataclass(frozen=True)
class LlmResponse:
    raw_text: str
    parsed_label: str | None
    latency_ms: float
    attempt: int


@dataclass(frozen=True)
class RelevanceVerdict:
    query_id: str
    example_id: str
    relevant: bool
    annotator_id: str


def _example_message(n: Neighbor, weighted: bool) -> ChatMessage:
    content = (
        f"Example: We know that the classification for the text '{n.text}', "
        f"we have answer: '{n.label}'."
    )
    if weighted:
        content += f" (similarity: {n.similarity:.4f})"
    return ChatMessage("system", content)


def _instruction_message(ls: LabelSpace) -> ChatMessage:
    labels = ", ".join(ls.labels)
    return ChatMessage(
        "system",
        "According to the above provided examples, classify the following text. "
        f"Answer as {labels} with no explanation.",
    )


def build_icl_prompt(
    ns: NeighborSet, query: Example, ls: LabelSpace, mode: str = "plain"
) -> PromptSpec:
    """One system message per neighbor (retrieval order), the instruction,
    then the query text verbatim as the user message."""
    if mode not in ("plain", "weighted"):
        raise ValueError(f"mode must be plain or weighted, got {mode!r}")
    if not ns.neighbors:
        raise ValueError(f"need at least one neighbor for query {query.id!r}")
    messages = [_example_message(n, mode == "weighted") for n in ns.neighbors]
    messages.append(_instruction_message(ls))
    messages.append(ChatMessage("user", query.text))
    return PromptSpec(mode=mode, messages=tuple(messages), label_space=ls, query_id=query.id)


def build_zero_shot_prompt(query: Example, ls: LabelSpace) -> PromptSpec:
    """Instruction plus the bare query; wording identical to the ICL prompt."""
    messages = (_instruction_message(ls), ChatMessage("user", query.text))
    return PromptSpec(mode="zeroshot", messages=messages, label_space=ls, query_id=query.id)


_STRIP_CHARS = " \t\r\n\"'`.,:;!?()[]{}"


def parse_label(raw: str, ls: LabelSpace) -> str:
    """Normalize a response to one known label.

    Trims whitespace, punctuation, and quotes, then tries a case-insensitive
    exact match; failing that, a case-insensitive substring scan that must
    hit exactly one label.
    """
    trimmed = raw.strip(_STRIP_CHARS)
    folded = trimmed.casefold()
    for label in ls.labels:
        if folded == label.casefold():
            return label
    hits = [label for label in ls.labels if label.casefold() in folded]
    if len(hits) == 1:
        return hits[0]
    if not hits:
        raise ParseFailure(raw, "no label match")
    raise ParseFailure(raw, f"ambiguous: matches {hits}")


@dataclass(frozen=True)
class ChatRequest:
    """The wire payload: {model, temperature, messages:[{role, content}]}."""

    model: str
    temperature: float
    messages: tuple[ChatMessage, ...]

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
        }


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


class HttpChatBackend:
    """POSTs the chat request to an HTTP endpoint and extracts the reply text.

    Accepts either a bare {"content": ...} body or the nested
    {"choices": [{"message": {"content": ...}}]} shape.
    """

    def __init__(
        self,
        url: str,
        auth_env: str | None = None,
        timeout: float = 60.0,
        session: requests.Session | None = None,
    ):
        self.url = url
        self.auth_env = auth_env
        self.timeout = timeout
        self.session = session or requests.Session()

    def complete(self, request: ChatRequest) -> str:
        headers = {}
        if self.auth_env:
            token = os.environ.get(self.auth_env)
            if not token:
                raise LlmProtocolError(f"environment variable {self.auth_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = self.session.post(
                self.url, json=request.to_json(), headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise LlmTransportError(f"POST {self.url} failed: {exc}") from exc
        if resp.status_code >= 500:
            raise LlmTransportError(f"POST {self.url} returned {resp.status_code}")
        if resp.status_code >= 400:
            raise LlmProtocolError(f"POST {self.url} returned {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise LlmProtocolError(f"non-JSON response from {self.url}") from exc
        if isinstance(body, dict):
            if isinstance(body.get("content"), str):
                return body["content"]
            choices = body.get("choices")
            if isinstance(choices, list) and choices:
                message = choices[0].get("message", {})
                if isinstance(message.get("content"), str):
                    return message["content"]
        raise LlmProtocolError(f"response from {self.url} carries no assistant text")


class ScriptedChatBackend:
    """In-process backend driven by a pure function of the messages.

    `script` must not hold mutable state keyed to call order: resumed runs
    replay a subset of calls and still have to see identical responses.
    """

    def __init__(self, script: Callable[[tuple[ChatMessage, ...]], str]):
        self.script = script
        self.calls = 0

    def complete(self, request: ChatRequest) -> str:
        self.calls += 1
        return self.script(request.messages)


class TokenBucket:
    """Blocking token-bucket limiter shared across client workers."""

    def __init__(
        self,
        rate_per_s: float,
        capacity: float | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rate_per_s <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate_per_s
        self.capacity = capacity if capacity is not None else max(1.0, rate_per_s)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def _refill(self) -> None:
        now = self._clock()
        self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
        self._last = now

    def acquire(self) -> None:
        while True:
            with self._lock:
                self._refill()
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


class LlmClient:
    """Retrying chat client: temperature 0, exponential backoff on transport
    errors (max_attempts total tries), optional rate limiting."""

    def __init__(
        self,
        backend: ChatBackend,
        model: str = "mock",
        temperature: float = 0.0,
        max_attempts: int = 5,
        backoff_base: float = 0.5,
        rate_limiter: TokenBucket | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        self.backend = backend
        self.model = model
        self.temperature = temperature
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.rate_limiter = rate_limiter
        self._sleep = sleep
        self._rng = rng or random.Random()

    def exchange(self, messages: Sequence[ChatMessage]) -> LlmResponse:
        request = ChatRequest(
            model=self.model, temperature=self.temperature, messages=tuple(messages)
        )
        last: LlmTransportError | None = None
        for attempt in range(1, self.max_attempts + 1):
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            start = time.perf_counter()
            try:
                raw = self.backend.complete(request)
            except LlmTransportError as exc:
                last = exc
                if attempt < self.max_attempts:
                    backoff = self.backoff_base * (2 ** (attempt - 1))
                    self._sleep(backoff * (1.0 + self._rng.random()))
                continue
            latency = (time.perf_counter() - start) * 1000.0
            return LlmResponse(raw_text=raw, parsed_label=None, latency_ms=latency, attempt=attempt)
        raise LlmTransportError(
            f"transport failed after {self.max_attempts} attempts: {last}",
            attempts=self.max_attempts,
        )


_MODEL_TAG_BY_MODE = {"plain": "llm", "weighted": "llm_weighted", "zeroshot": "llm_zeroshot"}


def llm_predict(client: LlmClient, prompt: PromptSpec) -> Prediction:
    """One classification call with a single parse-failure retry.

    The retry appends a system reminder and resends; a second unparseable
    answer (or transport exhaustion) raises QueryFailed so the harness can
    exclude the query pairwise and count it.
    """
    model_tag = _MODEL_TAG_BY_MODE[prompt.mode]
    messages: list[ChatMessage] = list(prompt.messages)
    for round_no in (1, 2):
        try:
            response = client.exchange(messages)
        except LlmTransportError as exc:
            raise QueryFailed(prompt.query_id, f"transport: {exc}") from exc
        except LlmProtocolError as exc:
            raise QueryFailed(prompt.query_id, f"protocol: {exc}") from exc
        try:
            label = parse_label(response.raw_text, prompt.label_space)
        except ParseFailure as exc:
            if round_no == 2:
                raise QueryFailed(prompt.query_id, f"parse: {exc}") from exc
            messages = messages + [ChatMessage("system", PARSE_RETRY_REMINDER)]
            continue
        return Prediction(query_id=prompt.query_id, label=label, model=model_tag)
    raise AssertionError("unreachable")


def llm_predict_batch(
    client: LlmClient, prompts: Sequence[PromptSpec], workers: int = 4
) -> tuple[dict[str, Prediction], dict[str, str]]:
    """Run prompts through a bounded pool; results keyed by query_id.

    Returns (predictions, failures); failures map query_id to the reason
    string from QueryFailed.
    """
    predictions: dict[str, Prediction] = {}
    failures: dict[str, str] = {}
    lock = threading.Lock()

    def one(prompt: PromptSpec) -> None:
        try:
            pred = llm_predict(client, prompt)
        except QueryFailed as exc:
            with lock:
                failures[prompt.query_id] = exc.reason
            return
        with lock:
            predictions[prompt.query_id] = pred

    if workers <= 1:
        for p in prompts:
            one(p)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, prompts))
    return predictions, failures


def build_relevance_prompt(
    query_text: str, example_text: str, task_description: str
) -> tuple[ChatMessage, ChatMessage]:
    system = ChatMessage(
        "system",
        "You judge whether an example is relevant to classifying the given input "
        f"for the task: {task_description}. Answer Yes or No with no explanation.",
    )
    user = ChatMessage("user", f"Input: {query_text}\nExample: {example_text}")
    return system, user


def _parse_yes_no(raw: str) -> bool | None:
    folded = raw.strip(_STRIP_CHARS).casefold()
    if folded == "yes":
        return True
    if folded == "no":
        return False
    return None


def llm_annotate_relevance(
    client: LlmClient, query: Example, demo: Neighbor, task_description: str
) -> RelevanceVerdict:
    """Binary relevance judgment for one (query, demonstration) pair."""
    messages = list(build_relevance_prompt(query.text, demo.text, task_description))
    for round_no in (1, 2):
        try:
            response = client.exchange(messages)
        except LlmTransportError as exc:
            raise AnnotationFailed(query.id, demo.example_id, f"transport: {exc}") from exc
        except LlmProtocolError as exc:
            raise AnnotationFailed(query.id, demo.example_id, f"protocol: {exc}") from exc
        verdict = _parse_yes_no(response.raw_text)
        if verdict is not None:
            return RelevanceVerdict(
                query_id=query.id,
                example_id=demo.example_id,
                relevant=verdict,
                annotator_id=f"llm:{client.model}",
            )
        if round_no == 1:
            messages = messages + [ChatMessage("system", ANNOTATE_RETRY_REMINDER)]
    raise AnnotationFailed(query.id, demo.example_id, "no yes/no answer in 2 attempts")


# --- scripted behaviors for the in-repo mock ---------------------------------

_EXAMPLE_RE = re.compile(
    r"\AExample: We know that the classification for the text '(?P<text>.*)', "
    r"we have answer: '(?P<label>[^']*)'\.(?: \(similarity: (?P<sim>[0-9.]+)\))?\Z",
    re.S,
)

_INSTRUCTION_RE = re.compile(r"Answer as (?P<labels>.+) with no explanation\.\Z")


def parse_prompt_labels(messages: Sequence[ChatMessage]) -> list[str]:
    """Recover the label list from the instruction message (mock plumbing)."""
    for msg in messages:
        m = _INSTRUCTION_RE.search(msg.content)
        if msg.role == "system" and m:
            return m.group("labels").split(", ")
    return []


def parse_prompt_examples(
    messages: Sequence[ChatMessage],
) -> tuple[list[tuple[str, str, float | None]], str]:
    """Recover (text, label, similarity) triples and the query text from a
    rendered ICL prompt; the inverse the scripted mocks rely on."""
    examples: list[tuple[str, str, float | None]] = []
    query_text = ""
    for msg in messages:
        if msg.role == "user":
            query_text = msg.content
            continue
        m = _EXAMPLE_RE.match(msg.content)
        if m:
            sim = float(m.group("sim")) if m.group("sim") is not None else None
            examples.append((m.group("text"), m.group("label"), sim))
    return examples, query_text


def _majority_label(labels: Sequence[str]) -> str:
    counts: dict[str, int] = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    return min(counts, key=lambda lab: (-counts[lab], lab))


def unit_hash(*parts: str) -> float:
    """Deterministic uniform draw in [0, 1) from the given strings.

    Scripted behaviors key randomness on content, never on call order, so a
    resumed run replays identical responses.
    """
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") / 2.0**64


def majority_echo_script(messages: tuple[ChatMessage, ...]) -> str:
    """Echo the majority label among the prompt's demonstrations; on a
    zero-shot prompt (no demonstrations) fall back to the first listed label,
    the deterministic stand-in for parametric memory."""
    examples, _ = parse_prompt_examples(messages)
    if examples:
        return _majority_label([label for _, label, _ in examples])
    labels = parse_prompt_labels(messages)
    if not labels:
        raise LlmProtocolError("majority-echo mock found neither examples nor instruction")
    return labels[0]


def fixed_label_script(label: str) -> Callable[[tuple[ChatMessage, ...]], str]:
    """Always answer with the given label (the parametric-memory stand-in)."""

    def script(messages: tuple[ChatMessage, ...]) -> str:
        return label

    return script


def follower_script(
    follow_probability: float, prior_label: str, salt: str = ""
) -> Callable[[tuple[ChatMessage, ...]], str]:
    """Follow the demonstration majority with the given probability, keyed by
    query text; otherwise fall back to a fixed prior label."""

    def script(messages: tuple[ChatMessage, ...]) -> str:
        examples, query_text = parse_prompt_examples(messages)
        if not examples:
            return prior_label
        if unit_hash("follow", salt, query_text) < follow_probability:
            return _majority_label([label for _, label, _ in examples])
        return prior_label

    return script


def token_overlap(a: str, b: str) -> float:
    """Jaccard overlap of token sets; identical-token texts score 1.0."""
    ta, tb = set(tokenize(a)), set(tokenize(b))
    union = ta | tb
    if not union:
        return 1.0
    return len(ta & tb) / len(union)


def overlap_annotator_script(
    threshold: float = 0.5,
) -> Callable[[tuple[ChatMessage, ...]], str]:
    """Answer Yes when the Input/Example token overlap clears the threshold."""

    def script(messages: tuple[ChatMessage, ...]) -> str:
        user = next((m for m in messages if m.role == "user"), None)
        if user is None or "\nExample: " not in user.content:
            raise LlmProtocolError("overlap annotator expects an Input/Example user message")
        head, example_text = user.content.split("\nExample: ", 1)
        query_text = head.removeprefix("Input: ")
        return "Yes" if token_overlap(query_text, example_text) >= threshold else "No"

    return script


def planted_verdict_annotator_script(
    relevance_by_query: dict[str, float] | float, salt: str = ""
) -> Callable[[tuple[ChatMessage, ...]], str]:
    """Answer Yes with a planted probability, keyed by (query, example) text.

    Accepts either one probability for every query or a map keyed by query
    text. Used to construct suites where mean relevance per dataset is
    controlled.
    """

    def script(messages: tuple[ChatMessage, ...]) -> str:
        user = next((m for m in messages if m.role == "user"), None)
        if user is None or "\nExample: " not in user.content:
            raise LlmProtocolError("planted annotator expects an Input/Example user message")
        head, example_text = user.content.split("\nExample: ", 1)
        query_text = head.removeprefix("Input: ")
        if isinstance(relevance_by_query, dict):
            p = relevance_by_query.get(query_text, 0.0)
        else:
            p = relevance_by_query
        return "Yes" if unit_hash("verdict", salt, query_text, example_text) < p else "No"

    return script
