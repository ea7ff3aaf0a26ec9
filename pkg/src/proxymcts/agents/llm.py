"""Chat-completion backed generation agent."""

from __future__ import annotations

import logging
import os
import re
import time
from dataclasses import dataclass, field
from typing import Callable

import requests

from .base import (
    BackendUnavailable,
    CandidatePayload,
    GenerationContext,
    MalformedResponse,
    Mode,
    content_hash,
)

log = logging.getLogger(__name__)

SYSTEM_PROMPT = (
    "You write complete, self-contained Python training scripts. Reply with a "
    "short plan in prose followed by exactly one ```python fenced block."
)

DEFAULT_TEMPLATES = {
    Mode.DRAFT: (
        "Task:\n{task}\n\nData signature:\n{data_signature}\n\nEnvironment:\n{environment}\n"
        "Remaining budget: {budget}\n\n{memory}\n\n"
        "Propose a new solution that differs from every design listed above. "
        "Give a 3-5 sentence plan, then the full script."
    ),
    Mode.IMPROVE: (
        "Task:\n{task}\n\nData signature:\n{data_signature}\n"
        "Remaining budget: {budget}\n\nParent plan:\n{parent_plan}\n\n"
        "Parent script:\n```python\n{parent_script}\n```\n\nExecution result:\n{execution}\n\n"
        "{memory}\n\nMake exactly one atomic modification. State the rationale in "
        "a few sentences, then give the full modified script."
    ),
    Mode.DEBUG: (
        "Task:\n{task}\n\nThe script below fails.\n```python\n{parent_script}\n```\n\n"
        "Execution log:\n{execution}\n\n{memory}\n\n"
        "Explain the root cause briefly, then give the full script with a minimal "
        "fix that keeps the working parts unchanged."
    ),
}

FENCE = re.compile(r"```(?:python|py)?[ \t]*\n(.*?)```", re.DOTALL)
SECRET_KEYS = ("authorization", "api_key", "token")


def parse_response(text: str) -> tuple[str, str]:
    """Split a model reply into (plan, script); the first fenced block is the script."""
    m = FENCE.search(text)
    if m is None or not m.group(1).strip():
        raise MalformedResponse("no fenced script in response")
    plan = text[: m.start()].strip()
    return plan, m.group(1)


def redact(obj):
    if isinstance(obj, dict):
        return {
            k: "***" if any(s in k.lower() for s in SECRET_KEYS) else redact(v)
            for k, v in obj.items()
        }
    if isinstance(obj, list):
        return [redact(v) for v in obj]
    return obj


@dataclass
class LLMGenerator:
    base_url: str
    model: str = "gpt-4.1"
    temperature: float = 0.7
    token_env: str = "PROXYMCTS_API_KEY"
    timeout: float = 120.0
    retries: int = 3
    backoff: float = 1.0
    templates: dict[Mode, str] = field(default_factory=lambda: dict(DEFAULT_TEMPLATES))
    # called with (request, response) dicts for journaling; secrets already redacted
    on_exchange: Callable[[dict, dict], None] | None = None
    session: requests.Session = field(default_factory=requests.Session)

    def render(self, ctx: GenerationContext) -> str:
        return self.templates[ctx.mode].format(
            task=ctx.task_description,
            data_signature=ctx.data_signature,
            environment=ctx.environment,
            budget=f"{ctx.remaining_budget:g}",
            parent_plan=ctx.parent_plan or "",
            parent_script=ctx.parent_script or "",
            execution=ctx.execution_result or "",
            memory=ctx.memory_block(),
        )

    def _post(self, body: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        url = self.base_url.rstrip("/") + "/chat/completions"
        last_exc: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = self.session.post(url, json=body, headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                return resp.json()
            except (requests.RequestException, ValueError) as exc:
                last_exc = exc
                log.warning("LLM request failed (attempt %d/%d): %s", attempt + 1, self.retries, exc)
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * 2**attempt)
        raise BackendUnavailable(str(last_exc))

    def generate(self, ctx: GenerationContext) -> CandidatePayload:
        body = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": self.render(ctx)},
            ],
        }
        data = self._post(body)
        if self.on_exchange is not None:
            self.on_exchange(redact(body), redact(data))
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected response shape: {exc}") from exc
        plan, script = parse_response(text)
        if ctx.mode is Mode.DRAFT and content_hash(script) in ctx.sibling_hashes:
            raise MalformedResponse("draft duplicates a sibling")
        parent_hash = None if ctx.mode is Mode.DRAFT else ctx.parent_hash
        return CandidatePayload(plan=plan, script=script, mode=ctx.mode, parent_hash=parent_hash)
