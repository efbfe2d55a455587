"""Parsing structured blocks out of free-form model output.

Models decorate their answers with prose, so the parser looks for the
first fenced block that decodes as JSON, then falls back to the first
balanced ``{...}`` or ``[...]`` span.
"""

from __future__ import annotations

import json
import re
from typing import Any, Callable, TypeVar

from .errors import GenerationError
from .gateway import ChatRequest, Gateway, ModelSpec

T = TypeVar("T")

_FENCE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n(.*?)```", re.DOTALL)
_DECODER = json.JSONDecoder()

DEFAULT_RETRIES = 2


class StructuredOutputError(ValueError):
    pass


def extract_block(text: str) -> Any:
    for match in _FENCE.finditer(text):
        try:
            return json.loads(match.group(1))
        except json.JSONDecodeError:
            continue
    for i, ch in enumerate(text):
        if ch in "{[":
            try:
                value, _ = _DECODER.raw_decode(text, i)
            except json.JSONDecodeError:
                continue
            return value
    raise StructuredOutputError("no well-formed JSON block found in model output")


def repair_prompt(user_prompt: str, violations: list[str]) -> str:
    problems = "\n".join(f"- {v}" for v in violations)
    return (
        f"{user_prompt}\n\n"
        "Your previous answer could not be accepted because of these problems:\n"
        f"{problems}\n"
        "Answer again with a single corrected ```json fenced block."
    )


def ask_structured(
    gateway: Gateway,
    model: ModelSpec,
    system_prompt: str,
    user_prompt: str,
    convert: Callable[[Any], tuple[T | None, list[str]]],
    *,
    task: str,
    item: str = "",
    retries: int = DEFAULT_RETRIES,
    error: type[GenerationError] = GenerationError,
) -> T:
    """Prompt, parse and validate, re-prompting with the violation list on failure.

    ``convert`` maps the decoded JSON to ``(value, violations)``; a value is
    accepted when the violation list is empty.
    """
    prompt = user_prompt
    raw = ""
    violations: list[str] = []
    for attempt in range(retries + 1):
        raw = gateway.complete(ChatRequest(system_prompt, prompt, model, task=task, item=item, attempt=attempt))
        try:
            data = extract_block(raw)
        except StructuredOutputError as exc:
            violations = [str(exc)]
        else:
            value, violations = convert(data)
            if not violations:
                return value
        prompt = repair_prompt(user_prompt, violations)
    raise error(f"{task}{' ' + item if item else ''}: model output rejected: {'; '.join(violations)}", raw=raw)
