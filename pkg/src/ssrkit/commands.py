"""Parsing of the edit-command protocol and strict single-object candidates.

LLM output is adversarially messy: tags are matched case-insensitively and
whitespace-tolerantly, commands may be wrapped in prose, and candidate
parsing is a total function that never raises.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .errors import MalformedTag, NoCommands, ParseError
from .scene import SceneObject, _parse_object

_TAG_RE = re.compile(
    r"^\s*<\s*(add|remove)\s*>(.*?)<\s*/\s*\1\s*>\s*$",
    re.IGNORECASE | re.DOTALL,
)

MAX_INPUT_BYTES = 1 << 20


@dataclass(frozen=True)
class EditCommand:
    kind: str  # "add" | "remove"
    description: str


@dataclass(frozen=True)
class CommandList:
    commands: tuple[EditCommand, ...]
    reasoning: str | None = None
    order_warning: bool = False  # a remove appeared after an add


@dataclass(frozen=True)
class InvalidOutput:
    reason: str


def _find_json_object(text: str) -> dict | None:
    """Locate the first JSON object in possibly prose-wrapped text."""
    decoder = json.JSONDecoder()
    for start in range(len(text)):
        if text[start] != "{":
            continue
        try:
            value, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            continue
        if isinstance(value, dict):
            return value
    return None


def parse_commands(text: str) -> CommandList:
    """Extract <add>/<remove> commands from a response document."""
    if len(text.encode("utf-8", errors="replace")) > MAX_INPUT_BYTES:
        raise NoCommands("input exceeds 1 MiB")
    doc = _find_json_object(text)
    if doc is None or "commands" not in doc:
        raise NoCommands("no JSON object with a 'commands' key found")
    raw = doc["commands"]
    if not isinstance(raw, list) or not raw:
        raise NoCommands("'commands' is empty or not a list")
    commands = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, str):
            raise MalformedTag(i, repr(entry))
        match = _TAG_RE.match(entry)
        if not match:
            raise MalformedTag(i, entry)
        commands.append(EditCommand(match.group(1).lower(), match.group(2).strip()))
    seen_add = False
    order_warning = False
    for cmd in commands:
        if cmd.kind == "add":
            seen_add = True
        elif seen_add:
            order_warning = True  # protocol says removes come first
    reasoning = doc.get("reasoning") if isinstance(doc.get("reasoning"), str) else None
    return CommandList(tuple(commands), reasoning, order_warning)


def render_commands(commands: CommandList) -> str:
    """Canonical serializer, the inverse of parse_commands on its output."""
    doc: dict = {}
    if commands.reasoning is not None:
        doc["reasoning"] = commands.reasoning
    doc["commands"] = [f"<{c.kind}>{c.description}</{c.kind}>"
                       for c in commands.commands]
    return json.dumps(doc)


def parse_candidate_object(text: str) -> SceneObject | InvalidOutput:
    """Strictly parse a single-object candidate for reward scoring.

    Total function: any malformed input maps to InvalidOutput, never an
    exception, so the reward layer can assign the invalid-output penalty.
    """
    try:
        if not isinstance(text, str):
            return InvalidOutput("not_text")
        if len(text.encode("utf-8", errors="replace")) > MAX_INPUT_BYTES:
            return InvalidOutput("too_large")
        try:
            raw = json.loads(text)
        except (json.JSONDecodeError, ValueError, RecursionError):
            return InvalidOutput("malformed")
        if not isinstance(raw, dict):
            return InvalidOutput("not_an_object")
        try:
            return _parse_object(raw, "$")
        except ParseError as exc:
            return InvalidOutput(exc.kind)
    except Exception:  # total by contract, whatever the input
        return InvalidOutput("malformed")
