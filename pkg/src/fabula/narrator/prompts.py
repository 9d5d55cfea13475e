"""Prompt assembly from the versioned template files in ``templates/``.

Each request kind has one template. The engine fills the slots; the first
three header lines (``agent:``, ``location:``, ``date:``) double as the
slot source for scripted-narrator placeholder substitution.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from fabula.narrator import NarratorRequest, max_tokens_for


@lru_cache(maxsize=None)
def template(name: str) -> str:
    return (
        resources.files("fabula.narrator")
        .joinpath(f"templates/{name}.txt")
        .read_text(encoding="utf-8")
    )


def render(name: str, **slots: str) -> str:
    return template(name).format(**slots)


def build_request(kind: str, system_context: str, **slots: str) -> NarratorRequest:
    return NarratorRequest(
        kind=kind,
        system_context=system_context,
        user_context=render(kind, **slots),
        max_reply_tokens=max_tokens_for(kind),
    )
