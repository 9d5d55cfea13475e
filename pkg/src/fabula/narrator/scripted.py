"""Deterministic scripted narrator.

Rules live in a line-oriented UTF-8 file::

    # comment
    kind | matcher-substring | response template

The matcher ``*`` declares the kind's default response, used when no other
rule matches; every kind must have one. Matching is first-rule-wins on a
literal (case-sensitive) substring of the request's user context. Templates
may contain ``\\n`` escapes for multi-line replies and the placeholders
``{agent}``, ``{location}`` and ``{sim_date}``, which are filled from the
``agent:`` / ``location:`` / ``date:`` header lines the engine writes at the
top of every user context.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from fabula.narrator import (
    REQUEST_KINDS,
    NarratorRequest,
    NarratorResponse,
    ScriptLoadError,
)

DEFAULT_MATCHER = "*"

_HEADER_KEYS = {"agent": "agent", "location": "location", "date": "sim_date"}
_HEADER_LINE = re.compile(r"^(agent|location|date):[ \t]*(.*)$", re.MULTILINE)


@dataclass
class ScriptedRule:
    kind: str
    matcher: str
    template: str


@dataclass
class ScriptedRuleSet:
    """Ordered rule table plus one default template per kind."""

    rules: list[ScriptedRule] = field(default_factory=list)
    defaults: dict[str, str] = field(default_factory=dict)

    def lookup(self, kind: str, user_context: str) -> str:
        for rule in self.rules:
            if rule.kind == kind and rule.matcher in user_context:
                return rule.template
        return self.defaults[kind]


def _unescape(template: str) -> str:
    return template.replace("\\n", "\n")


def parse_rules(text: str, source: str = "<string>") -> ScriptedRuleSet:
    ruleset = ScriptedRuleSet()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("|", 2)
        if len(parts) != 3:
            raise ScriptLoadError(f"{source}:{lineno}: expected 'kind | matcher | template'")
        kind, matcher, template = parts[0].strip(), parts[1].strip(), parts[2].strip()
        if kind not in REQUEST_KINDS:
            raise ScriptLoadError(f"{source}:{lineno}: unknown kind '{kind}'")
        if not template:
            raise ScriptLoadError(f"{source}:{lineno}: empty template")
        if matcher == DEFAULT_MATCHER:
            ruleset.defaults.setdefault(kind, _unescape(template))
        else:
            ruleset.rules.append(ScriptedRule(kind, matcher, _unescape(template)))
    missing = [kind for kind in REQUEST_KINDS if kind not in ruleset.defaults]
    if missing:
        raise ScriptLoadError(f"{source}: missing default ('*') rule for: {', '.join(missing)}")
    return ruleset


def load_rules(path: str | Path) -> ScriptedRuleSet:
    path = Path(path)
    return parse_rules(path.read_text(encoding="utf-8"), source=str(path))


def default_ruleset() -> ScriptedRuleSet:
    """The rule table shipped with the package."""
    from importlib import resources

    text = resources.files("fabula").joinpath("rules/default.rules").read_text(encoding="utf-8")
    return parse_rules(text, source="fabula:rules/default.rules")


class _Slots(dict):
    """format_map helper: known-but-missing slots become empty, unknown
    braces stay literal."""

    def __missing__(self, key: str) -> str:
        if key in ("agent", "location", "sim_date"):
            return ""
        return "{" + key + "}"


def extract_slots(user_context: str) -> dict[str, str]:
    slots: dict[str, str] = {}
    for key, value in _HEADER_LINE.findall(user_context):
        slots.setdefault(_HEADER_KEYS[key], value.strip())
    return slots


class ScriptedNarrator:
    """Replays the rule table; byte-identical output for identical input."""

    backend_id = "scripted"

    def __init__(self, ruleset: ScriptedRuleSet) -> None:
        self.ruleset = ruleset

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedNarrator":
        return cls(load_rules(path))

    def complete(self, request: NarratorRequest) -> NarratorResponse:
        template = self.ruleset.lookup(request.kind, request.user_context)
        text = template.format_map(_Slots(extract_slots(request.user_context)))
        return NarratorResponse(text=text, backend_id=self.backend_id, latency_ms=0)
