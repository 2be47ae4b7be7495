"""Vulnerability findings shared by the native queries, the query language
interpreter and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Finding:
    query: int | None          # built-in query id, None for user query files
    kind: str
    function: str
    label: str
    description: str = ""
    nodes: list[int] = field(default_factory=list)

    def key(self) -> tuple[str, str, str]:
        """Identity used when comparing engines: (kind, function, label)."""
        return (self.kind, self.function, self.label)

    def to_json_dict(self) -> dict:
        return {
            "query": self.query,
            "kind": self.kind,
            "function": self.function,
            "label": self.label,
            "description": self.description,
            "nodes": list(self.nodes),
        }
