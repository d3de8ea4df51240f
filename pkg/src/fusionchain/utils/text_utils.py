"""Small formatting helpers for log lines."""

from typing import Iterable, Tuple


def pluralize(text: str, count: int = 2) -> str:
    """Return ``text`` unchanged for a count of 1 and in plural otherwise."""
    if count == 1:
        return text
    if text.endswith("y") and not text.endswith(("ay", "ey", "oy")):
        return f"{text[:-1]}ies"
    if text.endswith(("s", "x")):
        return f"{text}es"
    return f"{text}s"


def describe_count(count: int, noun: str) -> str:
    """``describe_count(3, "fusion")`` -> ``"3 fusions"``."""
    return f"{count} {pluralize(noun, count)}"


def format_edges(edges: Iterable[Tuple[int, int]]) -> str:
    """Render edges as ``"0-1, 1-2"`` in sorted order."""
    return ", ".join(f"{u}-{v}" for u, v in sorted(edges))
