"""Bounded conversation context.

The model sees the system message plus the longest contiguous suffix of
history that fits the character budget, with whole messages only. A
tool result or image attachment never enters without the assistant tool
call that triggered it: if the window boundary would split such a
group, the orphaned members are dropped from the old edge.
"""

from __future__ import annotations

from ..providers.chat import ChatMessage

CONTEXT_BUDGET_CHARS = 65_536

_GROUP_MEMBERS = ("tool_result", "image_attachment")


def build_context(
    history: list[ChatMessage],
    system_message: ChatMessage,
    budget: int = CONTEXT_BUDGET_CHARS,
) -> tuple[list[ChatMessage], list[str]]:
    """Returns (context messages, flags). Flags record budget anomalies."""
    flags: list[str] = []
    if not history:
        return [system_message], flags
    total = 0
    start = len(history)
    for i in range(len(history) - 1, -1, -1):
        if total + history[i].char_len > budget:
            break
        total += history[i].char_len
        start = i
    if start == len(history):
        # The newest message alone exceeds the budget; include it anyway.
        start = len(history) - 1
        flags.append("oversize_message")
    while start < len(history) and history[start].role in _GROUP_MEMBERS:
        start += 1
    return [system_message] + history[start:], flags
