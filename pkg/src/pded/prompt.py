"""Prompt assembly: fixed task context, ranked history, instruction text.

The prompt is the concatenation task-context + history + instruction,
separated by exactly two newlines, and its sha256 digest identifies it in
run logs and replay recordings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

from .expr import Expression, to_text

SEPARATOR = "\n\n"
EMPTY_HISTORY_LINE = "No equations evaluated yet."


@dataclass(frozen=True)
class PromptParts:
    task_context: str
    history_block: str
    strategy_text: str
    sha256: bytes

    @property
    def rendered(self) -> str:
        return SEPARATOR.join(
            (self.task_context, self.history_block, self.strategy_text)
        )

    @property
    def sha256_hex(self) -> str:
        return self.sha256.hex()


def render_task(dataset_name: str, m_candidates: int) -> str:
    """Fixed per-dataset preamble: variables, factor library, output format."""
    return (
        f"You are searching for the governing equation of the 1-D "
        f"spatiotemporal field u(x, t) in the dataset '{dataset_name}'.\n"
        "The equation has the form u_t = <expression>, where <expression> "
        "is a sum of at most 8 terms.\n"
        "Each term is a product of factors drawn from: "
        "u, u_x, u_xx, u_xxx, x, 1/x, sin(u), exp(u).\n"
        "A factor may carry an integer exponent between 1 and 4, written "
        "like u^2. Numeric coefficients are optional; they are refit "
        "anyway.\n"
        f"Reply with exactly {m_candidates} candidate equations, one per "
        "line, each line of the form: u_t = <expression>\n"
        "Output nothing but the equations."
    )


def format_history(history: Sequence[tuple[Expression, float]],
                   top_n: int) -> str:
    """Render the top-n scored skeletons, best first.

    Duplicate skeletons keep their best score; ties rank by earlier
    discovery. An empty history renders a fixed placeholder line.
    """
    if top_n < 0:
        raise ValueError("top_n must be non-negative")
    best: dict[Expression, tuple[float, int]] = {}
    for idx, (e, score) in enumerate(history):
        prev = best.get(e)
        if prev is None or score > prev[0]:
            best[e] = (score, prev[1] if prev is not None else idx)
    if not best:
        return EMPTY_HISTORY_LINE
    ranked = sorted(best.items(), key=lambda kv: (-kv[1][0], kv[1][1]))
    return "\n".join(
        f"Eq: {to_text(e)} | Score: {score:.4f}"
        for e, (score, _) in ranked[:top_n]
    )


def build_prompt(task: str, history_block: str, strategy_text: str) -> PromptParts:
    """Concatenate the three prompt components and digest the result."""
    if not task:
        raise ValueError("task context must be non-empty")
    payload = SEPARATOR.join((task, history_block, strategy_text))
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return PromptParts(task, history_block, strategy_text, digest)
