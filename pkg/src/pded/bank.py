"""Instruction strategy bank: loading, validation, sampling.

The bank is a JSON array of {"id", "category", "text"} objects with ids
exactly 1..K. The shipped default holds 100 entries in four contiguous
category blocks (exploration 1-25, parsimony 26-50, mutation 51-75,
refinement 76-100) so that index-adjacent strategies are semantically
related.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Union

from .errors import BankFormatError, DuplicateId, EmptyText
from .rng import SeededStream


class Category(Enum):
    EXPLORATION = "exploration"
    PARSIMONY = "parsimony"
    MUTATION = "mutation"
    REFINEMENT = "refinement"


@dataclass(frozen=True)
class Strategy:
    id: int
    category: Category
    text: str


@dataclass(frozen=True)
class StrategyBank:
    strategies: tuple[Strategy, ...]

    @property
    def K(self) -> int:
        return len(self.strategies)

    def __getitem__(self, strategy_id: int) -> Strategy:
        if not 1 <= strategy_id <= self.K:
            raise KeyError(strategy_id)
        return self.strategies[strategy_id - 1]

    def category_by_text(self) -> dict[str, Category]:
        """Instruction text -> category lookup (first occurrence wins)."""
        out: dict[str, Category] = {}
        for s in self.strategies:
            out.setdefault(s.text, s.category)
        return out


def default_bank_path() -> Path:
    return Path(resources.files("pded").joinpath("data/bank.json"))


def load_bank(path: Union[str, Path, None] = None) -> StrategyBank:
    """Load and validate a bank file; None loads the shipped default."""
    path = Path(path) if path is not None else default_bank_path()
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BankFormatError(f"cannot read bank file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BankFormatError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise BankFormatError("bank must be a non-empty JSON array")

    strategies = []
    seen: set[int] = set()
    for item in raw:
        if not isinstance(item, dict):
            raise BankFormatError("bank entries must be objects")
        try:
            sid = item["id"]
            category = item["category"]
            text = item["text"]
        except KeyError as exc:
            raise BankFormatError(f"bank entry missing key {exc}") from exc
        if not isinstance(sid, int) or isinstance(sid, bool):
            raise BankFormatError(f"id {sid!r} is not an integer")
        if sid in seen:
            raise DuplicateId(f"strategy id {sid} appears twice")
        seen.add(sid)
        if not isinstance(text, str) or not text:
            raise EmptyText(f"strategy {sid} has empty text")
        try:
            cat = Category(category)
        except ValueError as exc:
            raise BankFormatError(
                f"strategy {sid} has unknown category {category!r}"
            ) from exc
        strategies.append(Strategy(sid, cat, text))

    strategies.sort(key=lambda s: s.id)
    ids = [s.id for s in strategies]
    if ids != list(range(1, len(ids) + 1)):
        raise BankFormatError("strategy ids must be exactly 1..K")
    return StrategyBank(tuple(strategies))


def sample_random(bank: StrategyBank, rng: SeededStream) -> int:
    """Uniform strategy id in 1..K, consuming exactly one draw."""
    return rng.randint(bank.K) + 1


_CATEGORY_BRIEF = {
    Category.EXPLORATION:
        "push toward untried, structurally novel equation forms",
    Category.PARSIMONY:
        "push toward simpler equations with fewer terms",
    Category.MUTATION:
        "alter one structural piece of the current best equation",
    Category.REFINEMENT:
        "make small functional-form adjustments to a nearly correct structure",
}


def generate_bank(base_url: str, model: str, out_path: Union[str, Path],
                  k: int = 100, timeout_ms: int = 60000) -> StrategyBank:
    """Regenerate a bank via an LLM endpoint; requires PDED_API_KEY.

    Asks for k/4 instruction variants per category and validates the
    assembled file with load_bank before returning it.
    """
    from .proposer import LlmConfig, chat_completion  # local: avoids cycle

    if k % 4 != 0:
        raise ValueError("k must be divisible by the four categories")
    per = k // 4
    cfg = LlmConfig(base_url=base_url, model=model)
    entries = []
    for cat in Category:
        prompt = (
            f"Write {per} distinct one-sentence instructions for an "
            f"equation-discovery assistant. Each instruction should "
            f"{_CATEGORY_BRIEF[cat]}. Reply with one instruction per "
            "line, no numbering."
        )
        text = chat_completion(cfg, prompt, temperature=0.9,
                               timeout_ms=timeout_ms)
        lines = [ln.strip().lstrip("-*0123456789. ").strip()
                 for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if len(lines) < per:
            raise BankFormatError(
                f"model returned {len(lines)} {cat.value} lines; need {per}"
            )
        for ln in lines[:per]:
            entries.append({
                "id": len(entries) + 1,
                "category": cat.value,
                "text": ln,
            })
    out_path = Path(out_path)
    out_path.write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")
    return load_bank(out_path)
