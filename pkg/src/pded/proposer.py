"""Candidate generation backends behind one propose() interface.

Three interchangeable backends produce raw candidate lines for a prompt:

* llm    - OpenAI-compatible chat completions over HTTP.
* mock   - deterministic, state-dependent policy driven by the strategy
           category and the best skeleton visible in the prompt history;
           makes the whole engine runnable and testable offline.
* replay - plays back recorded responses keyed by prompt sha256.

The engine never distinguishes backends: identical response streams yield
identical runs.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import requests

from .bank import Category
from .errors import HttpError, MalformedEquation, RateLimited, ReplayMiss, Timeout
from .expr import (
    Expression,
    Factor,
    MAX_EXPONENT,
    make_term,
    parse_equation,
    to_text,
)
from .prompt import PromptParts
from .rng import SeededStream

API_KEY_ENV = "PDED_API_KEY"
_ATOMS = tuple(Factor)


class Backend(Enum):
    LLM = "llm"
    MOCK = "mock"
    REPLAY = "replay"


@dataclass(frozen=True)
class ProposerRequest:
    prompt: PromptParts
    m_candidates: int = 5
    temperature: float = 0.7
    timeout_ms: int = 30000

    def __post_init__(self):
        if self.m_candidates < 1:
            raise ValueError("m_candidates must be >= 1")


@dataclass(frozen=True)
class ProposerResponse:
    raw_lines: tuple[str, ...]
    backend: Backend
    latency_ms: int


# ----------------------------------------------------------------------
# mock backend
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MockConfig:
    p_truth: float = 0.0
    p_garbage: float = 0.05
    truth_text: Optional[str] = None

    def __post_init__(self):
        if not 0.0 <= self.p_truth <= 1.0 or not 0.0 <= self.p_garbage <= 1.0:
            raise ValueError("p_truth and p_garbage must lie in [0, 1]")


def _grammar_term(rng: SeededStream):
    pairs = [(rng.choice(_ATOMS), 1 if rng.uniform() < 0.7 else 2)]
    if rng.uniform() < 0.35:
        pairs.append((rng.choice(_ATOMS), 1))
    return make_term(pairs)


def _weighted(pairs_by_weight):
    pool = []
    for weight, pairs in pairs_by_weight:
        pool.extend([pairs] * weight)
    return tuple(pool)


# Stand-in for the physics prior of a pretrained proposer: canonical PDE
# building blocks are drawn far more often than arbitrary grammar noise.
_PLAUSIBLE_TERMS = _weighted([
    (2, ((Factor.U, 1),)),
    (2, ((Factor.U, 2),)),
    (2, ((Factor.U, 3),)),
    (2, ((Factor.UX, 1),)),
    (3, ((Factor.UXX, 1),)),
    (1, ((Factor.UXXX, 1),)),
    (2, ((Factor.U, 1), (Factor.UX, 1))),
    (1, ((Factor.U, 2), (Factor.UX, 1))),
    (1, ((Factor.U, 1), (Factor.UXX, 1))),
    (1, ((Factor.UX, 2),)),
    (1, ((Factor.UX, 1), (Factor.INV_X, 1))),
    (1, ((Factor.SIN_U, 1),)),
    (1, ((Factor.EXP_U, 1),)),
])


def _random_term(rng: SeededStream):
    if rng.uniform() < 0.75:
        return make_term(rng.choice(_PLAUSIBLE_TERMS))
    return _grammar_term(rng)


def _random_skeleton(rng: SeededStream) -> Expression:
    # 1..4 terms, weighted toward the multi-term structures real systems have
    n = 1 if rng.uniform() < 0.1 else 2 + rng.randint(3)
    return Expression.from_terms([_random_term(rng) for _ in range(n)])


def _drop_term(best: Expression, rng: SeededStream) -> Expression:
    idx = rng.randint(len(best.terms))
    return Expression.from_terms(
        [t for i, t in enumerate(best.terms) if i != idx]
    )


def _swap_term(best: Expression, rng: SeededStream) -> Expression:
    idx = rng.randint(len(best.terms))
    terms = list(best.terms)
    terms[idx] = _random_term(rng)
    return Expression.from_terms(terms)


def _perturb_exponent(best: Expression, rng: SeededStream) -> Expression:
    t_idx = rng.randint(len(best.terms))
    term = best.terms[t_idx]
    f_idx = rng.randint(len(term.factors))
    step = 1 if rng.uniform() < 0.5 else -1
    factor, exp = term.factors[f_idx]
    if not 1 <= exp + step <= MAX_EXPONENT:
        step = -step
    pairs = list(term.factors)
    pairs[f_idx] = (factor, exp + step)
    terms = list(best.terms)
    terms[t_idx] = make_term(pairs)
    return Expression.from_terms(terms)


def _generic_line(best: Optional[Expression], rng: SeededStream) -> Expression:
    """Behavior under a static, category-free instruction.

    Mimics a proposer that anchors on its in-context history: mostly local
    edits of the current best with a small chance of a fresh skeleton, so
    a fixed prompt tends to plateau around whatever it found first.
    """
    if best is None or rng.uniform() < 0.2:
        return _random_skeleton(rng)
    move = rng.randint(3)
    if move == 0 and len(best.terms) >= 2:
        return _drop_term(best, rng)
    if move == 1:
        return _swap_term(best, rng)
    return _perturb_exponent(best, rng)


def mock_policy(best: Optional[Expression], category: Optional[Category],
                m: int, rng: SeededStream, cfg: MockConfig) -> list[str]:
    """Generate m candidate lines for one iteration.

    Category drives the edit applied to the best-known skeleton; a fresh
    random skeleton stands in whenever there is no usable best. With no
    category (a static instruction) lines follow the history-anchored
    generic behavior. Each line may independently be replaced by garbage,
    and one line may be swapped for the ground-truth skeleton.
    """
    lines: list[str] = []
    for _ in range(m):
        if category is None:
            skel = _generic_line(best, rng)
        elif category is Category.PARSIMONY and best is not None and len(best.terms) >= 2:
            skel = _drop_term(best, rng)
        elif category is Category.MUTATION and best is not None:
            skel = _swap_term(best, rng)
        elif category is Category.REFINEMENT and best is not None:
            skel = _perturb_exponent(best, rng)
        else:
            skel = _random_skeleton(rng)
        lines.append(to_text(skel))
    for i in range(m):
        if rng.uniform() < cfg.p_garbage:
            lines[i] = f"?? garbled proposal {int(rng.uniform() * 1e6):06d} ##"
        else:
            rng.uniform()  # keep the draw count independent of outcomes
    inject = rng.uniform() < cfg.p_truth
    slot = rng.randint(m)
    if inject and cfg.truth_text:
        lines[slot] = cfg.truth_text
    return lines


class MockProposer:
    """Deterministic proposer; state is read back out of the prompt itself.

    The best skeleton is parsed from the first history line and the
    category is looked up from the instruction text, so the propose()
    surface stays identical to the other backends.
    """

    backend = Backend.MOCK

    def __init__(self, cfg: MockConfig, rng: SeededStream,
                 category_lookup: Optional[Mapping[str, Category]] = None):
        self.cfg = cfg
        self.rng = rng
        self.category_lookup = dict(category_lookup or {})

    def propose(self, req: ProposerRequest) -> ProposerResponse:
        best: Optional[Expression] = None
        for line in req.prompt.history_block.splitlines():
            if line.startswith("Eq: ") and " | Score:" in line:
                try:
                    best = parse_equation(line[4:].split(" | Score:")[0])
                except MalformedEquation:
                    best = None
                break
        category = self.category_lookup.get(req.prompt.strategy_text)
        lines = mock_policy(best, category, req.m_candidates, self.rng, self.cfg)
        return ProposerResponse(tuple(lines), Backend.MOCK, latency_ms=0)


# ----------------------------------------------------------------------
# llm backend
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LlmConfig:
    base_url: str
    model: str
    max_retries: int = 3
    backoff_s: float = 1.0
    api_key_env: str = API_KEY_ENV


def chat_completion(cfg: LlmConfig, content: str, temperature: float,
                    timeout_ms: int,
                    session: Optional[requests.Session] = None) -> str:
    """One chat-completion round trip with 429 backoff.

    Total blocking time, including backoff sleeps, is capped at
    timeout_ms * (1 + max_retries).
    """
    session = session or requests
    url = cfg.base_url.rstrip("/") + "/v1/chat/completions"
    body = {
        "model": cfg.model,
        "messages": [{"role": "user", "content": content}],
        "temperature": temperature,
        "max_tokens": 512,
    }
    headers = {}
    api_key = os.environ.get(cfg.api_key_env, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    timeout_s = timeout_ms / 1000.0
    deadline = time.monotonic() + timeout_s * (1 + cfg.max_retries)
    attempt = 0
    while True:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise Timeout(f"retry budget of {timeout_ms} ms exhausted")
        try:
            resp = session.post(
                url, json=body, headers=headers,
                timeout=min(timeout_s, remaining),
            )
        except requests.Timeout as exc:
            raise Timeout(f"no reply within {timeout_ms} ms") from exc
        except requests.RequestException as exc:
            raise HttpError(0, str(exc)) from exc
        if resp.status_code == 429:
            if attempt >= cfg.max_retries:
                raise RateLimited(f"still rate-limited after {attempt} retries")
            time.sleep(
                min(cfg.backoff_s * 2**attempt,
                    max(deadline - time.monotonic(), 0.0))
            )
            attempt += 1
            continue
        if resp.status_code != 200:
            raise HttpError(resp.status_code, resp.text[:200])
        break
    try:
        return str(resp.json()["choices"][0]["message"]["content"])
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise HttpError(resp.status_code, "malformed completion body") from exc


class LlmProposer:
    """OpenAI-compatible chat completions client with 429 backoff."""

    backend = Backend.LLM

    def __init__(self, cfg: LlmConfig, session: Optional[requests.Session] = None):
        self.cfg = cfg
        self.session = session or requests.Session()

    def propose(self, req: ProposerRequest) -> ProposerResponse:
        started = time.monotonic()
        content = chat_completion(
            self.cfg, req.prompt.rendered, req.temperature, req.timeout_ms,
            self.session,
        )
        lines = []
        for line in content.splitlines():
            if "u_t" not in line:
                continue
            try:
                parse_equation(line)
            except MalformedEquation:
                continue
            lines.append(line.strip())
            if len(lines) >= req.m_candidates:
                break
        latency = int((time.monotonic() - started) * 1000)
        return ProposerResponse(tuple(lines), Backend.LLM, latency)


# ----------------------------------------------------------------------
# replay backend and recording wrapper
# ----------------------------------------------------------------------

class ReplayProposer:
    """Replays a JSONL recording of {prompt_sha256, raw_lines} objects."""

    backend = Backend.REPLAY

    def __init__(self, path: Union[str, Path]):
        self.queues: dict[str, list[tuple[str, ...]]] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                self.queues.setdefault(rec["prompt_sha256"], []).append(
                    tuple(rec["raw_lines"])
                )

    def propose(self, req: ProposerRequest) -> ProposerResponse:
        queue = self.queues.get(req.prompt.sha256_hex)
        if not queue:
            raise ReplayMiss(
                f"no recorded response for prompt {req.prompt.sha256_hex[:12]}"
            )
        return ProposerResponse(queue.pop(0), Backend.REPLAY, latency_ms=0)

    def fast_forward(self, prompt_sha_hexes: Sequence[str]) -> None:
        """Discard entries already consumed by a resumed run's past iterations."""
        for sha in prompt_sha_hexes:
            queue = self.queues.get(sha)
            if queue:
                queue.pop(0)


class RecordingProposer:
    """Tees every response of an inner backend into a replay file."""

    def __init__(self, inner, path: Union[str, Path]):
        self.inner = inner
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    @property
    def backend(self) -> Backend:
        return self.inner.backend

    def fast_forward(self, prompt_sha_hexes: Sequence[str]) -> None:
        if hasattr(self.inner, "fast_forward"):
            self.inner.fast_forward(prompt_sha_hexes)

    def propose(self, req: ProposerRequest) -> ProposerResponse:
        resp = self.inner.propose(req)
        self._fh.write(json.dumps({
            "prompt_sha256": req.prompt.sha256_hex,
            "raw_lines": list(resp.raw_lines),
        }) + "\n")
        self._fh.flush()
        return resp

    def close(self):
        self._fh.close()


def build_proposer(config: Mapping, rng: SeededStream,
                   category_lookup: Optional[Mapping[str, Category]] = None,
                   truth_text: Optional[str] = None):
    """Construct a backend from a run-config proposer section."""
    backend = Backend(config.get("backend", "mock"))
    record_path = config.get("record_path")
    if backend is Backend.MOCK:
        cfg = MockConfig(
            p_truth=float(config.get("p_truth", 0.0)),
            p_garbage=float(config.get("p_garbage", 0.05)),
            truth_text=config.get("truth_text", truth_text),
        )
        inner = MockProposer(cfg, rng, category_lookup)
    elif backend is Backend.LLM:
        inner = LlmProposer(LlmConfig(
            base_url=config["base_url"],
            model=config["model"],
            max_retries=int(config.get("max_retries", 3)),
            backoff_s=float(config.get("backoff_s", 1.0)),
        ))
    else:
        inner = ReplayProposer(config["replay_path"])
    if record_path:
        return RecordingProposer(inner, record_path)
    return inner
