"""Closed-loop discovery engine and run persistence.

Each trial runs T iterations of: select an instruction (uniformly during
the warmup phase, then by GP + Expected Improvement), assemble the prompt
with the top-scored history, ask the proposer for M candidates, fit each
with STRidge, and feed the best score back into the history and the
bandit observations. The fixed-prompt baseline uses one static
instruction and never touches the surrogate.

Every iteration appends one JSON record to the trial log; a checkpoint
with enough state to resume (history, observations, rng counter) is
written every 25 iterations. Runs with the mock or replay backends are
bitwise reproducible from the seed, so wall-clock fields are recorded as
zero for those backends.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from . import bo
from .bank import StrategyBank, load_bank, sample_random
from .errors import (
    BackendMismatch,
    CheckpointFormatError,
    DegenerateProblem,
    EmptySplit,
    MalformedEquation,
    PdedError,
    ProposerError,
    SingularFactor,
    ZeroVariance,
)
from .expr import Expression, parse_equation, to_text
from .fit import FitResult, StridgeConfig, evaluate_coefficients, stridge
from .numerics import Dataset, Split, build_problem
from .prompt import build_prompt, format_history, render_task
from .proposer import Backend, ProposerRequest, build_proposer
from .rng import SeededStream
from .solver import ground_truth_for, load_dataset

CHECKPOINT_EVERY = 25

MODE_DYNAMIC = "NeuroSymBo"
MODE_FIXED = "FixedPrompt"
DEFAULT_FIXED_INSTRUCTION = "Find the equation that best fits this data."


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    mode: str = MODE_DYNAMIC
    T: int = 300
    trials: int = 5
    K_init: int = 10
    m_candidates: int = 5
    top_n: int = 5
    lam: float = 0.01
    kernel: str = "IndexRBF"
    stridge: StridgeConfig = StridgeConfig()
    proposer: dict = field(default_factory=lambda: {"backend": "mock"})
    seed: int = 0
    fixed_instruction: str = DEFAULT_FIXED_INSTRUCTION
    bank: Optional[str] = None

    def __post_init__(self):
        if self.mode not in (MODE_DYNAMIC, MODE_FIXED):
            raise ValueError(f"unknown mode {self.mode!r}")
        bo.Kernel(self.kernel)
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.K_init < 2:
            raise ValueError("K_init must be >= 2 so the surrogate can fit")
        if self.trials < 1 or self.m_candidates < 1 or self.top_n < 0:
            raise ValueError("trials/m_candidates/top_n out of range")

    @classmethod
    def from_json(cls, data: dict) -> "RunConfig":
        known = {
            "dataset", "mode", "T", "trials", "K_init", "m_candidates",
            "top_n", "lambda", "kernel", "stridge", "proposer", "seed",
            "fixed_instruction", "bank",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "dataset" not in data:
            raise ValueError("config requires a 'dataset' path")
        stridge_raw = dict(data.get("stridge", {}))
        stridge_raw.pop("lambda_parsimony", None)
        lam = float(data.get("lambda", 0.01))
        kwargs = {
            k: data[k]
            for k in ("mode", "T", "trials", "K_init", "m_candidates",
                      "top_n", "kernel", "seed", "fixed_instruction", "bank")
            if k in data
        }
        return cls(
            dataset=data["dataset"],
            lam=lam,
            stridge=StridgeConfig(lambda_parsimony=lam, **stridge_raw),
            proposer=dict(data.get("proposer", {"backend": "mock"})),
            **kwargs,
        )

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "mode": self.mode,
            "T": self.T,
            "trials": self.trials,
            "K_init": self.K_init,
            "m_candidates": self.m_candidates,
            "top_n": self.top_n,
            "lambda": self.lam,
            "kernel": self.kernel,
            "stridge": {
                "ridge_alpha": self.stridge.ridge_alpha,
                "threshold": self.stridge.threshold,
                "max_iters": self.stridge.max_iters,
                "lambda_parsimony": self.stridge.lambda_parsimony,
            },
            "proposer": dict(self.proposer),
            "seed": self.seed,
            "fixed_instruction": self.fixed_instruction,
            "bank": self.bank,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class _HistEntry:
    expr: Expression
    coefficients: tuple[float, ...]
    score: float
    first_iter: int


@dataclass
class _Candidate:
    pruned: Optional[Expression]
    coefficients: tuple[float, ...]
    fit: FitResult


def trial_log_path(out_dir: Union[str, Path], trial: int) -> Path:
    return Path(out_dir) / f"trial_{trial:02d}.jsonl"


def trial_checkpoint_path(out_dir: Union[str, Path], trial: int) -> Path:
    return Path(out_dir) / f"trial_{trial:02d}.ckpt.json"


class TrialRunner:
    """One independent trial: own rng stream, proposer, log and checkpoint."""

    def __init__(self, config: RunConfig, dataset: Dataset,
                 bank: Optional[StrategyBank], trial: int,
                 out_dir: Union[str, Path]):
        self.config = config
        self.dataset = dataset
        self.bank = bank
        self.trial = trial
        self.out_dir = Path(out_dir)
        self.seed = config.seed + trial
        self.stream = SeededStream(self.seed)
        gt = ground_truth_for(dataset.name)
        self.gt_expr = gt[0] if gt else None
        lookup = bank.category_by_text() if bank else {}
        self.proposer = build_proposer(
            config.proposer, self.stream, lookup,
            truth_text=to_text(self.gt_expr) if self.gt_expr else None,
        )
        self.deterministic = self.proposer.backend in (Backend.MOCK, Backend.REPLAY)
        self.task = render_task(dataset.name, config.m_candidates)
        self.history: dict[Expression, _HistEntry] = {}
        self.observations: list[bo.Observation] = []
        self.y_star: Optional[float] = None
        self.best: Optional[_HistEntry] = None
        self._eval_cache: dict[Expression, Optional[_Candidate]] = {}
        self._test_r2_cache: dict[Expression, Optional[float]] = {}

    # -- state plumbing -------------------------------------------------

    def _evaluate(self, e: Expression) -> Optional[_Candidate]:
        if e in self._eval_cache:
            return self._eval_cache[e]
        try:
            problem = build_problem(self.dataset, e, Split.TRAIN)
            fr = stridge(problem, self.config.stridge)
            if fr.support:
                pruned = Expression.from_terms([e.terms[i] for i in fr.support])
                coeffs = tuple(fr.coefficients[i] for i in fr.support)
            else:
                pruned, coeffs = None, ()
            cand = _Candidate(pruned, coeffs, fr)
        except (SingularFactor, EmptySplit, DegenerateProblem, ZeroVariance,
                MalformedEquation):
            cand = None
        self._eval_cache[e] = cand
        return cand

    def _insert_history(self, cand: _Candidate, t: int) -> None:
        entry = self.history.get(cand.pruned)
        if entry is None:
            entry = _HistEntry(cand.pruned, cand.coefficients,
                               cand.fit.score, t)
            self.history[cand.pruned] = entry
        elif cand.fit.score > entry.score:
            entry.score = cand.fit.score
            entry.coefficients = cand.coefficients
        if self.y_star is None or entry.score > self.y_star:
            self.y_star = entry.score
            self.best = entry

    def _best_test_r2(self) -> Optional[float]:
        if self.best is None:
            return None
        e = self.best.expr
        if e not in self._test_r2_cache:
            try:
                problem = build_problem(self.dataset, e, Split.TEST)
                _, r2 = evaluate_coefficients(problem, self.best.coefficients)
            except (SingularFactor, EmptySplit, ZeroVariance):
                r2 = None
            self._test_r2_cache[e] = r2
        return self._test_r2_cache[e]

    def _select(self, t: int) -> tuple[Optional[int], str]:
        if self.config.mode == MODE_FIXED:
            return None, self.config.fixed_instruction
        if t <= self.config.K_init:
            k = sample_random(self.bank, self.stream)
        else:
            gp = bo.fit_gp(self.observations, bo.Kernel(self.config.kernel),
                           self.bank.K)
            y_star = self.y_star if self.y_star is not None else max(
                o.fitness for o in self.observations
            )
            k = bo.select_strategy(gp, self.bank.K, y_star)
        return k, self.bank[k].text

    # -- one iteration --------------------------------------------------

    def _iterate(self, t: int) -> dict:
        started = time.monotonic()
        strategy_id, strategy_text = self._select(t)
        pairs = [(e, h.score) for e, h in self.history.items()]
        parts = build_prompt(
            self.task, format_history(pairs, self.config.top_n), strategy_text
        )
        req = ProposerRequest(
            prompt=parts,
            m_candidates=self.config.m_candidates,
            temperature=float(self.config.proposer.get("temperature", 0.7)),
            timeout_ms=int(self.config.proposer.get("timeout_ms", 30000)),
        )
        try:
            resp = self.proposer.propose(req)
            raw_lines = resp.raw_lines
        except ProposerError:
            raw_lines = ()

        parsed = 0
        candidates: list[_Candidate] = []
        for line in raw_lines:
            try:
                e = parse_equation(line)
            except MalformedEquation:
                continue
            parsed += 1
            cand = self._evaluate(e)
            if cand is not None:
                candidates.append(cand)

        best_cand = max(candidates, key=lambda c: c.fit.score, default=None)
        s_t = best_cand.fit.score if best_cand is not None else 0.0
        if best_cand is not None and best_cand.pruned is not None:
            self._insert_history(best_cand, t)
        if self.config.mode == MODE_DYNAMIC:
            self.observations.append(bo.Observation(strategy_id, s_t))

        recovered = (
            self.gt_expr is not None
            and self.best is not None
            and self.best.expr == self.gt_expr
        )
        elapsed = 0 if self.deterministic else int(
            (time.monotonic() - started) * 1000
        )
        record = {
            "record": "iter",
            "iter": t,
            "mode": self.config.mode,
            "strategy_id": strategy_id,
            "strategy_category": (
                self.bank[strategy_id].category.value
                if strategy_id is not None else None
            ),
            "prompt_sha256": parts.sha256_hex,
            "raw_line_count": len(raw_lines),
            "parsed_count": parsed,
            "best_candidate": None if best_cand is None else {
                "skeleton": (
                    to_text(best_cand.pruned)
                    if best_cand.pruned is not None else None
                ),
                "coefficients": list(best_cand.coefficients),
                "support": list(best_cand.fit.support),
                "nrmse_train": best_cand.fit.nrmse_train,
                "score": best_cand.fit.score,
            },
            "S_t": s_t,
            "y_star": self.y_star,
            "best_test_r2": self._best_test_r2(),
            "recovered": recovered if self.gt_expr is not None else None,
            "elapsed_ms": elapsed,
        }
        return record

    # -- log records ----------------------------------------------------

    def _header(self, resumed: bool) -> dict:
        return {
            "record": "header",
            "config": self.config.to_json(),
            "config_hash": self.config.config_hash(),
            "trial": self.trial,
            "seed": self.seed,
            "dataset_name": self.dataset.name,
            "dataset_crc": self.dataset.payload_crc32,
            "resumed": resumed,
            "nondeterministic_resume": resumed and not self.deterministic,
        }

    def _footer(self) -> dict:
        out = {
            "record": "footer",
            "iterations": self.config.T,
            "y_star": self.y_star,
            "best_skeleton": None,
            "coefficients": None,
            "nrmse_train": None,
            "r2_train": None,
            "nrmse_test": None,
            "r2_test": None,
            "recovered": None,
        }
        if self.best is not None:
            e, coeffs = self.best.expr, self.best.coefficients
            out["best_skeleton"] = to_text(e)
            out["coefficients"] = list(coeffs)
            train = build_problem(self.dataset, e, Split.TRAIN)
            n_tr, r_tr = evaluate_coefficients(train, coeffs)
            out["nrmse_train"], out["r2_train"] = n_tr, r_tr
            try:
                test = build_problem(self.dataset, e, Split.TEST)
                n_te, r_te = evaluate_coefficients(test, coeffs)
                out["nrmse_test"], out["r2_test"] = n_te, r_te
            except (EmptySplit, ZeroVariance):
                pass
            if self.gt_expr is not None:
                out["recovered"] = e == self.gt_expr
        return out

    def _checkpoint(self, t: int) -> None:
        ckpt = {
            "iter": t,
            "trial": self.trial,
            "history": [
                {
                    "skeleton": to_text(h.expr),
                    "coefficients": list(h.coefficients),
                    "score": h.score,
                    "iter": h.first_iter,
                }
                for h in self.history.values()
            ],
            "observations": [
                {"strategy_id": o.strategy_id, "fitness": o.fitness}
                for o in self.observations
            ],
            "y_star": self.y_star,
            "rng": {"seed": self.stream.seed, "counter": self.stream.counter},
            "config_hash": self.config.config_hash(),
            "dataset_crc": self.dataset.payload_crc32,
        }
        trial_checkpoint_path(self.out_dir, self.trial).write_text(
            json.dumps(ckpt, sort_keys=True) + "\n"
        )

    # -- drivers ----------------------------------------------------------

    def run(self) -> dict:
        """Fresh run: header, T iteration records, footer."""
        log_path = trial_log_path(self.out_dir, self.trial)
        with open(log_path, "w", encoding="utf-8") as fh:
            self._write(fh, self._header(resumed=False))
            for t in range(1, self.config.T + 1):
                self._write(fh, self._iterate(t))
                if t % CHECKPOINT_EVERY == 0:
                    fh.flush()
                    self._checkpoint(t)
            footer = self._footer()
            self._write(fh, footer)
        return footer

    def resume(self, checkpoint: dict, kept_lines: list[str]) -> dict:
        """Continue from a checkpoint; the rewritten log matches a fresh run."""
        t0 = int(checkpoint["iter"])
        for item in checkpoint["history"]:
            e = parse_equation(item["skeleton"])
            entry = _HistEntry(
                e, tuple(item["coefficients"]), float(item["score"]),
                int(item["iter"]),
            )
            self.history[e] = entry
            if self.y_star is None or entry.score > self.y_star:
                self.y_star = entry.score
                self.best = entry
        self.observations = [
            bo.Observation(int(o["strategy_id"]), float(o["fitness"]))
            for o in checkpoint["observations"]
        ]
        self.stream.counter = int(checkpoint["rng"]["counter"])
        if hasattr(self.proposer, "fast_forward"):
            shas = []
            for line in kept_lines:
                rec = json.loads(line)
                if rec.get("record") == "iter":
                    shas.append(rec["prompt_sha256"])
            self.proposer.fast_forward(shas)

        log_path = trial_log_path(self.out_dir, self.trial)
        with open(log_path, "w", encoding="utf-8") as fh:
            for line in kept_lines:
                fh.write(line + "\n")
            for t in range(t0 + 1, self.config.T + 1):
                self._write(fh, self._iterate(t))
                if t % CHECKPOINT_EVERY == 0:
                    fh.flush()
                    self._checkpoint(t)
            footer = self._footer()
            self._write(fh, footer)
        return footer

    @staticmethod
    def _write(fh, record: dict) -> None:
        fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


def _load_inputs(config: RunConfig) -> tuple[Dataset, Optional[StrategyBank]]:
    dataset = load_dataset(config.dataset)
    bank = None
    if config.mode == MODE_DYNAMIC:
        bank = load_bank(config.bank)
    return dataset, bank


def run(config: RunConfig, out_dir: Union[str, Path],
        jobs: Optional[int] = None) -> list[dict]:
    """Run all trials, one log file each; returns the per-trial footers."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset, bank = _load_inputs(config)
    jobs = jobs or config.trials

    def one(trial: int) -> dict:
        return TrialRunner(config, dataset, bank, trial, out_dir).run()

    if jobs <= 1 or config.trials == 1:
        return [one(i) for i in range(config.trials)]
    with ThreadPoolExecutor(max_workers=min(jobs, config.trials)) as pool:
        return list(pool.map(one, range(config.trials)))


def resume(config: RunConfig, checkpoint_path: Union[str, Path],
           out_dir: Union[str, Path]) -> dict:
    """Resume the checkpointed trial; other trials are untouched."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        ckpt = json.loads(Path(checkpoint_path).read_text())
        trial = int(ckpt["trial"])
        t0 = int(ckpt["iter"])
        ckpt_hash = ckpt["config_hash"]
        ckpt_crc = int(ckpt["dataset_crc"])
        rng_seed = int(ckpt["rng"]["seed"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CheckpointFormatError(f"unreadable checkpoint: {exc}") from exc

    dataset, bank = _load_inputs(config)
    if ckpt_hash != config.config_hash():
        raise BackendMismatch("checkpoint was written under a different config")
    if ckpt_crc != dataset.payload_crc32:
        raise BackendMismatch("checkpoint dataset CRC does not match")
    if rng_seed != config.seed + trial:
        raise BackendMismatch("checkpoint rng seed does not match the config seed")

    log_path = trial_log_path(out_dir, trial)
    if not log_path.exists():
        raise CheckpointFormatError(
            f"resume needs the partial trial log {log_path}"
        )
    kept: list[str] = []
    for line in log_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("record") == "header" or (
            rec.get("record") == "iter" and rec.get("iter", 0) <= t0
        ):
            kept.append(line)
    n_iter_kept = sum(
        1 for line in kept if json.loads(line).get("record") == "iter"
    )
    if n_iter_kept != t0:
        raise CheckpointFormatError(
            f"log holds {n_iter_kept} records up to checkpoint iter {t0}"
        )
    runner = TrialRunner(config, dataset, bank, trial, out_dir)
    return runner.resume(ckpt, kept)
