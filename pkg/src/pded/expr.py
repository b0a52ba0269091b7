"""Candidate equation skeletons: parsing, canonical form, printing.

A candidate is a right-hand side for ``u_t = ...`` built from products of
eight factor atoms. Accepted grammar (whitespace-insensitive)::

    equation := "u_t" "=" term (("+"|"-") term)*
    term     := ["+"|"-"] [number "*"] factor ("*" factor)*
    factor   := atom ["^" int] | "/x"            # "/x" sugar for "*1/x"
    atom     := u | u_x | u_xx | u_xxx | x | 1/x | sin(u) | exp(u)

Numeric coefficients and signs are parsed and then discarded: a candidate
is a skeleton only, and all coefficients are refit downstream. Exponents
are capped at 4 and a skeleton holds at most 8 distinct terms; anything
over the caps is rejected, never truncated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .errors import CoefficientLengthMismatch, MalformedEquation

MAX_EXPONENT = 4
MAX_TERMS = 8


class Factor(Enum):
    U = "u"
    UX = "u_x"
    UXX = "u_xx"
    UXXX = "u_xxx"
    X = "x"
    INV_X = "1/x"
    SIN_U = "sin(u)"
    EXP_U = "exp(u)"


_FACTOR_ORDER = {f: i for i, f in enumerate(Factor)}

# Longest-first so u_xxx wins over u_xx over u_x over u.
_ATOM_LITERALS = sorted((f.value, f) for f in Factor)
_ATOM_LITERALS.sort(key=lambda p: -len(p[0]))

_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?")
_IDENT_CONT = set("abcdefghijklmnopqrstuvwxyz0123456789_")


@dataclass(frozen=True)
class Term:
    """Product of factor atoms with positive integer exponents, canonical."""

    factors: tuple[tuple[Factor, int], ...]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("term must have at least one factor")
        kinds = [f for f, _ in self.factors]
        if kinds != sorted(kinds, key=_FACTOR_ORDER.get) or len(set(kinds)) != len(kinds):
            raise ValueError("factors must be merged and canonically ordered")
        for _, e in self.factors:
            if not 1 <= e <= MAX_EXPONENT:
                raise ValueError(f"exponent {e} outside [1, {MAX_EXPONENT}]")

    @property
    def sort_key(self) -> tuple[tuple[int, int], ...]:
        return tuple((_FACTOR_ORDER[f], e) for f, e in self.factors)

    @property
    def text(self) -> str:
        return "*".join(
            f.value + (f"^{e}" if e > 1 else "") for f, e in self.factors
        )


def make_term(pairs: Iterable[tuple[Factor, int]]) -> Term:
    """Build a Term from (factor, exponent) pairs, merging repeated kinds."""
    merged: dict[Factor, int] = {}
    for f, e in pairs:
        merged[f] = merged.get(f, 0) + int(e)
    for f, e in merged.items():
        if e > MAX_EXPONENT:
            raise MalformedEquation(
                f"exponent {e} on {f.value} exceeds {MAX_EXPONENT}"
            )
        if e < 1:
            raise MalformedEquation(f"exponent {e} on {f.value} must be >= 1")
    ordered = tuple(
        sorted(merged.items(), key=lambda p: _FACTOR_ORDER[p[0]])
    )
    return Term(ordered)


@dataclass(frozen=True)
class Expression:
    """Canonical multiset of terms; equality is structural on the terms."""

    terms: tuple[Term, ...]
    source_text: str = field(default="", compare=False)

    def __post_init__(self):
        if not 1 <= len(self.terms) <= MAX_TERMS:
            raise ValueError(f"expression must hold 1..{MAX_TERMS} terms")
        keys = [t.sort_key for t in self.terms]
        if keys != sorted(keys) or len(set(keys)) != len(keys):
            raise ValueError("terms must be deduplicated and sorted")

    @classmethod
    def from_terms(cls, terms: Sequence[Term], source_text: str = "") -> "Expression":
        """Canonicalize a term sequence: merge duplicates, sort, check caps."""
        unique = {t.sort_key: t for t in terms}
        ordered = tuple(unique[k] for k in sorted(unique))
        if not ordered:
            raise MalformedEquation("empty right-hand side")
        if len(ordered) > MAX_TERMS:
            raise MalformedEquation(
                f"{len(ordered)} terms exceeds the {MAX_TERMS}-term cap"
            )
        return cls(ordered, source_text)


def _preprocess(text: str) -> str:
    s = text.strip().lower()
    s = s.replace("−", "-").replace("**", "^")
    # tolerate LaTeX-ish subscripts: u_{xx} -> u_xx
    s = re.sub(r"_\{(x{1,3})\}", r"_\1", s)
    return re.sub(r"\s+", "", s)


def _tokenize(rhs: str) -> list[tuple[str, object]]:
    tokens: list[tuple[str, object]] = []
    i, n = 0, len(rhs)
    while i < n:
        ch = rhs[i]
        if ch in "+-":
            tokens.append(("sign", ch))
            i += 1
            continue
        if ch == "*":
            tokens.append(("mul", None))
            i += 1
            continue
        if ch == "^":
            m = re.match(r"\^(\d+)", rhs[i:])
            if not m:
                raise MalformedEquation(f"bad exponent near '{rhs[i:i+6]}'")
            tokens.append(("pow", int(m.group(1))))
            i += len(m.group(0))
            continue
        if rhs.startswith("/x", i):
            tokens.append(("divx", None))
            i += 2
            continue
        matched = False
        for literal, f in _ATOM_LITERALS:
            if rhs.startswith(literal, i):
                j = i + len(literal)
                if j < n and literal[-1] != ")" and rhs[j] in _IDENT_CONT:
                    continue  # would split an identifier, e.g. u_xxxx
                tokens.append(("atom", f))
                i = j
                matched = True
                break
        if matched:
            continue
        m = _NUMBER_RE.match(rhs, i)
        if m:
            tokens.append(("num", m.group(0)))
            i = m.end()
            continue
        raise MalformedEquation(f"unknown token near '{rhs[i:i+8]}'")
    return tokens


def _parse_term(tokens: list[tuple[str, object]]) -> Term:
    pairs: list[tuple[Factor, int]] = []
    i = 0
    if i < len(tokens) and tokens[i][0] == "num":
        i += 1  # coefficient, discarded
        if i < len(tokens) and tokens[i][0] == "mul":
            i += 1
        elif i < len(tokens) and tokens[i][0] == "divx":
            pass  # "0.5/x" style: the /x supplies the factor
        else:
            raise MalformedEquation("coefficient must be followed by '*' or '/x'")
    expect_factor = True
    while i < len(tokens):
        kind, val = tokens[i]
        if kind == "atom" or kind == "divx":
            if not expect_factor and kind == "atom":
                raise MalformedEquation("missing '*' between factors")
            f = val if kind == "atom" else Factor.INV_X
            e = 1
            if i + 1 < len(tokens) and tokens[i + 1][0] == "pow":
                e = tokens[i + 1][1]
                if e < 1:
                    raise MalformedEquation("exponent must be a positive integer")
                if e > MAX_EXPONENT:
                    raise MalformedEquation(
                        f"exponent {e} exceeds {MAX_EXPONENT}"
                    )
                i += 1
            pairs.append((f, e))
            expect_factor = False
            i += 1
        elif kind == "mul":
            if expect_factor:
                raise MalformedEquation("dangling '*'")
            expect_factor = True
            i += 1
        else:
            raise MalformedEquation(f"unexpected {kind} inside a term")
    if expect_factor and pairs:
        raise MalformedEquation("term ends with '*'")
    if not pairs:
        raise MalformedEquation("term has no factors")
    return make_term(pairs)


def parse_equation(text: str) -> Expression:
    """Parse untrusted proposer output into a canonical skeleton.

    Raises MalformedEquation on anything outside the grammar; never aborts
    on arbitrary input.
    """
    if not isinstance(text, str):
        raise MalformedEquation("input is not text")
    s = _preprocess(text)
    head, sep, rhs = s.partition("=")
    if not sep or head != "u_t":
        raise MalformedEquation("equation must start with 'u_t ='")
    if not rhs:
        raise MalformedEquation("empty right-hand side")
    if "=" in rhs:
        raise MalformedEquation("multiple '=' signs")
    tokens = _tokenize(rhs)
    groups: list[list[tuple[str, object]]] = [[]]
    prev_sign = False
    for tok in tokens:
        if tok[0] == "sign":
            if prev_sign:
                raise MalformedEquation("consecutive signs")
            if groups[-1]:
                groups.append([])
            prev_sign = True
        else:
            groups[-1].append(tok)
            prev_sign = False
    if prev_sign:
        raise MalformedEquation("trailing sign")
    if any(not g for g in groups):
        raise MalformedEquation("empty term")
    terms = [_parse_term(g) for g in groups]
    return Expression.from_terms(terms, source_text=text)


def complexity(e: Expression) -> int:
    """Number of terms in the canonical skeleton."""
    return len(e.terms)


def to_text(e: Expression, coefficients: Optional[Sequence[float]] = None) -> str:
    """Render canonically; round-trips through parse_equation.

    Coefficients, if given, are printed with 6 significant digits in
    canonical term order.
    """
    if coefficients is None:
        return "u_t = " + " + ".join(t.text for t in e.terms)
    if len(coefficients) != len(e.terms):
        raise CoefficientLengthMismatch(
            f"{len(coefficients)} coefficients for {len(e.terms)} terms"
        )
    parts: list[str] = []
    for i, (c, t) in enumerate(zip(coefficients, e.terms)):
        mag = f"{abs(float(c)):.6g}"
        if i == 0:
            parts.append(("-" if c < 0 else "") + f"{mag}*{t.text}")
        else:
            parts.append((" - " if c < 0 else " + ") + f"{mag}*{t.text}")
    return "u_t = " + "".join(parts)


def canonical_text(e: Expression) -> str:
    """Skeleton-only rendering, usable as a dictionary key."""
    return to_text(e)
