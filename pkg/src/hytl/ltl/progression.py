"""Formula progression, simplification, finite-word semantics, shaped reward."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .ast import (
    And,
    Assignment,
    Eventually,
    FALSE,
    FalseF,
    Formula,
    FormulaTable,
    LtlError,
    Next,
    Not,
    Or,
    Prop,
    TRUE,
    TrueF,
    Until,
)


class Verdict(Enum):
    SATISFIED_NOW = "satisfied"
    VIOLATED_NOW = "violated"
    ONGOING = "ongoing"


@dataclass(frozen=True, slots=True)
class ProgressOutcome:
    next_id: int
    verdict: Verdict


class NonPositiveTaskReward(LtlError):
    pass


def progress(sigma: Assignment, phi: Formula, last: bool = False) -> Formula:
    """One progression step against a truth assignment, before simplification.

    ``last`` marks the final letter of a complete word: a Next obligation
    consumed there cannot be met because no successor position exists, so it
    progresses to False. Streaming consumers (the episode monitor) never know
    the word is about to end and leave ``last`` at its default.
    """
    if isinstance(phi, (TrueF, FalseF)):
        return phi
    if isinstance(phi, Prop):
        return TRUE if sigma.has(phi.pid) else FALSE
    if isinstance(phi, Not):
        return TRUE if not sigma.has(phi.inner.pid) else FALSE
    if isinstance(phi, And):
        return And(progress(sigma, phi.left, last), progress(sigma, phi.right, last))
    if isinstance(phi, Or):
        return Or(progress(sigma, phi.left, last), progress(sigma, phi.right, last))
    if isinstance(phi, Next):
        return FALSE if last else phi.inner
    if isinstance(phi, Eventually):
        return Or(progress(sigma, phi.inner, last), phi)
    if isinstance(phi, Until):
        return Or(
            progress(sigma, phi.right, last),
            And(progress(sigma, phi.left, last), phi),
        )
    raise TypeError(f"not a formula node: {phi!r}")


def _flatten(phi: Formula, op: type, out: list[Formula]) -> None:
    if isinstance(phi, op):
        _flatten(phi.left, op, out)  # type: ignore[attr-defined]
        _flatten(phi.right, op, out)  # type: ignore[attr-defined]
    else:
        out.append(phi)


def _rebuild(parts: list[Formula], op: type) -> Formula:
    acc = parts[0]
    for part in parts[1:]:
        acc = op(acc, part)
    return acc


def simplify(phi: Formula) -> Formula:
    """Constant folding plus idempotence across whole conjunction/disjunction
    chains (progression keeps re-appending earlier obligations; collapsing
    duplicates at any nesting depth keeps the reachable formula set finite).
    First-occurrence order is preserved, so printing stays stable.
    """
    if isinstance(phi, (And, Or)):
        op = type(phi)
        annihilator, identity = (FALSE, TRUE) if op is And else (TRUE, FALSE)
        raw: list[Formula] = []
        _flatten(phi, op, raw)
        parts: list[Formula] = []
        for child in raw:
            child = simplify(child)
            pieces: list[Formula] = []
            _flatten(child, op, pieces)  # simplify can expose same-op nodes
            for piece in pieces:
                if piece == annihilator:
                    return annihilator
                if piece == identity or piece in parts:
                    continue
                parts.append(piece)
        if not parts:
            return identity
        return _rebuild(parts, op)
    if isinstance(phi, Next):
        return Next(simplify(phi.inner))
    if isinstance(phi, Eventually):
        return Eventually(simplify(phi.inner))
    if isinstance(phi, Until):
        return Until(simplify(phi.left), simplify(phi.right))
    return phi


def satisfies(word: Sequence[Assignment], phi: Formula) -> bool:
    """Finite-trace semantics; the empty suffix satisfies only True.

    Serves as the brute-force oracle for progression.
    """
    return _sat(tuple(word), 0, phi)


def _sat(word: tuple[Assignment, ...], i: int, phi: Formula) -> bool:
    n = len(word)
    if i >= n:
        return isinstance(phi, TrueF)
    if isinstance(phi, TrueF):
        return True
    if isinstance(phi, FalseF):
        return False
    if isinstance(phi, Prop):
        return word[i].has(phi.pid)
    if isinstance(phi, Not):
        return not word[i].has(phi.inner.pid)
    if isinstance(phi, And):
        return _sat(word, i, phi.left) and _sat(word, i, phi.right)
    if isinstance(phi, Or):
        return _sat(word, i, phi.left) or _sat(word, i, phi.right)
    if isinstance(phi, Next):
        return i + 1 < n and _sat(word, i + 1, phi.inner)
    if isinstance(phi, Eventually):
        return any(_sat(word, j, phi.inner) for j in range(i, n))
    if isinstance(phi, Until):
        return any(
            _sat(word, j, phi.right) and all(_sat(word, m, phi.left) for m in range(i, j))
            for j in range(i, n)
        )
    raise TypeError(f"not a formula node: {phi!r}")


def _verdict_of(phi: Formula) -> Verdict:
    if isinstance(phi, TrueF):
        return Verdict.SATISFIED_NOW
    if isinstance(phi, FalseF):
        return Verdict.VIOLATED_NOW
    return Verdict.ONGOING


def progress_step(
    table: FormulaTable, sigma: Assignment, fid: int, last: bool = False
) -> ProgressOutcome:
    """Progress + simplify + intern, memoized per (formula id, assignment)."""
    key = (fid, sigma.bits, last)
    cached = table.prog_cache.get(key)
    if cached is not None:
        return cached  # type: ignore[return-value]
    nxt = simplify(progress(sigma, table.formula(fid), last))
    outcome = ProgressOutcome(table.intern(nxt), _verdict_of(nxt))
    table.prog_cache[key] = outcome
    return outcome


def fold_word(table: FormulaTable, word: Sequence[Assignment], fid: int) -> int:
    """Progress a formula through a complete word; returns the residual id.

    The final letter is progressed with ``last=True`` so that Next obligations
    landing past the end of the word fail, matching ``satisfies``.
    """
    n = len(word)
    for i, sigma in enumerate(word):
        fid = progress_step(table, sigma, fid, last=(i == n - 1)).next_id
    return fid


def shaped_reward(r_env: float, outcome: ProgressOutcome, r_phi: float) -> float:
    """Progression-shaped reward: bonus on satisfaction, penalty on violation."""
    if r_phi <= 0:
        raise NonPositiveTaskReward(f"task reward must be positive, got {r_phi}")
    if outcome.verdict is Verdict.SATISFIED_NOW:
        return r_env + r_phi
    if outcome.verdict is Verdict.VIOLATED_NOW:
        return r_env - r_phi
    return r_env
