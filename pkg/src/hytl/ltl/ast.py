"""Co-safe LTL syntax trees, alphabets, assignments and formula interning."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence


class LtlError(Exception):
    pass


class UnknownProposition(LtlError):
    pass


@dataclass(frozen=True, slots=True)
class Formula:
    """Base node. Subclasses are immutable and compare structurally."""

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, slots=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True, slots=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True, slots=True)
class Prop(Formula):
    name: str
    pid: int


@dataclass(frozen=True, slots=True)
class Not(Formula):
    # Negation is restricted to literals, so the child is always a Prop.
    inner: Prop


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Next(Formula):
    inner: Formula


@dataclass(frozen=True, slots=True)
class Eventually(Formula):
    inner: Formula


@dataclass(frozen=True, slots=True)
class Until(Formula):
    left: Formula
    right: Formula


TRUE = TrueF()
FALSE = FalseF()


@dataclass(frozen=True, slots=True)
class Assignment:
    """Set of propositions true at one step, as a bitset over alphabet ids."""

    bits: int
    width: int

    def has(self, pid: int) -> bool:
        return (self.bits >> pid) & 1 == 1

    def names(self, alphabet: "Alphabet") -> tuple[str, ...]:
        return tuple(p.name for p in alphabet if self.has(p.pid))


class Alphabet:
    """Ordered proposition set; ids are dense 0..n-1 and names are unique."""

    __slots__ = ("props", "_by_name")

    def __init__(self, names: Sequence[str]):
        if len(set(names)) != len(names):
            raise LtlError(f"duplicate proposition names in {list(names)}")
        self.props = tuple(Prop(name, i) for i, name in enumerate(names))
        self._by_name = {p.name: p for p in self.props}

    def __len__(self) -> int:
        return len(self.props)

    def __iter__(self) -> Iterator[Prop]:
        return iter(self.props)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.props)

    def prop(self, name: str) -> Prop:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownProposition(
                f"proposition {name!r} not in alphabet {list(self.names)}"
            ) from None

    def assignment(self, names: Iterable[str] = ()) -> Assignment:
        bits = 0
        for name in names:
            bits |= 1 << self.prop(name).pid
        return Assignment(bits, len(self))

    def assignment_from_bits(self, bits: int) -> Assignment:
        return Assignment(bits, len(self))

    def all_assignments(self) -> Iterator[Assignment]:
        for bits in range(1 << len(self)):
            yield Assignment(bits, len(self))


def propositions(phi: Formula) -> set[Prop]:
    """All propositions occurring in a formula."""
    out: set[Prop] = set()
    stack = [phi]
    while stack:
        node = stack.pop()
        if isinstance(node, Prop):
            out.add(node)
        elif isinstance(node, Not):
            out.add(node.inner)
        elif isinstance(node, (And, Or, Until)):
            stack.extend((node.left, node.right))
        elif isinstance(node, (Next, Eventually)):
            stack.append(node.inner)
    return out


# Operator precedence: unary > U > & > |.
_PREC_OR = 1
_PREC_AND = 2
_PREC_UNTIL = 3
_PREC_UNARY = 4
_PREC_ATOM = 5


def _prec(phi: Formula) -> int:
    if isinstance(phi, Or):
        return _PREC_OR
    if isinstance(phi, And):
        return _PREC_AND
    if isinstance(phi, Until):
        return _PREC_UNTIL
    if isinstance(phi, (Next, Eventually, Not)):
        return _PREC_UNARY
    return _PREC_ATOM


def to_text(phi: Formula) -> str:
    """Render a formula in the concrete grammar; parses back to the same tree."""
    if isinstance(phi, TrueF):
        return "true"
    if isinstance(phi, FalseF):
        return "false"
    if isinstance(phi, Prop):
        return phi.name
    if isinstance(phi, Not):
        return f"!{phi.inner.name}"
    if isinstance(phi, Next):
        return f"X {_wrap(phi.inner, _PREC_UNARY)}"
    if isinstance(phi, Eventually):
        return f"F {_wrap(phi.inner, _PREC_UNARY)}"
    if isinstance(phi, And):
        # Left-associative: an equal-precedence right child needs parentheses.
        return f"{_wrap(phi.left, _PREC_AND)} & {_wrap(phi.right, _PREC_AND + 1)}"
    if isinstance(phi, Or):
        return f"{_wrap(phi.left, _PREC_OR)} | {_wrap(phi.right, _PREC_OR + 1)}"
    if isinstance(phi, Until):
        # Right-associative: an equal-precedence left child needs parentheses.
        return f"{_wrap(phi.left, _PREC_UNTIL + 1)} U {_wrap(phi.right, _PREC_UNTIL)}"
    raise TypeError(f"not a formula node: {phi!r}")


def _wrap(child: Formula, min_prec: int) -> str:
    text = to_text(child)
    return f"({text})" if _prec(child) < min_prec else text


class FormulaTable:
    """Interns formulas by structural equality and memoizes progression steps.

    Id 0 is always True and id 1 is always False.
    """

    TRUE_ID = 0
    FALSE_ID = 1

    def __init__(self) -> None:
        self._ids: dict[Formula, int] = {TRUE: 0, FALSE: 1}
        self._formulas: list[Formula] = [TRUE, FALSE]
        self.prog_cache: dict[tuple[int, int], object] = {}

    def __len__(self) -> int:
        return len(self._formulas)

    def intern(self, phi: Formula) -> int:
        fid = self._ids.get(phi)
        if fid is None:
            fid = len(self._formulas)
            self._ids[phi] = fid
            self._formulas.append(phi)
        return fid

    def formula(self, fid: int) -> Formula:
        return self._formulas[fid]
