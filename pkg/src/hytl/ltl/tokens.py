"""Prefix-order formula tokenization for the task encoder."""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    Alphabet,
    And,
    Eventually,
    FalseF,
    Formula,
    LtlError,
    Next,
    Not,
    Or,
    Prop,
    TrueF,
    Until,
)


class FormulaTooLong(LtlError):
    pass


_RESERVED = (
    "<pad>",
    "<cls>",
    "true",
    "false",
    "not",
    "and",
    "or",
    "next",
    "until",
    "eventually",
)

PAD, CLS, T_TRUE, T_FALSE, T_NOT, T_AND, T_OR, T_NEXT, T_UNTIL, T_EVENTUALLY = range(10)


@dataclass(frozen=True)
class TokenVocab:
    """Token names and the fixed padded sequence length the encoder expects."""

    names: tuple[str, ...]
    max_len: int

    @classmethod
    def for_alphabet(cls, alphabet: Alphabet, max_len: int) -> "TokenVocab":
        return cls(_RESERVED + alphabet.names, max_len)

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        return self.names.index(name)

    def name_of(self, token_id: int) -> str:
        return self.names[token_id]

    def prop_id(self, pid: int) -> int:
        return len(_RESERVED) + pid

    @property
    def n_props(self) -> int:
        return len(self.names) - len(_RESERVED)


def _prefix(phi: Formula, vocab: TokenVocab, out: list[int]) -> None:
    if isinstance(phi, TrueF):
        out.append(T_TRUE)
    elif isinstance(phi, FalseF):
        out.append(T_FALSE)
    elif isinstance(phi, Prop):
        out.append(vocab.prop_id(phi.pid))
    elif isinstance(phi, Not):
        out.append(T_NOT)
        _prefix(phi.inner, vocab, out)
    elif isinstance(phi, And):
        out.append(T_AND)
        _prefix(phi.left, vocab, out)
        _prefix(phi.right, vocab, out)
    elif isinstance(phi, Or):
        out.append(T_OR)
        _prefix(phi.left, vocab, out)
        _prefix(phi.right, vocab, out)
    elif isinstance(phi, Next):
        out.append(T_NEXT)
        _prefix(phi.inner, vocab, out)
    elif isinstance(phi, Until):
        out.append(T_UNTIL)
        _prefix(phi.left, vocab, out)
        _prefix(phi.right, vocab, out)
    elif isinstance(phi, Eventually):
        out.append(T_EVENTUALLY)
        _prefix(phi.inner, vocab, out)
    else:
        raise TypeError(f"not a formula node: {phi!r}")


def tokenize(phi: Formula, vocab: TokenVocab) -> list[int]:
    """CLS + Polish-order serialization, padded to the vocab's fixed length."""
    out = [CLS]
    _prefix(phi, vocab, out)
    if len(out) > vocab.max_len:
        raise FormulaTooLong(
            f"formula serializes to {len(out)} tokens, limit is {vocab.max_len}"
        )
    out.extend([PAD] * (vocab.max_len - len(out)))
    return out
