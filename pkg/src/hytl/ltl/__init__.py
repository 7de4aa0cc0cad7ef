from .ast import (
    Alphabet,
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
    UnknownProposition,
    Until,
    propositions,
    to_text,
)
from .parser import FormulaSyntaxError, NegationNotOnLiteral, infer_alphabet, parse
from .progression import (
    NonPositiveTaskReward,
    ProgressOutcome,
    Verdict,
    fold_word,
    progress,
    progress_step,
    satisfies,
    shaped_reward,
    simplify,
)
from .tokens import CLS, FormulaTooLong, PAD, TokenVocab, tokenize

__all__ = [
    "Alphabet",
    "And",
    "Assignment",
    "CLS",
    "Eventually",
    "FALSE",
    "FalseF",
    "Formula",
    "FormulaSyntaxError",
    "FormulaTable",
    "FormulaTooLong",
    "LtlError",
    "Next",
    "NegationNotOnLiteral",
    "NonPositiveTaskReward",
    "Not",
    "Or",
    "PAD",
    "ProgressOutcome",
    "Prop",
    "TRUE",
    "TokenVocab",
    "TrueF",
    "UnknownProposition",
    "Until",
    "Verdict",
    "fold_word",
    "infer_alphabet",
    "parse",
    "progress",
    "progress_step",
    "propositions",
    "satisfies",
    "shaped_reward",
    "simplify",
    "to_text",
    "tokenize",
    "propositions",
]
