import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hytl.ltl import (
    Alphabet,
    And,
    Eventually,
    FALSE,
    FormulaSyntaxError,
    FormulaTooLong,
    NegationNotOnLiteral,
    Next,
    Not,
    Or,
    Prop,
    TRUE,
    TokenVocab,
    UnknownProposition,
    Until,
    infer_alphabet,
    parse,
    to_text,
    tokenize,
)
from oracles import random_formula

PEG_ALPHABET = Alphabet(["peg_grasped", "hole_reached", "peg_inserted"])
AB = Alphabet(["a", "b"])
ABC = Alphabet(["a", "b", "c"])


def test_parse_peg_insertion_task():
    phi = parse(
        "F (peg_grasped & F (hole_reached & F peg_inserted))", PEG_ALPHABET
    )
    pg, hr, pi = PEG_ALPHABET.props
    assert phi == Eventually(And(pg, Eventually(And(hr, Eventually(pi)))))


def test_parse_constants():
    assert parse("true", AB) == TRUE
    assert parse("false", AB) == FALSE


def test_negation_allowed_only_on_identifiers():
    assert parse("F !a", AB) == Eventually(Not(AB.prop("a")))
    with pytest.raises(NegationNotOnLiteral):
        parse("!(a & b)", AB)
    with pytest.raises(NegationNotOnLiteral):
        parse("!!a", AB)
    with pytest.raises(NegationNotOnLiteral):
        parse("!true", AB)


def test_precedence_unary_over_until_over_and_over_or():
    a, b, c = ABC.props
    assert parse("a & b | c", ABC) == Or(And(a, b), c)
    assert parse("a | b & c", ABC) == Or(a, And(b, c))
    assert parse("F a U b", ABC) == Until(Eventually(a), b)
    assert parse("a U b & c", ABC) == And(Until(a, b), c)
    assert parse("X a & b", ABC) == And(Next(a), b)


def test_until_right_associative_and_chains_left():
    a, b, c = ABC.props
    assert parse("a U b U c", ABC) == Until(a, Until(b, c))
    assert parse("a & b & c", ABC) == And(And(a, b), c)
    assert parse("(a U b) U c", ABC) == Until(Until(a, b), c)


def test_syntax_errors_carry_position_and_expected():
    with pytest.raises(FormulaSyntaxError) as err:
        parse("a &", AB)
    assert err.value.position == 3
    assert err.value.expected
    with pytest.raises(FormulaSyntaxError):
        parse("(a", AB)
    with pytest.raises(FormulaSyntaxError) as err:
        parse("a b", AB)
    assert err.value.position == 2
    with pytest.raises(FormulaSyntaxError):
        parse("a @ b", AB)


def test_unknown_proposition():
    with pytest.raises(UnknownProposition):
        parse("F missing", AB)


def test_infer_alphabet_orders_by_first_appearance():
    alphabet = infer_alphabet("F (b & F a) | b")
    assert alphabet.names == ("b", "a")


def test_tokenize_prefix_order_with_cls_and_padding():
    vocab = TokenVocab.for_alphabet(AB, max_len=8)
    phi = parse("F (a & F b)", AB)
    cls = vocab.id_of("<cls>")
    ev = vocab.id_of("eventually")
    et = vocab.id_of("and")
    a = vocab.id_of("a")
    b = vocab.id_of("b")
    pad = vocab.id_of("<pad>")
    assert tokenize(phi, vocab) == [cls, ev, et, a, ev, b, pad, pad]


def test_tokenize_true_constant():
    vocab = TokenVocab.for_alphabet(AB, max_len=6)
    ids = tokenize(TRUE, vocab)
    assert ids[:2] == [vocab.id_of("<cls>"), vocab.id_of("true")]
    assert all(t == vocab.id_of("<pad>") for t in ids[2:])


def test_tokenize_rejects_overlong_formula():
    vocab = TokenVocab.for_alphabet(AB, max_len=4)
    with pytest.raises(FormulaTooLong):
        tokenize(parse("F (a & F (b & F a))", AB), vocab)


def test_print_parse_tokenize_round_trip_random():
    rng = np.random.default_rng(7)
    vocab = TokenVocab.for_alphabet(ABC, max_len=64)
    for _ in range(100):
        phi = random_formula(rng, ABC, depth=4)
        again = parse(to_text(phi), ABC)
        assert again == phi
        assert tokenize(again, vocab) == tokenize(phi, vocab)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(0, 4))
def test_round_trip_property(seed, depth):
    rng = np.random.default_rng(seed)
    phi = random_formula(rng, ABC, depth)
    assert parse(to_text(phi), ABC) == phi


def test_prop_ids_are_dense_and_names_unique():
    assert [p.pid for p in ABC] == [0, 1, 2]
    with pytest.raises(Exception):
        Alphabet(["a", "a"])
