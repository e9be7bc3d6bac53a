import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpforum.grammar import (
    DepthExhausted,
    GrammarSyntaxError,
    UndefinedNonterminal,
    appendix_grammar_text,
    export_gbnf,
    filter_continuations,
    member,
    parse_grammar,
    sample,
    stl_grammar,
    viable_prefix,
)
from helpforum.stl import parse

ARITH = r"""
root ::= expr
expr ::= term ("+" term)*
term ::= num | "(" expr ")"
num  ::= [0-9]+   # digits
"""


@pytest.fixture(scope="module")
def arith():
    return parse_grammar(ARITH)


@pytest.fixture(scope="module")
def stl():
    return parse_grammar(appendix_grammar_text())


class TestGbnf:
    @pytest.mark.parametrize("s", ["1", "12+3", "(1+2)+(3)", "((7))"])
    def test_member(self, arith, s):
        assert member(arith, s)

    @pytest.mark.parametrize("s", ["", "+", "1+", "(1", "1)", "a"])
    def test_non_member(self, arith, s):
        assert not member(arith, s)

    def test_viable_prefix(self, arith):
        assert viable_prefix(arith, "")
        assert viable_prefix(arith, "(1+")
        assert not viable_prefix(arith, "1)")
        assert filter_continuations(arith, "(1", ["+", ")", "(", "9"]) == ["+", ")", "9"]

    def test_char_class_negation_and_escapes(self):
        g = parse_grammar('root ::= "\\"" [^"]* "\\""')
        assert member(g, '"hi there"')
        assert not member(g, '"a"b"')

    def test_syntax_errors(self):
        with pytest.raises(GrammarSyntaxError):
            parse_grammar('root ::= "unterminated')
        with pytest.raises(UndefinedNonterminal):
            parse_grammar("root ::= missing")

    def test_export_round_trip(self, arith, stl):
        for g in (arith, stl, stl_grammar(["x", "y"], 4)):
            again = parse_grammar(export_gbnf(g))
            for seed in range(50):
                s = sample(g, seed)
                assert member(again, s)

    def test_depth_exhausted(self, arith):
        with pytest.raises(DepthExhausted):
            sample(arith, 0, max_depth=1)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10**6))
    def test_samples_are_members(self, arith, seed):
        assert member(arith, sample(arith, seed))


class TestStlGrammar:
    def test_reference_strings(self, stl):
        assert member(stl, "F(go_to_rack_A) & G(~go_to_charger)")
        assert member(stl, "Fgo_to_charger")
        assert not member(stl, "F(go_to_kitchen)")
        assert not member(stl, "G ~go_to_charger")

    def test_vocabulary_and_intervals(self):
        g = stl_grammar(["a", "b"], 5)
        assert member(g, "F_[1,3](a) U_[0,5] b")
        assert not member(g, "F_[3,1](a)")
        assert not member(g, "F_[0,6](a)")
        assert not member(stl_grammar(["a", "b"]), "F_[0,1](a)")

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 10**6))
    def test_grammar_strings_parse(self, seed):
        g = stl_grammar(["a", "b_c"], 3)
        s = sample(g, seed, max_depth=10)
        parse(s, ["a", "b_c"])
