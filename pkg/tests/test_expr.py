import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pded.errors import CoefficientLengthMismatch, MalformedEquation
from pded.expr import (
    Expression,
    Factor,
    complexity,
    make_term,
    parse_equation,
    to_text,
)


def T(*pairs):
    return make_term(pairs)


class TestParse:
    def test_burgers_skeleton(self):
        e = parse_equation("u_t = -1.0*u*u_x + 0.1*u_xx")
        assert e.terms == (T((Factor.U, 1), (Factor.UX, 1)), T((Factor.UXX, 1)))

    def test_single_factor(self):
        assert parse_equation("u_t = u").terms == (T((Factor.U, 1)),)

    def test_duplicate_terms_merge(self):
        e = parse_equation("u_t = u*u + u^2")
        assert e.terms == (T((Factor.U, 2)),)

    def test_unknown_tokens_rejected(self):
        with pytest.raises(MalformedEquation):
            parse_equation("u_t = v*w")

    def test_whitespace_insensitive(self):
        a = parse_equation("u_t=-1*u*u_x+0.1*u_xx")
        b = parse_equation("  u_t =  - 1 * u * u_x + 0.1 * u_xx ")
        assert a == b

    def test_all_atoms_parse(self):
        e = parse_equation(
            "u_t = u + u_x + u_xx + u_xxx + x + 1/x + sin(u) + exp(u)"
        )
        assert complexity(e) == 8

    def test_division_sugar(self):
        assert parse_equation("u_t = u_x/x") == parse_equation("u_t = u_x*1/x")

    def test_double_star_power(self):
        assert parse_equation("u_t = u**2") == parse_equation("u_t = u^2")

    def test_scientific_coefficients(self):
        e = parse_equation("u_t = -1.0e-3*u + 2.5E+1*u_xx")
        assert complexity(e) == 2

    def test_braced_subscripts(self):
        assert parse_equation("u_t = u_{xx}") == parse_equation("u_t = u_xx")

    def test_exponent_merging_within_term(self):
        e = parse_equation("u_t = u^2*u_x*u")
        assert e.terms == (T((Factor.U, 3), (Factor.UX, 1)),)

    @pytest.mark.parametrize("bad", [
        "u = u_x",                     # wrong head
        "u_t = ",                      # empty rhs
        "no equals sign",
        "u_t = u^5",                   # exponent over cap
        "u_t = u^0",
        "u_t = u^2*u^3",               # merged exponent over cap
        "u_t = u + u^2 + u^3 + u^4 + u_x + u_xx + u_xxx + x + 1/x",  # 9 terms
        "u_t = u + ",                  # trailing sign
        "u_t = + - u",                 # consecutive signs
        "u_t = 3.0",                   # coefficient with no factor
        "u_t = 2u",                    # missing '*'
        "u_t = u u_x",                 # missing '*', no whitespace shield
        "u_t = u_xxxx",                # unsupported derivative order
        "u_t = u = u_x",               # second '='
        "u_t = sin(x)",                # sin applies to u only
        "",
    ])
    def test_malformed(self, bad):
        with pytest.raises(MalformedEquation):
            parse_equation(bad)

    def test_never_aborts_on_bytes(self):
        # regression style check on a handful of nasty strings
        for s in ["\x00\xff", "u_t" * 100, "u_t =" + "^" * 50, "=" * 10]:
            try:
                parse_equation(s)
            except MalformedEquation:
                pass

    @settings(max_examples=300, deadline=None)
    @given(st.text(max_size=60))
    def test_fuzz_parse_total(self, text):
        try:
            parse_equation(text)
        except MalformedEquation:
            pass


class TestComplexity:
    def test_burgers_two_terms(self):
        assert complexity(parse_equation("u_t = u*u_x + u_xx")) == 2

    def test_single(self):
        assert complexity(parse_equation("u_t = u")) == 1

    def test_fisher_three_terms(self):
        assert complexity(parse_equation("u_t = u_xx + u - u^2")) == 3

    def test_invariant_under_reordering_and_coefficients(self):
        a = parse_equation("u_t = 3*u_xx + 2*u - 9*u^2")
        b = parse_equation("u_t = u^2 + u_xx + u")
        assert complexity(a) == complexity(b) == 3
        assert a == b


def random_expression(rng: random.Random) -> Expression:
    factors = list(Factor)
    terms = []
    for _ in range(rng.randint(1, 8)):
        n_factors = rng.randint(1, 3)
        chosen = rng.sample(factors, n_factors)
        terms.append(make_term((f, rng.randint(1, 4)) for f in chosen))
    return Expression.from_terms(terms)


class TestToText:
    def test_with_coefficients(self):
        e = parse_equation("u_t = u*u_x + u_xx")
        assert to_text(e, [-1.0, 0.1]) == "u_t = -1*u*u_x + 0.1*u_xx"

    def test_without_coefficients(self):
        assert to_text(parse_equation("u_t = u")) == "u_t = u"

    def test_negative_inner_coefficient(self):
        e = parse_equation("u_t = u + u_xx")
        text = to_text(e, [1.0, -0.25])
        assert text == "u_t = 1*u - 0.25*u_xx"
        assert parse_equation(text) == e

    def test_six_significant_digits(self):
        e = parse_equation("u_t = u")
        assert to_text(e, [1.2345678]) == "u_t = 1.23457*u"

    def test_length_mismatch(self):
        with pytest.raises(CoefficientLengthMismatch):
            to_text(parse_equation("u_t = u + u_x"), [1.0])

    def test_round_trip_1000_random(self):
        rng = random.Random(20240811)
        for _ in range(1000):
            e = random_expression(rng)
            assert parse_equation(to_text(e)) == e
            coeffs = [rng.uniform(-5, 5) for _ in e.terms]
            assert parse_equation(to_text(e, coeffs)) == e

    def test_canonical_idempotence(self):
        rng = random.Random(7)
        for _ in range(200):
            e = random_expression(rng)
            again = parse_equation(to_text(e))
            assert parse_equation(to_text(again)) == again


class TestEquality:
    def test_source_text_ignored(self):
        a = parse_equation("u_t = 0.1*u_xx + u*u_x")
        b = parse_equation("u_t = u*u_x + u_xx")
        assert a == b
        assert hash(a) == hash(b)

    def test_usable_as_dict_key(self):
        a = parse_equation("u_t = u")
        b = parse_equation("u_t = 1.0*u")
        d = {a: 1}
        d[b] = 2
        assert len(d) == 1 and d[a] == 2
