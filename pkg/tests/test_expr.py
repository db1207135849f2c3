"""Expression parsing, evaluation, and symbolic differentiation tests."""

import math

import numpy as np
import pytest

from dhamsys import EvalDomainError, ParseError
from dhamsys.expr import Num, check_names, parse_expression


def ev(source, **env):
    return parse_expression(source).eval(env)


class TestParseAndEval:
    def test_momentum_over_mass(self):
        assert ev("P1/m", P1=3.0, m=2.0) == pytest.approx(1.5)

    def test_mixed_at_origin(self):
        assert ev("Q1^2 + sin(P1)", Q1=0.0, P1=0.0) == 0.0

    def test_precedence(self):
        assert ev("1 + 2*3^2") == pytest.approx(19.0)
        assert ev("(1 + 2)*3") == pytest.approx(9.0)
        assert ev("2*Q1/4", Q1=6.0) == pytest.approx(3.0)

    def test_scientific_notation(self):
        assert ev("1.5e-3 + 2E2") == pytest.approx(0.0015 + 200.0)

    def test_power_binds_single_atom(self):
        # per the grammar, factor := atom ('^' atom)? so chained '^' is a syntax error
        with pytest.raises(ParseError):
            parse_expression("Q1^2^3")

    def test_unary_minus_inside_power(self):
        assert ev("2^-1") == pytest.approx(0.5)
        # '-' parses at the atom level, so the minus is part of the base
        assert ev("-Q1^2", Q1=3.0) == pytest.approx(9.0)
        assert ev("0 - Q1^2", Q1=3.0) == pytest.approx(-9.0)

    def test_functions(self):
        assert ev("cos(0)") == 1.0
        assert ev("exp(log(2))") == pytest.approx(2.0)
        assert ev("sqrt(Q1)", Q1=9.0) == pytest.approx(3.0)

    def test_syntax_error_has_position(self):
        with pytest.raises(ParseError) as err:
            parse_expression("Q1 + * 2")
        assert err.value.column == 6

    def test_unknown_function_reported(self):
        with pytest.raises(ParseError, match="unknown function 'tan'"):
            parse_expression("tan(Q1)")

    def test_unexpected_character(self):
        with pytest.raises(ParseError):
            parse_expression("Q1 @ 2")

    def test_trailing_input_rejected(self):
        with pytest.raises(ParseError):
            parse_expression("Q1 2")

    def test_unbalanced_paren(self):
        with pytest.raises(ParseError):
            parse_expression("sin(Q1")

    def test_multiline_position(self):
        with pytest.raises(ParseError) as err:
            parse_expression("Q1 +\n  )")
        assert err.value.line == 2

    def test_check_names_flags_out_of_range_variable(self):
        tree = parse_expression("Q1*P2")
        with pytest.raises(ParseError, match="unknown identifier 'P2'"):
            check_names(tree, {"Q1", "P1"})

    def test_check_names_accepts_declared(self):
        tree = parse_expression("gamma*P1 + Q1")
        check_names(tree, {"gamma", "Q1", "P1"})


class TestDomainErrors:
    def test_log_of_nonpositive(self):
        with pytest.raises(EvalDomainError):
            ev("log(Q1)", Q1=-1.0)
        with pytest.raises(EvalDomainError):
            ev("log(0)")

    def test_sqrt_of_negative(self):
        with pytest.raises(EvalDomainError):
            ev("sqrt(Q1)", Q1=-4.0)

    def test_division_by_zero(self):
        with pytest.raises(EvalDomainError):
            ev("1/Q1", Q1=0.0)

    def test_zero_to_negative_power(self):
        with pytest.raises(EvalDomainError):
            ev("Q1^-2", Q1=0.0)

    def test_fractional_power_of_negative(self):
        with pytest.raises(EvalDomainError):
            ev("Q1^0.5", Q1=-1.0)

    def test_integer_power_of_negative_ok(self):
        assert ev("Q1^3", Q1=-2.0) == pytest.approx(-8.0)

    def test_overflow(self):
        with pytest.raises(EvalDomainError):
            ev("exp(Q1)", Q1=1e4)
        with pytest.raises(EvalDomainError):
            ev("Q1*Q1", Q1=1e200)
        with pytest.raises(EvalDomainError):
            ev("Q1/P1", Q1=1e300, P1=1e-300)
        with pytest.raises(EvalDomainError):
            ev("Q1^9", Q1=1e100)


class TestDifferentiation:
    def test_product_rule(self):
        d = parse_expression("Q1*P1").diff("Q1")
        assert d.eval({"Q1": 7.0, "P1": 4.0}) == 4.0

    def test_constant_annihilated(self):
        d = parse_expression("m*3 + gamma").diff("Q1")
        assert isinstance(d, Num) and d.value == 0.0

    def test_chain_rule_sin(self):
        d = parse_expression("sin(Q1^2)").diff("Q1")
        x = 0.7
        assert d.eval({"Q1": x}) == pytest.approx(math.cos(x * x) * 2 * x)

    def test_chain_rule_exp_log_sqrt(self):
        x = 1.3
        assert parse_expression("exp(2*Q1)").diff("Q1").eval({"Q1": x}) == pytest.approx(2 * math.exp(2 * x))
        assert parse_expression("log(Q1)").diff("Q1").eval({"Q1": x}) == pytest.approx(1 / x)
        assert parse_expression("sqrt(Q1)").diff("Q1").eval({"Q1": x}) == pytest.approx(0.5 / math.sqrt(x))

    def test_quotient_rule(self):
        d = parse_expression("Q1/P1").diff("P1")
        assert d.eval({"Q1": 3.0, "P1": 2.0}) == pytest.approx(-0.75)

    def test_power_rule_constant_exponent(self):
        d = parse_expression("Q1^4").diff("Q1")
        assert d.eval({"Q1": 2.0}) == pytest.approx(32.0)

    def test_general_power(self):
        d = parse_expression("Q1^P1").diff("P1")
        q = 2.0
        assert d.eval({"Q1": q, "P1": 3.0}) == pytest.approx(q ** 3 * math.log(q))

    def test_second_derivative(self):
        d2 = parse_expression("sin(Q1)").diff("Q1").diff("Q1")
        x = 0.4
        assert d2.eval({"Q1": x}) == pytest.approx(-math.sin(x))

    def test_against_central_differences(self):
        rng = np.random.default_rng(20)
        sources = [
            "Q1^3*P1 - 2*P1^2 + Q1",
            "sin(Q1)*cos(P1) + exp(Q1/4)",
            "sqrt(Q1^2 + P1^2 + 1)",
            "log(2 + Q1^2) * P1",
        ]
        for source in sources:
            tree = parse_expression(source)
            d = tree.diff("Q1")
            for _ in range(20):
                x, y = rng.uniform(0.2, 1.8, size=2)
                step = 1e-6
                fd = (tree.eval({"Q1": x + step, "P1": y}) - tree.eval({"Q1": x - step, "P1": y})) / (2 * step)
                exact = d.eval({"Q1": x, "P1": y})
                assert abs(exact - fd) <= 1e-6 * max(1.0, abs(exact))

    def test_rendering_round_trips(self):
        rng = np.random.default_rng(21)
        sources = ["Q1^2/2 + m*P1", "-(Q1 + P1)*gamma", "sin(Q1)^2 - 1/(P1 + 2)",
                   "(Q1^2)^2", "Q1^(P1^2)", "Q1 - (P1 - m)"]
        for source in sources:
            tree = parse_expression(source)
            back = parse_expression(str(tree))
            for _ in range(10):
                env = {"Q1": rng.uniform(0.1, 2), "P1": rng.uniform(0.1, 2),
                       "m": 1.5, "gamma": 0.3}
                assert back.eval(env) == pytest.approx(tree.eval(env), rel=1e-15)
