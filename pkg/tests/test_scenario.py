import json
from fractions import Fraction as Fr
from pathlib import Path

import numpy as np
import pytest

from finmkt.errors import BadParams, ParseError, ValidationError
from finmkt.scenario import emit_scenario, evaluate_claim, generate, load_scenario, parse_scenario

FIX = Path(__file__).parent / "fixtures"


def doc(**over):
    base = json.loads((FIX / "binomial.json").read_text())
    base.update(over)
    return json.dumps(base, indent=2)


def test_binomial_fixture_matches_canonical_market():
    m = load_scenario(FIX / "binomial.json").market()
    assert m.assets == ["bond", "stock"] or tuple(m.assets) == ("bond", "stock")
    assert list(m.space.prob) == [Fr(1, 2), Fr(1, 2)]
    assert list(m.prices[1, 1]) == [2, Fr(1, 2)]


def test_minimal_file_is_degenerate_market():
    m = load_scenario(FIX / "minimal.json").market()
    assert m.T == 0 and m.space.n == 1


def test_json_syntax_error_has_position():
    text = doc().replace('"times": 1,', '"times": 1,,')
    with pytest.raises(ParseError) as info:
        parse_scenario(text)
    assert info.value.line > 1 and info.value.column > 0


def test_probability_sum_is_named():
    d = json.loads(doc())
    d["states"][0]["prob"] = "0.4"
    with pytest.raises(ValidationError, match="9/10|0.9"):
        parse_scenario(json.dumps(d))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d["assets"][1]["prices"][1].__setitem__(1, "0"),
        lambda d: d["assets"][1]["prices"][1].__setitem__(0, "-2"),
        lambda d: d["assets"][1]["prices"][1].pop(),
        lambda d: d["assets"][1]["prices"].pop(),
        lambda d: d.__setitem__("numeraire", "gold"),
        lambda d: d["states"][0].__setitem__("prob", "abc"),
        lambda d: d.__setitem__("version", 7),
        lambda d: d.pop("times"),
    ],
)
def test_invalid_files_are_rejected(mutate):
    d = json.loads(doc())
    mutate(d)
    with pytest.raises(ValidationError):
        parse_scenario(json.dumps(d))


def test_decimal_and_rational_strings_agree():
    d = json.loads(doc())
    d["states"] = [{"id": "u", "prob": "0.5"}, {"id": "d", "prob": "1/2"}]
    d["assets"][1]["prices"][1] = ["2", "0.5"]
    m = parse_scenario(json.dumps(d)).market()
    assert list(m.space.prob) == [Fr(1, 2), Fr(1, 2)]
    assert list(m.prices[1, 1]) == [2, Fr(1, 2)]


def test_prices_rescaled_to_start_at_one():
    d = json.loads(doc())
    d["assets"][1]["prices"] = [["4", "4"], ["8", "2"]]
    m = parse_scenario(json.dumps(d)).market()
    assert list(m.prices[0, 1]) == [1, 1]
    assert m.scale[1] == 4


@pytest.mark.parametrize("kind,params", [
    ("crr", {"periods": 2, "u": "2", "d": "1/2"}),
    ("crr", {"periods": 1, "u": "3/2", "d": "3", "r": "2"}),
    ("trinomial", {}),
    ("trinomial", {"periods": 2}),
    ("insider", {"accuracy": "0.8"}),
    ("insider", {"accuracy": "1/2"}),
])
def test_emit_parse_round_trip_is_byte_stable(kind, params):
    text = emit_scenario(generate(kind, **params))
    again = emit_scenario(parse_scenario(text))
    assert text == again


def test_generated_binomial_equals_fixture():
    gen = generate("crr", periods=1, u="2", d="0.5", r="0", p="0.5")
    fixture = load_scenario(FIX / "binomial.json")
    assert emit_scenario(gen) == emit_scenario(fixture)


def test_float_mode_generation_round_trips():
    text = emit_scenario(generate("crr", periods=2, mode="float"))
    assert emit_scenario(parse_scenario(text)) == text


@pytest.mark.parametrize("kind,params", [
    ("crr", {"periods": 0}),
    ("crr", {"u": "-1"}),
    ("crr", {"p": "1"}),
    ("crr", {"u": "1/2", "d": "2", "no_arbitrage": True}),
    ("trinomial", {"u": "1", "m": "1"}),
    ("insider", {"accuracy": "1"}),
    ("insider", {"accuracy": "x"}),
    ("nope", {}),
    ("crr", {"bogus": 1}),
])
def test_bad_generator_params(kind, params):
    with pytest.raises(BadParams):
        generate(kind, **params)


TERM = {"stock": np.array([Fr(2), Fr(1, 2)], dtype=object), "bond": np.array([Fr(1), Fr(1)], dtype=object)}


@pytest.mark.parametrize("expr,expected", [
    ("max(S stock[T] - 1, 0)", [1, 0]),
    ("min(S stock[T], 1)", [1, Fr(1, 2)]),
    ("2 * S stock[T] / 4 + 1", [2, Fr(5, 4)]),
    ("(S stock[T] + S bond[T]) * 3", [9, Fr(9, 2)]),
    ("1/3", [Fr(1, 3), Fr(1, 3)]),
    ("0.25 * S stock[T]", [Fr(1, 2), Fr(1, 8)]),
])
def test_claim_grammar(expr, expected):
    assert list(evaluate_claim(expr, TERM)) == expected


def test_negative_claim_is_a_load_error():
    with pytest.raises(ValidationError):
        evaluate_claim("S stock[T] - 1", TERM)


@pytest.mark.parametrize("expr", ["S gold[T]", "max(S stock[T], )", "1 +", "(1", "S stock[0]", "1 $ 2"])
def test_claim_syntax_errors(expr):
    with pytest.raises(ParseError) as info:
        evaluate_claim(expr, TERM)
    assert info.value.column >= 1


def test_unknown_claim_name():
    scen = load_scenario(FIX / "binomial.json")
    with pytest.raises(ValidationError):
        scen.claim("nope")
