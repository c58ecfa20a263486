"""
Forward chaining, case-based suggestions and their arbitration.
"""

import itertools
import random

import pytest

from src.cognition.reasoning import forward_chain, match_pattern, parse_rules, substitute
from src.cognition.types import Rule, Strategy, TaskOutcome
from src.core.exceptions import CapabilityDisabledException, RuleException
from src.engine import MemoryEngine
from src.knowledge.triples import Triple
from src.utils.ids import IdFactory

TRANSITIVE = Rule("trans", [("?x", "anc", "?y"), ("?y", "anc", "?z")], ("?x", "anc", "?z"), 0.9)
SYMMETRIC = Rule("sym", [("?x", "sib", "?y")], ("?y", "sib", "?x"))
PARENT = Rule("par", [("?x", "parent", "?y")], ("?x", "anc", "?y"))
UNCLE = Rule("uncle", [("?x", "parent", "?p"), ("?p", "sib", "?u")], ("?x", "uncle", "?u"), 0.8)


def _naive_closure(facts, rules):
    known = set(facts)
    while True:
        fresh = set()
        for rule in rules:
            for used in itertools.product(sorted(known), repeat=len(rule.premises)):
                bindings = {}
                for premise, fact in zip(rule.premises, used):
                    bindings = match_pattern(premise, fact, bindings)
                    if bindings is None:
                        break
                if bindings is not None:
                    conclusion = substitute(rule.conclusion, bindings)
                    if conclusion not in known:
                        fresh.add(conclusion)
        if not fresh:
            return known
        known |= fresh


def _random_facts(seed, count=14):
    rng = random.Random(seed)
    people = [f"ent:p{i}" for i in range(7)]
    facts = set()
    while len(facts) < count:
        a, b = rng.sample(people, 2)
        facts.add((a, rng.choice(["parent", "sib"]), b))
    return {f: 1.0 for f in sorted(facts)}


@pytest.mark.parametrize('seed', range(5))
def test_saturation_matches_naive_closure(seed):
    facts = _random_facts(seed)
    rules = [TRANSITIVE, SYMMETRIC, PARENT, UNCLE]
    known = forward_chain(facts, rules, max_depth=64)
    assert set(known) == _naive_closure(facts, rules)


def test_depth_bound_limits_chains():
    chain = {(f"ent:{a}", "anc", f"ent:{b}"): 1.0 for a, b in zip("abcde", "bcde")}
    one = forward_chain(chain, [TRANSITIVE], max_depth=1)
    derived = {f for f, node in one.items() if node.rule_id}
    assert derived == {("ent:a", "anc", "ent:c"), ("ent:b", "anc", "ent:d"), ("ent:c", "anc", "ent:e")}
    assert all(one[f].confidence == pytest.approx(0.9) for f in derived)
    full = forward_chain(chain, [TRANSITIVE], max_depth=8)
    assert ("ent:a", "anc", "ent:e") in full


def test_rule_validation():
    with pytest.raises(RuleException):
        Rule("unsafe", [("?x", "p", "?y")], ("?x", "q", "?z")).validate()
    with pytest.raises(RuleException):
        Rule("empty", [], ("a", "b", "c")).validate()
    with pytest.raises(RuleException):
        Rule("long", [("?x", "p", "?x")] * 6, ("?x", "q", "?x")).validate()


def test_parse_rules_reads_json_lines():
    lines = [
        "# family rules",
        '{"id": "par", "premises": [["?x", "parent", "?y"]], "conclusion": ["?x", "anc", "?y"]}',
        "",
        '{"id": "t", "premises": [["?x", "anc", "?y"], ["?y", "anc", "?z"]], '
        '"conclusion": ["?x", "anc", "?z"], "confidence": 0.9}',
    ]
    rules = parse_rules(lines)
    assert [r.id for r in rules] == ["par", "t"]
    assert rules[1].confidence == 0.9
    with pytest.raises(RuleException):
        parse_rules(['{"id": "bad", "premises": [], "conclusion": ["a", "b", "c"]}'])
    with pytest.raises(RuleException):
        parse_rules(['not json'])


def _family(knowledge):
    for s, o in [("ent:ann", "ent:bob"), ("ent:bob", "ent:cal"), ("ent:cal", "ent:dee")]:
        knowledge.assert_triple(Triple(s, "parent", o))


def test_reason_deduces_and_stores_derivations(ns):
    _family(ns.knowledge)
    result = ns.cognition.reason(("ent:ann", "anc", "?who"), [PARENT, TRANSITIVE])
    assert result.strategy is Strategy.DEDUCTIVE
    assert result.answer == [{'?who': 'ent:bob'}, {'?who': 'ent:cal'}, {'?who': 'ent:dee'}]
    assert result.confidence == 1.0
    assert not result.conflict_logged
    stored = ns.knowledge.query_triples("ent:ann", "anc", "ent:dee")
    assert stored and stored[0].confidence == pytest.approx(0.81)
    assert stored[0].provenance == ["rule:trans"]
    assert len(result.trace) == 3


def test_ground_goal_confidence_is_derivation_confidence(ns):
    _family(ns.knowledge)
    result = ns.cognition.reason(("ent:ann", "anc", "ent:cal"), [PARENT, TRANSITIVE])
    assert result.answer == [{}]
    assert result.confidence == pytest.approx(0.9)
    assert result.trace[0]['rule'] == "trans"


def test_heuristic_answers_when_deduction_fails(ns):
    _family(ns.knowledge)
    deduced = ns.cognition.reason(("ent:ann", "anc", "?who"), [PARENT, TRANSITIVE])
    result = ns.cognition.reason(("ent:ann", "kin", "?who"), [])
    assert result.strategy is Strategy.HEURISTIC
    assert result.answer == deduced.answer
    suggestion = ns.cognition.heuristic_suggest(("ent:ann", "kin", "?who"))
    assert result.confidence == pytest.approx(suggestion.confidence * ns.cognition.config.heuristic_confidence)


def test_nothing_known_gives_no_answer(ns):
    result = ns.cognition.reason(("ent:x", "p", "?y"), [])
    assert result.strategy is Strategy.NONE
    assert result.answer == [] and result.confidence == 0.0


def test_disagreement_is_logged_and_lowers_heuristic_weight(ns):
    _family(ns.knowledge)
    ns.cognition.reason(("ent:ann", "anc", "?who"), [PARENT, TRANSITIVE])
    ns.knowledge.retract_triple("ent:bob", "parent", "ent:cal")
    for triple in ns.knowledge.query_triples(None, "anc", None):
        ns.knowledge.retract_triple(*triple.spo)
    result = ns.cognition.reason(("ent:ann", "anc", "?who"), [PARENT, TRANSITIVE])
    assert result.strategy is Strategy.DEDUCTIVE
    assert result.answer == [{'?who': 'ent:bob'}]
    assert result.conflict_logged
    weights = ns.cognition.strategy_weights().weights
    assert weights['heuristic'] == pytest.approx(0.4)
    assert weights['deductive'] == pytest.approx(0.5)


def test_agreement_raises_heuristic_weight(ns):
    _family(ns.knowledge)
    ns.cognition.reason(("ent:ann", "anc", "?who"), [PARENT, TRANSITIVE])
    result = ns.cognition.reason(("ent:ann", "anc", "?who"), [PARENT, TRANSITIVE])
    assert not result.conflict_logged
    assert ns.cognition.strategy_weights().weights['heuristic'] == pytest.approx(0.6)


def test_reasoning_needs_the_graph(config, ticking_clock):
    knowledge_config = config.knowledge.model_copy(update={'graph_enabled': False})
    flat = config.model_copy(update={'knowledge': knowledge_config})
    with MemoryEngine(flat, ticking_clock, IdFactory(6)) as engine:
        with pytest.raises(CapabilityDisabledException):
            engine.namespace("flat", dim=8).cognition.reason(("ent:a", "p", "?x"), [])


def test_attempt_order_follows_strategy_weights(ns):
    _family(ns.knowledge)
    first = ns.cognition.reason(("ent:ann", "anc", "?who"), [PARENT, TRANSITIVE])
    assert first.attempts == [Strategy.DEDUCTIVE, Strategy.HEURISTIC]

    ns.cognition.reflect(TaskOutcome("warm-up", "heuristic", True))
    trusting = ns.cognition.reason(("ent:ann", "anc", "?who"), [PARENT, TRANSITIVE])
    assert trusting.attempts == [Strategy.HEURISTIC, Strategy.DEDUCTIVE]
    assert trusting.strategy is Strategy.DEDUCTIVE
    assert trusting.to_dict()['attempts'] == ["heuristic", "deductive"]

    for i in range(4):
        ns.cognition.reflect(TaskOutcome(f"miss-{i}", "heuristic", False))
    wary = ns.cognition.reason(("ent:ann", "anc", "?who"), [PARENT, TRANSITIVE])
    assert wary.attempts == [Strategy.DEDUCTIVE, Strategy.HEURISTIC]


def test_deduction_overrides_a_heuristic_tried_first(ns):
    _family(ns.knowledge)
    ns.cognition.reason(("ent:ann", "anc", "?who"), [PARENT, TRANSITIVE])
    ns.knowledge.retract_triple("ent:bob", "parent", "ent:cal")
    for triple in ns.knowledge.query_triples(None, "anc", None):
        ns.knowledge.retract_triple(*triple.spo)
    for i in range(3):
        ns.cognition.reflect(TaskOutcome(f"hit-{i}", "heuristic", True))

    result = ns.cognition.reason(("ent:ann", "anc", "?who"), [PARENT, TRANSITIVE])
    assert result.attempts[0] is Strategy.HEURISTIC
    assert result.strategy is Strategy.DEDUCTIVE
    assert result.answer == [{'?who': 'ent:bob'}]
    assert result.conflict_logged
