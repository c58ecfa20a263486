"""
End-to-end scenario scripts and their transcripts.
"""

import pytest

from src.core.exceptions import DirtyNamespaceException, ValidationException
from src.scenarios import Scenario, run_scenario, scenario_engine
from src.scenarios.runner import TRANSCRIPT_VERSION
from src.utils.serialization import loads


@pytest.mark.parametrize('which', list(Scenario))
def test_scenario_passes_its_checks(which):
    transcript = run_scenario(which, seed=0)
    assert transcript.assertions_passed > 0
    assert transcript.steps


@pytest.mark.parametrize('which', list(Scenario))
def test_transcripts_are_reproducible(which):
    assert run_scenario(which, seed=3).to_jsonl() == run_scenario(which, seed=3).to_jsonl()


def test_transcript_layout():
    transcript = run_scenario("S4", seed=1)
    rows = [loads(line) for line in transcript.to_jsonl().splitlines()]
    assert rows[0] == {'kind': 'header', 'v': TRANSCRIPT_VERSION, 'scenario': 'S4', 'seed': 1}
    assert rows[-1]['kind'] == 'summary'
    steps = rows[1:-1]
    assert [s['index'] for s in steps] == list(range(len(steps)))
    assert all(len(s['inputs']) == 64 and len(s['outputs']) == 64 for s in steps)
    assert 'update_memory' in [s['op'] for s in steps]


def test_routine_recall_is_complete():
    summary = run_scenario(Scenario.S2).summary
    assert summary['completeness'] == 1.0
    assert set(summary['activities']) == {'routine', 'special'}
    assert summary['next_after_friday'] == "saturday"


def test_formula_solution_reaches_long_term():
    summary = run_scenario(Scenario.S3).summary
    assert summary['answer'] == [{'?f': "ent:pythagorean_theorem"}]
    assert summary['tiers'][-1] == "long"
    assert summary['weights']['deductive'] > 0.5


def test_contradicting_biography_replaces_belief():
    summary = run_scenario(Scenario.S4).summary
    assert summary['decision'] == "replaced"
    assert summary['current'] == ["lit:intelligence_failures"]
    assert summary['historical'] == ["lit:stubbornness"]


def test_mushroom_is_judged_dangerous():
    summary = run_scenario(Scenario.S1).summary
    assert summary['strategy'] == "deductive"
    assert summary['answer']
    assert summary['associated']


def test_unknown_scenario():
    with pytest.raises(ValidationException):
        run_scenario("S9")


def test_scenario_refuses_a_dirty_namespace(tmp_path):
    with scenario_engine(tmp_path, seed=0) as engine:
        engine.namespace("busy").knowledge.put_fact("k", b'v')
        with pytest.raises(DirtyNamespaceException):
            run_scenario("S1", engine=engine, namespace="busy")
        transcript = run_scenario("S1", engine=engine, namespace="clean")
        assert transcript.assertions_passed > 0
