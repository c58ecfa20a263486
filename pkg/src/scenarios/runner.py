"""
Deterministic end-to-end scripts for the four user scenarios.

Each run records a transcript: one line per engine operation carrying the
SHA-256 digests of its canonical inputs and outputs. With the built-in
engine (manual clock, seeded ids) the same seed always yields the same bytes.
"""

import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from ..cognition.reasoning import load_rules
from ..cognition.types import Cue, Rule, TaskOutcome, UpdateProposal
from ..coordination.coordinator import Stimulus
from ..core.config import Config
from ..core.exceptions import DirtyNamespaceException, ScenarioAssertionError, ValidationException
from ..core.logger import StructuredLogger
from ..engine import MemoryEngine, NamespaceEngine
from ..knowledge.records import Modality, Tier
from ..knowledge.triples import Triple
from ..utils.clock import ManualClock
from ..utils.embedding import test_embed
from ..utils.ids import IdFactory
from ..utils.serialization import canonical_json, digest
from . import fixtures

log = StructuredLogger(__name__)

TRANSCRIPT_VERSION = 1
DEFAULT_NAMESPACE = "scenario"


class Scenario(str, Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"


@dataclass
class TranscriptStep:
    op: str
    inputs: str
    outputs: str


@dataclass
class ScenarioTranscript:
    scenario: Scenario
    seed: int
    steps: List[TranscriptStep] = field(default_factory=list)
    assertions_passed: int = 0
    summary: Dict[str, Any] = field(default_factory=dict)

    def rows(self) -> List[Dict[str, Any]]:
        rows: List[Dict[str, Any]] = [{'kind': 'header', 'v': TRANSCRIPT_VERSION,
                                       'scenario': self.scenario.value, 'seed': self.seed}]
        for index, step in enumerate(self.steps):
            rows.append({'kind': 'step', 'index': index, 'op': step.op,
                         'inputs': step.inputs, 'outputs': step.outputs})
        rows.append({'kind': 'summary', 'assertions_passed': self.assertions_passed,
                     'result': self.summary})
        return rows

    def to_jsonl(self) -> bytes:
        return b''.join(canonical_json(row) + b'\n' for row in self.rows())


def to_jsonable(value: Any) -> Any:
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, bytes):
        return value.hex()
    return value


class ScenarioContext:
    """Step recorder and assertion counter around one namespace."""

    def __init__(self, ns: NamespaceEngine, transcript: ScenarioTranscript):
        self.ns = ns
        self.knowledge = ns.knowledge
        self.coordinator = ns.coordinator
        self.cognition = ns.cognition
        self.transcript = transcript

    def step(self, op: str, inputs: Dict[str, Any], call: Callable[[], Any]) -> Any:
        result = call()
        self.transcript.steps.append(
            TranscriptStep(op, digest(to_jsonable(inputs)), digest(to_jsonable(result))))
        return result

    def check(self, condition: bool, message: str):
        if not condition:
            raise ScenarioAssertionError(f"{self.transcript.scenario.value}: {message}")
        self.transcript.assertions_passed += 1

    def now(self) -> int:
        return self.knowledge.clock.now_us()

    def encode(self, modality: Modality, text: str, entities: List[str], salience: float = 0.5,
               occurred_at: Optional[int] = None, embed: bool = True,
               provenance: Optional[List[str]] = None):
        stimulus = Stimulus(modality, text, test_embed(text, self.knowledge.dim) if embed else None,
                            salience, list(entities), occurred_at, list(provenance or []))
        inputs = {'modality': modality.value, 'content': text, 'entities': entities,
                  'salience': salience, 'occurred_at': occurred_at, 'embed': embed}
        return self.step('encode', inputs, lambda: self.coordinator.encode(stimulus))

    def assert_triple(self, triple: Triple) -> Triple:
        return self.step('assert_triple', triple.to_dict(), lambda: self.knowledge.assert_triple(triple))


def _mushroom(ctx: ScenarioContext) -> Dict[str, Any]:
    """Observe, associate, predict danger, commit the characteristics to memory."""
    known = fixtures.MUSHROOM_KNOWLEDGE
    ctx.encode(Modality.TEXT, known['text'], known['entities'], salience=0.7)
    for s, p, o in fixtures.MUSHROOM_TRIPLES:
        ctx.assert_triple(Triple(s, p, o, provenance=["field-guide"]))

    seen = fixtures.MUSHROOM_OBSERVATION
    observation = ctx.encode(Modality.IMAGE_DESCRIPTOR, seen['text'], seen['entities'])
    for feature in seen['features']:
        ctx.assert_triple(Triple("ent:mushroom_1", "hasFeature", feature,
                                 source_record=observation.id, provenance=["observation"]))

    cue = Cue(embedding=test_embed(seen['text'], ctx.knowledge.dim), entities=["ent:red_cap", "ent:white_spots"])
    associated = ctx.step('associate', {'cue': cue.entities, 'text': seen['text'], 'k': 16},
                          lambda: ctx.cognition.associate(cue, 16))
    ctx.check("ent:fly_agaric" in [hit.id for hit in associated],
              "observed features should activate the stored fly agaric")

    ctx.encode(Modality.TEXT, fixtures.MUSHROOM_APP_RESULT, ["ent:mushroom_1"], salience=0.8)

    rules = [Rule.from_dict(r) for r in fixtures.MUSHROOM_RULES]
    goal = ("ent:mushroom_1", "hasToxicity", "?t")
    proof = ctx.step('reason', {'goal': goal, 'rules': fixtures.MUSHROOM_RULES},
                     lambda: ctx.cognition.reason(goal, rules))
    ctx.check(proof.answer == [{'?t': "lit:highly_toxic"}], "danger should be predicted from the toxic-feature rule")

    reinforced = ctx.step('reinforce', {'id': observation.id, 'delta_salience': 0.45},
                          lambda: ctx.coordinator.reinforce(observation.id, 0.45))
    ctx.check(reinforced.salience >= 0.9, "the observation should be committed with high salience")

    for s, p, o in fixtures.MUSHROOM_CHARACTERISTICS:
        ctx.assert_triple(Triple(s, p, o, source_record=observation.id, provenance=["observation"]))
    stored = ctx.step('query_triples', {'subject': "ent:mushroom_1"},
                      lambda: ctx.knowledge.query_triples("ent:mushroom_1"))
    predicates = {t.predicate for t in stored}
    ctx.check({"hasToxicity", "hasTexture", "hasColor", "hasFeature"} <= predicates,
              "the mushroom's characteristics should be stored")
    return {
        'associated': [hit.id for hit in associated[:3]],
        'answer': proof.answer,
        'strategy': proof.strategy.value,
        'salience': reinforced.salience,
    }


def _routine(ctx: ScenarioContext) -> Dict[str, Any]:
    """Reconstruct the 2nd of last month from weekly routines and special plans."""
    rows = fixtures.routine_records()
    for row in rows:
        content = canonical_json(row['content']).decode('utf-8')
        ctx.encode(Modality.EVENT, content, [f"ent:day_{row['content']['day']}"],
                   occurred_at=row['created_at'], embed=False)

    year, month, day = fixtures.RECALL_DAY
    start = fixtures.utc_us(year, month, day)
    window = (start, start + 86_400_000_000 - 1)
    cue = Cue(text_tokens=["saturday"], time_window=window, slots=["routine", "special"])
    result = ctx.step('recall', {'window': window, 'slots': cue.slots, 'tokens': cue.text_tokens},
                      lambda: ctx.cognition.recall(cue))
    ctx.check(result.completeness == 1.0, "routine and special plans should both be recalled")

    activities = {}
    for slot, (record_id, _) in result.filled_slots.items():
        content = ctx.knowledge.peek_record(record_id).json_content()
        ctx.check(content['day'] == "2024-03-02", f"slot {slot} should come from the recalled day")
        activities[slot] = content['activity']

    prediction = ctx.step('predict', {'stream': "routine", 'context': ["friday"]},
                          lambda: ctx.cognition.predict("routine", ["friday"]))
    ctx.check(prediction is not None and prediction.label == "saturday",
              "a friday routine should be followed by a saturday one")
    return {
        'records': len(rows),
        'completeness': result.completeness,
        'activities': activities,
        'next_after_friday': prediction.label,
    }


def _formulas(ctx: ScenarioContext, workdir: Path) -> Dict[str, Any]:
    """Retrieve formulas by rules, reflect, and consolidate the solution."""
    for s, p, o in fixtures.PROBLEM_TRIPLES:
        ctx.assert_triple(Triple(s, p, o, provenance=["textbook"]))
    ctx.encode(Modality.TEXT, fixtures.PROBLEM_TEXT, ["ent:problem_1"])

    rule_file = workdir / "formulas.jsonl"
    rule_file.write_text(fixtures.FORMULA_RULES_JSONL, encoding='utf-8')
    rules = ctx.step('load_rules', {'rules': fixtures.FORMULA_RULES_JSONL}, lambda: load_rules(rule_file))

    proof = ctx.step('reason', {'goal': fixtures.PROBLEM_GOAL, 'rules': [r.to_dict() for r in rules]},
                     lambda: ctx.cognition.reason(fixtures.PROBLEM_GOAL, rules))
    ctx.check(proof.strategy.value == "deductive", "the goal should be proven deductively")
    ctx.check(proof.answer == [{'?f': "ent:pythagorean_theorem"}], "the theorem should answer the problem")

    outcome = TaskOutcome("problem_1", "deductive", True)
    weights = ctx.step('reflect', {'task_id': outcome.task_id, 'strategy': outcome.strategy, 'success': True},
                       lambda: ctx.cognition.reflect(outcome))
    ctx.check(weights.weights["deductive"] > 0.5, "success should raise the deductive weight")

    note = ctx.encode(Modality.TEXT, fixtures.SOLUTION_NOTE,
                      ["ent:problem_1", "ent:pythagorean_theorem"], salience=min(1.0, proof.confidence))
    ctx.step('reinforce', {'id': note.id, 'delta_salience': 1.0},
             lambda: ctx.coordinator.reinforce(note.id, 1.0))

    tiers = []
    base = ctx.now()
    for tick in (1, 2):
        now = base + tick * fixtures.TICK_SPACING_SECONDS * 1_000_000
        ctx.step('consolidate_tick', {'now_offset_s': tick * fixtures.TICK_SPACING_SECONDS},
                 lambda: ctx.coordinator.consolidate_tick(now))
        tiers.append(ctx.knowledge.peek_record(note.id).tier.value)
    ctx.check(tiers[-1] == Tier.LONG.value, "the derived solution should consolidate into the long tier")

    derived = ctx.knowledge.query_triples("ent:problem_1", "answeredWith", None)
    ctx.check(len(derived) == 1, "the derived fact should be stored")
    return {
        'answer': proof.answer,
        'confidence': proof.confidence,
        'weights': weights.to_dict()['weights'],
        'tiers': tiers,
    }


def _napoleon(ctx: ScenarioContext) -> Dict[str, Any]:
    """A biography contradicts a school lesson; the belief is replaced, history kept."""
    lesson = ctx.encode(Modality.TEXT, fixtures.NAPOLEON_LESSON['text'], fixtures.NAPOLEON_LESSON['entities'],
                        provenance=["lesson:high-school"])
    for s, p, o, provenance in fixtures.NAPOLEON_CONTEXT:
        ctx.assert_triple(Triple(s, p, o, provenance=list(provenance)))
    s, p, o = fixtures.NAPOLEON_OLD_BELIEF
    old = ctx.assert_triple(Triple(s, p, o, confidence=fixtures.NAPOLEON_OLD_CONFIDENCE,
                                   source_record=lesson.id, provenance=["lesson:high-school"]))

    biography = ctx.encode(Modality.TEXT, fixtures.NAPOLEON_BIOGRAPHY['text'],
                           fixtures.NAPOLEON_BIOGRAPHY['entities'], provenance=list(fixtures.NAPOLEON_EVIDENCE))
    ns, np_, no = fixtures.NAPOLEON_NEW_BELIEF
    proposal = UpdateProposal(Triple(ns, np_, no, asserted_at=ctx.now()), list(fixtures.NAPOLEON_EVIDENCE),
                              fixtures.NAPOLEON_EVIDENCE_CONFIDENCE, biography.id)
    outcome = ctx.step('update_memory',
                       {'triple': list(fixtures.NAPOLEON_NEW_BELIEF), 'evidence': proposal.evidence,
                        'evidence_confidence': proposal.evidence_confidence},
                       lambda: ctx.cognition.update_memory(proposal))
    ctx.check(outcome.decision.value == "replaced", "the biography should replace the old belief")

    current = ctx.step('query_triples', {'subject': s, 'predicate': p},
                       lambda: ctx.knowledge.query_triples(s, p))
    historical = ctx.step('query_triples', {'subject': s, 'predicate': p, 'as_of': 'old'},
                          lambda: ctx.knowledge.query_triples(s, p, as_of=old.asserted_at))
    ctx.check([t.object for t in current] == [no], "the current belief should be the new one")
    ctx.check([t.object for t in historical] == [o], "the old belief should stay visible at its time")
    return {
        'decision': outcome.decision.value,
        'consistency': outcome.consistency,
        'completeness_q': outcome.completeness_q,
        'current': [t.object for t in current],
        'historical': [t.object for t in historical],
    }


def _script(which: Scenario, ctx: ScenarioContext, workdir: Path) -> Dict[str, Any]:
    if which is Scenario.S1:
        return _mushroom(ctx)
    if which is Scenario.S2:
        return _routine(ctx)
    if which is Scenario.S3:
        return _formulas(ctx, workdir)
    return _napoleon(ctx)


def scenario_engine(directory: Path, seed: int, config: Optional[Config] = None) -> MemoryEngine:
    """Engine with a manual clock and seeded ids, so runs are reproducible."""
    config = (config or Config()).with_data_dir(directory)
    clock = ManualClock(fixtures.SCENARIO_EPOCH_US, fixtures.CLOCK_STEP_US)
    return MemoryEngine(config, clock, IdFactory(seed), directory)


def run_scenario(which, seed: int = 0, engine: Optional[MemoryEngine] = None,
                 namespace: str = DEFAULT_NAMESPACE, config: Optional[Config] = None) -> ScenarioTranscript:
    """Run one scenario script against a fresh namespace and return its transcript."""
    try:
        which = Scenario(which)
    except ValueError:
        raise ValidationException(f"Unknown scenario {which!r}; expected one of S1..S4")

    transcript = ScenarioTranscript(which, seed)
    with tempfile.TemporaryDirectory(prefix="colma-scenario-") as tmp:
        workdir = Path(tmp)
        owned = engine is None
        if owned:
            engine = scenario_engine(workdir / "store", seed, config)
        try:
            ns = engine.namespace(namespace)
            if not ns.knowledge.is_empty():
                raise DirtyNamespaceException(f"Namespace {namespace} already holds data",
                                              {'namespace': namespace})
            log.info("Scenario started", scenario=which.value, seed=seed, namespace=namespace)
            ctx = ScenarioContext(ns, transcript)
            transcript.summary = to_jsonable(_script(which, ctx, workdir))
        finally:
            if owned:
                engine.close()
    log.info("Scenario finished", scenario=which.value, steps=len(transcript.steps),
             assertions=transcript.assertions_passed)
    return transcript


def run_all(seed: int = 0) -> List[Tuple[Scenario, ScenarioTranscript]]:
    return [(which, run_scenario(which, seed)) for which in Scenario]
