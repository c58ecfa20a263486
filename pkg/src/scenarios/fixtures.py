"""
Fixture content of the four user scenarios.
"""

from datetime import datetime, timedelta, timezone
from typing import Any, Dict, List

from ..utils.clock import US_PER_SECOND

# Scenario clocks start here unless a fixture moves them.
SCENARIO_EPOCH_US = 1_704_067_200 * US_PER_SECOND  # 2024-01-01T00:00:00Z
CLOCK_STEP_US = 1_000


def utc_us(year: int, month: int, day: int, hour: int = 0, minute: int = 0) -> int:
    moment = datetime(year, month, day, hour, minute, tzinfo=timezone.utc)
    return int(moment.timestamp()) * US_PER_SECOND


# S1: toxic mushroom identification

MUSHROOM_KNOWLEDGE = {
    'text': "fly agaric: red cap with white spots, white gills and a ring on the stem; highly toxic",
    'entities': ["ent:fly_agaric", "ent:red_cap", "ent:white_spots", "ent:stem_ring"],
}

MUSHROOM_TRIPLES = [
    ("ent:fly_agaric", "hasFeature", "ent:red_cap"),
    ("ent:fly_agaric", "hasFeature", "ent:white_spots"),
    ("ent:fly_agaric", "hasFeature", "ent:stem_ring"),
    ("ent:fly_agaric", "hasToxicity", "lit:highly_toxic"),
]

MUSHROOM_OBSERVATION = {
    'text': "mushroom in the wild: red cap with white spots, ring on the stem, smooth cold texture",
    'entities': ["ent:mushroom_1", "ent:red_cap", "ent:white_spots"],
    'features': ["ent:red_cap", "ent:white_spots", "ent:stem_ring"],
}

MUSHROOM_APP_RESULT = "identification app warning: highly toxic"

MUSHROOM_RULES: List[Dict[str, Any]] = [
    {
        'id': "lookalike",
        'premises': [["?x", "hasFeature", "ent:red_cap"],
                     ["?x", "hasFeature", "ent:white_spots"],
                     ["?y", "hasFeature", "ent:red_cap"],
                     ["?y", "hasToxicity", "?t"]],
        'conclusion': ["?x", "resembles", "?y"],
        'confidence': 0.9,
    },
    {
        'id': "toxic-feature",
        'premises': [["?x", "resembles", "?y"], ["?y", "hasToxicity", "?t"]],
        'conclusion': ["?x", "hasToxicity", "?t"],
        'confidence': 0.9,
    },
]

MUSHROOM_CHARACTERISTICS = [
    ("ent:mushroom_1", "hasTexture", "lit:smooth"),
    ("ent:mushroom_1", "hasColor", "lit:red"),
]


# S2: what happened on the 2nd of last month

ROUTINE_MONTH = (2024, 3)
RECALL_DAY = (2024, 3, 2)

WEEKLY_ROUTINE = {
    0: ("monday", "team meeting"),
    1: ("tuesday", "gym session"),
    2: ("wednesday", "project review"),
    3: ("thursday", "language class"),
    4: ("friday", "weekly report"),
    5: ("saturday", "grocery shopping"),
    6: ("sunday", "family dinner"),
}

SPECIAL_EVENTS = {
    (2024, 3, 2): "hiking trip with college friends",
}


def routine_records() -> List[Dict[str, Any]]:
    """One routine event per day of the month, plus the special plans."""
    year, month = ROUTINE_MONTH
    day = datetime(year, month, 1, tzinfo=timezone.utc)
    rows = []
    while day.month == month:
        weekday, activity = WEEKLY_ROUTINE[day.weekday()]
        rows.append({
            'created_at': utc_us(day.year, day.month, day.day, 9),
            'content': {
                'stream': "routine",
                'label': weekday,
                'slot': "routine",
                'day': day.strftime('%Y-%m-%d'),
                'weekday': weekday,
                'activity': activity,
            },
        })
        special = SPECIAL_EVENTS.get((day.year, day.month, day.day))
        if special:
            rows.append({
                'created_at': utc_us(day.year, day.month, day.day, 15),
                'content': {
                    'slot': "special",
                    'day': day.strftime('%Y-%m-%d'),
                    'weekday': weekday,
                    'activity': special,
                },
            })
        day += timedelta(days=1)
    return rows


# S3: solving a problem by retrieving formulas

PROBLEM_TEXT = "right triangle with legs 3 and 4: find the hypotenuse"

PROBLEM_TRIPLES = [
    ("ent:problem_1", "hasType", "ent:right_triangle"),
    ("ent:problem_1", "asks", "ent:hypotenuse"),
    ("ent:right_triangle", "solvedBy", "ent:pythagorean_theorem"),
    ("ent:pythagorean_theorem", "yields", "ent:hypotenuse"),
]

FORMULA_RULES_JSONL = "\n".join([
    "# formula retrieval rules",
    '{"id": "type-solution", "premises": [["?p", "hasType", "?t"], ["?t", "solvedBy", "?f"]], '
    '"conclusion": ["?p", "solvedBy", "?f"], "confidence": 0.95}',
    '{"id": "goal-fit", "premises": [["?p", "solvedBy", "?f"], ["?p", "asks", "?q"], '
    '["?f", "yields", "?q"]], "conclusion": ["?p", "answeredWith", "?f"], "confidence": 0.9}',
    "",
])

PROBLEM_GOAL = ("ent:problem_1", "answeredWith", "?f")

SOLUTION_NOTE = "problem 1 answered with the pythagorean theorem: hypotenuse 5"

TICK_SPACING_SECONDS = 3600


# S4: updating a belief about Napoleon

NAPOLEON_LESSON = {
    'text': "high school history lesson: napoleon lost at waterloo because of his stubbornness",
    'entities': ["ent:napoleon", "ent:waterloo"],
}

NAPOLEON_BIOGRAPHY = {
    'text': "new biography: napoleon's decisions at waterloo were driven by intelligence failures",
    'entities': ["ent:napoleon", "ent:waterloo"],
}

NAPOLEON_CONTEXT = [
    ("ent:napoleon", "foughtAt", "ent:waterloo", ["lesson:high-school", "source:biography"]),
    ("ent:waterloo", "locatedIn", "ent:belgium", ["lesson:high-school", "source:biography"]),
]

NAPOLEON_OLD_BELIEF = ("ent:napoleon", "defeatCause", "lit:stubbornness")
NAPOLEON_OLD_CONFIDENCE = 0.5
NAPOLEON_NEW_BELIEF = ("ent:napoleon", "defeatCause", "lit:intelligence_failures")
NAPOLEON_EVIDENCE = ["source:biography"]
NAPOLEON_EVIDENCE_CONFIDENCE = 0.9
