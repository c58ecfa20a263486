"""
Retention scoring.
"""

import math

from ..core.config import RetentionPolicy
from ..knowledge.records import MemoryRecord, Tier
from ..utils.clock import US_PER_DAY


def decay_rate(tier: Tier, policy: RetentionPolicy) -> float:
    """Per-day recency decay of a tier. Archived records decay like long-term ones."""
    if tier is Tier.SHORT:
        return policy.lambda_short
    if tier is Tier.MEDIUM:
        return policy.lambda_medium
    return policy.lambda_long


def retention_score(record: MemoryRecord, now: int, policy: RetentionPolicy) -> float:
    """R = w_r * exp(-lambda * days idle) + w_f * (1 - exp(-accesses / 5)) + w_s * salience"""
    idle_days = max(0, now - record.last_access) / US_PER_DAY
    recency = math.exp(-decay_rate(record.tier, policy) * idle_days)
    frequency = 1.0 - math.exp(-record.access_count / 5.0)
    return (policy.w_recency * recency
            + policy.w_frequency * frequency
            + policy.w_salience * record.salience)


def eviction_key(record: MemoryRecord, now: int, policy: RetentionPolicy):
    """Order in which a full short tier gives up records: lowest R, oldest, smallest id."""
    return (retention_score(record, now, policy), record.created_at, record.id)
