"""Sensor sampling plans and gate decisions for incoming samples.

Sampling frequency maps to a fixed three-point period table; samples are
accepted only while the participant is inside the question's zone, within
the configured duration after zone entry, and no faster than twice the
nominal rate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from types import MappingProxyType
from typing import Optional

from .asset import PoiQuestion
from .geo import GeoPoint, LocalizationZone, zone_contains
from .modality import PoiStatus, TaskSession

# Low: every 2 s, Medium: every 250 ms, High: every 200 ms.
FREQUENCY_PERIOD_MS = MappingProxyType({"Low": 2000, "Medium": 250, "High": 200})

# Fixed value arity per sensor kind.
SENSOR_ARITY = MappingProxyType({
    "light": 1,          # lux
    "gyroscope": 3,      # rad/s
    "proximity": 1,      # cm
    "accelerometer": 3,  # m/s^2
    "location": 3,       # lat deg, lon deg, accuracy m
    "noise": 1,          # dB
})

PASSIVE_RADIUS_M = 10_000.0


class DropReason(enum.Enum):
    OUTSIDE_ZONE = "OutsideZone"
    EXPIRED = "Expired"
    TOO_FREQUENT = "TooFrequent"
    WRONG_ARITY = "WrongArity"


@dataclass(frozen=True)
class GateDecision:
    accepted: bool
    reason: Optional[DropReason] = None

    def __bool__(self) -> bool:
        return self.accepted


ACCEPT = GateDecision(True)


@dataclass(frozen=True)
class SamplingPlan:
    question_id: int
    kind: str
    period_ms: int
    duration_min: float
    zone: LocalizationZone


@dataclass(frozen=True)
class SensorSample:
    session_id: str
    kind: str
    captured_at: int  # epoch ms
    values: tuple[float, ...]
    location: Optional[GeoPoint] = None


def plans_for_question(q: PoiQuestion, zone: LocalizationZone) -> list[SamplingPlan]:
    """One sampling plan per configured sensor, gated on the question zone."""
    return [
        SamplingPlan(
            question_id=q.id,
            kind=s.kind,
            period_ms=FREQUENCY_PERIOD_MS[q.frequency],
            duration_min=q.time_min,
            zone=zone,
        )
        for s in q.sensors
    ]


def gate_sample(
    plan: SamplingPlan,
    session: TaskSession,
    sample: SensorSample,
    entered_at: int,
    last_accepted_at: Optional[int] = None,
) -> GateDecision:
    """Accept or drop one sample against a plan.

    `entered_at` is the zone-entry time for the plan's question;
    `last_accepted_at` is the capture time of the previous accepted sample
    on this (session, question, kind) stream, if any.
    """
    if len(sample.values) != SENSOR_ARITY[plan.kind]:
        return GateDecision(False, DropReason.WRONG_ARITY)
    if session.poi_status.get(plan.question_id) is not PoiStatus.INSIDE:
        return GateDecision(False, DropReason.OUTSIDE_ZONE)
    if sample.location is not None and not zone_contains(plan.zone, sample.location):
        return GateDecision(False, DropReason.OUTSIDE_ZONE)
    if sample.captured_at > entered_at + plan.duration_min * 60_000:
        return GateDecision(False, DropReason.EXPIRED)
    if last_accepted_at is not None and (
        sample.captured_at < last_accepted_at + 0.5 * plan.period_ms
    ):
        return GateDecision(False, DropReason.TOO_FREQUENT)
    return ACCEPT


class SampleGate:
    """Stateful wrapper tracking per-stream rate caps and zone-entry times."""

    def __init__(self) -> None:
        self._last: dict[tuple[str, int, str], int] = {}

    def offer(
        self,
        plan: SamplingPlan,
        session: TaskSession,
        sample: SensorSample,
        entered_at: int,
    ) -> GateDecision:
        key = (sample.session_id, plan.question_id, plan.kind)
        decision = gate_sample(plan, session, sample, entered_at, self._last.get(key))
        if decision.accepted:
            self._last[key] = sample.captured_at
        return decision


def passive_mode(plan: SamplingPlan) -> bool:
    """True for continuous passive-sensing configurations: zones so large the
    participant is effectively always inside."""
    zone = plan.zone
    radius = getattr(zone, "radius_m", None)
    if radius is None:
        radius = zone.semi_major_m
    return radius >= PASSIVE_RADIUS_M
