"""Per-participant navigation state machine for the three modalities.

Simple: points of interest may be visited in any order. Sequential: strict
ascending question-id order. Dynamic: the answer chosen at one point of
interest determines the next one; a null next-question terminates the path.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .asset import Asset, Assignment, Participant, PoiQuestion
from .geo import (
    CircleZone,
    GeoPoint,
    LocalizationZone,
    ellipse_toward,
    zone_contains,
)


class PoiStatus(enum.Enum):
    LOCKED = "Locked"
    UNLOCKED = "Unlocked"
    INSIDE = "Inside"
    ANSWERED = "Answered"


class NotEnrolledError(Exception):
    pass


class AssignmentClosedError(Exception):
    pass


class SessionCompleteError(Exception):
    pass


class NotLocalizedError(Exception):
    pass


class AlreadyAnsweredError(Exception):
    pass


class PayloadMismatchError(Exception):
    pass


class ProofRequiredError(Exception):
    pass


class ProofInvalidError(Exception):
    pass


@dataclass(frozen=True)
class ZoneEvent:
    kind: str  # "Entered" | "Left"
    question_id: int
    at: int  # epoch ms


@dataclass(frozen=True)
class AnswerRecord:
    question_id: int
    payload: object  # option id, list of option ids, or free text
    answered_at: int
    location: GeoPoint
    credits: int
    proof_id: Optional[str] = None


@dataclass(frozen=True)
class AnswerOutcome:
    record: AnswerRecord
    credits_awarded: int
    unlocked: tuple[int, ...]
    completed: bool


@dataclass
class TaskSession:
    id: str
    participant_id: str
    assignment_id: str
    asset: Asset
    poi_status: dict[int, PoiStatus] = field(default_factory=dict)
    answers: list[AnswerRecord] = field(default_factory=list)
    credits_earned: int = 0
    started_at: int = 0
    completed_at: Optional[int] = None
    entered_at: dict[int, int] = field(default_factory=dict)
    dynamic_terminal: bool = False

    @property
    def completed(self) -> bool:
        return self.completed_at is not None

    def question(self, qid: int) -> PoiQuestion:
        for q in self.asset.questions:
            if q.id == qid:
                return q
        raise KeyError(qid)


def question_zone(asset: Asset, qid: int) -> LocalizationZone:
    """Geofence for a question: circle of its vicinity, or an oriented
    ellipse (minor axis toward the next question's location) when the asset
    is configured for elliptical localization."""
    by_id = {q.id: q for q in asset.questions}
    q = by_id[qid]
    if asset.zone_shape == "ellipse":
        ordered = sorted(by_id)
        idx = ordered.index(qid)
        if idx + 1 < len(ordered):
            nxt = by_id[ordered[idx + 1]]
            if nxt.location != q.location:
                return ellipse_toward(
                    q.location, nxt.location, q.vicinity_m, q.vicinity_m / 2.0
                )
    return CircleZone(center=q.location, radius_m=q.vicinity_m)


def start_session(
    assignment: Assignment,
    participant: Participant,
    asset: Asset,
    session_id: str = "",
    now: int = 0,
    task_status: str = "Active",
) -> TaskSession:
    """Open a session, unlocking points of interest per the asset's modality."""
    if task_status == "Closed":
        raise AssignmentClosedError(assignment.id)
    if assignment.participant_ids and participant.id not in assignment.participant_ids:
        raise NotEnrolledError(participant.id)

    ordered = sorted(q.id for q in asset.questions)
    status: dict[int, PoiStatus] = {qid: PoiStatus.LOCKED for qid in ordered}
    if asset.mode == "Simple":
        for qid in ordered:
            status[qid] = PoiStatus.UNLOCKED
    else:  # Sequential and Dynamic both open at the lowest id
        status[ordered[0]] = PoiStatus.UNLOCKED

    return TaskSession(
        id=session_id or f"s-{assignment.id}-{participant.id}",
        participant_id=participant.id,
        assignment_id=assignment.id,
        asset=asset,
        poi_status=status,
        started_at=now,
    )


def on_location_update(s: TaskSession, p: GeoPoint, t: int) -> list[ZoneEvent]:
    """Report zone transitions for unlocked questions at the new position."""
    if s.completed:
        raise SessionCompleteError(s.id)
    events: list[ZoneEvent] = []
    for qid in sorted(s.poi_status):
        status = s.poi_status[qid]
        if status not in (PoiStatus.UNLOCKED, PoiStatus.INSIDE):
            continue
        inside = zone_contains(question_zone(s.asset, qid), p)
        if inside and status is PoiStatus.UNLOCKED:
            s.poi_status[qid] = PoiStatus.INSIDE
            s.entered_at[qid] = t
            events.append(ZoneEvent("Entered", qid, t))
        elif not inside and status is PoiStatus.INSIDE:
            s.poi_status[qid] = PoiStatus.UNLOCKED
            s.entered_at.pop(qid, None)
            events.append(ZoneEvent("Left", qid, t))
    return events


def _check_payload(q: PoiQuestion, payload) -> None:
    option_ids = {o.id for o in q.options}
    if q.qtype in ("radio", "likert"):
        if not isinstance(payload, int) or payload not in option_ids:
            raise PayloadMismatchError(f"{q.qtype} expects one valid option id")
    elif q.qtype == "checkbox":
        ok = (
            isinstance(payload, (list, tuple))
            and len(payload) >= 1
            and all(isinstance(v, int) and v in option_ids for v in payload)
            and len(set(payload)) == len(payload)
        )
        if not ok:
            raise PayloadMismatchError("checkbox expects >=1 distinct valid option ids")
    elif q.qtype == "textbox":
        if not isinstance(payload, str) or not payload.strip():
            raise PayloadMismatchError("textbox expects non-empty text")
    else:
        raise PayloadMismatchError(f"unknown question type {q.qtype}")


def _award(q: PoiQuestion, payload, default_credit: int) -> int:
    by_id = {o.id: o for o in q.options}
    if q.qtype == "checkbox":
        return sum(
            by_id[oid].credits if by_id[oid].credits is not None else default_credit
            for oid in payload
        )
    if q.qtype == "textbox":
        return default_credit
    o = by_id[payload]
    return o.credits if o.credits is not None else default_credit


def _selected_next(q: PoiQuestion, payload) -> Optional[int]:
    """Next question chosen by the answer; for checkbox, the lowest selected
    option id decides."""
    by_id = {o.id: o for o in q.options}
    if q.qtype == "checkbox":
        return by_id[min(payload)].next_question
    if q.qtype == "textbox":
        return None
    return by_id[payload].next_question


def _completion(s: TaskSession) -> bool:
    if s.asset.mode == "Dynamic":
        return s.dynamic_terminal
    return all(
        s.poi_status[q.id] is PoiStatus.ANSWERED
        for q in s.asset.questions
        if q.mandatory
    )


def submit_answer(
    s: TaskSession,
    qid: int,
    payload,
    location: GeoPoint,
    now: int = 0,
    proof_id: Optional[str] = None,
    proof_required: bool = False,
    proof_verified: bool = False,
) -> AnswerOutcome:
    """Accept an answer for a question the participant is localized at."""
    if s.completed:
        raise SessionCompleteError(s.id)
    q = s.question(qid)
    status = s.poi_status[qid]
    if status is PoiStatus.ANSWERED:
        raise AlreadyAnsweredError(qid)
    if status is not PoiStatus.INSIDE:
        raise NotLocalizedError(qid)
    _check_payload(q, payload)
    if proof_required:
        if proof_id is None:
            raise ProofRequiredError(qid)
        if not proof_verified:
            raise ProofInvalidError(qid)

    credits = _award(q, payload, s.asset.default_credit)
    record = AnswerRecord(
        question_id=qid,
        payload=payload,
        answered_at=now,
        location=location,
        credits=credits,
        proof_id=proof_id,
    )
    s.poi_status[qid] = PoiStatus.ANSWERED
    s.entered_at.pop(qid, None)
    s.answers.append(record)
    s.credits_earned += credits

    unlocked: list[int] = []
    if s.asset.mode == "Sequential":
        ordered = sorted(s.poi_status)
        idx = ordered.index(qid)
        if idx + 1 < len(ordered):
            nxt = ordered[idx + 1]
            if s.poi_status[nxt] is PoiStatus.LOCKED:
                s.poi_status[nxt] = PoiStatus.UNLOCKED
                unlocked.append(nxt)
    elif s.asset.mode == "Dynamic":
        nxt = _selected_next(q, payload)
        if nxt is None:
            s.dynamic_terminal = True
        elif s.poi_status.get(nxt) is PoiStatus.LOCKED:
            s.poi_status[nxt] = PoiStatus.UNLOCKED
            unlocked.append(nxt)

    completed = _completion(s)
    if completed and s.completed_at is None:
        s.completed_at = now
    return AnswerOutcome(
        record=record,
        credits_awarded=credits,
        unlocked=tuple(unlocked),
        completed=completed,
    )


def unlocked_pois(s: TaskSession) -> set[int]:
    """Question ids currently visitable (unlocked or presently inside)."""
    return {
        qid
        for qid, st in s.poi_status.items()
        if st in (PoiStatus.UNLOCKED, PoiStatus.INSIDE)
    }
