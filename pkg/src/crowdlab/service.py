"""Event-sourced service core and HTTP API.

All state mutations funnel through a single append-only event log; the
in-memory state is the fold of that log, so replaying the log from empty
reproduces the service state exactly (and byte-equal exports). Commands
validate against current state, append one event, and apply it; the apply
functions are deterministic and never consult wall-clock time or RNG —
timestamps, ids that need entropy, codes and nonces are resolved at command
time and stored in the event payload.
"""

from __future__ import annotations

import json
import random
import re
import string
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from fastapi import FastAPI, Header, HTTPException, Request
from fastapi.responses import PlainTextResponse

from . import modality
from .aggregation import EMPTY, AggregateState
from .asset import (
    Asset,
    AssetRangeError,
    AssetSchemaError,
    AssetSyntaxError,
    Assignment,
    Participant,
    Project,
    Task,
    parse_asset,
    validate_asset,
)
from .geo import GeoPoint, zone_contains
from .modality import (
    AlreadyAnsweredError,
    NotEnrolledError,
    NotLocalizedError,
    PayloadMismatchError,
    PoiStatus,
    ProofInvalidError,
    ProofRequiredError,
    SessionCompleteError,
    TaskSession,
    question_zone,
)
from .presence import (
    AlreadyUsedError,
    Challenge,
    PresenceVerifier,
    ProofPolicy,
    Verdict,
    require_proof,
)
from .sensing import SampleGate, SensorSample, plans_for_question

AGGREGATE_FNS = ("sum", "avg", "max", "min", "count")


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        self.status = status
        self.message = message
        super().__init__(message)


@dataclass(frozen=True)
class EventRecord:
    seq: int
    ts: int
    actor: str
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "ts": self.ts,
                "actor": self.actor,
                "kind": self.kind,
                "payload": self.payload,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "EventRecord":
        d = json.loads(line)
        return cls(d["seq"], d["ts"], d["actor"], d["kind"], d["payload"])


@dataclass
class AccessCode:
    code: str
    project_id: str
    max_uses: Optional[int]
    expires_at: Optional[int]
    uses: int = 0


_LEADING_INT = re.compile(r"^\s*(\d+)")


def option_value(question, option_id: int) -> float:
    """Numeric value a selected option contributes to localized aggregates:
    the leading number in the option name when present (e.g. "0. Car"),
    otherwise the option's 1-based position on the scale."""
    ordered = sorted(question.options, key=lambda o: o.id)
    for pos, o in enumerate(ordered, start=1):
        if o.id == option_id:
            m = _LEADING_INT.match(o.name)
            return float(m.group(1)) if m else float(pos)
    raise KeyError(option_id)


class ServiceCore:
    """Deterministic, event-sourced engine behind the HTTP API."""

    def __init__(
        self,
        designer_token: str = "designer-token",
        secret: bytes = b"crowdlab-dev-secret",
        clock: Optional[Callable[[], int]] = None,
        rng_seed: int = 0,
    ):
        self.designer_token = designer_token
        self.secret = secret
        self.clock = clock or (lambda: int(time.time() * 1000))
        self._rng = random.Random(rng_seed)
        self._lock = threading.RLock()

        self.events: list[EventRecord] = []
        self.projects: dict[str, Project] = {}
        self.tasks: dict[str, Task] = {}
        self.assets: dict[str, Asset] = {}
        self.asset_documents: dict[str, str] = {}
        self.asset_project: dict[str, str] = {}
        self.assignments: dict[str, Assignment] = {}
        self.participants: dict[str, Participant] = {}
        self.codes: dict[str, AccessCode] = {}
        self.sessions: dict[str, TaskSession] = {}
        self.session_assignment: dict[str, str] = {}
        self.aggregates: dict[str, AggregateState] = {}
        self.contributed_question: dict[tuple[str, str], tuple[int, float]] = {}
        self.proof_policies: dict[str, ProofPolicy] = {}
        self.challenges: dict[str, Challenge] = {}
        self.verifier = PresenceVerifier(secret)
        self.gate = SampleGate()
        self.accepted_samples: list[dict] = []
        self.answer_log: list[dict] = []
        self._counters: dict[str, int] = {}

    # ------------------------------------------------------------------ ids

    def _next_id(self, prefix: str) -> str:
        n = self._counters.get(prefix, 0) + 1
        self._counters[prefix] = n
        return f"{prefix}{n}"

    # ------------------------------------------------------ event machinery

    def _append(self, kind: str, payload: dict, actor: str, ts: Optional[int]) -> EventRecord:
        with self._lock:
            ev = EventRecord(
                seq=len(self.events) + 1,
                ts=ts if ts is not None else self.clock(),
                actor=actor,
                kind=kind,
                payload=payload,
            )
            self.events.append(ev)
            try:
                self._apply(ev)
            except Exception:
                self.events.pop()
                raise
            return ev

    def _apply(self, ev: EventRecord) -> None:
        getattr(self, f"_apply_{ev.kind}")(ev)

    @classmethod
    def refold(cls, events: list[EventRecord], **kwargs) -> "ServiceCore":
        """Rebuild a service state by replaying an event log from empty."""
        core = cls(**kwargs)
        for ev in events:
            if ev.seq != len(core.events) + 1:
                raise ApiError(400, f"non-contiguous event sequence at {ev.seq}")
            core.events.append(ev)
            core._apply(ev)
        return core

    def save_events(self, path: str | Path) -> None:
        Path(path).write_text(
            "".join(ev.to_json() + "\n" for ev in self.events), encoding="utf-8"
        )

    @classmethod
    def load_events(cls, path: str | Path) -> list[EventRecord]:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return [EventRecord.from_json(line) for line in lines if line.strip()]

    # -------------------------------------------------------- designer side

    def create_project(self, name: str, owner: str, auto_assign: bool = False,
                       ts: Optional[int] = None) -> str:
        if not name:
            raise ApiError(400, "project name must be non-empty")
        pid = self._next_id("p")
        ev_ts = ts if ts is not None else self.clock()
        self._append("project_created",
                     {"id": pid, "name": name, "owner": owner,
                      "auto_assign": auto_assign}, owner, ev_ts)
        return pid

    def _apply_project_created(self, ev: EventRecord) -> None:
        p = ev.payload
        self.projects[p["id"]] = Project(
            id=p["id"], name=p["name"], owner=p["owner"],
            auto_assign=p["auto_assign"], created_at=ev.ts,
        )

    def create_task(self, project_id: str, name: str, ts: Optional[int] = None) -> str:
        if project_id not in self.projects:
            raise ApiError(404, f"unknown project {project_id}")
        tid = self._next_id("t")
        self._append("task_created", {"id": tid, "project_id": project_id,
                                      "name": name}, "designer", ts)
        return tid

    def _apply_task_created(self, ev: EventRecord) -> None:
        p = ev.payload
        self.tasks[p["id"]] = Task(
            id=p["id"], project_id=p["project_id"], name=p["name"],
            created_at=ev.ts, status="Active",
        )
        self.aggregates.setdefault(p["id"], AggregateState(p["id"]))

    def upload_asset(self, project_id: str, document: str,
                     ts: Optional[int] = None,
                     zone_shape: str = "circle") -> tuple[str, list[dict]]:
        if project_id not in self.projects:
            raise ApiError(404, f"unknown project {project_id}")
        try:
            asset = parse_asset(document)
        except AssetSyntaxError as e:
            raise ApiError(400, f"SyntaxError: {e}") from e
        except (AssetSchemaError, AssetRangeError) as e:
            raise ApiError(400, str(e)) from e
        report = validate_asset(asset)
        aid = self._next_id("a")
        self._append("asset_uploaded",
                     {"id": aid, "project_id": project_id, "document": document,
                      "zone_shape": zone_shape}, "designer", ts)
        project = self.projects[project_id]
        if project.auto_assign:
            tasks = [t for t in self.tasks.values() if t.project_id == project_id]
            if tasks:
                latest = max(tasks, key=lambda t: (t.created_at, t.id))
                gid = self._next_id("g")
                self._append("assignment_created",
                             {"id": gid, "asset_id": aid, "task_id": latest.id,
                              "participant_ids": [], "auto": True}, "designer", ts)
        return aid, [{"path": f.path, "message": f.message} for f in report.findings]

    def _apply_asset_uploaded(self, ev: EventRecord) -> None:
        p = ev.payload
        asset = parse_asset(p["document"])
        if p.get("zone_shape", "circle") != "circle":
            from dataclasses import replace
            asset = replace(asset, zone_shape=p["zone_shape"])
        self.assets[p["id"]] = asset
        self.asset_documents[p["id"]] = p["document"]
        self.asset_project[p["id"]] = p["project_id"]

    def create_assignment(self, asset_id: str, task_id: str,
                          participant_ids: Optional[list[str]] = None,
                          ts: Optional[int] = None) -> str:
        if asset_id not in self.assets:
            raise ApiError(404, f"unknown asset {asset_id}")
        if task_id not in self.tasks:
            raise ApiError(404, f"unknown task {task_id}")
        if self.asset_project[asset_id] != self.tasks[task_id].project_id:
            raise ApiError(409, "asset and task belong to different projects")
        gid = self._next_id("g")
        self._append("assignment_created",
                     {"id": gid, "asset_id": asset_id, "task_id": task_id,
                      "participant_ids": sorted(participant_ids or []),
                      "auto": False}, "designer", ts)
        return gid

    def _apply_assignment_created(self, ev: EventRecord) -> None:
        p = ev.payload
        self.assignments[p["id"]] = Assignment(
            id=p["id"], asset_id=p["asset_id"], task_id=p["task_id"],
            participant_ids=frozenset(p["participant_ids"]), created_at=ev.ts,
        )

    def create_access_code(self, project_id: str, max_uses: Optional[int] = None,
                           ttl_s: Optional[float] = None,
                           ts: Optional[int] = None) -> str:
        if project_id not in self.projects:
            raise ApiError(404, f"unknown project {project_id}")
        code = "".join(
            self._rng.choices(string.ascii_uppercase + string.digits, k=8)
        )
        now = ts if ts is not None else self.clock()
        expires_at = now + int(ttl_s * 1000) if ttl_s is not None else None
        self._append("code_created",
                     {"code": code, "project_id": project_id,
                      "max_uses": max_uses, "expires_at": expires_at},
                     "designer", now)
        return code

    def _apply_code_created(self, ev: EventRecord) -> None:
        p = ev.payload
        self.codes[p["code"]] = AccessCode(
            code=p["code"], project_id=p["project_id"],
            max_uses=p["max_uses"], expires_at=p["expires_at"],
        )

    def set_proof_policy(self, asset_id: str, kind: str,
                         question_ids: Optional[list[int]] = None,
                         ts: Optional[int] = None) -> None:
        if asset_id not in self.assets:
            raise ApiError(404, f"unknown asset {asset_id}")
        if kind not in ("none", "mandatory", "listed"):
            raise ApiError(400, f"unknown proof policy kind {kind!r}")
        self._append("proof_policy_set",
                     {"asset_id": asset_id, "kind": kind,
                      "question_ids": sorted(question_ids or [])}, "designer", ts)

    def _apply_proof_policy_set(self, ev: EventRecord) -> None:
        p = ev.payload
        self.proof_policies[p["asset_id"]] = ProofPolicy(
            kind=p["kind"], question_ids=frozenset(p["question_ids"])
        )

    def issue_challenge(self, asset_id: str, question_id: int, kind: str,
                        ttl_s: float, payload: Any = None,
                        ts: Optional[int] = None) -> dict:
        asset = self.assets.get(asset_id)
        if asset is None:
            raise ApiError(404, f"unknown asset {asset_id}")
        if question_id not in {q.id for q in asset.questions}:
            raise ApiError(404, f"unknown question {question_id}")
        now = ts if ts is not None else self.clock()
        ch = self.verifier.issue_challenge(question_id, kind, ttl_s, now,
                                           payload=payload)
        self._append("challenge_issued",
                     {"id": ch.id, "asset_id": asset_id,
                      "question_id": ch.question_id, "kind": ch.kind,
                      "payload": ch.payload if isinstance(ch.payload, (str, dict, type(None))) else str(ch.payload),
                      "expires_at": ch.expires_at}, "designer", now)
        return {"id": ch.id, "kind": ch.kind, "payload": ch.payload,
                "expires_at": ch.expires_at}

    def _apply_challenge_issued(self, ev: EventRecord) -> None:
        p = ev.payload
        payload = p["payload"]
        if isinstance(payload, dict) and "accepted" in payload:
            payload = {"prompt": payload.get("prompt", ""),
                       "accepted": set(payload["accepted"])}
        self.challenges[p["id"]] = Challenge(
            id=p["id"], question_id=p["question_id"], kind=p["kind"],
            payload=payload, expires_at=p["expires_at"],
        )

    # ----------------------------------------------------- participant side

    def subscribe(self, code: str, pseudonym: str = "",
                  ts: Optional[int] = None) -> str:
        ac = self.codes.get(code)
        now = ts if ts is not None else self.clock()
        if ac is None:
            raise ApiError(403, "invalid access code")
        if ac.expires_at is not None and now > ac.expires_at:
            raise ApiError(403, "expired access code")
        if ac.max_uses is not None and ac.uses >= ac.max_uses:
            raise ApiError(403, "access code exhausted")
        pid = self._next_id("u")
        self._append("subscribed",
                     {"participant_id": pid, "code": code,
                      "pseudonym": pseudonym or pid,
                      "project_id": ac.project_id}, pid, now)
        return pid

    def _apply_subscribed(self, ev: EventRecord) -> None:
        p = ev.payload
        code = self.codes[p["code"]]
        code.uses += 1
        self.participants[p["participant_id"]] = Participant(
            id=p["participant_id"], pseudonym=p["pseudonym"],
            enrolled_projects=frozenset({p["project_id"]}),
        )

    def list_tasks(self, participant_id: str) -> list[dict]:
        participant = self.participants.get(participant_id)
        if participant is None:
            raise ApiError(404, f"unknown participant {participant_id}")
        out = []
        for g in sorted(self.assignments.values(), key=lambda g: g.id):
            task = self.tasks[g.task_id]
            if task.project_id not in participant.enrolled_projects:
                continue
            if g.participant_ids and participant_id not in g.participant_ids:
                continue
            out.append({
                "assignment_id": g.id,
                "task_id": task.id,
                "task_name": task.name,
                "asset_id": g.asset_id,
                "asset": json.loads(self.asset_documents[g.asset_id]),
            })
        return out

    def start_session(self, participant_id: str, assignment_id: str,
                      ts: Optional[int] = None) -> str:
        participant = self.participants.get(participant_id)
        if participant is None:
            raise ApiError(404, f"unknown participant {participant_id}")
        g = self.assignments.get(assignment_id)
        if g is None:
            raise ApiError(404, f"unknown assignment {assignment_id}")
        task = self.tasks[g.task_id]
        if task.project_id not in participant.enrolled_projects:
            raise ApiError(403, "participant not enrolled in this project")
        sid = self._next_id("s")
        try:
            self._append("session_started",
                         {"session_id": sid, "participant_id": participant_id,
                          "assignment_id": assignment_id}, participant_id, ts)
        except NotEnrolledError as e:
            raise ApiError(403, f"not enrolled: {e}") from e
        return sid

    def _apply_session_started(self, ev: EventRecord) -> None:
        p = ev.payload
        g = self.assignments[p["assignment_id"]]
        task = self.tasks[g.task_id]
        session = modality.start_session(
            g, self.participants[p["participant_id"]], self.assets[g.asset_id],
            session_id=p["session_id"], now=ev.ts, task_status=task.status,
        )
        self.sessions[p["session_id"]] = session
        self.session_assignment[p["session_id"]] = g.id

    def _session(self, session_id: str) -> TaskSession:
        s = self.sessions.get(session_id)
        if s is None:
            raise ApiError(404, f"unknown session {session_id}")
        return s

    def _task_of_session(self, session_id: str) -> str:
        g = self.assignments[self.session_assignment[session_id]]
        return g.task_id

    def post_location(self, session_id: str, lat: float, lon: float,
                      ts: Optional[int] = None) -> list[dict]:
        s = self._session(session_id)
        try:
            GeoPoint(lat, lon)
        except ValueError as e:
            raise ApiError(400, str(e)) from e
        now = ts if ts is not None else self.clock()
        before = dict(s.poi_status)
        ev = self._append("location",
                          {"session_id": session_id, "lat": lat, "lon": lon},
                          s.participant_id, now)
        events = []
        for qid in sorted(s.poi_status):
            old, new = before.get(qid), s.poi_status[qid]
            if old is PoiStatus.UNLOCKED and new is PoiStatus.INSIDE:
                events.append({"kind": "Entered", "question_id": qid, "at": ev.ts})
            elif old is PoiStatus.INSIDE and new is PoiStatus.UNLOCKED:
                events.append({"kind": "Left", "question_id": qid, "at": ev.ts})
        return events

    def _apply_location(self, ev: EventRecord) -> None:
        p = ev.payload
        s = self.sessions[p["session_id"]]
        point = GeoPoint(p["lat"], p["lon"])
        # completed sessions accept no further zone transitions, but their
        # position still drives localized-aggregation rollback below
        if not s.completed:
            modality.on_location_update(s, point, ev.ts)
        # rollback contract: a participant's contribution counts only while
        # they are localized at the point of interest they shared it at
        task_id = self._task_of_session(p["session_id"])
        contributed = self.contributed_question.get((task_id, s.participant_id))
        if contributed is None:
            return
        qid, value = contributed
        agg = self.aggregates[task_id]
        inside = zone_contains(question_zone(s.asset, qid), point)
        if not inside and agg.is_live(s.participant_id):
            agg.leave(s.participant_id)
        elif inside and not agg.is_live(s.participant_id):
            agg.join(s.participant_id, value)

    def post_answer(self, session_id: str, question_id: int, payload: Any,
                    lat: float, lon: float, proof: Optional[dict] = None,
                    ts: Optional[int] = None) -> dict:
        s = self._session(session_id)
        if isinstance(payload, list):
            payload = [int(v) for v in payload]
        now = ts if ts is not None else self.clock()
        try:
            self._append("answer",
                         {"session_id": session_id, "question_id": question_id,
                          "payload": payload, "lat": lat, "lon": lon,
                          "proof": proof}, s.participant_id, now)
        except NotLocalizedError as e:
            raise ApiError(409, f"NotLocalized: question {e}") from e
        except AlreadyAnsweredError as e:
            raise ApiError(409, f"AlreadyAnswered: question {e}") from e
        except PayloadMismatchError as e:
            raise ApiError(422, f"PayloadMismatch: {e}") from e
        except ProofRequiredError as e:
            raise ApiError(403, f"ProofRequired: question {e}") from e
        except ProofInvalidError as e:
            raise ApiError(403, f"ProofInvalid: question {e}") from e
        except AlreadyUsedError as e:
            raise ApiError(403, f"ProofAlreadyUsed: {e}") from e
        except SessionCompleteError as e:
            raise ApiError(409, f"SessionComplete: {e}") from e
        except KeyError as e:
            raise ApiError(404, f"unknown question {e}") from e
        record = s.answers[-1]
        return {"credits": record.credits,
                "credits_total": s.credits_earned,
                "completed": s.completed}

    def _apply_answer(self, ev: EventRecord) -> None:
        p = ev.payload
        s = self.sessions[p["session_id"]]
        qid = p["question_id"]
        q = s.question(qid)
        g = self.assignments[self.session_assignment[p["session_id"]]]
        policy = self.proof_policies.get(g.asset_id, ProofPolicy())
        needed = require_proof(q, policy)

        # pre-checks before any mutation (incl. nonce consumption)
        if s.completed:
            raise SessionCompleteError(s.id)
        status = s.poi_status[qid]
        if status is PoiStatus.ANSWERED:
            raise AlreadyAnsweredError(qid)
        if status is not PoiStatus.INSIDE:
            raise NotLocalizedError(qid)
        modality._check_payload(q, p["payload"])

        proof = p.get("proof")
        proof_id = None
        verified = False
        if needed:
            if not proof:
                raise ProofRequiredError(qid)
            ch = self.challenges.get(proof.get("challenge_id", ""))
            if ch is None or ch.question_id != qid:
                raise ProofInvalidError(qid)
            verdict = self.verifier.verify(ch, proof.get("response", ""), ev.ts)
            if verdict is not Verdict.VERIFIED:
                raise ProofInvalidError(qid)
            proof_id = ch.id
            verified = True

        outcome = modality.submit_answer(
            s, qid, p["payload"], GeoPoint(p["lat"], p["lon"]), now=ev.ts,
            proof_id=proof_id, proof_required=needed, proof_verified=verified,
        )

        task_id = self._task_of_session(p["session_id"])
        self.answer_log.append({
            "seq": ev.seq, "task_id": task_id, "session_id": p["session_id"],
            "participant_id": s.participant_id, "question_id": qid,
            "payload": p["payload"], "lat": p["lat"], "lon": p["lon"],
            "credits": outcome.credits_awarded, "ts": ev.ts,
        })
        # numeric answers feed the localized aggregate
        if q.qtype in ("radio", "likert"):
            value = option_value(q, p["payload"])
            agg = self.aggregates[task_id]
            if agg.is_live(s.participant_id):
                agg.update(s.participant_id, value)
            else:
                agg.join(s.participant_id, value)
            self.contributed_question[(task_id, s.participant_id)] = (qid, value)

    def post_sensors(self, session_id: str, records: list[dict],
                     ts: Optional[int] = None) -> dict:
        s = self._session(session_id)
        before = len(self.accepted_samples)
        self._append("sensors", {"session_id": session_id, "records": records},
                     s.participant_id, ts)
        accepted = len(self.accepted_samples) - before
        return {"accepted": accepted, "dropped": len(records) - accepted}

    def _apply_sensors(self, ev: EventRecord) -> None:
        p = ev.payload
        s = self.sessions[p["session_id"]]
        asset = s.asset
        task_id = self._task_of_session(p["session_id"])
        by_id = {q.id: q for q in asset.questions}
        for rec in p["records"]:
            kind = rec["kind"]
            loc = None
            if rec.get("lat") is not None and rec.get("lon") is not None:
                loc = GeoPoint(rec["lat"], rec["lon"])
            sample = SensorSample(
                session_id=p["session_id"], kind=kind,
                captured_at=int(rec["captured_at"]),
                values=tuple(float(v) for v in rec["values"]),
                location=loc,
            )
            # gate against the plan of an inside question carrying this sensor
            for qid in sorted(s.poi_status):
                if s.poi_status[qid] is not PoiStatus.INSIDE:
                    continue
                q = by_id[qid]
                plans = [
                    pl for pl in plans_for_question(q, question_zone(asset, qid))
                    if pl.kind == kind
                ]
                if not plans:
                    continue
                decision = self.gate.offer(plans[0], s, sample, s.entered_at[qid])
                if decision.accepted:
                    self.accepted_samples.append({
                        "seq": ev.seq, "task_id": task_id,
                        "session_id": p["session_id"], "question_id": qid,
                        "kind": kind, "captured_at": sample.captured_at,
                        "values": list(sample.values), "ts": ev.ts,
                    })
                break

    # ------------------------------------------------------------ analytics

    def aggregate(self, task_id: str, fn: str) -> dict:
        if task_id not in self.tasks:
            raise ApiError(404, f"unknown task {task_id}")
        if fn not in AGGREGATE_FNS:
            raise ApiError(400, f"unknown aggregate function {fn!r}")
        agg = self.aggregates[task_id]
        value = agg.read(fn)
        return {
            "fn": fn,
            "value": None if value is EMPTY else value,
            "count": agg.read("count"),
            "updated_at": self.events[-1].ts if self.events else 0,
        }

    def export(self, task_id: str) -> str:
        """Deterministic newline-delimited export: answers and accepted
        sensor samples for the task, then the full event log."""
        if task_id not in self.tasks:
            raise ApiError(404, f"unknown task {task_id}")
        lines = ["# answers"]
        for a in self.answer_log:
            if a["task_id"] == task_id:
                lines.append(json.dumps(a, sort_keys=True, separators=(",", ":")))
        lines.append("# sensors")
        for rec in self.accepted_samples:
            if rec["task_id"] == task_id:
                lines.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))
        lines.append("# events")
        for ev in self.events:
            lines.append(ev.to_json())
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------- HTTP layer

def create_app(core: Optional[ServiceCore] = None):
    """FastAPI application exposing the /v1 REST surface over a ServiceCore."""
    core = core or ServiceCore()
    app = FastAPI(title="crowdlab", version="0.1.0")
    app.state.core = core

    def designer(authorization: Optional[str]) -> None:
        if authorization != f"Bearer {core.designer_token}":
            raise HTTPException(401, "designer token required")

    def run(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ApiError as e:
            raise HTTPException(e.status, e.message) from e

    @app.post("/v1/projects", status_code=201)
    async def create_project(body: dict, authorization: Optional[str] = Header(None)):
        designer(authorization)
        pid = run(core.create_project, body["name"], body.get("owner", "designer"),
                  body.get("auto_assign", False), body.get("t"))
        return {"id": pid}

    @app.post("/v1/projects/{project_id}/assets", status_code=201)
    async def upload_asset(project_id: str, request: Request,
                           authorization: Optional[str] = Header(None)):
        designer(authorization)
        document = (await request.body()).decode("utf-8")
        t = request.query_params.get("t")
        zone_shape = request.query_params.get("zone_shape", "circle")
        aid, findings = run(core.upload_asset, project_id, document,
                            int(t) if t else None, zone_shape)
        return {"id": aid, "findings": findings}

    @app.post("/v1/projects/{project_id}/tasks", status_code=201)
    async def create_task(project_id: str, body: dict,
                          authorization: Optional[str] = Header(None)):
        designer(authorization)
        tid = run(core.create_task, project_id, body.get("name", ""), body.get("t"))
        return {"id": tid}

    @app.post("/v1/projects/{project_id}/codes", status_code=201)
    async def create_code(project_id: str, body: dict,
                          authorization: Optional[str] = Header(None)):
        designer(authorization)
        code = run(core.create_access_code, project_id, body.get("max_uses"),
                   body.get("ttl_s"), body.get("t"))
        return {"code": code}

    @app.post("/v1/assignments", status_code=201)
    async def create_assignment(body: dict,
                                authorization: Optional[str] = Header(None)):
        designer(authorization)
        gid = run(core.create_assignment, body["asset_id"], body["task_id"],
                  body.get("participant_ids"), body.get("t"))
        return {"id": gid}

    @app.post("/v1/assets/{asset_id}/proof-policy")
    async def set_proof_policy(asset_id: str, body: dict,
                               authorization: Optional[str] = Header(None)):
        designer(authorization)
        run(core.set_proof_policy, asset_id, body["kind"],
            body.get("question_ids"), body.get("t"))
        return {"ok": True}

    @app.post("/v1/assets/{asset_id}/challenges", status_code=201)
    async def issue_challenge(asset_id: str, body: dict,
                              authorization: Optional[str] = Header(None)):
        designer(authorization)
        return run(core.issue_challenge, asset_id, body["question_id"],
                   body["kind"], body.get("ttl_s", 3600),
                   body.get("payload"), body.get("t"))

    @app.post("/v1/subscribe")
    async def subscribe(body: dict):
        pid = run(core.subscribe, body.get("code", ""),
                  body.get("pseudonym", ""), body.get("t"))
        return {"participant_id": pid}

    @app.get("/v1/participants/{participant_id}/tasks")
    async def list_tasks(participant_id: str):
        return run(core.list_tasks, participant_id)

    @app.post("/v1/sessions", status_code=201)
    async def start_session(body: dict):
        sid = run(core.start_session, body["participant_id"],
                  body["assignment_id"], body.get("t"))
        return {"id": sid}

    @app.post("/v1/sessions/{session_id}/locations")
    async def post_location(session_id: str, body: dict):
        events = run(core.post_location, session_id, body["lat"], body["lon"],
                     body.get("t"))
        return {"events": events}

    @app.post("/v1/sessions/{session_id}/answers")
    async def post_answer(session_id: str, body: dict):
        return run(core.post_answer, session_id, body["question_id"],
                   body["payload"], body["lat"], body["lon"],
                   body.get("proof"), body.get("t"))

    @app.post("/v1/sessions/{session_id}/sensors")
    async def post_sensors(session_id: str, body: dict):
        return run(core.post_sensors, session_id, body.get("records", []),
                   body.get("t"))

    @app.get("/v1/tasks/{task_id}/aggregate")
    async def aggregate(task_id: str, fn: str):
        return run(core.aggregate, task_id, fn)

    @app.get("/v1/tasks/{task_id}/export")
    async def export(task_id: str):
        return PlainTextResponse(run(core.export, task_id))

    @app.get("/v1/tasks/{task_id}/sessions")
    async def task_sessions(task_id: str):
        if task_id not in core.tasks:
            raise HTTPException(404, f"unknown task {task_id}")
        out = []
        for sid, g_id in sorted(core.session_assignment.items()):
            if core.assignments[g_id].task_id != task_id:
                continue
            s = core.sessions[sid]
            out.append({
                "session_id": sid,
                "participant_id": s.participant_id,
                "statuses": {str(q): st.value for q, st in sorted(s.poi_status.items())},
                "credits": s.credits_earned,
                "completed": s.completed,
            })
        return out

    return app
