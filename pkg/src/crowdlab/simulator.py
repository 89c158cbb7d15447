"""Synthetic GPS traces and scripted participants driving the service API.

The cohort runner talks to the HTTP layer only (in-process test client) and
advances a virtual clock, so a multi-minute outdoor scenario runs in
seconds and every run is reproducible from (asset, policies, traces, seed).
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .geo import GeoPoint, destination_point, haversine_distance, initial_bearing
from .sensing import SENSOR_ARITY
from .service import EventRecord, ServiceCore, create_app


class DivergenceDetectedError(Exception):
    def __init__(self, seq: int, detail: str = ""):
        self.seq = seq
        super().__init__(f"replay diverged at sequence {seq}: {detail}")


@dataclass(frozen=True)
class TraceSpec:
    waypoints: tuple[GeoPoint, ...]
    speed_mps: float
    sample_period_ms: int = 1000
    gps_noise_sigma_m: float = 0.0
    seed: int = 0
    dwell_s: float = 0.0  # loiter time at each waypoint after arrival

    def __post_init__(self) -> None:
        if len(self.waypoints) < 2:
            raise ValueError("trace needs at least 2 waypoints")
        if self.speed_mps <= 0:
            raise ValueError("speed must be positive")
        if self.gps_noise_sigma_m < 0:
            raise ValueError("noise sigma must be >= 0")


@dataclass(frozen=True)
class BehaviorPolicy:
    """Scripted answering behavior.

    answer_rules maps question id to either a fixed option id (int), a
    categorical distribution over option ids (dict id -> weight summing to
    1), or free text (str) for textbox questions.
    """

    answer_rules: dict = field(default_factory=dict)
    dwell_s: float = 0.0
    proof_tokens: dict = field(default_factory=dict)  # question id -> proof dict

    def __post_init__(self) -> None:
        for qid, rule in self.answer_rules.items():
            if isinstance(rule, dict):
                total = sum(rule.values())
                if abs(total - 1.0) > 1e-9:
                    raise ValueError(f"distribution for question {qid} sums to {total}")

    def pick(self, qid: int, rng: random.Random):
        rule = self.answer_rules.get(qid)
        if rule is None:
            return None
        if isinstance(rule, dict):
            options = sorted(rule)
            weights = [rule[o] for o in options]
            return rng.choices(options, weights=weights, k=1)[0]
        return rule


def generate_trace(spec: TraceSpec) -> list[tuple[int, GeoPoint]]:
    """Timed positions (epoch-relative ms, point): great-circle interpolation
    between waypoints at constant speed, with optional dwell at each waypoint
    and seeded Gaussian position noise in the local tangent plane."""
    rng = random.Random(spec.seed)
    # piecewise timeline: (t_start_ms, t_end_ms, from, to) with to=None for dwell
    segments: list[tuple[float, float, GeoPoint, Optional[GeoPoint]]] = []
    t = 0.0
    dwell_ms = spec.dwell_s * 1000.0
    if dwell_ms > 0:
        segments.append((t, t + dwell_ms, spec.waypoints[0], None))
        t += dwell_ms
    for a, b in zip(spec.waypoints, spec.waypoints[1:]):
        leg_ms = haversine_distance(a, b) / spec.speed_mps * 1000.0
        segments.append((t, t + leg_ms, a, b))
        t += leg_ms
        if dwell_ms > 0:
            segments.append((t, t + dwell_ms, b, None))
            t += dwell_ms
    total = t

    def position(at: float) -> GeoPoint:
        for t0, t1, a, b in segments:
            if at <= t1 or (t0, t1, a, b) == segments[-1]:
                if b is None or t1 == t0:
                    return a
                frac = min(1.0, max(0.0, (at - t0) / (t1 - t0)))
                dist = haversine_distance(a, b) * frac
                if dist == 0.0:
                    return a
                return destination_point(a, initial_bearing(a, b), dist)
        return spec.waypoints[-1]

    out: list[tuple[int, GeoPoint]] = []
    n = int(math.floor(total / spec.sample_period_ms + 1e-9))
    times = [i * spec.sample_period_ms for i in range(n + 1)]
    if times[-1] < total - 1e-6:
        times.append(total)
    for at in times:
        p = position(at)
        if spec.gps_noise_sigma_m > 0:
            de = rng.gauss(0.0, spec.gps_noise_sigma_m)
            dn = rng.gauss(0.0, spec.gps_noise_sigma_m)
            dist = math.hypot(de, dn)
            if dist > 0:
                p = destination_point(p, math.degrees(math.atan2(de, dn)) % 360.0, dist)
        out.append((int(round(at)), p))
    return out


@dataclass
class SimulationLog:
    config: dict
    task_id: str
    requests: list[dict]
    events: list[EventRecord]
    export: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config,
                "task_id": self.task_id,
                "requests": self.requests,
                "events": [json.loads(ev.to_json()) for ev in self.events],
                "export": self.export,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SimulationLog":
        d = json.loads(text)
        events = [
            EventRecord(e["seq"], e["ts"], e["actor"], e["kind"], e["payload"])
            for e in d["events"]
        ]
        return cls(d["config"], d["task_id"], d["requests"], events, d["export"])


def run_cohort(
    asset_document: str,
    policies: list[BehaviorPolicy],
    specs: list[TraceSpec],
    seed: int = 0,
    *,
    config: Optional[dict] = None,
    send_sensors: bool = False,
) -> SimulationLog:
    """Run n simulated participants through the HTTP API on a virtual clock."""
    if len(policies) != len(specs):
        raise ValueError("one policy per trace spec required")
    from fastapi.testclient import TestClient

    core = ServiceCore(rng_seed=seed)
    client = TestClient(create_app(core))
    auth = {"Authorization": f"Bearer {core.designer_token}"}
    rng = random.Random(seed)
    requests_log: list[dict] = []

    def call(method: str, url: str, **kw):
        resp = getattr(client, method)(url, **kw)
        requests_log.append({
            "method": method, "url": url, "status": resp.status_code,
            "body": resp.json() if resp.headers.get("content-type", "").startswith("application/json") else None,
        })
        return resp

    t0 = 0
    project_id = call("post", "/v1/projects",
                      json={"name": "sim", "owner": "sim", "t": t0},
                      headers=auth).json()["id"]
    task_id = call("post", f"/v1/projects/{project_id}/tasks",
                   json={"name": "run", "t": t0}, headers=auth).json()["id"]
    asset_id = call("post", f"/v1/projects/{project_id}/assets?t={t0}",
                    content=asset_document, headers=auth).json()["id"]
    assignment_id = call("post", "/v1/assignments",
                         json={"asset_id": asset_id, "task_id": task_id, "t": t0},
                         headers=auth).json()["id"]
    code = call("post", f"/v1/projects/{project_id}/codes",
                json={"t": t0}, headers=auth).json()["code"]

    sessions: list[str] = []
    for i in range(len(specs)):
        pid = call("post", "/v1/subscribe",
                   json={"code": code, "pseudonym": f"sim-{i}", "t": t0}).json()["participant_id"]
        sid = call("post", "/v1/sessions",
                   json={"participant_id": pid, "assignment_id": assignment_id,
                         "t": t0}).json()["id"]
        sessions.append(sid)

    # merged virtual-time queue of (t, participant index, point)
    queue: list[tuple[int, int, GeoPoint]] = []
    start_offset = 1000
    for i, spec in enumerate(specs):
        for t, p in generate_trace(spec):
            queue.append((t + start_offset, i, p))
    queue.sort(key=lambda item: (item[0], item[1]))

    answered: list[set[int]] = [set() for _ in specs]
    for t, i, p in queue:
        resp = call("post", f"/v1/sessions/{sessions[i]}/locations",
                    json={"lat": p.lat_deg, "lon": p.lon_deg, "t": t})
        if resp.status_code != 200:
            continue
        for ze in resp.json()["events"]:
            if ze["kind"] != "Entered":
                continue
            qid = ze["question_id"]
            if qid in answered[i]:
                continue
            choice = policies[i].pick(qid, rng)
            if choice is None:
                continue
            if send_sensors:
                _send_sensor_batch(call, core, sessions[i], qid, t)
            body = {"question_id": qid, "payload": choice,
                    "lat": p.lat_deg, "lon": p.lon_deg, "t": t}
            proof = policies[i].proof_tokens.get(qid)
            if proof is not None:
                body["proof"] = proof
            ans = call("post", f"/v1/sessions/{sessions[i]}/answers", json=body)
            if ans.status_code == 200:
                answered[i].add(qid)

    export = core.export(task_id)
    return SimulationLog(
        config=config or {}, task_id=task_id, requests=requests_log,
        events=list(core.events), export=export,
    )


def _send_sensor_batch(call, core: ServiceCore, session_id: str, qid: int, t: int) -> None:
    s = core.sessions[session_id]
    q = s.question(qid)
    records = []
    for spec in q.sensors:
        arity = SENSOR_ARITY[spec.kind]
        for k in range(4):
            records.append({
                "kind": spec.kind,
                "captured_at": t + k * 250,
                "values": [0.0] * arity,
            })
    if records:
        call("post", f"/v1/sessions/{session_id}/sensors",
             json={"records": records, "t": t})


def replay(log: SimulationLog) -> ServiceCore:
    """Re-apply a simulation log against a fresh engine and confirm the
    export is byte-equal to the recorded one."""
    core = ServiceCore.refold(log.events)
    export = core.export(log.task_id)
    if export != log.export:
        for n, (a, b) in enumerate(
            zip(export.splitlines(), log.export.splitlines()), start=1
        ):
            if a != b:
                raise DivergenceDetectedError(n, f"{b!r} != {a!r}")
        raise DivergenceDetectedError(
            min(len(export.splitlines()), len(log.export.splitlines())) + 1,
            "export length differs",
        )
    return core


# ------------------------------------------------------- scenario configs

def load_scenario(path: str | Path) -> dict:
    path = Path(path)
    config = json.loads(path.read_text(encoding="utf-8"))
    asset_file = path.parent / config["asset_file"]
    config["_asset_document"] = asset_file.read_text(encoding="utf-8")
    return config


def run_scenario(config: dict) -> SimulationLog:
    seed = config.get("seed", 0)
    policies = []
    specs = []
    for i, part in enumerate(config["participants"]):
        tr = part["trace"]
        specs.append(TraceSpec(
            waypoints=tuple(GeoPoint(lat, lon) for lat, lon in tr["waypoints"]),
            speed_mps=tr["speed_mps"],
            sample_period_ms=tr.get("sample_period_ms", 1000),
            gps_noise_sigma_m=tr.get("gps_noise_sigma_m", 0.0),
            seed=seed * 1000 + i,
            dwell_s=tr.get("dwell_s", 0.0),
        ))
        rules = {}
        for qid_str, rule in part.get("answers", {}).items():
            qid = int(qid_str)
            if "fixed" in rule:
                rules[qid] = rule["fixed"]
            elif "distribution" in rule:
                rules[qid] = {int(k): v for k, v in rule["distribution"].items()}
            elif "text" in rule:
                rules[qid] = rule["text"]
        policies.append(BehaviorPolicy(answer_rules=rules,
                                       dwell_s=part["trace"].get("dwell_s", 0.0)))
    public_config = {k: v for k, v in config.items() if not k.startswith("_")}
    return run_cohort(
        config["_asset_document"], policies, specs, seed,
        config=public_config, send_sensors=config.get("send_sensors", False),
    )
