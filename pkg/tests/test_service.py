import json

import pytest
from fastapi.testclient import TestClient

from crowdlab.service import EventRecord, ServiceCore, create_app, option_value
from crowdlab.asset import parse_asset
from conftest import four_poi_document, make_document, make_option, make_question

POI1 = (47.3716, 8.5386)
FAR = (47.40, 8.60)


@pytest.fixture
def core():
    return ServiceCore(rng_seed=1)


@pytest.fixture
def client(core):
    return TestClient(create_app(core))


@pytest.fixture
def auth(core):
    return {"Authorization": f"Bearer {core.designer_token}"}


def setup_experiment(client, auth, document, *, auto_assign=False, t=0):
    pid = client.post("/v1/projects",
                      json={"name": "p", "auto_assign": auto_assign, "t": t},
                      headers=auth).json()["id"]
    tid = client.post(f"/v1/projects/{pid}/tasks", json={"name": "t", "t": t},
                      headers=auth).json()["id"]
    aid = client.post(f"/v1/projects/{pid}/assets?t={t}", content=document,
                      headers=auth).json()["id"]
    if auto_assign:
        return pid, tid, aid, None
    gid = client.post("/v1/assignments",
                      json={"asset_id": aid, "task_id": tid, "t": t},
                      headers=auth).json()["id"]
    return pid, tid, aid, gid


def join_participant(client, auth, pid, gid, t=0):
    code = client.post(f"/v1/projects/{pid}/codes", json={"t": t},
                       headers=auth).json()["code"]
    uid = client.post("/v1/subscribe",
                      json={"code": code, "t": t}).json()["participant_id"]
    sid = client.post("/v1/sessions",
                      json={"participant_id": uid, "assignment_id": gid,
                            "t": t}).json()["id"]
    return uid, sid


class TestDesignerEndpoints:
    def test_unauthenticated_401(self, client):
        assert client.post("/v1/projects", json={"name": "x"}).status_code == 401

    def test_asset_upload_reference(self, client, auth, reference_document):
        pid, tid, aid, gid = setup_experiment(client, auth, reference_document)
        assert aid == "a1"

    def test_upload_reports_findings(self, client, auth):
        doc = make_document(
            [make_question(1, 47.37, 8.54,
                           options=[make_option(1, "a", next_question=9),
                                    make_option(2, "b")])],
            mode="Dynamic")
        pid = client.post("/v1/projects", json={"name": "p", "t": 0},
                          headers=auth).json()["id"]
        r = client.post(f"/v1/projects/{pid}/assets", content=doc, headers=auth)
        assert r.status_code == 201
        assert any("dangling" in f["message"] for f in r.json()["findings"])

    def test_schema_error_400_with_path(self, client, auth, reference_document):
        doc = json.loads(reference_document)
        doc["Metadata"]["record"]["SampleDataModel"][0]["Latitude"] = "95"
        pid = client.post("/v1/projects", json={"name": "p", "t": 0},
                          headers=auth).json()["id"]
        r = client.post(f"/v1/projects/{pid}/assets", content=json.dumps(doc),
                        headers=auth)
        assert r.status_code == 400
        assert "SampleDataModel[0].Latitude" in r.json()["detail"]

    def test_cross_project_assignment_409(self, client, auth, reference_document):
        p1 = client.post("/v1/projects", json={"name": "p1", "t": 0},
                         headers=auth).json()["id"]
        p2 = client.post("/v1/projects", json={"name": "p2", "t": 0},
                         headers=auth).json()["id"]
        tid = client.post(f"/v1/projects/{p1}/tasks", json={"name": "t", "t": 0},
                          headers=auth).json()["id"]
        aid = client.post(f"/v1/projects/{p2}/assets?t=0",
                          content=reference_document, headers=auth).json()["id"]
        r = client.post("/v1/assignments",
                        json={"asset_id": aid, "task_id": tid, "t": 0},
                        headers=auth)
        assert r.status_code == 409

    def test_auto_assignment_on_upload(self, core, client, auth, reference_document):
        pid = client.post("/v1/projects",
                          json={"name": "p", "auto_assign": True, "t": 0},
                          headers=auth).json()["id"]
        t1 = client.post(f"/v1/projects/{pid}/tasks", json={"name": "old", "t": 1},
                         headers=auth).json()["id"]
        t2 = client.post(f"/v1/projects/{pid}/tasks", json={"name": "new", "t": 2},
                         headers=auth).json()["id"]
        client.post(f"/v1/projects/{pid}/assets?t=3", content=reference_document,
                    headers=auth)
        assignments = list(core.assignments.values())
        assert len(assignments) == 1
        assert assignments[0].task_id == t2
        assert assignments[0].participant_ids == frozenset()


class TestParticipantEndpoints:
    def test_subscribe_with_fresh_code(self, client, auth, reference_document):
        pid, tid, aid, gid = setup_experiment(client, auth, reference_document)
        code = client.post(f"/v1/projects/{pid}/codes", json={"t": 0},
                           headers=auth).json()["code"]
        assert len(code) == 8
        r = client.post("/v1/subscribe", json={"code": code, "t": 0})
        assert r.status_code == 200
        assert "participant_id" in r.json()

    def test_invalid_code_403(self, client):
        assert client.post("/v1/subscribe",
                           json={"code": "WRONG123"}).status_code == 403

    def test_code_max_uses(self, client, auth, reference_document):
        pid, *_ = setup_experiment(client, auth, reference_document)
        code = client.post(f"/v1/projects/{pid}/codes",
                           json={"max_uses": 2, "t": 0},
                           headers=auth).json()["code"]
        assert client.post("/v1/subscribe", json={"code": code, "t": 0}).status_code == 200
        assert client.post("/v1/subscribe", json={"code": code, "t": 0}).status_code == 200
        assert client.post("/v1/subscribe", json={"code": code, "t": 0}).status_code == 403

    def test_expired_code_403(self, client, auth, reference_document):
        pid, *_ = setup_experiment(client, auth, reference_document)
        code = client.post(f"/v1/projects/{pid}/codes",
                           json={"ttl_s": 10, "t": 0},
                           headers=auth).json()["code"]
        assert client.post("/v1/subscribe",
                           json={"code": code, "t": 60_000}).status_code == 403

    def test_task_list_carries_asset_snapshot(self, client, auth, reference_document):
        pid, tid, aid, gid = setup_experiment(client, auth, reference_document)
        code = client.post(f"/v1/projects/{pid}/codes", json={"t": 0},
                           headers=auth).json()["code"]
        uid = client.post("/v1/subscribe",
                          json={"code": code, "t": 0}).json()["participant_id"]
        tasks = client.get(f"/v1/participants/{uid}/tasks").json()
        assert len(tasks) == 1
        assert tasks[0]["asset"]["Metadata"]["record"]["SampleDataModel"][0]["Vicinity"] == "25"

    def test_answer_outside_vicinity_409(self, client, auth, reference_document):
        pid, tid, aid, gid = setup_experiment(client, auth, reference_document)
        uid, sid = join_participant(client, auth, pid, gid)
        r = client.post(f"/v1/sessions/{sid}/answers",
                        json={"question_id": 1, "payload": 1,
                              "lat": FAR[0], "lon": FAR[1], "t": 1})
        assert r.status_code == 409
        assert "NotLocalized" in r.json()["detail"]

    def test_answer_inside_vicinity_awards_default_credit(
            self, client, auth, reference_document):
        pid, tid, aid, gid = setup_experiment(client, auth, reference_document)
        uid, sid = join_participant(client, auth, pid, gid)
        lat, lon = 47.3715915, 8.5386038
        client.post(f"/v1/sessions/{sid}/locations",
                    json={"lat": lat, "lon": lon, "t": 1})
        r = client.post(f"/v1/sessions/{sid}/answers",
                        json={"question_id": 1, "payload": 1,
                              "lat": lat, "lon": lon, "t": 2})
        assert r.status_code == 200
        assert r.json()["credits"] == 3

    def test_payload_mismatch_422(self, client, auth, reference_document):
        pid, tid, aid, gid = setup_experiment(client, auth, reference_document)
        uid, sid = join_participant(client, auth, pid, gid)
        lat, lon = 47.3715915, 8.5386038
        client.post(f"/v1/sessions/{sid}/locations",
                    json={"lat": lat, "lon": lon, "t": 1})
        r = client.post(f"/v1/sessions/{sid}/answers",
                        json={"question_id": 1, "payload": "text",
                              "lat": lat, "lon": lon, "t": 2})
        assert r.status_code == 422

    def test_sensor_batch_gating(self, core, client, auth):
        doc = make_document([
            make_question(1, *POI1,
                          sensors=[{"id": 1, "Name": "Gyroscope"}],
                          frequency="Medium", time="3"),
        ])
        pid, tid, aid, gid = setup_experiment(client, auth, doc)
        uid, sid = join_participant(client, auth, pid, gid)
        client.post(f"/v1/sessions/{sid}/locations",
                    json={"lat": POI1[0], "lon": POI1[1], "t": 1000})
        records = [
            {"kind": "gyroscope", "captured_at": 1000, "values": [0, 0, 0]},
            {"kind": "gyroscope", "captured_at": 1050, "values": [0, 0, 0]},  # too fast
            {"kind": "gyroscope", "captured_at": 1300, "values": [0, 0, 0]},
            {"kind": "gyroscope", "captured_at": 999_000_000, "values": [0, 0, 0]},  # expired
        ]
        r = client.post(f"/v1/sessions/{sid}/sensors",
                        json={"records": records, "t": 2000})
        assert r.json() == {"accepted": 2, "dropped": 2}


class TestAnalytics:
    def test_aggregate_unknown_fn_400(self, client, auth, reference_document):
        pid, tid, aid, gid = setup_experiment(client, auth, reference_document)
        assert client.get(f"/v1/tasks/{tid}/aggregate?fn=median").status_code == 400

    def test_aggregate_unknown_task_404(self, client):
        assert client.get("/v1/tasks/nope/aggregate?fn=avg").status_code == 404

    def test_count_zero_without_participants(self, client, auth, reference_document):
        pid, tid, aid, gid = setup_experiment(client, auth, reference_document)
        r = client.get(f"/v1/tasks/{tid}/aggregate?fn=count").json()
        assert r["value"] == 0

    def test_answer_feeds_aggregate_and_departure_rolls_back(
            self, core, client, auth):
        doc = make_document([
            make_question(1, *POI1,
                          options=[make_option(1, "0. Car"),
                                   make_option(2, "5. Walking")]),
        ])
        pid, tid, aid, gid = setup_experiment(client, auth, doc)
        uid, sid = join_participant(client, auth, pid, gid)
        client.post(f"/v1/sessions/{sid}/locations",
                    json={"lat": POI1[0], "lon": POI1[1], "t": 1})
        client.post(f"/v1/sessions/{sid}/answers",
                    json={"question_id": 1, "payload": 2,
                          "lat": POI1[0], "lon": POI1[1], "t": 2})
        r = client.get(f"/v1/tasks/{tid}/aggregate?fn=avg").json()
        assert r["value"] == 5.0  # leading number of "5. Walking"
        # departure rolls the contribution back
        client.post(f"/v1/sessions/{sid}/locations",
                    json={"lat": FAR[0], "lon": FAR[1], "t": 3})
        r = client.get(f"/v1/tasks/{tid}/aggregate?fn=count").json()
        assert r["value"] == 0

    def test_option_value_falls_back_to_position(self, reference_document):
        q = parse_asset(reference_document).questions[0]
        assert option_value(q, 1) == 1.0  # "Safe" has no leading number
        assert option_value(q, 2) == 2.0


class TestEventSourcing:
    def _run_some_traffic(self, core, client, auth, reference_document):
        pid, tid, aid, gid = setup_experiment(client, auth, reference_document)
        uid, sid = join_participant(client, auth, pid, gid)
        lat, lon = 47.3715915, 8.5386038
        client.post(f"/v1/sessions/{sid}/locations",
                    json={"lat": lat, "lon": lon, "t": 1})
        client.post(f"/v1/sessions/{sid}/answers",
                    json={"question_id": 1, "payload": 2,
                          "lat": lat, "lon": lon, "t": 2})
        return tid

    def test_refold_reproduces_export(self, core, client, auth, reference_document):
        tid = self._run_some_traffic(core, client, auth, reference_document)
        export = client.get(f"/v1/tasks/{tid}/export").text
        refolded = ServiceCore.refold(core.events)
        assert refolded.export(tid) == export

    def test_event_log_roundtrips_through_file(self, core, client, auth,
                                               reference_document, tmp_path):
        tid = self._run_some_traffic(core, client, auth, reference_document)
        path = tmp_path / "events.ndjson"
        core.save_events(path)
        events = ServiceCore.load_events(path)
        assert events == core.events
        assert ServiceCore.refold(events).export(tid) == core.export(tid)

    def test_rejected_commands_leave_no_events(self, core, client, auth,
                                               reference_document):
        pid, tid, aid, gid = setup_experiment(client, auth, reference_document)
        uid, sid = join_participant(client, auth, pid, gid)
        n = len(core.events)
        client.post(f"/v1/sessions/{sid}/answers",
                    json={"question_id": 1, "payload": 1,
                          "lat": FAR[0], "lon": FAR[1], "t": 1})
        assert len(core.events) == n

    def test_sequence_numbers_contiguous(self, core, client, auth,
                                         reference_document):
        self._run_some_traffic(core, client, auth, reference_document)
        assert [ev.seq for ev in core.events] == list(range(1, len(core.events) + 1))


class TestProofFlow:
    def test_answer_with_token_proof(self, core, client, auth, reference_document):
        pid, tid, aid, gid = setup_experiment(client, auth, reference_document)
        client.post(f"/v1/assets/{aid}/proof-policy",
                    json={"kind": "mandatory", "t": 0}, headers=auth)
        ch = client.post(f"/v1/assets/{aid}/challenges",
                         json={"question_id": 1, "kind": "QrToken",
                               "ttl_s": 3600, "t": 0}, headers=auth).json()
        uid, sid = join_participant(client, auth, pid, gid)
        lat, lon = 47.3715915, 8.5386038
        client.post(f"/v1/sessions/{sid}/locations",
                    json={"lat": lat, "lon": lon, "t": 1})
        # without proof: 403
        r = client.post(f"/v1/sessions/{sid}/answers",
                        json={"question_id": 1, "payload": 1,
                              "lat": lat, "lon": lon, "t": 2})
        assert r.status_code == 403
        # with valid token: accepted
        r = client.post(f"/v1/sessions/{sid}/answers",
                        json={"question_id": 1, "payload": 1,
                              "lat": lat, "lon": lon, "t": 3,
                              "proof": {"challenge_id": ch["id"],
                                        "response": ch["payload"]}})
        assert r.status_code == 200
        record = core.sessions[sid].answers[0]
        assert record.proof_id == ch["id"]

    def test_tampered_token_403(self, core, client, auth, reference_document):
        pid, tid, aid, gid = setup_experiment(client, auth, reference_document)
        client.post(f"/v1/assets/{aid}/proof-policy",
                    json={"kind": "mandatory", "t": 0}, headers=auth)
        ch = client.post(f"/v1/assets/{aid}/challenges",
                         json={"question_id": 1, "kind": "QrToken",
                               "ttl_s": 3600, "t": 0}, headers=auth).json()
        uid, sid = join_participant(client, auth, pid, gid)
        lat, lon = 47.3715915, 8.5386038
        client.post(f"/v1/sessions/{sid}/locations",
                    json={"lat": lat, "lon": lon, "t": 1})
        token = ch["payload"]
        bad = ("A" if token[0] != "A" else "B") + token[1:]
        r = client.post(f"/v1/sessions/{sid}/answers",
                        json={"question_id": 1, "payload": 1,
                              "lat": lat, "lon": lon, "t": 2,
                              "proof": {"challenge_id": ch["id"],
                                        "response": bad}})
        assert r.status_code == 403
        assert core.sessions[sid].answers == []
