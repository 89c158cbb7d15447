import dataclasses
import json
import math
import random

import pytest

from crowdlab.geo import (
    CircleZone,
    GeoPoint,
    destination_point,
    haversine_distance,
    zone_contains,
)
from crowdlab.simulator import (
    BehaviorPolicy,
    DivergenceDetectedError,
    SimulationLog,
    TraceSpec,
    generate_trace,
    load_scenario,
    replay,
    run_cohort,
    run_scenario,
)
from conftest import make_document, make_option, make_question

START = GeoPoint(47.3700, 8.5400)


def export_section(export, name):
    """Lines of one `# name` section of a service export."""
    lines = export.splitlines()
    start = lines.index(f"# {name}") + 1
    out = []
    for ln in lines[start:]:
        if ln.startswith("# "):
            break
        out.append(ln)
    return out


def trace_spec(distance_m=100.0, **kw):
    end = destination_point(START, 0.0, distance_m)
    defaults = dict(waypoints=(START, end), speed_mps=5.0, sample_period_ms=1000)
    defaults.update(kw)
    return TraceSpec(**defaults)


class TestTraceSpecValidation:
    def test_needs_two_waypoints(self):
        with pytest.raises(ValueError):
            TraceSpec(waypoints=(START,), speed_mps=1.0)

    def test_positive_speed(self):
        with pytest.raises(ValueError):
            trace_spec(speed_mps=0.0)

    def test_nonnegative_noise(self):
        with pytest.raises(ValueError):
            trace_spec(gps_noise_sigma_m=-1.0)


class TestTraceKinematics:
    def test_point_count_and_endpoints(self):
        # 100 m at 5 m/s sampled at 1 Hz: t = 0..20 s inclusive -> 21 points
        spec = trace_spec()
        trace = generate_trace(spec)
        assert len(trace) == 21
        assert trace[0][0] == 0
        assert trace[0][1] == START
        assert haversine_distance(trace[-1][1], spec.waypoints[-1]) < 0.01

    def test_constant_speed_between_samples(self):
        trace = generate_trace(trace_spec())
        steps = [
            haversine_distance(a[1], b[1]) for a, b in zip(trace, trace[1:])
        ]
        for step in steps:
            assert step == pytest.approx(5.0, abs=0.01)

    def test_noiseless_trace_passes_through_waypoints(self):
        mid = destination_point(START, 0.0, 60.0)
        end = destination_point(mid, 90.0, 80.0)
        spec = TraceSpec(waypoints=(START, mid, end), speed_mps=2.0,
                         sample_period_ms=500)
        trace = generate_trace(spec)
        for wp in (START, mid, end):
            assert min(haversine_distance(p, wp) for _, p in trace) < 1.5

    def test_dwell_holds_position(self):
        spec = trace_spec(dwell_s=5.0)
        trace = generate_trace(spec)
        held = [p for t, p in trace if t <= 5000]
        assert len(held) == 6
        assert all(haversine_distance(p, START) < 1e-6 for p in held)

    def test_same_seed_same_trace(self):
        a = generate_trace(trace_spec(gps_noise_sigma_m=10.0, seed=3))
        b = generate_trace(trace_spec(gps_noise_sigma_m=10.0, seed=3))
        assert a == b

    def test_different_seed_different_noise(self):
        a = generate_trace(trace_spec(gps_noise_sigma_m=10.0, seed=3))
        b = generate_trace(trace_spec(gps_noise_sigma_m=10.0, seed=4))
        assert a != b

    def test_noise_magnitude_plausible(self):
        # with sigma=15 m a good fraction of samples near a 25 m zone centre
        # must fall outside it; with sigma=0 none may
        zone = CircleZone(START, 25.0)
        spec = trace_spec(distance_m=10.0, gps_noise_sigma_m=15.0, seed=9,
                          speed_mps=0.5)
        noisy = generate_trace(spec)
        outside = sum(1 for _, p in noisy if not zone_contains(zone, p))
        assert outside > 0
        clean = generate_trace(dataclasses.replace(spec, gps_noise_sigma_m=0.0))
        assert all(zone_contains(zone, p) for _, p in clean)

    def test_noise_mean_displacement_near_sigma(self):
        sigma = 15.0
        spec = trace_spec(distance_m=5.0, speed_mps=0.1, sample_period_ms=1000,
                          gps_noise_sigma_m=sigma, seed=42)
        clean = dict(generate_trace(dataclasses.replace(spec, gps_noise_sigma_m=0.0)))
        displacements = [
            haversine_distance(p, clean[t]) for t, p in generate_trace(spec)
        ]
        mean = sum(displacements) / len(displacements)
        # Rayleigh mean = sigma * sqrt(pi/2) ~ 18.8 m; allow a loose band
        assert 0.5 * sigma < mean < 2.5 * sigma


SIM_DOC = make_document([
    make_question(1, 47.3710, 8.5400,
                  options=[make_option(1, "1. low"), make_option(2, "2. high")]),
])


def one_visitor_run(seed=0, **cohort_kw):
    poi = GeoPoint(47.3710, 8.5400)
    spec = TraceSpec(waypoints=(START, poi), speed_mps=5.0,
                     sample_period_ms=2000, dwell_s=4.0)
    policy = BehaviorPolicy(answer_rules={1: 2})
    return run_cohort(SIM_DOC, [policy], [spec], seed, **cohort_kw)


class TestCohortRunner:
    def test_visitor_answers_when_localized(self):
        log = one_visitor_run()
        answers = [r for r in log.requests
                   if r["url"].endswith("/answers") and r["status"] == 200]
        assert len(answers) == 1
        recorded = [json.loads(ln) for ln in export_section(log.export, "answers")]
        assert len(recorded) == 1
        assert recorded[0]["question_id"] == 1
        assert recorded[0]["payload"] == 2

    def test_policy_count_mismatch(self):
        with pytest.raises(ValueError):
            run_cohort(SIM_DOC, [], [trace_spec()], 0)

    def test_same_seed_reproduces_byte_equal_log(self):
        assert one_visitor_run(seed=5).to_json() == one_visitor_run(seed=5).to_json()

    def test_log_roundtrips_through_json(self):
        log = one_visitor_run()
        assert SimulationLog.from_json(log.to_json()).to_json() == log.to_json()

    def test_distribution_policy_validates(self):
        with pytest.raises(ValueError):
            BehaviorPolicy(answer_rules={1: {1: 0.5, 2: 0.6}})

    def test_distribution_pick_is_seeded(self):
        policy = BehaviorPolicy(answer_rules={1: {1: 0.5, 2: 0.5}})
        picks = [policy.pick(1, random.Random(7)) for _ in range(3)]
        assert len(set(picks)) == 1


class TestReplay:
    def test_replay_matches(self):
        log = one_visitor_run()
        core = replay(log)
        assert core.export(log.task_id) == log.export

    def test_mutated_export_detected(self):
        log = one_visitor_run()
        log.export = log.export.replace('"payload":2', '"payload":1', 1)
        with pytest.raises(DivergenceDetectedError) as err:
            replay(log)
        assert err.value.seq > 0

    def test_tampered_event_detected(self):
        log = one_visitor_run()
        # flip the recorded answer; the refolded export no longer matches
        log.events = [
            dataclasses.replace(ev, payload={**ev.payload, "payload": 1})
            if ev.kind == "answer" else ev
            for ev in log.events
        ]
        with pytest.raises(DivergenceDetectedError):
            replay(log)

    def test_gap_in_event_log_rejected(self):
        from crowdlab.service import ApiError

        log = one_visitor_run()
        log.events = [ev for ev in log.events if ev.kind != "answer"]
        with pytest.raises(ApiError):
            replay(log)

    def test_empty_requests_tolerated(self):
        log = one_visitor_run()
        log.requests = []
        replay(log)  # requests are provenance only, not replayed


class TestScenarios:
    def test_load_resolves_asset(self, scenarios_dir):
        config = load_scenario(scenarios_dir / "cycling_scenario.json")
        assert '"Mode": "Sequential"' in config["_asset_document"]
        assert len(config["participants"]) == 11

    def test_cycling_scenario_all_answer(self, scenarios_dir):
        log = run_scenario(load_scenario(scenarios_dir / "cycling_scenario.json"))
        assert len(export_section(log.export, "answers")) == 11 * 4
        replay(log)

    def test_sustainability_departures_roll_back(self, scenarios_dir):
        from crowdlab.cli import _aggregation_events
        from crowdlab.service import ServiceCore

        log = run_scenario(
            load_scenario(scenarios_dir / "sustainability_scenario.json"))
        core = replay(log)
        stream = _aggregation_events(core, log.task_id)
        joins = sum(1 for ev in stream if ev[0] == "join")
        leaves = sum(1 for ev in stream if ev[0] == "leave")
        assert joins == leaves == 12  # 6 users joining twice, all depart
        assert core.aggregate(log.task_id, "count")["value"] == 0
