import pytest

from showrunner.backends import MockBackend
from showrunner.errors import GateViolation, ShowClosed, ShowOpen
from showrunner.moderation import ModerationGate
from showrunner.pipelines import PipelineContext, run_task1
from showrunner.sink import StageSink

from conftest import make_profiles, sketch


class Clock:
    def __init__(self):
        self.t = 0

    def now(self):
        return self.t


@pytest.fixture
def rig():
    clock = Clock()
    profiles = make_profiles()
    gate = ModerationGate(profiles, clock.now)
    sink = StageSink("t", clock.now, gate.release_kind)
    return clock, profiles, gate, sink


def ticketed_asset(profiles, gate, n=1):
    ctx = PipelineContext(job_id=f"j-{n}", seed=n, output_size=(320, 240))
    asset = run_task1(sketch(n), profiles[1], MockBackend(), ctx)
    ticket = gate.submit_for_review(asset, 1, "T1")
    return asset, ticket


class TestGateCheck:
    def test_approved_asset_publishes(self, rig):
        clock, profiles, gate, sink = rig
        asset, ticket = ticketed_asset(profiles, gate)
        gate.decide(ticket.ticket_id, "APPROVE", "op")
        seq = sink.publish_asset(asset, muse_id=1, substituted=False, ticket_id=ticket.ticket_id)
        assert seq == 0
        assert sink.entries[0].kind == "ASSET"
        assert sink.entries[0].detail["release"] == "APPROVED"

    def test_pending_asset_blocked(self, rig):
        clock, profiles, gate, sink = rig
        asset, _ = ticketed_asset(profiles, gate)
        with pytest.raises(GateViolation):
            sink.publish_asset(asset, 1, substituted=False)
        assert sink.entries == []

    def test_substituted_fallback_publishes(self, rig):
        clock, profiles, gate, sink = rig
        asset, ticket = ticketed_asset(profiles, gate)
        outcome = gate.decide(ticket.ticket_id, "REJECT", "op")
        seq = sink.publish_asset(
            outcome.released_asset, 1, substituted=True,
            ticket_id=ticket.ticket_id, original_asset_id=asset.asset_id,
        )
        assert sink.entries[seq].detail["substituted"] is True
        assert sink.entries[seq].detail["original_asset_id"] == asset.asset_id


class TestFeedbackAndCue:
    def test_feedback_passthrough(self, rig):
        _, _, _, sink = rig
        seq = sink.publish_feedback(0.73, "ORACLE")
        assert sink.entries[seq].detail == {"value": 0.73, "source": "ORACLE"}

    def test_feedback_clamped(self, rig):
        _, _, _, sink = rig
        sink.publish_feedback(1.7, "OVERRIDE")
        sink.publish_feedback(-0.2, "OVERRIDE")
        assert sink.entries[0].detail["value"] == 1.0
        assert sink.entries[1].detail["value"] == 0.0

    def test_cue_entry(self, rig):
        _, _, _, sink = rig
        sink.publish_cue({"selected_move_ids": ["a", "b", "c"]})
        assert sink.entries[0].kind == "CUE"


class TestLifecycleAndFingerprint:
    def test_fingerprint_requires_closed(self, rig):
        _, _, _, sink = rig
        with pytest.raises(ShowOpen):
            sink.fingerprint()
        sink.close()
        assert len(sink.fingerprint()) == 64

    def test_publish_after_close_refused(self, rig):
        _, _, _, sink = rig
        sink.close()
        with pytest.raises(ShowClosed):
            sink.publish_feedback(0.5, "ORACLE")

    def test_flipped_decision_changes_fingerprint(self, rig):
        def run(decision):
            clock = Clock()
            profiles = make_profiles()
            gate = ModerationGate(profiles, clock.now)
            sink = StageSink("t", clock.now, gate.release_kind)
            asset, ticket = ticketed_asset(profiles, gate)
            outcome = gate.decide(ticket.ticket_id, decision, "op")
            sink.publish_asset(
                outcome.released_asset, 1,
                substituted=outcome.substituted, ticket_id=ticket.ticket_id,
            )
            sink.close()
            return sink.fingerprint()

        assert run("APPROVE") != run("REJECT")

    def test_identical_runs_identical_fingerprint(self, rig):
        def run():
            clock = Clock()
            profiles = make_profiles()
            gate = ModerationGate(profiles, clock.now)
            sink = StageSink("t", clock.now, gate.release_kind)
            asset, ticket = ticketed_asset(profiles, gate)
            gate.decide(ticket.ticket_id, "APPROVE", "op")
            sink.publish_asset(asset, 1, substituted=False, ticket_id=ticket.ticket_id)
            sink.close()
            return sink.fingerprint()

        assert run() == run()


class TestBroadcast:
    def test_every_broadcast_is_a_manifest_entry_with_same_seq(self, rig):
        _, _, _, sink = rig
        sub = sink.subscribe()
        sink.publish_feedback(0.1, "ORACLE")
        sink.publish_feedback(0.2, "ORACLE")
        events = sub.drain()
        assert [e["seq"] for e in events] == [0, 1]
        assert events == [e.to_dict() for e in sink.entries]

    def test_mid_show_backfill_sees_identical_stream(self, rig):
        _, _, _, sink = rig
        early = sink.subscribe()
        for i in range(5):
            sink.publish_feedback(i / 10, "ORACLE")
        late = sink.subscribe(from_seq=2)
        sink.publish_feedback(0.9, "ORACLE")
        early_events = early.drain()
        late_events = late.drain()
        assert [e["seq"] for e in early_events] == [0, 1, 2, 3, 4, 5]
        assert [e["seq"] for e in late_events] == [2, 3, 4, 5]
        assert early_events[2:] == late_events

    def test_unsubscribe_stops_delivery(self, rig):
        _, _, _, sink = rig
        sub = sink.subscribe()
        sink.unsubscribe(sub)
        sink.publish_feedback(0.5, "ORACLE")
        assert sub.drain() == []
