import json

import pytest

from showrunner.backends import (
    BackendRouter,
    FlakyBackend,
    MockBackend,
    inputs_digest,
)
from showrunner.errors import BackendFailure
from showrunner.imaging import png_dimensions
from showrunner.pose import KeypointPose


class TestMockBackend:
    def test_byte_identical_outputs_for_same_inputs(self):
        mock = MockBackend()
        a = mock.invoke("STYLIZE", {"text": "t", "output_size": [512, 384]})
        b = mock.invoke("STYLIZE", {"text": "t", "output_size": [512, 384]})
        assert a == b

    def test_stylize_respects_requested_size(self):
        mock = MockBackend()
        out, _ = mock.invoke("STYLIZE", {"text": "t", "output_size": [512, 384]})
        assert png_dimensions(out) == (512, 384)

    def test_text_roles_tagged(self):
        mock = MockBackend()
        out, _ = mock.invoke("DESCRIBE", {"sketch": b"png"})
        assert out.startswith("[describe]")

    def test_poem_non_empty_multiline(self):
        mock = MockBackend()
        poem, _ = mock.invoke("POEM", {"assets": [], "moves": ["a", "b", "c"]})
        assert poem and len(poem.splitlines()) == 3

    def test_keypoints_parse_and_wild_rate(self):
        tame = MockBackend(keypoint_wild_percent=0)
        rows, _ = tame.invoke("KEYPOINT_AGENT", {"pose_text": "p"})
        KeypointPose.from_list(rows)  # validates shape and ranges
        wild = MockBackend(keypoint_wild_percent=100)
        rows_w, _ = wild.invoke("KEYPOINT_AGENT", {"pose_text": "p"})
        assert rows_w != rows

    def test_mesh_stamped_with_digest(self):
        mock = MockBackend()
        inputs = {"image": b"imagebytes"}
        obj, _ = mock.invoke("IMAGE_TO_MESH", inputs)
        assert inputs_digest(inputs) in obj

    def test_latency_derived_from_inputs_within_range(self):
        mock = MockBackend(latencies_ms={"DESCRIBE": (100, 200)})
        _, lat1 = mock.invoke("DESCRIBE", {"sketch": b"a"})
        _, lat1b = mock.invoke("DESCRIBE", {"sketch": b"a"})
        _, lat2 = mock.invoke("DESCRIBE", {"sketch": b"b"})
        assert lat1 == lat1b
        assert 100 <= lat1 <= 200 and 100 <= lat2 <= 200

    def test_unknown_role_rejected(self):
        with pytest.raises(ValueError):
            MockBackend().invoke("NOT_A_ROLE", {})

    def test_thousand_distinct_sketches_never_collide(self):
        import hashlib
        import random

        mock = MockBackend()
        rng = random.Random(12)
        digests = set()
        for _ in range(1000):
            sketch = rng.getrandbits(256).to_bytes(32, "big")
            out, _ = mock.invoke(
                "STYLIZE", {"sketch": sketch, "output_size": [32, 24]}
            )
            digests.add(hashlib.sha256(out).hexdigest())
        assert len(digests) == 1000


class TestInputsDigest:
    def test_bytes_and_nested_structures(self):
        d1 = inputs_digest({"a": b"xx", "b": [1, {"c": "y"}]})
        d2 = inputs_digest({"b": [1, {"c": "y"}], "a": b"xx"})
        assert d1 == d2
        assert d1 != inputs_digest({"a": b"xy", "b": [1, {"c": "y"}]})


class TestFlakyBackend:
    def test_failures_deterministic_per_job_and_attempt(self):
        def outcomes(seed):
            flaky = FlakyBackend(MockBackend(), seed=seed, failure_rate=0.5)
            results = []
            for attempt in range(6):
                flaky.set_context("job-1", attempt)
                try:
                    flaky.invoke("DESCRIBE", {"sketch": b"s"})
                    results.append("ok")
                except BackendFailure as exc:
                    results.append("transient" if exc.transient else "permanent")
            return results

        assert outcomes(3) == outcomes(3)
        assert "ok" in outcomes(3) or "ok" in outcomes(4)  # not everything fails

    def test_zero_rate_never_fails(self):
        flaky = FlakyBackend(MockBackend(), seed=1, failure_rate=0.0)
        for attempt in range(10):
            flaky.set_context("j", attempt)
            flaky.invoke("DESCRIBE", {"sketch": b"s"})

    def test_rate_one_always_fails(self):
        flaky = FlakyBackend(MockBackend(), seed=1, failure_rate=1.0)
        flaky.set_context("j", 0)
        with pytest.raises(BackendFailure):
            flaky.invoke("DESCRIBE", {"sketch": b"s"})


class TestRemoteBackend:
    def make(self, handler):
        import httpx

        from showrunner.backends import RemoteBackend

        return RemoteBackend("http://models.local/invoke", transport=httpx.MockTransport(handler))

    def test_round_trip_with_bytes(self):
        import base64
        import httpx

        def handler(request):
            body = json.loads(request.content)
            assert body["role"] == "STYLIZE"
            sketch = base64.b64decode(body["inputs"]["sketch"]["__b64__"])
            assert sketch == b"png-bytes"
            return httpx.Response(
                200,
                json={
                    "output": {"__b64__": base64.b64encode(b"image-out").decode()},
                    "latency_ms": 1234,
                },
            )

        remote = self.make(handler)
        out, latency = remote.invoke("STYLIZE", {"sketch": b"png-bytes", "output_size": [4, 4]})
        assert out == b"image-out" and latency == 1234

    def test_http_error_becomes_backend_failure(self):
        import httpx

        def handler(request):
            return httpx.Response(503, text="overloaded")

        remote = self.make(handler)
        with pytest.raises(BackendFailure) as err:
            remote.invoke("DESCRIBE", {"sketch": b"x"})
        assert err.value.stage == "DESCRIBE"


def test_router_dispatches_by_role():
    class Marker(MockBackend):
        backend_id = "marker"

        def invoke(self, role, inputs):
            return "marked", 1

    router = BackendRouter(MockBackend(), {"POEM": Marker()})
    poem, _ = router.invoke("POEM", {"assets": [], "moves": []})
    text, _ = router.invoke("DESCRIBE", {"sketch": b"s"})
    assert poem == "marked"
    assert text.startswith("[describe]")
