import base64
import json
import random

import pytest
import requests

from svgforge.backend import (
    BackendConfig,
    BackendRequest,
    BackendResponse,
    BackendTimeout,
    HttpBackend,
    Message,
    MockBackend,
    ProtocolError,
    RateLimited,
    RemoteError,
    ServerError,
)


def req(kind="generation", **kw):
    return BackendRequest(
        messages=(Message("user", "draw something"),), kind=kind, **kw
    )


# ---------------------------------------------------------------------------
# wire types


class TestTypes:
    def test_message_role_validated(self):
        with pytest.raises(ValueError):
            Message("robot", "hi")

    def test_request_validation(self):
        with pytest.raises(ValueError):
            BackendRequest(messages=(), kind="generation")
        with pytest.raises(ValueError):
            req(temperature=3.0)
        with pytest.raises(ValueError):
            req(max_output_tokens=0)
        with pytest.raises(ValueError):
            BackendRequest(messages=(Message("user", "x"),), kind="oracle")

    def test_single_image_limit_outside_scoring(self):
        two = (
            Message("user", "a", image_png=b"a"),
            Message("user", "b", image_png=b"b"),
        )
        with pytest.raises(ValueError):
            BackendRequest(messages=two, kind="critique")
        scoring = BackendRequest(messages=two, kind="scoring")
        assert scoring.image_count() == 2


# ---------------------------------------------------------------------------
# mock backend


class TestMockBackend:
    def test_replays_in_order_per_kind(self):
        mock = MockBackend({
            "generation": ["g0", "g1"],
            "critique": ["c0"],
        })
        assert mock.complete(req()).text == "g0"
        assert mock.complete(req("critique")).text == "c0"
        assert mock.complete(req()).text == "g1"

    def test_dict_entries_carry_usage(self):
        mock = MockBackend({"generation": [
            {"text": "hello", "usage": {"total_tokens": 7}, "latency_s": 0.5},
        ]})
        resp = mock.complete(req())
        assert resp == BackendResponse("hello", {"total_tokens": 7}, 0.5)

    def test_exhaustion_raises_protocol_error(self):
        mock = MockBackend({"generation": ["only"]})
        mock.complete(req())
        with pytest.raises(ProtocolError):
            mock.complete(req())

    def test_missing_kind_is_exhausted_immediately(self):
        mock = MockBackend({"generation": ["x"]})
        with pytest.raises(ProtocolError):
            mock.complete(req("scoring"))

    def test_scripted_errors(self):
        mock = MockBackend({"generation": [
            {"error": "timeout"},
            {"error": "rate-limited", "retry_after": 3},
            {"error": "remote", "status": 404, "message": "nope"},
            {"error": "server", "status": 503},
            {"error": "protocol"},
            "recovered",
        ]})
        with pytest.raises(BackendTimeout):
            mock.complete(req())
        with pytest.raises(RateLimited) as rl:
            mock.complete(req())
        assert rl.value.retry_after == 3
        with pytest.raises(RemoteError) as re_err:
            mock.complete(req())
        assert re_err.value.status == 404
        with pytest.raises(ServerError):
            mock.complete(req())
        with pytest.raises(ProtocolError):
            mock.complete(req())
        assert mock.complete(req()).text == "recovered"

    def test_unknown_script_key_rejected(self):
        with pytest.raises(ValueError):
            MockBackend({"generation": [], "hallucination": []})

    def test_requests_are_recorded(self):
        mock = MockBackend({"generation": ["a"], "critique": ["b"]})
        mock.complete(req())
        mock.complete(req("critique"))
        assert [r.kind for r in mock.requests] == ["generation", "critique"]

    def test_from_file(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(json.dumps({"generation": ["from disk"]}))
        mock = MockBackend.from_file(path)
        assert mock.complete(req()).text == "from disk"


# ---------------------------------------------------------------------------
# HTTP backend against a fake session


class FakeResponse:
    def __init__(self, status_code=200, payload=None, text="", headers=None):
        self.status_code = status_code
        self._payload = payload
        self.text = text
        self.headers = headers or {}

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


def ok_payload(content="the answer"):
    return {
        "choices": [{"message": {"content": content}}],
        "usage": {"total_tokens": 12},
    }


class FakeSession:
    """Yields queued responses; an exception instance is raised instead."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({
            "url": url, "json": json, "headers": headers, "timeout": timeout,
        })
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


def make_backend(outcomes, **cfg_kw):
    cfg_kw.setdefault("endpoint", "http://unit.test/v1/chat")
    cfg_kw.setdefault("model", "m-1")
    config = BackendConfig(**cfg_kw)
    session = FakeSession(outcomes)
    backend = HttpBackend(
        config, session=session, rng=random.Random(42), sleep=lambda s: None
    )
    return backend, session


class TestHttpBackend:
    def test_success_first_try(self):
        backend, session = make_backend([FakeResponse(payload=ok_payload())])
        resp = backend.complete(req())
        assert resp.text == "the answer"
        assert resp.usage == {"total_tokens": 12}
        assert len(session.calls) == 1
        assert backend.last_delays == []

    def test_request_body_shape(self):
        backend, session = make_backend([FakeResponse(payload=ok_payload())])
        request = BackendRequest(
            messages=(
                Message("system", "be terse"),
                Message("user", "look", image_png=b"\x89PNGfake"),
            ),
            temperature=0.7,
            max_output_tokens=128,
            kind="critique",
        )
        backend.complete(request)
        body = session.calls[0]["json"]
        assert body["model"] == "m-1"
        assert body["temperature"] == 0.7
        assert body["max_tokens"] == 128
        assert body["messages"][0] == {"role": "system", "content": "be terse"}
        image_part = body["messages"][1]["content"][1]
        expected = base64.b64encode(b"\x89PNGfake").decode()
        assert image_part["image_url"]["url"] == f"data:image/png;base64,{expected}"

    def test_api_key_header(self, monkeypatch):
        monkeypatch.setenv("UNIT_KEY", "sekrit")
        backend, session = make_backend(
            [FakeResponse(payload=ok_payload())], api_key_env="UNIT_KEY"
        )
        backend.complete(req())
        assert session.calls[0]["headers"]["Authorization"] == "Bearer sekrit"

    def test_no_key_no_header(self):
        backend, session = make_backend([FakeResponse(payload=ok_payload())])
        backend.complete(req())
        assert "Authorization" not in session.calls[0]["headers"]

    def test_retries_timeouts_then_succeeds(self):
        backend, session = make_backend([
            requests.Timeout("slow"),
            requests.ConnectionError("refused"),
            FakeResponse(payload=ok_payload()),
        ])
        resp = backend.complete(req())
        assert resp.text == "the answer"
        assert len(session.calls) == 3
        assert len(backend.last_delays) == 2

    def test_retries_5xx(self):
        backend, session = make_backend([
            FakeResponse(status_code=500),
            FakeResponse(status_code=503),
            FakeResponse(payload=ok_payload()),
        ])
        assert backend.complete(req()).text == "the answer"
        assert len(session.calls) == 3

    def test_gives_up_after_max_retries(self):
        backend, session = make_backend(
            [FakeResponse(status_code=500)] * 3, max_retries=2
        )
        with pytest.raises(ServerError):
            backend.complete(req())
        assert len(session.calls) == 3

    def test_4xx_not_retried(self):
        backend, session = make_backend([
            FakeResponse(status_code=400, text="bad request"),
            FakeResponse(payload=ok_payload()),
        ])
        with pytest.raises(RemoteError) as err:
            backend.complete(req())
        assert err.value.status == 400
        assert len(session.calls) == 1

    def test_backoff_schedule_with_jitter_bounds(self):
        backend, _ = make_backend(
            [FakeResponse(status_code=500)] * 4 + [FakeResponse(payload=ok_payload())],
        )
        backend.complete(req())
        assert len(backend.last_delays) == 4
        for k, delay in enumerate(backend.last_delays):
            nominal = 1.0 * (2.0 ** k)
            assert nominal * 0.8 <= delay <= nominal * 1.2

    def test_retry_after_floor(self):
        backend, _ = make_backend([
            FakeResponse(status_code=429, headers={"Retry-After": "30"}),
            FakeResponse(payload=ok_payload()),
        ])
        backend.complete(req())
        assert backend.last_delays[0] >= 30.0

    def test_malformed_payload_is_protocol_error(self):
        backend, _ = make_backend(
            [FakeResponse(payload={"unexpected": True})] * 6
        )
        with pytest.raises(ProtocolError):
            backend.complete(req())

    def test_endpoint_required(self):
        with pytest.raises(ValueError):
            HttpBackend(BackendConfig(endpoint=""), session=FakeSession([]))
