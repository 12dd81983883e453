import json

import httpx
import pytest

from tplscout.backends import build_backends, replay_backends
from tplscout.backends.base import ChatRequest, ChatResponse, FetchResult, TransientError, digest, with_retries
from tplscout.backends.cassette import (
    Cassette,
    RecordingFetch,
    RecordingLlm,
    RecordingSearch,
    ReplayFetch,
    ReplayLlm,
    ReplaySearch,
)
from tplscout.backends.htmltext import TRUNCATION_MARKER, cap_text, html_to_text
from tplscout.backends.live import HttpFetcher, JsonApiSearch, OpenAIChat
from tplscout.errors import ConfigError, ProviderError, ReplayMiss, SearchProviderError
from tplscout.fixtures import cassette_path, data_path
from tplscout.fixtures.world import Scenario, scripted_backends
from tplscout.model import FetchStatus

from fakes import FakeFetch, FakeSearch, hit

GLAD_QUERY = "glad OpenGL loader library CMake"


def no_sleep(_):
    pass


def mock_client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


# ---------------------------------------------------------------- digest and cassette

def test_digest_is_key_order_independent():
    assert digest({"a": 1, "b": [1, 2]}) == digest({"b": [1, 2], "a": 1})
    assert digest({"a": 1}) != digest({"a": 2})


def test_session_id_is_not_part_of_the_request_digest():
    a = ChatRequest("run/a1/001", "sys", (("user", "hi"),))
    b = ChatRequest("run/a1/999", "sys", (("user", "hi"),))
    assert digest(a.canonical()) == digest(b.canonical())
    assert digest(a.canonical()) != digest(ChatRequest("s", "sys2", (("user", "hi"),)).canonical())


class EchoLlm:
    def __init__(self):
        self.calls = 0

    def chat(self, req):
        self.calls += 1
        return ChatResponse(f"echo {req.messages[-1][1]}", 3, 2)


def test_record_then_replay_round_trip(tmp_path):
    cassette = Cassette(created_at="2024-01-01T00:00:00Z")
    inner = EchoLlm()
    rec = RecordingLlm(inner, cassette)
    req = ChatRequest("s1", "sys", (("user", "ping"),))
    first = rec.chat(req)
    RecordingSearch(FakeSearch(results={"q": [hit("https://a.org/x")]}), cassette).search("q", 2)
    RecordingFetch(FakeFetch(pages={"https://a.org/x": "body"}), cassette).fetch_text("https://a.org/x")
    path = tmp_path / "c.json"
    cassette.save(path)
    loaded = Cassette.load(path)
    assert loaded.dumps() == cassette.dumps() == path.read_text()
    assert ReplayLlm(loaded).chat(ChatRequest("other-session", "sys", (("user", "ping"),))) == first
    assert [h.url for h in ReplaySearch(loaded).search("q", 2)] == ["https://a.org/x"]
    assert ReplayFetch(loaded).fetch_text("https://a.org/x") == FetchResult(FetchStatus.FETCHED, "body")


def test_replay_miss_names_channel_and_request():
    with pytest.raises(ReplayMiss) as info:
        ReplayLlm(Cassette()).chat(ChatRequest("s", "sys", (("user", "unseen question"),)))
    assert info.value.channel == "llm" and "unseen question" in info.value.request_preview
    with pytest.raises(ReplayMiss) as info:
        ReplaySearch(Cassette()).search("nothing here", 2)
    assert info.value.channel == "search"


def test_recorded_errors_replay_as_errors():
    cassette = Cassette()
    with pytest.raises(SearchProviderError):
        RecordingSearch(FakeSearch(fail=True), cassette).search("q", 2)
    with pytest.raises(SearchProviderError):
        ReplaySearch(cassette).search("q", 2)


def test_cassette_rejects_duplicates_and_bad_schema():
    item = {"channel": "fetch", "request_digest": "d", "request_preview": "", "response": {}}
    with pytest.raises(ValueError):
        Cassette.from_json({"schema": "tplscout-cassette/1", "interactions": [item, item]})
    with pytest.raises(ValueError):
        Cassette.from_json({"schema": "other", "interactions": []})
    with pytest.raises(ValueError):
        Cassette.from_json({"schema": "tplscout-cassette/1", "interactions": [{"channel": "fetch"}]})


def test_record_replaces_same_digest():
    cassette = Cassette()
    cassette.record("fetch", {"url": "u"}, "u", {"status": "FetchFailed", "text": None})
    cassette.record("fetch", {"url": "u"}, "u", {"status": "Fetched", "text": "t"})
    assert len(cassette) == 1 and ReplayFetch(cassette).fetch_text("u").text == "t"


# ---------------------------------------------------------------- backend construction

def test_replay_needs_cassette():
    with pytest.raises(ConfigError, match="--cassette"):
        build_backends("replay", None)


def test_live_names_missing_variable():
    with pytest.raises(ConfigError, match="SEARCH_API_KEY"):
        build_backends("live", env={"LLM_API_KEY": "k"})
    with pytest.raises(ConfigError, match="LLM_API_KEY, SEARCH_API_KEY"):
        build_backends("live", env={})


def test_replay_constructs_no_network_client(monkeypatch):
    def forbidden(*args, **kwargs):
        raise AssertionError("replay must not build an HTTP client")

    monkeypatch.setattr(httpx, "Client", forbidden)
    backends = build_backends("replay", cassette_path("glad"))
    assert isinstance(backends.llm, ReplayLlm)


def test_live_and_record_construct_clients(tmp_path):
    env = {"LLM_API_KEY": "k", "SEARCH_API_KEY": "s"}
    live = build_backends("live", env=env)
    assert isinstance(live.llm, OpenAIChat)
    live.close()
    path = tmp_path / "new.json"
    rec = build_backends("record", path, env=env)
    rec.close()
    assert Cassette.load(path).created_at


def test_with_retries_backoff():
    delays, attempts = [], []

    def flaky():
        attempts.append(1)
        if len(attempts) < 3:
            raise TransientError("boom")
        return "ok"

    assert with_retries(flaky, retries=2, sleep=delays.append) == "ok"
    assert delays == [0.5, 1.0]
    with pytest.raises(TransientError):
        with_retries(lambda: (_ for _ in ()).throw(TransientError("x")), retries=1, sleep=no_sleep)


# ---------------------------------------------------------------- live clients over mock transports

def test_chat_client_payload_and_retry():
    seen = []

    def handler(request):
        seen.append(json.loads(request.content))
        if len(seen) == 1:
            return httpx.Response(429)
        return httpx.Response(200, json={"choices": [{"message": {"content": "{}"}}],
                                         "usage": {"prompt_tokens": 7, "completion_tokens": 2}})

    chat = OpenAIChat("key", "https://llm.test/v1", "m", client=mock_client(handler), sleep=no_sleep)
    resp = chat.chat(ChatRequest("sess", "system text", (("user", "hello"),)))
    assert resp == ChatResponse("{}", 7, 2)
    body = seen[-1]
    assert body["messages"][0] == {"role": "system", "content": "system text"}
    assert body["response_format"] == {"type": "json_object"} and body["user"] == "sess"


def test_chat_client_gives_up():
    chat = OpenAIChat("k", "https://llm.test/v1", client=mock_client(lambda r: httpx.Response(503)), sleep=no_sleep)
    with pytest.raises(ProviderError):
        chat.chat(ChatRequest("s", "sys", (("user", "x"),)))
    chat = OpenAIChat("k", "https://llm.test/v1", client=mock_client(lambda r: httpx.Response(401)), sleep=no_sleep)
    with pytest.raises(ProviderError):
        chat.chat(ChatRequest("s", "sys", (("user", "x"),)))


def _search_handler(total):
    def handler(request):
        start = int(request.url.params["start"])
        items = [{"title": f"t{i}", "snippet": f"s{i}", "link": f"https://r.org/{i}"}
                 for i in range(start, min(start + 10, total + 1))]
        return httpx.Response(200, json={"items": items} if items else {})
    return handler


def test_search_pagination():
    search = JsonApiSearch("k", "https://s.test", client=mock_client(_search_handler(25)), sleep=no_sleep)
    hits = search.search("q", 2)
    assert len(hits) == 20
    assert [h.page_index for h in hits] == [1] * 10 + [2] * 10
    assert [h.rank_on_page for h in hits[:10]] == list(range(1, 11))
    assert {h.page_index for h in search.search("q", 1)} == {1}
    assert JsonApiSearch("k", "https://s.test", client=mock_client(_search_handler(0))).search("q", 2) == []


def test_search_hard_failure():
    search = JsonApiSearch("k", "https://s.test", client=mock_client(lambda r: httpx.Response(503)), sleep=no_sleep)
    with pytest.raises(SearchProviderError):
        search.search("q", 2)


def test_fetcher_statuses():
    pages = {
        "/ok": httpx.Response(200, html="<html><title>T</title><body><p>Hello</p></body></html>"),
        "/missing": httpx.Response(404, text="nope"),
        "/pdf": httpx.Response(200, content=b"%PDF", headers={"content-type": "application/pdf"}),
        "/big": httpx.Response(200, text="x" * 200 * 1024, headers={"content-type": "text/plain"}),
    }
    fetcher = HttpFetcher(client=mock_client(lambda r: pages[r.url.path]))
    assert fetcher.fetch_text("https://p.test/ok") == FetchResult(FetchStatus.FETCHED, "T\nHello")
    assert fetcher.fetch_text("https://p.test/missing") == FetchResult(FetchStatus.FETCH_FAILED, None)
    assert fetcher.fetch_text("https://p.test/pdf").status is FetchStatus.FETCH_FAILED
    assert fetcher.fetch_text("not a url").status is FetchStatus.FETCH_FAILED
    big = fetcher.fetch_text("https://p.test/big")
    assert big.text.endswith(TRUNCATION_MARKER)
    assert len(big.text.encode()) == 16384 + len(TRUNCATION_MARKER)


def test_fetcher_transport_error():
    def boom(request):
        raise httpx.ConnectError("refused")

    assert HttpFetcher(client=mock_client(boom)).fetch_text("https://p.test/").status is FetchStatus.FETCH_FAILED


# ---------------------------------------------------------------- html to text

def test_html_to_text_rules():
    html = """<html><head><title> My  Page </title><style>p{}</style></head>
    <body><nav>menu</nav><h1>Head&amp;line</h1><p>one&nbsp; two</p><script>x()</script>
    <ul><li>a</li><li>b</li></ul><footer>legal</footer>tail<br>end</body></html>"""
    assert html_to_text(html) == "My Page\nHead&line\none two\na\nb\ntail\nend"


def test_glad_fixture_page_text():
    scenario = Scenario.load(data_path("scenarios", "glad.json"))
    text = html_to_text(scenario.page_html("https://github.com/Dav1dde/glad"))
    assert "multi-language Vulkan/GL/GLES/EGL/GLX/WGL loader-generator" in text
    assert "Sign in" not in text and "analytics" not in text


def test_cap_text_respects_character_boundaries():
    assert cap_text("short", 100) == "short"
    capped = cap_text("é" * 10, 5)
    assert capped == "éé" + TRUNCATION_MARKER


# ---------------------------------------------------------------- scripted world

def test_scripted_world_serves_glad_search():
    backends = scripted_backends(Scenario.load(data_path("scenarios", "glad.json")))
    try:
        hits = backends.search.search(GLAD_QUERY, 2)
        assert len(hits) == 20 and {h.page_index for h in hits} == {1, 2}
        assert "https://github.com/Dav1dde/glad" in [h.url for h in hits]
        assert backends.fetch.fetch_text("https://github.com/Dav1dde/glad/wiki").status is FetchStatus.FETCH_FAILED
    finally:
        backends.close()


def test_shipped_glad_cassette_search():
    backends = replay_backends(Cassette.load(cassette_path("glad")))
    hits = backends.search.search(GLAD_QUERY, 2)
    assert len(hits) == 20
    assert any(h.url == "https://github.com/Dav1dde/glad" for h in hits)
