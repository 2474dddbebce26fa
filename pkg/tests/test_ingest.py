import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from urllib.parse import parse_qs, urlparse

import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from nftproj.exceptions import HttpError, IoError, NonSaleEvent, ParseError, SchemaError
from nftproj.ingest import (SaleEvent, IngestConfig, eth_to_wei, fetch_events, load_events,
                            wei_to_eth_str, write_events)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestPrices:
    def test_whole_and_fractional(self):
        assert eth_to_wei("2.0") == 2 * 10**18
        assert eth_to_wei("0.000000000000000001") == 1
        assert eth_to_wei("159") == 159 * 10**18

    def test_rejects_bad_prices(self):
        for bad in ("-1", "abc", "0.0000000000000000001", "nan"):
            with pytest.raises(ValueError):
                eth_to_wei(bad)

    @given(st.integers(min_value=0, max_value=10**30))
    @example(10**28 + 1)
    def test_wei_string_round_trip(self, wei):
        assert eth_to_wei(wei_to_eth_str(wei)) == wei

    def test_display_strips_zeros(self):
        assert wei_to_eth_str(2 * 10**18) == "2"
        assert wei_to_eth_str(15 * 10**17) == "1.5"


class TestLoadEvents:
    def test_spec_row(self, tmp_path):
        p = _write(tmp_path / "e.csv", "collection_id,token_id,timestamp,price_eth\nbayc,4714,1619740800,2.0\n")
        (ev,) = load_events(p)
        assert (ev.collection_id, ev.token_id, ev.timestamp, ev.price_wei) == ("bayc", 4714, 1619740800, 2 * 10**18)

    def test_negative_price_names_line(self, tmp_path):
        p = _write(tmp_path / "e.csv", "collection_id,token_id,timestamp,price_eth\n"
                                       "bayc,1,1619740800,1\nbayc,2,1619740800,-1\n")
        with pytest.raises(ParseError) as exc:
            load_events(p)
        assert exc.value.line == 3
        assert "line 3" in str(exc.value)

    def test_missing_column(self, tmp_path):
        p = _write(tmp_path / "e.csv", "collection_id,token_id,price_eth\nbayc,1,1\n")
        with pytest.raises(ParseError):
            load_events(p)

    def test_non_sale_rejected(self, tmp_path):
        p = _write(tmp_path / "e.csv", "collection_id,token_id,timestamp,price_eth,event_type\n"
                                       "bayc,1,1619740800,0,transfer\n")
        with pytest.raises(NonSaleEvent):
            load_events(p)

    def test_unreadable(self, tmp_path):
        with pytest.raises(IoError):
            load_events(tmp_path / "missing.csv")

    def test_jsonl(self, tmp_path):
        rec = {"collection_id": "c", "token_id": 3, "timestamp": 1619740800, "price_eth": "0.5"}
        p = _write(tmp_path / "e.jsonl", json.dumps(rec) + "\n\n")
        (ev,) = load_events(p, "jsonl")
        assert ev.price_wei == 5 * 10**17

    def test_jsonl_bad_line(self, tmp_path):
        p = _write(tmp_path / "e.jsonl", "{not json}\n")
        with pytest.raises(ParseError) as exc:
            load_events(p, "jsonl")
        assert exc.value.line == 1

    def test_same_timestamp_keeps_file_order(self, tmp_path):
        p = _write(tmp_path / "e.csv", "collection_id,token_id,timestamp,price_eth\n"
                                       "c,1,1619740800,3\nc,1,1619740800,1\nc,2,1619740700,2\n")
        events = load_events(p)
        assert [e.price_wei // 10**18 for e in events] == [2, 3, 1]
        assert [e.seq for e in events] == [0, 0, 1]


_event = st.builds(
    lambda ts, tok, wei, coll: (ts, coll, tok, wei),
    st.integers(1, 2**40), st.integers(0, 10**6), st.integers(0, 10**24),
    st.sampled_from(["bayc", "mayc", "azuki"]))


class TestRoundTrip:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(_event, max_size=30))
    def test_write_then_load_is_identity(self, tmp_path_factory, raw):
        from nftproj.ingest import _assign_seq
        events = _assign_seq(raw)
        path = tmp_path_factory.mktemp("rt") / "events.csv"
        write_events(events, path)
        assert load_events(path) == events

    def test_sale_event_validation(self):
        with pytest.raises(ValueError):
            SaleEvent(0, 0, "c", 1, 1)
        with pytest.raises(ValueError):
            SaleEvent(1, 0, "c", 1, -1)


class _FakeApi(BaseHTTPRequestHandler):
    pages: dict = {}
    fail_first: int = 0
    calls: list = []

    def do_GET(self):
        params = {k: v[0] for k, v in parse_qs(urlparse(self.path).query).items()}
        type(self).calls.append(params)
        if type(self).fail_first > 0:
            type(self).fail_first -= 1
            self.send_response(429)
            self.end_headers()
            return
        page = int(params["page"])
        result = type(self).pages.get(page)
        body = ({"status": "1", "message": "OK", "result": result} if result
                else {"status": "0", "message": "No transactions found", "result": []})
        data = json.dumps(body).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def api():
    _FakeApi.calls = []
    _FakeApi.fail_first = 0
    server = HTTPServer(("127.0.0.1", 0), _FakeApi)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield _FakeApi, f"http://127.0.0.1:{server.server_port}/api"
    server.shutdown()


def _item(tok, ts, wei, h, idx=0, **extra):
    return {"tokenID": str(tok), "timeStamp": str(ts), "value": str(wei), "hash": h, "logIndex": str(idx), **extra}


class TestFetch:
    def test_pagination_dedup_and_sort(self, api):
        handler, url = api
        handler.pages = {1: [_item(1, 200, 10, "a"), _item(2, 100, 20, "b")],
                         2: [_item(2, 100, 20, "b"), _item(3, 300, 30, "c")]}
        events = fetch_events(IngestConfig(url, api_key="k", page_size=2), "0xABC", 0, 99)
        assert [(e.token_id, e.timestamp, e.price_wei) for e in events] == [(2, 100, 20), (1, 200, 10), (3, 300, 30)]
        assert {e.collection_id for e in events} == {"0xabc"}
        assert [c["page"] for c in handler.calls] == ["1", "2", "3"]
        assert handler.calls[0]["apikey"] == "k"
        assert handler.calls[0]["offset"] == "2"

    def test_empty_first_page(self, api):
        handler, url = api
        handler.pages = {}
        assert fetch_events(IngestConfig(url, api_key=""), "0xabc", 0, 1) == []

    def test_retries_on_429(self, api):
        handler, url = api
        handler.pages = {1: [_item(1, 100, 5, "a")]}
        handler.fail_first = 2
        cfg = IngestConfig(url, api_key="", retry_backoff_ms=1, max_retries=3)
        assert len(fetch_events(cfg, "0xabc", 0, 1)) == 1
        assert len(handler.calls) == 4

    def test_gives_up_after_max_retries(self, api):
        handler, url = api
        handler.fail_first = 10
        cfg = IngestConfig(url, api_key="", retry_backoff_ms=1, max_retries=2)
        with pytest.raises(HttpError) as exc:
            fetch_events(cfg, "0xabc", 0, 1)
        assert exc.value.status == 429
        assert len(handler.calls) == 3

    def test_non_sale_item(self, api):
        handler, url = api
        handler.pages = {1: [_item(1, 100, 0, "a", eventType="transfer")]}
        with pytest.raises(NonSaleEvent):
            fetch_events(IngestConfig(url, api_key=""), "0xabc", 0, 1)

    def test_malformed_item(self, api):
        handler, url = api
        handler.pages = {1: [{"tokenID": "1", "hash": "x"}]}
        with pytest.raises(SchemaError):
            fetch_events(IngestConfig(url, api_key=""), "0xabc", 0, 1)

    def test_api_key_from_environment(self, monkeypatch):
        monkeypatch.setenv("NFTPROJ_API_KEY", "secret")
        assert IngestConfig("http://x").api_key == "secret"
