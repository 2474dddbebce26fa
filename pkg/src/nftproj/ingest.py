"""Sale-event ingestion from local files or an Etherscan-compatible API.

File formats
------------
CSV with header ``collection_id,token_id,timestamp,price_eth`` (an optional
``event_type`` column is accepted; anything other than ``sale`` is rejected).
JSONL with one object per line carrying the same keys.

Prices are decimal ETH strings with at most 18 fractional digits and are
stored as integer wei.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

import requests

from .exceptions import HttpError, IoError, NonSaleEvent, ParseError, SchemaError

logger = logging.getLogger(__name__)

WEI_PER_ETH = 10**18
API_KEY_ENV = "NFTPROJ_API_KEY"
CSV_COLUMNS = ("collection_id", "token_id", "timestamp", "price_eth")


@dataclass(frozen=True, order=True)
class SaleEvent:
    # field order doubles as the canonical sort key after (timestamp, seq)
    timestamp: int
    seq: int
    collection_id: str
    token_id: int
    price_wei: int

    def __post_init__(self):
        if self.price_wei < 0:
            raise ValueError("price_wei must be non-negative")
        if self.timestamp <= 0:
            raise ValueError("timestamp must be positive")
        if self.token_id < 0 or self.seq < 0:
            raise ValueError("token_id and seq must be non-negative")

    @property
    def price_eth(self) -> float:
        return self.price_wei / WEI_PER_ETH


def eth_to_wei(text: str) -> int:
    """Convert a decimal ETH string to integer wei, exactly."""
    try:
        value = Decimal(text.strip())
    except (InvalidOperation, AttributeError):
        raise ValueError(f"not a decimal number: {text!r}") from None
    if not value.is_finite():
        raise ValueError(f"not a finite number: {text!r}")
    if value < 0:
        raise ValueError(f"negative price: {text!r}")
    # Decimal arithmetic rounds to the context precision; shift the exact digits instead.
    _, digits, exponent = value.as_tuple()
    mantissa = int("".join(map(str, digits)) or "0")
    shift = exponent + 18
    if shift >= 0:
        return mantissa * 10**shift
    whole, rest = divmod(mantissa, 10**-shift)
    if rest:
        raise ValueError(f"more than 18 fractional digits: {text!r}")
    return whole


def wei_to_eth_str(wei: int) -> str:
    whole, frac = divmod(int(wei), WEI_PER_ETH)
    if frac == 0:
        return str(whole)
    return f"{whole}.{frac:018d}".rstrip("0")


def _assign_seq(raw):
    """Sort raw (timestamp, collection, token, wei) tuples, numbering same-second sales in input order."""
    order = sorted(range(len(raw)), key=lambda k: (raw[k][0], k))
    events = []
    prev_ts, seq = None, 0
    for k in order:
        ts, coll, tok, wei = raw[k]
        seq = seq + 1 if ts == prev_ts else 0
        prev_ts = ts
        events.append(SaleEvent(ts, seq, coll, tok, wei))
    return events


def _parse_record(rec, line):
    kind = rec.get("event_type")
    if kind not in (None, "", "sale"):
        raise NonSaleEvent(line, f"non-sale event type {kind!r}")
    try:
        coll = str(rec["collection_id"]).strip()
        token = int(str(rec["token_id"]).strip())
        ts = int(str(rec["timestamp"]).strip())
        wei = eth_to_wei(str(rec["price_eth"]))
    except KeyError as exc:
        raise ParseError(line, f"missing field {exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(line, str(exc)) from None
    if not coll:
        raise ParseError(line, "empty collection_id")
    if token < 0:
        raise ParseError(line, f"negative token_id {token}")
    if ts <= 0:
        raise ParseError(line, f"non-positive timestamp {ts}")
    return ts, coll, token, wei


def load_events(path, format: str = "csv") -> list[SaleEvent]:
    """Load sale events from a CSV or JSONL file.

    Events come back sorted by ``(timestamp, seq)``; ``seq`` numbers sales
    sharing a timestamp in file order.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    raw = []
    if format == "csv":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None:
            return []
        missing = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ParseError(1, f"missing columns {missing}")
        for row in reader:
            if None in row.values() or None in row:
                raise ParseError(reader.line_num, "wrong number of fields")
            raw.append(_parse_record(row, reader.line_num))
    elif format == "jsonl":
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(rec, dict):
                raise ParseError(lineno, "expected a JSON object")
            raw.append(_parse_record(rec, lineno))
    else:
        raise ValueError(f"unknown format {format!r}")
    return _assign_seq(raw)


def write_events(events, path) -> None:
    """Write events as CSV in ``(timestamp, seq)`` order; reloads to the same list."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for ev in sorted(events):
            writer.writerow([ev.collection_id, ev.token_id, ev.timestamp, wei_to_eth_str(ev.price_wei)])


@dataclass
class IngestConfig:
    base_url: str
    api_key: str = field(default_factory=lambda: os.environ.get(API_KEY_ENV, ""), repr=False)
    page_size: int = 1000
    max_retries: int = 5
    retry_backoff_ms: int = 500
    timeout_s: float = 30.0
    module: str = "account"
    action: str = "tokennfttx"

    def __post_init__(self):
        if self.page_size < 1:
            raise ValueError("page_size must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.retry_backoff_ms < 1:
            raise ValueError("retry_backoff_ms must be positive")


def _is_rate_limited(payload) -> bool:
    text = f"{payload.get('message', '')} {payload.get('result', '')}".lower()
    return "rate limit" in text


def _get_page(session, config, params):
    attempt = 0
    while True:
        status = None
        try:
            resp = session.get(config.base_url, params=params, timeout=config.timeout_s)
            status = resp.status_code
            if status == 200:
                try:
                    payload = resp.json()
                except ValueError as exc:
                    raise SchemaError(f"response is not JSON: {exc}") from None
                if not isinstance(payload, dict):
                    raise SchemaError("response is not a JSON object")
                if not _is_rate_limited(payload):
                    return payload
                reason = "rate limited"
            elif status == 429 or status >= 500:
                reason = f"HTTP {status}"
            else:
                raise HttpError(f"HTTP {status} from {config.base_url}", status=status)
        except requests.RequestException as exc:
            reason = f"request failed: {exc}"
        if attempt >= config.max_retries:
            raise HttpError(f"giving up after {attempt + 1} attempts: {reason}", status=status)
        delay = config.retry_backoff_ms * (2**attempt) / 1000.0
        logger.warning("page %s: %s; retrying in %.3fs", params.get("page"), reason, delay)
        time.sleep(delay)
        attempt += 1


def _parse_item(item, collection_id, where):
    if not isinstance(item, dict):
        raise SchemaError(f"{where}: expected an object, got {type(item).__name__}")
    kind = item.get("eventType", "sale")
    if kind != "sale":
        raise NonSaleEvent(where, f"non-sale event type {kind!r}")
    try:
        token = int(item["tokenID"])
        ts = int(item["timeStamp"])
        wei = int(item["value"])
    except KeyError as exc:
        raise SchemaError(f"{where}: missing field {exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from None
    if token < 0 or ts <= 0 or wei < 0:
        raise SchemaError(f"{where}: out-of-range tokenID/timeStamp/value")
    key = (item.get("hash"), item.get("logIndex"))
    return key, (ts, collection_id, token, wei)


def fetch_events(config: IngestConfig, collection_address: str, from_block: int, to_block: int,
                 session=None) -> list[SaleEvent]:
    """Page through the explorer API until an empty page and return sorted sale events.

    Result items must carry ``tokenID``, ``timeStamp`` and ``value`` (sale
    price in wei). Items repeated across pages (same ``hash`` and
    ``logIndex``) are kept once.
    """
    if from_block > to_block:
        raise ValueError("from_block must be <= to_block")
    collection_id = collection_address.lower()
    session = session or requests.Session()
    raw, seen = [], set()
    page = 1
    while True:
        params = {
            "module": config.module,
            "action": config.action,
            "contractaddress": collection_address,
            "startblock": from_block,
            "endblock": to_block,
            "page": page,
            "offset": config.page_size,
            "apikey": config.api_key,
        }
        payload = _get_page(session, config, params)
        result = payload.get("result")
        if not isinstance(result, list):
            if payload.get("status") == "0" and "no transactions" in str(payload.get("message", "")).lower():
                result = []
            else:
                raise SchemaError(f"page {page}: 'result' is not a list")
        if not result:
            break
        for idx, item in enumerate(result):
            key, rec = _parse_item(item, collection_id, f"page {page} item {idx}")
            if key != (None, None):
                if key in seen:
                    continue
                seen.add(key)
            raw.append(rec)
        page += 1
    return _assign_seq(raw)
