"""HTTP facade over a loaded engine bundle.

The engine snapshot is immutable, so request handling is concurrency-safe
without locks; only the audit store serializes writes.  Every response body
is JSON, including errors, which carry the same stable ``code`` strings the
CLI prints.  Request bodies are parsed by hand so malformed JSON maps to a
400 with that structure instead of a framework-shaped 422.
"""

from __future__ import annotations

import itertools
import json
import threading
import time
from collections import OrderedDict
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .ensemble import (
    ClassificationRequest,
    Engine,
    NotTrainedError,
    classify,
    load_engine,
)
from .errors import HsClassifyError
from .nomenclature import HsCode, InvalidCodeError, UnknownCodeError, describe


class BadRequestError(HsClassifyError):
    code = "BadRequest"


class AuditNotFoundError(HsClassifyError):
    code = "AuditNotFound"


_STATUS_BY_CODE = {
    "BadRequest": 400,
    "EmptyAfterCleaning": 400,
    "InvalidCode": 400,
    "NotTrained": 409,
    "AuditNotFound": 404,
    "UnknownCode": 404,
}


# ---------------------------------------------------------------------------
# Audit store
# ---------------------------------------------------------------------------


class AuditStore:
    """Append-only JSON-lines store for audit trails and review decisions.

    IDs are unique for the process lifetime (millisecond stamp plus a
    counter).  A retention cap bounds the store: when it overflows, the
    oldest trail and its decisions are dropped and the file is compacted.
    All writes go through one lock; reads use the in-memory map.
    """

    def __init__(self, path: Path | str | None = None, retention: int = 10_000):
        if retention < 1:
            raise ValueError("retention must be at least 1")
        self._path = Path(path) if path is not None else None
        self._retention = retention
        self._lock = threading.Lock()
        self._trails: OrderedDict[str, dict] = OrderedDict()
        self._decisions: dict[str, list[dict]] = {}
        self._counter = itertools.count()
        if self._path is not None and self._path.exists():
            self._replay()

    def __len__(self) -> int:
        return len(self._trails)

    def _replay(self):
        for line in self._path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            if entry["kind"] == "trail":
                self._trails[entry["audit_id"]] = entry["trail"]
            elif entry["kind"] == "decision":
                self._decisions.setdefault(entry["audit_id"], []).append(entry["decision"])
        self._decisions = {k: v for k, v in self._decisions.items() if k in self._trails}
        self._trim()
        self._compact()

    def _write_line(self, entry: dict):
        if self._path is None:
            return
        with self._path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(entry, sort_keys=True) + "\n")

    def _compact(self):
        if self._path is None:
            return
        lines = []
        for audit_id, trail in self._trails.items():
            entry = {"kind": "trail", "audit_id": audit_id, "trail": trail}
            lines.append(json.dumps(entry, sort_keys=True))
            for decision in self._decisions.get(audit_id, []):
                entry = {"kind": "decision", "audit_id": audit_id, "decision": decision}
                lines.append(json.dumps(entry, sort_keys=True))
        self._path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    def _trim(self) -> bool:
        trimmed = False
        while len(self._trails) > self._retention:
            dropped, _ = self._trails.popitem(last=False)
            self._decisions.pop(dropped, None)
            trimmed = True
        return trimmed

    def append(self, trail: dict) -> str:
        with self._lock:
            audit_id = f"{int(time.time() * 1000)}-{next(self._counter):06d}"
            self._trails[audit_id] = trail
            self._write_line({"kind": "trail", "audit_id": audit_id, "trail": trail})
            if self._trim():
                self._compact()
            return audit_id

    def get(self, audit_id: str) -> dict:
        with self._lock:
            trail = self._trails.get(audit_id)
            if trail is None:
                raise AuditNotFoundError(f"no audit trail with id {audit_id!r}")
            return {
                "audit_id": audit_id,
                "trail": trail,
                "decisions": list(self._decisions.get(audit_id, [])),
            }

    def record_decision(self, audit_id: str, decision: dict) -> dict:
        with self._lock:
            if audit_id not in self._trails:
                raise AuditNotFoundError(f"no audit trail with id {audit_id!r}")
            entry = dict(decision)
            entry["recorded_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
            self._decisions.setdefault(audit_id, []).append(entry)
            self._write_line({"kind": "decision", "audit_id": audit_id, "decision": entry})
            return entry


# ---------------------------------------------------------------------------
# Application factory
# ---------------------------------------------------------------------------


def _number_or_none(data: dict, key: str):
    value = data.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BadRequestError(f"{key} must be a number")
    return float(value)


async def _read_json(request: Request) -> dict:
    try:
        data = json.loads(await request.body() or b"")
    except json.JSONDecodeError as exc:
        raise BadRequestError(f"request body is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise BadRequestError("request body must be a JSON object")
    return data


def create_app(
    engine: Engine | None = None,
    bundle: Path | str | None = None,
    audit_store: AuditStore | None = None,
    audit_path: Path | str | None = None,
) -> FastAPI:
    """Build the API around one engine snapshot (or a bundle to load)."""
    if engine is None and bundle is not None:
        engine = load_engine(Path(bundle))
    store = audit_store or AuditStore(audit_path)

    app = FastAPI(title="hsclassify", version=__version__)
    app.state.engine = engine
    app.state.audit = store

    @app.exception_handler(HsClassifyError)
    async def domain_error(request: Request, exc: HsClassifyError):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(status_code=status, content={"error": exc.code, "detail": exc.detail})

    @app.exception_handler(Exception)
    async def unexpected_error(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": "Internal", "detail": str(exc)})

    @app.post("/classify")
    async def post_classify(request: Request):
        data = await _read_json(request)
        description = data.get("description")
        if not isinstance(description, str) or not description.strip():
            raise BadRequestError("description must be a non-empty string")
        top_k = data.get("top_k", 3)
        if isinstance(top_k, bool) or not isinstance(top_k, int) or top_k < 1:
            raise BadRequestError("top_k must be a positive integer")
        mode = data.get("mode")
        if mode is not None and mode not in ("per_branch", "conditional"):
            raise BadRequestError("mode must be per_branch or conditional")
        req = ClassificationRequest(
            description=description,
            weight=_number_or_none(data, "weight"),
            value=_number_or_none(data, "value"),
            k=top_k,
            mode=mode,
        )
        candidates, trail = classify(req, app.state.engine)
        audit_id = app.state.audit.append(trail.to_dict())
        return {"candidates": [c.to_dict() for c in candidates], "audit_id": audit_id}

    @app.get("/audit/{audit_id}")
    async def get_audit(audit_id: str):
        return app.state.audit.get(audit_id)

    @app.post("/audit/{audit_id}/decision")
    async def post_decision(audit_id: str, request: Request):
        data = await _read_json(request)
        action = data.get("action")
        if action not in ("accept", "override"):
            raise BadRequestError("action must be accept or override")
        code = data.get("code")
        if action == "override":
            if not isinstance(code, str):
                raise BadRequestError("override requires a code")
            try:
                code = HsCode.parse(code).digits
            except InvalidCodeError as exc:
                raise BadRequestError(str(exc)) from None
        decision = app.state.audit.record_decision(
            audit_id, {"action": action, "code": code}
        )
        return {"audit_id": audit_id, "decision": decision}

    @app.get("/schedule/{code}")
    async def get_schedule_node(code: str):
        if app.state.engine is None:
            raise NotTrainedError("no engine loaded")
        schedule = app.state.engine.schedule
        parsed = HsCode.parse(code)
        try:
            node = schedule.lookup(parsed)
        except UnknownCodeError:
            # Implied code: 848250 written only as 8482.50.00 lines. Resolve
            # it the same way describe() does so the review UI can validate
            # any real subheading, and expose the shallowest coded
            # descendants as its children.
            descendants = sorted(
                digits
                for digits in schedule.index
                if len(digits) > len(parsed.digits) and digits.startswith(parsed.digits)
            )
            if not descendants:
                raise
            shallowest = min(len(digits) for digits in descendants)
            children = [schedule.index[d] for d in descendants if len(d) == shallowest]
            return {
                "code": parsed.display,
                "description": describe(schedule, parsed),
                "statistical_suffix": None,
                "children": [
                    {
                        "code": child.code,
                        "description": child.description,
                        "statistical_suffix": child.statistical_suffix,
                    }
                    for child in children
                ],
            }
        return {
            "code": node.code,
            "description": node.description,
            "statistical_suffix": node.statistical_suffix,
            "children": [
                {
                    "code": child.code,
                    "description": child.description,
                    "statistical_suffix": child.statistical_suffix,
                }
                for child in node.children
            ],
        }

    @app.get("/healthz")
    async def healthz():
        return {
            "status": "ok",
            "version": __version__,
            "engine_fingerprint": app.state.engine.fingerprint if app.state.engine else None,
        }

    return app
