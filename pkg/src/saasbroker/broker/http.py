"""JSON-over-HTTP front end for :class:`BrokerService` (stdlib ``http.server``).

Routes::

    POST /providers[?update=true]        register a provider record
    POST /consumers/{id}/profile         create or replace a consumer profile
    POST /requests[?consumer_id=...]     SLA request, JSON or XML by Content-Type
    GET  /sessions/{id}
    GET  /slas/{id}
    POST /slas/{id}/metrics              JSON-lines sample feed
    POST /slas/{id}/mapping              metric-to-indicator mapping
    GET  /slas/{id}/compliance?start=&end=
    GET|PUT /policies/{key}
"""

from __future__ import annotations

import json
import logging
import re
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from ..errors import BrokerError, ConflictingRecord, NoProviders, NotFound
from ..sla import SlaRequestDoc, parse_sla_request_xml
from .service import BrokerService

log = logging.getLogger(__name__)


class BadRequest(Exception):
    pass


def _status_for(exc: Exception) -> HTTPStatus:
    if isinstance(exc, NotFound):
        return HTTPStatus.NOT_FOUND
    if isinstance(exc, (ConflictingRecord, NoProviders)):
        return HTTPStatus.CONFLICT
    if isinstance(exc, (BadRequest, json.JSONDecodeError)):
        return HTTPStatus.BAD_REQUEST
    if isinstance(exc, (BrokerError, ValueError, KeyError, TypeError)):
        return HTTPStatus.UNPROCESSABLE_ENTITY
    return HTTPStatus.INTERNAL_SERVER_ERROR


class BrokerHandler(BaseHTTPRequestHandler):
    service: BrokerService  # set on the server-specific subclass
    server_version = "saasbroker/0.1"

    routes = [
        ("POST", re.compile(r"^/providers$"), "post_provider"),
        ("POST", re.compile(r"^/consumers/([^/]+)/profile$"), "post_profile"),
        ("POST", re.compile(r"^/requests$"), "post_request"),
        ("GET", re.compile(r"^/sessions/([^/]+)$"), "get_session"),
        ("GET", re.compile(r"^/slas/([^/]+)$"), "get_sla"),
        ("POST", re.compile(r"^/slas/([^/]+)/metrics$"), "post_metrics"),
        ("POST", re.compile(r"^/slas/([^/]+)/mapping$"), "post_mapping"),
        ("GET", re.compile(r"^/slas/([^/]+)/compliance$"), "get_compliance"),
        ("GET", re.compile(r"^/policies/([^/]+)$"), "get_policy"),
        ("PUT", re.compile(r"^/policies/([^/]+)$"), "put_policy"),
    ]

    def log_message(self, fmt, *args):
        log.info("%s - " + fmt, self.address_string(), *args)

    # -- plumbing ------------------------------------------------------------------

    def _dispatch(self, method: str) -> None:
        url = urlparse(self.path)
        self.query = {k: v[-1] for k, v in parse_qs(url.query).items()}
        for m, pattern, name in self.routes:
            match = pattern.match(url.path)
            if match and m == method:
                try:
                    status, body = getattr(self, name)(*match.groups())
                except Exception as exc:  # noqa: BLE001 - mapped to an HTTP status
                    status = _status_for(exc)
                    if status is HTTPStatus.INTERNAL_SERVER_ERROR:
                        log.exception("unhandled error for %s %s", method, self.path)
                    body = {"error": type(exc).__name__, "detail": str(exc)}
                self._send(status, body)
                return
        if any(p.match(url.path) for _, p, _ in self.routes):
            self._send(HTTPStatus.METHOD_NOT_ALLOWED, {"error": "MethodNotAllowed"})
        else:
            self._send(HTTPStatus.NOT_FOUND, {"error": "NotFound", "detail": url.path})

    def _send(self, status: HTTPStatus, body) -> None:
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _json(self):
        raw = self._body()
        if not raw:
            raise BadRequest("empty body")
        return json.loads(raw)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    def do_DELETE(self):
        self._dispatch("DELETE")

    # -- endpoints -----------------------------------------------------------------------

    def post_provider(self):
        update = self.query.get("update", "").lower() in ("1", "true", "yes")
        pid = self.service.register_provider(self._json(), update=update)
        return HTTPStatus.CREATED, {"provider_id": pid}

    def post_profile(self, consumer_id):
        body = self._json()
        body["consumer_id"] = consumer_id
        return HTTPStatus.OK, self.service.set_profile(body)

    def post_request(self):
        ctype = (self.headers.get("Content-Type") or "application/json").split(";")[0].strip().lower()
        raw = self._body()
        if not raw:
            raise BadRequest("empty body")
        if ctype.endswith("xml"):
            doc = parse_sla_request_xml(raw, consumer_id=self.query.get("consumer_id"))
        else:
            doc = SlaRequestDoc.from_dict(json.loads(raw))
        consumer_id = self.query.get("consumer_id") or doc.consumer_id
        if not consumer_id:
            raise BadRequest("consumer_id missing (query parameter or document field)")
        session_id = self.service.submit_request(consumer_id, doc)
        return HTTPStatus.CREATED, self.service.get_session(session_id)

    def get_session(self, session_id):
        return HTTPStatus.OK, self.service.get_session(session_id)

    def get_sla(self, sla_id):
        return HTTPStatus.OK, self.service.get_sla(sla_id).to_dict()

    def post_metrics(self, sla_id):
        lines = self._body().decode("utf-8", errors="replace").splitlines()
        return HTTPStatus.OK, self.service.post_metrics(sla_id, lines)

    def post_mapping(self, sla_id):
        self.service.set_metric_mapping(sla_id, self._json())
        return HTTPStatus.OK, {"sla_id": sla_id}

    def get_compliance(self, sla_id):
        try:
            start = int(self.query["start"]) if "start" in self.query else None
            end = int(self.query["end"]) if "end" in self.query else None
        except ValueError:
            raise BadRequest("start and end must be epoch milliseconds") from None
        return HTTPStatus.OK, self.service.get_compliance(sla_id, start, end)

    def get_policy(self, key):
        return HTTPStatus.OK, {"key": key, "value": self.service.get_policy(key)}

    def put_policy(self, key):
        self.service.set_policy(key, self._json())
        return HTTPStatus.OK, {"key": key}


def make_server(service: BrokerService, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    handler = type("BoundBrokerHandler", (BrokerHandler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_in_thread(service: BrokerService, host: str = "127.0.0.1", port: int = 0):
    """Start a server on a daemon thread; returns ``(server, base_url)``."""
    server = make_server(service, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    h, p = server.server_address[:2]
    return server, f"http://{h}:{p}"
