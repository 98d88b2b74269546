"""Streaming telemetry-to-limit protocol, over pipes or TCP.

Messages are newline-delimited single-line JSON objects.  A telemetry line
carries ``seq, d_h, v_nom, m_u, body_part, curvature, condition`` (``m_u`` may
be replaced by a joint configuration ``q`` when an arm model is loaded); the
reply carries ``seq, v_safe, active_limit, latency_us``.  A malformed line
produces a single-line error reply and the connection stays open.

The pipe mode (``govern``) reports latency_us as 0 so that replaying the same
telemetry log yields byte-identical output; the TCP service measures real
per-message processing time.
"""

from __future__ import annotations

import json
import socketserver
import time

from .config import ConfigBundle
from .dynamics import reflected_mass
from .errors import ConfigurationError, EmuSafetyError
from .governor import GovernorInput

_REQUIRED_KEYS = ("seq", "d_h", "v_nom", "body_part", "curvature")


class ConnectionState:
    """Per-connection line counter and sequence tracking."""

    __slots__ = ("line", "last_seq")

    def __init__(self):
        self.line = 0
        self.last_seq = None


class LimitEngine:
    """Turns telemetry lines into limit replies; shared by pipe and TCP modes."""

    def __init__(self, bundle: ConfigBundle, measure_latency: bool = False):
        self._bundle = bundle
        self._governor = bundle.governor()
        self._measure_latency = measure_latency

    def _error(self, kind: str, state: ConnectionState, detail: str) -> str:
        return json.dumps(
            {"error": kind, "line": state.line, "detail": detail},
            separators=(",", ":"),
        )

    def _resolve_mass(self, msg: dict) -> float:
        if "m_u" in msg and msg["m_u"] is not None:
            return float(msg["m_u"])
        bundle = self._bundle
        if bundle.arm is not None and "q" in msg:
            direction = msg.get("u", bundle.contact_direction)
            return reflected_mass(bundle.arm, msg["q"], direction, bundle.contact_point)
        raise ConfigurationError("message carries no m_u and no arm model/q is available")

    def process(self, line: str, state: ConnectionState) -> str | None:
        """One reply line (no newline) per telemetry line; None for blank input."""
        if not line.strip():
            return None
        state.line += 1
        t0 = time.perf_counter_ns() if self._measure_latency else 0
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            return self._error("parse", state, "not valid JSON")
        if not isinstance(msg, dict):
            return self._error("parse", state, "expected a JSON object")
        missing = [k for k in _REQUIRED_KEYS if k not in msg]
        if missing:
            return self._error("schema", state, f"missing keys: {', '.join(missing)}")
        seq = msg["seq"]
        if not isinstance(seq, int):
            return self._error("schema", state, "seq must be an integer")
        if state.last_seq is not None and seq <= state.last_seq:
            return self._error("seq", state, f"seq {seq} not greater than {state.last_seq}")
        try:
            inp = GovernorInput(
                v_d=float(msg["v_nom"]),
                m_u=self._resolve_mass(msg),
                d_h=float(msg["d_h"]),
                body_part=str(msg["body_part"]),
                curvature=str(msg["curvature"]),
                condition=msg.get("condition"),
            )
            decision = self._governor.evaluate(inp)
        except ConfigurationError as exc:
            return self._error("config", state, str(exc))
        except (EmuSafetyError, ValueError, TypeError) as exc:
            return self._error("domain", state, str(exc))
        state.last_seq = seq
        latency_us = (time.perf_counter_ns() - t0) // 1000 if self._measure_latency else 0
        return json.dumps(
            {
                "seq": seq,
                "v_safe": decision.v_safe,
                "active_limit": decision.active_limit,
                "latency_us": latency_us,
            },
            separators=(",", ":"),
        )


def govern_stream(bundle: ConfigBundle, input_stream, output_stream) -> int:
    """Pipe mode: one reply line per input line, in order; returns reply count."""
    engine = LimitEngine(bundle, measure_latency=False)
    state = ConnectionState()
    replies = 0
    for line in input_stream:
        reply = engine.process(line, state)
        if reply is None:
            continue
        output_stream.write(reply + "\n")
        replies += 1
    output_stream.flush()
    return replies


class _LimitHandler(socketserver.StreamRequestHandler):
    def handle(self):
        state = ConnectionState()
        for raw in self.rfile:
            reply = self.server.engine.process(raw.decode("utf-8", errors="replace"), state)
            if reply is None:
                continue
            self.wfile.write(reply.encode("utf-8") + b"\n")
            self.wfile.flush()


class LimitServer(socketserver.ThreadingTCPServer):
    """TCP limit service; one handler thread per connection."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], bundle: ConfigBundle):
        super().__init__(address, _LimitHandler)
        self.engine = LimitEngine(bundle, measure_latency=True)


def serve(address: tuple[str, int], bundle: ConfigBundle) -> None:
    """Run the limit service until interrupted (bind errors propagate)."""
    with LimitServer(address, bundle) as server:
        server.serve_forever()
