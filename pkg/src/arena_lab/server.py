"""Network boundary: sessions over newline-delimited JSON and WebSocket.

One listening port serves three kinds of client.  A connection whose first
bytes are a JSON line speaks the raw protocol directly; a connection that
starts with an HTTP request either upgrades to a WebSocket carrying the
same JSON objects as text frames, or is served a static file (the play
UI).  Every message is an object {"seq", "type", "payload"}; each request
gets exactly one response tagged with the request's seq.  Stream frames
pushed between requests carry seq null.

Each connection is one isolated session: its own loaded config, episode,
and RNG.  Errors are per-message; a malformed line never kills the
session.
"""

from __future__ import annotations

import base64
import hashlib
import json
import mimetypes
import socket
import struct
import threading
import time
from pathlib import Path

import numpy as np

from . import PROTOCOL_VERSION
from .config_dsl import ConfigError, load_config_text
from .episode import Action, Episode
from .observations import Observation, ObsSpec, view_columns

CAPABILITIES = ["raycast", "camera", "vector", "state", "view"]
MAX_LINE_BYTES = 32 * 1024 * 1024
_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class ProtocolError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


# --- payload serialization --------------------------------------------------


def parse_obs_spec(payload: dict | None) -> ObsSpec:
    payload = payload or {}
    spec = ObsSpec(
        rays=payload.get("rays", 15),
        ray_fov=float(payload.get("ray_fov", 60.0)),
        camera=payload.get("camera"),
        grayscale=bool(payload.get("grayscale", False)),
        vector=bool(payload.get("vector", True)),
    )
    if spec.rays is not None:
        spec = ObsSpec(
            rays=int(spec.rays),
            ray_fov=spec.ray_fov,
            camera=spec.camera,
            grayscale=spec.grayscale,
            vector=spec.vector,
        )
    return spec


def encode_observation(obs: Observation) -> dict:
    out: dict = {}
    if obs.raycast is not None:
        out["raycast"] = [float(v) for v in obs.raycast.reshape(-1)]
        out["raycast_shape"] = list(obs.raycast.shape)
    if obs.camera is not None:
        out["camera_b64"] = base64.b64encode(
            np.ascontiguousarray(obs.camera).tobytes()
        ).decode("ascii")
        out["camera_shape"] = list(obs.camera.shape)
    if obs.vector is not None:
        out["vector"] = [float(v) for v in obs.vector]
    return out


def _encode_entity(ent, agent_eid: int) -> dict:
    rec = ent.record
    out = {
        "eid": ent.eid,
        "kind": ent.kind.value,
        "position": [float(v) for v in rec.center],
        "base_y": float(ent.base_position[1]),
        "yaw": float(ent.yaw),
        "size": [float(v) for v in ent.size],
        "rgb": [float(v) for v in rec.rgb],
        "alpha": float(rec.alpha),
        "agent": ent.eid == agent_eid,
    }
    if ent.body is not None:
        out["velocity"] = [float(v) for v in ent.body.velocity]
    return out


# --- session ----------------------------------------------------------------


class Session:
    """One client's state machine; transport-agnostic."""

    def __init__(self, send, session_id: int = 0):
        self._send = send
        self.id = session_id
        self.greeted = False
        self.config = None
        self.config_name = "<inline>"
        self.episode: Episode | None = None
        self.obs_spec = ObsSpec()
        self.prev_episode_reward = 0.0
        self._stream_stop = threading.Event()
        self._stream_thread: threading.Thread | None = None

    # -- transport entry points ----------------------------------------------

    def handle_line(self, line: str) -> None:
        seq = None
        try:
            try:
                msg = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ProtocolError("bad_request", f"not valid JSON: {exc}") from exc
            if not isinstance(msg, dict):
                raise ProtocolError("bad_request", "message must be a JSON object")
            seq = msg.get("seq")
            mtype = msg.get("type")
            payload = msg.get("payload") or {}
            if not isinstance(payload, dict):
                raise ProtocolError("bad_request", "payload must be an object")
            if not self.greeted and mtype != "hello":
                raise ProtocolError("no_hello", "first message must be hello")
            handler = getattr(self, f"_on_{mtype}", None) if mtype else None
            if handler is None:
                raise ProtocolError("bad_request", f"unknown message type {mtype!r}")
            rtype, rpayload = handler(payload)
            self._send({"seq": seq, "type": rtype, "payload": rpayload})
        except ProtocolError as exc:
            self._send(
                {
                    "seq": seq,
                    "type": "error",
                    "payload": {"code": exc.code, "message": str(exc)},
                }
            )

    def close(self) -> None:
        self._stop_stream()

    # -- message handlers -----------------------------------------------------

    def _on_hello(self, payload: dict):
        version = payload.get("version")
        if version != PROTOCOL_VERSION:
            raise ProtocolError(
                "bad_version",
                f"server speaks {PROTOCOL_VERSION}, client sent {version!r}",
            )
        self.greeted = True
        return "hello", {"version": PROTOCOL_VERSION, "capabilities": CAPABILITIES}

    def _on_load_config(self, payload: dict):
        text = payload.get("text")
        if not isinstance(text, str):
            raise ProtocolError("bad_request", "load_config needs a 'text' string")
        try:
            config = load_config_text(text)
        except ConfigError as exc:
            raise ProtocolError("bad_config", str(exc)) from exc
        self.config = config
        self.config_name = payload.get("name", "<inline>")
        self.episode = None
        return "config_loaded", {
            "arenas": sorted(config.arenas),
            "show_notification": config.show_notification,
            "can_reset_episode": config.can_reset_episode,
            "can_change_perspective": config.can_change_perspective,
            "default_perspective": config.default_perspective,
        }

    def _on_reset(self, payload: dict):
        if self.config is None:
            raise ProtocolError("no_episode", "load a config before reset")
        arena_index = int(payload.get("arena_index", 0))
        seed = int(payload.get("seed", 0))
        if "obs_spec" in payload:
            self.obs_spec = parse_obs_spec(payload["obs_spec"])
        if self.episode is not None and self.episode.done:
            self.prev_episode_reward = self.episode.reward
        try:
            self.episode = Episode.from_config(
                self.config,
                arena_index,
                seed,
                obs_spec=self.obs_spec,
                prev_episode_reward=self.prev_episode_reward,
            )
        except Exception as exc:  # bad index or instantiation failure
            raise ProtocolError("bad_request", f"reset failed: {exc}") from exc
        return "reset_result", {
            "observation": encode_observation(self.episode.observe()),
            "episode": self._episode_state(),
        }

    def _require_episode(self) -> Episode:
        if self.episode is None:
            raise ProtocolError("no_episode", "no episode; send reset first")
        return self.episode

    def _on_step(self, payload: dict):
        ep = self._require_episode()
        action = payload.get("action")
        if not isinstance(action, int) or isinstance(action, bool) or not 0 <= action <= 8:
            raise ProtocolError("bad_action", f"action must be an int in [0, 8], got {action!r}")
        if ep.done:
            raise ProtocolError("no_episode", "episode is done; reset or skip")
        result = ep.step(Action(action))
        out = {
            "observation": encode_observation(result.observation),
            "reward_delta": result.reward_delta,
            "done": result.done,
            "info": {
                "health": result.health,
                "position": [float(v) for v in result.position],
                "velocity": [float(v) for v in result.velocity],
                "step": result.step,
            },
            "reward": result.reward,
            "done_reason": result.done_reason,
            "lights_on": result.lights_on,
        }
        if result.done:
            summary = ep.finish_episode()
            self.prev_episode_reward = summary.final_reward
            out["final_reward"] = summary.final_reward
            if self.config.show_notification:
                out["passed"] = summary.passed
        return "step_result", out

    def _on_view_request(self, payload: dict):
        ep = self._require_episode()
        columns = payload.get("columns", 160)
        if not isinstance(columns, int) or not 1 <= columns <= 1024:
            raise ProtocolError("bad_request", "columns must be an int in [1, 1024]")
        dist, rgb, category = view_columns(ep.world, columns, ep.lights_on)
        return "view", {
            "distance": [None if not np.isfinite(d) else float(d) for d in dist],
            "rgb": rgb.tolist(),
            "category": category.tolist(),
            "lights_on": ep.lights_on,
        }

    def _on_state_request(self, payload: dict):
        self._require_episode()
        return "state", self._state_payload()

    def _on_skip_episode(self, payload: dict):
        ep = self._require_episode()
        if not self.config.can_reset_episode:
            raise ProtocolError("not_allowed", "this config forbids skipping episodes")
        ep.skip()
        summary = ep.finish_episode()
        self.prev_episode_reward = summary.final_reward
        return "episode_skipped", {
            "final_reward": summary.final_reward,
            "passed": summary.passed,
            "steps": summary.steps,
            "done_reason": summary.done_reason,
        }

    def _on_stream_start(self, payload: dict):
        self._require_episode()
        hz = payload.get("hz", 30)
        if not isinstance(hz, (int, float)) or not 1 <= hz <= 60:
            raise ProtocolError("bad_request", "hz must be in [1, 60]")
        self._stop_stream()
        self._stream_stop = threading.Event()
        stop = self._stream_stop

        def pump():
            period = 1.0 / float(hz)
            while not stop.wait(period):
                if self.episode is None:
                    continue
                try:
                    self._send(
                        {"seq": None, "type": "state_push", "payload": self._state_payload()}
                    )
                except OSError:
                    return

        self._stream_thread = threading.Thread(target=pump, daemon=True)
        self._stream_thread.start()
        return "stream_started", {"hz": hz}

    def _on_stream_stop(self, payload: dict):
        self._stop_stream()
        return "stream_stopped", {}

    # -- helpers ---------------------------------------------------------------

    def _stop_stream(self) -> None:
        if self._stream_thread is not None:
            self._stream_stop.set()
            self._stream_thread = None

    def _episode_state(self) -> dict:
        st = self.episode.state()
        return {
            "step": st.step,
            "t": st.t,
            "reward": st.reward,
            "health": st.health,
            "prev_episode_reward": st.prev_episode_reward,
            "frozen_remaining": st.frozen_remaining,
            "lights_on": st.lights_on,
            "done": st.done,
            "done_reason": st.done_reason,
            "pass_mark": self.episode.arena.pass_mark,
        }

    def _state_payload(self) -> dict:
        ep = self.episode
        world = ep.world
        entities = [
            _encode_entity(ent, world.agent.eid)
            for eid, ent in sorted(world.entities.items())
            if ent.alive
        ]
        return {"episode": self._episode_state(), "entities": entities}


# --- transports -------------------------------------------------------------


def _recv_until(sock: socket.socket, buffer: bytearray, marker: bytes) -> bytes | None:
    """Read until the marker; returns bytes through it (marker stripped)."""
    while True:
        i = buffer.find(marker)
        if i >= 0:
            out = bytes(buffer[:i])
            del buffer[: i + len(marker)]
            return out
        if len(buffer) > MAX_LINE_BYTES:
            return None
        chunk = sock.recv(65536)
        if not chunk:
            return None
        buffer.extend(chunk)


class _WebSocketIO:
    """Minimal RFC 6455 server side: text, ping/pong, close."""

    def __init__(self, sock: socket.socket, buffer: bytearray):
        self.sock = sock
        self.buffer = buffer

    def _read_exact(self, n: int) -> bytes | None:
        while len(self.buffer) < n:
            chunk = self.sock.recv(65536)
            if not chunk:
                return None
            self.buffer.extend(chunk)
        out = bytes(self.buffer[:n])
        del self.buffer[:n]
        return out

    def recv_text(self) -> str | None:
        message = bytearray()
        while True:
            head = self._read_exact(2)
            if head is None:
                return None
            fin = bool(head[0] & 0x80)
            opcode = head[0] & 0x0F
            masked = bool(head[1] & 0x80)
            length = head[1] & 0x7F
            if length == 126:
                ext = self._read_exact(2)
                if ext is None:
                    return None
                length = struct.unpack(">H", ext)[0]
            elif length == 127:
                ext = self._read_exact(8)
                if ext is None:
                    return None
                length = struct.unpack(">Q", ext)[0]
            mask = self._read_exact(4) if masked else b"\x00" * 4
            if mask is None:
                return None
            data = self._read_exact(length) if length else b""
            if data is None:
                return None
            if masked:
                data = bytes(b ^ mask[i % 4] for i, b in enumerate(data))
            if opcode == 0x8:  # close
                try:
                    self.send_frame(0x8, data[:2])
                except OSError:
                    pass
                return None
            if opcode == 0x9:  # ping -> pong
                self.send_frame(0xA, data)
                continue
            if opcode in (0x1, 0x0):
                message.extend(data)
                if fin:
                    return message.decode("utf-8")
                continue
            # binary/pong/else: ignore
            if opcode == 0x2 and fin:
                message.clear()

    def send_frame(self, opcode: int, data: bytes) -> None:
        header = bytearray([0x80 | opcode])
        n = len(data)
        if n < 126:
            header.append(n)
        elif n < 1 << 16:
            header.append(126)
            header.extend(struct.pack(">H", n))
        else:
            header.append(127)
            header.extend(struct.pack(">Q", n))
        self.sock.sendall(bytes(header) + data)

    def send_text(self, text: str) -> None:
        self.send_frame(0x1, text.encode("utf-8"))


def _http_response(status: str, headers: dict, body: bytes = b"") -> bytes:
    lines = [f"HTTP/1.1 {status}"]
    headers = {"Content-Length": str(len(body)), "Connection": "close", **headers}
    lines += [f"{k}: {v}" for k, v in headers.items()]
    return ("\r\n".join(lines) + "\r\n\r\n").encode("ascii") + body


class ArenaServer:
    """Accept loop multiplexing JSON-lines, WebSocket, and static HTTP."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0, ui_dir=None):
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self._listener = socket.create_server((host, port))
        self.host, self.port = self._listener.getsockname()[:2]
        self._closing = threading.Event()
        self._threads: list[threading.Thread] = []
        self._next_session = 0

    # -- lifecycle -------------------------------------------------------------

    def serve_forever(self) -> None:
        while not self._closing.is_set():
            try:
                conn, _addr = self._listener.accept()
            except OSError:
                break
            t = threading.Thread(target=self._serve_connection, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def start(self) -> "ArenaServer":
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        self._threads.append(t)
        return self

    def shutdown(self) -> None:
        self._closing.set()
        try:
            self._listener.close()
        except OSError:
            pass

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.shutdown()

    # -- connection handling ---------------------------------------------------

    def _serve_connection(self, conn: socket.socket) -> None:
        buffer = bytearray()
        try:
            first = conn.recv(65536, socket.MSG_PEEK)
            if not first:
                return
            if first.startswith((b"GET ", b"POST ", b"HEAD ")):
                self._serve_http(conn, buffer)
            else:
                self._serve_json_lines(conn, buffer)
        except (OSError, ValueError):
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def _serve_json_lines(self, conn: socket.socket, buffer: bytearray) -> None:
        lock = threading.Lock()

        def send(obj: dict) -> None:
            data = (json.dumps(obj) + "\n").encode("utf-8")
            with lock:
                conn.sendall(data)

        session = self._new_session(send)
        try:
            while True:
                line = _recv_until(conn, buffer, b"\n")
                if line is None:
                    return
                text = line.decode("utf-8", errors="replace").strip()
                if text:
                    session.handle_line(text)
        finally:
            session.close()

    def _serve_http(self, conn: socket.socket, buffer: bytearray) -> None:
        head = _recv_until(conn, buffer, b"\r\n\r\n")
        if head is None:
            return
        lines = head.decode("latin-1").split("\r\n")
        method, path, _version = lines[0].split(" ", 2)
        headers = {}
        for ln in lines[1:]:
            if ":" in ln:
                k, v = ln.split(":", 1)
                headers[k.strip().lower()] = v.strip()
        if headers.get("upgrade", "").lower() == "websocket":
            self._serve_websocket(conn, buffer, headers)
        else:
            self._serve_static(conn, method, path.split("?")[0])

    def _serve_websocket(self, conn, buffer, headers) -> None:
        key = headers.get("sec-websocket-key", "")
        accept = base64.b64encode(
            hashlib.sha1((key + _WS_GUID).encode("ascii")).digest()
        ).decode("ascii")
        conn.sendall(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
            ).encode("ascii")
        )
        ws = _WebSocketIO(conn, buffer)
        lock = threading.Lock()

        def send(obj: dict) -> None:
            with lock:
                ws.send_text(json.dumps(obj))

        session = self._new_session(send)
        try:
            while True:
                text = ws.recv_text()
                if text is None:
                    return
                if text.strip():
                    session.handle_line(text)
        finally:
            session.close()

    def _serve_static(self, conn, method: str, path: str) -> None:
        if method not in ("GET", "HEAD"):
            conn.sendall(_http_response("405 Method Not Allowed", {}))
            return
        if self.ui_dir is None:
            conn.sendall(
                _http_response(
                    "404 Not Found",
                    {"Content-Type": "text/plain"},
                    b"no UI bundle configured; connect via WebSocket or TCP\n",
                )
            )
            return
        rel = path.lstrip("/") or "index.html"
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            conn.sendall(_http_response("404 Not Found", {"Content-Type": "text/plain"}, b"not found\n"))
            return
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        body = target.read_bytes() if method == "GET" else b""
        conn.sendall(_http_response("200 OK", {"Content-Type": ctype}, body))

    def _new_session(self, send) -> Session:
        self._next_session += 1
        return Session(send, self._next_session)


def serve(host: str = "127.0.0.1", port: int = 0, ui_dir=None) -> None:
    """Run until interrupted, announcing the bound endpoint on stdout."""
    server = ArenaServer(host, port, ui_dir=ui_dir)
    print(f"listening on {server.host}:{server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
