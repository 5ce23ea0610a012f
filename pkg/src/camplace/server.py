"""Reset/step service: one environment per connection, JSON lines on a stream.

Requests:  {"id": n, "cmd": "reset", "seed": int}
           {"id": n, "cmd": "step", "actions": [[dx, dy], ...]}
           {"id": n, "cmd": "close"}
Responses carry the echoed id and a "protocol": 1 field; errors come back as
{"id": n, "protocol": 1, "error": "<code>"} and keep the connection open.
Floats are serialized with full round-trip precision, so a wire episode is
bit-equivalent to an in-process one.
"""

from __future__ import annotations

import json
import socketserver
import sys

import numpy as np

from .environment import EnvConfig, Observation, PlacementEnv, RewardBreakdown
from .errors import BindFailureError, CamplaceError, MalformedMessageError
from .pointcloud import Aabb, PointCloud

PROTOCOL_VERSION = 1


def _observation_payload(
    obs: Observation, reward: RewardBreakdown | None, done: bool
) -> dict:
    payload: dict = {
        "protocol": PROTOCOL_VERSION,
        "observation": {
            "points": [float(v) for v in obs.observed_points.ravel()],
            "bbox_min": None if obs.observed_bbox is None else [float(v) for v in obs.observed_bbox.min],
            "bbox_max": None if obs.observed_bbox is None else [float(v) for v in obs.observed_bbox.max],
            "cameras": [float(v) for v in obs.cameras.ravel()],
            "step": obs.step,
        },
        "done": done,
    }
    if reward is not None:
        payload["reward"] = {
            "sc": reward.sc,
            "doe": reward.doe,
            "penalty": reward.penalty,
            "combined": reward.combined,
            "mapped": reward.mapped,
        }
    return payload


def encode_observation(
    obs: Observation, reward: RewardBreakdown | None = None, done: bool = False
) -> bytes:
    """One response line (without id): observation bundle, optional reward."""
    return (json.dumps(_observation_payload(obs, reward, done)) + "\n").encode("utf-8")


def decode_observation(line: bytes) -> tuple[Observation, RewardBreakdown | None, bool]:
    """Inverse of encode_observation (bbox is reconstructed from the points)."""
    msg = json.loads(line)
    o = msg["observation"]
    pts = np.array(o["points"], dtype=np.float64).reshape(-1, 3)
    bbox = None
    if o["bbox_min"] is not None:
        bbox = Aabb(np.array(o["bbox_min"]), np.array(o["bbox_max"]))
    obs = Observation(pts, bbox, np.array(o["cameras"], dtype=np.float64).reshape(-1, 3), o["step"])
    reward = None
    if "reward" in msg:
        r = msg["reward"]
        reward = RewardBreakdown(r["sc"], r["doe"], r["penalty"], 0.0, 0.0, r["combined"], r["mapped"])
    return obs, reward, msg["done"]


class EnvSession:
    """One client's environment; handles decoded request dicts sequentially."""

    def __init__(self, scene: PointCloud, config: EnvConfig, metrics_path: str | None = None):
        self.env = PlacementEnv(scene, config)
        self.done = True
        self.metrics_path = metrics_path
        self.closed = False

    def _log_metrics(self, step: int, rb: RewardBreakdown) -> None:
        if self.metrics_path is None:
            return
        with open(self.metrics_path, "a") as fh:
            fh.write(
                f"{step},{rb.sc:.6f},{rb.doe:.6f},{int(rb.penalty)},"
                f"{rb.combined:.6f},{rb.mapped:.6f}\n"
            )

    def handle_line(self, line: bytes) -> bytes:
        try:
            msg = json.loads(line)
            if not isinstance(msg, dict) or "cmd" not in msg:
                raise MalformedMessageError("message must be an object with a cmd")
        except (json.JSONDecodeError, MalformedMessageError):
            return self._error(None, "malformed-message")
        mid = msg.get("id")
        cmd = msg.get("cmd")
        try:
            if cmd == "reset":
                obs = self.env.reset(int(msg.get("seed", 0)))
                self.done = False
                payload = _observation_payload(obs, None, False)
            elif cmd == "step":
                if self.done:
                    return self._error(mid, "episode-finished")
                obs, rb, done = self.env.step(np.asarray(msg.get("actions", []), dtype=np.float64))
                self.done = done
                self._log_metrics(obs.step, rb)
                payload = _observation_payload(obs, rb, done)
            elif cmd == "close":
                self.closed = True
                payload = {"protocol": PROTOCOL_VERSION, "ok": True}
            else:
                return self._error(mid, "malformed-message")
        except CamplaceError as exc:
            return self._error(mid, exc.code)
        except (TypeError, ValueError):
            return self._error(mid, "malformed-message")
        payload["id"] = mid
        return (json.dumps(payload) + "\n").encode("utf-8")

    @staticmethod
    def _error(mid, code: str) -> bytes:
        return (json.dumps({"id": mid, "protocol": PROTOCOL_VERSION, "error": code}) + "\n").encode()


def serve_stdio(
    scene: PointCloud,
    config: EnvConfig,
    stdin=None,
    stdout=None,
    metrics_path: str | None = None,
) -> None:
    """Serve one session over stdin/stdout until close or EOF."""
    stdin = stdin if stdin is not None else sys.stdin.buffer
    stdout = stdout if stdout is not None else sys.stdout.buffer
    session = EnvSession(scene, config, metrics_path)
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(session.handle_line(line))
        stdout.flush()
        if session.closed:
            break


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        session = EnvSession(self.server.scene, self.server.env_config, self.server.metrics_path)
        for line in self.rfile:
            if not line.strip():
                continue
            self.wfile.write(session.handle_line(line))
            self.wfile.flush()
            if session.closed:
                break


class EnvTcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str, port: int, scene: PointCloud, config: EnvConfig,
                 metrics_path: str | None = None):
        try:
            super().__init__((host, port), _Handler)
        except OSError as exc:
            raise BindFailureError(f"{host}:{port}: {exc}") from None
        self.scene = scene
        self.env_config = config
        self.metrics_path = metrics_path


def serve_tcp(scene: PointCloud, config: EnvConfig, host: str, port: int,
              metrics_path: str | None = None) -> None:
    """Serve until interrupted; each connection gets its own environment."""
    with EnvTcpServer(host, port, scene, config, metrics_path) as srv:
        srv.serve_forever()
