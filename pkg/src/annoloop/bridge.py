"""Host side of the detector wire protocol.

An external process (or TCP endpoint) can stand in for the campaign's
detector by speaking newline-delimited JSON, UTF-8, one message per line,
strict request/response alternation.  Protocol version 1:

    -> {"kind": "hello", "protocol_version": 1}
    <- {"kind": "hello_ack", "descriptor": "<adapter name>"}
    -> {"kind": "train", "batch_index": 0, "images": [
           {"image_id": "...", "width": 640, "height": 480,
            "objects": [{"class_label": "...", "box": [x0, y0, x1, y1]}]}]}
    <- {"kind": "train_ack", "batch_index": 0}
    -> {"kind": "predict", "batch_index": 1, "images": [
           {"image_id": "...", "width": 640, "height": 480}]}
    <- {"kind": "predictions", "batch_index": 1, "detections": [
           {"image_id": "...", "class_label": "...", "box": [...],
            "confidence": 0.9}]}
    -> {"kind": "reset"}          <- {"kind": "reset_ack"}
    -> {"kind": "shutdown"}       (no response; the adapter exits)

Either side may answer {"kind": "error", "code": "...", "message": "..."}.
Image pixels never travel over the wire: predict requests carry ids and
dimensions only, and the adapter resolves pixel data itself from the
directory it was launched with (the ``--images <dir>`` argument convention).

Failures are never silently degraded: a version mismatch or malformed
handshake raises :class:`HandshakeError`; a dead pipe, EOF or request
deadline raises :class:`TransportError`; out-of-order, malformed or
uncorrelated responses raise :class:`ProtocolError`.  Any of these aborts
the campaign.
"""

from __future__ import annotations

import json
import queue
import socket
import subprocess
import threading
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

from .dataset_io import ImageRecord
from .detectors import DetectorSession
from .geometry import BoundingBox, DegenerateBox, clamp_to_image
from .matching import Detection

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 300.0


class BridgeError(Exception):
    pass


class HandshakeError(BridgeError):
    pass


class TransportError(BridgeError):
    pass


class ProtocolError(BridgeError):
    pass


@dataclass(frozen=True)
class LaunchSpec:
    """How to reach the adapter: a command line or a ``host:port`` address."""

    command: tuple[str, ...] | None = None
    address: str | None = None
    images_dir: str | None = None
    timeout: float = DEFAULT_TIMEOUT
    protocol_version: int = PROTOCOL_VERSION

    def __post_init__(self):
        if bool(self.command) == bool(self.address):
            raise ValueError("provide exactly one of command or address")


def validate_predictions(
    message: Mapping,
    images: Sequence[ImageRecord],
    classes: Sequence[str],
    expected_batch_index: int,
) -> tuple[dict[str, list[Detection]], int]:
    """Sanitize a predictions message against the outstanding predict request.

    Returns detections per requested image plus a count of dropped or
    adjusted entries (degenerate after clamping, unknown class label,
    out-of-range confidence).  Unknown image ids or a batch_index that does
    not correlate are protocol violations, not warnings.
    """
    if message.get("batch_index") != expected_batch_index:
        raise ProtocolError(
            f"predictions for batch {message.get('batch_index')!r}, "
            f"expected {expected_batch_index}"
        )
    dimensions = {img.image_id: (img.width, img.height) for img in images}
    known = set(classes)
    out: dict[str, list[Detection]] = {img.image_id: [] for img in images}
    warnings = 0
    for entry in message.get("detections", ()):
        if not isinstance(entry, Mapping):
            raise ProtocolError(f"malformed detection record: {entry!r}")
        image_id = entry.get("image_id")
        if image_id not in dimensions:
            raise ProtocolError(f"detection for unknown image_id {image_id!r}")
        label = entry.get("class_label")
        if label not in known:
            warnings += 1
            continue
        try:
            corners = [float(v) for v in entry["box"]]
            if len(corners) != 4:
                raise ValueError("box must have 4 corners")
            confidence = float(entry["confidence"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed detection record: {exc}") from exc
        clamped_confidence = min(max(confidence, 0.0), 1.0)
        if clamped_confidence != confidence:
            warnings += 1
        width, height = dimensions[image_id]
        try:
            box = clamp_to_image(BoundingBox(*corners), width, height)
        except (DegenerateBox, ValueError):
            warnings += 1
            continue
        out[image_id].append(Detection(image_id, label, box, clamped_confidence))
    return out, warnings


class BridgeSession(DetectorSession):
    """DetectorSession whose train/predict/reset travel over the wire."""

    def __init__(self, spec: LaunchSpec, classes: Sequence[str]):
        self._spec = spec
        self._classes = tuple(classes)
        self._descriptor = "bridge/unconnected"
        self._proc: subprocess.Popen | None = None
        self._sock: socket.socket | None = None
        self._writer: IO[str] | None = None
        self._lines: queue.Queue = queue.Queue()
        self._closed = False
        self.validation_warnings = 0
        self._connect()
        self._handshake()

    # -- transport ---------------------------------------------------------

    def _connect(self) -> None:
        if self._spec.command:
            command = list(self._spec.command)
            if self._spec.images_dir:
                command += ["--images", self._spec.images_dir]
            try:
                self._proc = subprocess.Popen(
                    command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    encoding="utf-8",
                    bufsize=1,
                )
            except OSError as exc:
                raise TransportError(f"cannot launch adapter: {exc}") from exc
            self._writer = self._proc.stdin
            reader = self._proc.stdout
        else:
            host, _, port = self._spec.address.rpartition(":")
            try:
                self._sock = socket.create_connection((host, int(port)))
            except OSError as exc:
                raise TransportError(f"cannot connect to adapter: {exc}") from exc
            self._writer = self._sock.makefile("w", encoding="utf-8", newline="\n")
            reader = self._sock.makefile("r", encoding="utf-8")
        thread = threading.Thread(target=self._pump, args=(reader,), daemon=True)
        thread.start()

    def _pump(self, reader: IO[str]) -> None:
        try:
            for line in reader:
                self._lines.put(line)
        except (OSError, ValueError):
            pass
        self._lines.put(None)  # EOF sentinel

    def _send(self, record: Mapping) -> None:
        if self._writer is None or self._closed:
            raise TransportError("bridge session is closed")
        try:
            self._writer.write(json.dumps(record, sort_keys=True) + "\n")
            self._writer.flush()
        except (OSError, ValueError) as exc:
            raise TransportError(f"adapter pipe broken: {exc}") from exc

    def _receive(self) -> dict:
        try:
            line = self._lines.get(timeout=self._spec.timeout)
        except queue.Empty:
            raise TransportError(
                f"adapter did not respond within {self._spec.timeout:.0f} s"
            ) from None
        if line is None:
            raise TransportError("adapter closed the connection")
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed response line: {exc}") from exc
        if not isinstance(message, dict):
            raise ProtocolError("response is not a JSON object")
        return message

    def _request(self, record: Mapping, expected_kind: str) -> dict:
        self._send(record)
        response = self._receive()
        kind = response.get("kind")
        if kind == "error":
            raise ProtocolError(
                f"adapter error {response.get('code')!r}: {response.get('message')}"
            )
        if kind != expected_kind:
            raise ProtocolError(f"expected {expected_kind!r} response, got {kind!r}")
        return response

    # -- protocol ----------------------------------------------------------

    def _handshake(self) -> None:
        try:
            response = self._request(
                {"kind": "hello", "protocol_version": self._spec.protocol_version},
                "hello_ack",
            )
        except (ProtocolError, TransportError) as exc:
            raise HandshakeError(f"handshake failed: {exc}") from exc
        descriptor = response.get("descriptor")
        if not isinstance(descriptor, str) or not descriptor:
            raise HandshakeError("hello_ack carried no descriptor")
        self._descriptor = descriptor

    @property
    def descriptor(self) -> str:
        return self._descriptor

    def train(self, images: Sequence[ImageRecord], batch_index: int = 0) -> None:
        payload = {
            "kind": "train",
            "batch_index": batch_index,
            "images": [
                {
                    "image_id": img.image_id,
                    "width": img.width,
                    "height": img.height,
                    "objects": [
                        {
                            "class_label": obj.class_label,
                            "box": [obj.box.xmin, obj.box.ymin, obj.box.xmax, obj.box.ymax],
                        }
                        for obj in img.objects
                    ],
                }
                for img in images
            ],
        }
        response = self._request(payload, "train_ack")
        if response.get("batch_index") != batch_index:
            raise ProtocolError(
                f"train_ack for batch {response.get('batch_index')!r}, expected {batch_index}"
            )

    def predict(
        self, images: Sequence[ImageRecord], batch_index: int = 0
    ) -> dict[str, list[Detection]]:
        payload = {
            "kind": "predict",
            "batch_index": batch_index,
            "images": [
                {"image_id": img.image_id, "width": img.width, "height": img.height}
                for img in images
            ],
        }
        response = self._request(payload, "predictions")
        detections, warnings = validate_predictions(
            response, images, self._classes, batch_index
        )
        self.validation_warnings += warnings
        return detections

    def reset(self) -> None:
        self._request({"kind": "reset"}, "reset_ack")

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            if self._writer is not None:
                self._writer.write(json.dumps({"kind": "shutdown"}) + "\n")
                self._writer.flush()
        except (OSError, ValueError):
            pass
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass

    def __enter__(self) -> "BridgeSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def bridge_session(spec: LaunchSpec, classes: Sequence[str]) -> BridgeSession:
    """Launch or connect an adapter and complete the handshake."""
    return BridgeSession(spec, classes)
