"""Echo adapter: a stand-in model for protocol tests and demos.

Answers image requests with the red channel as the probability map and tile
requests with a trivial deterministic class, so round trips are byte-exact
and easy to assert against. Run with ``python -m agavescan.adapters.echo``.
"""

from __future__ import annotations

import sys

from ..segmenter import (MSG_CLASS, MSG_ERROR, MSG_IMAGE, MSG_PROBMAP,
                         MSG_TILE, AdapterError, ProbabilityMap, decode_frame,
                         encode_class_frame, encode_error_frame,
                         encode_probmap_frame)


def _read_exact(stream, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            if buf:
                raise AdapterError("stdin closed mid-frame")
            raise EOFError
        buf += chunk
    return buf


def serve(stdin, stdout) -> None:
    while True:
        try:
            msg_type, payload = decode_frame(lambda n: _read_exact(stdin, n))
        except EOFError:
            return
        except AdapterError as exc:
            stdout.write(encode_error_frame(str(exc)))
            stdout.flush()
            return
        if msg_type == MSG_IMAGE:
            red = payload[:, :, 0] if payload.ndim == 3 else payload
            stdout.write(encode_probmap_frame(ProbabilityMap(red.copy())))
        elif msg_type == MSG_TILE:
            flat = payload.reshape(-1)
            stdout.write(encode_class_frame(int(flat[0]) % 2, int(flat[1])))
        elif msg_type in (MSG_PROBMAP, MSG_CLASS, MSG_ERROR):
            stdout.write(encode_error_frame(f"unexpected frame type {msg_type}"))
        stdout.flush()


def main() -> None:
    serve(sys.stdin.buffer, sys.stdout.buffer)


if __name__ == "__main__":
    main()
