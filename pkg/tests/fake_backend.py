"""Scriptable stand-in backend for client tests.

Deliberately written with raw struct packing rather than the library's
protocol helpers, so client-side framing is exercised against an
independent implementation. Mode (argv[1]):

    echo        advertise scale 1, answer requests with the input data
    error       answer every request with an ERROR frame
    sleep       accept requests but never answer them
    die         exit as soon as a request arrives
    badversion  answer HELLO with a version-2 frame
    silent      never answer anything
"""

import struct
import sys
import time

HEADER = struct.Struct("<4sBBI")
SR_HEAD = struct.Struct("<BBII")


def read_exact(n):
    data = sys.stdin.buffer.read(n)
    if data is None or len(data) < n:
        sys.exit(0)
    return data


def read_frame():
    magic, version, msg_type, length = HEADER.unpack(read_exact(HEADER.size))
    assert magic == b"CSSR" and version == 1
    payload = read_exact(length) if length else b""
    return msg_type, payload


def send(msg_type, payload=b"", version=1):
    sys.stdout.buffer.write(HEADER.pack(b"CSSR", version, msg_type, len(payload)))
    sys.stdout.buffer.write(payload)
    sys.stdout.buffer.flush()


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "echo"
    if mode == "silent":
        time.sleep(3600)
        return
    msg_type, _ = read_frame()
    assert msg_type == 1  # HELLO
    caps = struct.pack("<BB", 1, 1) + struct.pack("<II", 1024, 1024)
    if mode == "badversion":
        send(2, caps, version=2)
        return
    send(2, caps)
    while True:
        msg_type, payload = read_frame()
        if msg_type != 3:
            send(5, b"unexpected frame")
            continue
        if mode == "die":
            sys.exit(1)
        if mode == "sleep":
            time.sleep(3600)
            return
        if mode == "error":
            send(5, b"synthetic failure")
            continue
        if len(payload) < SR_HEAD.size:
            send(5, b"short payload")
            continue
        scale, channels, width, height = SR_HEAD.unpack_from(payload)
        if len(payload) != SR_HEAD.size + 4 * width * height * channels:
            send(5, b"malformed payload")
            continue
        if scale != 1:
            send(5, f"unsupported scale {scale}".encode())
            continue
        send(4, payload)  # scale 1: the response is the request


if __name__ == "__main__":
    main()
