#!/usr/bin/env python3
"""Record broker reference fixtures from a real Redis server.

Generates a seeded random command script over three connections, runs it
against a live server and stores, per step, the exact bytes each connection
received. The broker acceptance test replays the same script and compares
bytes.

    redis-server --port 6399 --save '' --appendonly no &
    python3 record_reference.py --port 6399 --seed 20220315 --steps 500 \
        > broker_reference.json
"""
import argparse
import json
import random
import socket

KEYS = ["ES=F", "CL=F", "GC=F"]
CHANNELS = ["ES=F", "CL=F"]
CONNS = 3


def encode(parts):
    out = b"*%d\r\n" % len(parts)
    for p in parts:
        b = p.encode()
        out += b"$%d\r\n%s\r\n" % (len(b), b)
    return out


class Reader:
    def __init__(self, sock):
        self.sock = sock
        self.buf = b""

    def _fill(self):
        chunk = self.sock.recv(65536)
        if not chunk:
            raise EOFError("server closed connection")
        self.buf += chunk

    def _line(self, pos):
        while True:
            idx = self.buf.find(b"\r\n", pos)
            if idx >= 0:
                return idx
            self._fill()

    def _value_end(self, pos):
        end = self._line(pos)
        kind = self.buf[pos:pos + 1]
        if kind in (b"+", b"-", b":"):
            return end + 2
        n = int(self.buf[pos + 1:end])
        if kind == b"$":
            if n < 0:
                return end + 2
            while len(self.buf) < end + 2 + n + 2:
                self._fill()
            return end + 2 + n + 2
        if kind == b"*":
            cur = end + 2
            for _ in range(max(n, 0)):
                cur = self._value_end(cur)
            return cur
        raise ValueError("bad type byte %r" % kind)

    def take(self, count):
        out = b""
        for _ in range(count):
            end = self._value_end(0)
            out += self.buf[:end]
            self.buf = self.buf[end:]
        return out


def score_token(rng):
    r = rng.random()
    if r < 0.55:
        return str(1647381600 + rng.randrange(0, 12) * 10)
    if r < 0.75:
        return "%d.%d" % (rng.randrange(-50, 50), rng.randrange(0, 100))
    return rng.choice(["-inf", "+inf", "inf", "abc", "nan", "", "1e3", "-0", "2.5e-3"])


def bound_token(rng):
    r = rng.random()
    if r < 0.5:
        return str(1647381600 + rng.randrange(-2, 14) * 10)
    if r < 0.7:
        return "(" + str(1647381600 + rng.randrange(0, 12) * 10)
    return rng.choice(["-inf", "+inf", "(-inf", "foo", "0", "-5.5"])


def index_token(rng):
    if rng.random() < 0.08:
        return rng.choice(["x", "1.5", "+1", "01"])
    return str(rng.randrange(-6, 7))


def member(rng):
    t = 1647381600 + rng.randrange(0, 12) * 10
    close = 4261.75 + rng.randrange(-8, 9) * 0.25
    return "%d;%s;-0.25;-0.0059;%d" % (t, repr(close), 1200000 + rng.randrange(0, 5) * 100)


def gen_command(rng, conn, subs):
    if subs and rng.random() < 0.8:
        op = rng.choice(["SUBSCRIBE", "UNSUBSCRIBE", "UNSUBSCRIBE", "PING"])
    elif conn == 0:
        op = rng.choices(
            ["ZADD", "ZRANGE", "ZREMRANGEBYSCORE", "ZCARD", "DEL", "PING", "PUBLISH"],
            weights=[30, 16, 9, 8, 4, 5, 28])[0]
    else:
        op = rng.choices(
            ["ZADD", "ZRANGE", "ZREMRANGEBYSCORE", "ZCARD", "DEL", "PING",
             "PUBLISH", "SUBSCRIBE", "UNSUBSCRIBE"],
            weights=[26, 14, 8, 8, 4, 6, 14, 10, 10])[0]
    key = rng.choice(KEYS)
    return build(rng, op, key, subs)


def build(rng, op, key, subs):
    if op == "ZADD":
        return [op, key, score_token(rng), member(rng)]
    if op == "ZRANGE":
        return [op, key, index_token(rng), index_token(rng)]
    if op == "ZREMRANGEBYSCORE":
        return [op, key, bound_token(rng), bound_token(rng)]
    if op == "ZCARD":
        return [op, key]
    if op == "DEL":
        return [op] + rng.sample(KEYS, rng.randrange(1, 3))
    if op == "PING":
        return [op]
    if op == "PUBLISH":
        return [op, rng.choice(CHANNELS), member(rng)]
    if op == "SUBSCRIBE":
        return [op, rng.choice(CHANNELS)]
    # bare UNSUBSCRIBE only when reply order cannot depend on server hashing
    if len(subs) <= 1 and rng.random() < 0.3:
        return [op]
    return [op, rng.choice(CHANNELS)]


ALLOWED_SUBSCRIBED = {"SUBSCRIBE", "UNSUBSCRIBE", "PING"}


def expected_counts(conn, cmd, subs):
    """Number of top-level values each connection receives for this step."""
    counts = [0] * CONNS
    op = cmd[0]
    mine = subs[conn]
    if mine and op not in ALLOWED_SUBSCRIBED:
        counts[conn] = 1
        return counts
    if op == "SUBSCRIBE":
        mine.update(cmd[1:])
        counts[conn] = len(cmd) - 1
    elif op == "UNSUBSCRIBE":
        if len(cmd) == 1:
            counts[conn] = max(1, len(mine))
            mine.clear()
        else:
            counts[conn] = len(cmd) - 1
            mine.difference_update(cmd[1:])
    elif op == "PUBLISH":
        counts[conn] = 1
        for other in range(CONNS):
            if cmd[1] in subs[other]:
                counts[other] += 1
    else:
        counts[conn] = 1
    return counts


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=6379)
    ap.add_argument("--seed", type=int, default=20220315)
    ap.add_argument("--steps", type=int, default=500)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    socks = [socket.create_connection((args.host, args.port)) for _ in range(CONNS)]
    for s in socks:
        s.settimeout(5)
    readers = [Reader(s) for s in socks]
    socks[0].sendall(encode(["DEL"] + KEYS))
    readers[0].take(1)

    server = socks[0]
    server.sendall(encode(["INFO", "server"]))
    info = readers[0].take(1).decode()
    version = next((l.split(":")[1].strip() for l in info.splitlines()
                    if l.startswith("redis_version:")), "unknown")

    subs = [set() for _ in range(CONNS)]
    steps = []
    for _ in range(args.steps):
        conn = rng.randrange(CONNS)
        cmd = gen_command(rng, conn, subs[conn])
        counts = expected_counts(conn, cmd, subs)
        socks[conn].sendall(encode(cmd))
        replies = {}
        for c in range(CONNS):
            if counts[c]:
                replies[str(c)] = readers[c].take(counts[c]).decode()
        steps.append({"conn": conn, "cmd": cmd, "replies": replies})

    for s, r in zip(socks, readers):
        s.settimeout(0.3)
        try:
            r._fill()
        except (socket.timeout, EOFError):
            pass
        if r.buf:
            raise SystemExit("unexpected trailing bytes: %r" % r.buf)

    json.dump({"server": "redis " + version, "seed": args.seed,
               "connections": CONNS, "steps": steps}, __import__("sys").stdout, indent=1)


if __name__ == "__main__":
    main()
