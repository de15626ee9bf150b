"""Byte-stream transports between companion and firmware.

Every endpoint offers ``send(data)`` and ``read(timeout=0.0) -> bytes``. A
``timeout`` of 0 polls; ``None`` blocks until data is available. Bytes arrive
in send order per direction.
"""

from __future__ import annotations

import collections
import random
import select
import socket
import threading
import time
from typing import Callable


class TransportError(OSError):
    pass


class InprocEndpoint:
    """One side of an in-process byte pipe.

    With ``delay``/``jitter`` (seconds) every chunk becomes readable only at
    ``send_time + delay + U(0, jitter)``, measured on ``clock``. Delivery times
    are forced monotone so ordering is preserved. Passing a simulated clock
    makes delivery fully deterministic.
    """

    def __init__(self, clock: Callable[[], float] = time.perf_counter, delay: float = 0.0,
                 jitter: float = 0.0, seed: int = 0):
        self.clock = clock
        self.delay = delay
        self.jitter = jitter
        self._rng = random.Random(seed)
        self._peer: InprocEndpoint | None = None
        self._queue: collections.deque[tuple[float, bytes]] = collections.deque()
        self._cond = threading.Condition()
        self._last_due = float("-inf")
        self.bytes_sent = 0

    def send(self, data: bytes) -> None:
        peer = self._peer
        if peer is None:
            raise TransportError("endpoint not connected")
        due = self.clock() + self.delay
        if self.jitter:
            due += self._rng.uniform(0.0, self.jitter)
        self.bytes_sent += len(data)
        with peer._cond:
            due = max(due, peer._last_due)
            peer._last_due = due
            peer._queue.append((due, bytes(data)))
            peer._cond.notify()

    def _take_ready(self, now: float) -> bytes:
        out = bytearray()
        q = self._queue
        while q and q[0][0] <= now:
            out += q.popleft()[1]
        return bytes(out)

    def read(self, timeout: float | None = 0.0) -> bytes:
        deadline = None if timeout is None else self.clock() + timeout
        with self._cond:
            while True:
                now = self.clock()
                if self._queue:
                    due = self._queue[0][0]
                    if due <= now:
                        return self._take_ready(now)
                    wait_until = due if deadline is None else min(due, deadline)
                else:
                    if deadline is not None and now >= deadline:
                        return b""
                    self._cond.wait(None if deadline is None else max(0.0, deadline - now))
                    continue
                if deadline is not None and now >= deadline:
                    return b""
                remaining = wait_until - now
                if remaining > 0.002:
                    self._cond.wait(remaining - 0.001)
                else:
                    # sub-millisecond: release the lock and spin for precision
                    self._cond.release()
                    try:
                        time.sleep(0)
                    finally:
                        self._cond.acquire()

    def pending(self) -> int:
        with self._cond:
            return len(self._queue)

    def close(self) -> None:
        pass


def inproc_pair(clock: Callable[[], float] = time.perf_counter, delay: float = 0.0,
                jitter: float = 0.0, seed: int = 0) -> tuple[InprocEndpoint, InprocEndpoint]:
    """Connected (companion, firmware) endpoints with the same per-direction delay."""
    a = InprocEndpoint(clock, delay, jitter, seed)
    b = InprocEndpoint(clock, delay, jitter, seed + 1)
    a._peer, b._peer = b, a
    return a, b


class SocketEndpoint:
    """Endpoint backed by a connected stream socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.sock.setblocking(False)
        self.bytes_sent = 0
        self._wlock = threading.Lock()

    def send(self, data: bytes) -> None:
        view = memoryview(data)
        with self._wlock:
            while view:
                try:
                    n = self.sock.send(view)
                except BlockingIOError:
                    select.select([], [self.sock], [], 1.0)
                    continue
                except OSError as exc:
                    raise TransportError(str(exc)) from exc
                view = view[n:]
                self.bytes_sent += n

    def read(self, timeout: float | None = 0.0) -> bytes:
        r, _, _ = select.select([self.sock], [], [], timeout)
        if not r:
            return b""
        try:
            data = self.sock.recv(65536)
        except BlockingIOError:
            return b""
        except OSError as exc:
            raise TransportError(str(exc)) from exc
        if not data:
            raise TransportError("peer closed the connection")
        return data

    def close(self) -> None:
        self.sock.close()


def socket_pair() -> tuple[SocketEndpoint, SocketEndpoint]:
    a, b = socket.socketpair()
    return SocketEndpoint(a), SocketEndpoint(b)


class DelayedEndpoint:
    """Wraps any endpoint and holds received bytes for ``delay`` seconds after arrival."""

    def __init__(self, inner, delay: float, clock: Callable[[], float] = time.perf_counter):
        self.inner = inner
        self.delay = delay
        self.clock = clock
        self._held: collections.deque[tuple[float, bytes]] = collections.deque()

    def send(self, data: bytes) -> None:
        self.inner.send(data)

    def read(self, timeout: float | None = 0.0) -> bytes:
        deadline = None if timeout is None else self.clock() + timeout
        while True:
            now = self.clock()
            fresh = self.inner.read(0.0)
            if fresh:
                self._held.append((now + self.delay, fresh))
            out = bytearray()
            while self._held and self._held[0][0] <= now:
                out += self._held.popleft()[1]
            if out:
                return bytes(out)
            if deadline is not None and now >= deadline:
                return b""
            if self._held:
                remaining = self._held[0][0] - now
                if remaining > 0.002:
                    time.sleep(remaining - 0.001)
                else:
                    time.sleep(0)
            else:
                wait = None if deadline is None else max(0.0, deadline - now)
                fresh = self.inner.read(wait if wait is None else min(wait, 0.05))
                if fresh:
                    self._held.append((self.clock() + self.delay, fresh))

    def close(self) -> None:
        self.inner.close()
