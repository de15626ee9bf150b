"""Round-trip-time benchmark over the serial link.

The firmware runs its normal node loop with ``SERIAL_ECHO=1`` in a worker
thread; the companion side sends offboard commands, waits for the
byte-identical echo and records the round trip on a monotonic clock.
"""

from __future__ import annotations

import statistics
import threading
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import protocol as proto
from .firmware import Firmware, FirmwareNode, ImuSample, RcChannels
from .params import ParamStore
from .transport import DelayedEndpoint, inproc_pair, socket_pair

ECHO_TIMEOUT = 1.0


class EchoTimeout(TimeoutError):
    pass


@dataclass(frozen=True)
class RttStats:
    ave: float  # ms
    max: float
    min: float
    count: int
    received_rate: float  # Hz

    def table(self, label: str = "inproc") -> str:
        head = f"{'link':>10} | {'ave ms':>9} {'max ms':>9} {'min ms':>9} {'rx rate Hz':>12}"
        row = f"{label:>10} | {self.ave:9.3f} {self.max:9.3f} {self.min:9.3f} {self.received_rate:12.0f}"
        return f"{head}\n{'-' * len(head)}\n{row}"


def rtt_stats(samples, duration: float | None = None) -> RttStats:
    """Mean/max/min of RTT samples in ms; rate is count/duration (Hz)."""
    samples = list(samples)
    if not samples:
        raise ValueError("no RTT samples")
    rate = len(samples) / duration if duration else float("nan")
    return RttStats(statistics.fmean(samples), max(samples), min(samples), len(samples), rate)


class Echoer:
    """Companion-side helper that sends a command and waits for its echo."""

    def __init__(self, link, clock: Callable[[], float] = time.perf_counter):
        self.link = link
        self.clock = clock
        self.decoder = proto.StreamDecoder()
        self._pending: list[proto.Message] = []
        self.seq = 0

    def roundtrip(self, cmd: proto.OffboardCommand, timeout: float = ECHO_TIMEOUT) -> float:
        frame = proto.encode(cmd, self.seq)
        self.seq = (self.seq + 1) & 0xFF
        t0 = self.clock()
        self.link.send(frame)
        wall_deadline = time.monotonic() + timeout
        while True:
            while self._pending:
                msg = self._pending.pop(0)
                if isinstance(msg, proto.OffboardCommand):
                    t1 = self.clock()
                    if msg.payload() != cmd.payload() or msg.mode != cmd.mode:
                        raise ValueError("echoed payload differs from the command sent")
                    return (t1 - t0) * 1e3
            remaining = wall_deadline - time.monotonic()
            if remaining <= 0:
                raise EchoTimeout(f"no echo within {timeout} s")
            self._pending.extend(self.decoder.feed(self.link.read(min(remaining, 0.05))))


def echo_roundtrip(link, payload, timestamp_fn: Callable[[], float] = time.perf_counter,
                   timeout: float = ECHO_TIMEOUT) -> float:
    """Send one offboard command carrying ``payload`` (6 values) and return the RTT in ms."""
    return Echoer(link, timestamp_fn).roundtrip(proto.OffboardCommand(tuple(payload)), timeout)


class BenchBoard:
    """Minimal board for running the firmware node against a real-time link."""

    def __init__(self, link, clock: Callable[[], float] = time.perf_counter, poll: float = 0.001):
        self.link = link
        self._clock = clock
        self.poll = poll
        self.outputs = np.zeros(10)

    def clock(self) -> float:
        return self._clock()

    def read_rc(self) -> RcChannels:
        return RcChannels()

    def read_imu(self) -> ImuSample:
        return ImuSample((0.0, 0.0, -9.80665), (0.0, 0.0, 0.0), self._clock())

    def serial_read(self) -> bytes:
        return self.link.read(self.poll)

    def serial_write(self, data: bytes) -> None:
        self.link.send(data)

    def write_outputs(self, outputs) -> None:
        self.outputs = outputs


class FirmwareThread(threading.Thread):
    """Runs a :class:`FirmwareNode` loop until stopped."""

    def __init__(self, link, clock: Callable[[], float] = time.perf_counter):
        super().__init__(daemon=True, name="firmware")
        params = ParamStore({"SERIAL_ECHO": 1})
        self.firmware = Firmware(params)
        self.board = BenchBoard(link, clock)
        self.node = FirmwareNode(self.firmware, self.board, heartbeat_period=0.0)
        self.clock = clock
        self._stop_evt = threading.Event()
        self.error: BaseException | None = None

    def run(self):
        last = self.clock()
        try:
            while not self._stop_evt.is_set():
                now = self.clock()
                self.node.step(max(now - last, 1e-6))
                last = now
        except BaseException as exc:  # surfaced by stop()
            self.error = exc

    def stop(self):
        self._stop_evt.set()
        self.join(timeout=2.0)
        if self.error is not None:
            raise self.error


def make_link(transport: str = "inproc", inject_delay: float = 0.0):
    """(companion_end, firmware_end) with ``inject_delay`` seconds each way."""
    if transport == "inproc":
        return inproc_pair(delay=inject_delay)
    if transport == "socket":
        a, b = socket_pair()
        if inject_delay:
            return DelayedEndpoint(a, inject_delay), DelayedEndpoint(b, inject_delay)
        return a, b
    raise ValueError(f"unknown transport {transport!r}")


@dataclass
class BenchmarkResult:
    stats: RttStats
    samples: list[float]
    bytes_sent: int
    duration: float


def run_benchmark(rate: float | None = 400.0, duration: float = 5.0, transport: str = "inproc",
                  inject_delay_ms: float = 0.0, clock: Callable[[], float] = time.perf_counter,
                  sleep: Callable[[float], None] = time.sleep, link=None) -> BenchmarkResult:
    """Stream echoed offboard commands for ``duration`` seconds.

    ``rate=None`` sends the next command as soon as the previous echo lands.
    ``clock``/``sleep`` pace the send schedule and may be simulated.
    """
    if link is None:
        link = make_link(transport, inject_delay_ms / 1e3)
    comp, fw_end = link
    server = FirmwareThread(fw_end)
    server.start()
    echo = Echoer(comp)
    samples: list[float] = []
    try:
        t_start = clock()
        k = 0
        while True:
            if rate is not None:
                due = t_start + k / rate
                if due >= t_start + duration:
                    break
                wait = due - clock()
                if wait > 0:
                    sleep(wait)
            elif clock() - t_start >= duration:
                break
            u = (float(k % (1 << 24)), 0.0, -1.0, 0.0, 0.0, 0.0)
            samples.append(echo.roundtrip(proto.OffboardCommand(u)))
            k += 1
        elapsed = duration if rate is not None else clock() - t_start
    finally:
        server.stop()
    bytes_sent = getattr(comp, "bytes_sent", getattr(getattr(comp, "inner", None), "bytes_sent", 0))
    return BenchmarkResult(rtt_stats(samples, elapsed), samples, bytes_sent, elapsed)
