"""SIL board: the firmware's hardware interface backed by simulator modules."""

from __future__ import annotations

import numpy as np

from ..firmware import Firmware, FirmwareNode, ImuSample, RcChannels
from .clock import SimClock


class SilBoard:
    def __init__(self, clock: SimClock, serial):
        self._clock = clock
        self.serial = serial
        self.rc = RcChannels()
        self.imu: ImuSample | None = None
        self.outputs = np.zeros(10)

    def clock(self) -> float:
        return self._clock.t

    def read_rc(self) -> RcChannels:
        return self.rc

    def read_imu(self) -> ImuSample | None:
        return self.imu

    def serial_read(self) -> bytes:
        return self.serial.read(0.0)

    def serial_write(self, data: bytes) -> None:
        self.serial.send(data)

    def write_outputs(self, outputs) -> None:
        self.outputs = np.array(outputs, dtype=float)


def sil_board_bind(firmware: Firmware, clock: SimClock, serial, stream_imu: bool = False):
    """Wire an unmodified firmware core to simulated hardware; returns (board, node)."""
    board = SilBoard(clock, serial)
    node = FirmwareNode(firmware, board, stream_imu=stream_imu)
    return board, node
