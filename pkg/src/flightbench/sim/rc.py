"""Scripted RC safety pilot."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence

from ..firmware import RcChannels

STICKS = ("roll", "pitch", "yaw", "throttle")
SWITCHES = ("attitude_override", "throttle_override", "arm", "valid")


@dataclass(frozen=True)
class RcKeyframe:
    """Values from time ``t`` on. Sticks left as None hold (and interpolate from) the previous frame."""

    t: float
    roll: float | None = None
    pitch: float | None = None
    yaw: float | None = None
    throttle: float | None = None
    attitude_override: bool | None = None
    throttle_override: bool | None = None
    arm: bool | None = None
    valid: bool | None = None
    hold: bool = False  # step (no interpolation) into this frame's stick values


class RcScript:
    """Piecewise-linear sticks, piecewise-constant switches.

    Sticks ramp linearly from one keyframe to the next (unless the target frame
    sets ``hold``); switches change exactly at their keyframe time. Past the
    last keyframe everything holds.
    """

    def __init__(self, frames: Sequence[RcKeyframe] = ()):
        frames = sorted(frames, key=lambda f: f.t)
        self.times = [f.t for f in frames]
        self.frames = frames
        # resolve holes so each frame is complete
        cur = {**{s: 0.0 for s in STICKS}, "attitude_override": False, "throttle_override": False,
               "arm": False, "valid": True}
        self.resolved: list[dict] = []
        for f in frames:
            for k in (*STICKS, *SWITCHES):
                v = getattr(f, k)
                if v is not None:
                    cur[k] = v
            self.resolved.append(dict(cur))
        self._neutral = RcChannels()

    def __call__(self, t: float) -> RcChannels:
        if not self.frames:
            return self._neutral
        i = bisect.bisect_right(self.times, t) - 1
        if i < 0:
            return self._neutral
        cur = self.resolved[i]
        vals = dict(cur)
        if i + 1 < len(self.frames) and not self.frames[i + 1].hold:
            t0, t1 = self.times[i], self.times[i + 1]
            nxt = self.resolved[i + 1]
            a = (t - t0) / (t1 - t0) if t1 > t0 else 0.0
            for s in STICKS:
                vals[s] = cur[s] + a * (nxt[s] - cur[s])
        return RcChannels(**vals)


def rc_script_step(script: RcScript, t: float) -> RcChannels:
    return script(t)
